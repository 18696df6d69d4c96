#include "mas2/dataset.hpp"

#include "mas2/errors.hpp"
#include "mas2/text.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace mas2 {

using ojson = nlohmann::ordered_json;

LanguageCode::LanguageCode(std::string code) : code_(std::move(code)) {
    if (!is_valid(code_)) throw UsageError("invalid language code '" + code_ + "'");
}

bool LanguageCode::is_valid(std::string_view code) noexcept {
    if (code.size() < 2 || code.size() > 8) return false;
    for (char c : code)
        if (c < 'a' || c > 'z') return false;
    return true;
}

std::string_view to_string(Split split) noexcept {
    switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
    }
    return "train";
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::train;
    if (text == "dev") return Split::dev;
    if (text == "test") return Split::test;
    throw UsageError("unknown split '" + std::string(text) + "'");
}

bool QuestionGroup::answerable() const noexcept {
    for (const auto& c : candidates)
        if (c.correct()) return true;
    return false;
}

std::size_t Dataset::num_candidates() const noexcept {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.candidates.size();
    return n;
}

namespace {

void check_provenance(const std::string& what, const LanguageCode& language,
                      const ProvenanceChain& provenance, std::vector<std::string>& out) {
    if (provenance.empty()) {
        out.push_back(what + ": empty provenance");
        return;
    }
    if (provenance.back() != language)
        out.push_back(what + ": language '" + language.str() + "' differs from last provenance hop '" +
                      provenance.back().str() + "'");
    for (std::size_t i = 1; i < provenance.size(); ++i)
        if (provenance[i] == provenance[i - 1])
            out.push_back(what + ": repeated consecutive provenance hop '" + provenance[i].str() + "'");
}

} // namespace

std::vector<std::string> validate(const Dataset& d) {
    std::vector<std::string> out;
    std::unordered_set<std::string> question_ids;
    std::unordered_set<std::string> candidate_ids;
    for (const auto& g : d.groups) {
        const auto& q = g.question;
        const std::string qwhat = "question '" + q.id + "'";
        if (q.id.empty()) out.push_back("question with empty id");
        if (q.origin_id.empty()) out.push_back(qwhat + ": empty origin_id");
        if (!question_ids.insert(q.id).second) out.push_back("duplicate question id '" + q.id + "'");
        check_provenance(qwhat, q.language, q.provenance, out);

        std::unordered_set<std::string> in_group;
        for (const auto& c : g.candidates) {
            const std::string cwhat = "candidate '" + c.id + "'";
            if (c.id.empty()) out.push_back(qwhat + ": candidate with empty id");
            if (c.origin_id.empty()) out.push_back(cwhat + ": empty origin_id");
            if (c.question_id != q.id)
                out.push_back(cwhat + ": references question '" + c.question_id + "' but is grouped under '" +
                              q.id + "'");
            const int label = static_cast<int>(c.label);
            if (label != 0 && label != 1) out.push_back(cwhat + ": label must be 0 or 1");
            if (!in_group.insert(c.id).second)
                out.push_back(qwhat + ": duplicate candidate id '" + c.id + "'");
            else if (!candidate_ids.insert(c.id).second)
                out.push_back("duplicate candidate id '" + c.id + "' across questions");
            check_provenance(cwhat, c.language, c.provenance, out);
        }
    }
    return out;
}

namespace {

std::string get_string(const nlohmann::json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string())
        throw DataError(std::string("missing or non-string field \"") + key + "\"", line);
    return it->get<std::string>();
}

LanguageCode get_language(const nlohmann::json& j, const char* key, std::size_t line) {
    auto code = get_string(j, key, line);
    if (!LanguageCode::is_valid(code)) throw DataError("invalid language code '" + code + "'", line);
    return LanguageCode(std::move(code));
}

ProvenanceChain get_provenance(const nlohmann::json& j, std::size_t line) {
    auto it = j.find("prov");
    if (it == j.end() || !it->is_array()) throw DataError("missing or non-array field \"prov\"", line);
    ProvenanceChain chain;
    for (const auto& hop : *it) {
        if (!hop.is_string() || !LanguageCode::is_valid(hop.get<std::string>()))
            throw DataError("invalid provenance hop", line);
        chain.emplace_back(hop.get<std::string>());
    }
    return chain;
}

struct PendingCandidate {
    AnswerCandidate candidate;
    std::size_t line;
};

} // namespace

Dataset read_dataset(std::istream& in, std::string name, Split split) {
    Dataset d{std::move(name), split, {}};
    std::unordered_map<std::string, std::size_t> group_of;
    std::vector<PendingCandidate> pending;

    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (normalize_whitespace(text).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError(std::string("malformed JSON: ") + e.what(), line);
        }
        if (!j.is_object()) throw DataError("record is not a JSON object", line);
        const auto kind = get_string(j, "kind", line);
        if (kind == "q") {
            Question q{get_string(j, "id", line), get_string(j, "origin_id", line),
                       get_string(j, "text", line), get_language(j, "lang", line),
                       get_provenance(j, line)};
            if (group_of.contains(q.id)) throw DataError("duplicate question id '" + q.id + "'", line);
            group_of.emplace(q.id, d.groups.size());
            d.groups.push_back(QuestionGroup{std::move(q), {}});
        } else if (kind == "c") {
            auto label_it = j.find("label");
            if (label_it == j.end() || !label_it->is_number_integer())
                throw DataError("missing or non-integer field \"label\"", line);
            const auto label = label_it->get<long long>();
            if (label != 0 && label != 1) throw DataError("label must be 0 or 1", line);
            AnswerCandidate c{get_string(j, "id", line), get_string(j, "qid", line),
                              get_string(j, "origin_id", line), get_string(j, "text", line),
                              label == 1 ? Label::correct : Label::incorrect,
                              get_language(j, "lang", line), get_provenance(j, line)};
            pending.push_back({std::move(c), line});
        } else {
            throw DataError("unknown record kind '" + kind + "'", line);
        }
    }
    for (auto& p : pending) {
        auto it = group_of.find(p.candidate.question_id);
        if (it == group_of.end())
            throw DataError("candidate '" + p.candidate.id + "' references unknown question '" +
                                p.candidate.question_id + "'",
                            p.line);
        d.groups[it->second].candidates.push_back(std::move(p.candidate));
    }
    return d;
}

Dataset load_dataset(const std::filesystem::path& path, Split split) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
    auto d = read_dataset(in, path.stem().string(), split);
    auto violations = validate(d);
    if (!violations.empty()) throw DataError(path.string() + ": " + violations.front());
    return d;
}

namespace {

ojson provenance_json(const ProvenanceChain& chain) {
    ojson arr = ojson::array();
    for (const auto& hop : chain) arr.push_back(hop.str());
    return arr;
}

} // namespace

void write_dataset(const Dataset& d, std::ostream& out) {
    for (const auto& g : d.groups) {
        const auto& q = g.question;
        ojson qj;
        qj["kind"] = "q";
        qj["id"] = q.id;
        qj["origin_id"] = q.origin_id;
        qj["text"] = q.text;
        qj["lang"] = q.language.str();
        qj["prov"] = provenance_json(q.provenance);
        out << qj.dump() << '\n';
        for (const auto& c : g.candidates) {
            ojson cj;
            cj["kind"] = "c";
            cj["id"] = c.id;
            cj["qid"] = c.question_id;
            cj["origin_id"] = c.origin_id;
            cj["text"] = c.text;
            cj["label"] = static_cast<int>(c.label);
            cj["lang"] = c.language.str();
            cj["prov"] = provenance_json(c.provenance);
            out << cj.dump() << '\n';
        }
    }
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write dataset '" + path.string() + "'");
    write_dataset(d, out);
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string to_jsonl(const Dataset& d) {
    std::ostringstream out;
    write_dataset(d, out);
    return out.str();
}

std::string fingerprint(const Dataset& d) { return sha256_hex(to_jsonl(d)); }

DatasetStats stats(const Dataset& d) {
    DatasetStats s;
    s.num_questions = d.groups.size();
    for (const auto& g : d.groups)
        for (const auto& c : g.candidates) (c.correct() ? s.num_correct : s.num_incorrect)++;
    return s;
}

Dataset filter_answerable(const Dataset& d) {
    Dataset out{d.name, d.split, {}};
    for (const auto& g : d.groups)
        if (g.answerable()) out.groups.push_back(g);
    return out;
}

} // namespace mas2
