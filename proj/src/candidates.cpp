#include "mas2/candidates.hpp"

#include "mas2/errors.hpp"
#include "mas2/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace mas2 {

namespace {

template <class F>
void for_each_json_line(const std::filesystem::path& path, F&& f) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw DataError(path.string() + ": malformed JSON record", line);
        f(j, line);
    }
}

std::string require_string(const nlohmann::json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string())
        throw DataError(std::string("missing or non-string field \"") + key + "\"", line);
    return it->get<std::string>();
}

double idf_of(std::size_t n, std::size_t df) {
    return std::log(static_cast<double>(n + 1) / static_cast<double>(df + 1)) + 1.0;
}

} // namespace

std::span<const Posting> DocumentCorpus::postings(const std::string& term) const {
    auto it = index_.find(term);
    if (it == index_.end()) return {};
    return it->second;
}

double DocumentCorpus::idf(const std::string& term) const {
    return idf_of(documents_.size(), postings(term).size());
}

DocumentCorpus build_index(std::vector<Document> docs) {
    std::unordered_set<std::string> ids;
    for (const auto& d : docs)
        if (!ids.insert(d.id).second) throw DataError("duplicate document id '" + d.id + "'");

    DocumentCorpus corpus;
    std::vector<std::map<std::string, std::uint32_t>> term_counts(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        for (auto& w : tokenize(docs[i].text)) ++term_counts[i][std::move(w)];
        for (const auto& [w, tf] : term_counts[i])
            corpus.index_[w].push_back({static_cast<std::uint32_t>(i), tf});
    }
    corpus.documents_ = std::move(docs);
    corpus.norms_.resize(corpus.documents_.size(), 0.0);
    for (std::size_t i = 0; i < term_counts.size(); ++i) {
        double sum = 0.0;
        for (const auto& [w, tf] : term_counts[i]) {
            const double weight = static_cast<double>(tf) * corpus.idf(w);
            sum += weight * weight;
        }
        corpus.norms_[i] = sum;
    }
    return corpus;
}

std::vector<Document> load_corpus(const std::filesystem::path& path) {
    std::vector<Document> docs;
    for_each_json_line(path, [&](const nlohmann::json& j, std::size_t line) {
        docs.push_back({require_string(j, "id", line), require_string(j, "text", line)});
    });
    return docs;
}

std::vector<ScoredDocument> retrieve_documents(std::string_view query, const DocumentCorpus& corpus, std::size_t k) {
    if (k == 0) throw UsageError("retrieval depth k must be at least 1");
    std::map<std::string, double> q;
    for (auto& w : tokenize(query)) q[std::move(w)] += 1.0;
    if (q.empty()) throw UsageError("query has no searchable tokens");

    double q_norm = 0.0;
    for (auto& [w, weight] : q) {
        weight *= corpus.idf(w);
        q_norm += weight * weight;
    }
    // Accumulating in sorted query-term order gives each document the same
    // dot product a direct sparse-vector computation would.
    std::vector<double> dot(corpus.size(), 0.0);
    for (const auto& [w, qw] : q) {
        const double idf = corpus.idf(w);
        for (const auto& p : corpus.postings(w)) dot[p.doc] += qw * (static_cast<double>(p.tf) * idf);
    }

    std::vector<ScoredDocument> scored;
    scored.reserve(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        double s = 0.0;
        if (dot[i] != 0.0) s = std::min(1.0, dot[i] / (std::sqrt(q_norm) * std::sqrt(corpus.norm(i))));
        scored.push_back({corpus.documents()[i].id, s});
    }
    const auto n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                      [](const ScoredDocument& a, const ScoredDocument& b) {
                          if (a.score != b.score) return a.score > b.score;
                          return a.id < b.id;
                      });
    scored.resize(n);
    return scored;
}

std::vector<Sentence> split_sentences(std::string_view text) {
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
    std::vector<Sentence> out;
    auto emit = [&](std::size_t begin, std::size_t end) {
        while (begin < end && is_space(text[begin])) ++begin;
        while (end > begin && is_space(text[end - 1])) --end;
        if (end > begin) out.push_back({std::string(text.substr(begin, end - begin)), begin, end});
    };
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if ((c == '.' || c == '!' || c == '?') && (i + 1 == text.size() || is_space(text[i + 1]))) {
            emit(start, i + 1);
            start = i + 1;
        }
    }
    emit(start, text.size());
    return out;
}

std::vector<std::string> corpus_sentences(const DocumentCorpus& corpus, const SentenceSplitter& splitter) {
    std::vector<std::string> out;
    for (const auto& d : corpus.documents())
        for (auto& s : splitter(d.text)) out.push_back(std::move(s.text));
    return out;
}

std::vector<SentenceCandidate> select_candidates(const Question& question, const DocumentCorpus& corpus,
                                                 const Scorer& scorer, const CandidateOptions& options) {
    if (options.k_sents == 0) throw UsageError("k_sents must be at least 1");
    std::vector<SentenceCandidate> pool;
    const auto& splitter = options.splitter ? options.splitter : SentenceSplitter(split_sentences);
    for (const auto& doc : retrieve_documents(question.text, corpus, options.k_docs)) {
        const auto it = std::find_if(corpus.documents().begin(), corpus.documents().end(),
                                     [&](const Document& d) { return d.id == doc.id; });
        const auto sentences = splitter(it->text);
        for (std::size_t i = 0; i < sentences.size(); ++i)
            pool.push_back({doc.id + ":" + std::to_string(i), question.id, doc.id, i, sentences[i].text, 0.0});
    }
    if (pool.empty()) throw UsageError("no candidate sentences retrieved for question '" + question.id + "'");

    std::vector<ScoringPair> pairs;
    pairs.reserve(pool.size());
    for (const auto& c : pool) pairs.push_back({question.id, c.id, c.id, question.text, c.text});
    const auto scores = scorer.score_batch(pairs);
    if (scores.size() != pool.size()) throw ScorerError("scorer returned the wrong number of scores");
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (!(scores[i] >= 0.0 && scores[i] <= 1.0))
            throw ScorerError("score for '" + pool[i].id + "' is outside [0, 1]");
        pool[i].score = scores[i];
    }
    std::stable_sort(pool.begin(), pool.end(), [](const SentenceCandidate& a, const SentenceCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    if (pool.size() > options.k_sents) pool.resize(options.k_sents);
    return pool;
}

std::vector<AnnotationTask> make_tasks(const Question& question, std::span<const SentenceCandidate> candidates) {
    std::vector<AnnotationTask> tasks;
    tasks.reserve(candidates.size());
    for (const auto& c : candidates) tasks.push_back({question.id, c.id, question.text, c.text, std::nullopt});
    return tasks;
}

void export_annotation_tasks(std::span<const AnnotationTask> tasks, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write annotation tasks '" + path.string() + "'");
    write_annotation_tasks(tasks, out);
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_annotation_tasks(std::span<const AnnotationTask> tasks, std::ostream& out) {
    for (const auto& t : tasks) {
        nlohmann::ordered_json j;
        j["qid"] = t.qid;
        j["cid"] = t.cid;
        j["q"] = t.question;
        j["t"] = t.candidate;
        j["label"] = t.label ? nlohmann::ordered_json(*t.label) : nlohmann::ordered_json(nullptr);
        out << j.dump() << '\n';
    }
}

std::vector<AnnotationTask> read_annotation_tasks(const std::filesystem::path& path) {
    std::vector<AnnotationTask> tasks;
    for_each_json_line(path, [&](const nlohmann::json& j, std::size_t line) {
        AnnotationTask t{require_string(j, "qid", line), require_string(j, "cid", line), require_string(j, "q", line),
                         require_string(j, "t", line), std::nullopt};
        auto it = j.find("label");
        if (it != j.end() && !it->is_null()) {
            if (!it->is_number_integer() || (it->get<long long>() != 0 && it->get<long long>() != 1))
                throw DataError("label must be null, 0 or 1", line);
            t.label = it->get<int>();
        }
        tasks.push_back(std::move(t));
    });
    return tasks;
}

void apply_gold(std::vector<AnnotationTask>& tasks, const std::filesystem::path& gold_path) {
    std::set<std::pair<std::string, std::string>> positives;
    for_each_json_line(gold_path, [&](const nlohmann::json& j, std::size_t line) {
        positives.emplace(require_string(j, "qid", line), require_string(j, "cid", line));
    });
    for (auto& t : tasks) t.label = positives.contains({t.qid, t.cid}) ? 1 : 0;
}

Dataset import_annotations(std::span<const AnnotationTask> tasks, const LanguageCode& language, Split split,
                           std::string name) {
    Dataset d{std::move(name), split, {}};
    std::unordered_map<std::string, std::size_t> group_of;
    for (const auto& t : tasks) {
        if (!t.label) throw DataError("task " + t.qid + "/" + t.cid + " has no label");
        auto [it, inserted] = group_of.emplace(t.qid, d.groups.size());
        if (inserted) {
            d.groups.push_back({Question{t.qid, t.qid, t.question, language, {language}}, {}});
        } else if (d.groups[it->second].question.text != t.question) {
            throw DataError("question '" + t.qid + "' appears with two different texts");
        }
        const std::string id = t.qid + "/" + t.cid;
        d.groups[it->second].candidates.push_back(AnswerCandidate{
            id, t.qid, id, t.candidate, *t.label == 1 ? Label::correct : Label::incorrect, language, {language}});
    }
    auto violations = validate(d);
    if (!violations.empty()) throw DataError(violations.front());
    return d;
}

std::vector<Question> load_questions(const std::filesystem::path& path, const LanguageCode& language) {
    std::vector<Question> out;
    std::unordered_set<std::string> ids;
    for_each_json_line(path, [&](const nlohmann::json& j, std::size_t line) {
        auto id = require_string(j, "id", line);
        if (!ids.insert(id).second) throw DataError("duplicate question id '" + id + "'", line);
        out.push_back(Question{id, id, require_string(j, "text", line), language, {language}});
    });
    return out;
}

} // namespace mas2
