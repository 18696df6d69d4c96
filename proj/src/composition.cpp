#include "mas2/composition.hpp"

#include "mas2/errors.hpp"

#include <map>
#include <unordered_map>
#include <unordered_set>

namespace mas2 {

namespace {

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_blank(char c) { return c == ' ' || c == '\t'; }

Term parse_term(std::string_view expr, std::size_t begin, std::size_t end) {
    while (begin < end && is_blank(expr[begin])) ++begin;
    while (end > begin && is_blank(expr[end - 1])) --end;
    if (begin == end) {
        const bool trailing = end == expr.size() || expr.find_first_not_of(" \t", end) == std::string_view::npos;
        throw ParseError(trailing && begin > 0 ? "trailing '+' in composition expression"
                                               : "empty term in composition expression",
                         begin);
    }
    std::vector<LanguageCode> codes;
    std::size_t i = begin;
    while (i < end) {
        const std::size_t start = i;
        if (!is_upper(expr[i]))
            throw ParseError("unparsable token at '" + std::string(expr.substr(i, end - i)) +
                                 "': language codes are written like 'En'",
                             i);
        ++i;
        while (i < end && is_lower(expr[i])) ++i;
        if (i < end && !is_upper(expr[i]))
            throw ParseError("unexpected character '" + std::string(1, expr[i]) + "'", i);
        std::string code;
        for (std::size_t k = start; k < i; ++k) code.push_back(static_cast<char>(expr[k] | 0x20));
        if (!LanguageCode::is_valid(code))
            throw ParseError("invalid language code '" + std::string(expr.substr(start, i - start)) + "'", start);
        codes.emplace_back(std::move(code));
    }
    if (codes.size() > 2)
        throw ParseError("term '" + std::string(expr.substr(begin, end - begin)) +
                             "' names more than two languages",
                         begin);
    if (codes.size() == 1) return Term{codes[0], codes[0]};
    return Term{codes[0], codes[1]};
}

} // namespace

CompositionExpr parse_composition(std::string_view expr) {
    if (expr.find_first_not_of(" \t") == std::string_view::npos)
        throw ParseError("empty composition expression", 0);
    CompositionExpr out;
    std::size_t begin = 0;
    while (true) {
        const auto plus = expr.find('+', begin);
        const auto end = plus == std::string_view::npos ? expr.size() : plus;
        out.terms.push_back(parse_term(expr, begin, end));
        if (plus == std::string_view::npos) break;
        begin = plus + 1;
    }
    return out;
}

std::string display_code(const LanguageCode& lang) {
    std::string s = lang.str();
    s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

std::string render(const Term& term) {
    return term.mixed() ? display_code(term.question_lang) + display_code(term.candidate_lang)
                        : display_code(term.question_lang);
}

std::string render(const CompositionExpr& expr) {
    std::string out;
    for (const auto& t : expr.terms) {
        if (!out.empty()) out.push_back('+');
        out += render(t);
    }
    return out;
}

std::optional<LanguageCode> dataset_language(const Dataset& d) {
    std::optional<LanguageCode> lang;
    auto check = [&](const LanguageCode& l, const std::string& id) {
        if (!lang)
            lang = l;
        else if (*lang != l)
            throw DataError("dataset '" + d.name + "' mixes languages '" + lang->str() + "' and '" + l.str() +
                            "' (record '" + id + "')");
    };
    for (const auto& g : d.groups) {
        check(g.question.language, g.question.id);
        for (const auto& c : g.candidates) check(c.language, c.id);
    }
    return lang;
}

namespace {

struct TextSlot {
    std::string* text;
    LanguageCode* language;
    ProvenanceChain* provenance;
    const std::string* id;
};

} // namespace

Dataset transfer(const Dataset& d, Translator& translator, const LanguageCode& target) {
    Dataset out = d;
    // Slots to translate, bucketed by source language in order of first appearance.
    std::vector<std::pair<LanguageCode, std::vector<TextSlot>>> buckets;
    auto enqueue = [&](TextSlot slot) {
        if (*slot.language == target) return;
        for (auto& [lang, slots] : buckets) {
            if (lang == *slot.language) {
                slots.push_back(slot);
                return;
            }
        }
        buckets.emplace_back(*slot.language, std::vector<TextSlot>{slot});
    };
    for (auto& g : out.groups) {
        auto& q = g.question;
        enqueue({&q.text, &q.language, &q.provenance, &q.id});
        for (auto& c : g.candidates) enqueue({&c.text, &c.language, &c.provenance, &c.id});
    }

    for (auto& [src, slots] : buckets) {
        TranslationRequest request{{}, src, target};
        request.texts.reserve(slots.size());
        for (const auto& s : slots) request.texts.push_back(*s.text);
        std::vector<std::string> translated;
        try {
            translated = translator.translate_batch(request);
        } catch (const TranslationError& e) {
            if (e.index() < slots.size())
                throw TranslationError("record '" + *slots[e.index()].id + "': " + e.what(), e.index());
            throw TranslationError("translating " + src.str() + "->" + target.str() + " from record '" +
                                   *slots.front().id + "': " + e.what());
        } catch (const Error& e) {
            throw TranslationError("translating " + src.str() + "->" + target.str() + " from record '" +
                                   *slots.front().id + "': " + e.what());
        }
        if (translated.size() != slots.size())
            throw TranslationError("translator returned " + std::to_string(translated.size()) +
                                   " texts for " + std::to_string(slots.size()) + " (first record '" +
                                   *slots.front().id + "')");
        for (std::size_t i = 0; i < slots.size(); ++i) {
            *slots[i].text = std::move(translated[i]);
            *slots[i].language = target;
            slots[i].provenance->push_back(target);
        }
    }
    return out;
}

Dataset mix(const Dataset& questions_from, const Dataset& candidates_from) {
    std::unordered_map<std::string, const Question*> questions_by_origin;
    std::unordered_map<std::string, const AnswerCandidate*> candidates_by_origin;
    for (const auto& g : candidates_from.groups) {
        if (!questions_by_origin.emplace(g.question.origin_id, &g.question).second)
            throw DataError("duplicate question origin_id '" + g.question.origin_id + "' in '" +
                            candidates_from.name + "'");
        for (const auto& c : g.candidates)
            if (!candidates_by_origin.emplace(c.origin_id, &c).second)
                throw DataError("duplicate candidate origin_id '" + c.origin_id + "' in '" +
                                candidates_from.name + "'");
    }

    std::unordered_set<std::string> seen_questions;
    std::unordered_set<std::string> seen_candidates;
    Dataset out{questions_from.name, questions_from.split, {}};
    out.groups.reserve(questions_from.groups.size());
    for (const auto& g : questions_from.groups) {
        if (!seen_questions.insert(g.question.origin_id).second)
            throw DataError("duplicate question origin_id '" + g.question.origin_id + "' in '" +
                            questions_from.name + "'");
        if (!questions_by_origin.contains(g.question.origin_id))
            throw DataError("question origin_id '" + g.question.origin_id + "' missing from '" +
                            candidates_from.name + "'");
        QuestionGroup mixed{g.question, {}};
        mixed.candidates.reserve(g.candidates.size());
        for (const auto& c : g.candidates) {
            if (!seen_candidates.insert(c.origin_id).second)
                throw DataError("duplicate candidate origin_id '" + c.origin_id + "' in '" + questions_from.name +
                                "'");
            auto it = candidates_by_origin.find(c.origin_id);
            if (it == candidates_by_origin.end())
                throw DataError("candidate origin_id '" + c.origin_id + "' missing from '" + candidates_from.name +
                                "'");
            AnswerCandidate joined = *it->second;
            joined.question_id = g.question.id;
            mixed.candidates.push_back(std::move(joined));
        }
        out.groups.push_back(std::move(mixed));
    }
    if (seen_questions.size() != questions_by_origin.size()) {
        for (const auto& g : candidates_from.groups)
            if (!seen_questions.contains(g.question.origin_id))
                throw DataError("question origin_id '" + g.question.origin_id + "' missing from '" +
                                questions_from.name + "'");
    }
    if (seen_candidates.size() != candidates_by_origin.size()) {
        for (const auto& g : candidates_from.groups)
            for (const auto& c : g.candidates)
                if (!seen_candidates.contains(c.origin_id))
                    throw DataError("candidate origin_id '" + c.origin_id + "' missing from '" +
                                    questions_from.name + "'");
    }
    return out;
}

Dataset concat(std::span<const Dataset> operands) {
    Dataset out;
    for (std::size_t k = 0; k < operands.size(); ++k) {
        const auto& d = operands[k];
        if (k == 0)
            out.split = d.split;
        else
            out.name += '+';
        out.name += d.name;
        const std::string suffix = "#" + std::to_string(k);
        for (const auto& g : d.groups) {
            QuestionGroup rekeyed = g;
            rekeyed.question.id += suffix;
            for (auto& c : rekeyed.candidates) {
                c.id += suffix;
                c.question_id += suffix;
            }
            out.groups.push_back(std::move(rekeyed));
        }
    }
    return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
    const Dataset operands[] = {a, b};
    return concat(std::span<const Dataset>(operands));
}

Dataset materialize(const CompositionExpr& plan, const Dataset& source, Translator& translator) {
    if (plan.terms.empty()) throw UsageError("composition has no terms");
    const auto source_lang = dataset_language(source);

    std::map<LanguageCode, Dataset> transfers;
    auto in_language = [&](const LanguageCode& lang) -> const Dataset& {
        auto it = transfers.find(lang);
        if (it == transfers.end()) {
            auto translated =
                source_lang ? transfer(source, translator, lang) : Dataset{source.name, source.split, {}};
            it = transfers.emplace(lang, std::move(translated)).first;
        }
        return it->second;
    };

    std::vector<Dataset> parts;
    parts.reserve(plan.terms.size());
    for (const auto& term : plan.terms) {
        Dataset part = term.mixed() ? mix(in_language(term.question_lang), in_language(term.candidate_lang))
                                    : in_language(term.question_lang);
        part.name = render(term);
        parts.push_back(std::move(part));
    }
    if (parts.size() == 1) {
        if (source_lang && plan.terms[0] == Term{*source_lang, *source_lang}) return source;
        return std::move(parts.front());
    }
    Dataset out = concat(std::span<const Dataset>(parts));
    out.name = render(plan);
    return out;
}

} // namespace mas2
