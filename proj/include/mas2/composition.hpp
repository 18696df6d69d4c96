#pragma once

/// Dataset transfer algebra: translation of a whole dataset into another
/// language, mixed-language pairing, concatenation, and the small expression
/// language ("En+EnDe+De+DeEn") that names combinations of them.

#include "mas2/dataset.hpp"
#include "mas2/translation.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mas2 {

/// One operand of a composition: questions in `question_lang`, candidates in
/// `candidate_lang`. Equal languages denote a same-language dataset.
struct Term {
    LanguageCode question_lang;
    LanguageCode candidate_lang;

    bool mixed() const noexcept { return question_lang != candidate_lang; }

    friend bool operator==(const Term&, const Term&) = default;
};

struct CompositionExpr {
    std::vector<Term> terms;

    friend bool operator==(const CompositionExpr&, const CompositionExpr&) = default;
};

/// Grammar:
///   expr := term ("+" term)*
///   term := CODE | CODE CODE
///   CODE := [A-Z][a-z]+
/// Whitespace around "+" is ignored. Throws ParseError.
CompositionExpr parse_composition(std::string_view expr);

/// Canonical spelling, e.g. "En+EnDe". parse_composition(render(e)) == e.
std::string render(const CompositionExpr& expr);
std::string render(const Term& term);
/// "de" -> "De".
std::string display_code(const LanguageCode& lang);

/// Language shared by every record of `d`; nullopt when `d` is empty.
/// Throws DataError when records disagree.
std::optional<LanguageCode> dataset_language(const Dataset& d);

/// Translates every question and candidate text into `target`. Records
/// already in `target` are left untouched (no translator call, no new
/// provenance hop). Structure, ids, origin ids and labels are preserved.
Dataset transfer(const Dataset& d, Translator& translator, const LanguageCode& target);

/// Questions from `questions_from`, candidates from `candidates_from`,
/// joined on origin_id. Both operands must derive from the same source.
Dataset mix(const Dataset& questions_from, const Dataset& candidates_from);

/// Appends groups of `b` after those of `a`. Every id gets the suffix "#k"
/// where k is the operand index, so operands sharing ids stay distinct.
Dataset concat(const Dataset& a, const Dataset& b);
Dataset concat(std::span<const Dataset> operands);

/// Builds the dataset named by `plan` from an original-language `source`.
/// Transfers are computed once per language. A single-term plan is returned
/// without re-keying.
Dataset materialize(const CompositionExpr& plan, const Dataset& source, Translator& translator);

} // namespace mas2
