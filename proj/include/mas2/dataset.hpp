#pragma once

/// Core AS2 data model: questions, their answer candidates, labeled datasets,
/// and the JSONL record format used on disk.

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mas2 {

/// Lowercase ASCII language identifier of 2 to 8 letters ("en", "de", ...).
class LanguageCode {
public:
    /// Throws UsageError when `code` is not 2-8 lowercase ASCII letters.
    explicit LanguageCode(std::string code);

    static bool is_valid(std::string_view code) noexcept;

    const std::string& str() const noexcept { return code_; }

    friend bool operator==(const LanguageCode&, const LanguageCode&) = default;
    friend auto operator<=>(const LanguageCode&, const LanguageCode&) = default;

private:
    std::string code_;
};

/// Languages a text has passed through, original language first.
using ProvenanceChain = std::vector<LanguageCode>;

enum class Label : int { incorrect = 0, correct = 1 };

enum class Split { train, dev, test };

std::string_view to_string(Split split) noexcept;
/// Accepts "train", "dev", "test"; throws UsageError otherwise.
Split parse_split(std::string_view text);

struct Question {
    std::string id;
    std::string origin_id;
    std::string text;
    LanguageCode language;
    ProvenanceChain provenance;

    friend bool operator==(const Question&, const Question&) = default;
};

struct AnswerCandidate {
    std::string id;
    std::string question_id;
    std::string origin_id;
    std::string text;
    Label label;
    LanguageCode language;
    ProvenanceChain provenance;

    bool correct() const noexcept { return label == Label::correct; }

    friend bool operator==(const AnswerCandidate&, const AnswerCandidate&) = default;
};

struct QuestionGroup {
    Question question;
    std::vector<AnswerCandidate> candidates;

    bool answerable() const noexcept;

    friend bool operator==(const QuestionGroup&, const QuestionGroup&) = default;
};

struct Dataset {
    std::string name;
    Split split = Split::train;
    std::vector<QuestionGroup> groups;

    std::size_t num_candidates() const noexcept;
    bool empty() const noexcept { return groups.empty(); }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct DatasetStats {
    std::size_t num_questions = 0;
    std::size_t num_correct = 0;
    std::size_t num_incorrect = 0;

    friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

/// Every invariant violation in `d`, in a stable order. Empty means valid.
std::vector<std::string> validate(const Dataset& d);

/// Parses JSONL records without checking cross-record invariants beyond what
/// is needed to group candidates under their question. Throws DataError on a
/// malformed line, a duplicate question id, or a candidate whose question is
/// missing.
Dataset read_dataset(std::istream& in, std::string name, Split split);

/// read_dataset followed by validate; the first violation is thrown as DataError.
Dataset load_dataset(const std::filesystem::path& path, Split split);

/// Writes each group as its question record followed by its candidate records.
void write_dataset(const Dataset& d, std::ostream& out);
void save_dataset(const Dataset& d, const std::filesystem::path& path);

/// Canonical serialization; also the input of dataset fingerprints.
std::string to_jsonl(const Dataset& d);
std::string fingerprint(const Dataset& d);

DatasetStats stats(const Dataset& d);

/// Keeps only groups with at least one correct candidate.
Dataset filter_answerable(const Dataset& d);

} // namespace mas2
