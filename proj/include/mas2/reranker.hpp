#pragma once

#include "mas2/dataset.hpp"

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mas2 {

/// Output representation of a (question, candidate) pair from an encoder.
using EmbeddingVector = std::vector<double>;

/// Classification layer z = W^T x + b. W is stored row-major as d rows of
/// k columns; class index 1 is the positive ("correct answer") class.
class LinearHead {
public:
    LinearHead(std::size_t dim, std::size_t classes, std::vector<double> weights,
               std::vector<double> bias);

    static LinearHead zeros(std::size_t dim, std::size_t classes = 2);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t classes() const noexcept { return classes_; }
    double weight(std::size_t row, std::size_t col) const { return weights_[row * classes_ + col]; }
    std::span<const double> bias() const noexcept { return bias_; }

    std::vector<double> logits(std::span<const double> x) const;

private:
    std::size_t dim_;
    std::size_t classes_;
    std::vector<double> weights_;
    std::vector<double> bias_;
};

/// softmax(W^T x + b)[1]: probability that the pair is a correct answer.
double linear_head_apply(std::span<const double> x, const LinearHead& head);

/// What a scorer sees of one (question, candidate) pair. Ids may be empty
/// when the pair arrives over the wire.
struct ScoringPair {
    std::string_view question_id;
    std::string_view candidate_id;
    std::string_view candidate_origin_id;
    std::string_view question;
    std::string_view candidate;
};

/// Produces p(q, t) in [0, 1] for a batch of pairs. Implementations are
/// immutable after construction and safe to call concurrently.
class Scorer {
public:
    virtual ~Scorer() = default;

    virtual std::vector<double> score_batch(std::span<const ScoringPair> pairs) const = 0;
};

struct RankedEntry {
    std::string candidate_id;
    double score;

    friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

/// Candidates by descending score; equal scores by ascending candidate id.
using RankedList = std::vector<RankedEntry>;

/// Sorts in place into RankedList order.
void sort_ranked(RankedList& entries);

/// Scores every candidate of `question` and orders them. Throws ScorerError
/// on an empty candidate list, a wrong result count or a score outside [0, 1].
RankedList rank(const Question& question, std::span<const AnswerCandidate> candidates,
                const Scorer& scorer);

/// Document frequencies over a corpus of texts, tokenized with tokenize().
class IdfTable {
public:
    IdfTable() = default;

    static IdfTable build(std::span<const std::string> documents);

    /// ln((N + 1) / (df(w) + 1)) + 1; unseen terms have df = 0.
    double idf(const std::string& term) const;
    std::size_t num_documents() const noexcept { return num_documents_; }
    std::size_t document_frequency(const std::string& term) const;

private:
    std::size_t num_documents_ = 0;
    std::unordered_map<std::string, std::size_t> df_;
};

/// Sparse tf-idf vector keyed by term, in byte order of the terms.
using TermVector = std::map<std::string, double>;

TermVector tfidf_vector(std::string_view text, const IdfTable& idf);
/// Cosine of two non-negative sparse vectors, clamped to [0, 1]; 0 when
/// either is zero.
double cosine(const TermVector& a, const TermVector& b);

/// Native baseline scorer: tf-idf cosine between question and candidate.
double lexical_score(std::string_view question, std::string_view candidate, const IdfTable& idf);

class LexicalScorer final : public Scorer {
public:
    explicit LexicalScorer(IdfTable idf) : idf_(std::move(idf)) {}

    std::vector<double> score_batch(std::span<const ScoringPair> pairs) const override;

    const IdfTable& idf() const noexcept { return idf_; }

private:
    IdfTable idf_;
};

/// Precomputed scores. A pair is looked up by candidate id, then by
/// candidate origin id, then by exact (question, candidate) text.
class StaticScorer final : public Scorer {
public:
    /// JSONL lines of {"cid": str, "score": float} or
    /// {"q": str, "t": str, "score": float}. Throws DataError.
    static StaticScorer load(const std::filesystem::path& path);

    void set_by_id(std::string candidate_id, double score);
    void set_by_text(std::string question, std::string candidate, double score);

    std::vector<double> score_batch(std::span<const ScoringPair> pairs) const override;

    std::size_t size() const noexcept { return by_id_.size() + by_text_.size(); }

private:
    std::unordered_map<std::string, double> by_id_;
    std::unordered_map<std::string, double> by_text_;
};

struct RemoteScorerOptions {
    std::size_t batch_size = 128;
    int max_seq_len = 128;
    std::chrono::seconds timeout{60};
};

/// Client for the scoring protocol:
///   POST {"max_seq_len":n,"pairs":[{"q":..,"t":..}]} -> 200 {"scores":[..]}
/// Pairs are sent in consecutive batches; results keep input order.
class RemoteScorer final : public Scorer {
public:
    explicit RemoteScorer(std::string endpoint, RemoteScorerOptions options = {});

    std::vector<double> score_batch(std::span<const ScoringPair> pairs) const override;

    std::size_t requests_sent() const noexcept { return requests_.load(); }

private:
    std::string endpoint_;
    RemoteScorerOptions options_;
    mutable std::atomic<std::size_t> requests_{0};
};

/// Scores `pairs` through `scorer` in order; convenience for callers holding
/// plain strings.
std::vector<double> remote_score_batch(std::span<const std::pair<std::string, std::string>> pairs,
                                       const RemoteScorer& scorer);

} // namespace mas2
