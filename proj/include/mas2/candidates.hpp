#pragma once

/// Desk-scale candidate construction: a tf-idf inverted index stands in for
/// the web search engine, retrieved documents are split into sentences, the
/// pooled sentences are ranked by a scorer, and the top ones are exported as
/// annotation tasks.

#include "mas2/dataset.hpp"
#include "mas2/reranker.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mas2 {

struct Document {
    std::string id;
    std::string text;
};

struct Posting {
    std::uint32_t doc;   // index into DocumentCorpus::documents()
    std::uint32_t tf;
};

class DocumentCorpus {
public:
    const std::vector<Document>& documents() const noexcept { return documents_; }
    std::size_t size() const noexcept { return documents_.size(); }

    /// Postings for `term` (already tokenized), ordered by document index.
    std::span<const Posting> postings(const std::string& term) const;
    double idf(const std::string& term) const;
    double norm(std::size_t doc) const { return norms_[doc]; }

private:
    friend DocumentCorpus build_index(std::vector<Document> docs);

    std::vector<Document> documents_;
    std::unordered_map<std::string, std::vector<Posting>> index_;
    std::vector<double> norms_;
};

/// Throws DataError on duplicate document ids.
DocumentCorpus build_index(std::vector<Document> docs);

/// JSONL lines of {"id": str, "text": str}.
std::vector<Document> load_corpus(const std::filesystem::path& path);

struct ScoredDocument {
    std::string id;
    double score;
};

/// Top `k` documents by tf-idf cosine to `query`, ties by id. Documents with
/// zero similarity are still returned when fewer than k score positive.
/// Throws UsageError when the query has no tokens.
std::vector<ScoredDocument> retrieve_documents(std::string_view query, const DocumentCorpus& corpus,
                                               std::size_t k = 500);

struct Sentence {
    std::string text;
    std::size_t begin;  // byte offsets into the source text
    std::size_t end;
};

/// Ends a sentence after '.', '!' or '?' followed by whitespace or end of
/// text. Abbreviations are not recognised.
std::vector<Sentence> split_sentences(std::string_view text);

using SentenceSplitter = std::function<std::vector<Sentence>(std::string_view)>;

/// Unlabeled candidate sentence; id is "{doc_id}:{sentence_index}".
struct SentenceCandidate {
    std::string id;
    std::string question_id;
    std::string doc_id;
    std::size_t sentence_index;
    std::string text;
    double score;
};

struct CandidateOptions {
    std::size_t k_docs = 500;
    std::size_t k_sents = 100;
    SentenceSplitter splitter = split_sentences;
};

/// Every sentence of every document in the corpus; useful for fitting an
/// IdfTable over the sentence pool.
std::vector<std::string> corpus_sentences(const DocumentCorpus& corpus,
                                          const SentenceSplitter& splitter = split_sentences);

/// Throws UsageError when the retrieved documents contain no sentence.
std::vector<SentenceCandidate> select_candidates(const Question& question,
                                                 const DocumentCorpus& corpus, const Scorer& scorer,
                                                 const CandidateOptions& options = {});

/// One annotation unit; `label` is empty until annotated.
struct AnnotationTask {
    std::string qid;
    std::string cid;
    std::string question;
    std::string candidate;
    std::optional<int> label;
};

std::vector<AnnotationTask> make_tasks(const Question& question,
                                       std::span<const SentenceCandidate> candidates);

/// JSONL of {"qid","cid","q","t","label"} with label null when unset.
void export_annotation_tasks(std::span<const AnnotationTask> tasks,
                             const std::filesystem::path& path);
void write_annotation_tasks(std::span<const AnnotationTask> tasks, std::ostream& out);
std::vector<AnnotationTask> read_annotation_tasks(const std::filesystem::path& path);

/// Gold positives as JSONL {"qid": str, "cid": str}. Tasks listed in the
/// gold file get label 1, all others 0.
void apply_gold(std::vector<AnnotationTask>& tasks, const std::filesystem::path& gold_path);

/// Labeled tasks as a Dataset in `language`. Candidate ids become
/// "{qid}/{cid}" so they are unique across questions. Throws DataError on a
/// task without label.
Dataset import_annotations(std::span<const AnnotationTask> tasks, const LanguageCode& language,
                           Split split, std::string name);

/// Questions file: JSONL {"id": str, "text": str}.
std::vector<Question> load_questions(const std::filesystem::path& path,
                                     const LanguageCode& language);

} // namespace mas2
