#include "mas2/reranker.hpp"

#include "http_endpoint.hpp"
#include "mas2/errors.hpp"
#include "mas2/text.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

namespace mas2 {

LinearHead::LinearHead(std::size_t dim, std::size_t classes, std::vector<double> weights,
                       std::vector<double> bias)
    : dim_(dim), classes_(classes), weights_(std::move(weights)), bias_(std::move(bias)) {
    if (classes_ < 2) throw UsageError("linear head needs at least two classes");
    if (weights_.size() != dim_ * classes_)
        throw UsageError("linear head weights hold " + std::to_string(weights_.size()) + " values, expected " +
                         std::to_string(dim_ * classes_));
    if (bias_.size() != classes_) throw UsageError("linear head bias size differs from class count");
    for (double w : weights_)
        if (!std::isfinite(w)) throw UsageError("non-finite linear head weight");
    for (double b : bias_)
        if (!std::isfinite(b)) throw UsageError("non-finite linear head bias");
}

LinearHead LinearHead::zeros(std::size_t dim, std::size_t classes) {
    return LinearHead(dim, classes, std::vector<double>(dim * classes, 0.0), std::vector<double>(classes, 0.0));
}

std::vector<double> LinearHead::logits(std::span<const double> x) const {
    if (x.size() != dim_)
        throw ScorerError("embedding has dimension " + std::to_string(x.size()) + ", head expects " +
                          std::to_string(dim_));
    std::vector<double> z(bias_.begin(), bias_.end());
    for (std::size_t i = 0; i < dim_; ++i) {
        if (!std::isfinite(x[i])) throw ScorerError("non-finite embedding value");
        for (std::size_t j = 0; j < classes_; ++j) z[j] += weights_[i * classes_ + j] * x[i];
    }
    return z;
}

double linear_head_apply(std::span<const double> x, const LinearHead& head) {
    const auto z = head.logits(x);
    // softmax(z)[1] = 1 / sum_j exp(z_j - z_1)
    double denom = 0.0;
    for (double zj : z) denom += std::exp(zj - z[1]);
    const double p = 1.0 / denom;
    if (!std::isfinite(p)) throw ScorerError("non-finite head output");
    return p;
}

void sort_ranked(RankedList& entries) {
    std::sort(entries.begin(), entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.candidate_id < b.candidate_id;
    });
}

RankedList rank(const Question& question, std::span<const AnswerCandidate> candidates, const Scorer& scorer) {
    if (candidates.empty()) throw ScorerError("question '" + question.id + "' has no candidates to rank");
    std::vector<ScoringPair> pairs;
    pairs.reserve(candidates.size());
    for (const auto& c : candidates)
        pairs.push_back({question.id, c.id, c.origin_id, question.text, c.text});
    const auto scores = scorer.score_batch(pairs);
    if (scores.size() != candidates.size())
        throw ScorerError("scorer returned " + std::to_string(scores.size()) + " scores for " +
                          std::to_string(candidates.size()) + " candidates");
    RankedList ranked;
    ranked.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!(scores[i] >= 0.0 && scores[i] <= 1.0))
            throw ScorerError("score " + std::to_string(scores[i]) + " for candidate '" + candidates[i].id +
                              "' is outside [0, 1]");
        ranked.push_back({candidates[i].id, scores[i]});
    }
    sort_ranked(ranked);
    return ranked;
}

IdfTable IdfTable::build(std::span<const std::string> documents) {
    IdfTable t;
    t.num_documents_ = documents.size();
    for (const auto& doc : documents) {
        auto tokens = tokenize(doc);
        std::unordered_set<std::string> unique(tokens.begin(), tokens.end());
        for (const auto& w : unique) ++t.df_[w];
    }
    return t;
}

std::size_t IdfTable::document_frequency(const std::string& term) const {
    auto it = df_.find(term);
    return it == df_.end() ? 0 : it->second;
}

double IdfTable::idf(const std::string& term) const {
    return std::log(static_cast<double>(num_documents_ + 1) /
                    static_cast<double>(document_frequency(term) + 1)) +
           1.0;
}

TermVector tfidf_vector(std::string_view text, const IdfTable& idf) {
    TermVector v;
    for (auto& w : tokenize(text)) v[std::move(w)] += 1.0;
    for (auto& [w, weight] : v) weight *= idf.idf(w);
    return v;
}

double cosine(const TermVector& a, const TermVector& b) {
    double dot = 0.0;
    for (const auto& [w, x] : a) {
        auto it = b.find(w);
        if (it != b.end()) dot += x * it->second;
    }
    if (dot == 0.0) return 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (const auto& [w, x] : a) na += x * x;
    for (const auto& [w, x] : b) nb += x * x;
    return std::min(1.0, dot / (std::sqrt(na) * std::sqrt(nb)));
}

double lexical_score(std::string_view question, std::string_view candidate, const IdfTable& idf) {
    return cosine(tfidf_vector(question, idf), tfidf_vector(candidate, idf));
}

std::vector<double> LexicalScorer::score_batch(std::span<const ScoringPair> pairs) const {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(lexical_score(p.question, p.candidate, idf_));
    return out;
}

namespace {

std::string text_key(std::string_view q, std::string_view t) {
    std::string k(q);
    k.push_back('\0');
    k.append(t);
    return k;
}

} // namespace

StaticScorer StaticScorer::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open score file '" + path.string() + "'");
    StaticScorer s;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto j = nlohmann::json::parse(text, nullptr, false);
        if (!j.is_object() || !j.contains("score") || !j["score"].is_number())
            throw DataError("expected {\"cid\"|\"q\",\"t\", \"score\"} record", line);
        const double score = j["score"].get<double>();
        if (!(score >= 0.0 && score <= 1.0)) throw DataError("score outside [0, 1]", line);
        if (j.contains("cid") && j["cid"].is_string()) {
            s.set_by_id(j["cid"].get<std::string>(), score);
        } else if (j.contains("q") && j["q"].is_string() && j.contains("t") && j["t"].is_string()) {
            s.set_by_text(j["q"].get<std::string>(), j["t"].get<std::string>(), score);
        } else {
            throw DataError("score record needs \"cid\" or both \"q\" and \"t\"", line);
        }
    }
    return s;
}

void StaticScorer::set_by_id(std::string candidate_id, double score) { by_id_[std::move(candidate_id)] = score; }

void StaticScorer::set_by_text(std::string question, std::string candidate, double score) {
    by_text_[text_key(question, candidate)] = score;
}

std::vector<double> StaticScorer::score_batch(std::span<const ScoringPair> pairs) const {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        if (!p.candidate_id.empty()) {
            if (auto it = by_id_.find(std::string(p.candidate_id)); it != by_id_.end()) {
                out.push_back(it->second);
                continue;
            }
        }
        if (!p.candidate_origin_id.empty()) {
            if (auto it = by_id_.find(std::string(p.candidate_origin_id)); it != by_id_.end()) {
                out.push_back(it->second);
                continue;
            }
        }
        if (auto it = by_text_.find(text_key(p.question, p.candidate)); it != by_text_.end()) {
            out.push_back(it->second);
            continue;
        }
        throw ScorerError("no static score for candidate '" + std::string(p.candidate_id) + "'");
    }
    return out;
}

RemoteScorer::RemoteScorer(std::string endpoint, RemoteScorerOptions options)
    : endpoint_(std::move(endpoint)), options_(options) {
    detail::parse_endpoint(endpoint_);
    if (options_.batch_size == 0) throw UsageError("remote scorer batch size must be positive");
}

std::vector<double> RemoteScorer::score_batch(std::span<const ScoringPair> pairs) const {
    const auto ep = detail::parse_endpoint(endpoint_);
    std::vector<double> out;
    out.reserve(pairs.size());
    for (std::size_t begin = 0; begin < pairs.size(); begin += options_.batch_size) {
        const std::size_t end = std::min(pairs.size(), begin + options_.batch_size);
        nlohmann::json body;
        body["max_seq_len"] = options_.max_seq_len;
        body["pairs"] = nlohmann::json::array();
        for (std::size_t i = begin; i < end; ++i)
            body["pairs"].push_back({{"q", std::string(pairs[i].question)}, {"t", std::string(pairs[i].candidate)}});

        httplib::Client client(ep.origin);
        client.set_connection_timeout(options_.timeout);
        client.set_read_timeout(options_.timeout);
        ++requests_;
        auto res = client.Post(ep.path, body.dump(), "application/json");
        if (!res) throw RemoteError(RemoteErrorKind::transport, endpoint_ + ": " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw RemoteError(RemoteErrorKind::status, endpoint_ + " returned HTTP " + std::to_string(res->status),
                              res->status);
        auto reply = nlohmann::json::parse(res->body, nullptr, false);
        if (!reply.is_object() || !reply.contains("scores") || !reply["scores"].is_array())
            throw RemoteError(RemoteErrorKind::malformed_response, endpoint_ + ": expected {\"scores\":[...]}");
        const auto& scores = reply["scores"];
        if (scores.size() != end - begin)
            throw RemoteError(RemoteErrorKind::count_mismatch, endpoint_ + ": sent " + std::to_string(end - begin) +
                                                                   " pairs, got " + std::to_string(scores.size()) +
                                                                   " scores");
        for (const auto& s : scores) {
            if (!s.is_number())
                throw RemoteError(RemoteErrorKind::malformed_response, endpoint_ + ": non-numeric score");
            const double v = s.get<double>();
            if (!(v >= 0.0 && v <= 1.0))
                throw RemoteError(RemoteErrorKind::score_out_of_range,
                                  endpoint_ + ": score " + std::to_string(v) + " outside [0, 1]");
            out.push_back(v);
        }
    }
    return out;
}

std::vector<double> remote_score_batch(std::span<const std::pair<std::string, std::string>> pairs,
                                       const RemoteScorer& scorer) {
    std::vector<ScoringPair> view;
    view.reserve(pairs.size());
    for (const auto& [q, t] : pairs) view.push_back({{}, {}, {}, q, t});
    return scorer.score_batch(view);
}

} // namespace mas2
