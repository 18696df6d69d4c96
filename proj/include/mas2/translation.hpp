#pragma once

#include "mas2/dataset.hpp"

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mas2 {

struct TranslationRequest {
    std::vector<std::string> texts;
    LanguageCode src;
    LanguageCode tgt;
};

/// Machine translation backend. Implementations must return exactly one
/// output per input text, in order, or throw.
class Translator {
public:
    virtual ~Translator() = default;

    virtual std::vector<std::string> translate_batch(const TranslationRequest& request) = 0;
};

/// Token-prefix tagging: a token starting with "src:" loses that prefix,
/// any other token gains "tgt:". Whitespace is collapsed to single spaces.
std::string mock_translate(std::string_view text, const LanguageCode& src,
                           const LanguageCode& tgt);

class MockTranslator final : public Translator {
public:
    std::vector<std::string> translate_batch(const TranslationRequest& request) override;

    std::size_t calls() const noexcept { return calls_.load(); }
    std::size_t texts_translated() const noexcept { return texts_.load(); }

private:
    std::atomic<std::size_t> calls_{0};
    std::atomic<std::size_t> texts_{0};
};

struct HttpTranslatorOptions {
    std::size_t max_texts_per_request = 50;
    std::size_t max_chars_per_request = 4000;
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{200};
    std::chrono::seconds timeout{30};
};

/// Splits texts into consecutive batches holding at most `max_texts` texts
/// and at most `max_chars` bytes, except that a single oversized text forms
/// its own batch. Returns [begin, end) index pairs.
std::vector<std::pair<std::size_t, std::size_t>>
plan_batches(const std::vector<std::string>& texts, std::size_t max_texts, std::size_t max_chars);

/// Client for the generic MT service protocol:
///   POST {"src":..,"tgt":..,"texts":[..]} -> 200 {"texts":[..]}
/// Transport failures and 5xx responses are retried with exponential backoff.
class HttpTranslator final : public Translator {
public:
    explicit HttpTranslator(std::string endpoint, HttpTranslatorOptions options = {});

    std::vector<std::string> translate_batch(const TranslationRequest& request) override;

    std::size_t requests_sent() const noexcept { return requests_.load(); }

private:
    std::vector<std::string> send_once(const TranslationRequest& request, std::size_t begin,
                                       std::size_t end);

    std::string endpoint_;
    HttpTranslatorOptions options_;
    std::atomic<std::size_t> requests_{0};
};

/// Content-addressed translation memory persisted as append-only JSONL of
/// {"src","tgt","hash","text"}; later lines win. Unreadable lines are dropped
/// and the file is compacted on open.
class TranslationCache {
public:
    /// In-memory only cache.
    TranslationCache() = default;
    explicit TranslationCache(std::filesystem::path path);

    std::optional<std::string> lookup(const LanguageCode& src, const LanguageCode& tgt,
                                      std::string_view text) const;
    void store(const LanguageCode& src, const LanguageCode& tgt, std::string_view text,
               const std::string& translation);

    std::size_t size() const;
    /// Number of corrupt lines dropped while loading.
    std::size_t dropped_lines() const noexcept { return dropped_; }

private:
    static std::string key(const LanguageCode& src, const LanguageCode& tgt, std::string_view hash);

    std::optional<std::filesystem::path> path_;
    std::unordered_map<std::string, std::string> entries_;
    std::size_t dropped_ = 0;
    mutable std::mutex mutex_;
    std::ofstream log_;
};

/// Serves hits from the cache and forwards the distinct misses of a request
/// to the backend in a single call.
class CachedTranslator final : public Translator {
public:
    CachedTranslator(Translator& backend, TranslationCache& cache)
        : backend_(backend), cache_(cache) {}

    std::vector<std::string> translate_batch(const TranslationRequest& request) override;

private:
    Translator& backend_;
    TranslationCache& cache_;
};

} // namespace mas2
