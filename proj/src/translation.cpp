#include "mas2/translation.hpp"

#include "http_endpoint.hpp"
#include "mas2/errors.hpp"
#include "mas2/text.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <thread>
#include <unordered_set>

namespace mas2 {

namespace {

void check_request(const TranslationRequest& request) {
    if (request.src == request.tgt)
        throw UsageError("translation source and target are both '" + request.src.str() + "'");
}

} // namespace

std::string mock_translate(std::string_view text, const LanguageCode& src, const LanguageCode& tgt) {
    const std::string strip = src.str() + ":";
    const std::string add = tgt.str() + ":";
    std::string out;
    for (auto token : split_whitespace(text)) {
        if (!out.empty()) out.push_back(' ');
        if (token.starts_with(strip)) {
            out.append(token.substr(strip.size()));
        } else {
            out.append(add);
            out.append(token);
        }
    }
    return out;
}

std::vector<std::string> MockTranslator::translate_batch(const TranslationRequest& request) {
    check_request(request);
    ++calls_;
    texts_ += request.texts.size();
    std::vector<std::string> out;
    out.reserve(request.texts.size());
    for (const auto& t : request.texts) out.push_back(mock_translate(t, request.src, request.tgt));
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>>
plan_batches(const std::vector<std::string>& texts, std::size_t max_texts, std::size_t max_chars) {
    if (max_texts == 0) throw UsageError("max_texts must be positive");
    std::vector<std::pair<std::size_t, std::size_t>> batches;
    std::size_t begin = 0;
    std::size_t chars = 0;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const auto n = texts[i].size();
        const bool full = i - begin == max_texts || (i > begin && chars + n > max_chars);
        if (full) {
            batches.emplace_back(begin, i);
            begin = i;
            chars = 0;
        }
        chars += n;
    }
    if (begin < texts.size()) batches.emplace_back(begin, texts.size());
    return batches;
}

HttpTranslator::HttpTranslator(std::string endpoint, HttpTranslatorOptions options)
    : endpoint_(std::move(endpoint)), options_(options) {
    detail::parse_endpoint(endpoint_);
    if (options_.max_attempts < 1) throw UsageError("max_attempts must be at least 1");
}

std::vector<std::string> HttpTranslator::send_once(const TranslationRequest& request,
                                                   std::size_t begin, std::size_t end) {
    const auto ep = detail::parse_endpoint(endpoint_);
    nlohmann::json body{{"src", request.src.str()}, {"tgt", request.tgt.str()}};
    body["texts"] = nlohmann::json::array();
    for (std::size_t i = begin; i < end; ++i) body["texts"].push_back(request.texts[i]);
    const auto payload = body.dump();

    auto delay = options_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        httplib::Client client(ep.origin);
        client.set_connection_timeout(options_.timeout);
        client.set_read_timeout(options_.timeout);
        ++requests_;
        auto res = client.Post(ep.path, payload, "application/json");
        const bool retryable = !res || res->status >= 500;
        if (retryable && attempt < options_.max_attempts) {
            std::this_thread::sleep_for(delay);
            delay *= 2;
            continue;
        }
        if (!res)
            throw RemoteError(RemoteErrorKind::transport,
                              endpoint_ + ": " + httplib::to_string(res.error()));
        if (res->status != 200) {
            auto err = nlohmann::json::parse(res->body, nullptr, false);
            if (err.is_object() && err.contains("index") && err["index"].is_number_unsigned()) {
                const auto index = begin + err["index"].get<std::size_t>();
                throw TranslationError("translation failed for text " + std::to_string(index) + ": " +
                                           err.value("error", std::string("unknown error")),
                                       index);
            }
            throw RemoteError(RemoteErrorKind::status,
                              endpoint_ + " returned HTTP " + std::to_string(res->status), res->status);
        }
        auto reply = nlohmann::json::parse(res->body, nullptr, false);
        if (!reply.is_object() || !reply.contains("texts") || !reply["texts"].is_array())
            throw RemoteError(RemoteErrorKind::malformed_response, endpoint_ + ": expected {\"texts\":[...]}");
        const auto& texts = reply["texts"];
        if (texts.size() != end - begin)
            throw RemoteError(RemoteErrorKind::count_mismatch,
                              endpoint_ + ": sent " + std::to_string(end - begin) + " texts, got " +
                                  std::to_string(texts.size()));
        std::vector<std::string> out;
        out.reserve(texts.size());
        for (const auto& t : texts) {
            if (!t.is_string())
                throw RemoteError(RemoteErrorKind::malformed_response, endpoint_ + ": non-string translation");
            out.push_back(t.get<std::string>());
        }
        return out;
    }
}

std::vector<std::string> HttpTranslator::translate_batch(const TranslationRequest& request) {
    check_request(request);
    std::vector<std::string> out;
    out.reserve(request.texts.size());
    for (auto [begin, end] :
         plan_batches(request.texts, options_.max_texts_per_request, options_.max_chars_per_request)) {
        auto part = send_once(request, begin, end);
        std::move(part.begin(), part.end(), std::back_inserter(out));
    }
    return out;
}

std::string TranslationCache::key(const LanguageCode& src, const LanguageCode& tgt,
                                  std::string_view hash) {
    std::string k = src.str();
    k += '\t';
    k += tgt.str();
    k += '\t';
    k += hash;
    return k;
}

TranslationCache::TranslationCache(std::filesystem::path path) : path_(std::move(path)) {
    std::vector<std::string> good_lines;
    if (std::filesystem::exists(*path_)) {
        std::ifstream in(*path_, std::ios::binary);
        if (!in) throw IoError("cannot read translation cache '" + path_->string() + "'");
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line, nullptr, false);
            const bool ok = j.is_object() && j.contains("src") && j["src"].is_string() &&
                            j.contains("tgt") && j["tgt"].is_string() && j.contains("hash") &&
                            j["hash"].is_string() && j.contains("text") && j["text"].is_string() &&
                            LanguageCode::is_valid(j["src"].get<std::string>()) &&
                            LanguageCode::is_valid(j["tgt"].get<std::string>());
            if (!ok) {
                ++dropped_;
                continue;
            }
            entries_[key(LanguageCode(j["src"].get<std::string>()), LanguageCode(j["tgt"].get<std::string>()),
                         j["hash"].get<std::string>())] = j["text"].get<std::string>();
            good_lines.push_back(std::move(line));
        }
    }
    if (dropped_ > 0) {
        auto tmp = *path_;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            for (const auto& l : good_lines) out << l << '\n';
            if (!out) throw IoError("cannot rewrite translation cache '" + path_->string() + "'");
        }
        std::filesystem::rename(tmp, *path_);
    }
    log_.open(*path_, std::ios::binary | std::ios::app);
    if (!log_) throw IoError("cannot open translation cache '" + path_->string() + "' for append");
}

std::optional<std::string> TranslationCache::lookup(const LanguageCode& src, const LanguageCode& tgt,
                                                    std::string_view text) const {
    const auto k = key(src, tgt, sha256_hex(text));
    std::lock_guard lock(mutex_);
    auto it = entries_.find(k);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void TranslationCache::store(const LanguageCode& src, const LanguageCode& tgt, std::string_view text,
                             const std::string& translation) {
    const auto hash = sha256_hex(text);
    std::lock_guard lock(mutex_);
    entries_[key(src, tgt, hash)] = translation;
    if (log_.is_open()) {
        nlohmann::ordered_json j;
        j["src"] = src.str();
        j["tgt"] = tgt.str();
        j["hash"] = hash;
        j["text"] = translation;
        log_ << j.dump() << '\n';
        log_.flush();
        if (!log_) throw IoError("append to translation cache failed");
    }
}

std::size_t TranslationCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

std::vector<std::string> CachedTranslator::translate_batch(const TranslationRequest& request) {
    check_request(request);
    std::vector<std::optional<std::string>> found(request.texts.size());
    TranslationRequest misses{{}, request.src, request.tgt};
    std::vector<std::size_t> miss_position;
    std::unordered_set<std::string_view> queued;
    for (std::size_t i = 0; i < request.texts.size(); ++i) {
        found[i] = cache_.lookup(request.src, request.tgt, request.texts[i]);
        if (!found[i] && queued.insert(request.texts[i]).second) {
            misses.texts.push_back(request.texts[i]);
            miss_position.push_back(i);
        }
    }
    if (!misses.texts.empty()) {
        std::vector<std::string> translated;
        try {
            translated = backend_.translate_batch(misses);
        } catch (const TranslationError& e) {
            if (e.index() >= miss_position.size()) throw;
            throw TranslationError(e.what(), miss_position[e.index()]);
        }
        if (translated.size() != misses.texts.size())
            throw RemoteError(RemoteErrorKind::count_mismatch,
                              "backend returned " + std::to_string(translated.size()) + " translations for " +
                                  std::to_string(misses.texts.size()) + " texts");
        for (std::size_t i = 0; i < translated.size(); ++i)
            cache_.store(request.src, request.tgt, misses.texts[i], translated[i]);
    }
    std::vector<std::string> out;
    out.reserve(request.texts.size());
    for (std::size_t i = 0; i < request.texts.size(); ++i) {
        if (!found[i]) found[i] = cache_.lookup(request.src, request.tgt, request.texts[i]);
        out.push_back(std::move(*found[i]));
    }
    return out;
}

} // namespace mas2
