#pragma once

/// In-process HTTP services implementing the scoring and MT wire protocols,
/// so end-to-end runs need no external dependencies.

#include "mas2/reranker.hpp"
#include "mas2/translation.hpp"

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

namespace mas2 {

/// {"max_seq_len":n,"pairs":[{"q","t"}]} -> {"scores":[..]}. Throws
/// UsageError on a malformed request.
nlohmann::json handle_score_request(const nlohmann::json& request, const Scorer& scorer);

/// {"src","tgt","texts":[..]} -> {"texts":[..]}.
nlohmann::json handle_translate_request(const nlohmann::json& request, Translator& translator);

/// Minimal JSON-over-HTTP server running on a background thread.
class MockService {
public:
    virtual ~MockService();

    MockService(const MockService&) = delete;
    MockService& operator=(const MockService&) = delete;

    /// Binds `host:port` (port 0 picks a free one) and starts serving.
    /// Returns the bound port.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    /// Binds and serves on the calling thread until stop() is called.
    void run(const std::string& host, int port);
    void stop();

    int port() const noexcept { return port_; }
    std::string url() const;
    std::size_t requests() const noexcept { return requests_.load(); }

protected:
    MockService(std::string path);

    virtual nlohmann::json handle(const nlohmann::json& request) = 0;

private:
    struct Impl;

    std::string path_;
    std::unique_ptr<Impl> impl_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<std::size_t> requests_{0};
};

/// Serves POST /score.
class MockScorerService final : public MockService {
public:
    explicit MockScorerService(std::shared_ptr<const Scorer> scorer);
    ~MockScorerService() override;

protected:
    nlohmann::json handle(const nlohmann::json& request) override;

private:
    std::shared_ptr<const Scorer> scorer_;
};

/// Serves POST /translate with the token-prefix mock translator.
class MockTranslatorService final : public MockService {
public:
    MockTranslatorService();
    ~MockTranslatorService() override;

protected:
    nlohmann::json handle(const nlohmann::json& request) override;

private:
    MockTranslator translator_;
};

} // namespace mas2
