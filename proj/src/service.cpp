#include "mas2/service.hpp"

#include "mas2/errors.hpp"

#include <httplib.h>

namespace mas2 {

using nlohmann::json;

json handle_score_request(const json& request, const Scorer& scorer) {
    if (!request.is_object() || !request.contains("pairs") || !request["pairs"].is_array())
        throw UsageError("expected {\"max_seq_len\":int,\"pairs\":[{\"q\":str,\"t\":str},...]}");
    if (request.contains("max_seq_len") && !request["max_seq_len"].is_number_integer())
        throw UsageError("max_seq_len must be an integer");
    std::vector<std::string> texts;
    texts.reserve(request["pairs"].size() * 2);
    for (const auto& p : request["pairs"]) {
        if (!p.is_object() || !p.contains("q") || !p["q"].is_string() || !p.contains("t") || !p["t"].is_string())
            throw UsageError("every pair needs string fields \"q\" and \"t\"");
        texts.push_back(p["q"].get<std::string>());
        texts.push_back(p["t"].get<std::string>());
    }
    std::vector<ScoringPair> pairs;
    pairs.reserve(texts.size() / 2);
    for (std::size_t i = 0; i < texts.size(); i += 2) pairs.push_back({{}, {}, {}, texts[i], texts[i + 1]});
    return json{{"scores", scorer.score_batch(pairs)}};
}

json handle_translate_request(const json& request, Translator& translator) {
    if (!request.is_object() || !request.contains("src") || !request["src"].is_string() || !request.contains("tgt") ||
        !request["tgt"].is_string() || !request.contains("texts") || !request["texts"].is_array())
        throw UsageError("expected {\"src\":str,\"tgt\":str,\"texts\":[str,...]}");
    TranslationRequest tr{{}, LanguageCode(request["src"].get<std::string>()),
                          LanguageCode(request["tgt"].get<std::string>())};
    for (std::size_t i = 0; i < request["texts"].size(); ++i) {
        const auto& t = request["texts"][i];
        if (!t.is_string()) throw TranslationError("text is not a string", i);
        tr.texts.push_back(t.get<std::string>());
    }
    return json{{"texts", translator.translate_batch(tr)}};
}

struct MockService::Impl {
    httplib::Server server;
};

MockService::MockService(std::string path) : path_(std::move(path)), impl_(std::make_unique<Impl>()) {
    impl_->server.Post(path_, [this](const httplib::Request& req, httplib::Response& res) {
        ++requests_;
        auto reply = [&](int status, const json& body) {
            res.status = status;
            res.set_content(body.dump(), "application/json");
        };
        const auto request = json::parse(req.body, nullptr, false);
        if (request.is_discarded()) return reply(400, {{"error", "request body is not JSON"}});
        try {
            reply(200, handle(request));
        } catch (const TranslationError& e) {
            json body{{"error", e.what()}};
            if (e.index() != TranslationError::npos) body["index"] = e.index();
            reply(400, body);
        } catch (const UsageError& e) {
            reply(400, {{"error", e.what()}});
        } catch (const std::exception& e) {
            reply(500, {{"error", e.what()}});
        }
    });
}

MockService::~MockService() { stop(); }

int MockService::start(const std::string& host, int port) {
    if (thread_.joinable()) throw Error("service already running");
    port_ = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (port_ <= 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port_;
}

void MockService::run(const std::string& host, int port) {
    port_ = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (port_ <= 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    impl_->server.listen_after_bind();
}

void MockService::stop() {
    if (impl_) impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

std::string MockService::url() const { return "http://127.0.0.1:" + std::to_string(port_) + path_; }

MockScorerService::MockScorerService(std::shared_ptr<const Scorer> scorer)
    : MockService("/score"), scorer_(std::move(scorer)) {}

MockScorerService::~MockScorerService() { stop(); }

json MockScorerService::handle(const json& request) { return handle_score_request(request, *scorer_); }

MockTranslatorService::MockTranslatorService() : MockService("/translate") {}

MockTranslatorService::~MockTranslatorService() { stop(); }

json MockTranslatorService::handle(const json& request) { return handle_translate_request(request, translator_); }

} // namespace mas2
