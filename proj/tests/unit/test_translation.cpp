#include "mas2/errors.hpp"
#include "mas2/service.hpp"
#include "mas2/text.hpp"
#include "mas2/translation.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace mas2;
using namespace mas2::testing;
using nlohmann::json;

namespace {

const LanguageCode en("en");
const LanguageCode de("de");

HttpTranslatorOptions fast_options() {
    HttpTranslatorOptions o;
    o.initial_backoff = std::chrono::milliseconds(1);
    o.timeout = std::chrono::seconds(5);
    return o;
}

/// Backend failing on the text "bad" with its index in the request.
class FailingTranslator final : public Translator {
public:
    std::vector<std::string> translate_batch(const TranslationRequest& request) override {
        for (std::size_t i = 0; i < request.texts.size(); ++i)
            if (request.texts[i] == "bad") throw TranslationError("cannot translate", i);
        return MockTranslator().translate_batch(request);
    }
};

std::pair<int, std::string> mock_reply(const std::string& body) {
    const auto req = json::parse(body);
    json out{{"texts", json::array()}};
    for (const auto& t : req["texts"])
        out["texts"].push_back(mock_translate(t.get<std::string>(), LanguageCode(req["src"].get<std::string>()),
                                              LanguageCode(req["tgt"].get<std::string>())));
    return {200, out.dump()};
}

} // namespace

TEST(MockTranslate, Examples) {
    EXPECT_EQ(mock_translate("what is x", en, de), "de:what de:is de:x");
    EXPECT_EQ(mock_translate("de:what de:is", de, en), "what is");
    EXPECT_EQ(mock_translate("de:a b", de, en), "a en:b");
    EXPECT_EQ(mock_translate("  spaced\tout \n", en, de), "de:spaced de:out");
    EXPECT_EQ(mock_translate("", en, de), "");
}

TEST(MockTranslator, BatchExamples) {
    MockTranslator mt;
    EXPECT_EQ(mt.translate_batch({{"hello world"}, en, de}), std::vector<std::string>{"de:hello de:world"});
    EXPECT_EQ(mt.translate_batch({{"de:hello de:world"}, de, en}), std::vector<std::string>{"hello world"});
    EXPECT_TRUE(mt.translate_batch({{}, en, de}).empty());
    EXPECT_EQ(mt.calls(), 3u);
    EXPECT_THROW(mt.translate_batch({{"x"}, en, en}), UsageError);
}

TEST(MockTranslator, RoundTripRestoresNormalizedText) {
    std::mt19937_64 rng(5);
    MockTranslator mt;
    for (int i = 0; i < 500; ++i) {
        const auto text = random_sentence(rng, 0, 20);
        const auto there = mt.translate_batch({{text}, en, de});
        const auto back = mt.translate_batch({there, de, en});
        ASSERT_EQ(back.front(), normalize_whitespace(text));
    }
}

TEST(PlanBatches, RespectsTextAndCharLimits) {
    std::vector<std::string> texts(120, "abcd");
    EXPECT_EQ(plan_batches(texts, 50, 4000),
              (std::vector<std::pair<std::size_t, std::size_t>>{{0, 50}, {50, 100}, {100, 120}}));
    EXPECT_EQ(plan_batches(texts, 50, 40).size(), 12u);
    EXPECT_TRUE(plan_batches({}, 50, 4000).empty());
    const std::vector<std::string> big{"a", std::string(5000, 'x'), "b"};
    EXPECT_EQ(plan_batches(big, 50, 4000),
              (std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 2}, {2, 3}}));
    EXPECT_THROW(plan_batches(texts, 0, 10), UsageError);
}

TEST(PlanBatches, CoversInputContiguously) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        std::vector<std::string> texts(rng() % 300);
        for (auto& t : texts) t = std::string(rng() % 200, 'x');
        const std::size_t max_texts = 1 + rng() % 60;
        const std::size_t max_chars = 1 + rng() % 1000;
        std::size_t next = 0;
        for (auto [b, e] : plan_batches(texts, max_texts, max_chars)) {
            ASSERT_EQ(b, next);
            ASSERT_LT(b, e);
            ASSERT_LE(e - b, max_texts);
            std::size_t chars = 0;
            for (auto k = b; k < e; ++k) chars += texts[k].size();
            ASSERT_TRUE(chars <= max_chars || e - b == 1);
            next = e;
        }
        ASSERT_EQ(next, texts.size());
    }
}

TEST(CachedTranslator, SecondIdenticalRequestHitsCache) {
    MockTranslator backend;
    TranslationCache cache;
    CachedTranslator ct(backend, cache);
    const TranslationRequest req{{"a b", "c"}, en, de};
    const auto first = ct.translate_batch(req);
    EXPECT_EQ(backend.calls(), 1u);
    EXPECT_EQ(ct.translate_batch(req), first);
    EXPECT_EQ(backend.calls(), 1u);
}

TEST(CachedTranslator, OnlyMissesReachBackend) {
    MockTranslator backend;
    TranslationCache cache;
    CachedTranslator ct(backend, cache);
    ct.translate_batch({{"one"}, en, de});
    const auto out = ct.translate_batch({{"two", "one", "three"}, en, de});
    EXPECT_EQ(backend.texts_translated(), 3u);  // 1 + 2
    EXPECT_EQ(out, (std::vector<std::string>{"de:two", "de:one", "de:three"}));
}

TEST(CachedTranslator, DuplicateMissesSentOnce) {
    MockTranslator backend;
    TranslationCache cache;
    CachedTranslator ct(backend, cache);
    const auto out = ct.translate_batch({{"x", "x", "y", "x"}, en, de});
    EXPECT_EQ(backend.texts_translated(), 2u);
    EXPECT_EQ(out, (std::vector<std::string>{"de:x", "de:x", "de:y", "de:x"}));
}

TEST(CachedTranslator, DirectionIsPartOfKey) {
    MockTranslator backend;
    TranslationCache cache;
    CachedTranslator ct(backend, cache);
    ct.translate_batch({{"x"}, en, de});
    EXPECT_EQ(ct.translate_batch({{"x"}, de, en}), std::vector<std::string>{"en:x"});
    EXPECT_EQ(backend.calls(), 2u);
}

TEST(CachedTranslator, DeterministicAgainstUncachedOracle) {
    std::mt19937_64 rng(1000);
    std::vector<std::string> texts;
    for (int i = 0; i < 1000; ++i) texts.push_back(random_sentence(rng, 1, 8));
    MockTranslator backend;
    TranslationCache cache;
    CachedTranslator ct(backend, cache);
    const auto first = ct.translate_batch({texts, en, de});
    const auto second = ct.translate_batch({texts, en, de});
    EXPECT_EQ(first, second);
    for (std::size_t i = 0; i < texts.size(); ++i) ASSERT_EQ(first[i], mock_translate(texts[i], en, de));
    EXPECT_EQ(backend.calls(), 1u);
}

TEST(CachedTranslator, FailureIndexRefersToRequest) {
    FailingTranslator backend;
    TranslationCache cache;
    CachedTranslator ct(backend, cache);
    ct.translate_batch({{"a", "b"}, en, de});
    try {
        ct.translate_batch({{"a", "b", "c", "bad"}, en, de});
        FAIL() << "expected TranslationError";
    } catch (const TranslationError& e) {
        EXPECT_EQ(e.index(), 3u);
    }
}

TEST(TranslationCache, PersistsAcrossInstances) {
    TempDir tmp;
    MockTranslator backend;
    {
        TranslationCache cache(tmp / "cache.jsonl");
        CachedTranslator ct(backend, cache);
        ct.translate_batch({{"a", "b"}, en, de});
    }
    TranslationCache cache(tmp / "cache.jsonl");
    EXPECT_EQ(cache.size(), 2u);
    CachedTranslator ct(backend, cache);
    EXPECT_EQ(ct.translate_batch({{"b", "a"}, en, de}), (std::vector<std::string>{"de:b", "de:a"}));
    EXPECT_EQ(backend.calls(), 1u);
}

TEST(TranslationCache, LaterEntriesWin) {
    TempDir tmp;
    {
        TranslationCache cache(tmp / "c.jsonl");
        cache.store(en, de, "x", "first");
        cache.store(en, de, "x", "second");
    }
    TranslationCache cache(tmp / "c.jsonl");
    EXPECT_EQ(cache.lookup(en, de, "x"), std::optional<std::string>("second"));
}

TEST(TranslationCache, CorruptLinesDroppedAndFileCompacted) {
    TempDir tmp;
    {
        TranslationCache cache(tmp / "c.jsonl");
        cache.store(en, de, "x", "de:x");
    }
    const auto good = read_file(tmp / "c.jsonl");
    write_file(tmp / "c.jsonl", good + "{\"src\":\"en\",\"tgt\"\n" + "not json\n" +
                                    R"({"src":"EN","tgt":"de","hash":"h","text":"t"})" + "\n");
    {
        TranslationCache cache(tmp / "c.jsonl");
        EXPECT_EQ(cache.dropped_lines(), 3u);
        EXPECT_EQ(cache.lookup(en, de, "x"), std::optional<std::string>("de:x"));
    }
    EXPECT_EQ(read_file(tmp / "c.jsonl"), good);
    TranslationCache again(tmp / "c.jsonl");
    EXPECT_EQ(again.dropped_lines(), 0u);
}

TEST(HttpTranslator, MatchesMockServiceAndBatches) {
    MockTranslatorService service;
    service.start();
    HttpTranslator tr(service.url(), fast_options());
    std::mt19937_64 rng(8);
    std::vector<std::string> texts;
    for (int i = 0; i < 120; ++i) texts.push_back(random_sentence(rng));
    const auto out = tr.translate_batch({texts, en, de});
    ASSERT_EQ(out.size(), texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) EXPECT_EQ(out[i], mock_translate(texts[i], en, de));
    EXPECT_EQ(tr.requests_sent(), 3u);
    EXPECT_EQ(service.requests(), 3u);
}

TEST(HttpTranslator, RetriesServerErrors) {
    int failures = 2;
    FakeServer server([&](const std::string& body) -> std::pair<int, std::string> {
        if (failures-- > 0) return {503, "{}"};
        return mock_reply(body);
    });
    HttpTranslator tr(server.url("/translate"), fast_options());
    EXPECT_EQ(tr.translate_batch({{"a"}, en, de}), std::vector<std::string>{"de:a"});
    EXPECT_EQ(server.requests(), 3u);
}

TEST(HttpTranslator, GivesUpAfterMaxAttempts) {
    FakeServer server([](const std::string&) { return std::pair<int, std::string>{500, "{}"}; });
    HttpTranslator tr(server.url("/translate"), fast_options());
    try {
        tr.translate_batch({{"a"}, en, de});
        FAIL() << "expected RemoteError";
    } catch (const RemoteError& e) {
        EXPECT_EQ(e.kind(), RemoteErrorKind::status);
        EXPECT_EQ(e.status(), 500);
    }
    EXPECT_EQ(server.requests(), 3u);
}

TEST(HttpTranslator, ClientErrorsAreNotRetried) {
    FakeServer server([](const std::string&) { return std::pair<int, std::string>{404, "{}"}; });
    HttpTranslator tr(server.url("/translate"), fast_options());
    EXPECT_THROW(tr.translate_batch({{"a"}, en, de}), RemoteError);
    EXPECT_EQ(server.requests(), 1u);
}

TEST(HttpTranslator, CountMismatchIsTyped) {
    FakeServer server([](const std::string&) { return std::pair<int, std::string>{200, R"({"texts":["x"]})"}; });
    HttpTranslator tr(server.url("/translate"), fast_options());
    try {
        tr.translate_batch({{"a", "b"}, en, de});
        FAIL() << "expected RemoteError";
    } catch (const RemoteError& e) {
        EXPECT_EQ(e.kind(), RemoteErrorKind::count_mismatch);
    }
}

TEST(HttpTranslator, MalformedResponseIsTyped) {
    FakeServer server([](const std::string&) { return std::pair<int, std::string>{200, "[1,2]"}; });
    HttpTranslator tr(server.url("/translate"), fast_options());
    try {
        tr.translate_batch({{"a"}, en, de});
        FAIL() << "expected RemoteError";
    } catch (const RemoteError& e) {
        EXPECT_EQ(e.kind(), RemoteErrorKind::malformed_response);
    }
}

TEST(HttpTranslator, PerTextFailureCarriesGlobalIndex) {
    FakeServer server([](const std::string& body) -> std::pair<int, std::string> {
        const auto req = json::parse(body);
        for (std::size_t i = 0; i < req["texts"].size(); ++i)
            if (req["texts"][i] == "bad") return {422, json{{"error", "untranslatable"}, {"index", i}}.dump()};
        return mock_reply(body);
    });
    auto options = fast_options();
    options.max_texts_per_request = 2;
    HttpTranslator tr(server.url("/translate"), options);
    try {
        tr.translate_batch({{"a", "b", "c", "bad"}, en, de});
        FAIL() << "expected TranslationError";
    } catch (const TranslationError& e) {
        EXPECT_EQ(e.index(), 3u);
    }
}

TEST(HttpTranslator, TransportFailureIsTyped) {
    auto options = fast_options();
    options.max_attempts = 2;
    HttpTranslator tr(dead_endpoint(), options);
    try {
        tr.translate_batch({{"a"}, en, de});
        FAIL() << "expected RemoteError";
    } catch (const RemoteError& e) {
        EXPECT_EQ(e.kind(), RemoteErrorKind::transport);
    }
    EXPECT_EQ(tr.requests_sent(), 2u);
}

TEST(HttpTranslator, RejectsUnsupportedEndpoints) {
    EXPECT_THROW(HttpTranslator("ftp://host/x"), UsageError);
    EXPECT_THROW(HttpTranslator("not a url"), UsageError);
}
