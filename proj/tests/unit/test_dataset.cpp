#include "mas2/dataset.hpp"
#include "mas2/errors.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace mas2;
using namespace mas2::testing;

namespace {

Dataset parse(const std::string& jsonl) {
    std::istringstream in(jsonl);
    return read_dataset(in, "inline", Split::train);
}

std::size_t error_line(const std::string& jsonl) {
    try {
        parse(jsonl);
    } catch (const DataError& e) {
        return e.line();
    }
    return 0;
}

const char* kQ1 = R"({"kind":"q","id":"q1","origin_id":"q1","text":"who","lang":"en","prov":["en"]})";
const char* kC1 = R"({"kind":"c","id":"c1","qid":"q1","origin_id":"c1","text":"me","label":1,"lang":"en","prov":["en"]})";

} // namespace

TEST(LanguageCode, AcceptsLowercaseCodes) {
    EXPECT_EQ(LanguageCode("en").str(), "en");
    EXPECT_TRUE(LanguageCode::is_valid("deu"));
    EXPECT_FALSE(LanguageCode::is_valid("e"));
    EXPECT_FALSE(LanguageCode::is_valid("En"));
    EXPECT_FALSE(LanguageCode::is_valid("toolongcode"));
    EXPECT_THROW(LanguageCode("d3"), UsageError);
}

TEST(Split, ParsesNames) {
    EXPECT_EQ(parse_split("dev"), Split::dev);
    EXPECT_EQ(to_string(Split::test), "test");
    EXPECT_THROW(parse_split("validation"), UsageError);
}

TEST(Stats, CountsFixture) {
    EXPECT_EQ(stats(small_fixture()), (DatasetStats{2, 3, 2}));
}

TEST(Stats, EmptyDataset) {
    EXPECT_EQ(stats(Dataset{}), (DatasetStats{0, 0, 0}));
}

TEST(Stats, ReferenceTrainSplitShape) {
    const auto d = dataset_with_stats(913, 24558, 69142);
    EXPECT_TRUE(validate(d).empty());
    EXPECT_EQ(stats(d), (DatasetStats{913, 24558, 69142}));
}

TEST(Stats, CorrectPlusIncorrectIsTotal) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 50; ++i) {
        const auto d = synthetic_dataset(rng, 1 + i % 13);
        const auto s = stats(d);
        EXPECT_EQ(s.num_correct + s.num_incorrect, d.num_candidates());
        EXPECT_EQ(s.num_questions, d.groups.size());
    }
}

TEST(LoadDataset, FixtureFile) {
    TempDir tmp;
    save_dataset(small_fixture(), tmp / "fixture.jsonl");
    const auto d = load_dataset(tmp / "fixture.jsonl", Split::dev);
    EXPECT_EQ(d.groups.size(), 2u);
    EXPECT_EQ(d.num_candidates(), 5u);
    EXPECT_EQ(d.split, Split::dev);
    EXPECT_EQ(d.name, "fixture");
}

TEST(LoadDataset, EmptyFile) {
    TempDir tmp;
    write_file(tmp / "empty.jsonl", "");
    EXPECT_TRUE(load_dataset(tmp / "empty.jsonl", Split::train).empty());
}

TEST(LoadDataset, MissingFileIsIoError) {
    EXPECT_THROW(load_dataset("/nonexistent/data.jsonl", Split::train), IoError);
}

TEST(LoadDataset, CandidatesMayPrecedeTheirQuestion) {
    const auto d = parse(std::string(kC1) + "\n" + kQ1 + "\n");
    ASSERT_EQ(d.groups.size(), 1u);
    EXPECT_EQ(d.groups[0].candidates.size(), 1u);
}

TEST(LoadDataset, BlankLinesAreSkipped) {
    const auto d = parse(std::string("\n") + kQ1 + "\n   \n" + kC1 + "\n");
    EXPECT_EQ(d.num_candidates(), 1u);
}

TEST(LoadDataset, ErrorsCarryLineNumbers) {
    EXPECT_EQ(error_line(std::string(kQ1) + "\n{not json\n"), 2u);
    EXPECT_EQ(error_line(std::string(kQ1) + "\n" + kQ1 + "\n"), 2u);
    EXPECT_EQ(error_line(std::string(kQ1) + "\n" + kC1 + "\n" +
                         R"({"kind":"c","id":"c2","qid":"zz","origin_id":"c2","text":"x","label":0,"lang":"en","prov":["en"]})" +
                         "\n"),
              3u);
    EXPECT_EQ(error_line(std::string(kQ1) + "\n" +
                         R"({"kind":"c","id":"c2","qid":"q1","origin_id":"c2","text":"x","label":2,"lang":"en","prov":["en"]})"),
              2u);
    EXPECT_EQ(error_line(R"({"kind":"x"})"), 1u);
    EXPECT_EQ(error_line(R"({"kind":"q","id":"q1","origin_id":"q1","text":"t","lang":"EN","prov":["en"]})"), 1u);
    EXPECT_EQ(error_line("[1,2]"), 1u);
}

TEST(LoadDataset, ProvenanceMismatchRejected) {
    TempDir tmp;
    write_file(tmp / "bad.jsonl",
               R"({"kind":"q","id":"q1","origin_id":"q1","text":"t","lang":"de","prov":["en"]})"
               "\n");
    EXPECT_THROW(load_dataset(tmp / "bad.jsonl", Split::train), DataError);
}

TEST(Validate, ReportsEveryViolation) {
    auto d = small_fixture();
    d.groups[1].candidates[0].id = "c1";  // collides with q1's candidate
    d.groups[1].candidates[1].question_id = "q1";
    d.groups[0].question.provenance.clear();
    const auto v = validate(d);
    EXPECT_EQ(v.size(), 3u);
}

TEST(Validate, RepeatedProvenanceHop) {
    auto d = small_fixture();
    d.groups[0].question.provenance = {LanguageCode("en"), LanguageCode("en")};
    EXPECT_EQ(validate(d).size(), 1u);
}

TEST(Validate, DuplicateQuestionIds) {
    auto d = small_fixture();
    d.groups[1].question.id = "q1";
    for (auto& c : d.groups[1].candidates) c.question_id = "q1";
    EXPECT_FALSE(validate(d).empty());
}

TEST(SaveDataset, EmptyDatasetGivesEmptyFile) {
    TempDir tmp;
    save_dataset(Dataset{}, tmp / "e.jsonl");
    EXPECT_EQ(read_file(tmp / "e.jsonl"), "");
}

TEST(SaveDataset, OneGroupIsQuestionThenCandidates) {
    auto d = small_fixture();
    d.groups.erase(d.groups.begin() + 1, d.groups.end());
    const auto text = to_jsonl(d);
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> kinds;
    while (std::getline(in, line)) kinds.push_back(nlohmann::json::parse(line).at("kind"));
    EXPECT_EQ(kinds, (std::vector<std::string>{"q", "c", "c"}));
}

TEST(SaveDataset, UnwritablePathIsIoError) {
    EXPECT_THROW(save_dataset(small_fixture(), "/nonexistent-dir/x.jsonl"), IoError);
}

TEST(SaveDataset, RoundTripProperty) {
    std::mt19937_64 rng(1234);
    TempDir tmp;
    for (int i = 0; i < 100; ++i) {
        auto d = synthetic_dataset(rng, static_cast<std::size_t>(i % 17));
        d.name = "rt";
        d.split = Split::test;
        if (i % 3 == 0 && !d.empty()) d.groups[0].question.text = "unicode \xc3\xa4\xc3\xb6 \"quoted\"\ttab";
        save_dataset(d, tmp / "rt.jsonl");
        const auto back = load_dataset(tmp / "rt.jsonl", Split::test);
        ASSERT_EQ(back, d) << "iteration " << i;
        EXPECT_EQ(to_jsonl(back), to_jsonl(d));
    }
}

TEST(Fingerprint, StableAndContentSensitive) {
    const auto a = small_fixture();
    auto b = small_fixture();
    EXPECT_EQ(fingerprint(a), fingerprint(b));
    EXPECT_EQ(fingerprint(a).size(), 64u);
    b.groups[0].candidates[0].label = Label::incorrect;
    EXPECT_NE(fingerprint(a), fingerprint(b));
}

TEST(FilterAnswerable, KeepsOnlyAnswerableGroups) {
    EXPECT_EQ(filter_answerable(small_fixture()), small_fixture());
    EXPECT_TRUE(filter_answerable(Dataset{}).empty());

    auto d = small_fixture();
    for (auto& c : d.groups[0].candidates) c.label = Label::incorrect;
    const auto f = filter_answerable(d);
    ASSERT_EQ(f.groups.size(), 1u);
    EXPECT_EQ(f.groups[0].question.id, "q2");
}

TEST(FilterAnswerable, IdempotentSubsetProperty) {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 100; ++i) {
        const auto d = synthetic_dataset(rng, 20);
        const auto f = filter_answerable(d);
        EXPECT_EQ(filter_answerable(f), f);
        EXPECT_LE(f.groups.size(), d.groups.size());
        std::size_t j = 0;
        for (const auto& g : d.groups) {
            if (!g.answerable()) continue;
            ASSERT_LT(j, f.groups.size());
            EXPECT_EQ(f.groups[j++], g);
        }
        EXPECT_EQ(j, f.groups.size());
    }
}
