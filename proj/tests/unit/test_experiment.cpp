#include "mas2/candidates.hpp"
#include "mas2/errors.hpp"
#include "mas2/experiment.hpp"
#include "mas2/translation.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace mas2;
using namespace mas2::testing;
using nlohmann::json;

namespace {

const LanguageCode en("en");

EarlyStopResult scripted(std::vector<double> maps, int max_iterations = 3) {
    ScriptedTrainer trainer(std::move(maps));
    return early_stop_loop(trainer, [&](const Scorer&) { return trainer.scripted_dev_map(); }, max_iterations);
}

/// Writes the small fixture, a perfect static score file and a config.
json perfect_setup(const TempDir& tmp) {
    save_dataset(small_fixture(), tmp / "data.jsonl");
    std::string scores;
    for (const auto& g : small_fixture().groups)
        for (const auto& c : g.candidates)
            scores += json{{"cid", c.id}, {"score", c.correct() ? 1.0 : 0.0}}.dump() + "\n";
    write_file(tmp / "scores.jsonl", scores);
    return json{{"run_id", "perfect"},
                {"data", {{"train", "data.jsonl"}}},
                {"ft_expr", "En+De"},
                {"dev_expr", "En"},
                {"test_exprs", {"En", "De", "EnDe+DeEn"}},
                {"scorer", {{"kind", "static"}, {"scores", "scores.jsonl"}}},
                {"results_dir", "results"}};
}

ExperimentConfig config_in(const TempDir& tmp, const json& j) {
    write_file(tmp / "config.json", j.dump(2));
    return load_config(tmp / "config.json");
}

/// Toy corpus annotated with the gold file, as a dataset file in `dir`.
std::filesystem::path toy_dataset(const TempDir& tmp) {
    const auto corpus = build_index(load_corpus(toy_dir() / "corpus.jsonl"));
    LexicalScorer scorer(IdfTable::build(corpus_sentences(corpus)));
    std::vector<AnnotationTask> tasks;
    for (const auto& q : load_questions(toy_dir() / "questions.jsonl", en)) {
        const auto t = make_tasks(q, select_candidates(q, corpus, scorer, {3, 6}));
        tasks.insert(tasks.end(), t.begin(), t.end());
    }
    apply_gold(tasks, toy_dir() / "gold.jsonl");
    save_dataset(import_annotations(tasks, en, Split::train, "toy"), tmp / "toy.jsonl");
    return tmp / "toy.jsonl";
}

json without_timestamps(RunRecord r) {
    auto j = to_json(r);
    j.erase("started_at");
    j.erase("finished_at");
    return j;
}

} // namespace

TEST(EarlyStop, PeakInTheMiddle) {
    const auto r = scripted({0.5, 0.6, 0.55});
    EXPECT_EQ(r.best_iteration, 2);
    EXPECT_EQ(r.iterations_run, 3);
    EXPECT_EQ(r.dev_maps, (std::vector<double>{0.5, 0.6, 0.55}));
}

TEST(EarlyStop, StopsOnFirstDecline) {
    const auto r = scripted({0.5, 0.4});
    EXPECT_EQ(r.best_iteration, 1);
    EXPECT_EQ(r.iterations_run, 2);
}

TEST(EarlyStop, StrictlyIncreasingRunsAll) {
    const auto r = scripted({0.4, 0.5, 0.6});
    EXPECT_EQ(r.best_iteration, 3);
    EXPECT_EQ(r.iterations_run, 3);
}

TEST(EarlyStop, TieCountsAsNoImprovement) {
    const auto r = scripted({0.5, 0.5, 0.9});
    EXPECT_EQ(r.best_iteration, 1);
    EXPECT_EQ(r.iterations_run, 2);
}

TEST(EarlyStop, CappedByMaxIterations) {
    const auto r = scripted({0.1, 0.2, 0.3, 0.4}, 3);
    EXPECT_EQ(r.iterations_run, 3);
    EXPECT_EQ(r.best_iteration, 3);
    EXPECT_EQ(scripted({0.1}, 1).iterations_run, 1);
    EXPECT_THROW(scripted({0.1}, 0), UsageError);
}

TEST(EarlyStop, BestScorerIsSnapshotOfBestIteration) {
    const auto r = scripted({0.3, 0.2});
    ASSERT_TRUE(r.best_scorer);
}

TEST(Config, DefaultsAndPathResolution) {
    TempDir tmp;
    const auto c = config_in(tmp, perfect_setup(tmp));
    EXPECT_EQ(c.hyper.learning_rate, 2e-5);
    EXPECT_EQ(c.hyper.max_seq_len, 128);
    EXPECT_EQ(c.hyper.max_iterations, 3);
    EXPECT_EQ(c.hyper.seed, 42u);
    EXPECT_EQ(c.train_path, tmp / "data.jsonl");
    EXPECT_EQ(c.dev_path, c.train_path);
    EXPECT_EQ(c.test_path, c.train_path);
    EXPECT_EQ(c.scorer.kind, ScorerKind::static_scores);
    EXPECT_EQ(c.translator.kind, TranslatorKind::mock);
    EXPECT_EQ(c.results_dir, tmp / "results");
    EXPECT_FALSE(c.baseline.has_value());
}

TEST(Config, JsonRoundTrip) {
    TempDir tmp;
    auto j = perfect_setup(tmp);
    j["baseline"] = {{"run", "other"}, {"test", "En"}};
    j["hyperparameters"] = {{"max_iterations", 5}, {"seed", 7}};
    const auto c = config_in(tmp, j);
    const auto again = config_from_json(to_json(c));
    EXPECT_EQ(to_json(again), to_json(c));
    EXPECT_EQ(again.hyper.max_iterations, 5);
    EXPECT_EQ(again.baseline->test, "En");
}

TEST(Config, Rejections) {
    TempDir tmp;
    const auto base = perfect_setup(tmp);
    auto expect_usage = [&](json j) { EXPECT_THROW(config_in(tmp, j), UsageError) << j.dump(); };
    auto j = base;
    j.erase("run_id");
    expect_usage(j);
    j = base;
    j["ft_expr"] = "En+";
    expect_usage(j);
    j = base;
    j["test_exprs"] = json::array();
    expect_usage(j);
    j = base;
    j["scorer"] = {{"kind", "neural"}};
    expect_usage(j);
    j = base;
    j["scorer"] = {{"kind", "remote"}};
    expect_usage(j);
    j = base;
    j["hyperparameters"] = {{"max_iterations", 0}};
    expect_usage(j);
    j = base;
    j["hyperparameters"] = {{"seed", "x"}};
    expect_usage(j);
    j = base;
    j["run_id"] = "../escape";
    expect_usage(j);
    write_file(tmp / "broken.json", "{");
    EXPECT_THROW(load_config(tmp / "broken.json"), UsageError);
    EXPECT_THROW(load_config(tmp / "missing.json"), IoError);
}

TEST(EvaluateDataset, ExcludesUnanswerable) {
    auto d = small_fixture();
    for (auto& c : d.groups[0].candidates) c.label = Label::incorrect;
    StaticScorer s;
    for (const auto& g : d.groups)
        for (const auto& c : g.candidates) s.set_by_id(c.id, 0.5);
    const auto r = evaluate_dataset(d, s, "x");
    EXPECT_EQ(r.num_questions, 1u);
    EXPECT_EQ(r.excluded, 1u);
    for (auto& c : d.groups[1].candidates) c.label = Label::incorrect;
    EXPECT_THROW(evaluate_dataset(d, s, "x"), DataError);
}

TEST(Judge, RequiresMatchingCandidates) {
    const auto d = small_fixture();
    EXPECT_THROW(judge(d.groups[0], RankedList{{"c1", 1.0}}), DataError);
    EXPECT_THROW(judge(d.groups[0], RankedList{{"c1", 1.0}, {"zz", 0.5}}), DataError);
    const auto j = judge(d.groups[0], RankedList{{"c2", 0.9}, {"c1", 0.1}});
    EXPECT_EQ(j.labels, (std::vector<int>{0, 1}));
}

TEST(RunExperiment, PerfectStaticScorer) {
    TempDir tmp;
    const auto config = config_in(tmp, perfect_setup(tmp));
    const auto record = run_experiment(config);
    ASSERT_EQ(record.reports.size(), 3u);
    for (const auto& r : record.reports) {
        EXPECT_EQ(r.p_at_1, 1.0) << r.test;
        EXPECT_EQ(r.map, 1.0) << r.test;
        EXPECT_EQ(r.mrr, 1.0) << r.test;
    }
    EXPECT_EQ(record.reports[2].num_questions, 4u);
    EXPECT_EQ(record.early_stopping.best_iteration, 1);
    EXPECT_EQ(record.early_stopping.iterations_run, 2);
    EXPECT_TRUE(std::filesystem::exists(tmp / "results" / "perfect.json"));
    EXPECT_TRUE(record.fingerprints["test"].contains("EnDe+DeEn"));
    EXPECT_EQ(record.seed, 42u);
}

TEST(RunExperiment, DeterministicModuloTimestamps) {
    TempDir tmp;
    auto j = perfect_setup(tmp);
    j["scorer"] = {{"kind", "lexical"}};
    const auto config = config_in(tmp, j);
    const auto a = run_experiment(config, {false, nullptr});
    const auto b = run_experiment(config, {false, nullptr});
    EXPECT_EQ(without_timestamps(a), without_timestamps(b));
    EXPECT_FALSE(std::filesystem::exists(tmp / "results"));
}

TEST(RunExperiment, SelfBaselineGivesZeroDeltas) {
    TempDir tmp;
    toy_dataset(tmp);
    const auto config = config_in(tmp, json{{"run_id", "toy-en"},
                                            {"data", {{"train", "toy.jsonl"}}},
                                            {"ft_expr", "En"},
                                            {"test_exprs", {"En"}},
                                            {"baseline", {{"run", "toy-en"}, {"test", "En"}}}});
    const auto record = run_experiment(config, {false, nullptr});
    ASSERT_EQ(record.deltas.size(), 1u);
    EXPECT_EQ(record.deltas[0].rounded, (std::array<double, 3>{0.0, 0.0, 0.0}));
    EXPECT_EQ(record.deltas[0].baseline, "toy-en/En");
    EXPECT_GT(record.reports[0].map, 0.0);
}

TEST(RunExperiment, DeltasAgainstStoredBaseline) {
    TempDir tmp;
    toy_dataset(tmp);
    json base{{"run_id", "base"},
              {"data", {{"train", "toy.jsonl"}}},
              {"ft_expr", "En"},
              {"test_exprs", {"En", "De"}}};
    const auto base_record = run_experiment(config_in(tmp, base));
    json run = base;
    run["run_id"] = "mixed";
    run["ft_expr"] = "En+De";
    run["baseline"] = {{"run", "base"}, {"test", "En"}};
    const auto record = run_experiment(config_in(tmp, run));
    ASSERT_EQ(record.deltas.size(), 2u);
    MetricsReport labelled = base_record.reports[0];
    labelled.test = "base/En";
    for (std::size_t i = 0; i < 2; ++i) {
        const auto expected = delta_report(labelled, record.reports[i]);
        EXPECT_EQ(record.deltas[i].raw, expected.raw);
        EXPECT_EQ(record.deltas[i].rounded, expected.rounded);
    }
    const std::vector<RunRecord> runs{base_record, record};
    EXPECT_NE(render_run_table(runs).find("En+De"), std::string::npos);
}

TEST(RunExperiment, MissingBaselineFailsBeforeWork) {
    TempDir tmp;
    auto j = perfect_setup(tmp);
    j["baseline"] = {{"run", "nope"}};
    MockTranslator mt;
    EXPECT_THROW(run_experiment(config_in(tmp, j), {false, &mt}), UsageError);
    EXPECT_EQ(mt.calls(), 0u);
}

TEST(RunExperiment, PersistentTranslationCacheAvoidsRetranslation) {
    TempDir tmp;
    auto j = perfect_setup(tmp);
    j["translator"] = {{"kind", "mock"}, {"cache", "cache.jsonl"}};
    const auto config = config_in(tmp, j);
    MockTranslator first;
    run_experiment(config, {false, &first});
    EXPECT_GT(first.calls(), 0u);
    MockTranslator second;
    run_experiment(config, {false, &second});
    EXPECT_EQ(second.calls(), 0u);
}

TEST(RunRecord, SaveLoadRoundTrip) {
    TempDir tmp;
    const auto record = run_experiment(config_in(tmp, perfect_setup(tmp)));
    const auto loaded = load_run_record(run_record_path(tmp / "results", "perfect"));
    EXPECT_EQ(to_json(loaded), to_json(record));
    write_file(tmp / "bad.json", "{\"run_id\":1}");
    EXPECT_THROW(load_run_record(tmp / "bad.json"), DataError);
}

TEST(RunRecord, ConfigSnapshotReproducesRun) {
    TempDir tmp;
    auto j = perfect_setup(tmp);
    j["scorer"] = {{"kind", "lexical"}};
    const auto record = run_experiment(config_in(tmp, j), {false, nullptr});
    const auto replay = run_experiment(config_from_json(record.config), {false, nullptr});
    EXPECT_EQ(without_timestamps(replay), without_timestamps(record));
}
