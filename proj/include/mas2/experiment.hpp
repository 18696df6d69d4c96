#pragma once

#include "mas2/composition.hpp"
#include "mas2/dataset.hpp"
#include "mas2/metrics.hpp"
#include "mas2/reranker.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mas2 {

/// Recorded fine-tuning settings. Only max_seq_len and max_iterations affect
/// anything in-process; the rest is carried to external trainers and into
/// run records.
struct Hyperparameters {
    double learning_rate = 2e-5;
    int max_seq_len = 128;
    int max_iterations = 3;
    int batch_size = 32;
    std::uint64_t seed = 42;
};

enum class ScorerKind { lexical, remote, static_scores };
enum class TranslatorKind { mock, http };

struct ScorerSpec {
    ScorerKind kind = ScorerKind::lexical;
    std::string endpoint;               // remote
    std::filesystem::path scores_path;  // static_scores
};

struct TranslatorSpec {
    TranslatorKind kind = TranslatorKind::mock;
    std::string endpoint;               // http
    std::filesystem::path cache_path;   // empty: in-memory cache
};

struct BaselineRef {
    std::string run;
    /// Test report of the baseline run to compare against; empty picks its first report.
    std::string test;
};

struct ExperimentConfig {
    std::string run_id;
    std::string pretrained_label;
    std::filesystem::path train_path;
    std::filesystem::path dev_path;
    std::filesystem::path test_path;
    std::string ft_expr;
    std::string dev_expr;
    std::vector<std::string> test_exprs;
    ScorerSpec scorer;
    TranslatorSpec translator;
    Hyperparameters hyper;
    std::optional<BaselineRef> baseline;
    std::filesystem::path results_dir;
};

/// Relative paths in the file are resolved against the file's directory.
/// Throws UsageError for missing or ill-typed fields and unparsable expressions.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig config_from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const ExperimentConfig& config);

/// Fine-tuning driver. Real transformer training lives outside this library;
/// these implementations cover the in-process backends and tests.
class Trainer {
public:
    virtual ~Trainer() = default;

    virtual void train_one_iteration() = 0;
    /// Scorer reflecting the state after the latest iteration.
    virtual std::shared_ptr<const Scorer> snapshot() const = 0;
};

/// Fits an IdfTable over the candidate texts of the fine-tuning dataset.
class LexicalTrainer final : public Trainer {
public:
    explicit LexicalTrainer(const Dataset& train) : train_(train) {}

    void train_one_iteration() override;
    std::shared_ptr<const Scorer> snapshot() const override;

private:
    const Dataset& train_;
    std::shared_ptr<const Scorer> current_;
};

/// Wraps an externally trained scorer (static scores, remote service).
class FixedScorerTrainer final : public Trainer {
public:
    explicit FixedScorerTrainer(std::shared_ptr<const Scorer> scorer) : scorer_(std::move(scorer)) {}

    void train_one_iteration() override {}
    std::shared_ptr<const Scorer> snapshot() const override { return scorer_; }

private:
    std::shared_ptr<const Scorer> scorer_;
};

/// Mock trainer replaying a scripted dev-MAP sequence; pair it with
/// `scripted_dev_map()` as the dev evaluator.
class ScriptedTrainer final : public Trainer {
public:
    explicit ScriptedTrainer(std::vector<double> dev_maps);

    void train_one_iteration() override;
    std::shared_ptr<const Scorer> snapshot() const override;

    int iterations_run() const noexcept { return iterations_; }
    /// Dev MAP scripted for the latest iteration.
    double scripted_dev_map() const;

private:
    std::vector<double> dev_maps_;
    int iterations_ = 0;
    std::shared_ptr<const Scorer> scorer_;
};

struct EarlyStopResult {
    int best_iteration = 0;  // 1-based
    int iterations_run = 0;
    std::vector<double> dev_maps;
    std::shared_ptr<const Scorer> best_scorer;
};

using DevEvaluator = std::function<double(const Scorer&)>;

/// Trains up to `max_iterations` iterations, evaluating dev MAP after each.
/// Stops as soon as an iteration fails to strictly improve on the best MAP
/// seen. Returns the earliest iteration with the highest MAP.
EarlyStopResult early_stop_loop(Trainer& trainer, const DevEvaluator& dev_map, int max_iterations);

/// Gold labels of `group` in the order given by `ranked`.
JudgedRanking judge(const QuestionGroup& group, const RankedList& ranked);

/// filter_answerable -> rank -> evaluate.
MetricsReport evaluate_dataset(const Dataset& d, const Scorer& scorer, std::string test_name);

struct RunRecord {
    std::string run_id;
    nlohmann::json config;
    std::uint64_t seed = 42;
    nlohmann::json fingerprints = nlohmann::json::object();
    EarlyStopResult early_stopping;
    std::vector<MetricsReport> reports;
    std::vector<DeltaReport> deltas;
    std::string started_at;
    std::string finished_at;
};

nlohmann::json to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DeltaReport& delta);

RunRecord load_run_record(const std::filesystem::path& path);
/// Writes to a temporary file and renames it into place.
void save_run_record(const RunRecord& record, const std::filesystem::path& path);
std::filesystem::path run_record_path(const std::filesystem::path& results_dir,
                                      const std::string& run_id);

struct RunOptions {
    /// Persist the record under results_dir. Disabled by tests that only
    /// inspect the returned value.
    bool persist = true;
    /// Overrides config.translator when set.
    Translator* translator = nullptr;
};

RunRecord run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// One row per run (labelled by its ft expression), one column block per test.
std::string render_run_table(std::span<const RunRecord> runs);

} // namespace mas2
