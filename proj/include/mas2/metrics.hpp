#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mas2 {

/// Gold labels of one question's candidates in ranked order (1 = correct).
struct JudgedRanking {
    std::string question_id;
    std::vector<int> labels;
};

/// (1/R) * sum of precision@i over positions i holding a correct candidate,
/// R = number of correct candidates in the list. Throws UsageError without one.
double average_precision(std::span<const int> labels);
double average_precision(const JudgedRanking& r);

/// 1 / (1-based rank of the first correct candidate).
double reciprocal_rank(std::span<const int> labels);
double reciprocal_rank(const JudgedRanking& r);

struct MetricsReport {
    std::string test;
    std::size_t num_questions = 0;
    /// Questions dropped before aggregation for lacking a correct candidate.
    std::size_t excluded = 0;
    double p_at_1 = 0.0;
    double map = 0.0;
    double mrr = 0.0;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// P@1, MAP and MRR over answerable rankings. Throws UsageError on empty
/// input or on a ranking without a correct candidate.
MetricsReport evaluate(std::span<const JudgedRanking> rankings, std::string test = {});

/// Relative change of each metric versus a baseline, in percent.
struct DeltaReport {
    std::string test;
    std::string baseline;
    /// 100 * (run - baseline) / baseline, unrounded; order P@1, MAP, MRR.
    std::array<double, 3> raw{};
    /// raw rounded half away from zero to one decimal.
    std::array<double, 3> rounded{};

    double p_at_1() const noexcept { return rounded[0]; }
    double map() const noexcept { return rounded[1]; }
    double mrr() const noexcept { return rounded[2]; }
};

double round_to_tenth(double value);

/// Throws UsageError when a baseline metric is zero.
DeltaReport delta_report(const MetricsReport& baseline, const MetricsReport& run);

/// One table row: a fine-tuning composition and its deltas per test set.
struct DeltaRow {
    std::string label;
    std::vector<DeltaReport> cells;
};

/// Renders rows as a text table with one "Tested on X" column block per test
/// set (P@1, MAP, MRR), formatted like "-2.3%".
std::string render_delta_table(std::span<const DeltaRow> rows);

/// "-2.3%", "0%" for zero.
std::string format_percent(double rounded);

} // namespace mas2
