#include "mas2/metrics.hpp"

#include "mas2/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace mas2 {

double average_precision(std::span<const int> labels) {
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    if (hits == 0) throw UsageError("average precision needs at least one correct candidate");
    return sum / static_cast<double>(hits);
}

double average_precision(const JudgedRanking& r) { return average_precision(r.labels); }

double reciprocal_rank(std::span<const int> labels) {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == 1) return 1.0 / static_cast<double>(i + 1);
    throw UsageError("reciprocal rank needs at least one correct candidate");
}

double reciprocal_rank(const JudgedRanking& r) { return reciprocal_rank(r.labels); }

MetricsReport evaluate(std::span<const JudgedRanking> rankings, std::string test) {
    if (rankings.empty()) throw UsageError("cannot evaluate an empty set of rankings");
    MetricsReport report;
    report.test = std::move(test);
    report.num_questions = rankings.size();
    double hits = 0.0;
    double ap = 0.0;
    double rr = 0.0;
    for (const auto& r : rankings) {
        if (r.labels.empty()) throw UsageError("question '" + r.question_id + "' has an empty ranking");
        try {
            ap += average_precision(r);
            rr += reciprocal_rank(r);
        } catch (const UsageError&) {
            throw UsageError("question '" + r.question_id + "' has no correct candidate");
        }
        if (r.labels.front() == 1) hits += 1.0;
    }
    const auto n = static_cast<double>(rankings.size());
    report.p_at_1 = hits / n;
    report.map = ap / n;
    report.mrr = rr / n;
    return report;
}

double round_to_tenth(double value) {
    const double r = std::round(value * 10.0) / 10.0;
    return r == 0.0 ? 0.0 : r;
}

DeltaReport delta_report(const MetricsReport& baseline, const MetricsReport& run) {
    const double base[3] = {baseline.p_at_1, baseline.map, baseline.mrr};
    const double now[3] = {run.p_at_1, run.map, run.mrr};
    static constexpr const char* names[3] = {"P@1", "MAP", "MRR"};
    DeltaReport d;
    d.test = run.test;
    d.baseline = baseline.test;
    for (int m = 0; m < 3; ++m) {
        if (base[m] == 0.0)
            throw UsageError(std::string("baseline ") + names[m] + " is zero; relative delta undefined");
        d.raw[m] = 100.0 * (now[m] - base[m]) / base[m];
        d.rounded[m] = round_to_tenth(d.raw[m]);
    }
    return d;
}

std::string format_percent(double rounded) {
    if (rounded == 0.0) return "0%";
    char buf[32];
    // Drop a trailing ".0" the way the published tables do ("-10%", "-2.3%").
    if (std::fabs(rounded - std::round(rounded)) < 1e-9)
        std::snprintf(buf, sizeof buf, "%.0f%%", rounded);
    else
        std::snprintf(buf, sizeof buf, "%.1f%%", rounded);
    return buf;
}

std::string render_delta_table(std::span<const DeltaRow> rows) {
    std::vector<std::string> tests;
    std::vector<std::string> baselines;
    for (const auto& row : rows)
        for (const auto& c : row.cells) {
            if (std::find(tests.begin(), tests.end(), c.test) == tests.end()) tests.push_back(c.test);
            if (std::find(baselines.begin(), baselines.end(), c.baseline) == baselines.end())
                baselines.push_back(c.baseline);
        }

    std::size_t label_width = 2;
    for (const auto& row : rows) label_width = std::max(label_width, row.label.size());
    constexpr std::size_t cell = 8;
    const std::size_t block = 3 * cell;

    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s.append(w - s.size(), ' ');
        return s;
    };

    std::ostringstream out;
    out << pad("FT", label_width);
    for (const auto& t : tests) out << " | " << pad("Tested on " + t, block);
    out << '\n' << pad("", label_width);
    for (std::size_t i = 0; i < tests.size(); ++i) out << " | " << pad("P@1", cell) << pad("MAP", cell) << pad("MRR", cell);
    out << '\n' << std::string(label_width, '-');
    for (std::size_t i = 0; i < tests.size(); ++i) out << "-+-" << std::string(block, '-');
    out << '\n';
    for (const auto& row : rows) {
        out << pad(row.label, label_width);
        for (const auto& t : tests) {
            out << " | ";
            auto it = std::find_if(row.cells.begin(), row.cells.end(), [&](const DeltaReport& d) { return d.test == t; });
            if (it == row.cells.end()) {
                out << pad("n/a", block);
                continue;
            }
            for (int m = 0; m < 3; ++m) out << pad(format_percent(it->rounded[m]), cell);
        }
        out << '\n';
    }
    out << "Relative change of each metric versus baseline";
    for (std::size_t i = 0; i < baselines.size(); ++i) out << (i == 0 ? " " : ", ") << "'" << baselines[i] << "'";
    out << " (100 * (run - baseline) / baseline).\n";
    return out.str();
}

} // namespace mas2
