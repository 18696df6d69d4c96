#include "mas2/composition.hpp"
#include "mas2/dataset.hpp"
#include "mas2/errors.hpp"
#include "mas2/experiment.hpp"
#include "mas2/metrics.hpp"
#include "mas2/reranker.hpp"
#include "mas2/translation.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace mas2;

namespace {

py::dict report_dict(const MetricsReport& r) {
    py::dict d;
    d["test"] = r.test;
    d["n"] = r.num_questions;
    d["excluded"] = r.excluded;
    d["p_at_1"] = r.p_at_1;
    d["map"] = r.map;
    d["mrr"] = r.mrr;
    return d;
}

MetricsReport report_from(const py::dict& d) {
    MetricsReport r;
    if (d.contains("test")) r.test = d["test"].cast<std::string>();
    r.p_at_1 = d["p_at_1"].cast<double>();
    r.map = d["map"].cast<double>();
    r.mrr = d["mrr"].cast<double>();
    return r;
}

std::vector<JudgedRanking> rankings_from(const std::vector<std::vector<int>>& labels) {
    std::vector<JudgedRanking> out;
    out.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out.push_back({std::to_string(i), labels[i]});
    return out;
}

std::vector<std::pair<std::string, std::string>> terms_of(const CompositionExpr& e) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& t : e.terms) out.emplace_back(t.question_lang.str(), t.candidate_lang.str());
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Native core: dataset algebra, ranking metrics and experiment runs";

    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<UsageError>(m, "UsageError", error.ptr());
    py::register_exception<DataError>(m, "DataError", error.ptr());
    py::register_exception<IoError>(m, "IoError", error.ptr());
    py::register_exception<TranslationError>(m, "TranslationError", error.ptr());
    py::register_exception<RemoteError>(m, "RemoteError", error.ptr());

    py::class_<DatasetStats>(m, "DatasetStats")
        .def_readonly("num_questions", &DatasetStats::num_questions)
        .def_readonly("num_correct", &DatasetStats::num_correct)
        .def_readonly("num_incorrect", &DatasetStats::num_incorrect)
        .def("__eq__", [](const DatasetStats& a, const DatasetStats& b) { return a == b; })
        .def("__repr__", [](const DatasetStats& s) {
            return "DatasetStats(num_questions=" + std::to_string(s.num_questions) +
                   ", num_correct=" + std::to_string(s.num_correct) +
                   ", num_incorrect=" + std::to_string(s.num_incorrect) + ")";
        });

    py::class_<Dataset>(m, "Dataset")
        .def_static(
            "load", [](const std::filesystem::path& p, const std::string& split) { return load_dataset(p, parse_split(split)); },
            py::arg("path"), py::arg("split") = "train")
        .def_static(
            "from_jsonl",
            [](const std::string& text, const std::string& name, const std::string& split) {
                std::istringstream in(text);
                return read_dataset(in, name, parse_split(split));
            },
            py::arg("text"), py::arg("name") = "<memory>", py::arg("split") = "train")
        .def("save", [](const Dataset& d, const std::filesystem::path& p) { save_dataset(d, p); })
        .def("to_jsonl", [](const Dataset& d) { return to_jsonl(d); })
        .def("stats", [](const Dataset& d) { return stats(d); })
        .def("validate", [](const Dataset& d) { return validate(d); })
        .def("fingerprint", [](const Dataset& d) { return fingerprint(d); })
        .def("filter_answerable", [](const Dataset& d) { return filter_answerable(d); })
        .def_property_readonly("num_candidates", &Dataset::num_candidates)
        .def("__len__", [](const Dataset& d) { return d.groups.size(); });

    m.def("parse_composition", [](const std::string& e) { return terms_of(parse_composition(e)); }, py::arg("expr"),
          "Parse an expression such as 'En+DeEn' into (question_lang, candidate_lang) pairs.");
    m.def(
        "render_composition",
        [](const std::vector<std::pair<std::string, std::string>>& terms) {
            CompositionExpr e;
            for (const auto& [q, c] : terms) e.terms.push_back({LanguageCode(q), LanguageCode(c)});
            return render(e);
        },
        py::arg("terms"));

    m.def(
        "mock_translate",
        [](std::vector<std::string> texts, const std::string& src, const std::string& tgt) {
            MockTranslator t;
            return t.translate_batch({std::move(texts), LanguageCode(src), LanguageCode(tgt)});
        },
        py::arg("texts"), py::arg("src"), py::arg("tgt"));

    m.def(
        "transfer",
        [](const Dataset& d, const std::string& target) {
            MockTranslator t;
            return transfer(d, t, LanguageCode(target));
        },
        py::arg("dataset"), py::arg("target"), "Translate with the deterministic mock translator.");
    m.def("mix", &mix, py::arg("questions_from"), py::arg("candidates_from"));
    m.def("concat", [](const std::vector<Dataset>& ds) { return concat(std::span<const Dataset>(ds)); },
          py::arg("datasets"));
    m.def(
        "compose",
        [](const std::string& expr, const Dataset& source) {
            MockTranslator t;
            return materialize(parse_composition(expr), source, t);
        },
        py::arg("expr"), py::arg("source"), "Materialize a composition using the mock translator.");

    m.def("average_precision", [](const std::vector<int>& l) { return average_precision(l); }, py::arg("labels"));
    m.def("reciprocal_rank", [](const std::vector<int>& l) { return reciprocal_rank(l); }, py::arg("labels"));
    m.def(
        "evaluate",
        [](const std::vector<std::vector<int>>& labels, const std::string& test) {
            return report_dict(evaluate(rankings_from(labels), test));
        },
        py::arg("rankings"), py::arg("test") = "");
    m.def(
        "delta",
        [](const py::dict& baseline, const py::dict& run) {
            const auto d = delta_report(report_from(baseline), report_from(run));
            py::dict out;
            out["p_at_1"] = d.rounded[0];
            out["map"] = d.rounded[1];
            out["mrr"] = d.rounded[2];
            out["raw"] = d.raw;
            return out;
        },
        py::arg("baseline"), py::arg("run"));
    m.def("round_to_tenth", &round_to_tenth, py::arg("value"));

    m.def(
        "lexical_score",
        [](const std::string& q, const std::string& c, const std::vector<std::string>& idf_docs) {
            return lexical_score(q, c, IdfTable::build(idf_docs));
        },
        py::arg("question"), py::arg("candidate"), py::arg("idf_documents"));
    m.def(
        "linear_head",
        [](const std::vector<double>& x, std::vector<double> weights, std::vector<double> bias) {
            const auto classes = bias.size();
            if (classes == 0 || weights.size() != classes * x.size())
                throw UsageError("weights must hold len(bias) * len(x) values");
            return linear_head_apply(x, LinearHead(x.size(), classes, std::move(weights), std::move(bias)));
        },
        py::arg("x"), py::arg("weights"), py::arg("bias"),
        "Softmax probability of the positive class (last) for a classes x dim weight matrix.");

    m.def(
        "early_stop",
        [](const std::vector<double>& dev_maps, int max_iterations) {
            ScriptedTrainer trainer(dev_maps);
            const auto r =
                early_stop_loop(trainer, [&](const Scorer&) { return trainer.scripted_dev_map(); }, max_iterations);
            return py::make_tuple(r.best_iteration, r.iterations_run);
        },
        py::arg("dev_maps"), py::arg("max_iterations") = 3,
        "Replay a dev MAP sequence; returns (best_iteration, iterations_run).");

    m.def(
        "run_experiment",
        [](const std::filesystem::path& config_path, bool persist) {
            RunOptions opts;
            opts.persist = persist;
            return to_json(run_experiment(load_config(config_path), opts)).dump();
        },
        py::arg("config"), py::arg("persist") = true, "Run an experiment config; returns the run record as JSON text.");
}
