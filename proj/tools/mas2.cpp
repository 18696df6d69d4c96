// Command-line entry point. Every subcommand is a thin shell over the library;
// machine-readable output goes to stdout, diagnostics to stderr.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include "mas2/candidates.hpp"
#include "mas2/composition.hpp"
#include "mas2/dataset.hpp"
#include "mas2/errors.hpp"
#include "mas2/experiment.hpp"
#include "mas2/metrics.hpp"
#include "mas2/reranker.hpp"
#include "mas2/service.hpp"
#include "mas2/translation.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;
constexpr const char* kTranslatorEnv = "MAS2_TRANSLATOR_ENDPOINT";

/// Writes `content` to `path`, or to stdout when path is empty or "-".
void emit(const std::string& content, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << content;
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw mas2::IoError("cannot write '" + path + "'");
    out << content;
}

struct TranslatorFlags {
    std::string kind = "mock";
    std::string endpoint;
    std::string cache;
};

void add_translator_flags(CLI::App* cmd, TranslatorFlags& flags) {
    cmd->add_option("--translator", flags.kind, "Translation backend")
        ->check(CLI::IsMember({"mock", "http"}))
        ->capture_default_str();
    cmd->add_option("--endpoint", flags.endpoint,
                    std::string("MT service URL for --translator http (default: $") + kTranslatorEnv + ")");
    cmd->add_option("--cache", flags.cache, "Persistent translation cache (JSONL)");
}

/// Owns the backend, the cache and the caching decorator.
struct TranslatorStack {
    std::unique_ptr<mas2::Translator> backend;
    std::unique_ptr<mas2::TranslationCache> cache;
    std::unique_ptr<mas2::CachedTranslator> cached;

    explicit TranslatorStack(const TranslatorFlags& flags) {
        if (flags.kind == "mock") {
            backend = std::make_unique<mas2::MockTranslator>();
        } else {
            std::string endpoint = flags.endpoint;
            if (endpoint.empty())
                if (const char* env = std::getenv(kTranslatorEnv)) endpoint = env;
            if (endpoint.empty())
                throw mas2::UsageError(std::string("--translator http needs --endpoint or $") + kTranslatorEnv);
            backend = std::make_unique<mas2::HttpTranslator>(endpoint);
        }
        cache = flags.cache.empty() ? std::make_unique<mas2::TranslationCache>()
                                    : std::make_unique<mas2::TranslationCache>(flags.cache);
        cached = std::make_unique<mas2::CachedTranslator>(*backend, *cache);
    }

    mas2::Translator& get() { return *cached; }
};

struct ScorerFlags {
    std::string kind = "lexical";
    std::string endpoint;
    std::string scores;
    std::string idf_from;
    int max_seq_len = 128;
    std::size_t batch_size = 128;
};

void add_scorer_flags(CLI::App* cmd, ScorerFlags& flags, bool required) {
    auto* opt = cmd->add_option("--scorer", flags.kind, "Scoring backend")
                    ->check(CLI::IsMember({"lexical", "remote", "static"}));
    if (required) opt->required();
    cmd->add_option("--endpoint", flags.endpoint, "Scoring service URL for --scorer remote");
    cmd->add_option("--scores", flags.scores, "Score file for --scorer static");
    cmd->add_option("--idf-from", flags.idf_from,
                    "Dataset whose candidate texts fit the lexical idf table (default: the input)");
    cmd->add_option("--max-seq-len", flags.max_seq_len, "Token budget sent to remote scorers")->capture_default_str();
    cmd->add_option("--batch-size", flags.batch_size, "Pairs per remote request")->capture_default_str();
}

std::vector<std::string> candidate_texts(const mas2::Dataset& d) {
    std::vector<std::string> texts;
    for (const auto& g : d.groups)
        for (const auto& c : g.candidates) texts.push_back(c.text);
    return texts;
}

std::unique_ptr<mas2::Scorer> make_scorer(const ScorerFlags& flags, const mas2::Dataset& input) {
    if (flags.kind == "static") {
        if (flags.scores.empty()) throw mas2::UsageError("--scorer static needs --scores FILE");
        return std::make_unique<mas2::StaticScorer>(mas2::StaticScorer::load(flags.scores));
    }
    if (flags.kind == "remote") {
        if (flags.endpoint.empty()) throw mas2::UsageError("--scorer remote needs --endpoint URL");
        mas2::RemoteScorerOptions options;
        options.max_seq_len = flags.max_seq_len;
        options.batch_size = flags.batch_size;
        return std::make_unique<mas2::RemoteScorer>(flags.endpoint, options);
    }
    const auto texts = flags.idf_from.empty() ? candidate_texts(input)
                                              : candidate_texts(mas2::load_dataset(flags.idf_from, mas2::Split::train));
    return std::make_unique<mas2::LexicalScorer>(mas2::IdfTable::build(texts));
}

std::string rankings_jsonl(const mas2::Dataset& d, const mas2::Scorer& scorer) {
    std::ostringstream out;
    for (const auto& g : d.groups) {
        if (g.candidates.empty()) continue;
        nlohmann::ordered_json line;
        line["qid"] = g.question.id;
        line["ranking"] = nlohmann::ordered_json::array();
        for (const auto& e : mas2::rank(g.question, g.candidates, scorer))
            line["ranking"].push_back({{"cid", e.candidate_id}, {"score", e.score}});
        out << line.dump() << '\n';
    }
    return out.str();
}

std::unordered_map<std::string, mas2::RankedList> read_rankings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw mas2::IoError("cannot open rankings '" + path + "'");
    std::unordered_map<std::string, mas2::RankedList> out;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        auto j = json::parse(text, nullptr, false);
        if (j.is_discarded()) throw mas2::DataError("malformed ranking record", line);
        try {
            mas2::RankedList ranked;
            for (const auto& e : j.at("ranking"))
                ranked.push_back({e.at("cid").get<std::string>(), e.at("score").get<double>()});
            out[j.at("qid").get<std::string>()] = std::move(ranked);
        } catch (const json::exception&) {
            throw mas2::DataError("malformed ranking record", line);
        }
    }
    return out;
}

/// Baseline file: either a metrics report from `evaluate` or a run record.
mas2::MetricsReport load_baseline(const std::string& path, const std::string& test) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw mas2::UsageError("baseline '" + path + "' not found");
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw mas2::DataError("baseline '" + path + "' is not JSON");
    if (j.contains("reports")) {
        const auto record = mas2::run_record_from_json(j);
        for (const auto& r : record.reports)
            if (test.empty() || r.test == test) {
                auto copy = r;
                copy.test = record.run_id + "/" + r.test;
                return copy;
            }
        throw mas2::UsageError("baseline run has no report for test '" + test + "'");
    }
    if (j.contains("metrics")) j = j["metrics"];
    return mas2::metrics_from_json(j);
}

void serve_until_signal(mas2::MockService& service, const std::string& host, int port) {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    const int bound = service.start(host, port);
    std::cout << json{{"url", "http://" + host + ":" + std::to_string(bound)}}.dump() << std::endl;
    std::cerr << "listening on " << host << ":" << bound << " (Ctrl-C to stop)\n";
    int sig = 0;
    sigwait(&set, &sig);
    service.stop();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mas2: multilingual answer sentence selection toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    std::optional<std::uint64_t> seed;
    app.add_option("--seed", seed, "Seed for anything random (default 42)");

    std::function<int()> action;
    auto set_action = [&](CLI::App* cmd, std::function<int()> f) { cmd->callback([&action, f] { action = f; }); };

    // dataset ---------------------------------------------------------------
    auto* dataset = app.add_subcommand("dataset", "Inspect and transform AS2 datasets");
    dataset->require_subcommand(1);

    std::string stats_in;
    std::string split_name = "train";
    auto* stats_cmd = dataset->add_subcommand("stats", "Question and label counts");
    stats_cmd->add_option("file", stats_in, "Dataset JSONL")->required();
    stats_cmd->add_option("--split", split_name)->check(CLI::IsMember({"train", "dev", "test"}));
    set_action(stats_cmd, [&] {
        const auto s = mas2::stats(mas2::load_dataset(stats_in, mas2::parse_split(split_name)));
        std::cout << json{{"n_q", s.num_questions}, {"pos", s.num_correct}, {"neg", s.num_incorrect}}.dump() << '\n';
        return 0;
    });

    std::string validate_in;
    auto* validate_cmd = dataset->add_subcommand("validate", "Report every invariant violation");
    validate_cmd->add_option("file", validate_in, "Dataset JSONL")->required();
    set_action(validate_cmd, [&] {
        std::ifstream in(validate_in, std::ios::binary);
        if (!in) throw mas2::IoError("cannot open dataset '" + validate_in + "'");
        const auto d = mas2::read_dataset(in, fs::path(validate_in).stem().string(), mas2::Split::train);
        const auto violations = mas2::validate(d);
        std::cout << json{{"file", validate_in}, {"valid", violations.empty()}, {"violations", violations}}.dump()
                  << '\n';
        return violations.empty() ? 0 : kRuntimeError;
    });

    std::string transfer_in, transfer_to, transfer_out;
    TranslatorFlags transfer_tr;
    auto* transfer_cmd = dataset->add_subcommand("transfer", "Translate a dataset into another language");
    transfer_cmd->add_option("file", transfer_in, "Dataset JSONL")->required();
    transfer_cmd->add_option("--to", transfer_to, "Target language code, e.g. de")->required();
    transfer_cmd->add_option("-o,--out", transfer_out, "Output file (default stdout)");
    add_translator_flags(transfer_cmd, transfer_tr);
    set_action(transfer_cmd, [&] {
        TranslatorStack tr(transfer_tr);
        const auto d = mas2::load_dataset(transfer_in, mas2::Split::train);
        emit(mas2::to_jsonl(mas2::transfer(d, tr.get(), mas2::LanguageCode(transfer_to))), transfer_out);
        return 0;
    });

    std::string mix_q, mix_t, mix_out;
    auto* mix_cmd = dataset->add_subcommand("mix", "Pair questions of one dataset with candidates of another");
    mix_cmd->add_option("--questions", mix_q, "Dataset providing questions")->required();
    mix_cmd->add_option("--candidates", mix_t, "Dataset providing candidates")->required();
    mix_cmd->add_option("-o,--out", mix_out, "Output file (default stdout)");
    set_action(mix_cmd, [&] {
        const auto q = mas2::load_dataset(mix_q, mas2::Split::train);
        const auto t = mas2::load_dataset(mix_t, mas2::Split::train);
        emit(mas2::to_jsonl(mas2::mix(q, t)), mix_out);
        return 0;
    });

    std::vector<std::string> concat_in;
    std::string concat_out;
    auto* concat_cmd = dataset->add_subcommand("concat", "Concatenate datasets, re-keying ids per operand");
    concat_cmd->add_option("files", concat_in, "Dataset JSONL files")->required()->expected(1, -1);
    concat_cmd->add_option("-o,--out", concat_out, "Output file (default stdout)");
    set_action(concat_cmd, [&] {
        std::vector<mas2::Dataset> parts;
        for (const auto& f : concat_in) parts.push_back(mas2::load_dataset(f, mas2::Split::train));
        emit(mas2::to_jsonl(mas2::concat(std::span<const mas2::Dataset>(parts))), concat_out);
        return 0;
    });

    std::string compose_expr, compose_source, compose_out;
    TranslatorFlags compose_tr;
    auto* compose_cmd = dataset->add_subcommand("compose", "Build the dataset named by a composition expression");
    compose_cmd->add_option("--expr", compose_expr, "Composition, e.g. \"En+EnDe+De+DeEn\"")->required();
    compose_cmd->add_option("--source", compose_source, "Original-language dataset")->required();
    compose_cmd->add_option("-o,--out", compose_out, "Output file (default stdout)");
    add_translator_flags(compose_cmd, compose_tr);
    set_action(compose_cmd, [&] {
        const auto plan = mas2::parse_composition(compose_expr);
        TranslatorStack tr(compose_tr);
        const auto source = mas2::load_dataset(compose_source, mas2::Split::train);
        emit(mas2::to_jsonl(mas2::materialize(plan, source, tr.get())), compose_out);
        return 0;
    });

    // candidates ------------------------------------------------------------
    auto* candidates = app.add_subcommand("candidates", "Build candidate sets for annotation");
    candidates->require_subcommand(1);

    std::string build_corpus, build_questions, build_lang = "en", build_out;
    mas2::CandidateOptions build_opts;
    ScorerFlags build_scorer;
    auto* build_cmd = candidates->add_subcommand("build", "Retrieve documents and select top sentences per question");
    build_cmd->add_option("--corpus", build_corpus, "Corpus JSONL {id,text}")->required();
    build_cmd->add_option("--questions", build_questions, "Questions JSONL {id,text}")->required();
    build_cmd->add_option("--lang", build_lang, "Language of questions and corpus")->capture_default_str();
    build_cmd->add_option("--k-docs", build_opts.k_docs, "Documents retrieved per question")->capture_default_str();
    build_cmd->add_option("--k-sents", build_opts.k_sents, "Sentences kept per question")->capture_default_str();
    build_cmd->add_option("-o,--out", build_out, "Annotation task file (default stdout)");
    add_scorer_flags(build_cmd, build_scorer, false);
    set_action(build_cmd, [&] {
        const mas2::LanguageCode lang(build_lang);
        const auto corpus = mas2::build_index(mas2::load_corpus(build_corpus));
        const auto questions = mas2::load_questions(build_questions, lang);
        std::unique_ptr<mas2::Scorer> scorer;
        if (build_scorer.kind == "lexical" && build_scorer.idf_from.empty()) {
            const auto sentences = mas2::corpus_sentences(corpus);
            scorer = std::make_unique<mas2::LexicalScorer>(mas2::IdfTable::build(sentences));
        } else {
            scorer = make_scorer(build_scorer, mas2::Dataset{});
        }
        std::vector<mas2::AnnotationTask> tasks;
        for (const auto& q : questions) {
            const auto selected = mas2::select_candidates(q, corpus, *scorer, build_opts);
            auto t = mas2::make_tasks(q, selected);
            tasks.insert(tasks.end(), t.begin(), t.end());
        }
        if (build_out.empty() || build_out == "-")
            mas2::write_annotation_tasks(tasks, std::cout);
        else
            mas2::export_annotation_tasks(tasks, build_out);
        std::cerr << tasks.size() << " annotation tasks for " << questions.size() << " questions\n";
        return 0;
    });

    std::string annotate_tasks, annotate_gold, annotate_lang = "en", annotate_out, annotate_split = "train";
    auto* annotate_cmd = candidates->add_subcommand("annotate", "Label tasks from a gold file and emit a dataset");
    annotate_cmd->add_option("--tasks", annotate_tasks, "Annotation task file")->required();
    annotate_cmd->add_option("--gold", annotate_gold, "Gold positives JSONL {qid,cid}; omit if tasks are labeled");
    annotate_cmd->add_option("--lang", annotate_lang, "Dataset language")->capture_default_str();
    annotate_cmd->add_option("--split", annotate_split)->check(CLI::IsMember({"train", "dev", "test"}));
    annotate_cmd->add_option("-o,--out", annotate_out, "Dataset file (default stdout)");
    set_action(annotate_cmd, [&] {
        auto tasks = mas2::read_annotation_tasks(annotate_tasks);
        if (!annotate_gold.empty()) mas2::apply_gold(tasks, annotate_gold);
        const auto d = mas2::import_annotations(tasks, mas2::LanguageCode(annotate_lang),
                                                mas2::parse_split(annotate_split),
                                                fs::path(annotate_tasks).stem().string());
        emit(mas2::to_jsonl(d), annotate_out);
        return 0;
    });

    // rank ------------------------------------------------------------------
    std::string rank_in, rank_out;
    ScorerFlags rank_scorer;
    auto* rank_cmd = app.add_subcommand("rank", "Rank every question's candidates");
    rank_cmd->add_option("file", rank_in, "Dataset JSONL")->required();
    rank_cmd->add_option("-o,--out", rank_out, "Rankings JSONL (default stdout)");
    add_scorer_flags(rank_cmd, rank_scorer, true);
    set_action(rank_cmd, [&] {
        const auto d = mas2::load_dataset(rank_in, mas2::Split::test);
        const auto scorer = make_scorer(rank_scorer, d);
        emit(rankings_jsonl(d, *scorer), rank_out);
        return 0;
    });

    // evaluate --------------------------------------------------------------
    std::string eval_in, eval_rankings, eval_test, eval_baseline, eval_baseline_test;
    ScorerFlags eval_scorer;
    auto* eval_cmd = app.add_subcommand("evaluate", "P@1, MAP and MRR over answerable questions");
    eval_cmd->add_option("file", eval_in, "Dataset JSONL with gold labels")->required();
    eval_cmd->add_option("--rankings", eval_rankings, "Rankings from `rank`; otherwise rank with --scorer");
    eval_cmd->add_option("--test", eval_test, "Name recorded in the report (default: file stem)");
    eval_cmd->add_option("--baseline", eval_baseline, "Metrics JSON or run record to compute deltas against");
    eval_cmd->add_option("--baseline-test", eval_baseline_test, "Report to use when --baseline is a run record");
    add_scorer_flags(eval_cmd, eval_scorer, false);
    set_action(eval_cmd, [&] {
        const auto d = mas2::load_dataset(eval_in, mas2::Split::test);
        const std::string name = eval_test.empty() ? fs::path(eval_in).stem().string() : eval_test;
        mas2::MetricsReport report;
        if (!eval_rankings.empty()) {
            const auto rankings = read_rankings(eval_rankings);
            const auto answerable = mas2::filter_answerable(d);
            std::vector<mas2::JudgedRanking> judged;
            for (const auto& g : answerable.groups) {
                auto it = rankings.find(g.question.id);
                if (it == rankings.end()) throw mas2::DataError("no ranking for question '" + g.question.id + "'");
                judged.push_back(mas2::judge(g, it->second));
            }
            report = mas2::evaluate(judged, name);
            report.excluded = d.groups.size() - answerable.groups.size();
        } else {
            const auto scorer = make_scorer(eval_scorer, d);
            report = mas2::evaluate_dataset(d, *scorer, name);
        }
        json out = mas2::to_json(report);
        if (!eval_baseline.empty()) {
            const auto delta = mas2::delta_report(load_baseline(eval_baseline, eval_baseline_test), report);
            out["delta"] = mas2::to_json(delta);
        }
        std::cout << out.dump() << '\n';
        return 0;
    });

    // experiment ------------------------------------------------------------
    auto* experiment = app.add_subcommand("experiment", "Declarative experiment runs");
    experiment->require_subcommand(1);

    std::string run_config, run_results;
    auto* run_cmd = experiment->add_subcommand("run", "Compose data, train with early stopping, evaluate, report");
    run_cmd->add_option("--config", run_config, "Experiment config JSON")->required();
    run_cmd->add_option("--results", run_results, "Override the config's results directory");
    set_action(run_cmd, [&] {
        auto config = mas2::load_config(run_config);
        if (seed) config.hyper.seed = *seed;
        if (!run_results.empty()) config.results_dir = run_results;
        const auto record = mas2::run_experiment(config);
        std::cout << mas2::to_json(record).dump() << '\n';
        std::cerr << "run record: " << mas2::run_record_path(config.results_dir, config.run_id).string() << '\n';
        if (!record.deltas.empty()) {
            const mas2::RunRecord one[] = {record};
            std::cerr << mas2::render_run_table(one);
        }
        return 0;
    });

    std::vector<std::string> table_records;
    auto* table_cmd = experiment->add_subcommand("table", "Render a delta table, one row per run");
    table_cmd->add_option("records", table_records, "Run record JSON files")->required()->expected(1, -1);
    set_action(table_cmd, [&] {
        std::vector<mas2::RunRecord> runs;
        for (const auto& p : table_records) runs.push_back(mas2::load_run_record(p));
        std::cout << mas2::render_run_table(runs);
        return 0;
    });

    // serve -----------------------------------------------------------------
    auto* serve = app.add_subcommand("serve", "In-process mock services for end-to-end runs");
    serve->require_subcommand(1);

    int scorer_port = 8081;
    std::string scorer_host = "127.0.0.1", scorer_scores, scorer_idf;
    auto* serve_scorer = serve->add_subcommand("mock-scorer", "Scoring protocol server (static scores or lexical)");
    serve_scorer->add_option("--port", scorer_port, "Port (0 picks a free one)")->capture_default_str();
    serve_scorer->add_option("--host", scorer_host)->capture_default_str();
    serve_scorer->add_option("--scores", scorer_scores, "Static score file keyed by (q, t) text");
    serve_scorer->add_option("--idf-from", scorer_idf, "Dataset fitting the lexical idf table");
    set_action(serve_scorer, [&] {
        std::shared_ptr<const mas2::Scorer> scorer;
        if (!scorer_scores.empty()) {
            scorer = std::make_shared<mas2::StaticScorer>(mas2::StaticScorer::load(scorer_scores));
        } else {
            const auto texts = scorer_idf.empty() ? std::vector<std::string>{}
                                                  : candidate_texts(mas2::load_dataset(scorer_idf, mas2::Split::train));
            scorer = std::make_shared<mas2::LexicalScorer>(mas2::IdfTable::build(texts));
        }
        mas2::MockScorerService service(scorer);
        serve_until_signal(service, scorer_host, scorer_port);
        return 0;
    });

    int translator_port = 8082;
    std::string translator_host = "127.0.0.1";
    auto* serve_translator = serve->add_subcommand("mock-translator", "MT protocol server using the mock translator");
    serve_translator->add_option("--port", translator_port, "Port (0 picks a free one)")->capture_default_str();
    serve_translator->add_option("--host", translator_host)->capture_default_str();
    set_action(serve_translator, [&] {
        mas2::MockTranslatorService service;
        serve_until_signal(service, translator_host, translator_port);
        return 0;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help("", CLI::AppFormatMode::All);
        return kUsageError;
    }

    try {
        return action ? action() : kUsageError;
    } catch (const mas2::UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
}
