#include "mas2/experiment.hpp"

#include "mas2/errors.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <limits>

namespace mas2 {

using nlohmann::json;

namespace {

template <class T>
T field(const json& j, const char* key, const T& fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw UsageError(std::string("config field \"") + key + "\" has the wrong type");
    }
}

template <class T>
T required(const json& j, const char* key) {
    if (!j.contains(key)) throw UsageError(std::string("config is missing \"") + key + "\"");
    return field<T>(j, key, T{});
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return {};
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

std::string now_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

const char* to_string(ScorerKind k) {
    switch (k) {
    case ScorerKind::lexical: return "lexical";
    case ScorerKind::remote: return "remote";
    case ScorerKind::static_scores: return "static";
    }
    return "lexical";
}

ScorerKind parse_scorer_kind(const std::string& s) {
    if (s == "lexical") return ScorerKind::lexical;
    if (s == "remote") return ScorerKind::remote;
    if (s == "static") return ScorerKind::static_scores;
    throw UsageError("unknown scorer kind '" + s + "' (expected lexical, remote or static)");
}

class ConstantScorer final : public Scorer {
public:
    std::vector<double> score_batch(std::span<const ScoringPair> pairs) const override {
        return std::vector<double>(pairs.size(), 0.5);
    }
};

} // namespace

ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw UsageError("experiment config must be a JSON object");
    ExperimentConfig c;
    c.run_id = required<std::string>(j, "run_id");
    if (c.run_id.empty() || c.run_id.find_first_of("/\\") != std::string::npos)
        throw UsageError("run_id must be a non-empty file-name-safe string");
    c.pretrained_label = field<std::string>(j, "pretrained_label", "");

    const auto data = required<json>(j, "data");
    if (!data.is_object()) throw UsageError("config \"data\" must be an object");
    c.train_path = resolve(base_dir, required<std::string>(data, "train"));
    c.dev_path = resolve(base_dir, field<std::string>(data, "dev", required<std::string>(data, "train")));
    c.test_path = resolve(base_dir, field<std::string>(data, "test", required<std::string>(data, "train")));

    c.ft_expr = required<std::string>(j, "ft_expr");
    c.dev_expr = field<std::string>(j, "dev_expr", c.ft_expr);
    c.test_exprs = required<std::vector<std::string>>(j, "test_exprs");
    if (c.test_exprs.empty()) throw UsageError("config needs at least one test expression");
    parse_composition(c.ft_expr);
    parse_composition(c.dev_expr);
    for (const auto& e : c.test_exprs) parse_composition(e);

    const auto scorer = field<json>(j, "scorer", json::object());
    c.scorer.kind = parse_scorer_kind(field<std::string>(scorer, "kind", "lexical"));
    c.scorer.endpoint = field<std::string>(scorer, "endpoint", "");
    c.scorer.scores_path = resolve(base_dir, field<std::string>(scorer, "scores", ""));
    if (c.scorer.kind == ScorerKind::remote && c.scorer.endpoint.empty())
        throw UsageError("remote scorer needs \"endpoint\"");
    if (c.scorer.kind == ScorerKind::static_scores && c.scorer.scores_path.empty())
        throw UsageError("static scorer needs \"scores\"");

    const auto translator = field<json>(j, "translator", json::object());
    const auto tkind = field<std::string>(translator, "kind", "mock");
    if (tkind == "mock")
        c.translator.kind = TranslatorKind::mock;
    else if (tkind == "http")
        c.translator.kind = TranslatorKind::http;
    else
        throw UsageError("unknown translator kind '" + tkind + "' (expected mock or http)");
    c.translator.endpoint = field<std::string>(translator, "endpoint", "");
    c.translator.cache_path = resolve(base_dir, field<std::string>(translator, "cache", ""));
    if (c.translator.kind == TranslatorKind::http && c.translator.endpoint.empty())
        throw UsageError("http translator needs \"endpoint\"");

    const auto hp = field<json>(j, "hyperparameters", json::object());
    c.hyper.learning_rate = field<double>(hp, "learning_rate", c.hyper.learning_rate);
    c.hyper.max_seq_len = field<int>(hp, "max_seq_len", c.hyper.max_seq_len);
    c.hyper.max_iterations = field<int>(hp, "max_iterations", c.hyper.max_iterations);
    c.hyper.batch_size = field<int>(hp, "batch_size", c.hyper.batch_size);
    c.hyper.seed = field<std::uint64_t>(hp, "seed", c.hyper.seed);
    if (c.hyper.max_iterations < 1) throw UsageError("max_iterations must be at least 1");
    if (c.hyper.max_seq_len < 1 || c.hyper.batch_size < 1)
        throw UsageError("max_seq_len and batch_size must be positive");

    if (j.contains("baseline") && !j["baseline"].is_null()) {
        const auto b = j["baseline"];
        c.baseline = BaselineRef{required<std::string>(b, "run"), field<std::string>(b, "test", "")};
    }
    c.results_dir = resolve(base_dir, field<std::string>(j, "results_dir", "results"));
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw UsageError("config '" + path.string() + "' is not valid JSON");
    return config_from_json(j, path.parent_path());
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["run_id"] = c.run_id;
    j["pretrained_label"] = c.pretrained_label;
    j["data"] = {{"train", c.train_path.string()}, {"dev", c.dev_path.string()}, {"test", c.test_path.string()}};
    j["ft_expr"] = c.ft_expr;
    j["dev_expr"] = c.dev_expr;
    j["test_exprs"] = c.test_exprs;
    j["scorer"] = {{"kind", to_string(c.scorer.kind)}};
    if (!c.scorer.endpoint.empty()) j["scorer"]["endpoint"] = c.scorer.endpoint;
    if (!c.scorer.scores_path.empty()) j["scorer"]["scores"] = c.scorer.scores_path.string();
    j["translator"] = {{"kind", c.translator.kind == TranslatorKind::mock ? "mock" : "http"}};
    if (!c.translator.endpoint.empty()) j["translator"]["endpoint"] = c.translator.endpoint;
    if (!c.translator.cache_path.empty()) j["translator"]["cache"] = c.translator.cache_path.string();
    j["hyperparameters"] = {{"learning_rate", c.hyper.learning_rate},
                            {"max_seq_len", c.hyper.max_seq_len},
                            {"max_iterations", c.hyper.max_iterations},
                            {"batch_size", c.hyper.batch_size},
                            {"seed", c.hyper.seed}};
    j["baseline"] = c.baseline ? json{{"run", c.baseline->run}, {"test", c.baseline->test}} : json(nullptr);
    j["results_dir"] = c.results_dir.string();
    return j;
}

void LexicalTrainer::train_one_iteration() {
    std::vector<std::string> texts;
    texts.reserve(train_.num_candidates());
    for (const auto& g : train_.groups)
        for (const auto& c : g.candidates) texts.push_back(c.text);
    current_ = std::make_shared<LexicalScorer>(IdfTable::build(texts));
}

std::shared_ptr<const Scorer> LexicalTrainer::snapshot() const {
    if (!current_) throw Error("lexical trainer has not run an iteration");
    return current_;
}

ScriptedTrainer::ScriptedTrainer(std::vector<double> dev_maps)
    : dev_maps_(std::move(dev_maps)), scorer_(std::make_shared<ConstantScorer>()) {}

void ScriptedTrainer::train_one_iteration() {
    if (static_cast<std::size_t>(iterations_) >= dev_maps_.size())
        throw Error("scripted trainer ran past its script of " + std::to_string(dev_maps_.size()) + " iterations");
    ++iterations_;
}

std::shared_ptr<const Scorer> ScriptedTrainer::snapshot() const { return scorer_; }

double ScriptedTrainer::scripted_dev_map() const {
    if (iterations_ == 0) throw Error("scripted trainer has not run an iteration");
    return dev_maps_[static_cast<std::size_t>(iterations_ - 1)];
}

EarlyStopResult early_stop_loop(Trainer& trainer, const DevEvaluator& dev_map, int max_iterations) {
    if (max_iterations < 1) throw UsageError("max_iterations must be at least 1");
    EarlyStopResult result;
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 1; i <= max_iterations; ++i) {
        trainer.train_one_iteration();
        auto scorer = trainer.snapshot();
        const double m = dev_map(*scorer);
        result.dev_maps.push_back(m);
        result.iterations_run = i;
        if (m > best) {
            best = m;
            result.best_iteration = i;
            result.best_scorer = std::move(scorer);
        } else {
            break;
        }
    }
    return result;
}

JudgedRanking judge(const QuestionGroup& group, const RankedList& ranked) {
    std::unordered_map<std::string_view, int> gold;
    for (const auto& c : group.candidates) gold.emplace(c.id, static_cast<int>(c.label));
    JudgedRanking r{group.question.id, {}};
    r.labels.reserve(ranked.size());
    for (const auto& e : ranked) {
        auto it = gold.find(e.candidate_id);
        if (it == gold.end())
            throw DataError("ranked candidate '" + e.candidate_id + "' is not in question '" + group.question.id + "'");
        r.labels.push_back(it->second);
    }
    if (r.labels.size() != group.candidates.size())
        throw DataError("ranking of question '" + group.question.id + "' does not cover all candidates");
    return r;
}

MetricsReport evaluate_dataset(const Dataset& d, const Scorer& scorer, std::string test_name) {
    const auto answerable = filter_answerable(d);
    std::vector<JudgedRanking> judged;
    judged.reserve(answerable.groups.size());
    for (const auto& g : answerable.groups) judged.push_back(judge(g, rank(g.question, g.candidates, scorer)));
    if (judged.empty()) throw DataError("test set '" + test_name + "' has no answerable question");
    auto report = evaluate(judged, std::move(test_name));
    report.excluded = d.groups.size() - answerable.groups.size();
    return report;
}

json to_json(const MetricsReport& r) {
    return json{{"test", r.test}, {"n", r.num_questions}, {"excluded", r.excluded},
                {"p_at_1", r.p_at_1}, {"map", r.map}, {"mrr", r.mrr}};
}

MetricsReport metrics_from_json(const json& j) {
    try {
        MetricsReport r;
        r.test = j.value("test", std::string{});
        r.num_questions = j.at("n").get<std::size_t>();
        r.excluded = j.value("excluded", std::size_t{0});
        r.p_at_1 = j.at("p_at_1").get<double>();
        r.map = j.at("map").get<double>();
        r.mrr = j.at("mrr").get<double>();
        return r;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed metrics report: ") + e.what());
    }
}

json to_json(const DeltaReport& d) {
    return json{{"test", d.test},
                {"baseline", d.baseline},
                {"p_at_1", d.rounded[0]},
                {"map", d.rounded[1]},
                {"mrr", d.rounded[2]},
                {"raw", {{"p_at_1", d.raw[0]}, {"map", d.raw[1]}, {"mrr", d.raw[2]}}}};
}

json to_json(const RunRecord& r) {
    json j;
    j["run_id"] = r.run_id;
    j["seed"] = r.seed;
    j["config"] = r.config;
    j["fingerprints"] = r.fingerprints;
    j["early_stopping"] = {{"dev_map", r.early_stopping.dev_maps},
                           {"best_iteration", r.early_stopping.best_iteration},
                           {"iterations_run", r.early_stopping.iterations_run}};
    j["reports"] = json::array();
    for (const auto& m : r.reports) j["reports"].push_back(to_json(m));
    j["deltas"] = json::array();
    for (const auto& d : r.deltas) j["deltas"].push_back(to_json(d));
    j["started_at"] = r.started_at;
    j["finished_at"] = r.finished_at;
    return j;
}

RunRecord run_record_from_json(const json& j) {
    try {
        RunRecord r;
        r.run_id = j.at("run_id").get<std::string>();
        r.seed = j.value("seed", std::uint64_t{42});
        r.config = j.value("config", json::object());
        r.fingerprints = j.value("fingerprints", json::object());
        const auto& es = j.at("early_stopping");
        r.early_stopping.dev_maps = es.at("dev_map").get<std::vector<double>>();
        r.early_stopping.best_iteration = es.at("best_iteration").get<int>();
        r.early_stopping.iterations_run = es.at("iterations_run").get<int>();
        for (const auto& m : j.at("reports")) r.reports.push_back(metrics_from_json(m));
        for (const auto& d : j.at("deltas")) {
            DeltaReport delta;
            delta.test = d.at("test").get<std::string>();
            delta.baseline = d.at("baseline").get<std::string>();
            delta.rounded = {d.at("p_at_1").get<double>(), d.at("map").get<double>(), d.at("mrr").get<double>()};
            const auto& raw = d.at("raw");
            delta.raw = {raw.at("p_at_1").get<double>(), raw.at("map").get<double>(), raw.at("mrr").get<double>()};
            r.deltas.push_back(std::move(delta));
        }
        r.started_at = j.value("started_at", std::string{});
        r.finished_at = j.value("finished_at", std::string{});
        return r;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed run record: ") + e.what());
    }
}

RunRecord load_run_record(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open run record '" + path.string() + "'");
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw DataError("run record '" + path.string() + "' is not valid JSON");
    return run_record_from_json(j);
}

void save_run_record(const RunRecord& record, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write run record '" + tmp.string() + "'");
        out << to_json(record).dump(2) << '\n';
        if (!out) throw IoError("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

std::filesystem::path run_record_path(const std::filesystem::path& results_dir, const std::string& run_id) {
    return results_dir / (run_id + ".json");
}

RunRecord run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    RunRecord record;
    record.started_at = now_utc();
    record.run_id = config.run_id;
    record.config = to_json(config);
    record.seed = config.hyper.seed;

    const auto ft_plan = parse_composition(config.ft_expr);
    const auto dev_plan = parse_composition(config.dev_expr);
    std::vector<CompositionExpr> test_plans;
    for (const auto& e : config.test_exprs) test_plans.push_back(parse_composition(e));

    // Resolve the baseline before doing any work so a typo fails fast.
    std::optional<RunRecord> baseline_run;
    if (config.baseline && config.baseline->run != config.run_id) {
        const auto path = run_record_path(config.results_dir, config.baseline->run);
        if (!std::filesystem::exists(path))
            throw UsageError("baseline run '" + config.baseline->run + "' not found at " + path.string());
        baseline_run = load_run_record(path);
    }

    MockTranslator mock;
    std::unique_ptr<HttpTranslator> http;
    Translator* backend = options.translator;
    if (!backend) {
        if (config.translator.kind == TranslatorKind::mock) {
            backend = &mock;
        } else {
            http = std::make_unique<HttpTranslator>(config.translator.endpoint);
            backend = http.get();
        }
    }
    auto cache = config.translator.cache_path.empty() ? std::make_unique<TranslationCache>()
                                                      : std::make_unique<TranslationCache>(config.translator.cache_path);
    CachedTranslator translator(*backend, *cache);

    const auto train_src = load_dataset(config.train_path, Split::train);
    const auto dev_src = load_dataset(config.dev_path, Split::dev);
    const auto test_src = load_dataset(config.test_path, Split::test);

    const auto ft = materialize(ft_plan, train_src, translator);
    const auto dev = filter_answerable(materialize(dev_plan, dev_src, translator));
    std::vector<Dataset> tests;
    for (const auto& plan : test_plans) tests.push_back(materialize(plan, test_src, translator));

    record.fingerprints["ft"] = fingerprint(ft);
    record.fingerprints["dev"] = fingerprint(dev);
    record.fingerprints["test"] = json::object();
    for (std::size_t i = 0; i < tests.size(); ++i) record.fingerprints["test"][config.test_exprs[i]] = fingerprint(tests[i]);

    if (dev.empty()) throw DataError("dev set '" + config.dev_expr + "' has no answerable question");

    std::unique_ptr<Trainer> trainer;
    switch (config.scorer.kind) {
    case ScorerKind::lexical: trainer = std::make_unique<LexicalTrainer>(ft); break;
    case ScorerKind::static_scores:
        trainer = std::make_unique<FixedScorerTrainer>(
            std::make_shared<StaticScorer>(StaticScorer::load(config.scorer.scores_path)));
        break;
    case ScorerKind::remote: {
        RemoteScorerOptions ro;
        ro.max_seq_len = config.hyper.max_seq_len;
        trainer = std::make_unique<FixedScorerTrainer>(std::make_shared<RemoteScorer>(config.scorer.endpoint, ro));
        break;
    }
    }

    record.early_stopping = early_stop_loop(
        *trainer, [&](const Scorer& s) { return evaluate_dataset(dev, s, config.dev_expr).map; },
        config.hyper.max_iterations);

    const Scorer& best = *record.early_stopping.best_scorer;
    for (std::size_t i = 0; i < tests.size(); ++i)
        record.reports.push_back(evaluate_dataset(tests[i], best, config.test_exprs[i]));

    if (config.baseline) {
        const auto& reports = baseline_run ? baseline_run->reports : record.reports;
        const MetricsReport* base = nullptr;
        for (const auto& r : reports)
            if (config.baseline->test.empty() || r.test == config.baseline->test) {
                base = &r;
                break;
            }
        if (!base)
            throw UsageError("baseline run '" + config.baseline->run + "' has no report for test '" +
                             config.baseline->test + "'");
        MetricsReport labelled = *base;
        labelled.test = config.baseline->run + "/" + base->test;
        for (const auto& r : record.reports) record.deltas.push_back(delta_report(labelled, r));
    }

    record.finished_at = now_utc();
    if (options.persist) save_run_record(record, run_record_path(config.results_dir, config.run_id));
    return record;
}

std::string render_run_table(std::span<const RunRecord> runs) {
    std::vector<DeltaRow> rows;
    for (const auto& r : runs) {
        std::string label = r.config.is_object() ? r.config.value("ft_expr", r.run_id) : r.run_id;
        rows.push_back({std::move(label), r.deltas});
    }
    return render_delta_table(rows);
}

} // namespace mas2
