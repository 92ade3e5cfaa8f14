#include "iswerm/cli.hpp"

#include "iswerm/bench.hpp"
#include "iswerm/config.hpp"
#include "iswerm/ingestion.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#ifndef ISWERM_VERSION
#define ISWERM_VERSION "0.0.0"
#endif

namespace iswerm {

using nlohmann::json;
namespace fs = std::filesystem;

std::string file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(ss.str())));
    return buf;
}

namespace {

const std::vector<std::string> kCommands = {"collect",    "train",        "learn-policy", "evaluate",
                                            "bandit-bench", "rate-sweep", "theory-check", "ingest"};

class StageTimer {
public:
    explicit StageTimer(json& sink) : sink_(sink) {}
    template <class F>
    auto run(const std::string& stage, F&& fn) {
        const auto start = std::chrono::steady_clock::now();
        struct Record {
            StageTimer& t;
            std::string stage;
            std::chrono::steady_clock::time_point start;
            ~Record() {
                t.sink_[stage] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            }
        } record{*this, stage, start};
        try {
            return fn();
        } catch (const std::exception& e) {
            throw Error(stage + ": " + e.what());
        }
    }

private:
    json& sink_;
};

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string required_path(const json& config, const char* key, const char* what) {
    const auto p = config.at("input").at(key).get<std::string>();
    if (p.empty()) throw Error(std::string("no ") + what + " given (input." + key + ")");
    return p;
}

ExperimentConfig bench_config(const json& c, EnvironmentPtr env) {
    const auto& b = c.at("bench");
    ExperimentConfig e;
    e.env = std::move(env);
    e.schedule = schedule_from(c.at("collect"));
    e.greedy = greedy_from(c.at("collect"));
    e.schemes.clear();
    for (const auto& s : b.at("schemes")) e.schemes.push_back(parse_scheme(s.get<std::string>()));
    e.models.clear();
    for (const auto& m : b.at("models")) e.models.push_back(parse_model(m.get<std::string>()));
    e.T_grid = horizon_grid(b.at("T"), "bench.T");
    e.n_reps = b.at("n_reps").get<int>();
    e.seed = c.at("seed").get<std::uint64_t>();
    e.T_test = b.at("T_test").get<std::size_t>();
    const auto metric = b.at("metric").get<std::string>();
    if (metric == "test_mse") e.metric = Metric::TestMse;
    else if (metric == "excess_risk") e.metric = Metric::ExcessRisk;
    else throw Error("bench.metric must be test_mse or excess_risk");
    e.learner = learner_from(c.at("learner"));
    e.gstar = ReferenceWeight::parse(c.at("train").at("gstar").get<std::string>());
    e.threads = c.at("threads").get<int>();
    e.validate();
    return e;
}

std::optional<double> margin_nu_from(const json& v) {
    if (v.is_null()) return std::nullopt;
    if (v.is_string()) {
        if (v.get<std::string>() == "inf") return kInfiniteNu;
        throw Error("sweep.margin_nu must be a number or \"inf\"");
    }
    return v.get<double>();
}

int cmd_collect(const json& c, Artifacts& out, StageTimer& timer) {
    const auto env = timer.run("environment", [&] { return make_environment(c.at("env")); });
    const auto& col = c.at("collect");
    const auto schedule = schedule_from(col);
    const auto T = col.at("T").get<std::int64_t>();
    const auto seed = child_seed(c.at("seed").get<std::uint64_t>(), 0, "collect");
    const auto ds = timer.run("collect", [&] { return collect(*env, schedule, greedy_from(col), T, seed); });
    std::ostringstream data;
    write_jsonl(ds, data);
    out.write("data.jsonl", data.str());
    const auto bound = exploration_bound(schedule, env->num_arms(), static_cast<std::int64_t>(ds.size()),
                                         ReferenceWeight::parse(c.at("train").at("gstar").get<std::string>()));
    const auto violations = validate_dataset(ds);
    json summary = {{"environment", env->describe()},
                    {"records", ds.size()},
                    {"gamma_avg", bound.gamma_avg},
                    {"gamma_max", bound.gamma_max},
                    {"violations", violations.size()}};
    out.write("summary.json", dump(summary));
    return violations.empty() ? 0 : 1;
}

int cmd_train(const json& c, Artifacts& out, StageTimer& timer) {
    const auto ds = timer.run("load", [&] { return read_jsonl(required_path(c, "data", "dataset")); });
    const auto& t = c.at("train");
    const auto scheme = parse_scheme(t.at("scheme").get<std::string>());
    const auto kind = parse_model(t.at("model").get<std::string>());
    WeightOptions wo{ReferenceWeight::parse(t.at("gstar").get<std::string>())};
    // Floors follow the logged decay; collect.floor adds an extra lower bound.
    const ExplorationSchedule schedule{ds.beta, c.at("collect").at("floor").get<double>()};
    const Vector w = compute_weights(scheme, ds, schedule, wo);
    const auto fit = timer.run("fit", [&] { return fit_regression(kind, ds, w, learner_from(c.at("learner"))); });
    json j = {{"scheme", scheme_name(scheme)},
              {"model_kind", model_name(kind)},
              {"lambda", fit.lambda},
              {"converged", fit.converged},
              {"records", ds.size()},
              {"model", model_to_json(fit.model)}};
    out.write("model.json", dump(j));
    return 0;
}

int cmd_learn_policy(const json& c, Artifacts& out, StageTimer& timer) {
    const auto ds = timer.run("load", [&] { return read_jsonl(required_path(c, "data", "dataset")); });
    EnvironmentPtr env;
    const auto cls_kind = c.at("policy").at("class").get<std::string>();
    if (cls_kind == "all_tables" || cls_kind == "product")
        env = timer.run("environment", [&] { return make_environment(c.at("env")); });
    const auto cls = policy_class_from(c.at("policy"), env.get());
    const auto scheme = parse_scheme(c.at("sweep").at("scheme").get<std::string>());
    WeightOptions wo{ReferenceWeight::parse(c.at("train").at("gstar").get<std::string>())};
    const ExplorationSchedule schedule{ds.beta, c.at("collect").at("floor").get<double>()};
    const Vector w = compute_weights(scheme, ds, schedule, wo);
    // Outcomes logged from a classification environment are rewards.
    PolicyLearnOptions po{env ? env->cost_sign() : (c.at("env").at("kind") == "classification" ? -1.0 : 1.0)};
    const auto fit = timer.run("fit", [&] { return fit_policy_iswerm(ds, w, cls, po); });
    json j = {{"scheme", scheme_name(scheme)},
              {"empirical_risk", fit.risk},
              {"records", ds.size()},
              {"policy", policy_to_json(fit.policy)}};
    if (std::holds_alternative<FinitePolicyClass>(cls)) j["index"] = fit.index;
    out.write("policy.json", dump(j));
    return 0;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    return json::parse(in);
}

int cmd_evaluate(const json& c, Artifacts& out, StageTimer& timer) {
    const auto env = timer.run("environment", [&] { return make_environment(c.at("env")); });
    const auto& ev = c.at("evaluate");
    const auto seed = c.at("seed").get<std::uint64_t>();
    const auto n_test = ev.at("n_test").get<std::size_t>();
    ExcessRiskOptions eo{ev.at("mc_samples").get<std::size_t>(), child_seed(seed, 0, "excess")};
    json result = {{"environment", env->describe()}, {"n_test", n_test}};
    auto estimate_json = [](const Estimate& e) {
        return json{{"value", e.value}, {"se", e.se}, {"exact", e.exact}};
    };
    const auto model_path = c.at("input").at("model").get<std::string>();
    const auto policy_path = c.at("input").at("policy").get<std::string>();
    if (model_path.empty() == policy_path.empty())
        throw Error("evaluate needs exactly one of input.model and input.policy");
    timer.run("evaluate", [&] {
        if (!model_path.empty()) {
            const auto model = model_from_json(read_json_file(model_path).at("model"));
            result["test_mse"] = estimate_json(
                reference_risk_mc(as_score(model), *env, LossKind::Squared, n_test, child_seed(seed, 0, "test")));
            if (env->mean_known() || env->as_discrete())
                result["excess_risk"] = estimate_json(excess_risk(model, *env, ReferenceWeight::constant_one(), eo));
        } else {
            const auto policy = policy_from_json(read_json_file(policy_path).at("policy"));
            const auto score = as_score(policy);
            result["policy_value"] = estimate_json(
                reference_risk_mc(score, *env, LossKind::PolicyValue, n_test, child_seed(seed, 0, "test")));
            if (env->mean_known() || env->as_discrete())
                result["regret"] = estimate_json(
                    excess_risk(score, *env, ReferenceWeight::constant_one(), LossKind::PolicyValue, eo));
        }
        return 0;
    });
    out.write("evaluation.json", dump(result));
    return 0;
}

int cmd_bench(const json& c, Artifacts& out, StageTimer& timer) {
    const auto env = timer.run("environment", [&] { return make_environment(c.at("env")); });
    const auto cfg = bench_config(c, env);
    const auto result = timer.run("replications", [&] { return run_bandit_bench(cfg); });
    write_bench_outputs(result, out);
    return 0;
}

int cmd_rate_sweep(const json& c, Artifacts& out, StageTimer& timer) {
    const auto env = timer.run("environment", [&] { return make_environment(c.at("env")); });
    const auto& s = c.at("sweep");
    PolicySweepConfig p;
    p.env = env;
    p.betas = s.at("betas").get<std::vector<double>>();
    p.floor_eps = c.at("collect").at("floor").get<double>();
    p.greedy = greedy_from(c.at("collect"));
    p.policy_class = policy_class_from(c.at("policy"), env.get());
    p.scheme = parse_scheme(s.at("scheme").get<std::string>());
    p.T_grid = horizon_grid(s.at("T"), "sweep.T");
    p.n_reps = s.at("n_reps").get<int>();
    p.seed = c.at("seed").get<std::uint64_t>();
    p.threads = c.at("threads").get<int>();
    p.excess = {c.at("evaluate").at("mc_samples").get<std::size_t>(), child_seed(p.seed, 0, "excess")};
    RateSweepOptions o;
    o.exclude_smallest = s.at("exclude_smallest").get<bool>();
    o.fit.n_boot = s.at("n_boot").get<int>();
    o.fit.level = s.at("level").get<double>();
    o.margin_nu = margin_nu_from(s.at("margin_nu"));
    const auto result = timer.run("replications", [&] { return run_rate_sweep(p, o); });
    write_rate_outputs(result, out);
    return 0;
}

int cmd_theory(const json& c, Artifacts& out, StageTimer& timer, std::ostream& log) {
    const auto reports = timer.run("checks", [&] { return run_theory_suite(c); });
    json arr = json::array();
    bool ok = true;
    for (const auto& r : reports) {
        arr.push_back(to_json(r));
        ok = ok && r.pass;
        log << (r.pass ? "PASS " : "FAIL ") << r.name << "  statistic=" << format_double(r.statistic)
            << " threshold=" << format_double(r.threshold) << "\n";
    }
    out.write("report.json", dump(arr));
    return ok ? 0 : 1;
}

int cmd_ingest(const json& c, Artifacts& out, StageTimer& timer) {
    const auto& e = c.at("env");
    const auto csv = e.at("csv").get<std::string>();
    const auto label = e.at("label").get<std::string>();
    if (csv.empty() || label.empty()) throw Error("ingest needs env.csv and env.label");
    CsvOptions opts{e.at("drop_missing").get<bool>(), e.at("standardize").get<bool>()};
    const auto table = timer.run("ingest", [&] { return load_csv_classification(csv, label, opts); });
    const auto path = out.root() / "table.csv";
    write_table_csv(table, path.string(), label);
    // Registered through the writer so the manifest lists it.
    std::ifstream in(path, std::ios::binary);
    std::ostringstream body;
    body << in.rdbuf();
    in.close();
    out.write("table.csv", body.str());
    json summary = {{"rows", table.rows()},
                    {"features", table.cols()},
                    {"classes", table.num_classes},
                    {"columns", table.column_names},
                    {"class_names", table.class_names}};
    out.write("ingest.json", dump(summary));
    return 0;
}

json input_digests(const json& c) {
    json inputs = json::object();
    auto add = [&](const std::string& p) {
        if (!p.empty()) inputs[p] = file_digest(p);
    };
    for (const char* key : {"data", "model", "policy"}) add(c.at("input").at(key).get<std::string>());
    add(c.at("env").at("csv").get<std::string>());
    add(c.at("policy").at("class_file").get<std::string>());
    return inputs;
}

}  // namespace

int execute_command(const std::string& command, const json& config, const fs::path& out_dir, std::ostream& log) {
    if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end())
        throw Error("unknown command '" + command + "'");
    Artifacts out(out_dir);
    json stages = json::object();
    StageTimer timer(stages);
    int code = 0;
    const json inputs = input_digests(config);
    if (command == "collect") code = cmd_collect(config, out, timer);
    else if (command == "train") code = cmd_train(config, out, timer);
    else if (command == "learn-policy") code = cmd_learn_policy(config, out, timer);
    else if (command == "evaluate") code = cmd_evaluate(config, out, timer);
    else if (command == "bandit-bench") code = cmd_bench(config, out, timer);
    else if (command == "rate-sweep") code = cmd_rate_sweep(config, out, timer);
    else if (command == "theory-check") code = cmd_theory(config, out, timer, log);
    else code = cmd_ingest(config, out, timer);

    json artifacts = json::array();
    for (const auto& rel : out.written())
        artifacts.push_back({{"path", rel},
                             {"bytes", fs::file_size(out.root() / rel)},
                             {"fnv1a64", file_digest(out.root() / rel)}});
    const auto seed = config.at("seed").get<std::uint64_t>();
    json manifest = {{"tool", "iswerm_lab"},
                     {"version", ISWERM_VERSION},
                     {"command", command},
                     {"config", config},
                     {"config_hash", config_hash(config)},
                     {"seeds", {{"master", seed}, {"derivation", "child_seed(master, replication, stage tag)"}}},
                     {"inputs", inputs},
                     {"artifacts", artifacts},
                     {"stage_seconds", stages},
                     {"exit_code", code}};
    std::ofstream mf(out.root() / "manifest.json");
    mf << dump(manifest);
    if (!mf) throw Error("cannot write manifest");
    log << command << ": wrote " << out.written().size() << " files to " << out.root().string() << "\n";
    return code;
}

int replay_manifest(const fs::path& manifest_path, const fs::path& out_dir, std::ostream& log) {
    const json m = read_json_file(manifest_path.string());
    const json config = resolve_config(m.at("config"));
    if (config_hash(config) != m.at("config_hash").get<std::string>())
        throw Error("manifest config hash does not match its config");
    for (auto it = m.at("inputs").begin(); it != m.at("inputs").end(); ++it)
        if (file_digest(it.key()) != it.value().get<std::string>())
            throw Error("input '" + it.key() + "' changed since the recorded run");
    const fs::path recorded = manifest_path.has_parent_path() ? manifest_path.parent_path() : fs::path(".");
    if (fs::exists(out_dir) && fs::equivalent(recorded, out_dir))
        throw Error("replay output directory must differ from the recorded run's directory");
    execute_command(m.at("command").get<std::string>(), config, out_dir, log);
    std::size_t mismatches = 0;
    for (const auto& a : m.at("artifacts")) {
        const auto rel = a.at("path").get<std::string>();
        const auto path = out_dir / rel;
        if (!fs::exists(path) || file_digest(path) != a.at("fnv1a64").get<std::string>()) {
            ++mismatches;
            log << "MISMATCH " << rel << "\n";
        }
    }
    log << "replay: " << m.at("artifacts").size() - mismatches << "/" << m.at("artifacts").size()
        << " artifacts identical\n";
    return mismatches == 0 ? 0 : 1;
}

std::vector<CheckReport> run_theory_suite(const json& config) {
    const auto& th = config.at("theory");
    const auto suite = th.at("suite").get<std::string>();
    const bool all = suite == "all";
    if (!all && suite != "unbiasedness" && suite != "lemma2" && suite != "lemma3" && suite != "supscaling")
        throw Error("unknown theory suite '" + suite + "' (expected unbiasedness|lemma2|lemma3|supscaling|all)");
    const auto seed = config.at("seed").get<std::uint64_t>();
    std::vector<CheckReport> reports;

    if (all || suite == "unbiasedness") {
        const auto env = random_discrete_environment(5, 3, child_seed(seed, 0, "unbiased-env"));
        const int k = env->num_arms();
        const auto n_seq = th.at("unbiasedness_sequences").get<std::size_t>();
        const auto rounds = th.at("unbiasedness_rounds").get<std::size_t>();
        CheckReport agg{"is_unbiasedness", true, 0.0, 1e-12, json::object()};
        CheckReport control{"is_unbiasedness_negative_control", true, 0.0, 1e-12, json::object()};
        control.statistic = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n_seq; ++i) {
            const auto seq = random_logging_sequence(*env, rounds, child_seed(seed, i, "unbiased-seq"));
            const auto f = random_box_functions(*env, 1, 1.0, child_seed(seed, i, "unbiased-f")).front();
            const ReferenceWeight gstar = i % 3 == 0   ? ReferenceWeight::constant_one()
                                          : i % 3 == 1 ? ReferenceWeight::uniform_density()
                                                       : ReferenceWeight::dirac(static_cast<int>(i) % k);
            const LossKind kind = i % 2 == 0 ? LossKind::Squared : LossKind::PolicyValue;
            const auto r = check_is_unbiasedness(*env, seq, f, gstar, kind);
            agg.statistic = std::max(agg.statistic, r.statistic);
            agg.pass = agg.pass && r.pass;
            std::vector<LoggingPolicy> corrupted = seq;
            for (auto& g : corrupted) g *= 1.1;
            const auto bad = check_is_unbiasedness(*env, seq, f, gstar, kind, &corrupted);
            control.statistic = std::min(control.statistic, bad.statistic);
            control.pass = control.pass && !bad.pass;
        }
        agg.details = {{"sequences", n_seq}, {"rounds", rounds}};
        control.details = {{"sequences", n_seq},
                           {"corruption", "propensities used in the weights scaled by 1.1"},
                           {"rule", "passes iff every corrupted run fails, i.e. statistic >= threshold"}};
        reports.push_back(agg);
        reports.push_back(control);
    }

    if (all || suite == "lemma2") {
        const auto n_env = th.at("lemma2_envs").get<std::size_t>();
        const auto n_f = th.at("lemma2_functions").get<std::size_t>();
        for (std::size_t e = 0; e < n_env; ++e) {
            const auto env = random_discrete_environment(5, 3, child_seed(seed, e, "lemma2-env"));
            const double b = two_point_bound(*env);
            const auto fs_box = random_box_functions(*env, n_f, b * b, child_seed(seed, e, "lemma2-f"));
            auto r = check_square_loss_variance_bound(*env, ReferenceWeight::constant_one(), fs_box, env->mu());
            r.name += "_env" + std::to_string(e);
            reports.push_back(r);
        }
        // Per-arm constant functions: a convex class whose projection f1 differs from mu.
        {
            const auto env = random_discrete_environment(5, 3, child_seed(seed, 0, "lemma2-armconst-env"));
            const double b = two_point_bound(*env);
            Rng rng(child_seed(seed, 0, "lemma2-armconst-f"));
            const auto S = static_cast<Index>(env->support_size());
            const Vector c1 = env->probs().transpose() * env->mu();
            const CellFunction f1 = Vector::Ones(S) * c1.transpose();
            std::vector<CellFunction> sample;
            for (std::size_t i = 0; i < n_f; ++i) {
                Vector c(env->num_arms());
                for (Index a = 0; a < c.size(); ++a) c[a] = b * (2.0 * uniform01(rng) - 1.0);
                sample.push_back(Vector::Ones(S) * c.transpose());
            }
            auto r = check_square_loss_variance_bound(*env, ReferenceWeight::uniform_density(), sample, f1);
            r.name += "_arm_constant_class";
            reports.push_back(r);
        }
        reports.push_back(check_lipschitz_square_loss(1.0, th.at("lipschitz_triples").get<std::size_t>(),
                                                      child_seed(seed, 0, "lipschitz")));
    }

    if (all || suite == "lemma3") {
        const auto n_pol = th.at("lemma3_policies").get<std::size_t>();
        const auto cells = th.at("lemma3_cells").get<std::size_t>();
        for (double nu : {1.0, 2.0, kInfiniteNu}) {
            const std::string tag = "lemma3:" + std::to_string(nu);
            const auto env = make_margin_environment(cells, 3, nu, child_seed(seed, 0, tag + "-env"));
            auto policies = random_stochastic_policies(*env, n_pol, child_seed(seed, 0, tag + "-pol"));
            CellFunction optimal = CellFunction::Zero(static_cast<Index>(cells), 3);
            const auto best = env->optimal_arms();
            for (std::size_t x = 0; x < cells; ++x) optimal(static_cast<Index>(x), best[x]) = 1.0;
            policies.insert(policies.begin(), optimal);
            reports.push_back(check_margin_variance_bound(*env, nu, policies));
        }
    }

    if (all || suite == "supscaling") {
        SupScalingConfig s;
        s.env = random_discrete_environment(4, 3, child_seed(seed, 0, "sup-env"));
        s.functions = random_symmetric_class(*s.env, 4, 1.0, child_seed(seed, 0, "sup-class"));
        s.betas = th.at("sup_betas").get<std::vector<double>>();
        s.T_grid = horizon_grid(th.at("sup_T"), "theory.sup_T");
        s.n_reps = th.at("sup_reps").get<int>();
        s.seed = seed;
        s.tolerance = th.at("sup_tolerance").get<double>();
        s.threads = config.at("threads").get<int>();
        s.rate.n_boot = 200;
        auto result = sup_process_scaling(s);
        for (auto& r : result.reports) reports.push_back(std::move(r));
    }
    return reports;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"iswerm_lab: importance-sampling-weighted ERM on adaptively collected bandit data"};
    app.set_version_flag("--version", ISWERM_VERSION);
    app.fallthrough();

    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string out_dir = "out";
    std::string config_path;
    bool explain = false;
    app.add_option("--seed", seed, "master seed");
    app.add_option("--threads", threads, "worker threads (fallback: ISWERM_LAB_THREADS)");
    app.add_option("--out-dir", out_dir, "output directory")->capture_default_str();
    app.add_option("--config", config_path, "JSON config file");
    app.add_flag("--explain-config", explain, "print every config key with its default and exit");
    std::vector<std::string> assignments;
    app.add_option("--set", assignments, "override any config key: --set bench.n_reps=8 (repeatable)");

    // Flags that override config keys.
    std::vector<std::pair<std::string, std::string>> overrides;  // (dotted key, raw text)
    std::optional<std::string> env_spec;
    auto add_override = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
        sub->add_option_function<std::string>(
            flag, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); }, help);
    };
    auto add_env = [&](CLI::App* sub) {
        sub->add_option("--env", env_spec, "environment spec, e.g. linear:d=3,K=3,noise=1,coef_seed=7");
    };

    auto* collect_cmd = app.add_subcommand("collect", "run the epsilon-greedy logger and save the log");
    add_env(collect_cmd);
    add_override(collect_cmd, "--T", "collect.T", "horizon");
    add_override(collect_cmd, "--beta", "collect.beta", "exploration decay");
    add_override(collect_cmd, "--floor", "collect.floor", "exploration floor");
    add_override(collect_cmd, "--greedy", "collect.greedy", "linear | tree");
    add_override(collect_cmd, "--cadence", "collect.cadence", "every_round | doubling");
    std::string collect_out;
    collect_cmd->add_option("--out", collect_out, "also copy data.jsonl to this path");

    auto* train_cmd = app.add_subcommand("train", "fit a weighted regression model on a logged dataset");
    add_override(train_cmd, "--data", "input.data", "logged dataset (JSON Lines)");
    add_override(train_cmd, "--scheme", "train.scheme", "weighting scheme");
    add_override(train_cmd, "--model", "train.model", "wls | ridge | lasso | cart");
    add_override(train_cmd, "--gstar", "train.gstar", "one | uniform | dirac:<arm>");
    add_override(train_cmd, "--cv-folds", "learner.folds", "cross-validation folds");
    std::optional<std::string> lambda_grid;
    train_cmd->add_option("--lambda-grid", lambda_grid, "comma-separated penalty grid for ridge and lasso");

    auto* policy_cmd = app.add_subcommand("learn-policy", "ISWERM policy learning over a policy class");
    add_env(policy_cmd);
    add_override(policy_cmd, "--data", "input.data", "logged dataset (JSON Lines)");
    add_override(policy_cmd, "--scheme", "sweep.scheme", "weighting scheme");
    std::optional<std::string> class_spec;
    policy_cmd->add_option("--class", class_spec, "tree[:<depth>] | finite:<file> | all_tables | product");
    add_override(policy_cmd, "--depth", "policy.depth", "tree depth");
    add_override(policy_cmd, "--class-file", "policy.class_file", "finite class JSON");

    auto* eval_cmd = app.add_subcommand("evaluate", "test MSE / policy value and excess risk of a fitted artifact");
    add_env(eval_cmd);
    add_override(eval_cmd, "--model", "input.model", "model JSON from train");
    add_override(eval_cmd, "--policy", "input.policy", "policy JSON from learn-policy");
    add_override(eval_cmd, "--n-test", "evaluate.n_test", "test rounds");

    auto* bench_cmd = app.add_subcommand("bandit-bench", "all schemes x models, replicated, with 1-SE verdicts");
    add_env(bench_cmd);
    add_override(bench_cmd, "--reps", "bench.n_reps", "replications");
    add_override(bench_cmd, "--beta", "collect.beta", "exploration decay");
    add_override(bench_cmd, "--T", "bench.T", "horizon grid, e.g. [1000,4000]");

    auto* sweep_cmd = app.add_subcommand("rate-sweep", "policy-learning regret exponents across beta");
    add_env(sweep_cmd);
    add_override(sweep_cmd, "--reps", "sweep.n_reps", "replications");
    add_override(sweep_cmd, "--betas", "sweep.betas", "beta grid, e.g. [0,0.3333]");
    add_override(sweep_cmd, "--T", "sweep.T", "horizon grid");

    auto* theory_cmd = app.add_subcommand("theory-check", "exact and Monte Carlo checks of the lemmas");
    add_override(theory_cmd, "--suite", "theory.suite", "unbiasedness | lemma2 | lemma3 | supscaling | all");
    std::string report_out;
    theory_cmd->add_option("--out", report_out, "also copy report.json to this path");

    auto* ingest_cmd = app.add_subcommand("ingest", "load and encode a classification CSV");
    add_override(ingest_cmd, "--data,--csv", "env.csv", "input CSV");
    add_override(ingest_cmd, "--label-col,--label", "env.label", "label column");
    bool keep_missing = false, raw = false;
    ingest_cmd->add_flag("--keep-missing", keep_missing, "impute missing cells instead of dropping rows");
    ingest_cmd->add_flag("--no-standardize", raw, "leave numeric columns unscaled");

    auto* replay_cmd = app.add_subcommand("replay", "re-run a manifest and compare outputs byte-for-byte");
    std::string manifest_path;
    replay_cmd->add_option("manifest", manifest_path, "manifest.json of the recorded run")->required();

    app.require_subcommand(0, 1);

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (explain) {
            out << explain_config();
            return 0;
        }
        if (app.get_subcommands().empty()) {
            err << app.help();
            return 2;
        }
        auto* sub = app.get_subcommands().front();
        if (sub == replay_cmd) return replay_manifest(manifest_path, out_dir, out);

        json config = config_path.empty() ? resolve_config(json::object()) : load_config_file(config_path);
        if (seed) config["seed"] = *seed;
        if (threads) config["threads"] = *threads;
        if (env_spec) {
            const json spec = parse_env_spec(*env_spec);
            json user = {{"env", spec}};
            json merged = resolve_config(user);
            for (auto it = spec.begin(); it != spec.end(); ++it) config["env"][it.key()] = merged["env"][it.key()];
        }
        for (const auto& a : assignments) {
            const auto eq = a.find('=');
            if (eq == std::string::npos || eq == 0) throw Error("--set expects key=value, got '" + a + "'");
            overrides.emplace(overrides.begin(), a.substr(0, eq), a.substr(eq + 1));
        }
        if (lambda_grid) {
            json grid = json::array();
            std::stringstream ss(*lambda_grid);
            for (std::string item; std::getline(ss, item, ',');) {
                try {
                    grid.push_back(std::stod(item));
                } catch (const std::exception&) {
                    throw Error("--lambda-grid: '" + item + "' is not a number");
                }
            }
            overrides.emplace_back("learner.ridge_grid", grid.dump());
            overrides.emplace_back("learner.lasso_grid", grid.dump());
        }
        if (class_spec) {
            const auto colon = class_spec->find(':');
            const std::string kind = class_spec->substr(0, colon);
            const std::string arg = colon == std::string::npos ? "" : class_spec->substr(colon + 1);
            if (kind == "finite") {
                if (arg.empty()) throw Error("--class finite:<file> needs a file");
                overrides.emplace_back("policy.class", "file");
                overrides.emplace_back("policy.class_file", json(arg).dump());
            } else {
                overrides.emplace_back("policy.class", json(kind).dump());
                if (!arg.empty()) {
                    if (kind != "tree") throw Error("only tree classes take an argument (tree:<depth>)");
                    overrides.emplace_back("policy.depth", arg);
                }
            }
        }
        for (const auto& [key, text] : overrides) {
            json value;
            try {
                value = json::parse(text);
            } catch (const json::exception&) {
                value = text;
            }
            set_config_value(config, key, value);
        }
        if (keep_missing) config["env"]["drop_missing"] = false;
        if (raw) config["env"]["standardize"] = false;
        // Input paths are recorded absolute so a manifest replays from any directory.
        for (const char* key : {"data", "model", "policy"}) {
            auto& p = config["input"][key];
            if (!p.get<std::string>().empty()) p = fs::absolute(p.get<std::string>()).lexically_normal().string();
        }
        for (auto* p : {&config["env"]["csv"], &config["policy"]["class_file"]})
            if (!p->get<std::string>().empty()) *p = fs::absolute(p->get<std::string>()).lexically_normal().string();
        config = resolve_config(config);

        const int code = execute_command(sub->get_name(), config, out_dir, out);
        if (sub == collect_cmd && !collect_out.empty())
            fs::copy_file(fs::path(out_dir) / "data.jsonl", collect_out, fs::copy_options::overwrite_existing);
        if (sub == theory_cmd && !report_out.empty()) fs::copy_file(fs::path(out_dir) / "report.json", report_out,
                                                                    fs::copy_options::overwrite_existing);
        return code;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace iswerm
