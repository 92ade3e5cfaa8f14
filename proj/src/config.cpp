#include "iswerm/config.hpp"

#include "iswerm/rng.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace iswerm {

using nlohmann::json;

namespace {

json t_grid(int lo_pow, int hi_pow) {
    json a = json::array();
    for (int p = lo_pow; p <= hi_pow; ++p) a.push_back(std::int64_t{1} << p);
    return a;
}

json all_scheme_names() {
    json a = json::array();
    for (auto s : kAllWeightSchemes) a.push_back(scheme_name(s));
    return a;
}

}  // namespace

const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> schema = {
        {"seed", 0, "integer", "master seed; every random stream is derived from it"},
        {"threads", 0, "integer", "worker threads (0: ISWERM_LAB_THREADS, else hardware concurrency)"},

        {"env.kind", "linear", "string", "linear | quadratic | step | discrete | classification"},
        {"env.d", 3, "integer", "context dimension (synthetic kinds)"},
        {"env.K", 3, "integer", "number of arms (synthetic kinds)"},
        {"env.noise", 1.0, "number|array", "outcome noise sd; discrete kind also takes a cells x arms matrix"},
        {"env.coef_seed", 1, "integer", "seed of the synthetic mean-function coefficients"},
        {"env.support", nullptr, "array|null", "discrete: context vectors (default: one-hot, one per cell)"},
        {"env.probs", nullptr, "array|null", "discrete: cell probabilities"},
        {"env.mu", nullptr, "array|null", "discrete: cells x arms mean outcomes (costs)"},
        {"env.csv", "", "string", "classification: path of the CSV table"},
        {"env.label", "", "string", "classification: label column name"},
        {"env.drop_missing", true, "boolean", "classification: drop rows with missing features (else impute)"},
        {"env.standardize", true, "boolean", "classification: z-score numeric feature columns"},

        {"collect.T", 1000, "integer", "horizon of a single collection"},
        {"collect.beta", 1.0 / 3.0, "number", "exploration decay: eps_t = max(min(1, t^-beta), floor)"},
        {"collect.floor", 0.0, "number", "lower bound on eps_t"},
        {"collect.greedy", "linear", "string", "greedy outcome model: linear | tree"},
        {"collect.cadence", "every_round", "string", "greedy refit cadence: every_round | doubling"},
        {"collect.tree_max_depth", 4, "integer", "tree greedy model depth limit (-1: none)"},
        {"collect.tree_min_leaf", 0.0, "number", "tree greedy model minimum leaf weight"},

        {"input.data", "", "string", "logged dataset (JSON Lines) for train / learn-policy"},
        {"input.model", "", "string", "fitted model JSON for evaluate"},
        {"input.policy", "", "string", "learned policy JSON for evaluate"},

        {"train.scheme", "iswerm", "string",
         "unweighted | iswerm | isfloor | sqrtis | sqrtisfloor | mrdr | mrdrfloor"},
        {"train.model", "ridge", "string", "wls | ridge | lasso | cart"},
        {"train.gstar", "one", "string", "reference weight g*: one | uniform | dirac:<arm>"},

        {"learner.folds", 4, "integer", "cross-validation folds for ridge / lasso"},
        {"learner.ridge_grid", json::array({0.1, 1.0, 10.0}), "array", "ridge penalty grid"},
        {"learner.lasso_grid", json::array(), "array", "lasso penalty grid (empty: geometric path from lambda_max)"},
        {"learner.lasso_grid_size", 20, "integer", "length of the default lasso path"},
        {"learner.lasso_tol", 1e-10, "number", "lasso coordinate-descent tolerance"},
        {"learner.lasso_max_iter", 100000, "integer", "lasso sweep limit"},
        {"learner.cart_max_depth", 6, "integer", "CART depth limit (-1: none)"},
        {"learner.cart_min_leaf", 0.0, "number", "CART minimum leaf weight"},
        {"learner.wls_lambda", 0.0, "number", "ridge penalty of the plain weighted least-squares learner"},

        {"policy.class", "tree", "string", "tree | all_tables | product | file"},
        {"policy.depth", 1, "integer", "tree class depth"},
        {"policy.quantiles", 16, "integer", "tree class thresholds per feature"},
        {"policy.free", nullptr, "array|null",
         "product class: per-cell booleans; fixed cells take the optimal arm"},
        {"policy.class_file", "", "string", "file class: JSON with support and policies tables"},

        {"evaluate.n_test", 100000, "integer", "fresh uniform-arm test rounds"},
        {"evaluate.mc_samples", 100000, "integer", "contexts for Monte Carlo excess risk"},

        {"bench.schemes", all_scheme_names(), "array", "weighting schemes"},
        {"bench.models", json::array({"ridge", "lasso", "cart"}), "array", "model kinds"},
        {"bench.T", json::array({1000}), "array", "horizons (strictly increasing)"},
        {"bench.n_reps", 2, "integer", "replications"},
        {"bench.T_test", 1000, "integer", "test rounds per replication"},
        {"bench.metric", "test_mse", "string", "test_mse | excess_risk"},

        {"sweep.betas", json::array({0.0, 1.0 / 3.0}), "array", "exploration decay grid"},
        {"sweep.T", t_grid(9, 15), "array", "horizons (strictly increasing)"},
        {"sweep.n_reps", 200, "integer", "replications per (beta, T)"},
        {"sweep.scheme", "iswerm", "string", "weighting scheme of the policy learner"},
        {"sweep.exclude_smallest", true, "boolean", "leave the smallest horizon out of the rate fit"},
        {"sweep.n_boot", 1000, "integer", "bootstrap resamples for the slope interval"},
        {"sweep.level", 0.95, "number", "bootstrap interval level"},
        {"sweep.margin_nu", nullptr, "number|string|null",
         "margin exponent (number or \"inf\"); enables the fast-rate comparison"},

        {"theory.suite", "all", "string", "unbiasedness | lemma2 | lemma3 | supscaling | all"},
        {"theory.unbiasedness_sequences", 20, "integer", "random logging sequences"},
        {"theory.unbiasedness_rounds", 50, "integer", "rounds per logging sequence"},
        {"theory.lemma2_envs", 3, "integer", "random discrete environments"},
        {"theory.lemma2_functions", 1000, "integer", "random functions per environment"},
        {"theory.lipschitz_triples", 100000, "integer", "random (y, f, f') triples"},
        {"theory.lemma3_policies", 500, "integer", "random stochastic policies per environment"},
        {"theory.lemma3_cells", 40, "integer", "cells of each margin environment"},
        {"theory.sup_betas", json::array({0.0, 1.0 / 3.0}), "array", "exploration decay grid"},
        {"theory.sup_T", t_grid(8, 14), "array", "horizons"},
        {"theory.sup_reps", 500, "integer", "replications per horizon"},
        {"theory.sup_tolerance", 0.1, "number", "allowed distance of the slope from -(1-beta)/2"},
    };
    return schema;
}

namespace {

json::json_pointer pointer_of(const std::string& path) {
    std::string p = "/";
    for (char c : path) p += c == '.' ? '/' : c;
    return json::json_pointer(p);
}

bool type_matches(const json& v, const std::string& types) {
    std::stringstream ss(types);
    std::string t;
    while (std::getline(ss, t, '|')) {
        if (t == "number" && v.is_number()) return true;
        if (t == "integer" && (v.is_number_integer() || (v.is_number_float() && std::floor(v.get<double>()) ==
                                                                                    v.get<double>())))
            return true;
        if (t == "string" && v.is_string()) return true;
        if (t == "boolean" && v.is_boolean()) return true;
        if (t == "array" && v.is_array()) return true;
        if (t == "null" && v.is_null()) return true;
    }
    return false;
}

const ConfigKey* find_key(const std::string& path) {
    for (const auto& k : config_schema())
        if (k.path == path) return &k;
    return nullptr;
}

json normalize(const json& v, const ConfigKey& key) {
    if (key.types == "integer" && v.is_number_float()) return static_cast<std::int64_t>(v.get<double>());
    return v;
}

void merge_into(json& target, const json& user, const std::string& prefix) {
    if (!user.is_object()) throw Error("config section '" + (prefix.empty() ? "<root>" : prefix) + "' must be an object");
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        const ConfigKey* key = find_key(path);
        if (key == nullptr) {
            const bool is_section = target.contains(pointer_of(path)) && target.at(pointer_of(path)).is_object();
            if (!is_section) throw Error("unknown config key '" + path + "'");
            merge_into(target, it.value(), path);
            continue;
        }
        if (!type_matches(it.value(), key->types))
            throw Error("config key '" + path + "' must be " + key->types + ", got " + it.value().dump());
        target[pointer_of(path)] = normalize(it.value(), *key);
    }
}

}  // namespace

json default_config() {
    json j = json::object();
    for (const auto& k : config_schema()) j[pointer_of(k.path)] = k.default_value;
    return j;
}

std::string explain_config() {
    std::ostringstream os;
    for (const auto& k : config_schema())
        os << k.path << "  (" << k.types << ", default " << k.default_value.dump() << ")\n    " << k.doc << "\n";
    return os.str();
}

json resolve_config(const json& user) {
    json out = default_config();
    if (!user.is_null()) merge_into(out, user, "");
    return out;
}

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file '" + path + "'");
    try {
        return resolve_config(json::parse(in, nullptr, true, true));
    } catch (const json::exception& e) {
        throw Error("config file '" + path + "': " + e.what());
    }
}

void set_config_value(json& config, const std::string& path, const json& value) {
    const ConfigKey* key = find_key(path);
    if (key == nullptr) throw Error("unknown config key '" + path + "'");
    if (!type_matches(value, key->types))
        throw Error("config key '" + path + "' must be " + key->types + ", got " + value.dump());
    config[pointer_of(path)] = normalize(value, *key);
}

std::string config_hash(const json& config) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(config.dump())));
    return buf;
}

json parse_env_spec(const std::string& spec) {
    json env = json::object();
    const auto colon = spec.find(':');
    env["kind"] = spec.substr(0, colon);
    if (colon == std::string::npos) return env;
    // Split on commas outside brackets so matrices like mu=[[0,1],[1,0]] stay whole.
    std::vector<std::string> items(1);
    int depth = 0;
    for (char c : spec.substr(colon + 1)) {
        if (c == '[') ++depth;
        if (c == ']') --depth;
        if (c == ',' && depth == 0) {
            items.emplace_back();
            continue;
        }
        items.back() += c;
    }
    if (depth != 0) throw Error("env spec has unbalanced brackets");
    for (const auto& item : items) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw Error("env spec item '" + item + "' is not key=value");
        const std::string key = item.substr(0, eq);
        const std::string text = item.substr(eq + 1);
        json value;
        try {
            value = json::parse(text);
        } catch (const json::exception&) {
            value = text;  // bare strings such as file paths
        }
        env[key] = value;
    }
    return env;
}

namespace {

Matrix matrix_from(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty() || !j.front().is_array()) throw Error(what + " must be a non-empty matrix");
    const auto rows = static_cast<Index>(j.size());
    const auto cols = static_cast<Index>(j.front().size());
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        if (static_cast<Index>(j[static_cast<std::size_t>(r)].size()) != cols) throw Error(what + " rows differ in length");
        for (Index c = 0; c < cols; ++c) m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

}  // namespace

EnvironmentPtr make_environment(const json& e) {
    const auto kind = e.at("kind").get<std::string>();
    const int d = e.at("d").get<int>();
    const int k = e.at("K").get<int>();
    const auto seed = e.at("coef_seed").get<std::uint64_t>();
    auto noise_scalar = [&] {
        if (!e.at("noise").is_number()) throw Error("env.noise must be a number for kind " + kind);
        return e.at("noise").get<double>();
    };
    if (kind == "linear") return make_synthetic_linear(d, k, seed, noise_scalar());
    if (kind == "quadratic") return make_synthetic_quadratic(d, k, seed, noise_scalar());
    if (kind == "step") return make_synthetic_step(d, k, seed, noise_scalar());
    if (kind == "discrete") {
        if (e.at("mu").is_null() || e.at("probs").is_null()) throw Error("discrete env needs env.mu and env.probs");
        const Matrix mu = matrix_from(e.at("mu"), "env.mu");
        const auto pv = e.at("probs").get<std::vector<double>>();
        const Vector probs = Eigen::Map<const Vector>(pv.data(), static_cast<Index>(pv.size()));
        std::vector<Vector> support;
        if (e.at("support").is_null()) {
            support = one_hot_support(pv.size());
        } else {
            for (const auto& row : e.at("support")) {
                const auto v = row.get<std::vector<double>>();
                support.emplace_back(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
            }
        }
        if (e.at("noise").is_array())
            return make_discrete(std::move(support), probs, mu, matrix_from(e.at("noise"), "env.noise"));
        return make_discrete(std::move(support), probs, mu, noise_scalar());
    }
    if (kind == "classification") {
        if (e.at("csv").get<std::string>().empty() || e.at("label").get<std::string>().empty())
            throw Error("classification env needs env.csv and env.label");
        CsvOptions opts{e.at("drop_missing").get<bool>(), e.at("standardize").get<bool>()};
        return make_classification_env(load_csv_classification(e.at("csv"), e.at("label"), opts));
    }
    throw Error("unknown env kind '" + kind + "' (expected linear|quadratic|step|discrete|classification)");
}

ExplorationSchedule schedule_from(const json& c) {
    ExplorationSchedule s{c.at("beta").get<double>(), c.at("floor").get<double>()};
    s.validate();
    return s;
}

GreedyModelSpec greedy_from(const json& c) {
    GreedyModelSpec g;
    g.learner = GreedyModelSpec::parse_learner(c.at("greedy"));
    g.cadence = GreedyModelSpec::parse_cadence(c.at("cadence"));
    g.tree.max_depth = c.at("tree_max_depth").get<int>();
    g.tree.min_leaf_weight = c.at("tree_min_leaf").get<double>();
    return g;
}

LearnerOptions learner_from(const json& l) {
    LearnerOptions o;
    o.cv_folds = l.at("folds").get<int>();
    o.ridge_grid = l.at("ridge_grid").get<std::vector<double>>();
    o.lasso_grid = l.at("lasso_grid").get<std::vector<double>>();
    o.lasso_grid_size = l.at("lasso_grid_size").get<int>();
    o.lasso.tol = l.at("lasso_tol").get<double>();
    o.lasso.max_iter = l.at("lasso_max_iter").get<int>();
    o.cart.max_depth = l.at("cart_max_depth").get<int>();
    o.cart.min_leaf_weight = l.at("cart_min_leaf").get<double>();
    o.wls_lambda = l.at("wls_lambda").get<double>();
    if (o.cv_folds < 2) throw Error("learner.folds must be >= 2");
    if (o.ridge_grid.empty()) throw Error("learner.ridge_grid is empty");
    return o;
}

PolicyClass policy_class_from(const json& p, const Environment* env) {
    const auto kind = p.at("class").get<std::string>();
    if (kind == "tree") {
        TreePolicyClass c{p.at("depth").get<int>(), p.at("quantiles").get<int>()};
        if (c.depth < 0 || c.quantiles < 1) throw Error("policy.depth must be >= 0 and policy.quantiles >= 1");
        return c;
    }
    if (kind == "file") {
        const auto path = p.at("class_file").get<std::string>();
        std::ifstream in(path);
        if (!in) throw Error("cannot open policy class file '" + path + "'");
        return finite_class_from_json(json::parse(in));
    }
    const auto* discrete = env ? env->as_discrete() : nullptr;
    if (discrete == nullptr) throw Error("policy class '" + kind + "' needs a discrete environment");
    if (kind == "all_tables") return FinitePolicyClass::all_tables(discrete->support(), discrete->num_arms());
    if (kind == "product") {
        if (p.at("free").is_null()) throw Error("product policy class needs policy.free");
        const auto free = p.at("free").get<std::vector<bool>>();
        return FinitePolicyClass::product_class(discrete->support(), discrete->num_arms(), discrete->optimal_arms(),
                                                free);
    }
    throw Error("unknown policy class '" + kind + "' (expected tree|all_tables|product|file)");
}

std::vector<std::int64_t> horizon_grid(const json& array, const std::string& what) {
    std::vector<std::int64_t> grid;
    for (const auto& v : array) {
        if (!v.is_number() || v.get<double>() != std::floor(v.get<double>()))
            throw Error(what + " entries must be integers");
        grid.push_back(v.get<std::int64_t>());
    }
    if (grid.empty()) throw Error(what + " is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] < 1) throw Error(what + " entries must be positive");
        if (i > 0 && grid[i] <= grid[i - 1]) throw Error(what + " must be strictly increasing");
    }
    return grid;
}

}  // namespace iswerm
