#include "iswerm/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>

namespace iswerm {

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("ISWERM_LAB_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
        throw Error(std::string("ISWERM_LAB_THREADS must be a positive integer, got '") + env + "'");
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex mu;
    std::size_t failed_index = std::numeric_limits<std::size_t>::max();
    std::exception_ptr failure;

    auto work = [&] {
        for (;;) {
            if (failed.load()) return;
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (i < failed_index) {
                    failed_index = i;
                    failure = std::current_exception();
                }
                failed.store(true);
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
}

namespace {

Estimate mean_and_se(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double var = v.size() > 1 ? ss / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n), false};
}

}  // namespace

TestSet draw_test_set(const Environment& env, std::size_t n, std::uint64_t seed) {
    if (n < 2) throw Error("test set needs at least 2 rounds");
    Rng rng(seed);
    TestSet test;
    test.num_arms = env.num_arms();
    test.draws.reserve(n);
    test.arms.reserve(n);
    test.outcomes.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto draw = env.sample_context(rng);
        const int a = uniform_arm(rng, env.num_arms());
        test.outcomes.push_back(env.sample_outcome(draw, a, rng));
        test.arms.push_back(a);
        test.draws.push_back(std::move(draw));
    }
    return test;
}

Estimate test_mse(const TestSet& test, const ScoreFn& f) {
    std::vector<double> v(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        const double r = test.outcomes[i] - f(test.draws[i], test.arms[i]);
        v[i] = r * r;
    }
    return mean_and_se(v);
}

Estimate test_policy_value(const TestSet& test, const ScoreFn& f) {
    std::vector<double> v(test.size());
    for (std::size_t i = 0; i < test.size(); ++i)
        v[i] = test.num_arms * test.outcomes[i] * f(test.draws[i], test.arms[i]);
    return mean_and_se(v);
}

Estimate reference_risk_mc(const ScoreFn& f, const Environment& env, LossKind kind, std::size_t n_test,
                           std::uint64_t seed) {
    const auto test = draw_test_set(env, n_test, seed);
    return kind == LossKind::Squared ? test_mse(test, f) : test_policy_value(test, f);
}

namespace {

// Per-context excess: sum_a g*(a)(mu - f)^2, or sum_a f c mu - min_a c mu.
double context_excess(const Environment& env, const ContextDraw& draw, const ScoreFn& f,
                      const ReferenceWeight& gstar, LossKind kind) {
    const int k = env.num_arms();
    if (kind == LossKind::Squared) {
        double s = 0.0;
        for (int a = 0; a < k; ++a) {
            const double g = gstar(a, k);
            if (g == 0.0) continue;
            const double r = env.mean_outcome(draw, a) - f(draw, a);
            s += g * r * r;
        }
        return s;
    }
    const double c = env.cost_sign();
    double value = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < k; ++a) {
        const double m = c * env.mean_outcome(draw, a);
        value += f(draw, a) * m;
        best = std::min(best, m);
    }
    return value - best;
}

}  // namespace

Estimate excess_risk(const ScoreFn& f, const Environment& env, const ReferenceWeight& gstar, LossKind kind,
                     const ExcessRiskOptions& options) {
    gstar.validate(env.num_arms());
    if (kind == LossKind::PolicyValue && gstar.kind() != ReferenceWeight::Kind::ConstantOne)
        throw Error("policy regret is defined against E mu* and needs g* = 1");
    if (const auto* discrete = env.as_discrete()) {
        double total = 0.0;
        for (std::size_t i = 0; i < discrete->support_size(); ++i)
            total += discrete->probs()[static_cast<Index>(i)] *
                     context_excess(env, discrete->draw_at(i), f, gstar, kind);
        return {total, 0.0, true};
    }
    if (!env.mean_known()) throw Error("excess risk needs a known mean outcome function (" + env.describe() + ")");
    if (options.mc_samples < 2) throw Error("Monte Carlo excess risk needs at least 2 samples");
    Rng rng(options.seed);
    std::vector<double> v(options.mc_samples);
    for (auto& x : v) x = context_excess(env, env.sample_context(rng), f, gstar, kind);
    return mean_and_se(v);
}

Estimate excess_risk(const RegressionModel& model, const Environment& env, const ReferenceWeight& gstar,
                     const ExcessRiskOptions& options) {
    const auto* lin_env = env.as_linear();
    const auto* lin = std::get_if<LinearModel>(&model);
    if (lin_env != nullptr && lin != nullptr && lin->feature_map.mode == FeatureMap::Mode::LinearInteracted &&
        lin->feature_map.context_dim == env.context_dim() && lin->feature_map.num_arms == env.num_arms()) {
        gstar.validate(env.num_arms());
        const Index p = env.context_dim() + 1;
        const Matrix S = lin_env->design_second_moment();
        const Vector base = lin->coefficients.head(p);
        double total = 0.0;
        for (int a = 0; a < env.num_arms(); ++a) {
            const double g = gstar(a, env.num_arms());
            if (g == 0.0) continue;
            const Vector delta = base + lin->coefficients.segment(p * (a + 1), p) -
                                 lin_env->theta().row(a).transpose();
            total += g * delta.dot(S * delta);
        }
        return {total, 0.0, true};
    }
    return excess_risk(as_score(model), env, gstar, LossKind::Squared, options);
}

namespace {

void check_grid(const std::vector<std::int64_t>& grid) {
    if (grid.empty()) throw Error("T grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] < 1) throw Error("T grid entries must be positive");
        if (i > 0 && grid[i] <= grid[i - 1]) throw Error("T grid must be strictly increasing");
    }
}

}  // namespace

void ExperimentConfig::validate() const {
    if (!env) throw Error("experiment has no environment");
    schedule.validate();
    check_grid(T_grid);
    if (T_grid.front() < env->num_arms()) throw Error("every horizon must be at least the number of arms");
    if (n_reps < 1) throw Error("n_reps must be >= 1");
    if (schemes.empty()) throw Error("no weighting schemes selected");
    if (models.empty()) throw Error("no model kinds selected");
    if (metric == Metric::TestMse && T_test < 2) throw Error("T_test must be >= 2");
    gstar.validate(env->num_arms());
}

std::vector<AggregateRow> aggregate_rows(const std::vector<ResultRow>& rows) {
    using Key = std::tuple<std::int64_t, int, int, double>;
    std::map<Key, std::vector<double>> groups;
    for (const auto& r : rows)
        groups[{r.T, static_cast<int>(r.scheme), static_cast<int>(r.model), r.beta}].push_back(r.loss);
    std::vector<AggregateRow> out;
    out.reserve(groups.size());
    for (const auto& [key, losses] : groups) {
        AggregateRow a;
        a.T = std::get<0>(key);
        a.scheme = static_cast<WeightScheme>(std::get<1>(key));
        a.model = static_cast<ModelKind>(std::get<2>(key));
        a.beta = std::get<3>(key);
        a.n = static_cast<int>(losses.size());
        const auto est = mean_and_se(losses);
        a.mean = est.value;
        if (a.n > 1) a.se = est.se;
        out.push_back(a);
    }
    return out;
}

ExperimentResult replicate_experiment(const ExperimentConfig& config) {
    config.validate();
    const std::size_t per_rep = config.T_grid.size() * config.schemes.size() * config.models.size();
    ExperimentResult result;
    result.rows.resize(per_rep * static_cast<std::size_t>(config.n_reps));

    parallel_for(static_cast<std::size_t>(config.n_reps), resolve_threads(config.threads), [&](std::size_t r) {
        const auto rep = static_cast<std::uint64_t>(r);
        try {
            const auto full = collect(*config.env, config.schedule, config.greedy, config.T_grid.back(),
                                      child_seed(config.seed, rep, "collect"));
            std::optional<TestSet> test;
            if (config.metric == Metric::TestMse)
                test = draw_test_set(*config.env, config.T_test, child_seed(config.seed, rep, "test"));
            WeightOptions wopts{config.gstar};
            std::size_t slot = r * per_rep;
            for (const auto T : config.T_grid) {
                const auto ds = full.prefix(static_cast<std::size_t>(T));
                for (const auto scheme : config.schemes) {
                    const Vector w = compute_weights(scheme, ds, config.schedule, wopts);
                    for (const auto kind : config.models) {
                        const auto fit = fit_regression(kind, ds, w, config.learner);
                        ResultRow row{scheme, kind, config.schedule.beta, T, static_cast<int>(r), 0.0, 0.0};
                        ExcessRiskOptions eopts;
                        eopts.seed = child_seed(config.seed, rep, "excess");
                        const Estimate e = test ? test_mse(*test, as_score(fit.model))
                                                : excess_risk(fit.model, *config.env, config.gstar, eopts);
                        row.loss = e.value;
                        row.loss_se = e.se;
                        result.rows[slot++] = row;
                    }
                }
            }
        } catch (const std::exception& e) {
            throw Error("replication " + std::to_string(r) + ": " + e.what());
        }
    });
    result.aggregate = aggregate_rows(result.rows);
    return result;
}

void PolicySweepConfig::validate() const {
    if (!env) throw Error("policy sweep has no environment");
    if (betas.empty()) throw Error("beta grid is empty");
    for (double b : betas) ExplorationSchedule{b, floor_eps}.validate();
    check_grid(T_grid);
    if (T_grid.front() < env->num_arms()) throw Error("every horizon must be at least the number of arms");
    if (n_reps < 1) throw Error("n_reps must be >= 1");
}

std::vector<RegretRow> replicate_policy_regret(const PolicySweepConfig& config) {
    config.validate();
    const std::size_t nb = config.betas.size();
    const std::size_t nt = config.T_grid.size();
    const std::size_t jobs = nb * static_cast<std::size_t>(config.n_reps);
    std::vector<RegretRow> rows(jobs * nt);
    PolicyLearnOptions popts{config.env->cost_sign()};

    parallel_for(jobs, resolve_threads(config.threads), [&](std::size_t job) {
        const std::size_t b = job / static_cast<std::size_t>(config.n_reps);
        const auto r = static_cast<int>(job % static_cast<std::size_t>(config.n_reps));
        const double beta = config.betas[b];
        try {
            const ExplorationSchedule schedule{beta, config.floor_eps};
            const std::string tag = "collect:beta=" + std::to_string(beta);
            const auto full = collect(*config.env, schedule, config.greedy, config.T_grid.back(),
                                      child_seed(config.seed, static_cast<std::uint64_t>(r), tag));
            for (std::size_t i = 0; i < nt; ++i) {
                const auto ds = full.prefix(static_cast<std::size_t>(config.T_grid[i]));
                const Vector w = compute_weights(config.scheme, ds, schedule);
                const auto fit = fit_policy_iswerm(ds, w, config.policy_class, popts);
                const auto e = excess_risk(as_score(fit.policy), *config.env, ReferenceWeight::constant_one(),
                                           LossKind::PolicyValue, config.excess);
                rows[job * nt + i] = {beta, config.T_grid[i], r, e.value};
            }
        } catch (const std::exception& e) {
            throw Error("beta " + std::to_string(beta) + " replication " + std::to_string(r) + ": " + e.what());
        }
    });
    return rows;
}

}  // namespace iswerm
