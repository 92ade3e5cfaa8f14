#pragma once

#include "iswerm/collector.hpp"
#include "iswerm/environment.hpp"
#include "iswerm/model.hpp"
#include "iswerm/policy.hpp"
#include "iswerm/weights.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace iswerm {

/// Worker count: `requested` if positive, else ISWERM_LAB_THREADS, else the
/// hardware concurrency.
int resolve_threads(int requested);

/// Runs fn(0..n-1) on a pool of `threads` workers. If any call throws, the
/// exception of the lowest failing index is rethrown after all workers stop.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

struct Estimate {
    double value = 0.0;
    double se = 0.0;  ///< 0 for exact values
    bool exact = false;
};

/// Fresh test rounds with arms drawn uniformly at random.
struct TestSet {
    std::vector<ContextDraw> draws;
    std::vector<int> arms;
    std::vector<double> outcomes;
    int num_arms = 0;

    std::size_t size() const { return draws.size(); }
};

TestSet draw_test_set(const Environment& env, std::size_t n, std::uint64_t seed);

/// Mean of (y - f(x, a))^2 over the test set, with its sample standard error.
Estimate test_mse(const TestSet& test, const ScoreFn& f);
/// Mean of K * y * f(x, a): the uniform sampler rescaled to g* = 1.
Estimate test_policy_value(const TestSet& test, const ScoreFn& f);

Estimate reference_risk_mc(const ScoreFn& f, const Environment& env, LossKind kind, std::size_t n_test,
                           std::uint64_t seed);

struct ExcessRiskOptions {
    std::size_t mc_samples = 100000;  ///< used when no closed form exists
    std::uint64_t seed = 0;
};

/// R*(f) - inf_f R*(f) against the unrestricted optimum: mu for squared loss,
/// the best arm for policies (then f(x, .) is the action distribution and the
/// comparator is E mu*, which needs g* = 1). Exact on discrete environments,
/// Monte Carlo over contexts otherwise; throws when mu is not known.
Estimate excess_risk(const ScoreFn& f, const Environment& env, const ReferenceWeight& gstar, LossKind kind,
                     const ExcessRiskOptions& options = {});
/// Adds the closed form for interacted linear models on linear environments.
Estimate excess_risk(const RegressionModel& model, const Environment& env, const ReferenceWeight& gstar,
                     const ExcessRiskOptions& options = {});

enum class Metric { TestMse, ExcessRisk };

struct ExperimentConfig {
    EnvironmentPtr env;
    ExplorationSchedule schedule;
    GreedyModelSpec greedy;
    std::vector<WeightScheme> schemes{WeightScheme::ISWERM};
    std::vector<ModelKind> models{ModelKind::Ridge};
    std::vector<std::int64_t> T_grid;
    int n_reps = 1;
    std::uint64_t seed = 0;
    std::size_t T_test = 1000;
    Metric metric = Metric::TestMse;
    LearnerOptions learner;
    ReferenceWeight gstar = ReferenceWeight::constant_one();
    int threads = 0;

    void validate() const;
};

struct ResultRow {
    WeightScheme scheme;
    ModelKind model;
    double beta = 0.0;
    std::int64_t T = 0;
    int rep = 0;
    double loss = 0.0;
    double loss_se = 0.0;  ///< within-replication SE of the test estimate
};

struct AggregateRow {
    WeightScheme scheme;
    ModelKind model;
    double beta = 0.0;
    std::int64_t T = 0;
    double mean = 0.0;
    std::optional<double> se;  ///< across replications; absent when n_reps = 1
    int n = 0;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;  ///< ordered by (rep, T, scheme, model)
    std::vector<AggregateRow> aggregate;  ///< ordered by (T, scheme, model)
};

/// Each replication collects once at the largest horizon (child seed tag
/// "collect") and evaluates every smaller horizon on a prefix of that log.
/// Test rounds use the tag "test" and are shared by all fits of the replication.
ExperimentResult replicate_experiment(const ExperimentConfig& config);

std::vector<AggregateRow> aggregate_rows(const std::vector<ResultRow>& rows);

struct PolicySweepConfig {
    EnvironmentPtr env;
    std::vector<double> betas{0.0};
    double floor_eps = 0.0;
    GreedyModelSpec greedy;
    PolicyClass policy_class;
    WeightScheme scheme = WeightScheme::ISWERM;
    std::vector<std::int64_t> T_grid;
    int n_reps = 1;
    std::uint64_t seed = 0;
    int threads = 0;
    ExcessRiskOptions excess;

    void validate() const;
};

struct RegretRow {
    double beta = 0.0;
    std::int64_t T = 0;
    int rep = 0;
    double regret = 0.0;
};

/// ISWERM policy learning on prefixes of one collection per (beta, rep);
/// regret is the exact (or MC) excess risk of the learned policy.
std::vector<RegretRow> replicate_policy_regret(const PolicySweepConfig& config);

}  // namespace iswerm
