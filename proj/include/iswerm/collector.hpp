#pragma once

#include "iswerm/cart.hpp"
#include "iswerm/dataset.hpp"
#include "iswerm/environment.hpp"

#include <vector>

namespace iswerm {

/// eps_t = max(min(1, t^-beta), floor_eps)
struct ExplorationSchedule {
    double beta = 0.0;
    double floor_eps = 0.0;

    void validate() const;
};

double epsilon_at(const ExplorationSchedule& schedule, std::int64_t t);

/// Epsilon-greedy action distribution: eps/K everywhere, plus 1-eps on the greedy arm.
Vector greedy_propensities(int greedy_arm, double epsilon, int num_arms);

struct GreedyModelSpec {
    enum class Learner { Linear, Tree };
    enum class Cadence { EveryRound, Doubling };

    Learner learner = Learner::Linear;
    Cadence cadence = Cadence::EveryRound;
    CartOptions tree;  ///< used by the tree learner

    static Learner parse_learner(const std::string& s);
    static Cadence parse_cadence(const std::string& s);
};

/// Normal equations smaller than this many samples get the ridge jitter.
inline constexpr double kGreedyRidgeJitter = 1e-8;

struct CollectionTrace {
    LoggedDataset data;
    std::vector<int> greedy_arm;  ///< -1 for warm-start rounds
};

/// Runs the adaptive epsilon-greedy loop. Arms are drawn uniformly (logged
/// propensity 1/K, eps 1) until every arm has been pulled; if that takes
/// longer than T rounds the log is extended until it has. Afterwards the
/// greedy arm is argmin_a sign * mu_hat(x, a) with mu_hat refit per cadence on
/// all prior data and ties broken toward the lower arm.
CollectionTrace collect_with_trace(const Environment& env, const ExplorationSchedule& schedule,
                                   const GreedyModelSpec& greedy, std::int64_t T, std::uint64_t seed);
LoggedDataset collect(const Environment& env, const ExplorationSchedule& schedule, const GreedyModelSpec& greedy,
                      std::int64_t T, std::uint64_t seed);

struct ExplorationBound {
    std::vector<double> gamma;  ///< gamma_t for t = 1..T
    double gamma_avg = 0.0;
    double gamma_max = 0.0;
};

/// gamma_t = sup_a g*(a|.) / (eps_t / K).
ExplorationBound exploration_bound(const ExplorationSchedule& schedule, int num_arms, std::int64_t T,
                                   const ReferenceWeight& gstar);

}  // namespace iswerm
