#pragma once

#include "iswerm/collector.hpp"
#include "iswerm/environment.hpp"
#include "iswerm/rate_fit.hpp"

#include <json.hpp>

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace iswerm {

struct CheckReport {
    std::string name;
    bool pass = false;
    double statistic = 0.0;
    double threshold = 0.0;
    nlohmann::json details = nlohmann::json::object();
};

nlohmann::json to_json(const CheckReport& report);

/// A function on a discrete environment: one value per (support cell, arm).
using CellFunction = Matrix;

/// f(x, a) read off the cell of the draw.
ScoreFn cell_score(const CellFunction& f);

/// Random testbed on one-hot contexts: mu ~ U[-1, 1], noise sd ~ U[0.1, 0.6]
/// per cell and arm, cell probabilities from a flat Dirichlet draw.
std::shared_ptr<DiscreteEnvironment> random_discrete_environment(std::size_t cells, int num_arms,
                                                                 std::uint64_t seed);

/// Outcomes on discrete environments are treated as the two-point law
/// mu +- sigma (same mean and variance as the Gaussian sampler), so that
/// |Y| <= max(|mu| + sigma) and every second moment below is exact.
double two_point_bound(const DiscreteEnvironment& env);

// ---------------------------------------------------------------------------
// Importance-sampling unbiasedness

/// Per round, an S x K matrix of action probabilities (rows sum to one).
using LoggingPolicy = Matrix;

/// Random logging sequence: each round mixes a random greedy arm per cell
/// with uniform exploration at a random rate in [0.05, 1].
std::vector<LoggingPolicy> random_logging_sequence(const DiscreteEnvironment& env, std::size_t T,
                                                   std::uint64_t seed);

/// For each round compares sum_x p sum_a g_t (g*/q_t) E l(f) with P_{g*} l(f),
/// where q_t are the propensities used in the weight (defaults to g_t).
/// Passes iff the largest difference is below 1e-12.
CheckReport check_is_unbiasedness(const DiscreteEnvironment& env, const std::vector<LoggingPolicy>& logging,
                                  const CellFunction& f, const ReferenceWeight& gstar, LossKind kind,
                                  const std::vector<LoggingPolicy>* weight_propensities = nullptr);

// ---------------------------------------------------------------------------
// Square-loss variance bound and Lipschitz property

/// Uniform draws from the box [-sqrt(M), sqrt(M)]^{S x K}.
std::vector<CellFunction> random_box_functions(const DiscreteEnvironment& env, std::size_t n, double M,
                                               std::uint64_t seed);

/// ||l(f) - l(f1)||_{2,g*} <= 4 sqrt(M) (R*(f) - R*(f1))^{1/2} for every f in
/// the sample. Throws if some sampled f has lower exact risk than f1 or if M
/// is below the outcome bound.
CheckReport check_square_loss_variance_bound(const DiscreteEnvironment& env, const ReferenceWeight& gstar,
                                             const std::vector<CellFunction>& sample, const CellFunction& f1,
                                             std::optional<double> M = std::nullopt);

/// |(y - f)^2 - (y - f')^2| <= 4 sqrt(M) |f - f'| on uniform triples in
/// [-sqrt(M), sqrt(M)]^3. Also counts violations of the constant sqrt(M).
CheckReport check_lipschitz_square_loss(double M, std::size_t n_triples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Margin condition

inline constexpr double kInfiniteNu = std::numeric_limits<double>::infinity();

/// Gap of each cell: second-best minus best mean (costs). Throws unless the
/// argmin is unique in every cell.
Vector arm_gaps(const DiscreteEnvironment& env);

/// Smallest kappa with P(gap <= u) <= (kappa u / M)^nu for all u >= 0. For
/// nu = infinity the condition is gap >= M / kappa almost surely.
double margin_kappa(const DiscreteEnvironment& env, double nu, double M);

/// Discrete environment whose gap distribution has P(gap <= u) growing like
/// u^nu (nu = infinity: gaps bounded away from zero).
std::shared_ptr<DiscreteEnvironment> make_margin_environment(std::size_t cells, int num_arms, double nu,
                                                             std::uint64_t seed);

/// Random action distributions, one row per cell.
std::vector<CellFunction> random_stochastic_policies(const DiscreteEnvironment& env, std::size_t n,
                                                     std::uint64_t seed);

/// For every policy computes P(A != A*) and E[mu(X,A) - mu(X,A*)] exactly and
/// checks the explicit chain (Markov form for nu = infinity) together with
/// ||l(f) - l(f1)||^2_{2,g*=1} <= 2 M^2 P(A != A*). Kappa defaults to the
/// smallest valid value.
CheckReport check_margin_variance_bound(const DiscreteEnvironment& env, double nu,
                                        const std::vector<CellFunction>& policies,
                                        std::optional<double> kappa = std::nullopt);

// ---------------------------------------------------------------------------
// Scaling of the supremum of the weighted martingale process

struct SupScalingConfig {
    std::shared_ptr<const DiscreteEnvironment> env;
    std::vector<CellFunction> functions;
    std::vector<double> betas{0.0, 1.0 / 3.0};
    std::vector<std::int64_t> T_grid;
    int n_reps = 500;
    std::uint64_t seed = 0;
    GreedyModelSpec greedy;
    ReferenceWeight gstar = ReferenceWeight::constant_one();
    double tolerance = 0.1;
    int threads = 0;
    RateFitOptions rate;
    bool exclude_smallest = true;  ///< leave the first horizon out of the fit (warm-start transient)
};

struct SupScalingResult {
    std::vector<double> betas;
    std::vector<RateFit> fits;
    std::vector<std::vector<double>> mean_sup;  ///< [beta][T]
    std::vector<CheckReport> reports;           ///< one per beta
};

/// Simulates sup_f (1/T) sum_t (w_t f(X_t, A_t) - P_{g*} f) on prefixes of one
/// epsilon-greedy log per (beta, rep) and fits log E[sup] against log T.
SupScalingResult sup_process_scaling(const SupScalingConfig& config);

/// Random tables with values in [-B, B] plus their negations (2 * n_pairs functions).
std::vector<CellFunction> random_symmetric_class(const DiscreteEnvironment& env, std::size_t n_pairs, double B,
                                                 std::uint64_t seed);

}  // namespace iswerm
