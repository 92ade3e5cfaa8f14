#include "iswerm/collector.hpp"

#include "iswerm/features.hpp"

#include <cmath>

namespace iswerm {

void ExplorationSchedule::validate() const {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error("exploration beta must be finite and >= 0");
    if (!(floor_eps >= 0.0 && floor_eps <= 1.0)) throw Error("exploration floor must lie in [0, 1]");
}

double epsilon_at(const ExplorationSchedule& schedule, std::int64_t t) {
    if (t < 1) throw Error("round index must be >= 1");
    const double decayed = std::min(1.0, std::pow(static_cast<double>(t), -schedule.beta));
    return std::max(decayed, schedule.floor_eps);
}

Vector greedy_propensities(int greedy_arm, double epsilon, int num_arms) {
    if (num_arms < 2) throw Error("need at least two arms");
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw Error("epsilon must lie in (0, 1]");
    if (greedy_arm < 0 || greedy_arm >= num_arms) throw Error("greedy arm out of range");
    Vector g = Vector::Constant(num_arms, epsilon / num_arms);
    g[greedy_arm] = 1.0 - epsilon + epsilon / num_arms;
    return g;
}

GreedyModelSpec::Learner GreedyModelSpec::parse_learner(const std::string& s) {
    if (s == "linear") return Learner::Linear;
    if (s == "tree") return Learner::Tree;
    throw Error("unknown greedy learner '" + s + "' (expected linear|tree)");
}

GreedyModelSpec::Cadence GreedyModelSpec::parse_cadence(const std::string& s) {
    if (s == "every_round" || s == "every") return Cadence::EveryRound;
    if (s == "doubling") return Cadence::Doubling;
    throw Error("unknown refit cadence '" + s + "' (expected every_round|doubling)");
}

namespace {

/// Per-arm mean-outcome model behind the greedy choice.
class GreedyModel {
public:
    GreedyModel(const GreedyModelSpec& spec, int d, int k) : spec_(spec), d_(d), k_(k) {
        const Index p = d + 1;
        gram_.assign(static_cast<std::size_t>(k), Matrix::Zero(p, p));
        cross_.assign(static_cast<std::size_t>(k), Vector::Zero(p));
        count_.assign(static_cast<std::size_t>(k), 0);
        coef_.assign(static_cast<std::size_t>(k), Vector::Zero(p));
        stale_.assign(static_cast<std::size_t>(k), true);
        trees_.resize(static_cast<std::size_t>(k));
        z_.resize(p);
    }

    void observe(const Vector& x, int arm, double y) {
        const auto a = static_cast<std::size_t>(arm);
        if (spec_.learner == GreedyModelSpec::Learner::Linear) {
            z_[0] = 1.0;
            z_.tail(d_) = x;
            gram_[a].selfadjointView<Eigen::Lower>().rankUpdate(z_);
            cross_[a] += y * z_;
        }
        xs_.push_back(x);
        arms_.push_back(arm);
        ys_.push_back(y);
        ++count_[a];
        stale_[a] = true;
    }

    /// Refit on everything observed so far, honoring the cadence.
    void refit(std::int64_t t) {
        if (spec_.cadence == GreedyModelSpec::Cadence::Doubling && fitted_once_) {
            // Refit only at rounds t with t-1 a power of two.
            const auto n = static_cast<std::uint64_t>(t - 1);
            if ((n & (n - 1)) != 0) return;
        }
        fitted_once_ = true;
        for (int a = 0; a < k_; ++a) {
            const auto ai = static_cast<std::size_t>(a);
            if (!stale_[ai]) continue;
            stale_[ai] = false;
            if (spec_.learner == GreedyModelSpec::Learner::Linear) {
                Matrix gram = gram_[ai].selfadjointView<Eigen::Lower>();
                if (count_[ai] < gram.rows()) gram.diagonal().array() += kGreedyRidgeJitter;
                Eigen::CompleteOrthogonalDecomposition<Matrix> cod(gram);
                cod.setThreshold(1e-10);
                coef_[ai] = cod.solve(cross_[ai]);
            } else {
                fit_tree(a);
            }
        }
    }

    int greedy_arm(const Vector& x, double sign) const {
        int best = 0;
        double best_v = std::numeric_limits<double>::infinity();
        for (int a = 0; a < k_; ++a) {
            const double v = sign * predict(x, a);
            if (v < best_v) {
                best_v = v;
                best = a;
            }
        }
        return best;
    }

private:
    double predict(const Vector& x, int a) const {
        const auto ai = static_cast<std::size_t>(a);
        if (spec_.learner == GreedyModelSpec::Learner::Linear)
            return coef_[ai][0] + coef_[ai].tail(d_).dot(x);
        return trees_[ai].nodes.empty() ? 0.0 : trees_[ai].predict(x);
    }

    void fit_tree(int a) {
        const auto n = static_cast<Index>(count_[static_cast<std::size_t>(a)]);
        if (n == 0) return;
        Matrix X(n, d_);
        Vector y(n);
        Index row = 0;
        for (std::size_t i = 0; i < arms_.size(); ++i) {
            if (arms_[i] != a) continue;
            X.row(row) = xs_[i].transpose();
            y[row] = ys_[i];
            ++row;
        }
        trees_[static_cast<std::size_t>(a)] = fit_cart(X, y, Vector::Ones(n), spec_.tree);
    }

    GreedyModelSpec spec_;
    int d_;
    int k_;
    std::vector<Matrix> gram_;
    std::vector<Vector> cross_;
    std::vector<long> count_;
    std::vector<Vector> coef_;
    std::vector<bool> stale_;
    std::vector<TreeModel> trees_;
    std::vector<Vector> xs_;
    std::vector<int> arms_;
    std::vector<double> ys_;
    Vector z_;
    bool fitted_once_ = false;
};

}  // namespace

CollectionTrace collect_with_trace(const Environment& env, const ExplorationSchedule& schedule,
                                   const GreedyModelSpec& greedy, std::int64_t T, std::uint64_t seed) {
    schedule.validate();
    const int k = env.num_arms();
    const int d = env.context_dim();
    if (T < k) throw Error("horizon T must be at least the number of arms");

    CollectionTrace out;
    out.data.num_arms = k;
    out.data.context_dim = d;
    out.data.beta = schedule.beta;
    out.data.seed = seed;
    out.data.records.reserve(static_cast<std::size_t>(T));
    out.greedy_arm.reserve(static_cast<std::size_t>(T));

    Rng rng(seed);
    GreedyModel model(greedy, d, k);
    std::vector<bool> pulled(static_cast<std::size_t>(k), false);
    int distinct = 0;
    const double sign = env.cost_sign();

    for (std::int64_t t = 1; t <= T || distinct < k; ++t) {
        const ContextDraw draw = env.sample_context(rng);
        LoggedRecord rec;
        rec.t = t;
        rec.context = draw.x;
        int greedy_arm = -1;
        if (distinct < k) {
            rec.action = uniform_arm(rng, k);
            rec.propensity = 1.0 / k;
            rec.epsilon = 1.0;
        } else {
            model.refit(t);
            greedy_arm = model.greedy_arm(draw.x, sign);
            const double eps = epsilon_at(schedule, t);
            // Explore with probability eps (uniform arm), else exploit.
            const bool explore = uniform01(rng) < eps;
            rec.action = explore ? uniform_arm(rng, k) : greedy_arm;
            rec.propensity = rec.action == greedy_arm ? 1.0 - eps + eps / k : eps / k;
            rec.epsilon = eps;
        }
        rec.outcome = env.sample_outcome(draw, rec.action, rng);
        if (!pulled[static_cast<std::size_t>(rec.action)]) {
            pulled[static_cast<std::size_t>(rec.action)] = true;
            ++distinct;
        }
        model.observe(rec.context, rec.action, rec.outcome);
        out.greedy_arm.push_back(greedy_arm);
        out.data.records.push_back(std::move(rec));
    }
    return out;
}

LoggedDataset collect(const Environment& env, const ExplorationSchedule& schedule, const GreedyModelSpec& greedy,
                      std::int64_t T, std::uint64_t seed) {
    return collect_with_trace(env, schedule, greedy, T, seed).data;
}

ExplorationBound exploration_bound(const ExplorationSchedule& schedule, int num_arms, std::int64_t T,
                                   const ReferenceWeight& gstar) {
    schedule.validate();
    gstar.validate(num_arms);
    if (T < 1) throw Error("horizon must be >= 1");
    ExplorationBound b;
    b.gamma.reserve(static_cast<std::size_t>(T));
    double sum = 0.0;
    for (std::int64_t t = 1; t <= T; ++t) {
        const double g = gstar.sup(num_arms) / (epsilon_at(schedule, t) / num_arms);
        b.gamma.push_back(g);
        sum += g;
        b.gamma_max = std::max(b.gamma_max, g);
    }
    b.gamma_avg = sum / static_cast<double>(T);
    return b;
}

}  // namespace iswerm
