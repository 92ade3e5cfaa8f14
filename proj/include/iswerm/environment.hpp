#pragma once

#include "iswerm/dataset.hpp"
#include "iswerm/ingestion.hpp"
#include "iswerm/rng.hpp"
#include "iswerm/types.hpp"

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>

namespace iswerm {

/// A sampled context plus, where the environment has one, the index of the
/// support point (discrete) or data row (classification) it came from.
struct ContextDraw {
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    Vector x;
    std::size_t cell = npos;
};

/// f(x, a): regression prediction, or action probability for a policy.
using ScoreFn = std::function<double(const ContextDraw&, int)>;

class DiscreteEnvironment;
class LinearEnvironment;

/// Stationary stochastic contextual bandit. Outcomes are mean plus Gaussian
/// noise. Implementations are immutable; all randomness comes from the caller.
class Environment {
public:
    virtual ~Environment() = default;

    int context_dim() const { return context_dim_; }
    int num_arms() const { return num_arms_; }

    virtual ContextDraw sample_context(Rng& rng) const = 0;
    /// mu(x, a) for the draw. Classification environments answer through the
    /// draw's row label even though mu is not a function of x alone.
    virtual double mean_outcome(const ContextDraw& draw, int arm) const = 0;
    virtual double noise_std(const ContextDraw& draw, int arm) const = 0;
    /// True when mu depends on x only and may be evaluated at arbitrary contexts.
    virtual bool mean_known() const { return true; }
    /// +1 when outcomes are costs, -1 when they are rewards to be maximized.
    virtual double cost_sign() const { return 1.0; }
    /// Bound M on |mu|.
    virtual double outcome_bound() const = 0;
    virtual std::string describe() const = 0;

    virtual const DiscreteEnvironment* as_discrete() const { return nullptr; }
    virtual const LinearEnvironment* as_linear() const { return nullptr; }

    double sample_outcome(const ContextDraw& draw, int arm, Rng& rng) const {
        return mean_outcome(draw, arm) + noise_std(draw, arm) * standard_normal(rng);
    }

protected:
    Environment(int d, int k) : context_dim_(d), num_arms_(k) {}

private:
    int context_dim_;
    int num_arms_;
};

using EnvironmentPtr = std::shared_ptr<const Environment>;

/// mu(x, a) = theta_a . (1, x), contexts uniform on [-1, 1]^d.
class LinearEnvironment final : public Environment {
public:
    /// theta: K x (d+1), row a holds (intercept, slopes) of arm a.
    LinearEnvironment(Matrix theta, double noise_std);

    ContextDraw sample_context(Rng& rng) const override;
    double mean_outcome(const ContextDraw& draw, int arm) const override;
    double noise_std(const ContextDraw&, int) const override { return noise_std_; }
    double outcome_bound() const override { return bound_; }
    std::string describe() const override;
    const LinearEnvironment* as_linear() const override { return this; }

    const Matrix& theta() const { return theta_; }
    /// E[(1,x)(1,x)^T] under the context law.
    Matrix design_second_moment() const;
    double noise() const { return noise_std_; }

private:
    Matrix theta_;
    double noise_std_;
    double bound_;
};

/// Misspecified testbed: mu(x, a) = c_a + sum_j (x_j - s_aj)^2, contexts uniform on [-1,1]^d.
class QuadraticEnvironment final : public Environment {
public:
    QuadraticEnvironment(Vector offsets, Matrix centers, double noise_std);

    ContextDraw sample_context(Rng& rng) const override;
    double mean_outcome(const ContextDraw& draw, int arm) const override;
    double noise_std(const ContextDraw&, int) const override { return noise_std_; }
    double outcome_bound() const override { return bound_; }
    std::string describe() const override;

private:
    Vector offsets_;
    Matrix centers_;  // K x d
    double noise_std_;
    double bound_;
};

/// Axis-aligned step testbed: mu(x, a) = sum_j h_aj 1{x_j > tau_aj}.
class StepEnvironment final : public Environment {
public:
    StepEnvironment(Matrix heights, Matrix thresholds, double noise_std);

    ContextDraw sample_context(Rng& rng) const override;
    double mean_outcome(const ContextDraw& draw, int arm) const override;
    double noise_std(const ContextDraw&, int) const override { return noise_std_; }
    double outcome_bound() const override { return bound_; }
    std::string describe() const override;

private:
    Matrix heights_;     // K x d
    Matrix thresholds_;  // K x d
    double noise_std_;
    double bound_;
};

/// Finite context support: every expectation is an exact finite sum.
class DiscreteEnvironment final : public Environment {
public:
    DiscreteEnvironment(std::vector<Vector> support, Vector probs, Matrix mu, Matrix noise_std);

    ContextDraw sample_context(Rng& rng) const override;
    double mean_outcome(const ContextDraw& draw, int arm) const override;
    double noise_std(const ContextDraw& draw, int arm) const override;
    double outcome_bound() const override { return bound_; }
    std::string describe() const override;
    const DiscreteEnvironment* as_discrete() const override { return this; }

    std::size_t support_size() const { return support_.size(); }
    const std::vector<Vector>& support() const { return support_; }
    const Vector& probs() const { return probs_; }
    const Matrix& mu() const { return mu_; }
    const Matrix& noise() const { return noise_; }
    ContextDraw draw_at(std::size_t cell) const { return {support_[cell], cell}; }
    /// Index of the support point nearest to x (exact match for logged contexts).
    std::size_t locate(const Vector& x) const;
    /// Lowest-index argmin of mu over arms in each cell.
    std::vector<int> optimal_arms() const;
    /// E mu*(X).
    double optimal_value() const;

private:
    std::vector<Vector> support_;
    Vector probs_;
    Matrix mu_;
    Matrix noise_;
    std::vector<double> cdf_;
    double bound_;
};

/// Rows drawn uniformly with replacement; reward N(1{a = label}, 1).
class ClassificationEnvironment final : public Environment {
public:
    explicit ClassificationEnvironment(std::shared_ptr<const ClassificationTable> table);

    ContextDraw sample_context(Rng& rng) const override;
    double mean_outcome(const ContextDraw& draw, int arm) const override;
    double noise_std(const ContextDraw&, int) const override { return 1.0; }
    bool mean_known() const override { return false; }
    double cost_sign() const override { return -1.0; }
    double outcome_bound() const override { return 1.0; }
    std::string describe() const override;

    const ClassificationTable& table() const { return *table_; }

private:
    std::shared_ptr<const ClassificationTable> table_;
};

std::shared_ptr<LinearEnvironment> make_synthetic_linear(int d, int num_arms, std::uint64_t coef_seed,
                                                         double noise_std);
std::shared_ptr<QuadraticEnvironment> make_synthetic_quadratic(int d, int num_arms, std::uint64_t coef_seed,
                                                               double noise_std);
std::shared_ptr<StepEnvironment> make_synthetic_step(int d, int num_arms, std::uint64_t coef_seed,
                                                     double noise_std);
std::shared_ptr<DiscreteEnvironment> make_discrete(std::vector<Vector> support, Vector probs, Matrix mu,
                                                   Matrix noise_std);
std::shared_ptr<DiscreteEnvironment> make_discrete(std::vector<Vector> support, Vector probs, Matrix mu,
                                                   double noise_std);
/// The seed is accepted for interface symmetry; the environment itself holds
/// no randomness and every sample stream comes from the caller's RNG.
std::shared_ptr<ClassificationEnvironment> make_classification_env(ClassificationTable table,
                                                                   std::uint64_t rng_seed = 0);

/// One-hot contexts e_0..e_{S-1}: the standard discrete testbed layout.
std::vector<Vector> one_hot_support(std::size_t size);

/// R*(f) = sum_x p(x) sum_a g*(a|x) E[l(f, (x, a, Y))], exact.
/// Squared: E(Y - f)^2 = sigma^2 + (mu - f)^2. PolicyValue: E[Y f] = mu f.
double exact_reference_risk(const DiscreteEnvironment& env, const ScoreFn& f, const ReferenceWeight& gstar,
                            LossKind kind);
double exact_reference_risk(const Environment& env, const ScoreFn& f, const ReferenceWeight& gstar,
                            LossKind kind);

}  // namespace iswerm
