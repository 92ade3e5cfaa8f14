#include "iswerm/environment.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace iswerm {

namespace {

Vector uniform_box(int d, Rng& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector x(d);
    for (int j = 0; j < d; ++j) x[j] = u(rng);
    return x;
}

void check_dims(int d, int k) {
    if (d < 1) throw Error("context dimension must be >= 1");
    if (k < 2) throw Error("number of arms must be >= 2");
}

void check_noise(double s) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw Error("noise std must be finite and >= 0");
}

Matrix uniform_matrix(Index rows, Index cols, double lo, double hi, Rng& rng) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(rows, cols);
    // Row-major fill so the layout of the seed stream is obvious.
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = u(rng);
    return m;
}

}  // namespace

// ---------------------------------------------------------------- linear

LinearEnvironment::LinearEnvironment(Matrix theta, double noise_std)
    : Environment(static_cast<int>(theta.cols()) - 1, static_cast<int>(theta.rows())),
      theta_(std::move(theta)),
      noise_std_(noise_std) {
    check_dims(context_dim(), num_arms());
    check_noise(noise_std_);
    if (!theta_.allFinite()) throw Error("non-finite linear coefficients");
    bound_ = theta_.rowwise().lpNorm<1>().maxCoeff();
}

ContextDraw LinearEnvironment::sample_context(Rng& rng) const { return {uniform_box(context_dim(), rng)}; }

double LinearEnvironment::mean_outcome(const ContextDraw& draw, int arm) const {
    return theta_(arm, 0) + theta_.row(arm).tail(context_dim()).dot(draw.x);
}

Matrix LinearEnvironment::design_second_moment() const {
    Matrix s = Matrix::Identity(context_dim() + 1, context_dim() + 1) / 3.0;
    s(0, 0) = 1.0;
    return s;
}

std::string LinearEnvironment::describe() const {
    std::ostringstream os;
    os << "linear(d=" << context_dim() << ",K=" << num_arms() << ",noise=" << noise_std_ << ")";
    return os.str();
}

std::shared_ptr<LinearEnvironment> make_synthetic_linear(int d, int num_arms, std::uint64_t coef_seed,
                                                         double noise_std) {
    check_dims(d, num_arms);
    Rng rng(coef_seed);
    return std::make_shared<LinearEnvironment>(uniform_matrix(num_arms, d + 1, -1.0, 1.0, rng), noise_std);
}

// ---------------------------------------------------------------- quadratic

QuadraticEnvironment::QuadraticEnvironment(Vector offsets, Matrix centers, double noise_std)
    : Environment(static_cast<int>(centers.cols()), static_cast<int>(centers.rows())),
      offsets_(std::move(offsets)),
      centers_(std::move(centers)),
      noise_std_(noise_std) {
    check_dims(context_dim(), num_arms());
    check_noise(noise_std_);
    if (offsets_.size() != centers_.rows()) throw Error("quadratic offsets/centers shape mismatch");
    bound_ = 0.0;
    for (Index a = 0; a < centers_.rows(); ++a) {
        double b = std::abs(offsets_[a]);
        for (Index j = 0; j < centers_.cols(); ++j) {
            const double s = centers_(a, j);
            b += std::max((1.0 - s) * (1.0 - s), (1.0 + s) * (1.0 + s));
        }
        bound_ = std::max(bound_, b);
    }
}

ContextDraw QuadraticEnvironment::sample_context(Rng& rng) const { return {uniform_box(context_dim(), rng)}; }

double QuadraticEnvironment::mean_outcome(const ContextDraw& draw, int arm) const {
    return offsets_[arm] + (draw.x.transpose() - centers_.row(arm)).squaredNorm();
}

std::string QuadraticEnvironment::describe() const {
    std::ostringstream os;
    os << "quadratic(d=" << context_dim() << ",K=" << num_arms() << ",noise=" << noise_std_ << ")";
    return os.str();
}

std::shared_ptr<QuadraticEnvironment> make_synthetic_quadratic(int d, int num_arms, std::uint64_t coef_seed,
                                                               double noise_std) {
    check_dims(d, num_arms);
    Rng rng(coef_seed);
    Matrix centers = uniform_matrix(num_arms, d, -1.0, 1.0, rng);
    Vector offsets = uniform_matrix(num_arms, 1, -0.5, 0.5, rng).col(0);
    return std::make_shared<QuadraticEnvironment>(std::move(offsets), std::move(centers), noise_std);
}

// ---------------------------------------------------------------- step

StepEnvironment::StepEnvironment(Matrix heights, Matrix thresholds, double noise_std)
    : Environment(static_cast<int>(heights.cols()), static_cast<int>(heights.rows())),
      heights_(std::move(heights)),
      thresholds_(std::move(thresholds)),
      noise_std_(noise_std) {
    check_dims(context_dim(), num_arms());
    check_noise(noise_std_);
    if (heights_.rows() != thresholds_.rows() || heights_.cols() != thresholds_.cols())
        throw Error("step heights/thresholds shape mismatch");
    bound_ = heights_.rowwise().lpNorm<1>().maxCoeff();
}

ContextDraw StepEnvironment::sample_context(Rng& rng) const { return {uniform_box(context_dim(), rng)}; }

double StepEnvironment::mean_outcome(const ContextDraw& draw, int arm) const {
    double m = 0.0;
    for (Index j = 0; j < heights_.cols(); ++j)
        if (draw.x[j] > thresholds_(arm, j)) m += heights_(arm, j);
    return m;
}

std::string StepEnvironment::describe() const {
    std::ostringstream os;
    os << "step(d=" << context_dim() << ",K=" << num_arms() << ",noise=" << noise_std_ << ")";
    return os.str();
}

std::shared_ptr<StepEnvironment> make_synthetic_step(int d, int num_arms, std::uint64_t coef_seed,
                                                     double noise_std) {
    check_dims(d, num_arms);
    Rng rng(coef_seed);
    Matrix heights = uniform_matrix(num_arms, d, -1.0, 1.0, rng);
    Matrix thresholds = uniform_matrix(num_arms, d, -0.5, 0.5, rng);
    return std::make_shared<StepEnvironment>(std::move(heights), std::move(thresholds), noise_std);
}

// ---------------------------------------------------------------- discrete

DiscreteEnvironment::DiscreteEnvironment(std::vector<Vector> support, Vector probs, Matrix mu, Matrix noise_std)
    : Environment(support.empty() ? 0 : static_cast<int>(support.front().size()), static_cast<int>(mu.cols())),
      support_(std::move(support)),
      probs_(std::move(probs)),
      mu_(std::move(mu)),
      noise_(std::move(noise_std)) {
    if (support_.empty()) throw Error("discrete environment needs a non-empty support");
    check_dims(context_dim(), num_arms());
    const auto s = static_cast<Index>(support_.size());
    if (probs_.size() != s || mu_.rows() != s || noise_.rows() != s || noise_.cols() != mu_.cols())
        throw Error("inconsistent discrete environment table shapes");
    for (const auto& x : support_) {
        if (x.size() != context_dim()) throw Error("support points differ in dimension");
        if (!x.allFinite()) throw Error("non-finite support point");
    }
    if ((probs_.array() < 0.0).any()) throw Error("negative context probability");
    if (std::abs(probs_.sum() - 1.0) > 1e-12) throw Error("context probabilities must sum to 1");
    if (!mu_.allFinite()) throw Error("non-finite mean outcome");
    if (!noise_.allFinite() || (noise_.array() < 0.0).any()) throw Error("noise std must be finite and >= 0");
    cdf_.resize(support_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < support_.size(); ++i) cdf_[i] = (acc += probs_[static_cast<Index>(i)]);
    bound_ = mu_.cwiseAbs().maxCoeff();
}

ContextDraw DiscreteEnvironment::sample_context(Rng& rng) const {
    const double u = uniform01(rng) * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    std::size_t cell = static_cast<std::size_t>(it - cdf_.begin());
    if (cell >= support_.size()) cell = support_.size() - 1;
    return {support_[cell], cell};
}

double DiscreteEnvironment::mean_outcome(const ContextDraw& draw, int arm) const {
    const std::size_t cell = draw.cell == ContextDraw::npos ? locate(draw.x) : draw.cell;
    return mu_(static_cast<Index>(cell), arm);
}

double DiscreteEnvironment::noise_std(const ContextDraw& draw, int arm) const {
    const std::size_t cell = draw.cell == ContextDraw::npos ? locate(draw.x) : draw.cell;
    return noise_(static_cast<Index>(cell), arm);
}

std::size_t DiscreteEnvironment::locate(const Vector& x) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < support_.size(); ++i) {
        const double dist = (support_[i] - x).squaredNorm();
        if (dist < best_d) {
            best_d = dist;
            best = i;
        }
    }
    return best;
}

std::vector<int> DiscreteEnvironment::optimal_arms() const {
    std::vector<int> out(support_.size());
    for (Index i = 0; i < mu_.rows(); ++i) {
        Index a = 0;
        mu_.row(i).minCoeff(&a);
        out[static_cast<std::size_t>(i)] = static_cast<int>(a);
    }
    return out;
}

double DiscreteEnvironment::optimal_value() const {
    return probs_.dot(mu_.rowwise().minCoeff());
}

std::string DiscreteEnvironment::describe() const {
    std::ostringstream os;
    os << "discrete(|S|=" << support_.size() << ",K=" << num_arms() << ")";
    return os.str();
}

std::shared_ptr<DiscreteEnvironment> make_discrete(std::vector<Vector> support, Vector probs, Matrix mu,
                                                   Matrix noise_std) {
    return std::make_shared<DiscreteEnvironment>(std::move(support), std::move(probs), std::move(mu),
                                                 std::move(noise_std));
}

std::shared_ptr<DiscreteEnvironment> make_discrete(std::vector<Vector> support, Vector probs, Matrix mu,
                                                   double noise_std) {
    Matrix noise = Matrix::Constant(mu.rows(), mu.cols(), noise_std);
    return make_discrete(std::move(support), std::move(probs), std::move(mu), std::move(noise));
}

std::vector<Vector> one_hot_support(std::size_t size) {
    std::vector<Vector> out;
    for (std::size_t i = 0; i < size; ++i) out.push_back(Vector::Unit(static_cast<Index>(size), static_cast<Index>(i)));
    return out;
}

// ---------------------------------------------------------------- classification

ClassificationEnvironment::ClassificationEnvironment(std::shared_ptr<const ClassificationTable> table)
    : Environment(static_cast<int>(table->cols()), table->num_classes), table_(std::move(table)) {
    check_dims(context_dim(), num_arms());
    if (table_->rows() == 0) throw Error("classification table has no rows");
    if (static_cast<Index>(table_->labels.size()) != table_->rows()) throw Error("label count mismatch");
    for (int l : table_->labels)
        if (l < 0 || l >= table_->num_classes) throw Error("label out of range");
    if (!table_->features.allFinite()) throw Error("non-finite features");
}

ContextDraw ClassificationEnvironment::sample_context(Rng& rng) const {
    std::uniform_int_distribution<Index> pick(0, table_->rows() - 1);
    const Index row = pick(rng);
    return {table_->features.row(row).transpose(), static_cast<std::size_t>(row)};
}

double ClassificationEnvironment::mean_outcome(const ContextDraw& draw, int arm) const {
    if (draw.cell == ContextDraw::npos) throw Error("classification mean needs the sampled row");
    return table_->labels[draw.cell] == arm ? 1.0 : 0.0;
}

std::string ClassificationEnvironment::describe() const {
    std::ostringstream os;
    os << "classification(n=" << table_->rows() << ",d=" << context_dim() << ",K=" << num_arms() << ")";
    return os.str();
}

std::shared_ptr<ClassificationEnvironment> make_classification_env(ClassificationTable table, std::uint64_t) {
    return std::make_shared<ClassificationEnvironment>(
        std::make_shared<const ClassificationTable>(std::move(table)));
}

// ---------------------------------------------------------------- exact risk

double exact_reference_risk(const DiscreteEnvironment& env, const ScoreFn& f, const ReferenceWeight& gstar,
                            LossKind kind) {
    gstar.validate(env.num_arms());
    const int k = env.num_arms();
    double total = 0.0;
    for (std::size_t i = 0; i < env.support_size(); ++i) {
        const auto draw = env.draw_at(i);
        const auto row = static_cast<Index>(i);
        double cell = 0.0;
        for (int a = 0; a < k; ++a) {
            const double weight = gstar(a, k);
            if (weight == 0.0) continue;
            const double mu = env.mu()(row, a);
            const double fa = f(draw, a);
            double loss = 0.0;
            if (kind == LossKind::Squared) {
                const double s = env.noise()(row, a);
                loss = s * s + (mu - fa) * (mu - fa);
            } else {
                loss = mu * fa;
            }
            cell += weight * loss;
        }
        total += env.probs()[row] * cell;
    }
    return total;
}

double exact_reference_risk(const Environment& env, const ScoreFn& f, const ReferenceWeight& gstar,
                            LossKind kind) {
    const auto* discrete = env.as_discrete();
    if (discrete == nullptr) throw Error("exact reference risk requires a discrete environment");
    return exact_reference_risk(*discrete, f, gstar, kind);
}

}  // namespace iswerm
