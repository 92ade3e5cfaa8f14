#pragma once

#include "iswerm/wls.hpp"

#include <algorithm>
#include <optional>
#include <vector>

namespace iswerm {

struct LassoOptions {
    double lambda = 0.0;
    double tol = 1e-10;
    int max_iter = 100000;
    std::optional<Index> intercept;
    bool trace_objective = false;
};

template <typename Scalar>
struct LassoResult {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> coefficients;
    int sweeps = 0;
    bool converged = false;
    std::vector<Scalar> objective_trace;  ///< value after each sweep, when traced
};

/// Weighted second moments in the normalized form the lasso works with:
/// G = X'WX / sum w, q = X'Wy / sum w, s = y'Wy / sum w.
template <typename Scalar>
struct WeightedMoments {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> gram;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> cross;
    Scalar yy = 0;
    Scalar total_weight = 0;

    template <typename DerivedX, typename DerivedY, typename DerivedW>
    static WeightedMoments compute(const Eigen::MatrixBase<DerivedX>& X, const Eigen::MatrixBase<DerivedY>& y,
                                   const Eigen::MatrixBase<DerivedW>& w) {
        detail::check_weighted_problem(X, y, w);
        WeightedMoments m;
        m.total_weight = w.sum();
        const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> weighted =
            X.array().colwise() * w.array().template cast<Scalar>();
        m.gram = weighted.transpose() * X / m.total_weight;
        m.cross = weighted.transpose() * y / m.total_weight;
        m.yy = (w.array() * y.array().square()).sum() / m.total_weight;
        return m;
    }

    /// (1/W) sum w (y - X theta)^2 + 2 lambda ||theta without intercept||_1
    template <typename DerivedT>
    Scalar objective(const Eigen::MatrixBase<DerivedT>& theta, double lambda, std::optional<Index> intercept) const {
        Scalar obj = yy - 2 * cross.dot(theta) + theta.dot(gram * theta);
        Scalar l1 = 0;
        for (Index j = 0; j < theta.size(); ++j)
            if (!intercept || *intercept != j) l1 += std::abs(theta[j]);
        return obj + Scalar(2 * lambda) * l1;
    }
};

namespace detail {

template <typename Scalar>
Scalar soft_threshold(Scalar z, Scalar t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return Scalar(0);
}

template <typename Scalar>
Scalar intercept_only_value(const WeightedMoments<Scalar>& m, std::optional<Index> intercept) {
    if (!intercept) return Scalar(0);
    const Scalar g = m.gram(*intercept, *intercept);
    return g > 0 ? m.cross[*intercept] / g : Scalar(0);
}

}  // namespace detail

/// Smallest lambda at which every non-intercept coefficient is exactly zero.
template <typename Scalar>
Scalar lasso_lambda_max(const WeightedMoments<Scalar>& m, std::optional<Index> intercept) {
    const Scalar b0 = detail::intercept_only_value(m, intercept);
    Scalar best = 0;
    for (Index j = 0; j < m.cross.size(); ++j) {
        if (intercept && *intercept == j) continue;
        const Scalar c = intercept ? m.cross[j] - m.gram(j, *intercept) * b0 : m.cross[j];
        best = std::max(best, std::abs(c));
    }
    return best;
}

/// Cyclic coordinate descent with soft-thresholding on the covariance form of
/// the weighted lasso. Converged once the largest coordinate move in a sweep
/// is below tol; on hitting max_iter the current iterate is returned with
/// converged = false.
template <typename Scalar>
LassoResult<Scalar> fit_lasso_cd(const WeightedMoments<Scalar>& m, const LassoOptions& options,
                                 const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>* warm_start = nullptr) {
    if (!(options.lambda >= 0.0)) throw Error("lasso lambda must be >= 0");
    const Index p = m.gram.rows();
    const Scalar lambda(options.lambda);
    LassoResult<Scalar> result;
    auto& theta = result.coefficients;
    if (warm_start != nullptr && warm_start->size() == p) {
        theta = *warm_start;
    } else {
        theta = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(p);
        if (options.intercept) theta[*options.intercept] = detail::intercept_only_value(m, options.intercept);
    }
    // grad_j = q_j - (G theta)_j, kept current across coordinate moves.
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> grad = m.cross - m.gram * theta;

    for (int sweep = 0; sweep < options.max_iter; ++sweep) {
        Scalar max_change = 0;
        for (Index j = 0; j < p; ++j) {
            const Scalar a = m.gram(j, j);
            if (a <= 0) continue;
            const Scalar old = theta[j];
            const Scalar c = grad[j] + a * old;
            const bool penalized = !options.intercept || *options.intercept != j;
            const Scalar updated = penalized ? detail::soft_threshold(c, lambda) / a : c / a;
            const Scalar delta = updated - old;
            if (delta != 0) {
                theta[j] = updated;
                grad -= m.gram.col(j) * delta;
                max_change = std::max(max_change, std::abs(delta));
            }
        }
        result.sweeps = sweep + 1;
        if (options.trace_objective)
            result.objective_trace.push_back(m.objective(theta, options.lambda, options.intercept));
        if (max_change < Scalar(options.tol)) {
            result.converged = true;
            break;
        }
    }
    return result;
}

template <typename DerivedX, typename DerivedY, typename DerivedW>
LassoResult<typename DerivedX::Scalar> fit_lasso_cd(const Eigen::MatrixBase<DerivedX>& X,
                                                    const Eigen::MatrixBase<DerivedY>& y,
                                                    const Eigen::MatrixBase<DerivedW>& w,
                                                    const LassoOptions& options) {
    using Scalar = typename DerivedX::Scalar;
    return fit_lasso_cd(WeightedMoments<Scalar>::compute(X, y, w), options);
}

}  // namespace iswerm
