#pragma once

#include "iswerm/types.hpp"

#include <cmath>
#include <optional>

namespace iswerm {

struct WlsOptions {
    double ridge_lambda = 0.0;
    /// Unpenalized column (the constant), if any.
    std::optional<Index> intercept;
};

namespace detail {

template <typename DerivedX, typename DerivedY, typename DerivedW>
void check_weighted_problem(const Eigen::MatrixBase<DerivedX>& X, const Eigen::MatrixBase<DerivedY>& y,
                            const Eigen::MatrixBase<DerivedW>& w) {
    if (X.rows() < 1) throw Error("weighted fit needs at least one row");
    if (y.size() != X.rows() || w.size() != X.rows()) throw Error("weighted fit: row counts differ");
    if (!w.allFinite() || (w.array() < 0).any()) throw Error("weights must be finite and >= 0");
    if (!(w.array() > 0).any()) throw Error("all weights are zero");
}

}  // namespace detail

/// Minimizes sum_i w_i (y_i - theta . phi_i)^2 + lambda ||theta without intercept||^2
/// through the weighted normal equations. A singular system (lambda = 0 and a
/// rank-deficient design) yields the minimum-norm solution.
template <typename DerivedX, typename DerivedY, typename DerivedW>
Eigen::Matrix<typename DerivedX::Scalar, Eigen::Dynamic, 1> fit_wls(const Eigen::MatrixBase<DerivedX>& X,
                                                                    const Eigen::MatrixBase<DerivedY>& y,
                                                                    const Eigen::MatrixBase<DerivedW>& w,
                                                                    const WlsOptions& options = {}) {
    using Scalar = typename DerivedX::Scalar;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    detail::check_weighted_problem(X, y, w);
    if (!(options.ridge_lambda >= 0.0)) throw Error("ridge lambda must be >= 0");

    const Mat weighted = X.array().colwise() * w.array().template cast<Scalar>();
    Mat gram = weighted.transpose() * X;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rhs = weighted.transpose() * y;
    if (options.ridge_lambda > 0.0) {
        for (Index j = 0; j < gram.rows(); ++j)
            if (!options.intercept || *options.intercept != j) gram(j, j) += Scalar(options.ridge_lambda);
    }
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(gram);
    // Treat directions below 1e-10 of the largest pivot as exact null space.
    cod.setThreshold(Scalar(1e-10));
    return cod.solve(rhs);
}

template <typename DerivedX, typename DerivedY, typename DerivedW, typename DerivedT>
typename DerivedX::Scalar wls_objective(const Eigen::MatrixBase<DerivedX>& X, const Eigen::MatrixBase<DerivedY>& y,
                                        const Eigen::MatrixBase<DerivedW>& w,
                                        const Eigen::MatrixBase<DerivedT>& theta, const WlsOptions& options = {}) {
    using Scalar = typename DerivedX::Scalar;
    const auto resid = (y - X * theta).eval();
    Scalar obj = (w.array() * resid.array().square()).sum();
    for (Index j = 0; j < theta.size(); ++j)
        if (!options.intercept || *options.intercept != j) obj += Scalar(options.ridge_lambda) * theta[j] * theta[j];
    return obj;
}

}  // namespace iswerm
