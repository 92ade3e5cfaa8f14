#include "iswerm/cv.hpp"

#include <algorithm>
#include <cmath>

namespace iswerm {

namespace {

Vector fit_penalized(PenalizedLearner learner, const WeightedMoments<double>& m, double lambda,
                     const CvOptions& options, bool& converged) {
    if (learner == PenalizedLearner::Ridge) {
        // Normalized form of (X'WX + lambda P) theta = X'Wy.
        Matrix gram = m.gram;
        for (Index j = 0; j < gram.rows(); ++j)
            if (!options.intercept || *options.intercept != j) gram(j, j) += lambda / m.total_weight;
        Eigen::CompleteOrthogonalDecomposition<Matrix> cod(gram);
        cod.setThreshold(1e-10);
        return cod.solve(m.cross);
    }
    LassoOptions lo = options.lasso;
    lo.lambda = lambda;
    lo.intercept = options.intercept;
    auto r = fit_lasso_cd(m, lo);
    converged = converged && r.converged;
    return r.coefficients;
}

}  // namespace

CvResult cv_select_lambda(PenalizedLearner learner, const Matrix& X, const Vector& y, const Vector& w,
                          std::vector<double> lambda_grid, const CvOptions& options) {
    if (lambda_grid.empty()) throw Error("lambda grid is empty");
    for (double l : lambda_grid)
        if (!(l >= 0.0) || !std::isfinite(l)) throw Error("lambda values must be finite and >= 0");
    if (options.folds < 2) throw Error("cross-validation needs at least 2 folds");
    const Index n = X.rows();
    if (n < options.folds) throw Error("fewer rows than folds");

    std::sort(lambda_grid.begin(), lambda_grid.end());
    lambda_grid.erase(std::unique(lambda_grid.begin(), lambda_grid.end()), lambda_grid.end());

    CvResult result;
    result.grid = lambda_grid;
    result.cv_error.assign(lambda_grid.size(), 0.0);
    const double total_weight = w.sum();
    if (!(total_weight > 0.0)) throw Error("all weights are zero");

    for (int k = 0; k < options.folds; ++k) {
        const Index lo = n * k / options.folds;
        const Index hi = n * (k + 1) / options.folds;
        const Index m = n - (hi - lo);
        Matrix Xt(m, X.cols());
        Vector yt(m), wt(m);
        Xt << X.topRows(lo), X.bottomRows(n - hi);
        yt << y.head(lo), y.tail(n - hi);
        wt << w.head(lo), w.tail(n - hi);
        if (!(wt.array() > 0.0).any()) continue;  // nothing to train on; fold contributes no error
        const auto Xv = X.middleRows(lo, hi - lo);
        const auto yv = y.segment(lo, hi - lo);
        const auto wv = w.segment(lo, hi - lo);
        const auto moments = WeightedMoments<double>::compute(Xt, yt, wt);
        for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
            const Vector theta = fit_penalized(learner, moments, lambda_grid[g], options, result.converged);
            const Vector resid = yv - Xv * theta;
            result.cv_error[g] += (wv.array() * resid.array().square()).sum() / total_weight;
        }
    }

    std::size_t best = 0;
    for (std::size_t g = 1; g < lambda_grid.size(); ++g)
        if (result.cv_error[g] < result.cv_error[best]) best = g;
    result.lambda = lambda_grid[best];
    result.coefficients =
        fit_penalized(learner, WeightedMoments<double>::compute(X, y, w), result.lambda, options, result.converged);
    return result;
}

std::vector<double> default_lasso_grid(const Matrix& X, const Vector& y, const Vector& w,
                                       std::optional<Index> intercept, int count, double ratio) {
    const auto m = WeightedMoments<double>::compute(X, y, w);
    const double top = lasso_lambda_max(m, intercept);
    std::vector<double> grid;
    if (!(top > 0.0)) return {0.0};
    for (int i = 0; i < count; ++i)
        grid.push_back(top * std::pow(ratio, count > 1 ? static_cast<double>(i) / (count - 1) : 0.0));
    return grid;
}

}  // namespace iswerm
