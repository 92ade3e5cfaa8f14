#pragma once

#include "iswerm/lasso.hpp"
#include "iswerm/wls.hpp"

#include <optional>
#include <vector>

namespace iswerm {

enum class PenalizedLearner { Ridge, Lasso };

struct CvOptions {
    int folds = 4;
    std::optional<Index> intercept;
    LassoOptions lasso;  ///< tol / max_iter for lasso fits (lambda is overwritten)
};

struct CvResult {
    double lambda = 0.0;
    Vector coefficients;
    std::vector<double> grid;      ///< deduplicated, ascending
    std::vector<double> cv_error;  ///< weight-normalized CV error per grid entry
    bool converged = true;         ///< false if any lasso fit hit max_iter
};

/// Contiguous time-ordered block folds; each fold is scored by weighted squared
/// error with its own weights, and the errors are normalized by the total
/// weight. Ties go to the smaller lambda. The winner is refit on all rows.
CvResult cv_select_lambda(PenalizedLearner learner, const Matrix& X, const Vector& y, const Vector& w,
                          std::vector<double> lambda_grid, const CvOptions& options = {});

/// Geometric grid from lambda_max down to lambda_max * ratio (sklearn-style path).
std::vector<double> default_lasso_grid(const Matrix& X, const Vector& y, const Vector& w,
                                       std::optional<Index> intercept, int count = 20, double ratio = 1e-3);

inline std::vector<double> default_ridge_grid() { return {0.1, 1.0, 10.0}; }

}  // namespace iswerm
