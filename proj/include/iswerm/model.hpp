#pragma once

#include "iswerm/cart.hpp"
#include "iswerm/cv.hpp"
#include "iswerm/dataset.hpp"
#include "iswerm/environment.hpp"
#include "iswerm/features.hpp"

#include <json.hpp>

#include <variant>

namespace iswerm {

struct LinearModel {
    Vector coefficients;
    FeatureMap feature_map;
};

struct TreeRegressionModel {
    TreeModel tree;
    FeatureMap feature_map;
};

/// A fitted predictor f(x, a).
using RegressionModel = std::variant<LinearModel, TreeRegressionModel>;

double predict(const LinearModel& model, const Vector& x, int arm);
double predict(const TreeRegressionModel& model, const Vector& x, int arm);
double predict(const RegressionModel& model, const Vector& x, int arm);

ScoreFn as_score(const RegressionModel& model);

nlohmann::json model_to_json(const RegressionModel& model);
RegressionModel model_from_json(const nlohmann::json& j);


enum class ModelKind { Wls, Ridge, Lasso, Cart };

std::string model_name(ModelKind kind);
ModelKind parse_model(const std::string& name);

struct LearnerOptions {
    int cv_folds = 4;
    std::vector<double> ridge_grid = default_ridge_grid();
    std::vector<double> lasso_grid;  ///< empty: data-driven geometric path
    int lasso_grid_size = 20;
    LassoOptions lasso;
    CartOptions cart;
    double wls_lambda = 0.0;
};

struct RegressionFit {
    RegressionModel model;
    double lambda = 0.0;  ///< selected penalty (ridge/lasso) or fixed wls penalty
    bool converged = true;
};

/// Weighted regression of outcomes on (context, arm) features. Linear kinds use
/// the interacted map; CART uses the concatenated map.
RegressionFit fit_regression(ModelKind kind, const LoggedDataset& ds, const Vector& weights,
                             const LearnerOptions& options = {});

}  // namespace iswerm
