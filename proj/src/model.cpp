#include "iswerm/model.hpp"

namespace iswerm {

double predict(const LinearModel& model, const Vector& x, int arm) {
    if (model.coefficients.size() != model.feature_map.dim())
        throw Error("linear model coefficients do not match its feature map");
    return build_features(x, arm, model.feature_map).dot(model.coefficients);
}

double predict(const TreeRegressionModel& model, const Vector& x, int arm) {
    return model.tree.predict(build_features(x, arm, model.feature_map));
}

double predict(const RegressionModel& model, const Vector& x, int arm) {
    return std::visit([&](const auto& m) { return predict(m, x, arm); }, model);
}

ScoreFn as_score(const RegressionModel& model) {
    return [model](const ContextDraw& draw, int arm) { return predict(model, draw.x, arm); };
}

namespace {

nlohmann::json map_to_json(const FeatureMap& m) {
    return {{"mode", m.name()}, {"d", m.context_dim}, {"K", m.num_arms}};
}

FeatureMap map_from_json(const nlohmann::json& j) {
    return FeatureMap::parse(j.at("mode").get<std::string>(), j.at("d").get<int>(), j.at("K").get<int>());
}

}  // namespace

nlohmann::json model_to_json(const RegressionModel& model) {
    if (const auto* lin = std::get_if<LinearModel>(&model)) {
        return {{"type", "linear"},
                {"feature_map", map_to_json(lin->feature_map)},
                {"coefficients", std::vector<double>(lin->coefficients.data(),
                                                     lin->coefficients.data() + lin->coefficients.size())}};
    }
    const auto& tree = std::get<TreeRegressionModel>(model);
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.tree.nodes)
        nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left},
                         {"right", n.right}, {"value", n.value}, {"weight", n.weight}});
    return {{"type", "tree"},
            {"feature_map", map_to_json(tree.feature_map)},
            {"max_depth", tree.tree.max_depth},
            {"min_leaf_weight", tree.tree.min_leaf_weight},
            {"nodes", nodes}};
}

RegressionModel model_from_json(const nlohmann::json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type == "linear") {
        auto c = j.at("coefficients").get<std::vector<double>>();
        LinearModel m{Eigen::Map<const Vector>(c.data(), static_cast<Index>(c.size())),
                      map_from_json(j.at("feature_map"))};
        if (m.coefficients.size() != m.feature_map.dim()) throw Error("model coefficients do not match feature map");
        return m;
    }
    if (type == "tree") {
        TreeRegressionModel m;
        m.feature_map = map_from_json(j.at("feature_map"));
        m.tree.max_depth = j.at("max_depth").get<int>();
        m.tree.min_leaf_weight = j.at("min_leaf_weight").get<double>();
        for (const auto& n : j.at("nodes"))
            m.tree.nodes.push_back({n.at("feature").get<int>(), n.at("threshold").get<double>(),
                                    n.at("left").get<int>(), n.at("right").get<int>(), n.at("value").get<double>(),
                                    n.at("weight").get<double>()});
        return m;
    }
    throw Error("unknown model type '" + type + "'");
}


std::string model_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::Wls: return "wls";
        case ModelKind::Ridge: return "ridge";
        case ModelKind::Lasso: return "lasso";
        case ModelKind::Cart: return "cart";
    }
    return {};
}

ModelKind parse_model(const std::string& name) {
    for (auto k : {ModelKind::Wls, ModelKind::Ridge, ModelKind::Lasso, ModelKind::Cart})
        if (model_name(k) == name) return k;
    throw Error("unknown model '" + name + "' (expected wls|ridge|lasso|cart)");
}

RegressionFit fit_regression(ModelKind kind, const LoggedDataset& ds, const Vector& weights,
                             const LearnerOptions& options) {
    if (static_cast<std::size_t>(weights.size()) != ds.size()) throw Error("weights and dataset sizes differ");
    const Vector y = outcome_vector(ds);
    RegressionFit fit;
    if (kind == ModelKind::Cart) {
        const auto map = FeatureMap::tree(ds.context_dim, ds.num_arms);
        fit.model = TreeRegressionModel{fit_cart(design_matrix(ds, map), y, weights, options.cart), map};
        return fit;
    }
    const auto map = FeatureMap::linear(ds.context_dim, ds.num_arms);
    const Matrix X = design_matrix(ds, map);
    if (kind == ModelKind::Wls) {
        fit.lambda = options.wls_lambda;
        fit.model = LinearModel{fit_wls(X, y, weights, WlsOptions{options.wls_lambda, map.intercept()}), map};
        return fit;
    }
    CvOptions cv;
    cv.folds = options.cv_folds;
    cv.intercept = map.intercept();
    cv.lasso = options.lasso;
    std::vector<double> grid;
    if (kind == ModelKind::Ridge) {
        grid = options.ridge_grid;
    } else {
        grid = options.lasso_grid.empty()
                   ? default_lasso_grid(X, y, weights, map.intercept(), options.lasso_grid_size)
                   : options.lasso_grid;
    }
    auto r = cv_select_lambda(kind == ModelKind::Ridge ? PenalizedLearner::Ridge : PenalizedLearner::Lasso, X, y,
                              weights, grid, cv);
    fit.lambda = r.lambda;
    fit.converged = r.converged;
    fit.model = LinearModel{std::move(r.coefficients), map};
    return fit;
}

}  // namespace iswerm
