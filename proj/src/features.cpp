#include "iswerm/features.hpp"

namespace iswerm {

Index FeatureMap::dim() const {
    return mode == Mode::LinearInteracted ? static_cast<Index>(num_arms + 1) * (context_dim + 1)
                                          : static_cast<Index>(context_dim + num_arms);
}

std::optional<Index> FeatureMap::intercept() const {
    if (mode == Mode::LinearInteracted) return Index{0};
    return std::nullopt;
}

std::string FeatureMap::name() const {
    return mode == Mode::LinearInteracted ? "linear_interacted" : "tree_concat";
}

FeatureMap FeatureMap::parse(const std::string& name, int d, int k) {
    if (name == "linear_interacted") return linear(d, k);
    if (name == "tree_concat") return tree(d, k);
    throw Error("unknown feature map '" + name + "'");
}

void build_features_into(const Vector& x, int arm, const FeatureMap& map, Eigen::Ref<Vector> out) {
    if (x.size() != map.context_dim) throw Error("context dimension does not match feature map");
    if (arm < 0 || arm >= map.num_arms) throw Error("arm out of range for feature map");
    if (out.size() != map.dim()) throw Error("feature buffer has wrong size");
    out.setZero();
    const Index block = map.context_dim + 1;
    if (map.mode == FeatureMap::Mode::LinearInteracted) {
        out[0] = 1.0;
        out.segment(1, map.context_dim) = x;
        const Index start = block * (arm + 1);
        out[start] = 1.0;
        out.segment(start + 1, map.context_dim) = x;
    } else {
        out.head(map.context_dim) = x;
        out[map.context_dim + arm] = 1.0;
    }
}

Vector build_features(const Vector& x, int arm, const FeatureMap& map) {
    Vector out(map.dim());
    build_features_into(x, arm, map, out);
    return out;
}

Matrix design_matrix(const LoggedDataset& ds, const FeatureMap& map) {
    Matrix phi(static_cast<Index>(ds.size()), map.dim());
    Vector row(map.dim());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        build_features_into(ds.records[i].context, ds.records[i].action, map, row);
        phi.row(static_cast<Index>(i)) = row.transpose();
    }
    return phi;
}

Vector outcome_vector(const LoggedDataset& ds) {
    Vector y(static_cast<Index>(ds.size()));
    for (std::size_t i = 0; i < ds.size(); ++i) y[static_cast<Index>(i)] = ds.records[i].outcome;
    return y;
}

}  // namespace iswerm
