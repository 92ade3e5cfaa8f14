#pragma once

#include "iswerm/dataset.hpp"
#include "iswerm/types.hpp"

#include <optional>
#include <string>

namespace iswerm {

/// Joint (context, arm) encodings.
///  - LinearInteracted: [(1,x), onehot(a) (x) (1,x)], dimension (K+1)(d+1)
///  - TreeConcat:       [x, onehot(a)],               dimension d+K
struct FeatureMap {
    enum class Mode { LinearInteracted, TreeConcat };

    Mode mode = Mode::LinearInteracted;
    int context_dim = 1;
    int num_arms = 2;

    Index dim() const;
    /// Column holding the constant 1, if the map has one.
    std::optional<Index> intercept() const;
    std::string name() const;

    static FeatureMap linear(int d, int k) { return {Mode::LinearInteracted, d, k}; }
    static FeatureMap tree(int d, int k) { return {Mode::TreeConcat, d, k}; }
    static FeatureMap parse(const std::string& name, int d, int k);
};

Vector build_features(const Vector& x, int arm, const FeatureMap& map);
void build_features_into(const Vector& x, int arm, const FeatureMap& map, Eigen::Ref<Vector> out);

/// One row per record.
Matrix design_matrix(const LoggedDataset& ds, const FeatureMap& map);
Vector outcome_vector(const LoggedDataset& ds);

}  // namespace iswerm
