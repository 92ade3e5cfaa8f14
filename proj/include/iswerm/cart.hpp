#pragma once

#include "iswerm/types.hpp"

#include <vector>

namespace iswerm {

struct CartOptions {
    int max_depth = -1;            ///< negative: unlimited
    double min_leaf_weight = 0.0;  ///< every child must carry at least this much weight
};

/// Regression tree over raw feature vectors. Node 0 is the root.
struct TreeModel {
    struct Node {
        int feature = -1;  ///< -1 marks a leaf
        double threshold = 0.0;
        int left = -1;   ///< x[feature] <= threshold
        int right = -1;  ///< x[feature] > threshold
        double value = 0.0;
        double weight = 0.0;

        bool is_leaf() const { return feature < 0; }
        bool operator==(const Node&) const = default;
    };

    std::vector<Node> nodes;
    int max_depth = -1;
    double min_leaf_weight = 0.0;

    double predict(const Eigen::Ref<const Vector>& features) const;
    int depth() const;
    std::size_t leaf_count() const;
    bool same_structure(const TreeModel& other) const;
};

/// Greedy weighted CART. Splits maximize the weighted SSE reduction over
/// midpoints between consecutive distinct values; ties go to the lower feature
/// index, then the lower threshold. Zero-weight rows are ignored entirely.
TreeModel fit_cart(const Matrix& X, const Vector& y, const Vector& w, const CartOptions& options = {});

/// Weighted sum of squared training residuals.
double tree_sse(const TreeModel& tree, const Matrix& X, const Vector& y, const Vector& w);

}  // namespace iswerm
