#include "iswerm/cart.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

namespace iswerm {

double TreeModel::predict(const Eigen::Ref<const Vector>& features) const {
    if (nodes.empty()) throw Error("predict on an unfitted tree");
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
        const auto& n = nodes[static_cast<std::size_t>(i)];
        if (n.feature >= features.size()) throw Error("tree feature index exceeds input dimension");
        i = features[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
}

int TreeModel::depth() const {
    std::function<int(int)> rec = [&](int i) -> int {
        const auto& n = nodes[static_cast<std::size_t>(i)];
        return n.is_leaf() ? 0 : 1 + std::max(rec(n.left), rec(n.right));
    };
    return nodes.empty() ? 0 : rec(0);
}

std::size_t TreeModel::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.is_leaf(); }));
}

bool TreeModel::same_structure(const TreeModel& other) const {
    if (nodes.size() != other.nodes.size()) return false;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& a = nodes[i];
        const auto& b = other.nodes[i];
        if (a.feature != b.feature || a.left != b.left || a.right != b.right) return false;
        if (!a.is_leaf() && a.threshold != b.threshold) return false;
    }
    return true;
}

namespace {

struct Builder {
    const Matrix& X;
    const Vector& y;
    const Vector& w;
    CartOptions options;
    TreeModel tree;
    std::vector<Index> order;  // scratch

    int build(std::vector<Index>& idx, int depth) {
        double wsum = 0.0, wy = 0.0;
        double ymin = std::numeric_limits<double>::infinity();
        double ymax = -ymin;
        for (Index i : idx) {
            wsum += w[i];
            wy += w[i] * y[i];
            ymin = std::min(ymin, y[i]);
            ymax = std::max(ymax, y[i]);
        }
        const int self = static_cast<int>(tree.nodes.size());
        TreeModel::Node node;
        node.value = wy / wsum;
        node.weight = wsum;
        tree.nodes.push_back(node);

        const bool depth_left = options.max_depth < 0 || depth < options.max_depth;
        if (!depth_left || ymin == ymax || wsum < 2.0 * options.min_leaf_weight || idx.size() < 2) return self;

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_gain = 0.0;
        // Gains within round-off of each other count as ties so that rescaling w keeps the tree.
        const double tol = 1e-12 * wsum * (ymax - ymin) * (ymax - ymin);
        for (Index j = 0; j < X.cols(); ++j) {
            order = idx;
            std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return X(a, j) < X(b, j); });
            double wl = 0.0, wyl = 0.0;
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                const Index r = order[k];
                wl += w[r];
                wyl += w[r] * y[r];
                const double here = X(r, j);
                const double next = X(order[k + 1], j);
                if (!(here < next)) continue;
                const double wr = wsum - wl;
                if (wl < options.min_leaf_weight || wr < options.min_leaf_weight) continue;
                if (wl <= 0.0 || wr <= 0.0) continue;
                const double diff = wyl / wl - (wy - wyl) / wr;
                // SSE(parent) - SSE(left) - SSE(right) = wl wr / W (mean_l - mean_r)^2
                const double gain = wl * wr / wsum * diff * diff;
                if (gain > best_gain + tol) {
                    best_gain = gain;
                    best_feature = static_cast<int>(j);
                    best_threshold = here + (next - here) / 2.0;
                    if (!(best_threshold < next)) best_threshold = here;
                }
            }
        }
        if (best_feature < 0) return self;

        std::vector<Index> left, right;
        for (Index i : idx) (X(i, best_feature) <= best_threshold ? left : right).push_back(i);
        idx.clear();
        idx.shrink_to_fit();
        const int l = build(left, depth + 1);
        const int r = build(right, depth + 1);
        auto& me = tree.nodes[static_cast<std::size_t>(self)];
        me.feature = best_feature;
        me.threshold = best_threshold;
        me.left = l;
        me.right = r;
        return self;
    }
};

}  // namespace

TreeModel fit_cart(const Matrix& X, const Vector& y, const Vector& w, const CartOptions& options) {
    if (X.rows() != y.size() || X.rows() != w.size()) throw Error("fit_cart: row counts differ");
    if (!w.allFinite() || (w.array() < 0).any()) throw Error("fit_cart: weights must be finite and >= 0");
    if (!(options.min_leaf_weight >= 0.0)) throw Error("fit_cart: min_leaf_weight must be >= 0");
    std::vector<Index> idx;
    for (Index i = 0; i < X.rows(); ++i)
        if (w[i] > 0.0) idx.push_back(i);
    if (idx.empty()) throw Error("fit_cart: total weight must be positive");

    Builder b{X, y, w, options, {}, {}};
    b.tree.max_depth = options.max_depth;
    b.tree.min_leaf_weight = options.min_leaf_weight;
    b.build(idx, 0);
    return std::move(b.tree);
}

double tree_sse(const TreeModel& tree, const Matrix& X, const Vector& y, const Vector& w) {
    double sse = 0.0;
    for (Index i = 0; i < X.rows(); ++i) {
        const double r = y[i] - tree.predict(X.row(i).transpose());
        sse += w[i] * r * r;
    }
    return sse;
}

}  // namespace iswerm
