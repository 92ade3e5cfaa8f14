#pragma once

#include "iswerm/dataset.hpp"
#include "iswerm/environment.hpp"

#include <json.hpp>

#include <memory>
#include <variant>
#include <vector>

namespace iswerm {

/// Deterministic policy given by an arm per support point; contexts map to the
/// nearest support point.
struct TablePolicy {
    std::shared_ptr<const std::vector<Vector>> support;
    std::vector<int> arms;

    std::size_t locate(const Vector& x) const;
    int operator()(const Vector& x) const { return arms[locate(x)]; }
};

/// Axis-aligned decision tree with arm-valued leaves. Node 0 is the root.
struct TreePolicy {
    struct Node {
        int feature = -1;  ///< -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        int arm = 0;
        bool operator==(const Node&) const = default;
    };
    std::vector<Node> nodes;

    int operator()(const Vector& x) const;
    int depth() const;
};

using Policy = std::variant<TablePolicy, TreePolicy>;

int act(const Policy& policy, const Vector& x);
/// f_h(x, a) = 1{h(x) = a}
ScoreFn as_score(const Policy& policy);

/// Explicit finite class of table policies over a shared support.
struct FinitePolicyClass {
    std::shared_ptr<const std::vector<Vector>> support;
    std::vector<std::vector<int>> tables;

    std::size_t size() const { return tables.size(); }
    TablePolicy member(std::size_t i) const { return {support, tables[i]}; }

    /// Every map from support points to arms, in lexicographic order.
    static FinitePolicyClass all_tables(std::vector<Vector> support, int num_arms);
    /// All maps on the `free` cells; other cells fixed to `fixed` arms.
    static FinitePolicyClass product_class(std::vector<Vector> support, int num_arms,
                                           const std::vector<int>& fixed, const std::vector<bool>& free);
};

/// Depth-limited trees with thresholds on a per-feature quantile grid of the
/// training contexts.
struct TreePolicyClass {
    int depth = 1;
    int quantiles = 16;
};

using PolicyClass = std::variant<FinitePolicyClass, TreePolicyClass>;

struct PolicyLearnOptions {
    /// Multiplies outcomes so that lower risk is better (-1 for reward outcomes).
    double cost_sign = 1.0;
};

struct PolicyFit {
    Policy policy;
    double risk = 0.0;       ///< (1/T) sum_t w_t c y_t 1{h(X_t) = A_t}
    std::size_t index = 0;   ///< position in the finite class (finite classes only)
};

/// Empirical ISWERM risk of a fixed policy.
double policy_empirical_risk(const LoggedDataset& ds, const Vector& weights, const Policy& policy,
                             const PolicyLearnOptions& options = {});

/// Exhaustive ISWERM argmin over the class; ties go to the first member in
/// enumeration order (leaves before splits, arms ascending, then features and
/// thresholds ascending, left subtree before right).
PolicyFit fit_policy_iswerm(const LoggedDataset& ds, const Vector& weights, const PolicyClass& policy_class,
                            const PolicyLearnOptions& options = {});

/// Quantile thresholds used by the tree class for one feature.
std::vector<double> quantile_thresholds(std::vector<double> values, int quantiles);

nlohmann::json policy_to_json(const Policy& policy);
Policy policy_from_json(const nlohmann::json& j);
FinitePolicyClass finite_class_from_json(const nlohmann::json& j);

}  // namespace iswerm
