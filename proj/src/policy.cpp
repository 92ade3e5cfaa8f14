#include "iswerm/policy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace iswerm {

std::size_t TablePolicy::locate(const Vector& x) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < support->size(); ++i) {
        const double dist = ((*support)[i] - x).squaredNorm();
        if (dist < best_d) {
            best_d = dist;
            best = i;
        }
    }
    return best;
}

int TreePolicy::operator()(const Vector& x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
        const auto& n = nodes[static_cast<std::size_t>(i)];
        i = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].arm;
}

int TreePolicy::depth() const {
    std::function<int(int)> rec = [&](int i) -> int {
        const auto& n = nodes[static_cast<std::size_t>(i)];
        return n.feature < 0 ? 0 : 1 + std::max(rec(n.left), rec(n.right));
    };
    return nodes.empty() ? 0 : rec(0);
}

int act(const Policy& policy, const Vector& x) {
    return std::visit([&](const auto& p) { return p(x); }, policy);
}

ScoreFn as_score(const Policy& policy) {
    return [policy](const ContextDraw& draw, int arm) { return act(policy, draw.x) == arm ? 1.0 : 0.0; };
}

FinitePolicyClass FinitePolicyClass::all_tables(std::vector<Vector> support, int num_arms) {
    const std::vector<int> fixed(support.size(), 0);
    const std::vector<bool> free(support.size(), true);
    return product_class(std::move(support), num_arms, fixed, free);
}

FinitePolicyClass FinitePolicyClass::product_class(std::vector<Vector> support, int num_arms,
                                                   const std::vector<int>& fixed, const std::vector<bool>& free) {
    if (fixed.size() != support.size() || free.size() != support.size())
        throw Error("product policy class: per-cell specification has the wrong length");
    FinitePolicyClass cls;
    cls.support = std::make_shared<const std::vector<Vector>>(std::move(support));
    std::vector<int> current = fixed;
    std::vector<std::size_t> free_cells;
    for (std::size_t i = 0; i < free.size(); ++i)
        if (free[i]) {
            free_cells.push_back(i);
            current[i] = 0;
        }
    // Odometer with the first free cell most significant.
    while (true) {
        cls.tables.push_back(current);
        std::size_t pos = free_cells.size();
        while (pos > 0) {
            const std::size_t cell = free_cells[pos - 1];
            if (++current[cell] < num_arms) break;
            current[cell] = 0;
            --pos;
        }
        if (pos == 0) break;
    }
    return cls;
}

std::vector<double> quantile_thresholds(std::vector<double> values, int quantiles) {
    if (values.empty() || quantiles < 1) return {};
    std::sort(values.begin(), values.end());
    std::vector<double> out;
    const auto n = values.size();
    for (int q = 1; q <= quantiles; ++q) {
        // Lower empirical quantile at level q / (quantiles + 1).
        const double level = static_cast<double>(q) / (quantiles + 1);
        auto pos = static_cast<std::size_t>(std::floor(level * static_cast<double>(n - 1)));
        out.push_back(values[pos]);
    }
    out.erase(std::unique(out.begin(), out.end()), out.end());
    // A threshold at the maximum sends everything left; it adds nothing.
    std::erase_if(out, [&](double t) { return t >= values.back(); });
    return out;
}

namespace {

std::vector<double> per_record_cost(const LoggedDataset& ds, const Vector& weights, double sign) {
    if (static_cast<std::size_t>(weights.size()) != ds.size()) throw Error("weights and dataset sizes differ");
    std::vector<double> c(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        c[i] = weights[static_cast<Index>(i)] * sign * ds.records[i].outcome;
    return c;
}

struct TreeSearch {
    const LoggedDataset& ds;
    const std::vector<double>& cost;
    std::vector<std::vector<double>> thresholds;
    int num_arms;

    struct Result {
        double risk = 0.0;  // unnormalized sum
        std::vector<TreePolicy::Node> nodes;
    };

    Result best_leaf(const std::vector<std::size_t>& idx) const {
        std::vector<double> per_arm(static_cast<std::size_t>(num_arms), 0.0);
        for (auto i : idx) per_arm[static_cast<std::size_t>(ds.records[i].action)] += cost[i];
        int arm = 0;
        for (int a = 1; a < num_arms; ++a)
            if (per_arm[static_cast<std::size_t>(a)] < per_arm[static_cast<std::size_t>(arm)]) arm = a;
        Result r;
        r.risk = per_arm[static_cast<std::size_t>(arm)];
        r.nodes.push_back({-1, 0.0, -1, -1, arm});
        return r;
    }

    Result search(const std::vector<std::size_t>& idx, int depth) const {
        Result best = best_leaf(idx);
        if (depth == 0) return best;
        std::vector<std::size_t> left, right;
        for (std::size_t j = 0; j < thresholds.size(); ++j) {
            for (double thr : thresholds[j]) {
                left.clear();
                right.clear();
                for (auto i : idx) (ds.records[i].context[static_cast<Index>(j)] <= thr ? left : right).push_back(i);
                Result l = search(left, depth - 1);
                Result r = search(right, depth - 1);
                const double risk = l.risk + r.risk;
                if (risk < best.risk) {
                    best.risk = risk;
                    best.nodes.clear();
                    best.nodes.push_back({static_cast<int>(j), thr, 1, static_cast<int>(1 + l.nodes.size()), 0});
                    const int offset_l = 1;
                    const int offset_r = static_cast<int>(1 + l.nodes.size());
                    for (auto n : l.nodes) {
                        if (n.feature >= 0) {
                            n.left += offset_l;
                            n.right += offset_l;
                        }
                        best.nodes.push_back(n);
                    }
                    for (auto n : r.nodes) {
                        if (n.feature >= 0) {
                            n.left += offset_r;
                            n.right += offset_r;
                        }
                        best.nodes.push_back(n);
                    }
                }
            }
        }
        return best;
    }
};

}  // namespace

double policy_empirical_risk(const LoggedDataset& ds, const Vector& weights, const Policy& policy,
                             const PolicyLearnOptions& options) {
    if (ds.size() == 0) throw Error("empty dataset");
    const auto cost = per_record_cost(ds, weights, options.cost_sign);
    double sum = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (act(policy, ds.records[i].context) == ds.records[i].action) sum += cost[i];
    return sum / static_cast<double>(ds.size());
}

PolicyFit fit_policy_iswerm(const LoggedDataset& ds, const Vector& weights, const PolicyClass& policy_class,
                            const PolicyLearnOptions& options) {
    if (ds.size() == 0) throw Error("empty dataset");
    const auto cost = per_record_cost(ds, weights, options.cost_sign);
    const double T = static_cast<double>(ds.size());

    if (const auto* finite = std::get_if<FinitePolicyClass>(&policy_class)) {
        if (finite->tables.empty()) throw Error("policy class is empty");
        const std::size_t cells = finite->support->size();
        for (const auto& table : finite->tables)
            if (table.size() != cells) throw Error("policy table length differs from support size");
        // Sufficient statistics: S[cell][arm] = sum of weighted costs.
        const TablePolicy probe{finite->support, {}};
        Matrix S = Matrix::Zero(static_cast<Index>(cells), ds.num_arms);
        for (std::size_t i = 0; i < ds.size(); ++i)
            S(static_cast<Index>(probe.locate(ds.records[i].context)), ds.records[i].action) += cost[i];
        std::size_t best = 0;
        double best_risk = std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < finite->tables.size(); ++p) {
            double risk = 0.0;
            for (std::size_t c = 0; c < cells; ++c) {
                const int arm = finite->tables[p][c];
                if (arm < 0 || arm >= ds.num_arms) throw Error("policy arm out of range");
                risk += S(static_cast<Index>(c), arm);
            }
            if (risk < best_risk) {
                best_risk = risk;
                best = p;
            }
        }
        return {finite->member(best), best_risk / T, best};
    }

    const auto& tree = std::get<TreePolicyClass>(policy_class);
    if (tree.depth < 0) throw Error("tree policy depth must be >= 0");
    TreeSearch search{ds, cost, {}, ds.num_arms};
    for (int j = 0; j < ds.context_dim; ++j) {
        std::vector<double> values;
        values.reserve(ds.size());
        for (const auto& r : ds.records) values.push_back(r.context[j]);
        search.thresholds.push_back(quantile_thresholds(std::move(values), tree.quantiles));
    }
    std::vector<std::size_t> all(ds.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    auto result = search.search(all, tree.depth);
    return {TreePolicy{std::move(result.nodes)}, result.risk / T, 0};
}

nlohmann::json policy_to_json(const Policy& policy) {
    if (const auto* table = std::get_if<TablePolicy>(&policy)) {
        nlohmann::json support = nlohmann::json::array();
        for (const auto& x : *table->support) support.push_back(std::vector<double>(x.data(), x.data() + x.size()));
        return {{"type", "table"}, {"support", support}, {"arms", table->arms}};
    }
    const auto& tree = std::get<TreePolicy>(policy);
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes)
        nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right},
                         {"arm", n.arm}});
    return {{"type", "tree"}, {"nodes", nodes}};
}

FinitePolicyClass finite_class_from_json(const nlohmann::json& j) {
    std::vector<Vector> support;
    for (const auto& p : j.at("support")) {
        auto v = p.get<std::vector<double>>();
        support.push_back(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
    }
    if (support.empty()) throw Error("finite policy class needs a support");
    FinitePolicyClass cls;
    cls.support = std::make_shared<const std::vector<Vector>>(std::move(support));
    for (const auto& t : j.at("policies")) cls.tables.push_back(t.get<std::vector<int>>());
    for (const auto& t : cls.tables)
        if (t.size() != cls.support->size()) throw Error("policy table length differs from support size");
    if (cls.tables.empty()) throw Error("policy class is empty");
    return cls;
}

Policy policy_from_json(const nlohmann::json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type == "table") {
        std::vector<Vector> support;
        for (const auto& p : j.at("support")) {
            auto v = p.get<std::vector<double>>();
            support.push_back(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
        }
        TablePolicy t{std::make_shared<const std::vector<Vector>>(std::move(support)),
                      j.at("arms").get<std::vector<int>>()};
        if (t.arms.size() != t.support->size() || t.arms.empty()) throw Error("table policy arms do not match support");
        return t;
    }
    if (type != "tree") throw Error("unknown policy type '" + type + "'");
    TreePolicy tree;
    for (const auto& n : j.at("nodes"))
        tree.nodes.push_back({n.at("feature").get<int>(), n.at("threshold").get<double>(), n.at("left").get<int>(),
                              n.at("right").get<int>(), n.at("arm").get<int>()});
    if (tree.nodes.empty()) throw Error("tree policy has no nodes");
    const int count = static_cast<int>(tree.nodes.size());
    for (const auto& n : tree.nodes)
        if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count))
            throw Error("tree policy has a dangling child index");
    return tree;
}

}  // namespace iswerm
