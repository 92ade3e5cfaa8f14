#include "iswerm/collector.hpp"
#include "iswerm/policy.hpp"
#include "iswerm/weights.hpp"

#include <doctest.h>

using namespace iswerm;

namespace {

// Independent re-evaluation: (1/T) sum_t w_t c y_t 1{h(X_t) = A_t} with the
// arm read off the cell by exact support match.
double brute_risk(const LoggedDataset& ds, const Vector& w, const std::vector<Vector>& support,
                  const std::vector<int>& arms, double c = 1.0) {
    double s = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& r = ds.records[i];
        std::size_t cell = 0;
        while (!(support[cell] == r.context)) ++cell;
        if (arms[cell] == r.action) s += w[static_cast<Index>(i)] * c * r.outcome;
    }
    return s / static_cast<double>(ds.size());
}

std::shared_ptr<DiscreteEnvironment> gap_one_env() {
    Matrix mu(2, 2);
    mu << 0, 1, 1, 0;
    return make_discrete(one_hot_support(2), Vector::Constant(2, 0.5), mu, 1.0);
}

GreedyModelSpec doubling() {
    GreedyModelSpec s;
    s.cadence = GreedyModelSpec::Cadence::Doubling;
    return s;
}

}  // namespace

TEST_CASE("singleton class returns its member") {
    const auto env = gap_one_env();
    const auto ds = collect(*env, {0.0, 0.0}, {}, 50, 1);
    FinitePolicyClass cls{std::make_shared<const std::vector<Vector>>(env->support()), {{1, 1}}};
    const auto fit = fit_policy_iswerm(ds, compute_weights(WeightScheme::ISWERM, ds), cls);
    CHECK(std::get<TablePolicy>(fit.policy).arms == std::vector<int>{1, 1});
    CHECK(fit.index == 0);
}

TEST_CASE("hand-computed two-policy comparison") {
    LoggedDataset ds;
    ds.num_arms = 2;
    ds.context_dim = 1;
    const Vector x = Vector::Zero(1);
    ds.records = {{1, x, 0, 2.0, 0.5, 1.0}, {2, x, 1, 1.0, 0.25, 1.0}, {3, x, 0, -1.0, 0.5, 1.0}};
    const Vector w = compute_weights(WeightScheme::ISWERM, ds);  // 2, 4, 2
    const auto support = std::make_shared<const std::vector<Vector>>(std::vector<Vector>{x});
    // Arm 0: (2*2 + 2*(-1)) / 3 = 2/3. Arm 1: 4*1 / 3 = 4/3.
    FinitePolicyClass cls{support, {{1}, {0}}};
    const auto fit = fit_policy_iswerm(ds, w, cls);
    CHECK(fit.index == 1);
    CHECK(fit.risk == doctest::Approx(2.0 / 3.0));
    CHECK(policy_empirical_risk(ds, w, Policy{cls.member(0)}) == doctest::Approx(4.0 / 3.0));
    // Reward outcomes flip the preference.
    const auto rewards = fit_policy_iswerm(ds, w, cls, {-1.0});
    CHECK(rewards.index == 0);
}

TEST_CASE("exhaustive search matches a brute-force argmin") {
    Matrix mu(3, 3);
    mu << 0.2, -0.1, 0.5, 0.0, 0.3, -0.4, 0.6, 0.1, 0.1;
    Vector p(3);
    p << 0.5, 0.3, 0.2;
    const auto env = make_discrete(one_hot_support(3), p, mu, 1.0);
    const auto cls = FinitePolicyClass::all_tables(env->support(), 3);
    REQUIRE(cls.size() == 27);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto ds = collect(*env, {1.0 / 3.0, 0.0}, {}, 300, seed);
        const Vector w = compute_weights(WeightScheme::ISWERM, ds);
        const auto fit = fit_policy_iswerm(ds, w, cls);
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t i = 0; i < cls.size(); ++i) {
            const double r = brute_risk(ds, w, env->support(), cls.tables[i]);
            if (r < best - 1e-12) {
                best = r;
                arg = i;
            }
        }
        CHECK(fit.index == arg);
        CHECK(fit.risk == doctest::Approx(best).epsilon(1e-12));
        // Multiplying the weights by c > 0 keeps the selection.
        CHECK(fit_policy_iswerm(ds, (5.5 * w).eval(), cls).index == fit.index);
    }
}

TEST_CASE("product class fixes the non-free cells") {
    const auto cls = FinitePolicyClass::product_class(one_hot_support(3), 2, {1, 0, 1}, {true, false, true});
    CHECK(cls.size() == 4);
    for (const auto& t : cls.tables) CHECK(t[1] == 0);
    CHECK_THROWS_AS(FinitePolicyClass::product_class(one_hot_support(3), 2, {1, 0}, {true, false, true}), Error);
}

TEST_CASE("tree class search is exhaustive at depth one") {
    const auto env = make_synthetic_step(2, 3, 4, 0.5);
    const auto ds = collect(*env, {0.0, 0.0}, {}, 400, 6);
    const Vector w = compute_weights(WeightScheme::ISWERM, ds);
    const TreePolicyClass cls{1, 8};
    const auto fit = fit_policy_iswerm(ds, w, cls);

    double best = std::numeric_limits<double>::infinity();
    auto risk_of = [&](auto rule) {
        double s = 0.0;
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (rule(ds.records[i].context) == ds.records[i].action) s += w[static_cast<Index>(i)] * ds.records[i].outcome;
        return s / static_cast<double>(ds.size());
    };
    for (int a = 0; a < 3; ++a) best = std::min(best, risk_of([a](const Vector&) { return a; }));
    for (int j = 0; j < 2; ++j) {
        std::vector<double> values;
        for (const auto& r : ds.records) values.push_back(r.context[j]);
        for (double thr : quantile_thresholds(values, 8))
            for (int l = 0; l < 3; ++l)
                for (int r = 0; r < 3; ++r)
                    best = std::min(best, risk_of([&](const Vector& x) { return x[j] <= thr ? l : r; }));
    }
    CHECK(fit.risk == doctest::Approx(best).epsilon(1e-12));
    CHECK(std::get<TreePolicy>(fit.policy).depth() <= 1);
}

TEST_CASE("uniform logging recovers the optimal policy") {
    const auto env = gap_one_env();
    const auto cls = FinitePolicyClass::all_tables(env->support(), 2);
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto ds = collect(*env, {0.0, 0.0}, doubling(), 10000, 1000 + seed);
        const auto fit = fit_policy_iswerm(ds, compute_weights(WeightScheme::ISWERM, ds), cls);
        hits += std::get<TablePolicy>(fit.policy).arms == env->optimal_arms();
    }
    CHECK(hits >= 95);
}

TEST_CASE("policy json") {
    const auto env = gap_one_env();
    const Policy table = TablePolicy{std::make_shared<const std::vector<Vector>>(env->support()), {1, 0}};
    const auto back = policy_from_json(policy_to_json(table));
    CHECK(std::get<TablePolicy>(back).arms == std::vector<int>{1, 0});
    CHECK(act(back, env->support()[0]) == 1);

    TreePolicy tree;
    tree.nodes = {{0, 0.25, 1, 2, 0}, {-1, 0, -1, -1, 2}, {-1, 0, -1, -1, 1}};
    const auto tback = std::get<TreePolicy>(policy_from_json(policy_to_json(Policy{tree})));
    CHECK(tback.nodes == tree.nodes);
    CHECK(tback(Vector::Constant(1, 0.0)) == 2);
    CHECK(tback(Vector::Constant(1, 1.0)) == 1);

    auto bad = policy_to_json(Policy{tree});
    bad["nodes"][0]["left"] = 7;
    CHECK_THROWS_AS(policy_from_json(bad), Error);
}
