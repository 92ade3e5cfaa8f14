#include "iswerm/environment.hpp"
#include "iswerm/evaluation.hpp"
#include "iswerm/policy.hpp"

#include <doctest.h>

using namespace iswerm;

namespace {

ScoreFn uniform_policy(int K) {
    return [K](const ContextDraw&, int) { return 1.0 / K; };
}

TablePolicy table(const DiscreteEnvironment& env, std::vector<int> arms) {
    return {std::make_shared<const std::vector<Vector>>(env.support()), std::move(arms)};
}

ClassificationTable tiny_table() {
    ClassificationTable t;
    t.features = Matrix(4, 1);
    t.features << -1, -0.5, 0.5, 1;
    t.labels = {0, 1, 1, 0};
    t.num_classes = 2;
    t.column_names = {"x"};
    t.class_names = {"a", "b"};
    return t;
}

}  // namespace

TEST_CASE("zero-coefficient linear environment") {
    const LinearEnvironment env(Matrix::Zero(3, 3), 1.0);
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        const auto d = env.sample_context(rng);
        CHECK(d.x.size() == 2);
        CHECK(d.x.cwiseAbs().maxCoeff() <= 1.0);
        for (int a = 0; a < 3; ++a) CHECK(env.mean_outcome(d, a) == 0.0);
    }
    // MC value of the uniform policy: 0 within 3 SE of pure noise.
    const auto est = reference_risk_mc(uniform_policy(3), env, LossKind::PolicyValue, 1000000, 9);
    CHECK(std::abs(est.value) <= 3.0 * est.se);
}

TEST_CASE("sign-symmetric linear environment") {
    Matrix theta(2, 2);
    theta << 0, 1, 0, -1;
    const LinearEnvironment env(theta, 0.5);
    CHECK(env.outcome_bound() == 1.0);
    for (double x : {-0.9, -0.1, 0.1, 0.9}) {
        ContextDraw d{Vector::Constant(1, x)};
        const int best = env.mean_outcome(d, 0) < env.mean_outcome(d, 1) ? 0 : 1;
        CHECK(best == (x < 0 ? 0 : 1));
    }
}

TEST_CASE("synthetic environments respect the declared bound") {
    Rng rng(4);
    const std::vector<EnvironmentPtr> envs{make_synthetic_linear(3, 3, 7, 1.0), make_synthetic_quadratic(2, 3, 7, 1.0),
                                           make_synthetic_step(2, 4, 7, 1.0)};
    for (const auto& env : envs) {
        for (int i = 0; i < 2000; ++i) {
            const auto d = env->sample_context(rng);
            REQUIRE(d.x.allFinite());
            REQUIRE(d.x.size() == env->context_dim());
            for (int a = 0; a < env->num_arms(); ++a)
                REQUIRE(std::abs(env->mean_outcome(d, a)) <= env->outcome_bound() + 1e-12);
        }
    }
}

TEST_CASE("environments are pure functions of their seeds") {
    const auto a = make_synthetic_linear(2, 3, 42, 1.0);
    const auto b = make_synthetic_linear(2, 3, 42, 1.0);
    CHECK(a->theta() == b->theta());
    CHECK(make_synthetic_linear(2, 3, 43, 1.0)->theta() != a->theta());
    Rng r1(5), r2(5);
    for (int i = 0; i < 50; ++i) {
        const auto d1 = a->sample_context(r1);
        const auto d2 = b->sample_context(r2);
        CHECK(d1.x == d2.x);
        CHECK(a->sample_outcome(d1, 1, r1) == b->sample_outcome(d2, 1, r2));
    }
}

TEST_CASE("discrete environment examples") {
    SUBCASE("single context") {
        Matrix mu(1, 2);
        mu << 0, 1;
        const auto env = make_discrete(one_hot_support(1), Vector::Ones(1), mu, 0.0);
        CHECK(env->optimal_arms() == std::vector<int>{0});
        CHECK(env->optimal_value() == 0.0);
    }
    SUBCASE("two symmetric contexts") {
        Matrix mu(2, 2);
        mu << 0, 1, 1, 0;
        const auto env = make_discrete(one_hot_support(2), Vector::Constant(2, 0.5), mu, 0.0);
        CHECK(env->optimal_value() == 0.0);
        CHECK(env->optimal_arms() == std::vector<int>{0, 1});
        // Uniform policy: (1/2)(0 + 1)/2 + (1/2)(1 + 0)/2 = 0.5
        const double r = exact_reference_risk(*env, uniform_policy(2), ReferenceWeight::constant_one(),
                                              LossKind::PolicyValue);
        CHECK(r == doctest::Approx(0.5).epsilon(1e-15));
        const double opt = exact_reference_risk(*env, as_score(Policy{table(*env, {0, 1})}),
                                                ReferenceWeight::constant_one(), LossKind::PolicyValue);
        CHECK(opt == 0.0);
    }
    SUBCASE("oracle predictor leaves only noise") {
        Matrix mu(3, 2);
        mu << 0.1, -0.2, 0.3, 0.4, -0.5, 0.6;
        Matrix sd(3, 2);
        sd << 0.5, 1.0, 0.2, 0.3, 0.7, 0.1;
        Vector p(3);
        p << 0.2, 0.3, 0.5;
        const auto env = make_discrete(one_hot_support(3), p, mu, sd);
        const ScoreFn oracle = [&](const ContextDraw& d, int a) { return mu(static_cast<Index>(d.cell), a); };
        double expected = 0.0;
        for (int x = 0; x < 3; ++x)
            for (int a = 0; a < 2; ++a) expected += p[x] * sd(x, a) * sd(x, a);
        CHECK(exact_reference_risk(*env, oracle, ReferenceWeight::constant_one(), LossKind::Squared) ==
              doctest::Approx(expected).epsilon(1e-14));
        // Constant noise sd: sum_x p(x) K sigma^2.
        const auto flat = make_discrete(one_hot_support(3), p, mu, 0.5);
        CHECK(exact_reference_risk(*flat, oracle, ReferenceWeight::constant_one(), LossKind::Squared) ==
              doctest::Approx(2 * 0.25).epsilon(1e-14));
    }
}

TEST_CASE("discrete environment validation") {
    Matrix mu = Matrix::Zero(2, 2);
    CHECK_THROWS_AS(make_discrete(one_hot_support(2), Vector::Constant(2, 0.4), mu, 1.0), Error);
    Vector neg(2);
    neg << 1.5, -0.5;
    CHECK_THROWS_AS(make_discrete(one_hot_support(2), neg, mu, 1.0), Error);
    CHECK_THROWS_AS(make_discrete(one_hot_support(3), Vector::Constant(3, 1.0 / 3), mu, 1.0), Error);
    mu(0, 0) = std::nan("");
    CHECK_THROWS_AS(make_discrete(one_hot_support(2), Vector::Constant(2, 0.5), mu, 1.0), Error);
}

TEST_CASE("MC reference risk agrees with the finite sum") {
    Matrix mu(4, 3);
    mu << 0.2, -0.4, 0.9, -1, 0.5, 0.1, 0.3, 0.3, -0.2, 0.8, -0.6, 0.0;
    Vector p(4);
    p << 0.1, 0.2, 0.3, 0.4;
    const auto env = make_discrete(one_hot_support(4), p, mu, 0.7);
    const ScoreFn f = [](const ContextDraw& d, int a) { return 0.1 * static_cast<double>(d.cell) - 0.2 * a; };
    // Test MSE targets the uniform sampler; the policy value is rescaled to g* = 1.
    for (auto kind : {LossKind::Squared, LossKind::PolicyValue}) {
        const auto gstar =
            kind == LossKind::Squared ? ReferenceWeight::uniform_density() : ReferenceWeight::constant_one();
        const double exact = exact_reference_risk(*env, f, gstar, kind);
        const auto mc = reference_risk_mc(f, *env, kind, 100000, 17);
        CHECK(std::abs(mc.value - exact) <= 4.0 * mc.se);
    }
}

TEST_CASE("classification environment rewards") {
    const auto env = make_classification_env(tiny_table());
    CHECK(env->cost_sign() == -1.0);
    CHECK_FALSE(env->mean_known());
    CHECK(env->outcome_bound() == 1.0);
    Rng rng(8);
    double sum_match = 0.0, sum_miss = 0.0, ss_miss = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const auto d = env->sample_context(rng);
        const int label = env->table().labels[d.cell];
        CHECK(env->mean_outcome(d, label) == 1.0);
        CHECK(env->mean_outcome(d, 1 - label) == 0.0);
        sum_match += env->sample_outcome(d, label, rng);
        const double y = env->sample_outcome(d, 1 - label, rng);
        sum_miss += y;
        ss_miss += y * y;
    }
    // 3 sigma of a mean of n unit-variance draws is ~0.0095.
    CHECK(std::abs(sum_match / n - 1.0) < 0.01);
    CHECK(std::abs(sum_miss / n) < 0.01);
    CHECK(std::abs(ss_miss / n - 1.0) < 0.03);
}

TEST_CASE("exact risk refuses continuous environments") {
    const auto env = make_synthetic_linear(1, 2, 1, 1.0);
    CHECK_THROWS_AS(exact_reference_risk(*env, uniform_policy(2), ReferenceWeight::constant_one(),
                                         LossKind::Squared),
                    Error);
}
