#include "iswerm/cart.hpp"
#include "iswerm/collector.hpp"
#include "iswerm/cv.hpp"
#include "iswerm/features.hpp"
#include "iswerm/lasso.hpp"
#include "iswerm/model.hpp"
#include "iswerm/wls.hpp"

#include <doctest.h>

#include <random>

using namespace iswerm;

namespace {

struct Problem {
    Matrix X;
    Vector y;
    Vector w;
};

Problem random_problem(std::uint64_t seed, Index n, Index p, bool intercept = true) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u(0.1, 3.0);
    Problem pr{Matrix(n, p), Vector(n), Vector(n)};
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) pr.X(i, j) = z(rng);
        if (intercept) pr.X(i, 0) = 1.0;
        pr.w[i] = u(rng);
    }
    Vector beta(p);
    for (auto& b : beta) b = z(rng);
    pr.y = pr.X * beta;
    for (Index i = 0; i < n; ++i) pr.y[i] += z(rng);
    return pr;
}

// Independent oracle: form the normal equations entry by entry and solve with
// a full-pivot LU.
Vector normal_equation_oracle(const Problem& pr) {
    const Index p = pr.X.cols();
    Matrix A = Matrix::Zero(p, p);
    Vector b = Vector::Zero(p);
    for (Index i = 0; i < pr.X.rows(); ++i)
        for (Index j = 0; j < p; ++j) {
            b[j] += pr.w[i] * pr.X(i, j) * pr.y[i];
            for (Index k = 0; k < p; ++k) A(j, k) += pr.w[i] * pr.X(i, j) * pr.X(i, k);
        }
    return A.fullPivLu().solve(b);
}

// Direct sum form of (1/W) sum w (y - b x)^2 + 2 lambda |b|.
double lasso_1d_objective(const Vector& x, const Vector& y, const Vector& w, double lambda, double b) {
    double s = 0.0;
    for (Index i = 0; i < x.size(); ++i) s += w[i] * (y[i] - b * x[i]) * (y[i] - b * x[i]);
    return s / w.sum() + 2.0 * lambda * std::abs(b);
}

double lasso_1d_grid_oracle(const Vector& x, const Vector& y, const Vector& w, double lambda) {
    // Coarse scan, then two refinements around the best point.
    double lo = -10.0, hi = 10.0, best = 0.0;
    for (int pass = 0; pass < 3; ++pass) {
        const int n = 2000;
        double best_val = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= n; ++i) {
            const double b = lo + (hi - lo) * i / n;
            const double v = lasso_1d_objective(x, y, w, lambda, b);
            if (v < best_val) {
                best_val = v;
                best = b;
            }
        }
        const double step = (hi - lo) / n;
        lo = best - 2 * step;
        hi = best + 2 * step;
    }
    return best;
}

// Exhaustive search over midpoints for the best weighted single split of 1-D data.
double best_stump_threshold(const Vector& x, const Vector& y, const Vector& w) {
    std::vector<double> xs(x.data(), x.data() + x.size());
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    double best_sse = std::numeric_limits<double>::infinity(), best_t = 0.0;
    for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
        const double t = 0.5 * (xs[k] + xs[k + 1]);
        double sse = 0.0;
        for (int side = 0; side < 2; ++side) {
            double sw = 0.0, swy = 0.0;
            for (Index i = 0; i < x.size(); ++i)
                if ((x[i] > t) == (side == 1)) {
                    sw += w[i];
                    swy += w[i] * y[i];
                }
            const double m = swy / sw;
            for (Index i = 0; i < x.size(); ++i)
                if ((x[i] > t) == (side == 1)) sse += w[i] * (y[i] - m) * (y[i] - m);
        }
        if (sse < best_sse) {
            best_sse = sse;
            best_t = t;
        }
    }
    return best_t;
}

}  // namespace

TEST_CASE("feature maps") {
    CHECK(FeatureMap::linear(2, 3).dim() == 12);
    CHECK(FeatureMap::tree(2, 3).dim() == 5);
    CHECK(build_features(Vector::Zero(2), 1, FeatureMap::linear(2, 3)).size() == 12);
    CHECK(build_features(Vector::Zero(2), 1, FeatureMap::tree(2, 3)).size() == 5);
    const Vector phi = build_features(Vector::Zero(1), 0, FeatureMap::linear(1, 2));
    Vector expected(6);
    expected << 1, 0, 1, 0, 0, 0;
    CHECK(phi == expected);
    Vector x(2);
    x << 0.5, -2;
    Vector tree_expected(5);
    tree_expected << 0.5, -2, 0, 0, 1;
    CHECK(build_features(x, 2, FeatureMap::tree(2, 3)) == tree_expected);
}

TEST_CASE("weighted least squares") {
    SUBCASE("intercept-only weighted mean") {
        const Matrix X = Matrix::Ones(2, 1);
        const Vector y = Eigen::Vector2d(2, 4);
        const Vector w = Eigen::Vector2d(1, 3);
        CHECK(fit_wls(X, y, w)[0] == doctest::Approx(3.5).epsilon(1e-15));
    }
    SUBCASE("equal weights give ordinary least squares") {
        const auto pr = random_problem(1, 30, 4);
        const Vector ols = pr.X.colPivHouseholderQr().solve(pr.y);
        CHECK((fit_wls(pr.X, pr.y, Vector::Constant(30, 2.5)) - ols).cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("normal-equation oracle on random 20 x 3 instances") {
        for (std::uint64_t s = 0; s < 20; ++s) {
            const auto pr = random_problem(100 + s, 20, 3);
            CHECK((fit_wls(pr.X, pr.y, pr.w) - normal_equation_oracle(pr)).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
    SUBCASE("solution beats random perturbations") {
        const auto pr = random_problem(7, 40, 5);
        const WlsOptions opt{0.3, Index{0}};
        const Vector theta = fit_wls(pr.X, pr.y, pr.w, opt);
        const double best = wls_objective(pr.X, pr.y, pr.w, theta, opt);
        std::mt19937_64 rng(8);
        std::normal_distribution<double> z(0.0, 0.05);
        for (int i = 0; i < 100; ++i) {
            Vector t = theta;
            for (auto& v : t) v += z(rng);
            CHECK(best <= wls_objective(pr.X, pr.y, pr.w, t, opt));
        }
    }
    SUBCASE("scale invariance") {
        const auto pr = random_problem(9, 25, 3);
        CHECK(fit_wls(pr.X, pr.y, pr.w).isApprox(fit_wls(pr.X, pr.y, (17.0 * pr.w).eval()), 1e-10));
    }
    SUBCASE("float scalar") {
        const auto pr = random_problem(10, 25, 3);
        const Eigen::VectorXf tf = fit_wls(pr.X.cast<float>(), pr.y.cast<float>(), pr.w.cast<float>());
        CHECK((tf.cast<double>() - fit_wls(pr.X, pr.y, pr.w)).cwiseAbs().maxCoeff() < 1e-3);
    }
    SUBCASE("bad inputs") {
        const auto pr = random_problem(11, 5, 2);
        CHECK_THROWS_AS(fit_wls(pr.X, pr.y, Vector::Zero(5)), Error);
        CHECK_THROWS_AS(fit_wls(pr.X, pr.y, (-pr.w).eval()), Error);
        CHECK_THROWS_AS(fit_wls(pr.X, pr.y.head(4), pr.w), Error);
    }
}

TEST_CASE("weighted lasso") {
    SUBCASE("zero penalty equals weighted least squares") {
        const auto pr = random_problem(20, 50, 4);
        const auto r = fit_lasso_cd(pr.X, pr.y, pr.w, {.lambda = 0.0, .tol = 1e-13, .intercept = Index{0}});
        CHECK(r.converged);
        CHECK((r.coefficients - fit_wls(pr.X, pr.y, pr.w)).cwiseAbs().maxCoeff() < 1e-6);
    }
    SUBCASE("kill condition") {
        const auto pr = random_problem(21, 60, 5);
        const double ybar = (pr.w.array() * pr.y.array()).sum() / pr.w.sum();
        double kill = 0.0;
        for (Index j = 1; j < 5; ++j)
            kill = std::max(kill, std::abs((pr.w.array() * pr.X.col(j).array() * (pr.y.array() - ybar)).sum()) /
                                      pr.w.sum());
        const auto m = WeightedMoments<double>::compute(pr.X, pr.y, pr.w);
        CHECK(lasso_lambda_max(m, Index{0}) == doctest::Approx(kill).epsilon(1e-12));
        const auto r = fit_lasso_cd(m, {.lambda = kill * (1 + 1e-9), .intercept = Index{0}});
        CHECK(r.coefficients.tail(4).isZero(0.0));
        CHECK(r.coefficients[0] == doctest::Approx(ybar));
        const auto below = fit_lasso_cd(m, {.lambda = kill * 0.9, .intercept = Index{0}});
        CHECK_FALSE(below.coefficients.tail(4).isZero(0.0));
    }
    SUBCASE("single feature against a grid search") {
        std::mt19937_64 rng(22);
        std::normal_distribution<double> z;
        std::uniform_real_distribution<double> u(0.2, 2.0);
        for (int rep = 0; rep < 10; ++rep) {
            Matrix X(30, 1);
            Vector y(30), w(30);
            for (Index i = 0; i < 30; ++i) {
                X(i, 0) = z(rng);
                y[i] = 1.5 * X(i, 0) + z(rng);
                w[i] = u(rng);
            }
            for (double lambda : {0.0, 0.1, 0.5, 5.0}) {
                const auto r = fit_lasso_cd(X, y, w, {.lambda = lambda, .tol = 1e-12});
                CHECK(std::abs(r.coefficients[0] - lasso_1d_grid_oracle(X.col(0), y, w, lambda)) < 1e-4);
            }
        }
    }
    SUBCASE("objective is non-increasing across sweeps") {
        const auto pr = random_problem(23, 80, 8);
        const auto r = fit_lasso_cd(pr.X, pr.y, pr.w,
                                    {.lambda = 0.05, .tol = 1e-12, .intercept = Index{0}, .trace_objective = true});
        REQUIRE(r.objective_trace.size() >= 2);
        for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
            CHECK(r.objective_trace[i] <= r.objective_trace[i - 1] + 1e-14);
    }
    SUBCASE("iteration cap reports non-convergence") {
        const auto pr = random_problem(24, 80, 8);
        const auto r = fit_lasso_cd(pr.X, pr.y, pr.w, {.lambda = 0.01, .tol = 1e-15, .max_iter = 1});
        CHECK_FALSE(r.converged);
        CHECK(r.sweeps == 1);
    }
}

TEST_CASE("cross-validated penalty") {
    SUBCASE("singleton grid") {
        const auto pr = random_problem(30, 40, 3);
        CHECK(cv_select_lambda(PenalizedLearner::Ridge, pr.X, pr.y, pr.w, {2.5}).lambda == 2.5);
        CHECK(cv_select_lambda(PenalizedLearner::Lasso, pr.X, pr.y, pr.w, {0.3}).lambda == 0.3);
    }
    SUBCASE("duplicates do not change the result") {
        const auto pr = random_problem(31, 40, 3);
        const CvOptions opt{.folds = 4, .intercept = Index{0}};
        for (auto learner : {PenalizedLearner::Ridge, PenalizedLearner::Lasso}) {
            const auto a = cv_select_lambda(learner, pr.X, pr.y, pr.w, {0.01, 0.1, 1.0}, opt);
            const auto b = cv_select_lambda(learner, pr.X, pr.y, pr.w, {1.0, 0.1, 0.1, 0.01, 1.0}, opt);
            CHECK(a.lambda == b.lambda);
            CHECK(a.coefficients == b.coefficients);
            CHECK(a.cv_error == b.cv_error);
        }
    }
    SUBCASE("heavy shrinkage wins on pure noise") {
        std::mt19937_64 rng(32);
        std::normal_distribution<double> z;
        int heavy = 0;
        const int reps = 100;
        for (int r = 0; r < reps; ++r) {
            Matrix X(40, 8);
            Vector y(40);
            for (Index i = 0; i < 40; ++i) {
                X(i, 0) = 1.0;
                for (Index j = 1; j < 8; ++j) X(i, j) = z(rng);
                y[i] = z(rng);
            }
            const auto res = cv_select_lambda(PenalizedLearner::Ridge, X, y, Vector::Ones(40), {0.0, 1e6},
                                              {.folds = 4, .intercept = Index{0}});
            heavy += res.lambda == 1e6;
        }
        CHECK(heavy >= 90);
    }
    SUBCASE("errors") {
        const auto pr = random_problem(33, 10, 2);
        CHECK_THROWS_AS(cv_select_lambda(PenalizedLearner::Ridge, pr.X, pr.y, pr.w, {}), Error);
        CHECK_THROWS_AS(cv_select_lambda(PenalizedLearner::Ridge, pr.X, pr.y, pr.w, {-1.0}), Error);
        CHECK_THROWS_AS(cv_select_lambda(PenalizedLearner::Ridge, pr.X, pr.y, pr.w, {1.0}, {.folds = 11}), Error);
    }
}

TEST_CASE("weighted CART") {
    SUBCASE("constant outcome is a single leaf") {
        const auto pr = random_problem(40, 30, 3, false);
        const auto tree = fit_cart(pr.X, Vector::Constant(30, 2.5), pr.w);
        CHECK(tree.nodes.size() == 1);
        CHECK(tree.predict(pr.X.row(3).transpose()) == doctest::Approx(2.5).epsilon(1e-15));
    }
    SUBCASE("step function") {
        std::mt19937_64 rng(41);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Matrix X(200, 1);
        Vector y(200);
        double below = -1.0, above = 2.0;
        for (Index i = 0; i < 200; ++i) {
            X(i, 0) = u(rng);
            y[i] = X(i, 0) > 0.5 ? 1.0 : 0.0;
            if (X(i, 0) <= 0.5) below = std::max(below, X(i, 0));
            else above = std::min(above, X(i, 0));
        }
        const auto tree = fit_cart(X, y, Vector::Ones(200), {.max_depth = 1});
        REQUIRE(tree.nodes.size() == 3);
        CHECK(tree.nodes[0].threshold > below);
        CHECK(tree.nodes[0].threshold < above);
        CHECK(tree_sse(tree, X, y, Vector::Ones(200)) == 0.0);
    }
    SUBCASE("weights on a subset equal a fit on that subset") {
        const auto pr = random_problem(42, 60, 3, false);
        Vector w = Vector::Zero(60);
        std::vector<Index> keep;
        for (Index i = 0; i < 60; i += 3) keep.push_back(i);
        Matrix Xs(static_cast<Index>(keep.size()), 3);
        Vector ys(Xs.rows()), ws(Xs.rows());
        for (std::size_t k = 0; k < keep.size(); ++k) {
            w[keep[k]] = pr.w[keep[k]];
            Xs.row(static_cast<Index>(k)) = pr.X.row(keep[k]);
            ys[static_cast<Index>(k)] = pr.y[keep[k]];
            ws[static_cast<Index>(k)] = pr.w[keep[k]];
        }
        const auto a = fit_cart(pr.X, pr.y, w, {.max_depth = 4});
        const auto b = fit_cart(Xs, ys, ws, {.max_depth = 4});
        CHECK(a.same_structure(b));
        CHECK(a.nodes == b.nodes);
    }
    SUBCASE("root split matches an exhaustive threshold search") {
        std::mt19937_64 rng(43);
        std::normal_distribution<double> z;
        std::uniform_real_distribution<double> u(0.1, 2.0);
        for (int rep = 0; rep < 30; ++rep) {
            Matrix X(25, 1);
            Vector y(25), w(25);
            for (Index i = 0; i < 25; ++i) {
                X(i, 0) = z(rng);
                y[i] = (X(i, 0) > 0.3 ? 1.0 : 0.0) + 0.5 * z(rng);
                w[i] = u(rng);
            }
            const auto tree = fit_cart(X, y, w, {.max_depth = 1});
            REQUIRE(tree.nodes.size() == 3);
            CHECK(tree.nodes[0].threshold == doctest::Approx(best_stump_threshold(X.col(0), y, w)).epsilon(1e-14));
        }
    }
    SUBCASE("training SSE is non-increasing in depth") {
        const auto pr = random_problem(44, 120, 3, false);
        double prev = std::numeric_limits<double>::infinity();
        for (int depth = 0; depth <= 8; ++depth) {
            const auto tree = fit_cart(pr.X, pr.y, pr.w, {.max_depth = depth});
            CHECK(tree.depth() <= depth);
            const double sse = tree_sse(tree, pr.X, pr.y, pr.w);
            CHECK(sse <= prev + 1e-9);
            prev = sse;
        }
    }
    SUBCASE("scale invariance and minimum leaf weight") {
        const auto pr = random_problem(45, 80, 2, false);
        const auto a = fit_cart(pr.X, pr.y, pr.w, {.max_depth = 5});
        const auto b = fit_cart(pr.X, pr.y, (3.0 * pr.w).eval(), {.max_depth = 5});
        CHECK(a.same_structure(b));
        const auto c = fit_cart(pr.X, pr.y, pr.w, {.max_depth = -1, .min_leaf_weight = 10.0});
        for (const auto& node : c.nodes)
            if (node.is_leaf()) CHECK(node.weight >= 10.0);
    }
}

TEST_CASE("regression models") {
    SUBCASE("zero coefficients predict zero") {
        const LinearModel m{Vector::Zero(12), FeatureMap::linear(2, 3)};
        CHECK(predict(m, Vector::Constant(2, 0.7), 1) == 0.0);
    }
    SUBCASE("single-leaf tree") {
        TreeRegressionModel m;
        m.feature_map = FeatureMap::tree(2, 2);
        m.tree.nodes.push_back({});
        m.tree.nodes[0].value = -1.25;
        CHECK(predict(m, Vector::Constant(2, 3.0), 0) == -1.25);
        CHECK(predict(m, Vector::Constant(2, -3.0), 1) == -1.25);
    }
    SUBCASE("basis probing recovers coefficients") {
        const auto map = FeatureMap::linear(1, 2);
        for (Index j = 0; j < map.dim(); ++j) {
            Vector c = Vector::Zero(map.dim());
            c[j] = 1.0;
            const LinearModel m{c, map};
            // phi(x=1, a) has ones on the intercept pair and the arm's block.
            const Vector phi = build_features(Vector::Ones(1), j >= 4 ? 1 : 0, map);
            CHECK(predict(m, Vector::Ones(1), j >= 4 ? 1 : 0) == phi[j]);
        }
        Vector c(6);
        c << 0.5, -1, 2, 3, 4, 5;
        CHECK(predict(LinearModel{c, map}, Vector::Constant(1, 2.0), 1) == doctest::Approx(0.5 - 2 + 4 + 10));
    }
    SUBCASE("json round trip") {
        const auto env = make_synthetic_linear(2, 3, 1, 1.0);
        const auto ds = collect(*env, {0.0, 0.0}, {}, 200, 2);
        for (auto kind : {ModelKind::Wls, ModelKind::Ridge, ModelKind::Lasso, ModelKind::Cart}) {
            const auto fit = fit_regression(kind, ds, Vector::Ones(200));
            const auto back = model_from_json(model_to_json(fit.model));
            for (int i = 0; i < 10; ++i)
                CHECK(predict(back, ds.records[i].context, i % 3) == predict(fit.model, ds.records[i].context, i % 3));
        }
        CHECK(parse_model("lasso") == ModelKind::Lasso);
        CHECK_THROWS_AS(parse_model("svm"), Error);
    }
}
