#include "iswerm/weights.hpp"

#include <doctest.h>

using namespace iswerm;

namespace {

LoggedDataset one_record(double propensity, int K = 4, double eps = 1.0) {
    LoggedDataset ds;
    ds.num_arms = K;
    ds.context_dim = 1;
    ds.records.push_back({1, Vector::Zero(1), 0, 0.3, propensity, eps});
    return ds;
}

double weight(WeightScheme s, double propensity) {
    return compute_weights(s, one_record(propensity))[0];
}

}  // namespace

TEST_CASE("scheme formulas") {
    CHECK(weight(WeightScheme::ISWERM, 0.25) == 4.0);
    CHECK(weight(WeightScheme::MRDRWERM, 0.5) == 2.0);
    CHECK(weight(WeightScheme::Unweighted, 0.37) == 1.0);
    CHECK(weight(WeightScheme::SqrtISWERM, 0.25) == 2.0);
}

TEST_CASE("floor schemes use eps_t / K") {
    CHECK(floor_at({1.0, 0.2}, 50, 4) == doctest::Approx(0.05));
    CHECK(floor_at({0.0, 0.0}, 9, 2) == 0.5);

    // beta = 1, t = 5: eps = 0.2, floor 0.05 with K = 4.
    LoggedDataset ds = one_record(0.5);
    ds.records[0].t = 5;
    ds.records.insert(ds.records.begin(), 4, ds.records[0]);
    for (int i = 0; i < 5; ++i) ds.records[i].t = i + 1;
    const ExplorationSchedule s{1.0, 0.0};
    const Vector isf = compute_weights(WeightScheme::ISFloorWERM, ds, s);
    const Vector sqf = compute_weights(WeightScheme::SqrtISFloorWERM, ds, s);
    const Vector mrf = compute_weights(WeightScheme::MRDRFloorWERM, ds, s);
    CHECK(isf[4] == doctest::Approx(20.0));
    CHECK(sqf[4] == doctest::Approx(std::sqrt(20.0)));
    CHECK(mrf[4] == doctest::Approx(0.95 / 0.0025));
}

TEST_CASE("weights on collected data") {
    const auto env = make_synthetic_linear(2, 3, 4, 1.0);
    SUBCASE("constant exploration makes IS and IS-floor coincide") {
        const auto ds = collect(*env, {0.0, 0.0}, {}, 300, 1);
        const Vector is = compute_weights(WeightScheme::ISWERM, ds);
        const Vector isf = compute_weights(WeightScheme::ISFloorWERM, ds);
        CHECK(is.isApprox(Vector::Constant(is.size(), 3.0), 1e-14));
        CHECK(isf.isApprox(Vector::Constant(is.size(), 3.0), 1e-14));
    }
    SUBCASE("IS weights stay below K / eps_t and above the floor") {
        const ExplorationSchedule s{1.0 / 3.0, 0.0};
        const auto ds = collect(*env, s, {}, 500, 2);
        const Vector is = compute_weights(WeightScheme::ISWERM, ds, s);
        const Vector isf = compute_weights(WeightScheme::ISFloorWERM, ds, s);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto idx = static_cast<Index>(i);
            CHECK(is[idx] <= 3.0 / epsilon_at(s, ds.records[i].t) * (1 + 1e-12));
            CHECK(floor_at(s, ds.records[i].t, 3) <= ds.records[i].propensity);
            CHECK(is[idx] <= isf[idx] * (1 + 1e-12));
        }
    }
    SUBCASE("reference weight in the numerator") {
        const auto ds = collect(*env, {0.5, 0.0}, {}, 200, 3);
        const Vector one = compute_weights(WeightScheme::ISWERM, ds);
        const Vector uni = compute_weights(WeightScheme::ISWERM, ds, {ReferenceWeight::uniform_density()});
        const Vector dirac = compute_weights(WeightScheme::ISWERM, ds, {ReferenceWeight::dirac(2)});
        CHECK(uni.isApprox(one / 3.0, 1e-14));
        for (std::size_t i = 0; i < ds.size(); ++i)
            CHECK(dirac[static_cast<Index>(i)] == (ds.records[i].action == 2 ? one[static_cast<Index>(i)] : 0.0));
    }
}

TEST_CASE("scheme names round trip") {
    for (auto s : kAllWeightSchemes) CHECK(parse_scheme(scheme_name(s)) == s);
    CHECK_THROWS_AS(parse_scheme("ipw"), Error);
    CHECK_THROWS_AS(weight(WeightScheme::ISWERM, 0.0), Error);
}
