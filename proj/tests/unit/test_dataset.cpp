#include "iswerm/dataset.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace iswerm;

namespace {

LoggedDataset three_records() {
    LoggedDataset ds;
    ds.num_arms = 2;
    ds.context_dim = 2;
    ds.beta = 1.0 / 3.0;
    ds.seed = 11;
    const double eps = 1.0;
    ds.records.push_back({1, Vector::Constant(2, 0.5), 0, 1.25, 0.5, eps});
    ds.records.push_back({2, Vector::Constant(2, -0.5), 1, -0.75, 0.5, eps});
    ds.records.push_back({3, Vector::Zero(2), 1, 0.1, 0.5, eps});
    return ds;
}

}  // namespace

TEST_CASE("well-formed dataset has no violations") {
    CHECK(validate_dataset(three_records()).empty());
}

TEST_CASE("zero propensity is reported once") {
    auto ds = three_records();
    ds.records[1].propensity = 0.0;
    const auto v = validate_dataset(ds);
    REQUIRE(v.size() == 1);
    CHECK(v[0].record == 1);
    CHECK(v[0].message == "propensity ∉ (0,1]");
}

TEST_CASE("gap in round indices is reported once") {
    auto ds = three_records();
    ds.records.pop_back();
    ds.records[1].t = 3;
    const auto v = validate_dataset(ds);
    REQUIRE(v.size() == 1);
    CHECK(v[0].record == 1);
    CHECK(v[0].message == "non-consecutive round index");
}

TEST_CASE("other invariant violations") {
    SUBCASE("propensity under the floor") {
        auto ds = three_records();
        ds.records[0].epsilon = 0.5;
        ds.records[0].propensity = 0.2;  // floor is 0.25
        const auto v = validate_dataset(ds);
        REQUIRE(v.size() == 1);
        CHECK(v[0].message == "propensity below epsilon/K floor");
    }
    SUBCASE("unpulled arm") {
        auto ds = three_records();
        ds.records[0].action = 1;
        const auto v = validate_dataset(ds);
        REQUIRE(v.size() == 1);
        CHECK(v[0].record == -1);
    }
    SUBCASE("wrong context dimension and non-finite entries") {
        auto ds = three_records();
        ds.records[2].context = Vector::Zero(3);
        ds.records[1].context[0] = std::nan("");
        CHECK(validate_dataset(ds).size() == 2);
    }
    SUBCASE("epsilon out of range") {
        auto ds = three_records();
        ds.records[2].epsilon = 0.0;
        CHECK(validate_dataset(ds).size() == 1);
    }
}

TEST_CASE("jsonl round trip is exact") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    LoggedDataset ds;
    ds.num_arms = 3;
    ds.context_dim = 4;
    ds.beta = 1.0 / 3.0;
    ds.seed = 0xdeadbeefcafeULL;
    for (int t = 1; t <= 50; ++t) {
        Vector x(4);
        for (auto& v : x) v = u(rng);
        const double eps = std::pow(t, -1.0 / 3.0);
        ds.records.push_back({t, x, t % 3, u(rng) / 7.0, 1.0 - eps + eps / 3.0, eps});
    }
    std::stringstream buf;
    write_jsonl(ds, buf);
    const auto back = read_jsonl(buf);
    CHECK(back == ds);
}

TEST_CASE("malformed jsonl is rejected") {
    std::stringstream missing_header("{\"t\":1}\n");
    CHECK_THROWS_AS(read_jsonl(missing_header), Error);
    std::stringstream bad("{\"K\":2,\"d\":1,\"beta\":0,\"seed\":0}\n{not json}\n");
    CHECK_THROWS_AS(read_jsonl(bad), Error);
}

TEST_CASE("prefix keeps the first n rounds") {
    const auto ds = three_records();
    const auto p = ds.prefix(2);
    CHECK(p.size() == 2);
    CHECK(p.records[1] == ds.records[1]);
    CHECK(p.num_arms == ds.num_arms);
}

TEST_CASE("reference weights") {
    CHECK(ReferenceWeight::constant_one()(1, 4) == 1.0);
    CHECK(ReferenceWeight::uniform_density()(1, 4) == 0.25);
    CHECK(ReferenceWeight::dirac(2)(2, 4) == 1.0);
    CHECK(ReferenceWeight::dirac(2)(1, 4) == 0.0);
    CHECK(ReferenceWeight::uniform_density().sup(4) == 0.25);
    CHECK_THROWS_AS(ReferenceWeight::dirac(4).validate(4), Error);
    CHECK_NOTHROW(ReferenceWeight::dirac(3).validate(4));
    for (const auto& g : {ReferenceWeight::constant_one(), ReferenceWeight::uniform_density(), ReferenceWeight::dirac(1)})
        CHECK(ReferenceWeight::parse(g.name()).name() == g.name());
    CHECK_THROWS_AS(ReferenceWeight::parse("half"), Error);
}
