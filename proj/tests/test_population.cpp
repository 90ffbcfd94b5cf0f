#include "doctest/doctest.h"

#include "iupf/errors.hpp"
#include "iupf/population.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace iupf;

namespace {

PopulationMeasure random_measure(std::mt19937_64& rng, int n, double spread) {
    std::normal_distribution<double> N(0.0, spread);
    std::vector<VehicleState> xs;
    for (int i = 0; i < n; ++i) {
        Vector6 v;
        for (int c = 0; c < 6; ++c) v[c] = N(rng);
        xs.push_back(VehicleState::from_vec(v));
    }
    return PopulationMeasure::uniform(xs);
}

Vehicle make_vehicle(const std::string& id, StyleLabel s, double pos) {
    Vehicle v;
    v.id = id;
    v.state.s = pos;
    v.style = default_driving_style(s);
    v.params = style_defaults(s, v.style.aggressiveness);
    return v;
}

}  // namespace

TEST_SUITE("population") {
    TEST_CASE("style table ordering") {
        const auto c = style_defaults(StyleLabel::Conservative, 0.2);
        const auto a = style_defaults(StyleLabel::Aggressive, 0.8);
        const auto k = style_defaults(StyleLabel::Cooperative, 0.5);
        CHECK(c.alpha_R > k.alpha_R);
        CHECK(k.alpha_R > a.alpha_R);
        CHECK(a.alpha_B > k.alpha_B);
        CHECK(k.alpha_B > c.alpha_B);
        CHECK(c.lambda_B == 155.0);
        CHECK(c.lambda_R == 8.0);
        CHECK(a.r_s == doctest::Approx(0.6));
        CHECK_NOTHROW(c.validate());
        CHECK_THROWS_AS(parse_style("reckless"), InvalidParameter);
        CHECK(parse_style("aggressive") == StyleLabel::Aggressive);
    }

    TEST_CASE("partition renormalizes each style and drops the excluded vehicle") {
        std::vector<Vehicle> vs{make_vehicle("h", StyleLabel::Cooperative, 200),
                                make_vehicle("c", StyleLabel::Conservative, 270),
                                make_vehicle("a1", StyleLabel::Aggressive, 170),
                                make_vehicle("a2", StyleLabel::Aggressive, 250)};
        const MeasuresByStyle m = partition_by_style(vs, std::string_view("h"));
        CHECK(by_style(m, StyleLabel::Cooperative).measure.empty());
        const auto& agg = by_style(m, StyleLabel::Aggressive).measure;
        REQUIRE(agg.atoms.size() == 2);
        CHECK(agg.atoms[0].weight == doctest::Approx(0.5));
        CHECK(agg.total_weight() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(by_style(m, StyleLabel::Conservative).measure.atoms[0].weight == doctest::Approx(1.0));
    }

    TEST_CASE("W2 by matching equals brute force on 4-atom measures") {
        std::mt19937_64 rng(17);
        for (int t = 0; t < 200; ++t) {
            const auto a = random_measure(rng, 4, 3.0);
            const auto b = random_measure(rng, 4, 3.0);
            CHECK(wasserstein2(a, b) == oracle::brute_force_w2(a, b));
        }
    }

    TEST_CASE("Hungarian path agrees with brute force on 9 atoms") {
        std::mt19937_64 rng(5);
        for (int t = 0; t < 5; ++t) {
            const auto a = random_measure(rng, 9, 2.0);
            const auto b = random_measure(rng, 9, 2.0);
            CHECK(wasserstein2(a, b) == doctest::Approx(oracle::brute_force_w2(a, b)).epsilon(1e-12));
        }
    }

    TEST_CASE("W2 metric properties") {
        std::mt19937_64 rng(2);
        const auto a = random_measure(rng, 6, 1.0);
        const auto b = random_measure(rng, 6, 1.0);
        const auto c = random_measure(rng, 6, 1.0);
        CHECK(wasserstein2(a, a) == 0.0);
        CHECK(wasserstein2(a, b) == doctest::Approx(wasserstein2(b, a)));
        CHECK(wasserstein2(a, c) <= wasserstein2(a, b) + wasserstein2(b, c) + 1e-12);

        // A rigid shift moves every atom by the same vector.
        PopulationMeasure shifted = a;
        for (Atom& at : shifted.atoms) at.state.s += 3.0;
        CHECK(wasserstein2(a, shifted) == doctest::Approx(3.0));
    }

    TEST_CASE("W2 rejects unsupported measures") {
        std::mt19937_64 rng(2);
        CHECK_THROWS_AS(wasserstein2(random_measure(rng, 3, 1.0), random_measure(rng, 4, 1.0)), InvalidParameter);
    }

    TEST_CASE("drift is repulsive and vanishes at zero gain") {
        std::vector<Vehicle> vs{make_vehicle("other", StyleLabel::Cooperative, 210)};
        const MeasuresByStyle m = partition_by_style(vs);
        VehicleState x;
        x.s = 200;
        CHECK(mean_field_drift(x, m, DriftKernel{0.0}).isZero(0.0));
        const Vector6 f = mean_field_drift(x, m, DriftKernel{1.0});
        CHECK(f[2] < 0.0);  // pushed backwards, away from the vehicle ahead
        CHECK(f[2] == doctest::Approx(-std::exp(-10.0 / 8.0)));
        CHECK(f[0] == 0.0);
        CHECK(f[4] == 0.0);
    }
}
