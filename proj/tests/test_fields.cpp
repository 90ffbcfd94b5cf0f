#include "doctest/doctest.h"

#include "iupf/errors.hpp"
#include "iupf/fields.hpp"
#include "oracles.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

using namespace iupf;

namespace {

GridSpec oracle_grid() {
    GridSpec g;
    g.s_min = 0.0;
    g.s_max = 120.0;
    g.d_min = -8.0;
    g.d_max = 8.0;
    g.n_s = 25;
    g.n_d = 10;
    return g;
}

ScalarField random_source(const GridSpec& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    ScalarField f(g);
    for (int k = 0; k < g.size(); ++k) f.values()[k] = U(rng);
    return f;
}

}  // namespace

TEST_SUITE("fields") {
    TEST_CASE("kernels") {
        CHECK(kernel_G(0.0, 8.0) == 1.0);
        CHECK(kernel_G(8.0, 8.0) == doctest::Approx(std::exp(-1.0)));
        CHECK(kernel_H(0.0, 0.0, 8.0, 33.3) == 1.0);
        CHECK(kernel_H(0.0, 33.3, 8.0, 33.3) == doctest::Approx(2.0));
    }

    TEST_CASE("CG agrees with a dense LDLT solve") {
        const GridSpec g = oracle_grid();
        FieldParams p;
        p.cg_tol = 1e-13;
        std::mt19937_64 rng(21);
        for (double t : {0.05, 1.0}) {
            const Eigen::MatrixXd M = -oracle::dense_laplacian(g) + t * Eigen::MatrixXd::Identity(g.size(), g.size());
            const Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
            for (int trial = 0; trial < 5; ++trial) {
                const ScalarField src = random_source(g, rng);
                const Eigen::VectorXd ref = ldlt.solve(src.values());
                const ScalarField F = solve_screened_poisson(src, t, p);
                CHECK((F.values() - ref).norm() / ref.norm() <= 1e-8);
            }
        }
    }

    TEST_CASE("solution minimizes the discrete energy") {
        const GridSpec g = oracle_grid();
        std::mt19937_64 rng(3);
        const ScalarField src = random_source(g, rng);
        FieldParams p;
        const ScalarField F = solve_screened_poisson(src, 0.3, p);
        const double e0 = screened_energy(F, src, 0.3);
        std::normal_distribution<double> N(0.0, 1e-3);
        for (int k = 0; k < 10; ++k) {
            ScalarField G = F;
            for (int i = 0; i < g.size(); ++i) G.values()[i] += N(rng);
            CHECK(screened_energy(G, src, 0.3) > e0);
        }
    }

    TEST_CASE("iteration cap raises ConvergenceError") {
        const GridSpec g = oracle_grid();
        std::mt19937_64 rng(8);
        FieldParams p;
        p.cg_max_iter = 2;
        p.cg_tol = 1e-14;
        CHECK_THROWS_AS(solve_screened_poisson(random_source(g, rng), 0.01, p), ConvergenceError);
        CHECK_THROWS_AS(solve_screened_poisson(random_source(g, rng), 0.0, FieldParams{}), InvalidParameter);
    }

    TEST_CASE("fields peak near the vehicles and stay nonnegative") {
        GridSpec g;
        g.s_max = 400.0;
        g.n_s = 101;
        Vehicle v;
        v.id = "a";
        v.state.s = 200.0;
        v.state.s_dot = 20.0;
        v.style = default_driving_style(StyleLabel::Conservative);
        v.params = style_defaults(StyleLabel::Conservative);
        const FieldPair fp = build_fields(partition_by_style({v}), g, FieldParams{});
        CHECK(fp.benefit.min() >= 0.0);
        CHECK(fp.risk.min() >= 0.0);
        Eigen::Index at = 0;
        fp.risk.values().maxCoeff(&at);
        CHECK(std::abs(g.s_at(static_cast<int>(at) / g.n_d) - 200.0) <= g.h_s());
        // An empty population yields zero fields.
        const FieldPair none = build_fields(partition_by_style({}), g, FieldParams{});
        CHECK(none.risk.values().isZero(0.0));
    }
}
