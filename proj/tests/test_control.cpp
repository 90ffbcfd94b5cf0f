#include "doctest/doctest.h"

#include "iupf/control.hpp"
#include "iupf/errors.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace iupf;

namespace {

GridSpec test_grid() {
    GridSpec g;
    g.s_min = 0.0;
    g.s_max = 400.0;
    g.d_min = -8.0;
    g.d_max = 8.0;
    g.n_s = 81;
    g.n_d = 17;
    return g;
}

ControlProblem zero_problem() {
    ControlProblem p;
    p.cost.terminal_lane_weight = 0.0;
    p.cost.terminal_speed_weight = 0.0;
    p.cost.penalty_weight = 0.0;
    return p;
}

Player make_player(const std::string& id, double s, double d, double v, StyleLabel style) {
    Player p;
    p.id = id;
    p.state.s = s;
    p.state.d = d;
    p.state.s_dot = v;
    p.style = default_driving_style(style);
    p.cost.target_speed = v;
    p.cost.target_lane_offset = d;
    return p;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_SUITE("control") {
    TEST_CASE("running cost terms in isolation") {
        ControlProblem p = zero_problem();
        VehicleState x;
        x.s = 100.0;
        CHECK(running_cost(x, {}, p) == 0.0);

        const ScalarField phi(test_grid(), 0.8);
        p.phi = &phi;
        CHECK(running_cost(x, {}, p) == doctest::Approx(-0.8));

        p.phi = nullptr;
        p.cost.r_s = 2.0;
        p.cost.r_d = 2.0;
        CHECK(running_cost(x, {1.0, 1.0}, p) == doctest::Approx(2.0));
    }

    TEST_CASE("constraint hinges") {
        CostParams cp;
        VehicleState x;
        x.s_dot = cp.target_speed;
        CHECK(constraint_penalty(x, cp) == 0.0);
        x.d = cp.lateral_limit + 1.0;
        CHECK(constraint_penalty(x, cp) > 0.0);
        x.d = 0.0;
        x.s_dot = -1.0;
        CHECK(constraint_penalty(x, cp) > 0.0);
        x.s_dot = 1.3 * cp.target_speed;
        CHECK(constraint_penalty(x, cp) > 0.0);
    }

    TEST_CASE("hamiltonian identities") {
        ControlProblem p = zero_problem();
        VehicleState x{50.0, 0.3, 20.0, 0.1, 0.2, -0.1};
        const ControlInput u{0.4, -0.2};
        CHECK(hamiltonian(x, u, Vector6::Zero(), p) == doctest::Approx(running_cost(x, u, p)));
        Vector6 y;
        y << 0.3, -1.0, 0.5, 0.2, -0.7, 1.1;
        CHECK(hamiltonian(x, {}, y, p) == doctest::Approx(y.dot(p.model.A() * x.vec())));

        // dH/du = R u + B^T y by central differences.
        const double h = 1e-6;
        const Vector2 analytic = Vector2(p.cost.r_s * u.a_s, p.cost.r_d * u.omega_d) + p.model.B().transpose() * y;
        const double fd0 = (hamiltonian(x, {u.a_s + h, u.omega_d}, y, p) - hamiltonian(x, {u.a_s - h, u.omega_d}, y, p)) / (2 * h);
        const double fd1 = (hamiltonian(x, {u.a_s, u.omega_d + h}, y, p) - hamiltonian(x, {u.a_s, u.omega_d - h}, y, p)) / (2 * h);
        CHECK(rel_err(fd0, analytic[0]) <= 1e-6);
        CHECK(rel_err(fd1, analytic[1]) <= 1e-6);
    }

    TEST_CASE("evaluate_cost on a single unit step") {
        ControlProblem p = zero_problem();
        TrajectoryPlan plan;
        plan.controls = {{1.0, 0.0}};
        plan.states = rollout(VehicleState{100.0, 0, 0, 0, 0, 0}, plan.controls, p);
        CHECK(evaluate_cost(plan, p) == doctest::Approx(0.05));
        plan.controls = {{1.0, 1.0}};
        plan.states = rollout(VehicleState{100.0, 0, 0, 0, 0, 0}, plan.controls, p);
        CHECK(evaluate_cost(plan, p) == doctest::Approx(0.1));
    }

    TEST_CASE("backward sweep trivial cases") {
        ControlProblem p = zero_problem();
        TrajectoryPlan plan;
        plan.controls.assign(5, ControlInput{});
        plan.states = rollout(VehicleState{100.0, 0.5, 20.0, 0, 0, 0}, plan.controls, p);
        for (const Vector6& y : backward_sweep(plan, p)) CHECK(y.isZero(0.0));

        p.cost.terminal_lane_weight = 2.0;
        p.cost.target_lane_offset = 3.75;
        const auto ys = backward_sweep(plan, p);
        Vector6 expect = Vector6::Zero();
        expect[1] = 2.0 * (0.5 - 3.75);
        CHECK((ys.back() - expect).cwiseAbs().maxCoeff() <= 1e-12);
    }

    TEST_CASE("adjoint gradients match finite differences") {
        std::mt19937_64 rng(77);
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        const GridSpec g = test_grid();
        for (int trial = 0; trial < 20; ++trial) {
            const ScalarField phi = oracle::random_smooth_field(g, rng);
            ControlProblem p;
            p.phi = &phi;
            p.cost.target_lane_offset = 3.75 * U(rng);
            p.cost.target_speed = 22.0 + 3.0 * U(rng);
            const VehicleState x0{200.0 + 50.0 * U(rng), 2.0 * U(rng), 22.0 + 4.0 * U(rng), 0.5 * U(rng), 0.5 * U(rng), 0.5 * U(rng)};
            TrajectoryPlan plan;
            for (int k = 0; k < 10; ++k) plan.controls.push_back({U(rng), 0.5 * U(rng)});
            plan.states = rollout(x0, plan.controls, p);
            const auto grad = control_gradient(plan, backward_sweep(plan, p), p);
            const auto fd = oracle::fd_control_gradient(x0, plan.controls, p, 1e-5);
            for (std::size_t k = 0; k < grad.size(); ++k) {
                for (int c = 0; c < 2; ++c) CHECK(rel_err(grad[k][c], fd[k][c]) <= 1e-4);
            }
        }
    }

    TEST_CASE("optimal control from adjoint") {
        const ControlProblem p = zero_problem();
        const ControlInput z = optimal_control_from_adjoint(Vector6::Zero(), p.cost, p.model, p.limits);
        CHECK(z.a_s == 0.0);
        CHECK(z.omega_d == 0.0);

        Vector6 y = Vector6::Zero();
        y[4] = 1.0;
        CHECK(optimal_control_from_adjoint(y, p.cost, p.model, p.limits).a_s == doctest::Approx(-0.1));

        const ControlInput big = optimal_control_from_adjoint(Vector6::Constant(-1e6), p.cost, p.model, p.limits);
        CHECK(big.a_s == 3.0);
        CHECK(big.omega_d == 1.0);

        // Doubling R halves the unclamped control exactly.
        y << 0.1, 0.2, -0.3, 0.4, 0.5, -0.6;
        CostParams doubled = p.cost;
        doubled.r_s *= 2.0;
        doubled.r_d *= 2.0;
        const ControlInput u1 = optimal_control_from_adjoint(y, p.cost, p.model, p.limits);
        const ControlInput u2 = optimal_control_from_adjoint(y, doubled, p.model, p.limits);
        CHECK(u2.a_s == 0.5 * u1.a_s);
        CHECK(u2.omega_d == 0.5 * u1.omega_d);
    }

    TEST_CASE("stationary zero problem") {
        const BestResponse br = solve_best_response(VehicleState{100.0, 0, 20.0, 0, 0, 0}, zero_problem(), 10);
        CHECK(br.converged);
        CHECK(br.plan.cost == 0.0);
        for (const ControlInput& u : br.plan.controls) {
            CHECK(u.a_s == 0.0);
            CHECK(u.omega_d == 0.0);
        }
    }

    TEST_CASE("quadratic problem matches the dense LQ solution") {
        ControlProblem p;
        p.cost.penalty_weight = 0.0;
        p.cost.target_lane_offset = 3.75;
        p.cost.target_speed = 24.0;
        p.cost.terminal_speed_weight = 1.0;
        p.limits.a_max = 1e6;
        p.limits.omega_max = 1e6;
        p.limits.accel_max = 1e6;
        BestResponseOptions opt;
        opt.tolerance = 1e-12;
        opt.max_sweeps = 5000;
        const VehicleState x0{100.0, 0.0, 22.0, 0.0, 0.0, 0.0};
        for (int K : {5, 20}) {
            const BestResponse br = solve_best_response(x0, p, K, opt);
            const auto ref = oracle::dense_lq(x0, K, p.cost, p.model);
            double err = 0.0;
            for (int k = 0; k <= K; ++k) err = std::max(err, (br.plan.states[k].vec() - ref.states[k].vec()).cwiseAbs().maxCoeff());
            CHECK(err <= 1e-6);
        }
    }

    TEST_CASE("converged plan satisfies the optimality condition and cost is monotone") {
        const GridSpec g = test_grid();
        std::mt19937_64 rng(4);
        const ScalarField phi = oracle::random_smooth_field(g, rng);
        ControlProblem p;
        p.phi = &phi;
        p.cost.target_lane_offset = 3.75;
        BestResponseOptions opt;
        opt.max_sweeps = 2000;
        const BestResponse br = solve_best_response(VehicleState{150.0, 0, 22.0, 0, 0, 0}, p, 20, opt);
        REQUIRE(br.converged);
        for (std::size_t k = 1; k < br.cost_history.size(); ++k) CHECK(br.cost_history[k] <= br.cost_history[k - 1]);
        const double dt = p.model.dt();
        int interior = 0;
        for (std::size_t k = 0; k < br.plan.controls.size(); ++k) {
            const ControlInput& u = br.plan.controls[k];
            const Vector2 r = Vector2(p.cost.r_s * u.a_s, p.cost.r_d * u.omega_d) +
                              p.model.B().transpose() * br.plan.adjoints[k + 1] / dt;
            if (std::abs(u.a_s) < p.limits.a_max - 1e-3) {
                CHECK(std::abs(r[0]) <= 1e-4);
                ++interior;
            }
            if (std::abs(u.omega_d) < p.limits.omega_max - 1e-3) {
                CHECK(std::abs(r[1]) <= 1e-4);
                ++interior;
            }
        }
        CHECK(interior >= 20);
    }

    TEST_CASE("plan obeys its own dynamics and bounds") {
        ControlProblem p;
        p.cost.target_lane_offset = 3.75;
        p.cost.target_speed = 30.0;
        const BestResponse br = solve_best_response(VehicleState{100.0, 0, 22.0, 0, 0, 0}, p, 30);
        const auto states = rollout(br.plan.states.front(), br.plan.controls, p);
        for (std::size_t k = 0; k < states.size(); ++k) CHECK(states[k].vec() == br.plan.states[k].vec());
        for (const ControlInput& u : br.plan.controls) {
            CHECK(std::abs(u.a_s) <= 3.0);
            CHECK(std::abs(u.omega_d) <= 1.0);
        }
        CHECK(br.plan.states.back().d > 0.5);
    }

    TEST_CASE("lane selection") {
        const GridSpec g = test_grid();
        ScalarField phi(g);
        for (int i = 0; i < g.n_s; ++i)
            for (int j = 0; j < g.n_d; ++j) phi(i, j) = g.d_at(j) / 8.0;
        const VehicleState x{100.0, 0.0, 22.0, 0, 0, 0};
        const LaneChoice hard = select_target_lane(phi, x, {-3.75, 0.0, 3.75}, 100.0, 0.0);
        CHECK(hard.target_offset == 3.75);
        CHECK(hard.weights[2] == 1.0);
        const LaneChoice soft = select_target_lane(phi, x, {-3.75, 0.0, 3.75}, 100.0, 0.1);
        CHECK(soft.weights[0] + soft.weights[1] + soft.weights[2] == doctest::Approx(1.0));
        CHECK(soft.weights[2] > soft.weights[1]);
        CHECK(soft.weights[1] > soft.weights[0]);
        CHECK(soft.target_offset > 0.0);
        CHECK(soft.target_offset < 3.75);
    }

    TEST_CASE("contraction estimate") {
        CHECK_FALSE(estimate_contraction({1.0, 0.5}).has_value());
        const auto r = estimate_contraction({1.0, 0.5, 0.25, 0.125});
        REQUIRE(r.has_value());
        CHECK(*r == doctest::Approx(0.5));
    }

    TEST_CASE("fixed point with a single vehicle") {
        GameConfig cfg;
        cfg.grid = test_grid();
        cfg.horizon_steps = 10;
        const Equilibrium eq = fixed_point_iteration({make_player("solo", 100.0, 0.0, 22.0, StyleLabel::Cooperative)}, cfg);
        REQUIRE(eq.report.gaps.size() == 1);
        CHECK(eq.report.gaps[0] == 0.0);
        CHECK(eq.report.converged);
        CHECK(eq.report.iterations == 1);
    }

    TEST_CASE("fixed point with two distant vehicles") {
        GameConfig cfg;
        cfg.grid = test_grid();
        cfg.grid.s_max = 4000.0;
        cfg.grid.n_s = 201;
        cfg.horizon_steps = 10;
        cfg.max_iterations = 5;
        std::vector<Player> players{make_player("a", 200.0, 0.0, 22.0, StyleLabel::Cooperative),
                                    make_player("b", 3700.0, 0.0, 22.0, StyleLabel::Aggressive)};
        const Equilibrium eq = fixed_point_iteration(players, cfg);
        CHECK(eq.report.converged);
        CHECK(eq.report.iterations <= 2);
        // The recorded gaps are the population W2 of successive measures.
        REQUIRE(eq.measures.size() == eq.report.gaps.size() + 1);
        for (std::size_t k = 0; k < eq.report.gaps.size(); ++k)
            CHECK(eq.report.gaps[k] == wasserstein2(eq.measures[k], eq.measures[k + 1]));
    }

    TEST_CASE("scripted players hold their velocity") {
        ControlProblem p;
        const VehicleState x0{100.0, 0.0, 20.0, 0.0, 1.5, 0.0};
        const auto us = hold_velocity_controls(x0, 20, p);
        const auto xs = rollout(x0, us, p);
        CHECK(std::abs(xs.back().s_ddot) <= 1e-9);
    }

    TEST_CASE("invalid cost parameters") {
        CostParams cp;
        cp.r_s = 0.0;
        CHECK_THROWS_AS(cp.validate(), InvalidParameter);
        CHECK_THROWS_AS(solve_best_response({}, ControlProblem{}, 0), InvalidParameter);
    }
}
