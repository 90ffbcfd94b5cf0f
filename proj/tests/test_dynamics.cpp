#include "doctest/doctest.h"

#include "iupf/dynamics.hpp"
#include "iupf/errors.hpp"

#include <cmath>
#include <limits>

using namespace iupf;

TEST_SUITE("dynamics") {
    TEST_CASE("system matrices follow the triple-integrator closed forms") {
        for (double dt : {0.01, 0.1, 0.5}) {
            const DynamicsModel m = build_system_matrices(dt, 0.0);
            Matrix6 A = Matrix6::Identity();
            Matrix62 B = Matrix62::Zero();
            for (int a = 0; a < 2; ++a) {
                A(a, 2 + a) = dt;
                A(a, 4 + a) = dt * dt / 2.0;
                A(2 + a, 4 + a) = dt;
                B(a, a) = dt * dt * dt / 6.0;
                B(2 + a, a) = dt * dt / 2.0;
                B(4 + a, a) = dt;
            }
            CHECK((m.A() - A).cwiseAbs().maxCoeff() <= 1e-15);
            CHECK((m.B() - B).cwiseAbs().maxCoeff() <= 1e-15);
        }
    }

    TEST_CASE("zero-control rollout matches constant-acceleration kinematics") {
        const double dt = 0.1;
        const DynamicsModel m = build_system_matrices(dt, 0.0);
        VehicleState x{200.0, 0.5, 22.0, -0.3, 0.4, 0.1};
        const VehicleState x0 = x;
        for (int k = 0; k < 150; ++k) x = propagate(m, x, {});
        const double t = 150 * dt;
        CHECK(std::abs(x.s - (x0.s + x0.s_dot * t + 0.5 * x0.s_ddot * t * t)) <= 1e-9);
        CHECK(std::abs(x.d - (x0.d + x0.d_dot * t + 0.5 * x0.d_ddot * t * t)) <= 1e-9);
        CHECK(std::abs(x.s_dot - (x0.s_dot + x0.s_ddot * t)) <= 1e-9);
        CHECK(x.s_ddot == doctest::Approx(x0.s_ddot).epsilon(1e-15));
    }

    TEST_CASE("unit jerk for one step") {
        const DynamicsModel m = build_system_matrices(0.1, 0.0);
        const VehicleState x = propagate(m, {}, {1.0, 0.0});
        CHECK(x.s == doctest::Approx(0.1 * 0.1 * 0.1 / 6.0));
        CHECK(x.s_dot == doctest::Approx(0.005));
        CHECK(x.s_ddot == doctest::Approx(0.1));
        CHECK(x.d == 0.0);
    }

    TEST_CASE("noise covariance matches Q by Monte Carlo") {
        const DynamicsModel m = build_system_matrices(0.1, 0.5);
        std::mt19937_64 rng(3);
        const int n = 200000;
        Matrix6 acc = Matrix6::Zero();
        for (int k = 0; k < n; ++k) {
            const Vector6 w = sample_noise(m, rng);
            acc += w * w.transpose();
        }
        acc /= n;
        const double scale = m.Q().cwiseAbs().maxCoeff();
        CHECK((acc - m.Q()).cwiseAbs().maxCoeff() <= 0.02 * scale);
        CHECK((m.noise_factor() * m.noise_factor().transpose() - m.Q()).cwiseAbs().maxCoeff() <= 1e-10);
    }

    TEST_CASE("zero noise intensity gives exact zero draws") {
        const DynamicsModel m = build_system_matrices(0.1, 0.0);
        std::mt19937_64 rng(1);
        CHECK(sample_noise(m, rng).isZero(0.0));
    }

    TEST_CASE("noise stream is reproducible for a seed") {
        const DynamicsModel m = build_system_matrices(0.1, 0.05);
        std::mt19937_64 a(11), b(11);
        for (int k = 0; k < 10; ++k) CHECK(sample_noise(m, a) == sample_noise(m, b));
    }

    TEST_CASE("clamps") {
        const ControlInput u = clamp_control({10.0, -5.0}, 3.0, 1.0);
        CHECK(u.a_s == 3.0);
        CHECK(u.omega_d == -1.0);
        const VehicleState x = clamp_acceleration({0, 0, 0, 0, 4.0, -3.5}, 3.0);
        CHECK(x.s_ddot == 3.0);
        CHECK(x.d_ddot == -3.0);
    }

    TEST_CASE("invalid inputs") {
        CHECK_THROWS_AS(build_system_matrices(0.0, 0.1), InvalidParameter);
        CHECK_THROWS_AS(build_system_matrices(0.1, -1.0), InvalidParameter);
        const DynamicsModel m = build_system_matrices(0.1, 0.0);
        VehicleState bad;
        bad.s = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(propagate(m, bad, {}), NumericError);
    }
}
