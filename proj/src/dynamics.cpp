#include "iupf/dynamics.hpp"

#include "iupf/errors.hpp"

#include <algorithm>
#include <cmath>

namespace iupf {

DynamicsModel build_system_matrices(double dt, double sigma_w) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw InvalidParameter("dt must be positive");
    }
    if (!(sigma_w >= 0.0) || !std::isfinite(sigma_w)) {
        throw InvalidParameter("sigma_w must be nonnegative");
    }

    DynamicsModel m;
    m.dt_ = dt;
    m.sigma_w_ = sigma_w;

    const double dt2 = dt * dt;
    const double dt3 = dt2 * dt;
    const double dt4 = dt3 * dt;

    m.A_.setIdentity();
    for (int axis = 0; axis < 2; ++axis) {
        m.A_(axis, 2 + axis) = dt;
        m.A_(axis, 4 + axis) = dt2 / 2.0;
        m.A_(2 + axis, 4 + axis) = dt;

        m.B_(axis, axis) = dt3 / 6.0;
        m.B_(2 + axis, axis) = dt2 / 2.0;
        m.B_(4 + axis, axis) = dt;
    }

    // Per-axis 3x3 block of the white-jerk-increment covariance, interleaved.
    const double blk[3][3] = {{dt4 / 4.0, dt3 / 2.0, dt2 / 2.0},
                              {dt3 / 2.0, dt2, dt},
                              {dt2 / 2.0, dt, 1.0}};
    const double var = sigma_w * sigma_w;
    m.Q_.setZero();
    for (int axis = 0; axis < 2; ++axis) {
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                m.Q_(2 * i + axis, 2 * j + axis) = var * blk[i][j];
            }
        }
    }

    if (var == 0.0) {
        m.L_.setZero();
        return m;
    }
    // Q is rank-deficient (each axis block is an outer product); jitter the diagonal.
    Eigen::LLT<Matrix6> llt(m.Q_ + 1e-12 * Matrix6::Identity());
    if (llt.info() != Eigen::Success) {
        throw NumericError("Cholesky factorization of the noise covariance failed");
    }
    m.L_ = llt.matrixL();
    return m;
}

VehicleState propagate(const DynamicsModel& model, const VehicleState& x,
                       const ControlInput& u, const Vector6& w) {
    const Vector6 xv = x.vec();
    const Vector2 uv = u.vec();
    if (!xv.allFinite() || !uv.allFinite() || !w.allFinite()) {
        throw NumericError("propagate: non-finite state, control or noise");
    }
    return VehicleState::from_vec(model.A() * xv + model.B() * uv + w);
}

Vector6 sample_noise(const DynamicsModel& model, std::mt19937_64& rng) {
    if (model.sigma_w() == 0.0) {
        return Vector6::Zero();
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector6 z;
    for (int i = 0; i < 6; ++i) {
        z[i] = normal(rng);
    }
    return model.noise_factor() * z;
}

ControlInput clamp_control(const ControlInput& u, double a_max, double omega_max) {
    return {std::clamp(u.a_s, -a_max, a_max), std::clamp(u.omega_d, -omega_max, omega_max)};
}

VehicleState clamp_acceleration(const VehicleState& x, double accel_max) {
    VehicleState y = x;
    y.s_ddot = std::clamp(x.s_ddot, -accel_max, accel_max);
    y.d_ddot = std::clamp(x.d_ddot, -accel_max, accel_max);
    return y;
}

Vector2 project_position(const VehicleState& x) { return {x.s, x.d}; }

}  // namespace iupf
