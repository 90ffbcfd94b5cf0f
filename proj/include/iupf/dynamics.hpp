#pragma once

#include <Eigen/Dense>

#include <array>
#include <random>

namespace iupf {

using Vector6 = Eigen::Matrix<double, 6, 1>;
using Vector2 = Eigen::Vector2d;
using Matrix6 = Eigen::Matrix<double, 6, 6>;
using Matrix62 = Eigen::Matrix<double, 6, 2>;

/// Frenet state (s, d, s', d', s'', d'').
struct VehicleState {
    double s = 0.0;       ///< longitudinal position [m]
    double d = 0.0;       ///< lateral offset [m], positive to the left
    double s_dot = 0.0;   ///< [m/s]
    double d_dot = 0.0;   ///< [m/s]
    double s_ddot = 0.0;  ///< [m/s^2]
    double d_ddot = 0.0;  ///< [m/s^2]

    Vector6 vec() const {
        Vector6 v;
        v << s, d, s_dot, d_dot, s_ddot, d_ddot;
        return v;
    }

    static VehicleState from_vec(const Vector6& v) {
        return {v[0], v[1], v[2], v[3], v[4], v[5]};
    }

    bool finite() const { return vec().allFinite(); }

    friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

/// Longitudinal jerk and lateral acceleration rate, both [m/s^3].
struct ControlInput {
    double a_s = 0.0;
    double omega_d = 0.0;

    Vector2 vec() const { return {a_s, omega_d}; }
    static ControlInput from_vec(const Vector2& v) { return {v[0], v[1]}; }

    friend bool operator==(const ControlInput&, const ControlInput&) = default;
};

/// Actuator envelope: jerk inputs and the acceleration states they drive.
struct ActuatorLimits {
    double a_max = 3.0;
    double omega_max = 1.0;
    double accel_max = 3.0;
};

/// Triple-integrator Frenet kinematics discretized with step dt.
class DynamicsModel {
public:
    double dt() const { return dt_; }
    double sigma_w() const { return sigma_w_; }
    const Matrix6& A() const { return A_; }
    const Matrix62& B() const { return B_; }
    const Matrix6& Q() const { return Q_; }
    /// Lower-triangular factor with L L^T = Q (up to diagonal jitter).
    const Matrix6& noise_factor() const { return L_; }

    friend DynamicsModel build_system_matrices(double dt, double sigma_w);

private:
    double dt_ = 0.0;
    double sigma_w_ = 0.0;
    Matrix6 A_ = Matrix6::Identity();
    Matrix62 B_ = Matrix62::Zero();
    Matrix6 Q_ = Matrix6::Zero();
    Matrix6 L_ = Matrix6::Zero();
};

/// Throws InvalidParameter for dt <= 0 or sigma_w < 0.
DynamicsModel build_system_matrices(double dt, double sigma_w);

/// A x + B u + w. Throws NumericError on non-finite input.
VehicleState propagate(const DynamicsModel& model, const VehicleState& x,
                       const ControlInput& u, const Vector6& w = Vector6::Zero());

/// Draws w ~ N(0, Q). Deterministic for a given generator state.
Vector6 sample_noise(const DynamicsModel& model, std::mt19937_64& rng);

ControlInput clamp_control(const ControlInput& u, double a_max, double omega_max);

/// Saturates the acceleration states at +-accel_max.
VehicleState clamp_acceleration(const VehicleState& x, double accel_max);

Vector2 project_position(const VehicleState& x);

}  // namespace iupf
