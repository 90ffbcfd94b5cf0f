#pragma once

#include "iupf/dynamics.hpp"
#include "iupf/errors.hpp"
#include "iupf/fieldgrid.hpp"
#include "iupf/fields.hpp"
#include "iupf/fusion.hpp"
#include "iupf/population.hpp"

#include <optional>
#include <string>
#include <vector>

namespace iupf {

/// Running/terminal cost weights for one vehicle.
struct CostParams {
    double r_s = 1.0;  ///< control-cost diagonal, longitudinal
    double r_d = 1.0;  ///< control-cost diagonal, lateral
    double field_weight = 1.0;  ///< scale of the unified-field reward
    double terminal_lane_weight = 1.0;
    double terminal_speed_weight = 0.1;
    double target_speed = 22.0;        ///< [m/s]
    double target_lane_offset = 0.0;   ///< [m]
    double penalty_weight = 10.0;      ///< scale of the soft-constraint hinges
    double lateral_limit = 4.725;      ///< |d| allowed before the road-edge hinge engages [m]

    void validate() const;
};

/// Everything a single-vehicle optimal control problem needs. The unified
/// field is borrowed; a null field means phi == 0 everywhere.
struct ControlProblem {
    DynamicsModel model = build_system_matrices(0.1, 0.0);
    ActuatorLimits limits;
    CostParams cost;
    const ScalarField* phi = nullptr;
    OutOfDomain domain = OutOfDomain::Throw;
    DriftKernel drift;
    MeasuresByStyle drift_measures{};  ///< atoms the interaction drift reacts to
};

struct TrajectoryPlan {
    std::vector<VehicleState> states;   ///< K + 1
    std::vector<ControlInput> controls; ///< K
    std::vector<Vector6> adjoints;      ///< K + 1
    double cost = 0.0;

    int horizon() const { return static_cast<int>(controls.size()); }
};

/// L(x, u) = -w_phi phi(pi(x)) + u^T R u / 2 + soft-constraint hinges.
double running_cost(const VehicleState& x, const ControlInput& u, const ControlProblem& problem);

/// Soft constraints alone: road-edge excursion and speed outside [0, 1.2 v*].
double constraint_penalty(const VehicleState& x, const CostParams& cp);

/// Gradient of the running cost in x (field gradient lifted into the s, d slots).
Vector6 running_cost_gradient(const VehicleState& x, const ControlProblem& problem);

/// Psi = w_lane (d - d*)^2 / 2 + w_speed (s' - v*)^2 / 2.
double terminal_cost(const VehicleState& x, const CostParams& cp);
Vector6 terminal_cost_gradient(const VehicleState& x, const CostParams& cp);

/// L(x, u) + y^T (A x + B u + phi_drift(x)).
double hamiltonian(const VehicleState& x, const ControlInput& u, const Vector6& y,
                   const ControlProblem& problem);

/// One noise-free step: propagate, add the interaction drift, saturate accelerations.
VehicleState planning_step(const VehicleState& x, const ControlInput& u, const ControlProblem& problem);

/// Noise-free rollout of `controls` from x0.
std::vector<VehicleState> rollout(const VehicleState& x0, const std::vector<ControlInput>& controls,
                                  const ControlProblem& problem);

/// dt * sum_k L(x_k, u_k) + Psi(x_K).
double evaluate_cost(const TrajectoryPlan& plan, const ControlProblem& problem);

/// Discrete adjoints: Y_K = grad Psi(x_K), Y_k = A^T Y_{k+1} + dt grad_x L(x_k, u_k),
/// with the acceleration saturation folded in where it is active.
std::vector<Vector6> backward_sweep(const TrajectoryPlan& plan, const ControlProblem& problem);

/// dJ/du_k = dt R u_k + B^T Y_{k+1}.
std::vector<Vector2> control_gradient(const TrajectoryPlan& plan, const std::vector<Vector6>& adjoints,
                                      const ControlProblem& problem);

/// u = clamp(-R^-1 B^T y).
ControlInput optimal_control_from_adjoint(const Vector6& y, const CostParams& cp,
                                          const DynamicsModel& model, const ActuatorLimits& limits);

struct BestResponseOptions {
    int max_sweeps = 200;
    double damping = 0.5;
    double tolerance = 1e-5;  ///< infinity norm of the proposed control change
    int max_halvings = 30;
};

struct BestResponse {
    TrajectoryPlan plan;
    int sweeps = 0;
    bool converged = false;
    std::vector<double> cost_history;  ///< cost after every accepted update
};

/// Raised when the sweep cap is hit without any cost decrease.
class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& what, TrajectoryPlan best)
        : Error(what), best_(std::move(best)) {}
    const TrajectoryPlan& best_plan() const { return best_; }

private:
    TrajectoryPlan best_;
};

/// Forward rollout, backward sweep and damped control update, repeated until
/// the proposed update is below tolerance. Updates that raise the cost are
/// halved until they do not.
BestResponse solve_best_response(const VehicleState& x0, const ControlProblem& problem, int horizon,
                                 const BestResponseOptions& options = {},
                                 const std::vector<ControlInput>* warm_start = nullptr);

/// Softmax lane choice over candidate offsets scored by the mean unified
/// field along a corridor ahead of the vehicle. Temperature 0 is argmax.
struct LaneChoice {
    double target_offset = 0.0;
    std::vector<double> scores;
    std::vector<double> weights;
};

LaneChoice select_target_lane(const ScalarField& phi, const VehicleState& x,
                              const std::vector<double>& lane_offsets, double corridor_length,
                              double temperature);

// --- population-level best-response iteration -----------------------------

struct Player {
    std::string id;
    VehicleState state;
    DrivingStyle style;
    CostParams cost;
    bool select_lane = false;
    bool scripted = false;  ///< holds its velocity instead of optimizing
};

struct GameConfig {
    GridSpec grid;
    FieldParams field;
    FusionParams fusion;
    std::array<StyleParameters, 3> style_params{
        style_defaults(StyleLabel::Conservative, 0.2), style_defaults(StyleLabel::Aggressive, 0.8),
        style_defaults(StyleLabel::Cooperative, 0.5)};
    DynamicsModel model = build_system_matrices(0.1, 0.0);
    ActuatorLimits limits;
    DriftKernel drift;
    OutOfDomain domain = OutOfDomain::Clamp;
    int horizon_steps = 40;
    int preview_stride = 2;          ///< plan samples per vehicle in the induced measure
    BestResponseOptions best_response;
    int max_iterations = 5;
    double w2_tol = 1e-3;
    std::vector<double> lane_offsets{-3.75, 0.0, 3.75};
    double corridor_length = 100.0;  ///< [m]
};

struct ConvergenceReport {
    std::vector<double> gaps;               ///< W2 between successive induced measures
    std::vector<double> distance_to_final;  ///< W2 from each iterate to the last one
    std::optional<double> rho_hat;          ///< geometric-mean gap ratio, >= 3 iterations
    bool converged = false;
    int iterations = 0;
    std::vector<double> costs;              ///< final cost per player
    std::vector<std::vector<double>> iteration_costs;  ///< per gap, cost per player
};

/// Per-player view of the field at the last iteration.
struct PlayerField {
    FieldPair fields;
    UnifiedField unified;
    LaneChoice lane;
};

struct Equilibrium {
    std::vector<TrajectoryPlan> plans;
    std::vector<PlayerField> fields;
    ConvergenceReport report;
    std::vector<PopulationMeasure> measures;  ///< induced measure per iterate
};

/// Uniform measure over every player's plan states at the preview samples.
PopulationMeasure induced_measure(const std::vector<Player>& players,
                                  const std::vector<TrajectoryPlan>& plans, int preview_stride);

/// Constant-velocity controls (acceleration driven to zero) for a scripted player.
std::vector<ControlInput> hold_velocity_controls(const VehicleState& x0, int horizon,
                                                 const ControlProblem& problem);

/// Builds one player's fields from the others' atoms and fuses them.
PlayerField player_field(std::size_t player, const std::vector<Player>& players,
                         const std::vector<TrajectoryPlan>& plans, const GameConfig& config);

/// Iterates the best-response map: each player responds to the field built
/// from the others' previous plans. An initial application of the map
/// produces the first iterate; gaps are measured from there on.
Equilibrium fixed_point_iteration(const std::vector<Player>& players, const GameConfig& config,
                                  const std::vector<TrajectoryPlan>* warm_start = nullptr);

/// Geometric mean of successive gap ratios; empty with fewer than 3 gaps.
std::optional<double> estimate_contraction(const std::vector<double>& gaps);

}  // namespace iupf
