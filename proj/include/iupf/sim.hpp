#pragma once

#include "iupf/control.hpp"
#include "iupf/scenario.hpp"

#include <exception>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace iupf {

struct VehicleRecord {
    std::string id;
    VehicleState state;
    ControlInput control;  ///< applied from this state; zero on the final record
};

struct FieldStats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
};

FieldStats field_stats(const ScalarField& f);

struct StepRecord {
    int step = 0;
    double t = 0.0;
    std::vector<VehicleRecord> vehicles;
    double min_separation = std::numeric_limits<double>::infinity();
    FieldStats benefit, risk, phi;  ///< over the host's fields
    double phi_host = 0.0;
    double bbar_host = 0.0;
    double rbar_host = 0.0;
};

struct FieldSnapshot {
    int step = 0;
    ScalarField benefit;
    ScalarField risk;
    ScalarField unified;
};

struct ConvergenceRecord {
    int step = 0;
    ConvergenceReport report;
};

struct SafetyReport {
    double min_separation = std::numeric_limits<double>::infinity();
    double time_below_warning = 0.0;   ///< [s]
    double time_below_critical = 0.0;  ///< [s]
    double warning_threshold = 15.0;
    double critical_threshold = 8.0;
};

struct RunLog {
    Scenario scenario;
    RunMode mode = RunMode::ReplanEveryStep;
    std::vector<std::string> ids;
    std::vector<StepRecord> steps;
    std::vector<FieldSnapshot> snapshots;
    std::vector<ConvergenceRecord> convergence;
    std::vector<TrajectoryPlan> initial_plans;  ///< plans computed at step 0
};

/// A module error interrupted the loop; the log up to that point is attached.
class SimulationError : public Error {
public:
    SimulationError(const std::string& what, RunLog partial, std::exception_ptr cause)
        : Error(what), partial_(std::move(partial)), cause_(std::move(cause)) {}
    const RunLog& partial_log() const { return partial_; }
    /// Rethrows the original error.
    [[noreturn]] void rethrow_cause() const { std::rethrow_exception(cause_); }

private:
    RunLog partial_;
    std::exception_ptr cause_;
};

/// Smallest pairwise planar distance; infinity for fewer than two states.
double min_separation(const std::vector<VehicleState>& states);

/// Players for the fixed-point iteration at the given states.
std::vector<Player> make_players(const Scenario& sc, const std::vector<VehicleState>& states);

/// Fixed-point configuration derived from the scenario.
GameConfig make_game_config(const Scenario& sc, int horizon_steps);

/// Host benefit, risk and unified fields at the initial configuration.
FieldSnapshot initial_fields(const Scenario& sc);

/// Runs the closed loop. `mode` overrides the scenario's planner mode.
RunLog run(const Scenario& sc, std::optional<RunMode> mode = std::nullopt);

SafetyReport safety_report(const RunLog& log);

/// Writes steps.jsonl, fields_t<k>.csv, convergence.jsonl, safety.json and
/// scenario.resolved.toml into `dir`, creating it if needed.
void export_run(const RunLog& log, const std::filesystem::path& dir);

/// Serialized StepRecord (one steps.jsonl line, without newline).
std::string step_record_json(const StepRecord& rec);

}  // namespace iupf
