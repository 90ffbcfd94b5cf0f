#pragma once

#include "iupf/control.hpp"
#include "iupf/dynamics.hpp"
#include "iupf/fieldgrid.hpp"
#include "iupf/fields.hpp"
#include "iupf/fusion.hpp"
#include "iupf/population.hpp"
#include "iupf/toml_lite.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace iupf {

enum class RunMode { ReplanEveryStep, PlanOnce };

std::string_view to_string(RunMode mode);
RunMode parse_run_mode(std::string_view name);

struct VehicleSpec {
    std::string id;
    DrivingStyle style;
    bool is_host = false;
    double s = 0.0;            ///< [m]
    int lane = 1;              ///< lane index counted from the rightmost lane
    double speed = 0.0;        ///< [m/s]
    double target_speed = 0.0; ///< [m/s]
    int target_lane = 1;
    bool select_lane = false;
    bool scripted = false;
};

/// Style-level cost weights; target speed and lane are per vehicle.
struct StyleCost {
    double field_weight = 1.0;
    double terminal_lane_weight = 1.0;
    double terminal_speed_weight = 0.1;
    double penalty_weight = 10.0;
};

struct PlannerSettings {
    RunMode mode = RunMode::ReplanEveryStep;
    int horizon_steps = 40;
    int preview_stride = 5;
    BestResponseOptions best_response;
    int fp_max_iterations = 2;
    double w2_tol = 1e-3;
    double corridor_length = 100.0;
    double drift_gain = 0.0;
    bool warm_start = true;
};

struct Scenario {
    std::string name;
    std::uint64_t seed = 0;
    double lane_width = 3.75;
    int n_lanes = 3;
    double vehicle_width = 1.8;
    double dt = 0.1;
    double duration = 15.0;
    double sigma_w = 0.05;
    GridSpec grid;
    ActuatorLimits limits;
    FieldParams field;
    FusionParams fusion;
    std::array<StyleParameters, 3> styles{};
    std::array<StyleCost, 3> style_costs{};
    PlannerSettings planner;
    int snapshot_stride = 25;
    std::vector<VehicleSpec> vehicles;

    /// The fully resolved configuration, defaults and overrides included.
    toml::Document resolved;

    int n_steps() const;
    double lane_center(int lane) const;
    std::vector<double> lane_centers() const;
    /// |d| beyond which the road-edge penalty engages.
    double lateral_limit() const;
    std::size_t host_index() const;
    VehicleState initial_state(const VehicleSpec& v) const;
    CostParams cost_for(const VehicleSpec& v) const;

    /// Throws ValidationError listing every violated invariant.
    void validate() const;
};

/// Every schema key with its default value; vehicles are empty.
toml::Document default_document();

/// Default entry for one [[vehicles]] table.
toml::Document default_vehicle_entry();

/// One `dotted.key=value` assignment; array elements are addressed by index
/// (e.g. `vehicles.0.speed_mps`).
struct Override {
    std::string key;
    std::string value;
};

Override parse_override(std::string_view assignment);

/// Replaces an existing key; unknown keys raise ValidationError.
void apply_override(toml::Document& doc, const Override& ov);

/// Merges `doc` onto the defaults, applies the overrides and validates.
Scenario scenario_from_document(const toml::Document& doc, const std::vector<Override>& overrides = {});

Scenario load_scenario(const std::filesystem::path& path, const std::vector<Override>& overrides = {});

/// Human-readable listing of every schema key and its default.
std::string schema_help();

}  // namespace iupf
