#pragma once

#include "iupf/dynamics.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace iupf {

enum class StyleLabel { Conservative = 0, Aggressive = 1, Cooperative = 2 };

inline constexpr std::array<StyleLabel, 3> kAllStyles = {
    StyleLabel::Conservative, StyleLabel::Aggressive, StyleLabel::Cooperative};

std::string_view to_string(StyleLabel label);
/// Throws InvalidParameter on an unknown name.
StyleLabel parse_style(std::string_view name);

/// Discrete behaviour class plus continuous traits, each in [0, 1].
struct DrivingStyle {
    StyleLabel label = StyleLabel::Cooperative;
    double aggressiveness = 0.5;
    double reaction_time = 0.5;
    double social_awareness = 0.5;

    void validate() const;
};

/// Label with its typical traits (aggressiveness 0.2 / 0.8 / 0.5).
DrivingStyle default_driving_style(StyleLabel label);

/// Field amplification, decay and spreading per style, and control-cost weights.
struct StyleParameters {
    double alpha_B = 1.0;
    double alpha_R = 1.0;
    double lambda_B = 155.0;  ///< benefit kernel decay length [m]
    double lambda_R = 8.0;    ///< risk kernel decay length [m]
    double sigma_B = 3.75;    ///< optional source smoothing radius [m]
    double sigma_R = 3.75;
    double r_s = 1.0;
    double r_d = 1.0;

    void validate() const;
};

/// Default table. Conservative drivers weigh risk most and benefit least,
/// aggressive drivers the reverse, cooperative drivers sit in between.
/// The control-cost weights are scaled by (1 - 0.5 * aggressiveness).
StyleParameters style_defaults(StyleLabel label, double aggressiveness = 0.5);
StyleParameters style_defaults(std::string_view label);

struct Vehicle {
    std::string id;
    VehicleState state;
    DrivingStyle style;
    StyleParameters params;
    bool is_host = false;
};

struct Atom {
    VehicleState state;
    double weight = 0.0;
    StyleLabel style = StyleLabel::Cooperative;
};

/// Discrete probability measure over R^6; weights sum to one unless empty.
struct PopulationMeasure {
    std::vector<Atom> atoms;

    bool empty() const { return atoms.empty(); }
    double total_weight() const;
    /// Uniform measure over the given states.
    static PopulationMeasure uniform(const std::vector<VehicleState>& states,
                                     StyleLabel style = StyleLabel::Cooperative);
};

/// Style-restricted sub-measures with the per-style field parameters that
/// shape their sources. An empty sub-measure contributes nothing.
struct StyleMeasure {
    PopulationMeasure measure;
    StyleParameters params;
};
using MeasuresByStyle = std::array<StyleMeasure, 3>;

inline const StyleMeasure& by_style(const MeasuresByStyle& m, StyleLabel s) {
    return m[static_cast<std::size_t>(s)];
}

/// Groups vehicles by style, dropping the vehicle with `exclude_id`, and
/// renormalizes each group to unit mass.
MeasuresByStyle partition_by_style(const std::vector<Vehicle>& vehicles,
                                   std::optional<std::string_view> exclude_id = std::nullopt);

/// Same grouping for pre-built weighted atoms (e.g. several predicted states
/// per vehicle). `params` supplies the field parameters per style.
MeasuresByStyle partition_atoms_by_style(const std::vector<Atom>& atoms,
                                         const std::array<StyleParameters, 3>& params);

/// Exact W2 between two uniform measures with equal atom counts, via
/// permutation enumeration for up to 8 atoms and the Hungarian method beyond.
double wasserstein2(const PopulationMeasure& m1, const PopulationMeasure& m2);

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method).
/// Returns the assignment row -> column.
std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost);

/// Pairwise repulsion kernel embedded in the velocity slots. A gain of zero
/// disables the interaction drift.
struct DriftKernel {
    double gain = 0.0;
};

Vector6 mean_field_drift(const VehicleState& x, const MeasuresByStyle& measures,
                         const DriftKernel& kernel);

}  // namespace iupf
