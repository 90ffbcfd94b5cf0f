#include "iupf/population.hpp"

#include "iupf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace iupf {

std::string_view to_string(StyleLabel label) {
    switch (label) {
        case StyleLabel::Conservative: return "conservative";
        case StyleLabel::Aggressive: return "aggressive";
        case StyleLabel::Cooperative: return "cooperative";
    }
    return "unknown";
}

StyleLabel parse_style(std::string_view name) {
    for (StyleLabel s : kAllStyles) {
        if (to_string(s) == name) return s;
    }
    throw InvalidParameter("unknown driving style '" + std::string(name) + "'");
}

void DrivingStyle::validate() const {
    for (double v : {aggressiveness, reaction_time, social_awareness}) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw InvalidParameter("continuous style components must lie in [0, 1]");
        }
    }
}

void StyleParameters::validate() const {
    for (double v : {alpha_B, alpha_R, lambda_B, lambda_R, sigma_B, sigma_R, r_s, r_d}) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw InvalidParameter("style parameters must be strictly positive");
        }
    }
}

DrivingStyle default_driving_style(StyleLabel label) {
    DrivingStyle s;
    s.label = label;
    switch (label) {
        case StyleLabel::Conservative: s.aggressiveness = 0.2; break;
        case StyleLabel::Aggressive: s.aggressiveness = 0.8; break;
        case StyleLabel::Cooperative: s.aggressiveness = 0.5; break;
    }
    return s;
}

StyleParameters style_defaults(StyleLabel label, double aggressiveness) {
    if (!(aggressiveness >= 0.0 && aggressiveness <= 1.0)) {
        throw InvalidParameter("aggressiveness must lie in [0, 1]");
    }
    StyleParameters p;
    switch (label) {
        case StyleLabel::Conservative:
            p.alpha_B = 0.6;
            p.alpha_R = 1.4;
            break;
        case StyleLabel::Aggressive:
            p.alpha_B = 1.4;
            p.alpha_R = 0.7;
            break;
        case StyleLabel::Cooperative:
            p.alpha_B = 1.0;
            p.alpha_R = 1.0;
            break;
    }
    p.lambda_B = 155.0;
    p.lambda_R = 8.0;
    p.sigma_B = 3.75;
    p.sigma_R = 3.75;
    p.r_s = 1.0 - 0.5 * aggressiveness;
    p.r_d = 1.0 - 0.5 * aggressiveness;
    return p;
}

StyleParameters style_defaults(std::string_view label) {
    const StyleLabel s = parse_style(label);
    return style_defaults(s, default_driving_style(s).aggressiveness);
}

double PopulationMeasure::total_weight() const {
    double w = 0.0;
    for (const Atom& a : atoms) w += a.weight;
    return w;
}

PopulationMeasure PopulationMeasure::uniform(const std::vector<VehicleState>& states, StyleLabel style) {
    PopulationMeasure m;
    if (states.empty()) return m;
    const double w = 1.0 / static_cast<double>(states.size());
    for (const VehicleState& s : states) {
        m.atoms.push_back({s, w, style});
    }
    return m;
}

namespace {

void renormalize(PopulationMeasure& m) {
    const double total = m.total_weight();
    if (total <= 0.0) {
        m.atoms.clear();
        return;
    }
    for (Atom& a : m.atoms) a.weight /= total;
}

}  // namespace

MeasuresByStyle partition_by_style(const std::vector<Vehicle>& vehicles,
                                   std::optional<std::string_view> exclude_id) {
    MeasuresByStyle out;
    std::array<bool, 3> have_params{};
    for (const Vehicle& v : vehicles) {
        if (exclude_id && v.id == *exclude_id) continue;
        auto& slot = out[static_cast<std::size_t>(v.style.label)];
        slot.measure.atoms.push_back({v.state, 1.0, v.style.label});
        if (!have_params[static_cast<std::size_t>(v.style.label)]) {
            slot.params = v.params;
            have_params[static_cast<std::size_t>(v.style.label)] = true;
        }
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (!have_params[k]) {
            out[k].params = style_defaults(kAllStyles[k], default_driving_style(kAllStyles[k]).aggressiveness);
        }
        renormalize(out[k].measure);
    }
    return out;
}

MeasuresByStyle partition_atoms_by_style(const std::vector<Atom>& atoms,
                                         const std::array<StyleParameters, 3>& params) {
    MeasuresByStyle out;
    for (std::size_t k = 0; k < out.size(); ++k) out[k].params = params[k];
    for (const Atom& a : atoms) {
        out[static_cast<std::size_t>(a.style)].measure.atoms.push_back(a);
    }
    for (auto& slot : out) renormalize(slot.measure);
    return out;
}

std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    if (cost.cols() != n) {
        throw InvalidParameter("assignment cost matrix must be square");
    }
    // Shortest augmenting path with dual potentials, 1-based bookkeeping.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> match_col(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        match_col[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const int i0 = match_col[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match_col[j0] != 0);
        do {
            const int j1 = way[j0];
            match_col[j0] = match_col[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j) {
        if (match_col[j] > 0) row_to_col[match_col[j] - 1] = j - 1;
    }
    return row_to_col;
}

double wasserstein2(const PopulationMeasure& m1, const PopulationMeasure& m2) {
    const std::size_t n = m1.atoms.size();
    if (n != m2.atoms.size()) {
        throw InvalidParameter("wasserstein2: measures must have equal atom counts");
    }
    if (n == 0) return 0.0;
    const double w = 1.0 / static_cast<double>(n);
    for (const auto* m : {&m1, &m2}) {
        for (const Atom& a : m->atoms) {
            if (std::abs(a.weight - w) > 1e-12) {
                throw InvalidParameter("wasserstein2: only uniform weights are supported");
            }
        }
    }

    const int N = static_cast<int>(n);
    Eigen::MatrixXd cost(N, N);
    for (int i = 0; i < N; ++i) {
        const Vector6 xi = m1.atoms[i].state.vec();
        for (int j = 0; j < N; ++j) {
            cost(i, j) = (xi - m2.atoms[j].state.vec()).squaredNorm();
        }
    }

    double best = 0.0;
    if (N <= 8) {
        std::vector<int> perm(N);
        std::iota(perm.begin(), perm.end(), 0);
        best = std::numeric_limits<double>::infinity();
        do {
            double c = 0.0;
            for (int i = 0; i < N; ++i) c += cost(i, perm[i]);
            best = std::min(best, c);
        } while (std::next_permutation(perm.begin(), perm.end()));
    } else {
        const std::vector<int> assign = min_cost_assignment(cost);
        for (int i = 0; i < N; ++i) best += cost(i, assign[i]);
    }
    return std::sqrt(std::max(best, 0.0) * w);
}

Vector6 mean_field_drift(const VehicleState& x, const MeasuresByStyle& measures,
                         const DriftKernel& kernel) {
    Vector6 drift = Vector6::Zero();
    if (kernel.gain == 0.0) return drift;
    const Vector2 px = project_position(x);
    for (const StyleMeasure& sm : measures) {
        for (const Atom& a : sm.measure.atoms) {
            const Vector2 diff = px - project_position(a.state);
            const double r = diff.norm();
            if (r == 0.0) continue;
            // Repulsive: pushes x away from the atom.
            const double mag = kernel.gain * a.weight * std::exp(-r / sm.params.lambda_R);
            drift[2] += mag * diff[0] / r;
            drift[3] += mag * diff[1] / r;
        }
    }
    return drift;
}

}  // namespace iupf
