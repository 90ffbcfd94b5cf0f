#pragma once

#include "iupf/fieldgrid.hpp"

#include <memory>

namespace iupf {

struct FusionParams {
    double epsilon = 2.0;  ///< interface width in lateral grid spacings
    double gamma1 = 3.3;
    double gamma2 = 3.3;
    double gamma3 = 0.5;
    double gamma4 = 0.5;
    double gamma5 = 0.1;
    double alpha1 = 2.8;
    double alpha2 = 2.8;
    double tau_step = 1e-4;
    int max_steps = 5000;
    double steady_tol = 1e-6;     ///< infinity-norm change per step
    double stabilization = 2.0;   ///< implicit linear stabilization constant S
    double temperature = 0.1;     ///< lane-selection softmax temperature, consumed by control

    void validate() const;
    /// Interface width in metres on `grid`.
    double epsilon_m(const GridSpec& grid) const { return epsilon * grid.h_d(); }
};

struct UnifiedField {
    ScalarField phi;
    int steps_taken = 0;
    double final_change = 0.0;
    double residual = 0.0;
    bool converged = false;  ///< stopped on steady_tol rather than max_steps
};

/// W'(phi) for W = (phi^2 - 1)^2 / 4.
inline double double_well_prime(double phi) { return phi * phi * phi - phi; }
inline double double_well(double phi) {
    const double q = phi * phi - 1.0;
    return 0.25 * q * q;
}

/// Pointwise coupling between normalized benefit and risk and the unified field.
double coupling_chi(double bbar, double rbar, double phi, const Eigen::Vector2d& grad_b,
                    const Eigen::Vector2d& grad_r, const FusionParams& p);

/// The coupling evaluated as chi = base + slope * phi on every node.
struct CouplingTerms {
    ScalarField base;
    ScalarField slope;

    ScalarField evaluate(const ScalarField& phi) const;
};

/// Normalizes B and R and precomputes the coupling on their grid.
CouplingTerms make_coupling(const ScalarField& benefit, const ScalarField& risk, const FusionParams& p);

/// Default initial condition: normalized benefit minus normalized risk.
ScalarField initial_phi(const ScalarField& benefit, const ScalarField& risk);

/// Stabilized semi-implicit stepper for
///   dphi/dtau = lap[W'(phi) - chi - eps^2 lap phi]
/// with zero-flux edges. The fourth-order term and a linear stabilization
/// S * lap(phi) are implicit and inverted with a cosine transform; W' and chi
/// are explicit. The grid mean of phi is preserved.
class CahnHilliardStepper {
public:
    CahnHilliardStepper(const GridSpec& grid, const FusionParams& p);
    ~CahnHilliardStepper();
    CahnHilliardStepper(const CahnHilliardStepper&) = delete;
    CahnHilliardStepper& operator=(const CahnHilliardStepper&) = delete;

    /// Advances phi by one artificial time step; returns the infinity-norm change.
    double step(ScalarField& phi, const CouplingTerms* coupling) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Evolves from phi0 until the per-step change drops below steady_tol or
/// max_steps is reached. Throws InstabilityError when |phi| exceeds 10.
UnifiedField evolve_cahn_hilliard(const ScalarField& phi0, const ScalarField& benefit,
                                  const ScalarField& risk, const FusionParams& p);

/// Relative deviation of mu = eps^2 lap phi - W'(phi) + chi from its mean.
double euler_lagrange_residual(const ScalarField& phi, const ScalarField& benefit,
                               const ScalarField& risk, const FusionParams& p);

/// sum over nodes of eps^2/2 |grad phi|^2 + W(phi), gradient in edge form.
double ginzburg_landau_energy(const ScalarField& phi, const FusionParams& p);

}  // namespace iupf
