#pragma once

#include "iupf/fieldgrid.hpp"
#include "iupf/population.hpp"

namespace iupf {

struct FieldParams {
    double tikhonov_B = 1.0;  ///< weight of the quadratic term in the benefit energy
    double tikhonov_R = 1.0;
    double v_max = 33.3;      ///< speed normalization of the risk kernel [m/s]
    double cg_tol = 1e-10;    ///< relative residual target
    int cg_max_iter = 5000;
    bool smooth_sources = false;  ///< Gaussian pre-smoothing with sigma_B / sigma_R

    void validate() const;
};

/// Benefit and risk magnitudes on the grid, both nonnegative.
struct FieldPair {
    ScalarField benefit;
    ScalarField risk;
    int benefit_iterations = 0;
    int risk_iterations = 0;
    double benefit_residual = 0.0;
    double risk_residual = 0.0;
};

/// exp(-r / lambda)
double kernel_G(double r, double lambda);

/// exp(-r / lambda) * (1 + v^2 / v_max^2)
double kernel_H(double r, double v, double lambda, double v_max);

/// Sum over styles of alpha_B * sum_atoms w * G(|pi(x) - r|).
ScalarField benefit_source(const MeasuresByStyle& measures, const GridSpec& grid,
                           const FieldParams& params = {});

/// Sum over styles of alpha_R * sum_atoms w * H(|pi(x) - r|, |(s', d')|).
ScalarField risk_source(const MeasuresByStyle& measures, const GridSpec& grid,
                        const FieldParams& params = {});

/// Separable Gaussian blur with reflecting edges; sigma in metres.
ScalarField gaussian_smooth(const ScalarField& f, double sigma);

struct ScreenedPoissonSolution {
    ScalarField field;
    int iterations = 0;
    double residual = 0.0;  ///< ||(-lap + t) F - src|| / ||src||
};

/// Conjugate gradients on (-lap + tikhonov) F = source with zero-flux edges.
/// Throws ConvergenceError (carrying the last residual) at the iteration cap.
ScreenedPoissonSolution solve_screened_poisson_detailed(const ScalarField& source, double tikhonov,
                                                        const FieldParams& params);

ScalarField solve_screened_poisson(const ScalarField& source, double tikhonov,
                                   const FieldParams& params);

/// Discrete energy 1/2 |grad F|^2 + t/2 F^2 - source * F, summed over nodes
/// (cell area factored out). Minimized by the screened-Poisson solution.
double screened_energy(const ScalarField& f, const ScalarField& source, double tikhonov);

/// Sources for every style, optional smoothing, then the two elliptic solves.
FieldPair build_fields(const MeasuresByStyle& measures, const GridSpec& grid,
                       const FieldParams& params);

}  // namespace iupf
