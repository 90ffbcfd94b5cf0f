#include "iupf/fusion.hpp"

#include "iupf/errors.hpp"

#include <fftw3.h>

#include <cmath>
#include <numbers>
#include <sstream>

namespace iupf {

void FusionParams::validate() const {
    if (!(epsilon > 0.0)) throw InvalidParameter("fusion epsilon must be positive");
    for (double g : {gamma1, gamma2, gamma3, gamma4, gamma5}) {
        if (!(g >= 0.0)) throw InvalidParameter("fusion coupling weights must be nonnegative");
    }
    if (!(alpha1 > 1.0) || !(alpha2 > 1.0)) {
        throw InvalidParameter("fusion exponents must exceed 1");
    }
    if (!(tau_step > 0.0)) throw InvalidParameter("tau_step must be positive");
    if (max_steps < 0) throw InvalidParameter("max_steps must be nonnegative");
    if (!(steady_tol > 0.0)) throw InvalidParameter("steady_tol must be positive");
    if (!(stabilization >= 0.0)) throw InvalidParameter("stabilization must be nonnegative");
    if (!(temperature >= 0.0)) throw InvalidParameter("temperature must be nonnegative");
}

double coupling_chi(double bbar, double rbar, double phi, const Eigen::Vector2d& grad_b,
                    const Eigen::Vector2d& grad_r, const FusionParams& p) {
    constexpr double pi = std::numbers::pi;
    return p.gamma1 * std::pow(bbar, p.alpha1) - p.gamma2 * std::pow(rbar, p.alpha2) +
           p.gamma3 * bbar * rbar * std::sin(pi * bbar) * std::cos(pi * rbar) +
           p.gamma4 * phi * (bbar * bbar - rbar * rbar) + p.gamma5 * grad_b.dot(grad_r);
}

ScalarField CouplingTerms::evaluate(const ScalarField& phi) const {
    return ScalarField(phi.spec(), (base.values().array() + slope.values().array() * phi.values().array()).matrix());
}

CouplingTerms make_coupling(const ScalarField& benefit, const ScalarField& risk, const FusionParams& p) {
    if (!(benefit.spec() == risk.spec())) {
        throw InvalidParameter("benefit and risk fields must share a grid");
    }
    const ScalarField bbar = normalize(benefit);
    const ScalarField rbar = normalize(risk);
    const VectorField gb = gradient(bbar);
    const VectorField gr = gradient(rbar);
    const GridSpec& g = benefit.spec();
    CouplingTerms c{ScalarField(g), ScalarField(g)};
    for (int k = 0; k < g.size(); ++k) {
        const double b = bbar.values()[k];
        const double r = rbar.values()[k];
        const Eigen::Vector2d grad_b(gb.ds.values()[k], gb.dd.values()[k]);
        const Eigen::Vector2d grad_r(gr.ds.values()[k], gr.dd.values()[k]);
        c.base.values()[k] = coupling_chi(b, r, 0.0, grad_b, grad_r, p);
        c.slope.values()[k] = p.gamma4 * (b * b - r * r);
    }
    return c;
}

ScalarField initial_phi(const ScalarField& benefit, const ScalarField& risk) {
    const ScalarField bbar = normalize(benefit);
    const ScalarField rbar = normalize(risk);
    return ScalarField(benefit.spec(), bbar.values() - rbar.values());
}

struct CahnHilliardStepper::Impl {
    GridSpec grid;
    FusionParams params;
    double eps2 = 0.0;
    Eigen::VectorXd inv_symbol;  // 1 / (1 + tau eps^2 k^4 + tau S k^2) / (4 n_s n_d)
    mutable Eigen::VectorXd work;
    mutable Eigen::VectorXd lap;
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;

    ~Impl() {
        if (forward) fftw_destroy_plan(forward);
        if (backward) fftw_destroy_plan(backward);
    }
};

CahnHilliardStepper::CahnHilliardStepper(const GridSpec& grid, const FusionParams& p)
    : impl_(std::make_unique<Impl>()) {
    grid.validate();
    p.validate();
    Impl& m = *impl_;
    m.grid = grid;
    m.params = p;
    const double eps = p.epsilon_m(grid);
    m.eps2 = eps * eps;
    const int ns = grid.n_s;
    const int nd = grid.n_d;
    m.work.resize(grid.size());
    m.lap.resize(grid.size());

    // Eigenvalues of the zero-flux Laplacian in the DCT-II basis.
    constexpr double pi = std::numbers::pi;
    const double hs2 = grid.h_s() * grid.h_s();
    const double hd2 = grid.h_d() * grid.h_d();
    const double norm = 4.0 * ns * nd;
    m.inv_symbol.resize(grid.size());
    for (int i = 0; i < ns; ++i) {
        const double ks = (2.0 - 2.0 * std::cos(pi * i / ns)) / hs2;
        for (int j = 0; j < nd; ++j) {
            const double kd = (2.0 - 2.0 * std::cos(pi * j / nd)) / hd2;
            const double k2 = ks + kd;
            m.inv_symbol[i * nd + j] =
                1.0 / ((1.0 + p.tau_step * m.eps2 * k2 * k2 + p.tau_step * p.stabilization * k2) * norm);
        }
    }

    double* buf = m.work.data();
    m.forward = fftw_plan_r2r_2d(ns, nd, buf, buf, FFTW_REDFT10, FFTW_REDFT10, FFTW_ESTIMATE);
    m.backward = fftw_plan_r2r_2d(ns, nd, buf, buf, FFTW_REDFT01, FFTW_REDFT01, FFTW_ESTIMATE);
    if (!m.forward || !m.backward) {
        throw NumericError("failed to create cosine transform plans");
    }
}

CahnHilliardStepper::~CahnHilliardStepper() = default;

double CahnHilliardStepper::step(ScalarField& phi, const CouplingTerms* coupling) const {
    const Impl& m = *impl_;
    const double tau = m.params.tau_step;
    const double S = m.params.stabilization;
    Eigen::VectorXd& v = phi.values();
    const int n = m.grid.size();

    // Explicit part of the chemical potential: W'(phi) - chi - S phi.
    for (int k = 0; k < n; ++k) {
        double mu = double_well_prime(v[k]) - S * v[k];
        if (coupling) {
            mu -= coupling->base.values()[k] + coupling->slope.values()[k] * v[k];
        }
        m.work[k] = mu;
    }
    apply_laplacian(m.grid, m.work, m.lap);
    m.work = v + tau * m.lap;

    fftw_execute_r2r(m.forward, m.work.data(), m.work.data());
    m.work.array() *= m.inv_symbol.array();
    fftw_execute_r2r(m.backward, m.work.data(), m.work.data());

    const double change = (m.work - v).lpNorm<Eigen::Infinity>();
    v = m.work;
    return change;
}

UnifiedField evolve_cahn_hilliard(const ScalarField& phi0, const ScalarField& benefit,
                                  const ScalarField& risk, const FusionParams& p) {
    if (!(phi0.spec() == benefit.spec()) || !(phi0.spec() == risk.spec())) {
        throw InvalidParameter("evolve_cahn_hilliard: fields must share one grid");
    }
    const CouplingTerms coupling = make_coupling(benefit, risk, p);
    const CahnHilliardStepper stepper(phi0.spec(), p);

    UnifiedField out;
    out.phi = phi0;
    for (int step = 0; step < p.max_steps; ++step) {
        out.final_change = stepper.step(out.phi, &coupling);
        out.steps_taken = step + 1;
        const double peak = out.phi.values().lpNorm<Eigen::Infinity>();
        if (!(peak <= 10.0)) {
            std::ostringstream msg;
            msg << "Cahn-Hilliard stepping diverged at step " << out.steps_taken
                << " (|phi| = " << peak << "); reduce tau_step (currently " << p.tau_step << ")";
            throw InstabilityError(msg.str());
        }
        if (out.final_change < p.steady_tol) {
            out.converged = true;
            break;
        }
    }
    out.residual = euler_lagrange_residual(out.phi, benefit, risk, p);
    return out;
}

double euler_lagrange_residual(const ScalarField& phi, const ScalarField& benefit,
                               const ScalarField& risk, const FusionParams& p) {
    const CouplingTerms coupling = make_coupling(benefit, risk, p);
    const double eps = p.epsilon_m(phi.spec());
    Eigen::VectorXd lap;
    apply_laplacian(phi.spec(), phi.values(), lap);
    const Eigen::VectorXd chi = coupling.evaluate(phi).values();
    Eigen::VectorXd mu = eps * eps * lap + chi;
    for (int k = 0; k < mu.size(); ++k) mu[k] -= double_well_prime(phi.values()[k]);
    const double mean = mu.mean();
    return (mu.array() - mean).matrix().norm() / (mu.norm() + 1e-15);
}

double ginzburg_landau_energy(const ScalarField& phi, const FusionParams& p) {
    const double eps = p.epsilon_m(phi.spec());
    Eigen::VectorXd lap;
    apply_laplacian(phi.spec(), phi.values(), lap);
    double e = -0.5 * eps * eps * phi.values().dot(lap);
    for (int k = 0; k < phi.values().size(); ++k) e += double_well(phi.values()[k]);
    return e;
}

}  // namespace iupf
