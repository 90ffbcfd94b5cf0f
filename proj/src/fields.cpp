#include "iupf/fields.hpp"

#include "iupf/errors.hpp"

#include <cmath>
#include <sstream>

namespace iupf {

void FieldParams::validate() const {
    if (!(tikhonov_B > 0.0) || !(tikhonov_R > 0.0)) {
        throw InvalidParameter("Tikhonov weights must be positive");
    }
    if (!(v_max > 0.0)) {
        throw InvalidParameter("v_max must be positive");
    }
    if (!(cg_tol > 0.0 && cg_tol < 1.0)) {
        throw InvalidParameter("cg_tol must lie in (0, 1)");
    }
    if (cg_max_iter < 1) {
        throw InvalidParameter("cg_max_iter must be at least 1");
    }
}

double kernel_G(double r, double lambda) { return std::exp(-r / lambda); }

double kernel_H(double r, double v, double lambda, double v_max) {
    return std::exp(-r / lambda) * (1.0 + (v * v) / (v_max * v_max));
}

namespace {

enum class SourceKind { Benefit, Risk };

ScalarField style_source(const StyleMeasure& sm, const GridSpec& grid, const FieldParams& params,
                         SourceKind kind) {
    ScalarField out(grid, 0.0);
    if (sm.measure.empty()) return out;
    const double amp = kind == SourceKind::Benefit ? sm.params.alpha_B : sm.params.alpha_R;
    const double lambda = kind == SourceKind::Benefit ? sm.params.lambda_B : sm.params.lambda_R;
    for (const Atom& a : sm.measure.atoms) {
        double scale = amp * a.weight;
        if (kind == SourceKind::Risk) {
            const double v2 = a.state.s_dot * a.state.s_dot + a.state.d_dot * a.state.d_dot;
            scale *= 1.0 + v2 / (params.v_max * params.v_max);
        }
        for (int i = 0; i < grid.n_s; ++i) {
            const double ds = grid.s_at(i) - a.state.s;
            for (int j = 0; j < grid.n_d; ++j) {
                const double dd = grid.d_at(j) - a.state.d;
                out(i, j) += scale * std::exp(-std::sqrt(ds * ds + dd * dd) / lambda);
            }
        }
    }
    if (params.smooth_sources) {
        out = gaussian_smooth(out, kind == SourceKind::Benefit ? sm.params.sigma_B : sm.params.sigma_R);
    }
    return out;
}

ScalarField total_source(const MeasuresByStyle& measures, const GridSpec& grid,
                         const FieldParams& params, SourceKind kind) {
    grid.validate();
    ScalarField out(grid, 0.0);
    for (const StyleMeasure& sm : measures) {
        if (sm.measure.empty()) continue;
        out.values() += style_source(sm, grid, params, kind).values();
    }
    return out;
}

std::vector<double> gaussian_taps(double sigma, double h) {
    const double sig = sigma / h;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sig)));
    std::vector<double> taps(2 * radius + 1);
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        taps[k + radius] = std::exp(-0.5 * (k * k) / (sig * sig));
        sum += taps[k + radius];
    }
    for (double& t : taps) t /= sum;
    return taps;
}

int reflect(int k, int n) {
    while (k < 0 || k >= n) {
        if (k < 0) k = -k - 1;
        if (k >= n) k = 2 * n - k - 1;
    }
    return k;
}

}  // namespace

ScalarField benefit_source(const MeasuresByStyle& measures, const GridSpec& grid,
                           const FieldParams& params) {
    return total_source(measures, grid, params, SourceKind::Benefit);
}

ScalarField risk_source(const MeasuresByStyle& measures, const GridSpec& grid,
                        const FieldParams& params) {
    return total_source(measures, grid, params, SourceKind::Risk);
}

ScalarField gaussian_smooth(const ScalarField& f, double sigma) {
    if (!(sigma > 0.0)) {
        throw InvalidParameter("smoothing radius must be positive");
    }
    const GridSpec& g = f.spec();
    const std::vector<double> ts = gaussian_taps(sigma, g.h_s());
    const std::vector<double> td = gaussian_taps(sigma, g.h_d());
    const int rs = static_cast<int>(ts.size() / 2);
    const int rd = static_cast<int>(td.size() / 2);

    ScalarField tmp(g, 0.0);
    for (int i = 0; i < g.n_s; ++i) {
        for (int j = 0; j < g.n_d; ++j) {
            double acc = 0.0;
            for (int k = -rs; k <= rs; ++k) acc += ts[k + rs] * f(reflect(i + k, g.n_s), j);
            tmp(i, j) = acc;
        }
    }
    ScalarField out(g, 0.0);
    for (int i = 0; i < g.n_s; ++i) {
        for (int j = 0; j < g.n_d; ++j) {
            double acc = 0.0;
            for (int k = -rd; k <= rd; ++k) acc += td[k + rd] * tmp(i, reflect(j + k, g.n_d));
            out(i, j) = acc;
        }
    }
    return out;
}

ScreenedPoissonSolution solve_screened_poisson_detailed(const ScalarField& source, double tikhonov,
                                                        const FieldParams& params) {
    if (!(tikhonov > 0.0)) {
        throw InvalidParameter("Tikhonov weight must be positive");
    }
    params.validate();
    const GridSpec& g = source.spec();
    const Eigen::VectorXd& b = source.values();
    const double bnorm = b.norm();

    ScreenedPoissonSolution sol{ScalarField(g, 0.0), 0, 0.0};
    if (bnorm == 0.0) return sol;

    auto apply = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
        apply_laplacian(g, x, out);
        out = tikhonov * x - out;
    };

    Eigen::VectorXd x = b / tikhonov;
    Eigen::VectorXd ax;
    apply(x, ax);
    Eigen::VectorXd r = b - ax;
    Eigen::VectorXd p = r;
    Eigen::VectorXd ap;
    double rr = r.squaredNorm();
    int it = 0;
    while (std::sqrt(rr) > params.cg_tol * bnorm) {
        if (it >= params.cg_max_iter) {
            std::ostringstream msg;
            msg << "screened Poisson CG did not reach tolerance " << params.cg_tol << " in "
                << params.cg_max_iter << " iterations (residual " << std::sqrt(rr) / bnorm << ")";
            throw ConvergenceError(msg.str(), std::sqrt(rr) / bnorm, it);
        }
        apply(p, ap);
        const double alpha = rr / p.dot(ap);
        x += alpha * p;
        r -= alpha * ap;
        const double rr_new = r.squaredNorm();
        p = r + (rr_new / rr) * p;
        rr = rr_new;
        ++it;
    }
    // Report the true residual rather than the recursively updated one.
    apply(x, ax);
    sol.residual = (ax - b).norm() / bnorm;
    sol.iterations = it;
    sol.field = ScalarField(g, std::move(x));
    return sol;
}

ScalarField solve_screened_poisson(const ScalarField& source, double tikhonov,
                                   const FieldParams& params) {
    return solve_screened_poisson_detailed(source, tikhonov, params).field;
}

double screened_energy(const ScalarField& f, const ScalarField& source, double tikhonov) {
    Eigen::VectorXd lf;
    apply_laplacian(f.spec(), f.values(), lf);
    const Eigen::VectorXd& v = f.values();
    // sum_edges c (f_a - f_b)^2 / 2 equals -v . lap(v) / 2.
    return -0.5 * v.dot(lf) + 0.5 * tikhonov * v.squaredNorm() - source.values().dot(v);
}

FieldPair build_fields(const MeasuresByStyle& measures, const GridSpec& grid,
                       const FieldParams& params) {
    params.validate();
    const ScalarField bsrc = benefit_source(measures, grid, params);
    const ScalarField rsrc = risk_source(measures, grid, params);
    ScreenedPoissonSolution b = solve_screened_poisson_detailed(bsrc, params.tikhonov_B, params);
    ScreenedPoissonSolution r = solve_screened_poisson_detailed(rsrc, params.tikhonov_R, params);
    FieldPair out;
    out.benefit = std::move(b.field);
    out.risk = std::move(r.field);
    out.benefit_iterations = b.iterations;
    out.risk_iterations = r.iterations;
    out.benefit_residual = b.residual;
    out.risk_residual = r.residual;
    return out;
}

}  // namespace iupf
