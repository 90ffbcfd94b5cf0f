#pragma once

// Independent reference implementations used only by the tests: dense
// matrices, brute-force enumeration and finite differences.

#include "iupf/control.hpp"
#include "iupf/fieldgrid.hpp"
#include "iupf/population.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

// Zero-flux five-point Laplacian assembled entry by entry: a missing
// neighbour contributes no flux.
inline Eigen::MatrixXd dense_laplacian(const iupf::GridSpec& g) {
    const int n = g.size();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    const double cs = 1.0 / (g.h_s() * g.h_s());
    const double cd = 1.0 / (g.h_d() * g.h_d());
    auto idx = [&](int i, int j) { return i * g.n_d + j; };
    for (int i = 0; i < g.n_s; ++i) {
        for (int j = 0; j < g.n_d; ++j) {
            const int r = idx(i, j);
            if (i > 0) { L(r, idx(i - 1, j)) += cs; L(r, r) -= cs; }
            if (i < g.n_s - 1) { L(r, idx(i + 1, j)) += cs; L(r, r) -= cs; }
            if (j > 0) { L(r, idx(i, j - 1)) += cd; L(r, r) -= cd; }
            if (j < g.n_d - 1) { L(r, idx(i, j + 1)) += cd; L(r, r) -= cd; }
        }
    }
    return L;
}

// Minimum over all permutations of the mean squared matching cost.
inline double brute_force_w2(const iupf::PopulationMeasure& a, const iupf::PopulationMeasure& b) {
    const std::size_t n = a.atoms.size();
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            c += (a.atoms[i].state.vec() - b.atoms[static_cast<std::size_t>(perm[i])].state.vec()).squaredNorm();
        }
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::sqrt(best / static_cast<double>(n));
}

// Central differences of the total cost with respect to every control entry.
inline std::vector<iupf::Vector2> fd_control_gradient(const iupf::VehicleState& x0,
                                                      const std::vector<iupf::ControlInput>& us,
                                                      const iupf::ControlProblem& prob, double h) {
    auto cost = [&](const std::vector<iupf::ControlInput>& v) {
        iupf::TrajectoryPlan p;
        p.controls = v;
        p.states = iupf::rollout(x0, v, prob);
        return iupf::evaluate_cost(p, prob);
    };
    std::vector<iupf::Vector2> g(us.size());
    for (std::size_t k = 0; k < us.size(); ++k) {
        for (int c = 0; c < 2; ++c) {
            auto plus = us;
            auto minus = us;
            if (c == 0) {
                plus[k].a_s += h;
                minus[k].a_s -= h;
            } else {
                plus[k].omega_d += h;
                minus[k].omega_d -= h;
            }
            g[k][c] = (cost(plus) - cost(minus)) / (2.0 * h);
        }
    }
    return g;
}

// Unconstrained linear-quadratic problem written as one equality-constrained
// least-squares system over all states and controls (KKT matrix, dense LU):
//   min dt sum u'Ru/2 + w_l (d_K - d*)^2/2 + w_v (s'_K - v*)^2/2
//   s.t. x_0 = given, x_{k+1} = A x_k + B u_k.
struct LqSolution {
    std::vector<iupf::VehicleState> states;
    std::vector<iupf::ControlInput> controls;
};

inline LqSolution dense_lq(const iupf::VehicleState& x0, int K, const iupf::CostParams& cp,
                           const iupf::DynamicsModel& m) {
    const int nx = 6 * (K + 1);
    const int nu = 2 * K;
    const int nz = nx + nu;
    const int nc = 6 * (K + 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nz, nz);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(nz);
    const int xK = 6 * K;
    H(xK + 1, xK + 1) = cp.terminal_lane_weight;
    f(xK + 1) = -cp.terminal_lane_weight * cp.target_lane_offset;
    H(xK + 2, xK + 2) = cp.terminal_speed_weight;
    f(xK + 2) = -cp.terminal_speed_weight * cp.target_speed;
    for (int k = 0; k < K; ++k) {
        H(nx + 2 * k, nx + 2 * k) = m.dt() * cp.r_s;
        H(nx + 2 * k + 1, nx + 2 * k + 1) = m.dt() * cp.r_d;
    }
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(nc, nz);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(nc);
    C.block(0, 0, 6, 6).setIdentity();
    e.head(6) = x0.vec();
    for (int k = 0; k < K; ++k) {
        const int r = 6 * (k + 1);
        C.block(r, 6 * (k + 1), 6, 6) = Eigen::MatrixXd::Identity(6, 6);
        C.block(r, 6 * k, 6, 6) = -m.A();
        C.block(r, nx + 2 * k, 6, 2) = -m.B();
    }
    Eigen::MatrixXd KKT = Eigen::MatrixXd::Zero(nz + nc, nz + nc);
    KKT.topLeftCorner(nz, nz) = H;
    KKT.topRightCorner(nz, nc) = C.transpose();
    KKT.bottomLeftCorner(nc, nz) = C;
    Eigen::VectorXd rhs(nz + nc);
    rhs << -f, e;
    const Eigen::VectorXd z = KKT.fullPivLu().solve(rhs);
    LqSolution out;
    for (int k = 0; k <= K; ++k) out.states.push_back(iupf::VehicleState::from_vec(z.segment<6>(6 * k)));
    for (int k = 0; k < K; ++k) out.controls.push_back({z(nx + 2 * k), z(nx + 2 * k + 1)});
    return out;
}

// Smooth random field: a few random sinusoids sampled on the grid.
inline iupf::ScalarField random_smooth_field(const iupf::GridSpec& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    iupf::ScalarField f(g, 0.0);
    for (int t = 0; t < 4; ++t) {
        const double a = U(rng);
        const double ks = 0.05 * U(rng);
        const double kd = 0.6 * U(rng);
        const double ph = 3.0 * U(rng);
        for (int i = 0; i < g.n_s; ++i) {
            for (int j = 0; j < g.n_d; ++j) f(i, j) += a * std::sin(ks * g.s_at(i) + kd * g.d_at(j) + ph);
        }
    }
    return f;
}

}  // namespace oracle
