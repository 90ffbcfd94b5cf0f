#include "iupf/control.hpp"

#include "iupf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace iupf {

void CostParams::validate() const {
    if (!(r_s > 0.0) || !(r_d > 0.0)) throw InvalidParameter("control-cost weights must be positive");
    if (!(terminal_lane_weight >= 0.0) || !(terminal_speed_weight >= 0.0)) {
        throw InvalidParameter("terminal weights must be nonnegative");
    }
    if (!(target_speed >= 0.0)) throw InvalidParameter("target_speed must be nonnegative");
    if (!std::isfinite(target_lane_offset)) throw InvalidParameter("target_lane_offset must be finite");
    if (!(field_weight >= 0.0)) throw InvalidParameter("field_weight must be nonnegative");
    if (!(penalty_weight >= 0.0)) throw InvalidParameter("penalty_weight must be nonnegative");
    if (!(lateral_limit > 0.0)) throw InvalidParameter("lateral_limit must be positive");
}

namespace {

double hinge(double excess) { return excess > 0.0 ? excess : 0.0; }

Vector6 penalty_gradient(const VehicleState& x, const CostParams& cp) {
    Vector6 g = Vector6::Zero();
    const double edge = hinge(std::abs(x.d) - cp.lateral_limit);
    g[1] = 2.0 * cp.penalty_weight * edge * (x.d >= 0.0 ? 1.0 : -1.0);
    const double slow = hinge(-x.s_dot);
    const double fast = hinge(x.s_dot - 1.2 * cp.target_speed);
    g[2] = 2.0 * cp.penalty_weight * (fast - slow);
    return g;
}

// d(drift)/dx; the drift reacts to position only and lands in the velocity slots.
Matrix6 drift_jacobian(const VehicleState& x, const MeasuresByStyle& measures, const DriftKernel& kernel) {
    Matrix6 J = Matrix6::Zero();
    if (kernel.gain == 0.0) return J;
    const Vector2 px = project_position(x);
    for (const StyleMeasure& sm : measures) {
        for (const Atom& a : sm.measure.atoms) {
            const Vector2 diff = px - project_position(a.state);
            const double r = diff.norm();
            if (r == 0.0) continue;
            const Vector2 u = diff / r;
            const double mag = kernel.gain * a.weight * std::exp(-r / sm.params.lambda_R);
            const Eigen::Matrix2d block =
                mag * ((Eigen::Matrix2d::Identity() - u * u.transpose()) / r - u * u.transpose() / sm.params.lambda_R);
            J.block<2, 2>(2, 0) += block;
        }
    }
    return J;
}

double control_energy(const ControlInput& u, const CostParams& cp) {
    return 0.5 * (cp.r_s * u.a_s * u.a_s + cp.r_d * u.omega_d * u.omega_d);
}

}  // namespace

double constraint_penalty(const VehicleState& x, const CostParams& cp) {
    const double edge = hinge(std::abs(x.d) - cp.lateral_limit);
    const double slow = hinge(-x.s_dot);
    const double fast = hinge(x.s_dot - 1.2 * cp.target_speed);
    return cp.penalty_weight * (edge * edge + slow * slow + fast * fast);
}

double running_cost(const VehicleState& x, const ControlInput& u, const ControlProblem& problem) {
    double phi = 0.0;
    if (problem.phi) phi = sample_bilinear(*problem.phi, project_position(x), problem.domain);
    return -problem.cost.field_weight * phi + control_energy(u, problem.cost) + constraint_penalty(x, problem.cost);
}

Vector6 running_cost_gradient(const VehicleState& x, const ControlProblem& problem) {
    Vector6 g = penalty_gradient(x, problem.cost);
    if (problem.phi) {
        const BilinearSample b = sample_bilinear_with_gradient(*problem.phi, project_position(x), problem.domain);
        g[0] -= problem.cost.field_weight * b.ds;
        g[1] -= problem.cost.field_weight * b.dd;
    }
    return g;
}

double terminal_cost(const VehicleState& x, const CostParams& cp) {
    const double ed = x.d - cp.target_lane_offset;
    const double ev = x.s_dot - cp.target_speed;
    return 0.5 * cp.terminal_lane_weight * ed * ed + 0.5 * cp.terminal_speed_weight * ev * ev;
}

Vector6 terminal_cost_gradient(const VehicleState& x, const CostParams& cp) {
    Vector6 g = Vector6::Zero();
    g[1] = cp.terminal_lane_weight * (x.d - cp.target_lane_offset);
    g[2] = cp.terminal_speed_weight * (x.s_dot - cp.target_speed);
    return g;
}

double hamiltonian(const VehicleState& x, const ControlInput& u, const Vector6& y,
                   const ControlProblem& problem) {
    const DynamicsModel& m = problem.model;
    const Vector6 f = m.A() * x.vec() + m.B() * u.vec() +
                      m.dt() * mean_field_drift(x, problem.drift_measures, problem.drift);
    return running_cost(x, u, problem) + y.dot(f);
}

VehicleState planning_step(const VehicleState& x, const ControlInput& u, const ControlProblem& problem) {
    VehicleState next = propagate(problem.model, x, u);
    if (problem.drift.gain != 0.0) {
        next = VehicleState::from_vec(next.vec() +
                                      problem.model.dt() * mean_field_drift(x, problem.drift_measures, problem.drift));
    }
    return clamp_acceleration(next, problem.limits.accel_max);
}

std::vector<VehicleState> rollout(const VehicleState& x0, const std::vector<ControlInput>& controls,
                                  const ControlProblem& problem) {
    std::vector<VehicleState> xs;
    xs.reserve(controls.size() + 1);
    xs.push_back(x0);
    for (const ControlInput& u : controls) xs.push_back(planning_step(xs.back(), u, problem));
    return xs;
}

double evaluate_cost(const TrajectoryPlan& plan, const ControlProblem& problem) {
    if (plan.states.size() != plan.controls.size() + 1) {
        throw InvalidParameter("plan must hold one more state than controls");
    }
    const double dt = problem.model.dt();
    double j = 0.0;
    for (std::size_t k = 0; k < plan.controls.size(); ++k) {
        j += dt * running_cost(plan.states[k], plan.controls[k], problem);
    }
    return j + terminal_cost(plan.states.back(), problem.cost);
}

std::vector<Vector6> backward_sweep(const TrajectoryPlan& plan, const ControlProblem& problem) {
    const std::size_t K = plan.controls.size();
    if (plan.states.size() != K + 1) throw InvalidParameter("plan must hold one more state than controls");
    const DynamicsModel& m = problem.model;
    const double dt = m.dt();
    const double amax = problem.limits.accel_max;

    // Zero the acceleration components the saturation held at the bound.
    auto through_clamp = [&](std::size_t k, Vector6 y) {
        if (k == 0) return y;
        const VehicleState pre = propagate(m, plan.states[k - 1], plan.controls[k - 1]);
        Vector6 z = pre.vec();
        if (problem.drift.gain != 0.0) {
            z += dt * mean_field_drift(plan.states[k - 1], problem.drift_measures, problem.drift);
        }
        for (int i = 4; i < 6; ++i) {
            if (std::abs(z[i]) > amax) y[i] = 0.0;
        }
        return y;
    };

    std::vector<Vector6> ys(K + 1);
    ys[K] = through_clamp(K, terminal_cost_gradient(plan.states[K], problem.cost));
    for (std::size_t k = K; k-- > 0;) {
        Matrix6 F = m.A();
        if (problem.drift.gain != 0.0) {
            F += dt * drift_jacobian(plan.states[k], problem.drift_measures, problem.drift);
        }
        Vector6 y = dt * running_cost_gradient(plan.states[k], problem) + F.transpose() * ys[k + 1];
        ys[k] = through_clamp(k, y);
    }
    return ys;
}

std::vector<Vector2> control_gradient(const TrajectoryPlan& plan, const std::vector<Vector6>& adjoints,
                                      const ControlProblem& problem) {
    const std::size_t K = plan.controls.size();
    if (adjoints.size() != K + 1) throw InvalidParameter("need one adjoint per state");
    const double dt = problem.model.dt();
    std::vector<Vector2> g(K);
    for (std::size_t k = 0; k < K; ++k) {
        const ControlInput& u = plan.controls[k];
        g[k] = Vector2(dt * problem.cost.r_s * u.a_s, dt * problem.cost.r_d * u.omega_d) +
               problem.model.B().transpose() * adjoints[k + 1];
    }
    return g;
}

ControlInput optimal_control_from_adjoint(const Vector6& y, const CostParams& cp,
                                          const DynamicsModel& model, const ActuatorLimits& limits) {
    const Vector2 bty = model.B().transpose() * y;
    return clamp_control({-bty[0] / cp.r_s, -bty[1] / cp.r_d}, limits.a_max, limits.omega_max);
}

BestResponse solve_best_response(const VehicleState& x0, const ControlProblem& problem, int horizon,
                                 const BestResponseOptions& options,
                                 const std::vector<ControlInput>* warm_start) {
    if (horizon < 1) throw InvalidParameter("horizon must be at least 1 step");
    if (!(options.damping > 0.0 && options.damping <= 1.0)) {
        throw InvalidParameter("damping must lie in (0, 1]");
    }
    if (options.max_sweeps < 1) throw InvalidParameter("max_sweeps must be at least 1");
    if (!(options.tolerance > 0.0)) throw InvalidParameter("tolerance must be positive");
    if (!x0.finite()) throw NumericError("initial state is not finite");
    problem.cost.validate();

    const double dt = problem.model.dt();
    const std::size_t K = static_cast<std::size_t>(horizon);

    BestResponse out;
    TrajectoryPlan& plan = out.plan;
    plan.controls.assign(K, ControlInput{});
    if (warm_start) {
        for (std::size_t k = 0; k < K && k < warm_start->size(); ++k) {
            plan.controls[k] = clamp_control((*warm_start)[k], problem.limits.a_max, problem.limits.omega_max);
        }
    }
    plan.states = rollout(x0, plan.controls, problem);
    plan.cost = evaluate_cost(plan, problem);
    const double initial_cost = plan.cost;

    double eta_last = options.damping;
    std::vector<ControlInput> trial(K);
    for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
        out.sweeps = sweep + 1;
        plan.adjoints = backward_sweep(plan, problem);

        std::vector<Vector2> delta(K);
        double change = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const ControlInput target =
                optimal_control_from_adjoint(plan.adjoints[k + 1] / dt, problem.cost, problem.model, problem.limits);
            delta[k] = target.vec() - plan.controls[k].vec();
            change = std::max(change, delta[k].lpNorm<Eigen::Infinity>());
        }
        if (change < options.tolerance) {
            out.converged = true;
            break;
        }

        // Backtracking from the last accepted step, capped by the damping factor.
        double eta = std::min(options.damping, 2.0 * eta_last);
        bool accepted = false;
        for (int h = 0; h <= options.max_halvings; ++h, eta *= 0.5) {
            for (std::size_t k = 0; k < K; ++k) {
                trial[k] = ControlInput::from_vec(plan.controls[k].vec() + eta * delta[k]);
            }
            TrajectoryPlan candidate;
            candidate.controls = trial;
            candidate.states = rollout(x0, trial, problem);
            candidate.cost = evaluate_cost(candidate, problem);
            if (candidate.cost <= plan.cost) {
                plan.controls = std::move(candidate.controls);
                plan.states = std::move(candidate.states);
                plan.cost = candidate.cost;
                out.cost_history.push_back(plan.cost);
                eta_last = eta;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;  // no descent along the proposed direction
    }
    plan.adjoints = backward_sweep(plan, problem);

    if (!out.converged && !(plan.cost < initial_cost)) {
        std::ostringstream msg;
        msg << "best response made no progress in " << out.sweeps << " sweeps (cost " << plan.cost << ")";
        throw NonConvergenceError(msg.str(), plan);
    }
    return out;
}

LaneChoice select_target_lane(const ScalarField& phi, const VehicleState& x,
                              const std::vector<double>& lane_offsets, double corridor_length,
                              double temperature) {
    if (lane_offsets.empty()) throw InvalidParameter("no candidate lanes");
    if (!(corridor_length >= 0.0)) throw InvalidParameter("corridor_length must be nonnegative");
    if (!(temperature >= 0.0)) throw InvalidParameter("temperature must be nonnegative");

    constexpr int samples = 21;
    LaneChoice out;
    out.scores.reserve(lane_offsets.size());
    for (double d : lane_offsets) {
        double acc = 0.0;
        for (int n = 0; n < samples; ++n) {
            const double s = x.s + corridor_length * n / (samples - 1);
            acc += sample_bilinear(phi, {s, d}, OutOfDomain::Clamp);
        }
        out.scores.push_back(acc / samples);
    }

    const std::size_t best =
        static_cast<std::size_t>(std::max_element(out.scores.begin(), out.scores.end()) - out.scores.begin());
    out.weights.assign(lane_offsets.size(), 0.0);
    if (temperature == 0.0) {
        out.weights[best] = 1.0;
    } else {
        double z = 0.0;
        for (std::size_t l = 0; l < lane_offsets.size(); ++l) {
            out.weights[l] = std::exp((out.scores[l] - out.scores[best]) / temperature);
            z += out.weights[l];
        }
        for (double& w : out.weights) w /= z;
    }
    for (std::size_t l = 0; l < lane_offsets.size(); ++l) out.target_offset += out.weights[l] * lane_offsets[l];
    return out;
}

// --- best-response iteration ------------------------------------------------

namespace {

std::vector<std::size_t> preview_indices(int horizon, int stride) {
    std::vector<std::size_t> idx;
    for (int k = 0; k < horizon; k += stride) idx.push_back(static_cast<std::size_t>(k));
    idx.push_back(static_cast<std::size_t>(horizon));
    return idx;
}

std::vector<Atom> others_atoms(std::size_t player, const std::vector<Player>& players,
                               const std::vector<TrajectoryPlan>& plans, int stride) {
    std::vector<Atom> atoms;
    for (std::size_t j = 0; j < players.size(); ++j) {
        if (j == player) continue;
        for (std::size_t k : preview_indices(plans[j].horizon(), stride)) {
            atoms.push_back({plans[j].states[k], 1.0, players[j].style.label});
        }
    }
    return atoms;
}

bool same_atoms(const std::vector<Atom>& a, const std::vector<Atom>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (!(a[k].state == b[k].state) || a[k].style != b[k].style) return false;
    }
    return true;
}

ControlProblem base_problem(const Player& p, const GameConfig& config) {
    ControlProblem prob;
    prob.model = config.model;
    prob.limits = config.limits;
    prob.cost = p.cost;
    prob.domain = config.domain;
    prob.drift = config.drift;
    return prob;
}

struct PlayerCache {
    bool valid = false;
    std::vector<Atom> atoms;
    PlayerField field;
    TrajectoryPlan plan;
};

TrajectoryPlan respond(std::size_t i, const std::vector<Player>& players, const std::vector<TrajectoryPlan>& plans,
                       const GameConfig& config, PlayerCache& cache) {
    const Player& p = players[i];
    const int K = config.horizon_steps;
    if (p.scripted) {
        if (!cache.valid) {
            ControlProblem prob = base_problem(p, config);
            cache.plan.controls = hold_velocity_controls(p.state, K, prob);
            cache.plan.states = rollout(p.state, cache.plan.controls, prob);
            cache.plan.cost = 0.0;
            cache.valid = true;
        }
        return cache.plan;
    }

    std::vector<Atom> atoms = others_atoms(i, players, plans, config.preview_stride);
    if (cache.valid && same_atoms(atoms, cache.atoms)) return cache.plan;

    cache.field = player_field(i, players, plans, config);
    ControlProblem prob = base_problem(p, config);
    if (p.select_lane) prob.cost.target_lane_offset = cache.field.lane.target_offset;
    prob.phi = &cache.field.unified.phi;
    if (config.drift.gain != 0.0) prob.drift_measures = partition_atoms_by_style(atoms, config.style_params);

    const std::vector<ControlInput>* warm = plans[i].controls.empty() ? nullptr : &plans[i].controls;
    try {
        cache.plan = solve_best_response(p.state, prob, K, config.best_response, warm).plan;
    } catch (const NonConvergenceError& e) {
        cache.plan = e.best_plan();
    }
    cache.atoms = std::move(atoms);
    cache.valid = true;
    return cache.plan;
}

}  // namespace

PopulationMeasure induced_measure(const std::vector<Player>& players, const std::vector<TrajectoryPlan>& plans,
                                  int preview_stride) {
    if (players.size() != plans.size()) throw InvalidParameter("one plan per player required");
    if (preview_stride < 1) throw InvalidParameter("preview_stride must be at least 1");
    PopulationMeasure m;
    for (std::size_t j = 0; j < players.size(); ++j) {
        for (std::size_t k : preview_indices(plans[j].horizon(), preview_stride)) {
            m.atoms.push_back({plans[j].states[k], 1.0, players[j].style.label});
        }
    }
    for (Atom& a : m.atoms) a.weight = 1.0 / static_cast<double>(m.atoms.size());
    return m;
}

std::vector<ControlInput> hold_velocity_controls(const VehicleState& x0, int horizon, const ControlProblem& problem) {
    std::vector<ControlInput> us;
    us.reserve(static_cast<std::size_t>(horizon));
    VehicleState x = x0;
    const double dt = problem.model.dt();
    for (int k = 0; k < horizon; ++k) {
        const ControlInput u =
            clamp_control({-x.s_ddot / dt, -x.d_ddot / dt}, problem.limits.a_max, problem.limits.omega_max);
        us.push_back(u);
        x = planning_step(x, u, problem);
    }
    return us;
}

PlayerField player_field(std::size_t player, const std::vector<Player>& players,
                         const std::vector<TrajectoryPlan>& plans, const GameConfig& config) {
    if (player >= players.size() || plans.size() != players.size()) {
        throw InvalidParameter("player index or plan count mismatch");
    }
    const std::vector<Atom> atoms = others_atoms(player, players, plans, config.preview_stride);
    const MeasuresByStyle measures = partition_atoms_by_style(atoms, config.style_params);

    PlayerField out;
    out.fields = build_fields(measures, config.grid, config.field);
    out.unified = evolve_cahn_hilliard(initial_phi(out.fields.benefit, out.fields.risk), out.fields.benefit,
                                       out.fields.risk, config.fusion);
    out.lane = select_target_lane(out.unified.phi, players[player].state, config.lane_offsets,
                                  config.corridor_length, config.fusion.temperature);
    return out;
}

std::optional<double> estimate_contraction(const std::vector<double>& gaps) {
    if (gaps.size() < 3) return std::nullopt;
    double log_sum = 0.0;
    int n = 0;
    for (std::size_t k = 1; k < gaps.size(); ++k) {
        if (!(gaps[k - 1] > 0.0) || !(gaps[k] > 0.0)) break;
        log_sum += std::log(gaps[k] / gaps[k - 1]);
        ++n;
    }
    if (n == 0) return std::nullopt;
    return std::exp(log_sum / n);
}

Equilibrium fixed_point_iteration(const std::vector<Player>& players, const GameConfig& config,
                                  const std::vector<TrajectoryPlan>* warm_start) {
    if (players.empty()) throw InvalidParameter("no players");
    if (config.horizon_steps < 1) throw InvalidParameter("horizon_steps must be at least 1");
    if (config.max_iterations < 0) throw InvalidParameter("max_iterations must be nonnegative");
    if (!(config.w2_tol > 0.0)) throw InvalidParameter("w2_tol must be positive");
    const int K = config.horizon_steps;

    // Starting plans: warm start where it fits, constant velocity otherwise.
    std::vector<TrajectoryPlan> plans(players.size());
    for (std::size_t i = 0; i < players.size(); ++i) {
        ControlProblem prob = base_problem(players[i], config);
        std::vector<ControlInput> us = hold_velocity_controls(players[i].state, K, prob);
        if (warm_start && i < warm_start->size()) {
            const auto& w = (*warm_start)[i].controls;
            for (std::size_t k = 0; k < us.size() && k < w.size(); ++k) us[k] = w[k];
        }
        plans[i].controls = std::move(us);
        plans[i].states = rollout(players[i].state, plans[i].controls, prob);
    }

    std::vector<PlayerCache> caches(players.size());
    auto apply_map = [&](const std::vector<TrajectoryPlan>& current) {
        std::vector<TrajectoryPlan> next(players.size());
        for (std::size_t i = 0; i < players.size(); ++i) next[i] = respond(i, players, current, config, caches[i]);
        return next;
    };

    Equilibrium eq;
    plans = apply_map(plans);
    eq.measures.push_back(induced_measure(players, plans, config.preview_stride));
    for (int k = 0; k < config.max_iterations; ++k) {
        plans = apply_map(plans);
        eq.measures.push_back(induced_measure(players, plans, config.preview_stride));
        const double gap = wasserstein2(eq.measures[eq.measures.size() - 1], eq.measures[eq.measures.size() - 2]);
        eq.report.gaps.push_back(gap);
        std::vector<double> costs;
        for (const TrajectoryPlan& pl : plans) costs.push_back(pl.cost);
        eq.report.iteration_costs.push_back(std::move(costs));
        eq.report.iterations = k + 1;
        if (gap < config.w2_tol) {
            eq.report.converged = true;
            break;
        }
    }
    for (const PopulationMeasure& m : eq.measures) {
        eq.report.distance_to_final.push_back(wasserstein2(m, eq.measures.back()));
    }
    eq.report.rho_hat = estimate_contraction(eq.report.gaps);

    // Fields seen by each player when it produced its final plan.
    for (std::size_t i = 0; i < players.size(); ++i) {
        if (players[i].scripted || !caches[i].valid || caches[i].field.unified.phi.values().size() == 0) {
            eq.fields.push_back(player_field(i, players, plans, config));
        } else {
            eq.fields.push_back(caches[i].field);
        }
        eq.report.costs.push_back(plans[i].cost);
    }
    eq.plans = std::move(plans);
    return eq;
}

}  // namespace iupf
