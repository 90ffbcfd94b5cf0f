#include "iupf/sim.hpp"

#include "iupf/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <random>

namespace iupf {

FieldStats field_stats(const ScalarField& f) {
    if (f.values().size() == 0) return {};
    return {f.min(), f.max(), f.mean()};
}

double min_separation(const std::vector<VehicleState>& states) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < states.size(); ++i) {
        for (std::size_t j = i + 1; j < states.size(); ++j) {
            best = std::min(best, (project_position(states[i]) - project_position(states[j])).norm());
        }
    }
    return best;
}

std::vector<Player> make_players(const Scenario& sc, const std::vector<VehicleState>& states) {
    std::vector<Player> players;
    for (std::size_t i = 0; i < sc.vehicles.size(); ++i) {
        const VehicleSpec& v = sc.vehicles[i];
        Player p;
        p.id = v.id;
        p.state = states[i];
        p.style = v.style;
        p.cost = sc.cost_for(v);
        p.select_lane = v.select_lane;
        p.scripted = v.scripted;
        players.push_back(std::move(p));
    }
    return players;
}

GameConfig make_game_config(const Scenario& sc, int horizon_steps) {
    GameConfig c;
    c.grid = sc.grid;
    c.field = sc.field;
    c.fusion = sc.fusion;
    c.style_params = sc.styles;
    c.model = build_system_matrices(sc.dt, 0.0);
    c.limits = sc.limits;
    c.drift.gain = sc.planner.drift_gain;
    c.domain = OutOfDomain::Clamp;
    c.horizon_steps = horizon_steps;
    c.preview_stride = sc.planner.preview_stride;
    c.best_response = sc.planner.best_response;
    c.max_iterations = sc.planner.fp_max_iterations;
    c.w2_tol = sc.planner.w2_tol;
    c.lane_offsets = sc.lane_centers();
    c.corridor_length = sc.planner.corridor_length;
    return c;
}

namespace {

std::vector<VehicleState> initial_states(const Scenario& sc) {
    std::vector<VehicleState> xs;
    for (const VehicleSpec& v : sc.vehicles) xs.push_back(sc.initial_state(v));
    return xs;
}

// Host fields for the current states, others predicted by the given controls.
PlayerField host_field_from(const Scenario& sc, const GameConfig& config, const std::vector<VehicleState>& states,
                            const std::vector<TrajectoryPlan>* guide) {
    const std::vector<Player> players = make_players(sc, states);
    std::vector<TrajectoryPlan> plans(players.size());
    for (std::size_t i = 0; i < players.size(); ++i) {
        ControlProblem prob;
        prob.model = config.model;
        prob.limits = config.limits;
        prob.cost = players[i].cost;
        prob.domain = config.domain;
        if (guide && i < guide->size() && !(*guide)[i].controls.empty()) {
            plans[i].controls = (*guide)[i].controls;
        } else {
            plans[i].controls = hold_velocity_controls(states[i], config.horizon_steps, prob);
        }
        plans[i].states = rollout(states[i], plans[i].controls, prob);
    }
    return player_field(sc.host_index(), players, plans, config);
}

std::vector<TrajectoryPlan> shifted(const std::vector<TrajectoryPlan>& plans) {
    std::vector<TrajectoryPlan> out(plans.size());
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const auto& us = plans[i].controls;
        if (us.empty()) continue;
        out[i].controls.assign(us.begin() + 1, us.end());
        out[i].controls.push_back(us.back());
    }
    return out;
}

void fill_host_fields(StepRecord& rec, const PlayerField& pf, const VehicleState& host) {
    const Eigen::Vector2d p = project_position(host);
    rec.benefit = field_stats(pf.fields.benefit);
    rec.risk = field_stats(pf.fields.risk);
    rec.phi = field_stats(pf.unified.phi);
    rec.phi_host = sample_bilinear(pf.unified.phi, p, OutOfDomain::Clamp);
    rec.bbar_host = sample_bilinear(normalize(pf.fields.benefit), p, OutOfDomain::Clamp);
    rec.rbar_host = sample_bilinear(normalize(pf.fields.risk), p, OutOfDomain::Clamp);
}

}  // namespace

FieldSnapshot initial_fields(const Scenario& sc) {
    const GameConfig config = make_game_config(sc, sc.planner.horizon_steps);
    const PlayerField pf = host_field_from(sc, config, initial_states(sc), nullptr);
    return {0, pf.fields.benefit, pf.fields.risk, pf.unified.phi};
}

RunLog run(const Scenario& sc, std::optional<RunMode> mode_override) {
    sc.validate();
    RunLog log;
    log.scenario = sc;
    log.mode = mode_override.value_or(sc.planner.mode);
    log.scenario.planner.mode = log.mode;
    log.scenario.resolved["planner"]["mode"] = std::string(to_string(log.mode));
    for (const VehicleSpec& v : sc.vehicles) log.ids.push_back(v.id);

    const int n = sc.n_steps();
    const std::size_t N = sc.vehicles.size();
    const std::size_t host = sc.host_index();
    const bool plan_once = log.mode == RunMode::PlanOnce;
    const DynamicsModel model = build_system_matrices(sc.dt, sc.sigma_w);
    const GameConfig config = make_game_config(sc, plan_once ? std::max(n, 1) : sc.planner.horizon_steps);
    std::mt19937_64 rng(sc.seed);

    std::vector<VehicleState> states = initial_states(sc);
    std::vector<TrajectoryPlan> plans;
    std::vector<TrajectoryPlan> warm;
    PlayerField host_field;

    try {
        for (int k = 0; k <= n; ++k) {
            StepRecord rec;
            rec.step = k;
            rec.t = k * sc.dt;
            std::vector<ControlInput> controls(N);

            if (k < n) {
                if (!plan_once || k == 0) {
                    const std::vector<Player> players = make_players(sc, states);
                    const bool use_warm = sc.planner.warm_start && !warm.empty();
                    Equilibrium eq = fixed_point_iteration(players, config, use_warm ? &warm : nullptr);
                    log.convergence.push_back({k, eq.report});
                    host_field = std::move(eq.fields[host]);
                    plans = std::move(eq.plans);
                    if (k == 0) log.initial_plans = plans;
                    warm = shifted(plans);
                }
                for (std::size_t i = 0; i < N; ++i) {
                    controls[i] = plans[i].controls[plan_once ? static_cast<std::size_t>(k) : 0];
                }
            } else if (!plan_once || n == 0) {
                host_field = host_field_from(sc, config, states, warm.empty() ? nullptr : &warm);
            }

            for (std::size_t i = 0; i < N; ++i) rec.vehicles.push_back({log.ids[i], states[i], controls[i]});
            rec.min_separation = min_separation(states);
            fill_host_fields(rec, host_field, states[host]);
            if (k % sc.snapshot_stride == 0) {
                log.snapshots.push_back(
                    {k, host_field.fields.benefit, host_field.fields.risk, host_field.unified.phi});
            }
            log.steps.push_back(std::move(rec));

            if (k < n) {
                std::vector<VehicleState> next(N);
                for (std::size_t i = 0; i < N; ++i) {
                    const Vector6 w = sample_noise(model, rng);
                    VehicleState x = propagate(model, states[i], controls[i], w);
                    if (sc.planner.drift_gain != 0.0) {
                        std::vector<Atom> atoms;
                        for (std::size_t j = 0; j < N; ++j) {
                            if (j != i) atoms.push_back({states[j], 1.0, sc.vehicles[j].style.label});
                        }
                        const MeasuresByStyle m = partition_atoms_by_style(atoms, sc.styles);
                        x = VehicleState::from_vec(x.vec() +
                                                   sc.dt * mean_field_drift(states[i], m, config.drift));
                    }
                    next[i] = clamp_acceleration(x, sc.limits.accel_max);
                    if (!next[i].finite()) throw NumericError("vehicle '" + log.ids[i] + "' state became non-finite");
                }
                states = std::move(next);
            }
        }
    } catch (const Error& e) {
        const int at = log.steps.empty() ? 0 : log.steps.back().step;
        throw SimulationError("simulation aborted near step " + std::to_string(at) + ": " + e.what(), std::move(log),
                              std::current_exception());
    }
    return log;
}

SafetyReport safety_report(const RunLog& log) {
    SafetyReport r;
    int warn = 0;
    int crit = 0;
    for (const StepRecord& s : log.steps) {
        r.min_separation = std::min(r.min_separation, s.min_separation);
        if (s.min_separation < r.warning_threshold) ++warn;
        if (s.min_separation < r.critical_threshold) ++crit;
    }
    r.time_below_warning = warn * log.scenario.dt;
    r.time_below_critical = crit * log.scenario.dt;
    return r;
}

namespace {

using Json = nlohmann::ordered_json;

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json stats_json(const FieldStats& s) { return Json{{"min", s.min}, {"max", s.max}, {"mean", s.mean}}; }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

std::string step_record_json(const StepRecord& rec) {
    Json vehicles = Json::array();
    for (const VehicleRecord& v : rec.vehicles) {
        vehicles.push_back(Json{{"id", v.id},
                                {"state",
                                 {{"s_m", v.state.s},
                                  {"d_m", v.state.d},
                                  {"s_dot_mps", v.state.s_dot},
                                  {"d_dot_mps", v.state.d_dot},
                                  {"s_ddot_mps2", v.state.s_ddot},
                                  {"d_ddot_mps2", v.state.d_ddot}}},
                                {"control", {{"a_s_mps3", v.control.a_s}, {"omega_d_mps3", v.control.omega_d}}}});
    }
    Json j{{"step", rec.step},
           {"t_s", rec.t},
           {"vehicles", vehicles},
           {"min_separation_m", finite_or_null(rec.min_separation)},
           {"phi_host", rec.phi_host},
           {"bbar_host", rec.bbar_host},
           {"rbar_host", rec.rbar_host},
           {"field_stats", {{"benefit", stats_json(rec.benefit)}, {"risk", stats_json(rec.risk)},
                            {"unified", stats_json(rec.phi)}}}};
    return j.dump();
}

void export_run(const RunLog& log, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    std::string steps;
    for (const StepRecord& rec : log.steps) steps += step_record_json(rec) + "\n";
    write_text(dir / "steps.jsonl", steps);

    for (const FieldSnapshot& snap : log.snapshots) {
        write_fields_csv({{"benefit", &snap.benefit}, {"risk", &snap.risk}, {"unified", &snap.unified}},
                         dir / ("fields_t" + std::to_string(snap.step) + ".csv"));
    }

    std::string conv;
    for (const ConvergenceRecord& c : log.convergence) {
        const ConvergenceReport& r = c.report;
        for (std::size_t it = 0; it < r.gaps.size(); ++it) {
            Json costs = Json::object();
            if (it < r.iteration_costs.size()) {
                for (std::size_t v = 0; v < r.iteration_costs[it].size() && v < log.ids.size(); ++v) {
                    costs[log.ids[v]] = finite_or_null(r.iteration_costs[it][v]);
                }
            }
            Json line{{"step", c.step},
                      {"t_s", c.step * log.scenario.dt},
                      {"iteration", it + 1},
                      {"w2_gap", finite_or_null(r.gaps[it])},
                      {"rho_hat", r.rho_hat ? finite_or_null(*r.rho_hat) : Json(nullptr)},
                      {"converged", r.converged},
                      {"costs", costs}};
            conv += line.dump() + "\n";
        }
    }
    write_text(dir / "convergence.jsonl", conv);

    const SafetyReport s = safety_report(log);
    Json safety{{"min_separation_m", finite_or_null(s.min_separation)},
                {"time_below_15m_s", s.time_below_warning},
                {"time_below_8m_s", s.time_below_critical},
                {"warning_threshold_m", s.warning_threshold},
                {"critical_threshold_m", s.critical_threshold},
                {"steps", log.steps.size()}};
    write_text(dir / "safety.json", safety.dump(2) + "\n");

    write_text(dir / "scenario.resolved.toml", toml::dump(log.scenario.resolved));
}

}  // namespace iupf
