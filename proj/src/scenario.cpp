#include "iupf/scenario.hpp"

#include "iupf/errors.hpp"

#include <array>
#include <cmath>
#include <set>
#include <sstream>

namespace iupf {

using toml::Document;

std::string_view to_string(RunMode mode) {
    return mode == RunMode::PlanOnce ? "plan_once" : "replan_every_step";
}

RunMode parse_run_mode(std::string_view name) {
    if (name == "replan_every_step") return RunMode::ReplanEveryStep;
    if (name == "plan_once") return RunMode::PlanOnce;
    throw ValidationError("unknown planner mode '" + std::string(name) +
                          "' (expected replan_every_step or plan_once)");
}

namespace {

Document style_table(StyleLabel label) {
    const StyleParameters p = style_defaults(label, default_driving_style(label).aggressiveness);
    const StyleCost c;
    Document t = Document::object();
    t["alpha_B"] = p.alpha_B;
    t["alpha_R"] = p.alpha_R;
    t["lambda_B_m"] = p.lambda_B;
    t["lambda_R_m"] = p.lambda_R;
    t["sigma_B_m"] = p.sigma_B;
    t["sigma_R_m"] = p.sigma_R;
    t["r_s"] = p.r_s;
    t["r_d"] = p.r_d;
    t["field_weight"] = c.field_weight;
    t["terminal_lane_weight"] = c.terminal_lane_weight;
    t["terminal_speed_weight"] = c.terminal_speed_weight;
    t["penalty_weight"] = c.penalty_weight;
    return t;
}

}  // namespace

Document default_document() {
    const GridSpec g;
    const ActuatorLimits lim;
    const FieldParams fp;
    const FusionParams fu;
    const PlannerSettings pl;

    Document d = Document::object();
    d["name"] = "unnamed";
    d["seed"] = 0;
    d["road"] = {{"lane_width_m", 3.75}, {"n_lanes", 3}, {"vehicle_width_m", 1.8}};
    d["time"] = {{"dt_s", 0.1}, {"duration_s", 15.0}};
    d["noise"] = {{"sigma_w", 0.05}};
    d["limits"] = {{"jerk_max_mps3", lim.a_max},
                   {"lateral_rate_max_mps3", lim.omega_max},
                   {"accel_max_mps2", lim.accel_max}};
    d["grid"] = {{"s_min_m", g.s_min}, {"s_max_m", g.s_max}, {"d_min_m", g.d_min},
                 {"d_max_m", g.d_max}, {"n_s", g.n_s},     {"n_d", g.n_d}};
    d["field"] = {{"tikhonov_B", fp.tikhonov_B}, {"tikhonov_R", fp.tikhonov_R}, {"v_max_mps", fp.v_max},
                  {"cg_tol", fp.cg_tol},         {"cg_max_iter", fp.cg_max_iter},
                  {"smooth_sources", fp.smooth_sources}};
    d["fusion"] = {{"epsilon_cells", fu.epsilon}, {"gamma1", fu.gamma1},         {"gamma2", fu.gamma2},
                   {"gamma3", fu.gamma3},         {"gamma4", fu.gamma4},         {"gamma5", fu.gamma5},
                   {"alpha1", fu.alpha1},         {"alpha2", fu.alpha2},         {"tau_step", fu.tau_step},
                   {"max_steps", fu.max_steps},   {"steady_tol", fu.steady_tol}, {"stabilization", fu.stabilization},
                   {"temperature", fu.temperature}};
    d["planner"] = {{"mode", std::string(to_string(pl.mode))},
                    {"horizon_steps", pl.horizon_steps},
                    {"preview_stride", pl.preview_stride},
                    {"max_sweeps", pl.best_response.max_sweeps},
                    {"damping", pl.best_response.damping},
                    {"sweep_tol", pl.best_response.tolerance},
                    {"max_halvings", pl.best_response.max_halvings},
                    {"fp_max_iterations", pl.fp_max_iterations},
                    {"w2_tol", pl.w2_tol},
                    {"corridor_length_m", pl.corridor_length},
                    {"drift_gain", pl.drift_gain},
                    {"warm_start", pl.warm_start}};
    d["output"] = {{"snapshot_stride", 25}};
    Document styles = Document::object();
    for (StyleLabel s : kAllStyles) styles[std::string(to_string(s))] = style_table(s);
    d["styles"] = styles;
    d["vehicles"] = Document::array();
    return d;
}

Document default_vehicle_entry() {
    Document v = Document::object();
    v["id"] = "";
    v["style"] = "cooperative";
    v["aggressiveness"] = 0.5;
    v["reaction_time"] = 0.5;
    v["social_awareness"] = 0.5;
    v["is_host"] = false;
    v["s_m"] = 0.0;
    v["lane"] = 1;
    v["speed_mps"] = 0.0;
    v["target_speed_mps"] = 0.0;
    v["target_lane"] = 1;
    v["select_lane"] = false;
    v["scripted"] = false;
    return v;
}

namespace {

// Coerces `value` to the type of `like`; integers widen to floats.
Document coerce(const Document& like, const Document& value, const std::string& key) {
    if (like.is_number_float() && value.is_number()) return value.get<double>();
    if (like.is_number_integer() && value.is_number_integer()) return value;
    if (like.is_boolean() && value.is_boolean()) return value;
    if (like.is_string() && value.is_string()) return value;
    std::string expected = like.is_number_float()     ? "a float"
                           : like.is_number_integer() ? "an integer"
                           : like.is_boolean()        ? "a boolean"
                           : like.is_string()         ? "a string"
                                                      : "a table";
    throw ValidationError("key '" + key + "' must be " + expected);
}

void merge_into(Document& base, const Document& user, const std::string& prefix) {
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!base.contains(it.key())) throw ValidationError("unknown key '" + key + "'");
        Document& slot = base[it.key()];
        if (slot.is_object()) {
            if (!it.value().is_object()) throw ValidationError("key '" + key + "' must be a table");
            merge_into(slot, it.value(), key);
        } else if (slot.is_array()) {
            throw ValidationError("key '" + key + "' cannot be set here");
        } else {
            slot = coerce(slot, it.value(), key);
        }
    }
}

// Keys whose default is derived from other keys of the same vehicle entry.
constexpr std::array<const char*, 6> kDerivedKeys = {"aggressiveness", "reaction_time", "social_awareness",
                                                     "target_speed_mps", "target_lane", "select_lane"};

// Fills the derived defaults of `v` for every key not in `explicit_keys`.
void derive_vehicle_defaults(Document& v, const std::set<std::string>& explicit_keys, const std::string& prefix) {
    auto unset = [&](const char* key) { return explicit_keys.count(key) == 0; };
    StyleLabel label = StyleLabel::Cooperative;
    if (v["style"].is_string()) {
        try {
            label = parse_style(v["style"].get<std::string>());
        } catch (const InvalidParameter& e) {
            throw ValidationError(prefix + ".style: " + e.what());
        }
    }
    const DrivingStyle ds = default_driving_style(label);
    if (unset("aggressiveness")) v["aggressiveness"] = ds.aggressiveness;
    if (unset("reaction_time")) v["reaction_time"] = ds.reaction_time;
    if (unset("social_awareness")) v["social_awareness"] = ds.social_awareness;
    if (unset("target_speed_mps")) v["target_speed_mps"] = v["speed_mps"];
    if (unset("target_lane")) v["target_lane"] = v["lane"];
    if (unset("select_lane")) v["select_lane"] = v["is_host"];
}

Document resolve_vehicle(const Document& user, std::size_t index, std::set<std::string>& explicit_keys) {
    const std::string prefix = "vehicles." + std::to_string(index);
    if (!user.is_object()) throw ValidationError(prefix + " must be a table");
    Document v = default_vehicle_entry();
    merge_into(v, user, prefix);
    for (const char* key : kDerivedKeys)
        if (user.contains(key)) explicit_keys.insert(key);
    return v;
}

double num(const Document& d, const char* key) { return d.at(key).get<double>(); }
int integer(const Document& d, const char* key) { return d.at(key).get<int>(); }

}  // namespace

Override parse_override(std::string_view assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw ValidationError("override '" + std::string(assignment) + "' is not of the form key=value");
    }
    auto trim = [](std::string_view s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
        return std::string(s);
    };
    return {trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1))};
}

void apply_override(Document& doc, const Override& ov) {
    Document* node = &doc;
    std::string walked;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = ov.key.find('.', start);
        const std::string part = ov.key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        walked += (walked.empty() ? "" : ".") + part;
        if (node->is_array()) {
            std::size_t idx = 0;
            try {
                std::size_t used = 0;
                idx = std::stoul(part, &used);
                if (used != part.size()) throw std::invalid_argument(part);
            } catch (const std::exception&) {
                throw ValidationError("override key '" + ov.key + "': '" + walked + "' needs an array index");
            }
            if (idx >= node->size()) throw ValidationError("override key '" + ov.key + "': index out of range");
            node = &(*node)[idx];
        } else if (node->is_object() && node->contains(part)) {
            node = &(*node)[part];
        } else {
            throw ValidationError("override key '" + ov.key + "' does not exist in the schema");
        }
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    if (node->is_object() || node->is_array()) {
        throw ValidationError("override key '" + ov.key + "' names a table, not a value");
    }
    *node = coerce(*node, toml::parse_value(ov.value), ov.key);
}

int Scenario::n_steps() const { return static_cast<int>(std::llround(duration / dt)); }

double Scenario::lane_center(int lane) const { return (lane - 0.5 * (n_lanes - 1)) * lane_width; }

std::vector<double> Scenario::lane_centers() const {
    std::vector<double> c;
    for (int l = 0; l < n_lanes; ++l) c.push_back(lane_center(l));
    return c;
}

double Scenario::lateral_limit() const { return 0.5 * n_lanes * lane_width - 0.5 * vehicle_width; }

std::size_t Scenario::host_index() const {
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
        if (vehicles[i].is_host) return i;
    }
    throw ValidationError("scenario has no host vehicle");
}

VehicleState Scenario::initial_state(const VehicleSpec& v) const {
    VehicleState x;
    x.s = v.s;
    x.d = lane_center(v.lane);
    x.s_dot = v.speed;
    return x;
}

CostParams Scenario::cost_for(const VehicleSpec& v) const {
    const std::size_t k = static_cast<std::size_t>(v.style.label);
    CostParams cp;
    cp.r_s = styles[k].r_s;
    cp.r_d = styles[k].r_d;
    cp.field_weight = style_costs[k].field_weight;
    cp.terminal_lane_weight = style_costs[k].terminal_lane_weight;
    cp.terminal_speed_weight = style_costs[k].terminal_speed_weight;
    cp.penalty_weight = style_costs[k].penalty_weight;
    cp.target_speed = v.target_speed;
    cp.target_lane_offset = lane_center(v.target_lane);
    cp.lateral_limit = lateral_limit();
    return cp;
}

void Scenario::validate() const {
    std::vector<std::string> issues;
    auto check = [&](bool ok, const std::string& msg) {
        if (!ok) issues.push_back(msg);
    };
    auto guarded = [&](const std::string& where, auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            issues.push_back(where + ": " + e.what());
        }
    };

    check(dt > 0.0, "time.dt_s must be positive");
    check(duration >= 0.0, "time.duration_s must be nonnegative");
    if (dt > 0.0) {
        const double ratio = duration / dt;
        check(std::abs(ratio - std::round(ratio)) <= 1e-9 * std::max(1.0, ratio),
              "time.duration_s must be an integer multiple of time.dt_s");
    }
    check(sigma_w >= 0.0, "noise.sigma_w must be nonnegative");
    check(lane_width > 0.0, "road.lane_width_m must be positive");
    check(n_lanes >= 1, "road.n_lanes must be at least 1");
    check(vehicle_width >= 0.0 && vehicle_width < n_lanes * lane_width, "road.vehicle_width_m out of range");
    check(limits.a_max > 0.0 && limits.omega_max > 0.0 && limits.accel_max > 0.0, "limits must be positive");
    guarded("grid", [&] { grid.validate(); });
    guarded("field", [&] { field.validate(); });
    guarded("fusion", [&] { fusion.validate(); });
    for (StyleLabel s : kAllStyles) {
        const std::size_t k = static_cast<std::size_t>(s);
        guarded("styles." + std::string(to_string(s)), [&] { styles[k].validate(); });
        const StyleCost& c = style_costs[k];
        check(c.field_weight >= 0.0 && c.terminal_lane_weight >= 0.0 && c.terminal_speed_weight >= 0.0 && c.penalty_weight >= 0.0,
              "styles." + std::string(to_string(s)) + ": cost weights must be nonnegative");
    }
    check(planner.horizon_steps >= 1, "planner.horizon_steps must be at least 1");
    check(planner.preview_stride >= 1, "planner.preview_stride must be at least 1");
    check(planner.best_response.max_sweeps >= 1, "planner.max_sweeps must be at least 1");
    check(planner.best_response.damping > 0.0 && planner.best_response.damping <= 1.0,
          "planner.damping must lie in (0, 1]");
    check(planner.best_response.tolerance > 0.0, "planner.sweep_tol must be positive");
    check(planner.best_response.max_halvings >= 0, "planner.max_halvings must be nonnegative");
    check(planner.fp_max_iterations >= 1, "planner.fp_max_iterations must be at least 1");
    check(planner.w2_tol > 0.0, "planner.w2_tol must be positive");
    check(planner.corridor_length >= 0.0, "planner.corridor_length_m must be nonnegative");
    check(planner.drift_gain >= 0.0, "planner.drift_gain must be nonnegative");
    check(snapshot_stride >= 1, "output.snapshot_stride must be at least 1");

    check(!vehicles.empty(), "at least one vehicle is required");
    int hosts = 0;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
        const VehicleSpec& v = vehicles[i];
        const std::string where = "vehicles." + std::to_string(i);
        if (v.is_host) ++hosts;
        check(!v.id.empty(), where + ".id must be nonempty");
        check(ids.insert(v.id).second, where + ": duplicate id '" + v.id + "'");
        check(v.lane >= 0 && v.lane < n_lanes, where + ".lane out of range");
        check(v.target_lane >= 0 && v.target_lane < n_lanes, where + ".target_lane out of range");
        check(std::isfinite(v.s), where + ".s_m must be finite");
        check(v.speed >= 0.0 && std::isfinite(v.speed), where + ".speed_mps must be nonnegative");
        check(v.target_speed >= 0.0, where + ".target_speed_mps must be nonnegative");
        guarded(where, [&] { v.style.validate(); });
    }
    check(hosts == 1, "exactly one vehicle must have is_host = true (found " + std::to_string(hosts) + ")");

    if (!issues.empty()) {
        std::ostringstream msg;
        msg << "invalid scenario:";
        for (const std::string& s : issues) msg << "\n  - " << s;
        throw ValidationError(msg.str());
    }
}

Scenario scenario_from_document(const Document& doc, const std::vector<Override>& overrides) {
    if (!doc.is_object()) throw ValidationError("scenario root must be a table");
    Document r = default_document();
    Document user = doc;
    Document user_vehicles = Document::array();
    if (user.contains("vehicles")) {
        user_vehicles = user["vehicles"];
        user.erase("vehicles");
        if (!user_vehicles.is_array()) throw ValidationError("vehicles must be an array of tables");
    }
    merge_into(r, user, "");
    std::vector<std::set<std::string>> explicit_keys(user_vehicles.size());
    for (std::size_t i = 0; i < user_vehicles.size(); ++i) {
        r["vehicles"].push_back(resolve_vehicle(user_vehicles[i], i, explicit_keys[i]));
    }
    for (const Override& ov : overrides) {
        apply_override(r, ov);
        // An override of a derived key pins it; anything else re-derives below.
        const std::string_view key = ov.key;
        if (key.rfind("vehicles.", 0) == 0) {
            const auto dot = key.find('.', 9);
            if (dot != std::string_view::npos) {
                const std::size_t idx = std::stoul(std::string(key.substr(9, dot - 9)));
                if (idx < explicit_keys.size()) explicit_keys[idx].insert(std::string(key.substr(dot + 1)));
            }
        }
    }
    for (std::size_t i = 0; i < explicit_keys.size(); ++i) {
        derive_vehicle_defaults(r["vehicles"][i], explicit_keys[i], "vehicles." + std::to_string(i));
    }

    Scenario sc;
    try {
        sc.name = r["name"].get<std::string>();
        const long long seed = r["seed"].get<long long>();
        if (seed < 0) throw ValidationError("seed must be nonnegative");
        sc.seed = static_cast<std::uint64_t>(seed);

        const Document& road = r["road"];
        sc.lane_width = num(road, "lane_width_m");
        sc.n_lanes = integer(road, "n_lanes");
        sc.vehicle_width = num(road, "vehicle_width_m");
        sc.dt = num(r["time"], "dt_s");
        sc.duration = num(r["time"], "duration_s");
        sc.sigma_w = num(r["noise"], "sigma_w");

        const Document& lim = r["limits"];
        sc.limits.a_max = num(lim, "jerk_max_mps3");
        sc.limits.omega_max = num(lim, "lateral_rate_max_mps3");
        sc.limits.accel_max = num(lim, "accel_max_mps2");

        const Document& g = r["grid"];
        sc.grid = GridSpec{num(g, "s_min_m"), num(g, "s_max_m"), num(g, "d_min_m"),
                           num(g, "d_max_m"), integer(g, "n_s"),  integer(g, "n_d")};

        const Document& f = r["field"];
        sc.field.tikhonov_B = num(f, "tikhonov_B");
        sc.field.tikhonov_R = num(f, "tikhonov_R");
        sc.field.v_max = num(f, "v_max_mps");
        sc.field.cg_tol = num(f, "cg_tol");
        sc.field.cg_max_iter = integer(f, "cg_max_iter");
        sc.field.smooth_sources = f["smooth_sources"].get<bool>();

        const Document& fu = r["fusion"];
        sc.fusion.epsilon = num(fu, "epsilon_cells");
        sc.fusion.gamma1 = num(fu, "gamma1");
        sc.fusion.gamma2 = num(fu, "gamma2");
        sc.fusion.gamma3 = num(fu, "gamma3");
        sc.fusion.gamma4 = num(fu, "gamma4");
        sc.fusion.gamma5 = num(fu, "gamma5");
        sc.fusion.alpha1 = num(fu, "alpha1");
        sc.fusion.alpha2 = num(fu, "alpha2");
        sc.fusion.tau_step = num(fu, "tau_step");
        sc.fusion.max_steps = integer(fu, "max_steps");
        sc.fusion.steady_tol = num(fu, "steady_tol");
        sc.fusion.stabilization = num(fu, "stabilization");
        sc.fusion.temperature = num(fu, "temperature");

        const Document& pl = r["planner"];
        sc.planner.mode = parse_run_mode(pl["mode"].get<std::string>());
        sc.planner.horizon_steps = integer(pl, "horizon_steps");
        sc.planner.preview_stride = integer(pl, "preview_stride");
        sc.planner.best_response.max_sweeps = integer(pl, "max_sweeps");
        sc.planner.best_response.damping = num(pl, "damping");
        sc.planner.best_response.tolerance = num(pl, "sweep_tol");
        sc.planner.best_response.max_halvings = integer(pl, "max_halvings");
        sc.planner.fp_max_iterations = integer(pl, "fp_max_iterations");
        sc.planner.w2_tol = num(pl, "w2_tol");
        sc.planner.corridor_length = num(pl, "corridor_length_m");
        sc.planner.drift_gain = num(pl, "drift_gain");
        sc.planner.warm_start = pl["warm_start"].get<bool>();
        sc.snapshot_stride = integer(r["output"], "snapshot_stride");

        for (StyleLabel s : kAllStyles) {
            const Document& t = r["styles"][std::string(to_string(s))];
            const std::size_t k = static_cast<std::size_t>(s);
            StyleParameters& p = sc.styles[k];
            p.alpha_B = num(t, "alpha_B");
            p.alpha_R = num(t, "alpha_R");
            p.lambda_B = num(t, "lambda_B_m");
            p.lambda_R = num(t, "lambda_R_m");
            p.sigma_B = num(t, "sigma_B_m");
            p.sigma_R = num(t, "sigma_R_m");
            p.r_s = num(t, "r_s");
            p.r_d = num(t, "r_d");
            sc.style_costs[k].field_weight = num(t, "field_weight");
            sc.style_costs[k].terminal_lane_weight = num(t, "terminal_lane_weight");
            sc.style_costs[k].terminal_speed_weight = num(t, "terminal_speed_weight");
            sc.style_costs[k].penalty_weight = num(t, "penalty_weight");
        }

        for (const Document& v : r["vehicles"]) {
            VehicleSpec spec;
            spec.id = v["id"].get<std::string>();
            try {
                spec.style.label = parse_style(v["style"].get<std::string>());
            } catch (const InvalidParameter& e) {
                throw ValidationError(std::string("vehicle '") + spec.id + "': " + e.what());
            }
            spec.style.aggressiveness = num(v, "aggressiveness");
            spec.style.reaction_time = num(v, "reaction_time");
            spec.style.social_awareness = num(v, "social_awareness");
            spec.is_host = v["is_host"].get<bool>();
            spec.s = num(v, "s_m");
            spec.lane = integer(v, "lane");
            spec.speed = num(v, "speed_mps");
            spec.target_speed = num(v, "target_speed_mps");
            spec.target_lane = integer(v, "target_lane");
            spec.select_lane = v["select_lane"].get<bool>();
            spec.scripted = v["scripted"].get<bool>();
            sc.vehicles.push_back(std::move(spec));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed scenario value: ") + e.what());
    }
    sc.resolved = std::move(r);
    sc.validate();
    return sc;
}

Scenario load_scenario(const std::filesystem::path& path, const std::vector<Override>& overrides) {
    if (!std::filesystem::exists(path)) throw IoError("scenario file not found: " + path.string());
    return scenario_from_document(toml::parse_file(path), overrides);
}

namespace {

void list_keys(const Document& t, const std::string& prefix, std::ostringstream& out) {
    for (auto it = t.begin(); it != t.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (it.value().is_object()) {
            list_keys(it.value(), key, out);
        } else if (it.value().is_array()) {
            continue;
        } else {
            Document one = Document::object();
            one["v"] = it.value();
            std::string line = toml::dump(one);
            line = line.substr(4, line.size() - 5);  // strip "v = " and the newline
            out << "  " << key << " = " << line << "\n";
        }
    }
}

}  // namespace

std::string schema_help() {
    std::ostringstream out;
    out << "Scenario keys (defaults shown; override with --set key=value):\n";
    list_keys(default_document(), "", out);
    out << "Per-vehicle keys ([[vehicles]] tables, override as vehicles.<index>.<key>):\n";
    list_keys(default_vehicle_entry(), "vehicles.N", out);
    out << "  (target_speed_mps, target_lane and select_lane default to speed_mps, lane and is_host;\n"
           "   lanes are indexed from 0 at the rightmost lane)\n";
    return out.str();
}

}  // namespace iupf
