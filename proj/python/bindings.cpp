#include "iupf/control.hpp"
#include "iupf/dynamics.hpp"
#include "iupf/errors.hpp"
#include "iupf/fields.hpp"
#include "iupf/fusion.hpp"
#include "iupf/population.hpp"
#include "iupf/scenario.hpp"
#include "iupf/sim.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace iupf;

namespace {

// Row-major (n_s, n_d) array view of a field.
Eigen::MatrixXd as_matrix(const ScalarField& f) {
    const GridSpec& g = f.spec();
    Eigen::MatrixXd m(g.n_s, g.n_d);
    for (int i = 0; i < g.n_s; ++i)
        for (int j = 0; j < g.n_d; ++j) m(i, j) = f(i, j);
    return m;
}

std::vector<Override> parse_overrides(const std::vector<std::string>& sets) {
    std::vector<Override> out;
    for (const auto& s : sets) out.push_back(parse_override(s));
    return out;
}

PopulationMeasure measure_from(const std::vector<Vector6>& xs) {
    std::vector<VehicleState> states;
    for (const Vector6& x : xs) states.push_back(VehicleState::from_vec(x));
    return PopulationMeasure::uniform(states);
}

}  // namespace

PYBIND11_MODULE(_iupf, m) {
    m.doc() = "Interaction-enriched unified potential field planner";

    py::register_exception<Error>(m, "Error");
    py::register_exception<ValidationError>(m, "ValidationError", m.attr("Error"));
    py::register_exception<InvalidParameter>(m, "InvalidParameter", m.attr("Error"));

    py::class_<DynamicsModel>(m, "DynamicsModel")
        .def_property_readonly("A", &DynamicsModel::A)
        .def_property_readonly("B", &DynamicsModel::B)
        .def_property_readonly("Q", &DynamicsModel::Q)
        .def_property_readonly("dt", &DynamicsModel::dt);

    m.def("build_system_matrices", &build_system_matrices, py::arg("dt"), py::arg("sigma_w") = 0.0);
    m.def(
        "propagate",
        [](const DynamicsModel& model, const Vector6& x, const Vector2& u) {
            return propagate(model, VehicleState::from_vec(x), ControlInput::from_vec(u)).vec();
        },
        py::arg("model"), py::arg("x"), py::arg("u"));

    m.def(
        "wasserstein2",
        [](const std::vector<Vector6>& a, const std::vector<Vector6>& b) {
            return wasserstein2(measure_from(a), measure_from(b));
        },
        py::arg("a"), py::arg("b"), "Exact W2 between uniform measures given as lists of 6-vectors.");

    m.def(
        "min_separation",
        [](const std::vector<Vector6>& xs) {
            std::vector<VehicleState> states;
            for (const Vector6& x : xs) states.push_back(VehicleState::from_vec(x));
            return min_separation(states);
        },
        py::arg("states"));

    m.def(
        "screened_poisson",
        [](const Eigen::MatrixXd& source, double tikhonov, double s_max, double d_min, double d_max) {
            GridSpec g;
            g.s_min = 0.0;
            g.s_max = s_max;
            g.d_min = d_min;
            g.d_max = d_max;
            g.n_s = static_cast<int>(source.rows());
            g.n_d = static_cast<int>(source.cols());
            ScalarField src(g);
            for (int i = 0; i < g.n_s; ++i)
                for (int j = 0; j < g.n_d; ++j) src(i, j) = source(i, j);
            return as_matrix(solve_screened_poisson(src, tikhonov, FieldParams{}));
        },
        py::arg("source"), py::arg("tikhonov"), py::arg("s_max") = 600.0, py::arg("d_min") = -8.0,
        py::arg("d_max") = 8.0);

    py::class_<Scenario>(m, "Scenario")
        .def_readonly("name", &Scenario::name)
        .def_readonly("seed", &Scenario::seed)
        .def_readonly("dt", &Scenario::dt)
        .def_readonly("duration", &Scenario::duration)
        .def_property_readonly("n_steps", &Scenario::n_steps)
        .def_property_readonly("vehicle_ids",
                               [](const Scenario& sc) {
                                   std::vector<std::string> ids;
                                   for (const auto& v : sc.vehicles) ids.push_back(v.id);
                                   return ids;
                               })
        .def_property_readonly("host_index", &Scenario::host_index);

    m.def(
        "load_scenario",
        [](const std::filesystem::path& path, const std::vector<std::string>& sets) {
            return load_scenario(path, parse_overrides(sets));
        },
        py::arg("path"), py::arg("overrides") = std::vector<std::string>{});

    m.def(
        "initial_fields",
        [](const Scenario& sc) {
            const FieldSnapshot s = initial_fields(sc);
            py::dict d;
            d["benefit"] = as_matrix(s.benefit);
            d["risk"] = as_matrix(s.risk);
            d["unified"] = as_matrix(s.unified);
            return d;
        },
        py::arg("scenario"), "Host benefit, risk and unified fields as (n_s, n_d) arrays.");

    py::class_<SafetyReport>(m, "SafetyReport")
        .def_readonly("min_separation", &SafetyReport::min_separation)
        .def_readonly("time_below_warning", &SafetyReport::time_below_warning)
        .def_readonly("time_below_critical", &SafetyReport::time_below_critical);

    py::class_<RunLog>(m, "RunLog")
        .def_readonly("ids", &RunLog::ids)
        .def_property_readonly("n_records", [](const RunLog& log) { return log.steps.size(); })
        .def(
            "states",
            [](const RunLog& log) {
                // (n_records, n_vehicles, 6)
                std::vector<std::vector<Vector6>> out;
                for (const StepRecord& r : log.steps) {
                    std::vector<Vector6> row;
                    for (const VehicleRecord& v : r.vehicles) row.push_back(v.state.vec());
                    out.push_back(std::move(row));
                }
                return out;
            })
        .def("min_separations",
             [](const RunLog& log) {
                 std::vector<double> out;
                 for (const StepRecord& r : log.steps) out.push_back(r.min_separation);
                 return out;
             })
        .def("safety", &safety_report)
        .def("export", &export_run, py::arg("directory"));

    m.def(
        "run",
        [](const Scenario& sc, const std::string& mode) {
            py::gil_scoped_release release;
            if (mode.empty()) return run(sc);
            return run(sc, parse_run_mode(mode));
        },
        py::arg("scenario"), py::arg("mode") = "");
}
