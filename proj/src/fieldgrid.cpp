#include "iupf/fieldgrid.hpp"

#include "iupf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace iupf {

void GridSpec::validate() const {
    if (!(s_max > s_min) || !(d_max > d_min)) {
        throw InvalidParameter("grid bounds must satisfy s_max > s_min and d_max > d_min");
    }
    if (n_s < 4 || n_d < 4) {
        throw InvalidParameter("grid needs at least 4 points per axis");
    }
}

ScalarField::ScalarField(const GridSpec& spec, double fill)
    : spec_(spec), values_(Eigen::VectorXd::Constant(spec.size(), fill)) {}

ScalarField::ScalarField(const GridSpec& spec, Eigen::VectorXd values)
    : spec_(spec), values_(std::move(values)) {
    if (values_.size() != spec_.size()) {
        throw InvalidParameter("field value count does not match grid");
    }
}

namespace {

// First derivative along one axis of a strided line of n samples.
double line_derivative(const double* v, int stride, int n, int k, double h) {
    if (k == 0) {
        return (-3.0 * v[0] + 4.0 * v[stride] - v[2 * stride]) / (2.0 * h);
    }
    if (k == n - 1) {
        const double* e = v + (n - 1) * stride;
        return (3.0 * e[0] - 4.0 * e[-stride] + e[-2 * stride]) / (2.0 * h);
    }
    return (v[(k + 1) * stride] - v[(k - 1) * stride]) / (2.0 * h);
}

}  // namespace

VectorField gradient(const ScalarField& f) {
    const GridSpec& g = f.spec();
    VectorField out{ScalarField(g), ScalarField(g)};
    const double* v = f.values().data();
    const double hs = g.h_s();
    const double hd = g.h_d();
    for (int i = 0; i < g.n_s; ++i) {
        for (int j = 0; j < g.n_d; ++j) {
            out.ds(i, j) = line_derivative(v + j, g.n_d, g.n_s, i, hs);
            out.dd(i, j) = line_derivative(v + i * g.n_d, 1, g.n_d, j, hd);
        }
    }
    return out;
}

void apply_laplacian(const GridSpec& g, const Eigen::VectorXd& in, Eigen::VectorXd& out) {
    const int ns = g.n_s;
    const int nd = g.n_d;
    const double cs = 1.0 / (g.h_s() * g.h_s());
    const double cd = 1.0 / (g.h_d() * g.h_d());
    out.resize(in.size());
    for (int i = 0; i < ns; ++i) {
        for (int j = 0; j < nd; ++j) {
            const int k = i * nd + j;
            const double c = in[k];
            double acc = 0.0;
            if (i > 0) acc += cs * (in[k - nd] - c);
            if (i < ns - 1) acc += cs * (in[k + nd] - c);
            if (j > 0) acc += cd * (in[k - 1] - c);
            if (j < nd - 1) acc += cd * (in[k + 1] - c);
            out[k] = acc;
        }
    }
}

ScalarField laplacian(const ScalarField& f) {
    Eigen::VectorXd out;
    apply_laplacian(f.spec(), f.values(), out);
    return ScalarField(f.spec(), std::move(out));
}

namespace {

struct AxisLocation {
    int cell = 0;
    double t = 0.0;
    bool clamped = false;
};

AxisLocation locate(double x, double lo, double h, int n, OutOfDomain policy, const char* axis) {
    double u = (x - lo) / h;
    if (!std::isfinite(u)) {
        throw DomainError(std::string("non-finite ") + axis + " coordinate");
    }
    AxisLocation loc;
    if (u < 0.0 || u > n - 1) {
        if (policy == OutOfDomain::Throw && (u < -1.0 || u > n)) {
            std::ostringstream msg;
            msg << axis << "=" << x << " lies beyond the field domain clamp band";
            throw DomainError(msg.str());
        }
        u = std::clamp(u, 0.0, static_cast<double>(n - 1));
        loc.clamped = true;
    }
    loc.cell = std::min(static_cast<int>(std::floor(u)), n - 2);
    loc.t = u - loc.cell;
    return loc;
}

}  // namespace

BilinearSample sample_bilinear_with_gradient(const ScalarField& f, const Eigen::Vector2d& p,
                                             OutOfDomain policy) {
    const GridSpec& g = f.spec();
    const AxisLocation ls = locate(p[0], g.s_min, g.h_s(), g.n_s, policy, "s");
    const AxisLocation ld = locate(p[1], g.d_min, g.h_d(), g.n_d, policy, "d");

    const double f00 = f(ls.cell, ld.cell);
    const double f01 = f(ls.cell, ld.cell + 1);
    const double f10 = f(ls.cell + 1, ld.cell);
    const double f11 = f(ls.cell + 1, ld.cell + 1);
    const double ts = ls.t;
    const double td = ld.t;

    BilinearSample out;
    out.value = (1 - ts) * (1 - td) * f00 + (1 - ts) * td * f01 + ts * (1 - td) * f10 + ts * td * f11;
    if (!ls.clamped) {
        out.ds = ((1 - td) * (f10 - f00) + td * (f11 - f01)) / g.h_s();
    }
    if (!ld.clamped) {
        out.dd = ((1 - ts) * (f01 - f00) + ts * (f11 - f10)) / g.h_d();
    }
    return out;
}

double sample_bilinear(const ScalarField& f, const Eigen::Vector2d& p, OutOfDomain policy) {
    return sample_bilinear_with_gradient(f, p, policy).value;
}

ScalarField normalize(const ScalarField& f) {
    const double lo = f.min();
    const double hi = f.max();
    if (hi - lo < 1e-12) {
        return ScalarField(f.spec(), 0.5);
    }
    return ScalarField(f.spec(), ((f.values().array() - lo) / (hi - lo)).matrix());
}

namespace {

void put_number(std::ostream& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    out << buf;
}

}  // namespace

void write_field_csv(const ScalarField& f, std::ostream& out) {
    const GridSpec& g = f.spec();
    out << "s,d,value\n";
    for (int i = 0; i < g.n_s; ++i) {
        for (int j = 0; j < g.n_d; ++j) {
            put_number(out, g.s_at(i));
            out << ',';
            put_number(out, g.d_at(j));
            out << ',';
            put_number(out, f(i, j));
            out << '\n';
        }
    }
}

void write_field_csv(const ScalarField& f, const std::filesystem::path& path) {
    write_fields_csv({{"value", &f}}, path);
}

void write_fields_csv(const std::vector<std::pair<std::string, const ScalarField*>>& columns,
                      const std::filesystem::path& path) {
    if (columns.empty()) {
        throw InvalidParameter("write_fields_csv: no columns");
    }
    const GridSpec& g = columns.front().second->spec();
    for (const auto& [name, field] : columns) {
        if (!(field->spec() == g)) {
            throw InvalidParameter("write_fields_csv: column '" + name + "' is on a different grid");
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << "s,d";
    for (const auto& col : columns) {
        out << ',' << col.first;
    }
    out << '\n';
    for (int i = 0; i < g.n_s; ++i) {
        for (int j = 0; j < g.n_d; ++j) {
            put_number(out, g.s_at(i));
            out << ',';
            put_number(out, g.d_at(j));
            for (const auto& col : columns) {
                out << ',';
                put_number(out, (*col.second)(i, j));
            }
            out << '\n';
        }
    }
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

ScalarField read_field_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::string line;
    std::getline(in, line);
    if (line.rfind("s,d,", 0) != 0) {
        throw ParseError("expected header 's,d,value' in " + path.string(), 1);
    }
    std::vector<double> s_col;
    std::vector<double> d_col;
    std::vector<double> v_col;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        double s = 0;
        double d = 0;
        double v = 0;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &s, &d, &v) != 3) {
            throw ParseError("malformed row in " + path.string(), lineno);
        }
        s_col.push_back(s);
        d_col.push_back(d);
        v_col.push_back(v);
    }
    if (v_col.empty()) {
        throw ParseError("no data rows in " + path.string(), lineno);
    }
    // d varies fastest: the first repeat of d_col[0] marks the row length.
    int n_d = 1;
    while (n_d < static_cast<int>(d_col.size()) && s_col[n_d] == s_col[0]) {
        ++n_d;
    }
    const int n_s = static_cast<int>(v_col.size()) / n_d;
    if (n_s * n_d != static_cast<int>(v_col.size())) {
        throw ParseError("row count is not a full grid in " + path.string(), lineno);
    }
    GridSpec g{s_col.front(), s_col.back(), d_col.front(), d_col.back(), n_s, n_d};
    g.validate();
    Eigen::VectorXd vals = Eigen::Map<Eigen::VectorXd>(v_col.data(), static_cast<Eigen::Index>(v_col.size()));
    return ScalarField(g, std::move(vals));
}

}  // namespace iupf
