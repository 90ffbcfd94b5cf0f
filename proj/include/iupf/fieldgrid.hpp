#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace iupf {

/// Uniform node-centred grid over the (s, d) road domain.
struct GridSpec {
    double s_min = 0.0;
    double s_max = 600.0;
    double d_min = -8.0;
    double d_max = 8.0;
    int n_s = 250;
    int n_d = 20;

    double h_s() const { return (s_max - s_min) / (n_s - 1); }
    double h_d() const { return (d_max - d_min) / (n_d - 1); }
    double s_at(int i) const { return s_min + i * h_s(); }
    double d_at(int j) const { return d_min + j * h_d(); }
    int size() const { return n_s * n_d; }

    /// Throws InvalidParameter unless bounds are ordered and n_s, n_d >= 4.
    void validate() const;

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Node values stored row-major in s then d: index i * n_d + j.
class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(const GridSpec& spec, double fill = 0.0);
    ScalarField(const GridSpec& spec, Eigen::VectorXd values);

    const GridSpec& spec() const { return spec_; }
    const Eigen::VectorXd& values() const { return values_; }
    Eigen::VectorXd& values() { return values_; }

    double operator()(int i, int j) const { return values_[i * spec_.n_d + j]; }
    double& operator()(int i, int j) { return values_[i * spec_.n_d + j]; }

    double min() const { return values_.minCoeff(); }
    double max() const { return values_.maxCoeff(); }
    double mean() const { return values_.mean(); }

private:
    GridSpec spec_;
    Eigen::VectorXd values_;
};

/// Partial derivatives along s and d on the same grid.
struct VectorField {
    ScalarField ds;
    ScalarField dd;
};

/// Central differences inside, second-order one-sided differences on the edges.
VectorField gradient(const ScalarField& f);

/// Five-point Laplacian with zero-flux (ghost = boundary node) closure.
/// Sums to zero over the grid for every input.
ScalarField laplacian(const ScalarField& f);

/// Same operator on a raw value vector laid out per `spec`.
void apply_laplacian(const GridSpec& spec, const Eigen::VectorXd& in, Eigen::VectorXd& out);

/// Bilinear value and its exact gradient inside the containing cell.
struct BilinearSample {
    double value = 0.0;
    double ds = 0.0;
    double dd = 0.0;
};

enum class OutOfDomain {
    Throw,  ///< points beyond one cell outside the domain raise DomainError
    Clamp,  ///< every point is clamped onto the domain
};

/// Points within one cell outside the domain are clamped onto the boundary;
/// farther points raise DomainError unless `policy` is Clamp. The gradient
/// component along a clamped axis is zero.
BilinearSample sample_bilinear_with_gradient(const ScalarField& f, const Eigen::Vector2d& p,
                                             OutOfDomain policy = OutOfDomain::Throw);

double sample_bilinear(const ScalarField& f, const Eigen::Vector2d& p,
                       OutOfDomain policy = OutOfDomain::Throw);

/// Affine rescale onto [0, 1]; a range below 1e-12 maps to 0.5 everywhere.
ScalarField normalize(const ScalarField& f);

/// CSV with header `s,d,value`, row-major in s then d, 9 significant digits.
void write_field_csv(const ScalarField& f, std::ostream& out);
void write_field_csv(const ScalarField& f, const std::filesystem::path& path);

/// Several fields on one grid: header `s,d,<name>...`.
void write_fields_csv(const std::vector<std::pair<std::string, const ScalarField*>>& columns,
                      const std::filesystem::path& path);

/// Reads the `s,d,value` format back; the grid is recovered from the coordinates.
ScalarField read_field_csv(const std::filesystem::path& path);

}  // namespace iupf
