#pragma once

// Discrete measures on a tensor-quadrature grid: the grid itself, prior
// densities, posterior-type measures stored as log densities with respect to
// the prior, the Hellinger metric and mixed expectation norms.

#include <array>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace randpost {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class QuadratureRule { trapezoid, gauss_legendre };

QuadratureRule parse_quadrature_rule(std::string_view tag);
std::string_view to_string(QuadratureRule rule);

struct Interval {
    double lo;
    double hi;
    double width() const { return hi - lo; }
};

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n);

/// Compact box with a tensor-product quadrature rule.
class GridSpace {
public:
    static std::shared_ptr<const GridSpace> build(int dim, std::vector<Interval> bounds,
                                                  int nodes_per_dim, QuadratureRule rule);

    int dim() const { return dim_; }
    std::size_t size() const { return weights_.size(); }
    int nodes_per_dim() const { return nodes_per_dim_; }
    QuadratureRule rule() const { return rule_; }
    const std::vector<Interval>& bounds() const { return bounds_; }
    double volume() const;

    std::span<const double> node(std::size_t k) const
    {
        return {nodes_.data() + k * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
    }
    double weight(std::size_t k) const { return weights_[k]; }
    std::span<const double> weights() const { return weights_; }

    /// One-dimensional node coordinates along axis j (ascending).
    std::span<const double> axis(int j) const { return axes_[static_cast<std::size_t>(j)]; }

    bool contains(std::span<const double> u) const;
    bool same_as(const GridSpace& other) const;

private:
    GridSpace() = default;

    int dim_ = 0;
    int nodes_per_dim_ = 0;
    QuadratureRule rule_ = QuadratureRule::trapezoid;
    std::vector<Interval> bounds_;
    std::vector<std::vector<double>> axes_;
    std::vector<double> nodes_;  // size() * dim, first axis fastest
    std::vector<double> weights_;
};

using GridPtr = std::shared_ptr<const GridSpace>;

/// Lebesgue density of a probability measure, sampled at the grid nodes.
class PriorDensity {
public:
    PriorDensity(GridPtr grid, std::vector<double> density);

    static std::shared_ptr<const PriorDensity> uniform(GridPtr grid);
    /// Independent Gaussians per axis, truncated to the box and renormalized
    /// on the grid so the discrete mass is exactly one.
    static std::shared_ptr<const PriorDensity> truncated_gaussian(GridPtr grid,
                                                                  std::span<const double> mean,
                                                                  std::span<const double> stddev);

    const GridSpace& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }
    std::span<const double> density() const { return density_; }
    double density(std::size_t k) const { return density_[k]; }
    /// Quadrature mass w_k * density_k.
    double mass(std::size_t k) const { return masses_[k]; }
    std::span<const double> masses() const { return masses_; }
    bool strictly_positive() const;

private:
    GridPtr grid_;
    std::vector<double> density_;
    std::vector<double> masses_;
};

using PriorPtr = std::shared_ptr<const PriorDensity>;

/// Probability measure given by dmu/dmu0 = exp(log_density) / Z.
class DensityMeasure {
public:
    DensityMeasure(PriorPtr prior, std::vector<double> log_density, double log_normalizer);

    /// Chooses Z so that the measure has unit mass.
    static DensityMeasure normalized(PriorPtr prior, std::vector<double> log_density);

    const PriorDensity& prior() const { return *prior_; }
    const PriorPtr& prior_ptr() const { return prior_; }
    const GridSpace& grid() const { return prior_->grid(); }
    std::span<const double> log_density() const { return log_density_; }
    double log_normalizer() const { return log_normalizer_; }
    double normalizer() const;

    double density_wrt_prior(std::size_t k) const;
    double lebesgue_density(std::size_t k) const;
    std::vector<double> densities_wrt_prior() const;
    double total_mass() const;

    /// The same measure as a Lebesgue density, usable as a Hellinger reference.
    PriorDensity as_reference() const;

private:
    PriorPtr prior_;
    std::vector<double> log_density_;
    double log_normalizer_;
};

struct StencilPoint {
    std::size_t node;
    double weight;
};

/// Multilinear interpolation stencil (up to 2^dim nodes with nonzero
/// weight) for point u on the tensor grid. Coordinates outside the outermost
/// nodes are clamped.
std::vector<StencilPoint> interpolation_stencil(const GridSpace& grid, std::span<const double> u);

/// Neumaier-compensated sum in index order.
double compensated_sum(std::span<const double> values);

/// log(sum exp(x_i)) with max subtraction. Returns -inf for an empty or
/// all -inf input.
double log_sum_exp(std::span<const double> x);

/// log(mean exp(x_i)); exact when all inputs are equal.
double log_mean_exp(std::span<const double> x);

/// sum_k w_k * values_k * weight_density_k
double integrate(std::span<const double> values, const GridSpace& grid,
                 std::optional<std::span<const double>> weight_density = std::nullopt);

/// Hellinger distance between two measures, computed against `reference`,
/// which must dominate both.
double hellinger(const DensityMeasure& mu, const DensityMeasure& nu, const PriorDensity& reference);
double hellinger(const DensityMeasure& mu, const DensityMeasure& nu);

/// Values indexed by (omega realization, grid node), row-major.
class SampleTable {
public:
    SampleTable() = default;
    SampleTable(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double& operator()(std::size_t j, std::size_t k) { return data_[j * cols_ + k]; }
    double operator()(std::size_t j, std::size_t k) const { return data_[j * cols_ + k]; }
    std::span<double> row(std::size_t j) { return {data_.data() + j * cols_, cols_}; }
    std::span<const double> row(std::size_t j) const { return {data_.data() + j * cols_, cols_}; }

    template <class F>
    SampleTable map(F&& f) const
    {
        SampleTable out(rows_, cols_);
        for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = f(data_[i]);
        return out;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct MixedNormSpec {
    double q_inner = 1.0;
    double q_outer = 1.0;
    std::size_t omega_samples = 1;

    void validate() const;
};

/// ( int | E_omega[ |f(s)|^q_inner ]^(1/q_inner) |^q_outer dmu0 )^(1/q_outer)
///
/// The omega expectation is the empirical mean over the table rows; an
/// infinite exponent becomes a maximum over rows or nodes.
double mixed_norm(const SampleTable& samples, const std::function<double(double)>& inner_map,
                  const MixedNormSpec& spec, const PriorDensity& prior);

/// A mixed norm evaluated from log values of a nonnegative integrand, together
/// with its first-order (delta-method) influence per omega row. The influence
/// is relative: value * sd(influence) / sqrt(M) is the Monte Carlo standard
/// error. It is empty when q_inner is infinite.
struct MixedNormEstimate {
    double value = 0.0;
    double log_value = -kInf;
    std::vector<double> rel_influence;

    double standard_error() const;
};

MixedNormEstimate mixed_norm_from_logs(const SampleTable& log_values, double q_inner, double q_outer,
                                       const PriorDensity& prior);

/// Standard error of a mean statistic from per-sample influence values.
double influence_standard_error(std::span<const double> influence);

}  // namespace randpost
