#include "randpost/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace randpost {

namespace {

constexpr double kVolumeTol = 1e-10;
constexpr double kMassTol = 1e-8;

void require(bool ok, const std::string& what)
{
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

QuadratureRule parse_quadrature_rule(std::string_view tag)
{
    if (tag == "trapezoid") return QuadratureRule::trapezoid;
    if (tag == "gauss_legendre" || tag == "gauss-legendre") return QuadratureRule::gauss_legendre;
    throw std::invalid_argument("unknown quadrature rule '" + std::string(tag) + "'");
}

std::string_view to_string(QuadratureRule rule)
{
    return rule == QuadratureRule::trapezoid ? "trapezoid" : "gauss_legendre";
}

std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n)
{
    require(n >= 1, "gauss_legendre: n must be positive");
    std::vector<double> x(static_cast<std::size_t>(n));
    std::vector<double> w(static_cast<std::size_t>(n));
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        // Tricomi initial guess, then Newton on P_n
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        // recompute the derivative at the converged root
        double p0 = 1.0, p1 = z;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = (n == 1) ? 1.0 : n * (z * p1 - p0) / (z * z - 1.0);
        const double wi = 2.0 / ((1.0 - z * z) * dp * dp);
        const auto lo = static_cast<std::size_t>(i);
        const auto hi = static_cast<std::size_t>(n - 1 - i);
        x[lo] = -z;
        x[hi] = z;
        w[lo] = wi;
        w[hi] = wi;
    }
    if (n % 2 == 1) x[static_cast<std::size_t>(n / 2)] = 0.0;
    return {std::move(x), std::move(w)};
}

// ---------------------------------------------------------------------------
// GridSpace

std::shared_ptr<const GridSpace> GridSpace::build(int dim, std::vector<Interval> bounds,
                                                  int nodes_per_dim, QuadratureRule rule)
{
    require(dim >= 1 && dim <= 3, "grid dimension must be 1, 2 or 3 (got " + std::to_string(dim) + ")");
    require(bounds.size() == static_cast<std::size_t>(dim), "grid bounds must have one interval per dimension");
    require(nodes_per_dim >= 2, "nodes_per_dim must be at least 2");
    for (const auto& b : bounds) {
        require(std::isfinite(b.lo) && std::isfinite(b.hi) && b.lo < b.hi,
                "grid interval [" + std::to_string(b.lo) + ", " + std::to_string(b.hi) + "] is degenerate");
    }

    std::shared_ptr<GridSpace> g(new GridSpace());
    g->dim_ = dim;
    g->nodes_per_dim_ = nodes_per_dim;
    g->rule_ = rule;
    g->bounds_ = std::move(bounds);

    const auto n = static_cast<std::size_t>(nodes_per_dim);
    std::vector<std::vector<double>> axis_w(static_cast<std::size_t>(dim));
    g->axes_.resize(static_cast<std::size_t>(dim));
    for (std::size_t j = 0; j < static_cast<std::size_t>(dim); ++j) {
        const auto [lo, hi] = g->bounds_[j];
        auto& xs = g->axes_[j];
        auto& ws = axis_w[j];
        xs.resize(n);
        ws.resize(n);
        if (rule == QuadratureRule::trapezoid) {
            const double h = (hi - lo) / static_cast<double>(n - 1);
            for (std::size_t i = 0; i < n; ++i) {
                xs[i] = lo + h * static_cast<double>(i);
                ws[i] = h;
            }
            xs[n - 1] = hi;
            ws[0] = ws[n - 1] = 0.5 * h;
        } else {
            const auto [gx, gw] = gauss_legendre(nodes_per_dim);
            const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
            for (std::size_t i = 0; i < n; ++i) {
                xs[i] = mid + half * gx[i];
                ws[i] = half * gw[i];
            }
        }
    }

    std::size_t total = 1;
    for (int j = 0; j < dim; ++j) total *= n;
    g->nodes_.resize(total * static_cast<std::size_t>(dim));
    g->weights_.resize(total);
    for (std::size_t k = 0; k < total; ++k) {
        std::size_t rem = k;
        double w = 1.0;
        for (std::size_t j = 0; j < static_cast<std::size_t>(dim); ++j) {
            const std::size_t i = rem % n;
            rem /= n;
            g->nodes_[k * static_cast<std::size_t>(dim) + j] = g->axes_[j][i];
            w *= axis_w[j][i];
        }
        g->weights_[k] = w;
    }

    const double vol = g->volume();
    const double sum = compensated_sum(g->weights_);
    if (std::abs(sum - vol) > kVolumeTol * vol) {
        throw std::logic_error("quadrature weights do not sum to the box volume");
    }
    return g;
}

double GridSpace::volume() const
{
    double v = 1.0;
    for (const auto& b : bounds_) v *= b.width();
    return v;
}

bool GridSpace::contains(std::span<const double> u) const
{
    if (u.size() != static_cast<std::size_t>(dim_)) return false;
    for (std::size_t j = 0; j < u.size(); ++j) {
        if (!(u[j] >= bounds_[j].lo && u[j] <= bounds_[j].hi)) return false;
    }
    return true;
}

bool GridSpace::same_as(const GridSpace& other) const
{
    if (this == &other) return true;
    return dim_ == other.dim_ && nodes_ == other.nodes_ && weights_ == other.weights_;
}

// ---------------------------------------------------------------------------
// PriorDensity

PriorDensity::PriorDensity(GridPtr grid, std::vector<double> density)
    : grid_(std::move(grid)), density_(std::move(density))
{
    require(grid_ != nullptr, "prior density needs a grid");
    require(density_.size() == grid_->size(), "prior density must have one value per grid node");
    masses_.resize(density_.size());
    for (std::size_t k = 0; k < density_.size(); ++k) {
        require(std::isfinite(density_[k]) && density_[k] >= 0.0, "prior density must be finite and nonnegative");
        masses_[k] = grid_->weight(k) * density_[k];
    }
    const double total = compensated_sum(masses_);
    require(std::abs(total - 1.0) <= kMassTol, "prior density does not integrate to 1 (got " + std::to_string(total) + ")");
}

std::shared_ptr<const PriorDensity> PriorDensity::uniform(GridPtr grid)
{
    const double v = grid->volume();
    std::vector<double> d(grid->size(), 1.0 / v);
    return std::make_shared<const PriorDensity>(std::move(grid), std::move(d));
}

std::shared_ptr<const PriorDensity> PriorDensity::truncated_gaussian(GridPtr grid,
                                                                     std::span<const double> mean,
                                                                     std::span<const double> stddev)
{
    const auto p = static_cast<std::size_t>(grid->dim());
    require(mean.size() == p && stddev.size() == p, "truncated Gaussian prior needs one mean and stddev per dimension");
    for (double s : stddev) require(s > 0.0 && std::isfinite(s), "truncated Gaussian stddev must be positive");
    std::vector<double> d(grid->size());
    for (std::size_t k = 0; k < d.size(); ++k) {
        const auto u = grid->node(k);
        double e = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double z = (u[j] - mean[j]) / stddev[j];
            e += 0.5 * z * z;
        }
        d[k] = std::exp(-e);
    }
    const double c = integrate(d, *grid);
    require(c > 0.0, "truncated Gaussian prior has no mass on the grid");
    for (double& x : d) x /= c;
    return std::make_shared<const PriorDensity>(std::move(grid), std::move(d));
}

bool PriorDensity::strictly_positive() const
{
    return std::all_of(density_.begin(), density_.end(), [](double x) { return x > 0.0; });
}

// ---------------------------------------------------------------------------
// DensityMeasure

DensityMeasure::DensityMeasure(PriorPtr prior, std::vector<double> log_density, double log_normalizer)
    : prior_(std::move(prior)), log_density_(std::move(log_density)), log_normalizer_(log_normalizer)
{
    require(prior_ != nullptr, "density measure needs a prior");
    require(log_density_.size() == prior_->grid().size(), "log density must have one value per grid node");
    require(std::isfinite(log_normalizer_), "normalizer must be positive and finite");
    for (double x : log_density_) {
        require(!std::isnan(x) && x != kInf, "log density values must be finite or -inf");
    }
    const double mass = total_mass();
    require(std::abs(mass - 1.0) <= kMassTol, "density measure is not normalized (mass " + std::to_string(mass) + ")");
}

DensityMeasure DensityMeasure::normalized(PriorPtr prior, std::vector<double> log_density)
{
    require(prior != nullptr, "density measure needs a prior");
    require(log_density.size() == prior->grid().size(), "log density must have one value per grid node");
    std::vector<double> terms(log_density.size());
    for (std::size_t k = 0; k < terms.size(); ++k) {
        terms[k] = prior->mass(k) > 0.0 ? std::log(prior->mass(k)) + log_density[k] : -kInf;
    }
    const double log_z = log_sum_exp(terms);
    require(std::isfinite(log_z), "density measure has no mass");
    return DensityMeasure(std::move(prior), std::move(log_density), log_z);
}

double DensityMeasure::normalizer() const { return std::exp(log_normalizer_); }

double DensityMeasure::density_wrt_prior(std::size_t k) const
{
    return std::exp(log_density_[k] - log_normalizer_);
}

double DensityMeasure::lebesgue_density(std::size_t k) const
{
    return prior_->density(k) * density_wrt_prior(k);
}

std::vector<double> DensityMeasure::densities_wrt_prior() const
{
    std::vector<double> out(log_density_.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = density_wrt_prior(k);
    return out;
}

double DensityMeasure::total_mass() const
{
    std::vector<double> m(log_density_.size());
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = prior_->mass(k) * density_wrt_prior(k);
    return compensated_sum(m);
}

PriorDensity DensityMeasure::as_reference() const
{
    std::vector<double> d(log_density_.size());
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = lebesgue_density(k);
    return PriorDensity(prior_->grid_ptr(), std::move(d));
}

std::vector<StencilPoint> interpolation_stencil(const GridSpace& grid, std::span<const double> u)
{
    require(u.size() == static_cast<std::size_t>(grid.dim()), "interpolation: point dimension mismatch");
    const auto p = u.size();
    const auto n = static_cast<std::size_t>(grid.nodes_per_dim());
    std::array<std::size_t, 3> lo{};
    std::array<double, 3> frac{};
    for (std::size_t j = 0; j < p; ++j) {
        const auto ax = grid.axis(static_cast<int>(j));
        const double x = std::clamp(u[j], ax.front(), ax.back());
        const auto it = std::upper_bound(ax.begin(), ax.end(), x);
        std::size_t i = it == ax.begin() ? 0 : static_cast<std::size_t>(it - ax.begin()) - 1;
        i = std::min(i, n - 2);
        lo[j] = i;
        frac[j] = (x - ax[i]) / (ax[i + 1] - ax[i]);
    }
    std::vector<StencilPoint> out;
    out.reserve(std::size_t{1} << p);
    for (std::size_t corner = 0; corner < (std::size_t{1} << p); ++corner) {
        double w = 1.0;
        std::size_t k = 0, stride = 1;
        for (std::size_t j = 0; j < p; ++j) {
            const bool up = (corner >> j) & 1U;
            w *= up ? frac[j] : 1.0 - frac[j];
            k += (lo[j] + (up ? 1 : 0)) * stride;
            stride *= n;
        }
        if (w != 0.0) out.push_back({k, w});
    }
    return out;
}

// ---------------------------------------------------------------------------
// free functions

double compensated_sum(std::span<const double> values)
{
    double sum = 0.0, c = 0.0;
    for (double v : values) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v)) {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    return sum + c;
}

double log_sum_exp(std::span<const double> x)
{
    if (x.empty()) return -kInf;
    const double m = *std::max_element(x.begin(), x.end());
    if (m == -kInf) return -kInf;
    if (m == kInf) return kInf;
    double sum = 0.0;
    for (double v : x) sum += std::exp(v - m);
    return m + std::log(sum);
}

double log_mean_exp(std::span<const double> x)
{
    if (x.empty()) return -kInf;
    const double m = *std::max_element(x.begin(), x.end());
    if (m == -kInf || m == kInf) return m;
    double sum = 0.0;
    for (double v : x) sum += std::exp(v - m);
    return m + std::log(sum / static_cast<double>(x.size()));
}

double integrate(std::span<const double> values, const GridSpace& grid,
                 std::optional<std::span<const double>> weight_density)
{
    require(values.size() == grid.size(), "integrate: values must have one entry per grid node");
    if (weight_density) {
        require(weight_density->size() == grid.size(), "integrate: weight density must have one entry per grid node");
    }
    std::vector<double> terms(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        double t = grid.weight(k) * values[k];
        if (weight_density) {
            const double rho = (*weight_density)[k];
            require(rho >= 0.0, "integrate: weight density must be nonnegative");
            t *= rho;
        }
        terms[k] = t;
    }
    return compensated_sum(terms);
}

double hellinger(const DensityMeasure& mu, const DensityMeasure& nu, const PriorDensity& reference)
{
    require(mu.grid().same_as(nu.grid()) && mu.grid().same_as(reference.grid()),
            "hellinger: measures are defined on different grids");
    const auto& grid = reference.grid();
    std::vector<double> terms(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double a = mu.lebesgue_density(k);
        const double b = nu.lebesgue_density(k);
        require(std::isfinite(a) && std::isfinite(b), "hellinger: non-finite density value");
        const double r = reference.density(k);
        if (r <= 0.0) {
            require(a == 0.0 && b == 0.0, "hellinger: reference does not dominate both measures");
            terms[k] = 0.0;
            continue;
        }
        const double diff = std::sqrt(a / r) - std::sqrt(b / r);
        terms[k] = grid.weight(k) * r * diff * diff;
    }
    const double h2 = 0.5 * compensated_sum(terms);
    return std::sqrt(std::clamp(h2, 0.0, 1.0));
}

double hellinger(const DensityMeasure& mu, const DensityMeasure& nu)
{
    return hellinger(mu, nu, mu.prior());
}

void MixedNormSpec::validate() const
{
    require(q_inner >= 1.0, "mixed norm: q_inner must be >= 1");
    require(q_outer >= 1.0, "mixed norm: q_outer must be >= 1");
    require(omega_samples >= 1, "mixed norm: need at least one omega sample");
}

double mixed_norm(const SampleTable& samples, const std::function<double(double)>& inner_map,
                  const MixedNormSpec& spec, const PriorDensity& prior)
{
    spec.validate();
    require(samples.rows() == spec.omega_samples, "mixed norm: sample table rows differ from omega_samples");
    require(samples.cols() == prior.grid().size(), "mixed norm: sample table columns differ from grid size");

    const std::size_t m = samples.rows();
    std::vector<double> inner(samples.cols());
    std::vector<double> column(m);
    for (std::size_t k = 0; k < samples.cols(); ++k) {
        double peak = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double s = samples(j, k);
            require(std::isfinite(s), "mixed norm: non-finite sample value");
            const double v = std::abs(inner_map(s));
            peak = std::max(peak, v);
            column[j] = v;
        }
        if (spec.q_inner == kInf) {
            inner[k] = peak;
        } else {
            for (auto& v : column) v = std::pow(v, spec.q_inner);
            inner[k] = std::pow(compensated_sum(column) / static_cast<double>(m), 1.0 / spec.q_inner);
        }
    }

    if (spec.q_outer == kInf) {
        double peak = 0.0;
        for (std::size_t k = 0; k < inner.size(); ++k) {
            if (prior.mass(k) > 0.0) peak = std::max(peak, inner[k]);
        }
        return peak;
    }
    std::vector<double> terms(inner.size());
    for (std::size_t k = 0; k < inner.size(); ++k) terms[k] = prior.mass(k) * std::pow(inner[k], spec.q_outer);
    return std::pow(compensated_sum(terms), 1.0 / spec.q_outer);
}

double influence_standard_error(std::span<const double> influence)
{
    const std::size_t m = influence.size();
    if (m < 2) return std::numeric_limits<double>::quiet_NaN();
    const double mean = compensated_sum(influence) / static_cast<double>(m);
    double ss = 0.0;
    for (double h : influence) ss += (h - mean) * (h - mean);
    return std::sqrt(ss / static_cast<double>(m - 1)) / std::sqrt(static_cast<double>(m));
}

double MixedNormEstimate::standard_error() const
{
    if (rel_influence.empty()) return std::numeric_limits<double>::quiet_NaN();
    if (value == 0.0) return 0.0;
    return value * influence_standard_error(rel_influence);
}

MixedNormEstimate mixed_norm_from_logs(const SampleTable& log_values, double q_inner, double q_outer,
                                       const PriorDensity& prior)
{
    require(q_inner >= 1.0 && q_outer >= 1.0, "mixed norm exponents must be >= 1");
    require(log_values.rows() >= 1, "mixed norm: need at least one omega sample");
    require(log_values.cols() == prior.grid().size(), "mixed norm: sample table columns differ from grid size");

    const std::size_t m = log_values.rows();
    const std::size_t n = log_values.cols();
    // per-node log of E[b^q]^(1/q)
    std::vector<double> lambda(n);
    std::vector<double> column(m);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < m; ++j) {
            const double l = log_values(j, k);
            require(!std::isnan(l) && l != kInf, "mixed norm: non-finite sample value");
            column[j] = l;
        }
        if (q_inner == kInf) {
            lambda[k] = *std::max_element(column.begin(), column.end());
        } else {
            for (auto& l : column) l *= q_inner;
            lambda[k] = log_mean_exp(column) / q_inner;
        }
    }

    MixedNormEstimate est;
    std::vector<double> weight(n, 0.0);
    if (q_outer == kInf) {
        std::size_t arg = n;
        for (std::size_t k = 0; k < n; ++k) {
            if (prior.mass(k) > 0.0 && (arg == n || lambda[k] > lambda[arg])) arg = k;
        }
        est.log_value = (arg == n) ? -kInf : lambda[arg];
        if (arg != n) weight[arg] = 1.0;
    } else {
        std::vector<double> terms(n);
        for (std::size_t k = 0; k < n; ++k) {
            terms[k] = prior.mass(k) > 0.0 ? std::log(prior.mass(k)) + q_outer * lambda[k] : -kInf;
        }
        const double log_total = log_sum_exp(terms);
        est.log_value = log_total / q_outer;
        if (log_total > -kInf) {
            for (std::size_t k = 0; k < n; ++k) weight[k] = std::exp(terms[k] - log_total);
        }
    }
    est.value = std::exp(est.log_value);

    if (q_inner == kInf) return est;
    est.rel_influence.assign(m, 0.0);
    if (est.log_value == -kInf) return est;
    for (std::size_t j = 0; j < m; ++j) {
        double h = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (weight[k] == 0.0) continue;
            h += weight[k] * (std::exp(q_inner * (log_values(j, k) - lambda[k])) - 1.0);
        }
        est.rel_influence[j] = h / q_inner;
    }
    return est;
}

}  // namespace randpost
