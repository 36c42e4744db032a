#pragma once

// True, random-approximate and marginal-approximate posteriors on the grid,
// plus a random-walk Metropolis sampler used as an independent cross-check
// of the quadrature posteriors.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "randpost/measure.hpp"
#include "randpost/misfit.hpp"
#include "randpost/stream.hpp"

namespace randpost {

/// Thrown when a normalizing constant falls below the positive floor.
class DegeneratePosterior : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

inline constexpr double kNormalizerFloor = 1e-300;

/// Posterior with dmu/dmu0 = exp(-misfit) / Z; Z is the measure's normalizer.
DensityMeasure normalize(std::span<const double> misfit_values, const PriorPtr& prior);

DensityMeasure true_posterior(const InverseProblem& problem);

DensityMeasure approximate_posterior(const RandomMisfitFamily& family, std::uint64_t omega, int n);

struct MarginalPosterior {
    DensityMeasure measure;
    double mean_z;     // empirical E[Z_N]; equals measure.normalizer()
    double mean_z_se;  // Monte Carlo standard error of mean_z
};

/// Marginal posterior from a table of misfit realizations (rows = omega).
MarginalPosterior marginal_from_misfits(const SampleTable& misfits, const PriorPtr& prior);

MarginalPosterior marginal_posterior(const RandomMisfitFamily& family, int n, std::size_t m, int threads = 1);

struct RealizedPosterior {
    std::uint64_t omega;
    DensityMeasure measure;
    double z;
};

struct PosteriorBundle {
    DensityMeasure truth;
    double z;
    std::vector<RealizedPosterior> realizations;
    std::optional<MarginalPosterior> marginal;
};

PosteriorBundle build_posteriors(const RandomMisfitFamily& family, int n, std::size_t m, int threads = 1);

struct Moments {
    std::vector<double> mean;
    std::vector<double> variance;
};

Moments moments(const DensityMeasure& measure);

struct ChainOutput {
    int dim = 0;
    std::vector<double> samples;  // steps x dim, row-major
    std::size_t accepted = 0;
    std::size_t proposed = 0;
    double acceptance_rate = 0.0;
    std::uint64_t seed = 0;
    std::optional<std::string> warning;

    std::size_t size() const { return dim == 0 ? 0 : samples.size() / static_cast<std::size_t>(dim); }
    double mean(int axis) const;
    /// Batch-means standard error of the chain mean along one axis.
    double mean_se(int axis, std::size_t batches = 50) const;
};

struct MhOptions {
    std::size_t steps = 10000;
    /// Proposal standard deviation per axis; empty means 0.5 x box width.
    std::vector<double> step_size;
    std::size_t burn_in = 0;
    /// Start point; empty means the box center.
    std::vector<double> start;
};

using LogDensity = std::function<double(std::span<const double>)>;

/// Gaussian random-walk Metropolis on a box; proposals leaving the box are
/// rejected.
ChainOutput mh_sample(const LogDensity& log_target, const std::vector<Interval>& box, const MhOptions& options,
                      Stream& stream);

/// Samples a grid measure, with the log Lebesgue density interpolated
/// multilinearly between nodes. Starts at the highest-density node unless a
/// start point is given.
ChainOutput mh_sample(const DensityMeasure& target, const MhOptions& options, Stream& stream);

/// Multilinear interpolation of per-node values on a tensor grid; points
/// outside the outermost nodes are clamped.
double interpolate(const GridSpace& grid, std::span<const double> values, std::span<const double> u);

}  // namespace randpost
