#include "randpost/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "randpost/parallel.hpp"

namespace randpost {

namespace {

void require(bool ok, const std::string& what)
{
    if (!ok) throw std::invalid_argument(what);
}

const double kLogFloor = std::log(kNormalizerFloor);

}  // namespace

DensityMeasure normalize(std::span<const double> misfit_values, const PriorPtr& prior)
{
    require(prior != nullptr, "normalize needs a prior");
    require(misfit_values.size() == prior->grid().size(), "misfit must have one value per grid node");
    std::vector<double> log_density(misfit_values.size());
    std::vector<double> terms(misfit_values.size());
    for (std::size_t k = 0; k < misfit_values.size(); ++k) {
        const double phi = misfit_values[k];
        if (!std::isfinite(phi)) throw std::domain_error("normalize: non-finite misfit value");
        log_density[k] = -phi;
        terms[k] = prior->mass(k) > 0.0 ? std::log(prior->mass(k)) - phi : -kInf;
    }
    const double log_z = log_sum_exp(terms);
    if (!(log_z >= kLogFloor)) {
        throw DegeneratePosterior("normalizing constant below floor (log Z = " + std::to_string(log_z) + ")");
    }
    return DensityMeasure(prior, std::move(log_density), log_z);
}

DensityMeasure true_posterior(const InverseProblem& problem)
{
    return normalize(problem.misfit(), problem.prior_ptr());
}

DensityMeasure approximate_posterior(const RandomMisfitFamily& family, std::uint64_t omega, int n)
{
    return normalize(misfit_field(family, n, omega), family.problem().prior_ptr());
}

MarginalPosterior marginal_from_misfits(const SampleTable& misfits, const PriorPtr& prior)
{
    require(prior != nullptr, "marginal posterior needs a prior");
    require(misfits.rows() >= 1, "marginal posterior needs at least one realization");
    require(misfits.cols() == prior->grid().size(), "misfit table columns differ from grid size");
    const std::size_t m = misfits.rows();
    const std::size_t n = misfits.cols();

    std::vector<double> log_mean(n);
    std::vector<double> column(m);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < m; ++j) {
            const double phi = misfits(j, k);
            if (!std::isfinite(phi)) throw std::domain_error("marginal posterior: non-finite misfit value");
            column[j] = -phi;
        }
        log_mean[k] = log_mean_exp(column);
    }

    // per-realization Z_N for the standard error of E[Z_N]
    std::vector<double> log_prior_mass(n);
    for (std::size_t k = 0; k < n; ++k) log_prior_mass[k] = std::log(prior->mass(k));
    std::vector<double> zs(m);
    std::vector<double> terms(n);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t k = 0; k < n; ++k) terms[k] = log_prior_mass[k] - misfits(j, k);
        zs[j] = std::exp(log_sum_exp(terms));
    }

    std::vector<double> ld(log_mean);
    for (std::size_t k = 0; k < n; ++k) terms[k] = log_prior_mass[k] + log_mean[k];
    const double log_z = log_sum_exp(terms);
    if (!(log_z >= kLogFloor)) {
        throw DegeneratePosterior("empirical E[Z_N] below floor (log = " + std::to_string(log_z) + ")");
    }
    DensityMeasure measure(prior, std::move(ld), log_z);
    const double se = m >= 2 ? influence_standard_error(zs) : std::numeric_limits<double>::quiet_NaN();
    return MarginalPosterior{std::move(measure), std::exp(log_z), se};
}

MarginalPosterior marginal_posterior(const RandomMisfitFamily& family, int n, std::size_t m, int threads)
{
    require(m >= 1, "marginal posterior needs M >= 1");
    const std::size_t nodes = family.problem().grid().size();
    SampleTable table(m, nodes);
    parallel_for(m, threads, [&](std::size_t j) {
        const auto phi = misfit_field(family, n, j);
        std::copy(phi.begin(), phi.end(), table.row(j).begin());
    });
    return marginal_from_misfits(table, family.problem().prior_ptr());
}

PosteriorBundle build_posteriors(const RandomMisfitFamily& family, int n, std::size_t m, int threads)
{
    require(m >= 1, "posterior bundle needs M >= 1");
    const auto& prior = family.problem().prior_ptr();
    DensityMeasure truth = true_posterior(family.problem());
    const double z = truth.normalizer();

    SampleTable table(m, family.problem().grid().size());
    std::vector<std::optional<DensityMeasure>> measures(m);
    parallel_for(m, threads, [&](std::size_t j) {
        const auto phi = misfit_field(family, n, j);
        std::copy(phi.begin(), phi.end(), table.row(j).begin());
        measures[j].emplace(normalize(phi, prior));
    });

    PosteriorBundle bundle{std::move(truth), z, {}, std::nullopt};
    bundle.realizations.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double zn = measures[j]->normalizer();
        bundle.realizations.push_back({j, std::move(*measures[j]), zn});
    }
    bundle.marginal.emplace(marginal_from_misfits(table, prior));
    return bundle;
}

Moments moments(const DensityMeasure& measure)
{
    const auto& grid = measure.grid();
    const auto p = static_cast<std::size_t>(grid.dim());
    const std::size_t n = grid.size();
    std::vector<double> mass(n);
    for (std::size_t k = 0; k < n; ++k) mass[k] = measure.prior().mass(k) * measure.density_wrt_prior(k);

    Moments out{std::vector<double>(p), std::vector<double>(p)};
    std::vector<double> terms(n);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t k = 0; k < n; ++k) terms[k] = mass[k] * grid.node(k)[j];
        const double mean = compensated_sum(terms);
        for (std::size_t k = 0; k < n; ++k) {
            const double c = grid.node(k)[j] - mean;
            terms[k] = mass[k] * c * c;
        }
        out.mean[j] = mean;
        out.variance[j] = compensated_sum(terms);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Metropolis

double ChainOutput::mean(int axis) const
{
    const std::size_t len = size();
    require(len > 0, "empty chain");
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) s += samples[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(axis)];
    return s / static_cast<double>(len);
}

double ChainOutput::mean_se(int axis, std::size_t batches) const
{
    const std::size_t len = size();
    require(batches >= 2 && len >= 2 * batches, "chain too short for batch means");
    const std::size_t b = len / batches;
    std::vector<double> means(batches);
    for (std::size_t i = 0; i < batches; ++i) {
        double s = 0.0;
        for (std::size_t t = i * b; t < (i + 1) * b; ++t) {
            s += samples[t * static_cast<std::size_t>(dim) + static_cast<std::size_t>(axis)];
        }
        means[i] = s / static_cast<double>(b);
    }
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(batches);
    double ss = 0.0;
    for (double x : means) ss += (x - grand) * (x - grand);
    return std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
}

ChainOutput mh_sample(const LogDensity& log_target, const std::vector<Interval>& box, const MhOptions& options,
                      Stream& stream)
{
    const std::size_t p = box.size();
    require(p >= 1, "MH needs a nonempty box");
    require(options.steps >= 1, "MH needs at least one step");
    std::vector<double> step = options.step_size;
    if (step.empty()) {
        for (const auto& b : box) step.push_back(0.5 * b.width());
    } else if (step.size() == 1 && p > 1) {
        step.assign(p, step.front());
    }
    require(step.size() == p, "MH step size must be scalar or per-dimension");
    for (double s : step) require(s > 0.0 && std::isfinite(s), "MH step size must be positive");

    std::vector<double> x = options.start;
    if (x.empty()) {
        for (const auto& b : box) x.push_back(0.5 * (b.lo + b.hi));
    }
    require(x.size() == p, "MH start point has the wrong dimension");
    for (std::size_t j = 0; j < p; ++j) require(x[j] >= box[j].lo && x[j] <= box[j].hi, "MH start point outside the box");
    double lx = log_target(x);
    require(lx > -kInf, "MH start point has zero target density");

    ChainOutput out;
    out.dim = static_cast<int>(p);
    out.seed = stream.key();
    out.samples.reserve(options.steps * p);
    std::vector<double> y(p);
    const std::size_t total = options.burn_in + options.steps;
    std::size_t accepted = 0;
    for (std::size_t t = 0; t < total; ++t) {
        bool inside = true;
        for (std::size_t j = 0; j < p; ++j) {
            y[j] = x[j] + step[j] * stream.normal();
            inside = inside && y[j] >= box[j].lo && y[j] <= box[j].hi;
        }
        // always consume the acceptance draw so the stream layout is fixed
        const double log_u = std::log(stream.uniform());
        if (inside) {
            const double ly = log_target(y);
            if (log_u < ly - lx) {
                x = y;
                lx = ly;
                if (t >= options.burn_in) ++accepted;
            }
        }
        if (t >= options.burn_in) out.samples.insert(out.samples.end(), x.begin(), x.end());
    }
    out.accepted = accepted;
    out.proposed = options.steps;
    out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(options.steps);
    if (out.acceptance_rate < 0.1 || out.acceptance_rate > 0.9) {
        out.warning = "acceptance rate " + std::to_string(out.acceptance_rate) + " outside [0.1, 0.9]";
    }
    return out;
}

ChainOutput mh_sample(const DensityMeasure& target, const MhOptions& options, Stream& stream)
{
    const auto& grid = target.grid();
    std::vector<double> log_leb(grid.size());
    std::size_t best = 0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double pd = target.prior().density(k);
        log_leb[k] = pd > 0.0 ? std::log(pd) + target.log_density()[k] - target.log_normalizer() : -kInf;
        if (log_leb[k] > log_leb[best]) best = k;
    }
    MhOptions opts = options;
    if (opts.start.empty()) {
        const auto node = grid.node(best);
        opts.start.assign(node.begin(), node.end());
    }
    const auto log_target = [&grid, &log_leb](std::span<const double> u) { return interpolate(grid, log_leb, u); };
    return mh_sample(log_target, grid.bounds(), opts, stream);
}

double interpolate(const GridSpace& grid, std::span<const double> values, std::span<const double> u)
{
    require(values.size() == grid.size(), "interpolate: one value per node required");
    double result = 0.0;
    for (const auto& [k, w] : interpolation_stencil(grid, u)) {
        if (values[k] == -kInf) return -kInf;
        result += w * values[k];
    }
    return result;
}

}  // namespace randpost
