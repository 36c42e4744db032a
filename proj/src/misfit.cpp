#include "randpost/misfit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace randpost {

namespace {

void require(bool ok, const std::string& what)
{
    if (!ok) throw std::invalid_argument(what);
}

constexpr double kSymmetryTol = 1e-12;

}  // namespace

// ---------------------------------------------------------------------------
// GaussianNoise

GaussianNoise::GaussianNoise(Eigen::MatrixXd gamma) : gamma_(std::move(gamma))
{
    require(gamma_.rows() >= 1 && gamma_.rows() == gamma_.cols(), "gamma must be a nonempty square matrix");
    require(gamma_.allFinite(), "gamma must be finite");
    const double scale = std::max(1.0, gamma_.cwiseAbs().maxCoeff());
    require((gamma_ - gamma_.transpose()).cwiseAbs().maxCoeff() <= kSymmetryTol * scale, "gamma must be symmetric");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gamma_);
    require(eig.info() == Eigen::Success, "gamma eigendecomposition failed");
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    require(lambda.minCoeff() > 0.0, "gamma must be positive definite");
    const Eigen::VectorXd inv_sqrt = lambda.cwiseSqrt().cwiseInverse();
    gamma_inv_sqrt_ = eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
    // symmetrize away the last-ulp asymmetry of the product
    gamma_inv_sqrt_ = 0.5 * (gamma_inv_sqrt_ + gamma_inv_sqrt_.transpose()).eval();
}

GaussianNoise GaussianNoise::identity(int d)
{
    return GaussianNoise(Eigen::MatrixXd::Identity(d, d));
}

// ---------------------------------------------------------------------------
// ForwardModel

ForwardKind parse_forward_kind(std::string_view tag)
{
    if (tag == "affine") return ForwardKind::affine;
    if (tag == "polynomial") return ForwardKind::polynomial;
    if (tag == "trigonometric") return ForwardKind::trigonometric;
    if (tag == "tabulated") return ForwardKind::tabulated;
    throw std::invalid_argument("unknown forward model kind '" + std::string(tag) + "'");
}

std::string_view to_string(ForwardKind kind)
{
    switch (kind) {
    case ForwardKind::affine: return "affine";
    case ForwardKind::polynomial: return "polynomial";
    case ForwardKind::trigonometric: return "trigonometric";
    case ForwardKind::tabulated: return "tabulated";
    }
    return "?";
}

ForwardModel::ForwardModel(int in_dim, int out_dim, std::vector<ForwardTerm> terms, GridPtr grid)
    : in_dim_(in_dim), out_dim_(out_dim), terms_(std::move(terms)), grid_(std::move(grid))
{
    require(in_dim_ >= 1 && out_dim_ >= 1, "forward model dimensions must be positive");
    require(!terms_.empty(), "forward model needs at least one term");
    const auto d = static_cast<std::size_t>(out_dim_);
    const auto p = static_cast<std::size_t>(in_dim_);
    for (const auto& t : terms_) {
        for (double c : t.params) require(std::isfinite(c), "forward model parameters must be finite");
        const std::size_t n = t.params.size();
        switch (t.kind) {
        case ForwardKind::affine:
            require(n == d * p + d, "affine forward model needs d*p + d parameters");
            break;
        case ForwardKind::polynomial:
            require(n > 0 && n % (d * p) == 0, "polynomial forward model needs d*p*(degree+1) parameters");
            break;
        case ForwardKind::trigonometric:
            require(n == 3 * d * p, "trigonometric forward model needs 3*d*p parameters");
            break;
        case ForwardKind::tabulated:
            require(grid_ != nullptr, "tabulated forward model needs a grid");
            require(grid_->dim() == in_dim_, "tabulated forward model grid dimension mismatch");
            require(n == d * grid_->size(), "tabulated forward model needs d values per grid node");
            break;
        }
    }
}

void ForwardModel::evaluate(std::span<const double> u, std::span<double> out) const
{
    require(u.size() == static_cast<std::size_t>(in_dim_), "forward model input dimension mismatch");
    require(out.size() == static_cast<std::size_t>(out_dim_), "forward model output dimension mismatch");
    const auto d = static_cast<std::size_t>(out_dim_);
    const auto p = static_cast<std::size_t>(in_dim_);
    std::fill(out.begin(), out.end(), 0.0);
    for (const auto& t : terms_) {
        const auto& c = t.params;
        switch (t.kind) {
        case ForwardKind::affine:
            for (std::size_t i = 0; i < d; ++i) {
                double s = c[d * p + i];
                for (std::size_t j = 0; j < p; ++j) s += c[i * p + j] * u[j];
                out[i] += s;
            }
            break;
        case ForwardKind::polynomial: {
            const std::size_t terms = c.size() / (d * p);
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t j = 0; j < p; ++j) {
                    const double* coef = c.data() + (i * p + j) * terms;
                    double acc = 0.0;  // Horner
                    for (std::size_t m = terms; m-- > 0;) acc = acc * u[j] + coef[m];
                    out[i] += acc;
                }
            }
            break;
        }
        case ForwardKind::trigonometric:
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t j = 0; j < p; ++j) {
                    const double* a = c.data() + 3 * (i * p + j);
                    if (a[0] != 0.0) out[i] += a[0] * std::sin(a[1] * u[j] + a[2]);
                }
            }
            break;
        case ForwardKind::tabulated:
            add_tabulated(t, u, out);
            break;
        }
    }
    for (double v : out) require(std::isfinite(v), "forward model produced a non-finite value");
}

void ForwardModel::add_tabulated(const ForwardTerm& term, std::span<const double> u, std::span<double> out) const
{
    const auto d = static_cast<std::size_t>(out_dim_);
    for (const auto& [k, w] : interpolation_stencil(*grid_, u)) {
        for (std::size_t i = 0; i < d; ++i) out[i] += w * term.params[k * d + i];
    }
}

Eigen::VectorXd ForwardModel::operator()(std::span<const double> u) const
{
    Eigen::VectorXd out(out_dim_);
    evaluate(u, std::span<double>(out.data(), static_cast<std::size_t>(out_dim_)));
    return out;
}

double quadratic_misfit(const ForwardMap& forward, const GaussianNoise& noise, const Eigen::VectorXd& y,
                        std::span<const double> u)
{
    require(y.size() == noise.dim(), "data dimension does not match the noise covariance");
    const Eigen::VectorXd g = forward(u);
    require(g.size() == y.size(), "forward model output dimension does not match the data");
    require(g.allFinite(), "forward model produced a non-finite value");
    const Eigen::VectorXd v = noise.gamma_inv_sqrt() * (y - g);
    return 0.5 * v.squaredNorm();
}

double quadratic_misfit(const ForwardModel& forward, const GaussianNoise& noise, const Eigen::VectorXd& y,
                        std::span<const double> u)
{
    return quadratic_misfit([&forward](std::span<const double> x) { return forward(x); }, noise, y, u);
}

// ---------------------------------------------------------------------------
// InverseProblem

InverseProblem::InverseProblem(PriorPtr prior, ForwardModel forward, GaussianNoise noise, Eigen::VectorXd y)
    : prior_(std::move(prior)), forward_(std::move(forward)), noise_(std::move(noise)), y_(std::move(y))
{
    require(prior_ != nullptr, "inverse problem needs a prior");
    require(prior_->strictly_positive(), "prior density must be strictly positive on the grid");
    require(forward_.in_dim() == grid().dim(), "forward model input dimension differs from the grid dimension");
    require(forward_.out_dim() == noise_.dim(), "forward model output dimension differs from the noise dimension");
    require(y_.size() == noise_.dim(), "data vector length differs from the noise dimension");
    require(y_.allFinite(), "data vector must be finite");

    const auto n = grid().size();
    const int d = noise_.dim();
    forward_nodes_.resize(d, static_cast<Eigen::Index>(n));
    residuals_.resize(d, static_cast<Eigen::Index>(n));
    misfit_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto col = static_cast<Eigen::Index>(k);
        forward_nodes_.col(col) = forward_(grid().node(k));
        residuals_.col(col) = noise_.gamma_inv_sqrt() * (y_ - forward_nodes_.col(col));
        misfit_[k] = 0.5 * residuals_.col(col).squaredNorm();
    }
}

// ---------------------------------------------------------------------------
// sketching

SketchKind parse_sketch_kind(std::string_view tag)
{
    if (tag == "rademacher") return SketchKind::rademacher;
    if (tag == "ell_sparse") return SketchKind::ell_sparse;
    if (tag == "gaussian") return SketchKind::gaussian;
    throw std::invalid_argument("unknown sketch distribution '" + std::string(tag) + "'");
}

std::string_view to_string(SketchKind kind)
{
    switch (kind) {
    case SketchKind::rademacher: return "rademacher";
    case SketchKind::ell_sparse: return "ell_sparse";
    case SketchKind::gaussian: return "gaussian";
    }
    return "?";
}

void SketchDistribution::validate() const
{
    if (kind == SketchKind::ell_sparse) {
        require(ell >= 0.0 && ell < 1.0, "ell-sparse parameter must lie in [0, 1)");
    }
}

double SketchDistribution::draw(Stream& stream) const
{
    switch (kind) {
    case SketchKind::rademacher:
        return stream.uniform() < 0.5 ? -1.0 : 1.0;
    case SketchKind::ell_sparse: {
        const double u = stream.uniform();
        if (u < ell) return 0.0;
        const double s = 1.0 / std::sqrt(1.0 - ell);
        return u < ell + 0.5 * (1.0 - ell) ? -s : s;
    }
    case SketchKind::gaussian:
        return stream.normal();
    }
    return 0.0;
}

std::vector<double> sample_sketch(const SketchDistribution& dist, int d, Stream& stream)
{
    dist.validate();
    require(d >= 1, "sketch dimension must be positive");
    std::vector<double> x(static_cast<std::size_t>(d));
    for (auto& v : x) v = dist.draw(stream);
    return x;
}

// ---------------------------------------------------------------------------
// RandomMisfitFamily

FamilyKind parse_family_kind(std::string_view tag)
{
    if (tag == "sketched_quadratic") return FamilyKind::sketched_quadratic;
    if (tag == "perturbed_forward") return FamilyKind::perturbed_forward;
    if (tag == "direct_perturbation") return FamilyKind::direct_perturbation;
    throw std::invalid_argument("unknown misfit family '" + std::string(tag) + "'");
}

std::string_view to_string(FamilyKind kind)
{
    switch (kind) {
    case FamilyKind::sketched_quadratic: return "sketched_quadratic";
    case FamilyKind::perturbed_forward: return "perturbed_forward";
    case FamilyKind::direct_perturbation: return "direct_perturbation";
    }
    return "?";
}

PerturbationNoise parse_perturbation_noise(std::string_view tag)
{
    if (tag == "uniform") return PerturbationNoise::uniform;
    if (tag == "gaussian") return PerturbationNoise::gaussian;
    if (tag == "shift") return PerturbationNoise::shift;
    throw std::invalid_argument("unknown perturbation noise '" + std::string(tag) + "'");
}

std::string_view to_string(PerturbationNoise noise)
{
    switch (noise) {
    case PerturbationNoise::uniform: return "uniform";
    case PerturbationNoise::gaussian: return "gaussian";
    case PerturbationNoise::shift: return "shift";
    }
    return "?";
}

RandomMisfitFamily RandomMisfitFamily::sketched(ProblemPtr problem, SketchDistribution sketch, std::uint64_t seed,
                                                std::string root)
{
    require(problem != nullptr, "misfit family needs a problem");
    sketch.validate();
    RandomMisfitFamily f;
    f.kind_ = FamilyKind::sketched_quadratic;
    f.problem_ = std::move(problem);
    f.sketch_ = sketch;
    f.seed_ = seed;
    f.root_ = std::move(root);
    return f;
}

RandomMisfitFamily RandomMisfitFamily::perturbed_forward(ProblemPtr problem, double scale, std::uint64_t seed,
                                                         std::string root)
{
    require(problem != nullptr, "misfit family needs a problem");
    require(std::isfinite(scale) && scale >= 0.0, "perturbation scale must be finite and nonnegative");
    RandomMisfitFamily f;
    f.kind_ = FamilyKind::perturbed_forward;
    f.problem_ = std::move(problem);
    f.scale_ = scale;
    f.seed_ = seed;
    f.root_ = std::move(root);
    return f;
}

RandomMisfitFamily RandomMisfitFamily::direct(ProblemPtr problem, double scale, PerturbationNoise noise,
                                              std::uint64_t seed, std::string root)
{
    require(problem != nullptr, "misfit family needs a problem");
    require(std::isfinite(scale) && scale >= 0.0, "perturbation scale must be finite and nonnegative");
    RandomMisfitFamily f;
    f.kind_ = FamilyKind::direct_perturbation;
    f.problem_ = std::move(problem);
    f.scale_ = scale;
    f.noise_ = noise;
    f.seed_ = seed;
    f.root_ = std::move(root);
    return f;
}

Stream RandomMisfitFamily::stream(std::string_view purpose, int n, std::uint64_t omega) const
{
    return derive_stream(seed_, {Label(root_), Label(purpose), Label(n), Label(omega)});
}

Stream RandomMisfitFamily::stream(std::string_view purpose, std::uint64_t omega) const
{
    return derive_stream(seed_, {Label(root_), Label(purpose), Label(omega)});
}

Eigen::MatrixXd sketch_matrix(const RandomMisfitFamily& family, int n, std::uint64_t omega)
{
    require(n >= 1, "N must be at least 1");
    const int d = family.problem().data_dim();
    Stream s = family.stream("sketch", n, omega);
    Eigen::MatrixXd x(n, d);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < d; ++i) x(j, i) = family.sketch().draw(s);
    }
    return x;
}

double sketched_misfit(const Eigen::MatrixXd& sketch, std::span<const double> whitened_residual)
{
    require(static_cast<std::size_t>(sketch.cols()) == whitened_residual.size(), "sketch dimension mismatch");
    const Eigen::Map<const Eigen::VectorXd> v(whitened_residual.data(), static_cast<Eigen::Index>(whitened_residual.size()));
    double sum = 0.0;
    for (Eigen::Index j = 0; j < sketch.rows(); ++j) {
        const double p = sketch.row(j).dot(v);
        sum += p * p;
    }
    return sum / (2.0 * static_cast<double>(sketch.rows()));
}

double sketched_misfit(const RandomMisfitFamily& family, int n, std::uint64_t omega, std::span<const double> u)
{
    require(family.kind() == FamilyKind::sketched_quadratic, "sketched_misfit needs a sketched_quadratic family");
    const auto& prob = family.problem();
    const Eigen::VectorXd v = prob.noise().gamma_inv_sqrt() * (prob.data() - prob.forward()(u));
    return sketched_misfit(sketch_matrix(family, n, omega), std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

// ---------------------------------------------------------------------------
// perturbed forward models

namespace {

constexpr int kHarmonics = 2;

int basis_size(int dim) { return 1 + 4 * dim; }

void fill_basis(std::span<const double> u, const std::vector<Interval>& bounds, std::span<double> out)
{
    std::size_t b = 0;
    out[b++] = 1.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        const double t = (u[j] - bounds[j].lo) / bounds[j].width();
        for (int m = 1; m <= kHarmonics; ++m) {
            out[b++] = std::cos(m * std::numbers::pi * t);
            out[b++] = std::sin(m * std::numbers::pi * t);
        }
    }
}

}  // namespace

RandomField::RandomField(const GridSpace& grid, int out_dim, Stream& stream)
    : bounds_(grid.bounds()), coeffs_(out_dim, basis_size(grid.dim()))
{
    // uniform point on the simplex from normalized exponentials, random signs
    double total = 0.0;
    for (Eigen::Index i = 0; i < coeffs_.rows(); ++i) {
        for (Eigen::Index b = 0; b < coeffs_.cols(); ++b) {
            const double e = -std::log1p(-stream.uniform());
            coeffs_(i, b) = e;
            total += e;
        }
    }
    for (Eigen::Index i = 0; i < coeffs_.rows(); ++i) {
        for (Eigen::Index b = 0; b < coeffs_.cols(); ++b) {
            const double sign = stream.uniform() < 0.5 ? -1.0 : 1.0;
            coeffs_(i, b) = sign * coeffs_(i, b) / total;
        }
    }
}

Eigen::VectorXd RandomField::operator()(std::span<const double> u) const
{
    Eigen::VectorXd basis(coeffs_.cols());
    fill_basis(u, bounds_, std::span<double>(basis.data(), static_cast<std::size_t>(basis.size())));
    return coeffs_ * basis;
}

PerturbedForward::PerturbedForward(const ForwardModel& base, RandomField field, double amplitude)
    : base_(&base), field_(std::move(field)), amplitude_(amplitude)
{
}

Eigen::VectorXd PerturbedForward::perturbation(std::span<const double> u) const
{
    return amplitude_ * field_(u);
}

Eigen::VectorXd PerturbedForward::operator()(std::span<const double> u) const
{
    return (*base_)(u) + perturbation(u);
}

PerturbedForward perturbed_forward(const RandomMisfitFamily& family, int n, std::uint64_t omega)
{
    require(family.kind() == FamilyKind::perturbed_forward, "perturbed_forward needs a perturbed_forward family");
    require(n >= 1, "N must be at least 1");
    const auto& prob = family.problem();
    Stream s = family.stream("forward", omega);
    RandomField field(prob.grid(), prob.data_dim(), s);
    return PerturbedForward(prob.forward(), std::move(field), family.scale() / std::sqrt(static_cast<double>(n)));
}

// ---------------------------------------------------------------------------
// direct perturbation

namespace {

std::vector<double> direct_eta(const RandomMisfitFamily& family, int n, std::uint64_t omega)
{
    const std::size_t nodes = family.problem().grid().size();
    std::vector<double> eta(nodes, 1.0);
    if (family.noise() == PerturbationNoise::shift) return eta;
    Stream s = family.stream("direct", n, omega);
    for (auto& e : eta) {
        e = family.noise() == PerturbationNoise::uniform ? s.uniform(-1.0, 1.0) : s.normal();
    }
    return eta;
}

}  // namespace

double direct_perturbation_misfit(const RandomMisfitFamily& family, int n, std::uint64_t omega, std::size_t node)
{
    require(family.kind() == FamilyKind::direct_perturbation, "direct_perturbation_misfit needs a direct_perturbation family");
    require(n >= 1, "N must be at least 1");
    require(node < family.problem().grid().size(), "grid node index out of range");
    const double amp = family.scale() / std::sqrt(static_cast<double>(n));
    return family.problem().misfit()[node] + amp * direct_eta(family, n, omega)[node];
}

std::vector<double> misfit_field(const RandomMisfitFamily& family, int n, std::uint64_t omega)
{
    require(n >= 1, "N must be at least 1");
    const auto& prob = family.problem();
    const auto& grid = prob.grid();
    const std::size_t nodes = grid.size();
    std::vector<double> phi(nodes);
    switch (family.kind()) {
    case FamilyKind::sketched_quadratic: {
        const Eigen::MatrixXd x = sketch_matrix(family, n, omega);
        const auto& r = prob.whitened_residuals();
        for (std::size_t k = 0; k < nodes; ++k) {
            const auto col = static_cast<Eigen::Index>(k);
            phi[k] = sketched_misfit(x, std::span<const double>(r.col(col).data(), static_cast<std::size_t>(r.rows())));
        }
        break;
    }
    case FamilyKind::perturbed_forward: {
        const PerturbedForward g = perturbed_forward(family, n, omega);
        const auto& gamma_is = prob.noise().gamma_inv_sqrt();
        for (std::size_t k = 0; k < nodes; ++k) {
            const auto col = static_cast<Eigen::Index>(k);
            const Eigen::VectorXd gn = prob.forward_at_nodes().col(col) + g.perturbation(grid.node(k));
            phi[k] = 0.5 * (gamma_is * (prob.data() - gn)).squaredNorm();
        }
        break;
    }
    case FamilyKind::direct_perturbation: {
        const double amp = family.scale() / std::sqrt(static_cast<double>(n));
        const auto eta = direct_eta(family, n, omega);
        for (std::size_t k = 0; k < nodes; ++k) phi[k] = prob.misfit()[k] + amp * eta[k];
        break;
    }
    }
    for (double v : phi) {
        if (!std::isfinite(v)) throw std::domain_error("misfit realization is not finite");
    }
    return phi;
}

std::vector<double> forward_error_field(const RandomMisfitFamily& family, int n, std::uint64_t omega)
{
    const PerturbedForward g = perturbed_forward(family, n, omega);
    const auto& grid = family.problem().grid();
    std::vector<double> err(grid.size());
    for (std::size_t k = 0; k < err.size(); ++k) err[k] = g.perturbation(grid.node(k)).norm();
    return err;
}

}  // namespace randpost
