#pragma once

// Forward models, Gaussian noise, the quadratic potential and the random
// misfit families: sketched quadratic misfits, randomly perturbed forward
// models and direct misfit perturbations.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "randpost/measure.hpp"
#include "randpost/stream.hpp"

namespace randpost {

class GaussianNoise {
public:
    explicit GaussianNoise(Eigen::MatrixXd gamma);
    static GaussianNoise identity(int d);

    int dim() const { return static_cast<int>(gamma_.rows()); }
    const Eigen::MatrixXd& gamma() const { return gamma_; }
    /// Symmetric inverse square root from the eigendecomposition of gamma.
    const Eigen::MatrixXd& gamma_inv_sqrt() const { return gamma_inv_sqrt_; }

private:
    Eigen::MatrixXd gamma_;
    Eigen::MatrixXd gamma_inv_sqrt_;
};

enum class ForwardKind { affine, polynomial, trigonometric, tabulated };

ForwardKind parse_forward_kind(std::string_view tag);
std::string_view to_string(ForwardKind kind);

/// Parameter layouts, with d outputs and p inputs:
///   affine         A (d x p, row-major) followed by b (d)
///   polynomial     c[i][j][0..deg] for output i, input j; G_i += sum c u_j^m
///   trigonometric  (amplitude, frequency, phase)[i][j]; G_i += a sin(f u_j + phase)
///   tabulated      d values per grid node, node-major; multilinear in between
struct ForwardTerm {
    ForwardKind kind;
    std::vector<double> params;
};

/// G : box -> R^d as a sum of terms.
class ForwardModel {
public:
    ForwardModel(int in_dim, int out_dim, std::vector<ForwardTerm> terms, GridPtr grid = nullptr);

    int in_dim() const { return in_dim_; }
    int out_dim() const { return out_dim_; }
    const std::vector<ForwardTerm>& terms() const { return terms_; }

    void evaluate(std::span<const double> u, std::span<double> out) const;
    Eigen::VectorXd operator()(std::span<const double> u) const;

private:
    void add_tabulated(const ForwardTerm& term, std::span<const double> u, std::span<double> out) const;

    int in_dim_;
    int out_dim_;
    std::vector<ForwardTerm> terms_;
    GridPtr grid_;
};

using ForwardMap = std::function<Eigen::VectorXd(std::span<const double>)>;

/// 1/2 || gamma^{-1/2} (y - G(u)) ||^2
double quadratic_misfit(const ForwardMap& forward, const GaussianNoise& noise, const Eigen::VectorXd& y,
                        std::span<const double> u);
double quadratic_misfit(const ForwardModel& forward, const GaussianNoise& noise, const Eigen::VectorXd& y,
                        std::span<const double> u);

/// Prior, forward model, noise and data, with the per-node forward values,
/// whitened residuals and true misfit cached.
class InverseProblem {
public:
    InverseProblem(PriorPtr prior, ForwardModel forward, GaussianNoise noise, Eigen::VectorXd y);

    const PriorDensity& prior() const { return *prior_; }
    const PriorPtr& prior_ptr() const { return prior_; }
    const GridSpace& grid() const { return prior_->grid(); }
    const ForwardModel& forward() const { return forward_; }
    const GaussianNoise& noise() const { return noise_; }
    const Eigen::VectorXd& data() const { return y_; }
    int data_dim() const { return noise_.dim(); }

    /// Columns are nodes.
    const Eigen::MatrixXd& forward_at_nodes() const { return forward_nodes_; }
    const Eigen::MatrixXd& whitened_residuals() const { return residuals_; }
    std::span<const double> misfit() const { return misfit_; }

private:
    PriorPtr prior_;
    ForwardModel forward_;
    GaussianNoise noise_;
    Eigen::VectorXd y_;
    Eigen::MatrixXd forward_nodes_;
    Eigen::MatrixXd residuals_;
    std::vector<double> misfit_;
};

using ProblemPtr = std::shared_ptr<const InverseProblem>;

enum class SketchKind { rademacher, ell_sparse, gaussian };

SketchKind parse_sketch_kind(std::string_view tag);
std::string_view to_string(SketchKind kind);

/// Component law of the sketching vectors X with E[X] = 0, E[X X^T] = I.
/// ell_sparse puts mass ell on 0 and (1 - ell)/2 on each of
/// +-(1 - ell)^{-1/2}; ell = 0 is Rademacher.
struct SketchDistribution {
    SketchKind kind = SketchKind::rademacher;
    double ell = 0.0;

    void validate() const;
    double draw(Stream& stream) const;
};

std::vector<double> sample_sketch(const SketchDistribution& dist, int d, Stream& stream);

enum class FamilyKind { sketched_quadratic, perturbed_forward, direct_perturbation };
enum class PerturbationNoise { uniform, gaussian, shift };

FamilyKind parse_family_kind(std::string_view tag);
std::string_view to_string(FamilyKind kind);
PerturbationNoise parse_perturbation_noise(std::string_view tag);
std::string_view to_string(PerturbationNoise noise);

/// Generator of misfit realizations Phi_N(omega, .) on the problem grid.
///
/// Realizations are pure functions of (master seed, stream root, N, omega).
/// The sketched and direct families draw from a stream keyed by N and omega;
/// the perturbed-forward family keys its random field on omega alone so that
/// the perturbation size scales exactly as c / sqrt(N) along a fixed omega.
class RandomMisfitFamily {
public:
    static RandomMisfitFamily sketched(ProblemPtr problem, SketchDistribution sketch, std::uint64_t seed,
                                       std::string root = "misfit");
    static RandomMisfitFamily perturbed_forward(ProblemPtr problem, double scale, std::uint64_t seed,
                                                std::string root = "misfit");
    static RandomMisfitFamily direct(ProblemPtr problem, double scale, PerturbationNoise noise,
                                     std::uint64_t seed, std::string root = "misfit");

    FamilyKind kind() const { return kind_; }
    const InverseProblem& problem() const { return *problem_; }
    const ProblemPtr& problem_ptr() const { return problem_; }
    const SketchDistribution& sketch() const { return sketch_; }
    double scale() const { return scale_; }
    PerturbationNoise noise() const { return noise_; }
    std::uint64_t seed() const { return seed_; }
    const std::string& root() const { return root_; }

    Stream stream(std::string_view purpose, int n, std::uint64_t omega) const;
    Stream stream(std::string_view purpose, std::uint64_t omega) const;

private:
    RandomMisfitFamily() = default;

    FamilyKind kind_ = FamilyKind::sketched_quadratic;
    ProblemPtr problem_;
    SketchDistribution sketch_;
    double scale_ = 0.0;
    PerturbationNoise noise_ = PerturbationNoise::uniform;
    std::uint64_t seed_ = 0;
    std::string root_;
};

/// N x d matrix whose rows are the sketch vectors X_1..X_N of realization omega.
Eigen::MatrixXd sketch_matrix(const RandomMisfitFamily& family, int n, std::uint64_t omega);

/// (1/2N) sum_j (X_j^T gamma^{-1/2} (y - G(u)))^2
double sketched_misfit(const RandomMisfitFamily& family, int n, std::uint64_t omega, std::span<const double> u);
double sketched_misfit(const Eigen::MatrixXd& sketch, std::span<const double> whitened_residual);

/// Bounded smooth random field xi_omega with ||xi(u)||_2 <= 1: a signed
/// simplex combination of {1, cos(m pi t_j), sin(m pi t_j) : m = 1, 2}, with
/// t_j the coordinate rescaled to [0, 1].
class RandomField {
public:
    RandomField(const GridSpace& grid, int out_dim, Stream& stream);

    int out_dim() const { return static_cast<int>(coeffs_.rows()); }
    Eigen::VectorXd operator()(std::span<const double> u) const;

private:
    std::vector<Interval> bounds_;
    Eigen::MatrixXd coeffs_;  // out_dim x basis size
};

/// One realization G_N = G + (c / sqrt N) xi_omega.
class PerturbedForward {
public:
    PerturbedForward(const ForwardModel& base, RandomField field, double amplitude);

    double amplitude() const { return amplitude_; }
    Eigen::VectorXd operator()(std::span<const double> u) const;
    Eigen::VectorXd perturbation(std::span<const double> u) const;

private:
    const ForwardModel* base_;
    RandomField field_;
    double amplitude_;
};

PerturbedForward perturbed_forward(const RandomMisfitFamily& family, int n, std::uint64_t omega);

/// Phi(u_k) + (c / sqrt N) eta_omega(u_k) at grid node k. eta is an
/// independent Uniform(-1, 1) (or standard normal) draw per node; the shift
/// variant uses eta = 1 everywhere.
double direct_perturbation_misfit(const RandomMisfitFamily& family, int n, std::uint64_t omega, std::size_t node);

/// Realization Phi_N(omega, .) at every grid node, for any family kind.
std::vector<double> misfit_field(const RandomMisfitFamily& family, int n, std::uint64_t omega);

/// ||G(u_k) - G_N(omega, u_k)|| at every grid node (perturbed_forward only).
std::vector<double> forward_error_field(const RandomMisfitFamily& family, int n, std::uint64_t omega);

}  // namespace randpost
