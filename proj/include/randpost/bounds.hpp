#pragma once

// Condition quantities and both sides of the Hellinger error bounds for
// random and marginal approximate posteriors, evaluated over N-sweeps.
//
// Every expectation over the approximation randomness is an empirical mean
// over M realizations; every norm over the prior is a quadrature sum. Where a
// bound carries an explicit constant (the random-posterior bound, whose
// constant is D1 + D2) the row asserts lhs <= rhs up to three Monte Carlo
// standard errors. Where the constant is only known to exist, the report
// asserts that lhs / rhs stays within a fixed multiple of its median over the
// sweep and that lhs decays at least as fast as rhs.

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "randpost/measure.hpp"
#include "randpost/misfit.hpp"
#include "randpost/posterior.hpp"

namespace randpost {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Hoelder exponents. Conjugates are q / (q - 1).
struct ExponentSet {
    double q1 = 2.0;
    double q2 = 2.0;
    double p1 = 2.0;
    double p2 = 2.0;
    double p3 = 2.0;
    double rho_star = 3.0;

    static double conjugate(double q);
    void validate() const;
};

struct VerdictPolicy {
    double se_slack = 3.0;     // standard errors allowed on lhs <= rhs
    double ratio_cap = 10.0;   // max ratio / median ratio
    double slope_slack = 0.1;  // slope(lhs) <= slope(rhs) + slack
};

enum class CheckKind { thm1, thm2, corollary, forward };

CheckKind parse_check_kind(std::string_view tag);
std::string_view to_string(CheckKind kind);

enum class Verdict { pass, fail, indeterminate };
std::string_view to_string(Verdict v);

struct RateFit {
    double slope = kNaN;
    double intercept = kNaN;
    double r_squared = kNaN;
    std::size_t points = 0;
};

/// Least squares on (log N, log value). Needs >= 3 points, all values > 0.
RateFit fit_rate(std::span<const std::pair<double, double>> points);

struct BoundRow {
    int n = 0;
    std::size_t m = 0;
    std::string check;
    double lhs = kNaN;
    double rhs = kNaN;
    double ratio = kNaN;
    double lhs_se = kNaN;
    double rhs_se = kNaN;
    double d1 = kNaN;
    double d2 = kNaN;
    double c1 = kNaN;
    double c2 = kNaN;
    double c3_lo = kNaN;
    double c3_hi = kNaN;
    std::optional<int> n_star;
    double slope_lhs = kNaN;
    double slope_rhs = kNaN;
    std::string verdict = "pass";  // pass | fail | skip | error
    std::string note;
    std::map<std::string, double> extras;
};

struct BoundReport {
    CheckKind kind = CheckKind::thm1;
    std::vector<BoundRow> rows;
    std::optional<int> n_star;
    std::map<std::string, RateFit> rates;
    std::map<std::string, double> summary;
    std::vector<std::string> findings;  // reasons for a non-pass verdict
    Verdict verdict = Verdict::pass;
};

/// Everything the checks need from M realizations at one N.
struct RealizationTable {
    int n = 0;
    std::size_t m = 0;
    SampleTable misfit;                       // Phi_N(omega_j, u_k)
    std::vector<double> log_zn;               // log Z_N per omega
    std::vector<double> hellinger;            // d_H(mu, mu_N(omega)) per omega
    std::optional<SampleTable> forward_error; // ||G - G_N|| (perturbed_forward only)
};

RealizationTable realize(const RandomMisfitFamily& family, int n, std::size_t m, int threads = 1);

/// The reference quantities all checks compare against.
struct TruthData {
    std::vector<double> misfit;
    DensityMeasure posterior;

    double log_z() const { return posterior.log_normalizer(); }
    double z() const { return posterior.normalizer(); }
};

TruthData truth_of(const InverseProblem& problem);

struct Thm1Conditions {
    MixedNormEstimate d1_root;  // D1 = d1_root.value^2
    MixedNormEstimate d2;

    double d1() const { return d1_root.value * d1_root.value; }
};

Thm1Conditions thm1_conditions(std::span<const double> misfit, const SampleTable& misfit_n, double log_z,
                               std::span<const double> log_zn, const ExponentSet& exps, const PriorDensity& prior);

struct Thm2Conditions {
    double c1 = kNaN;
    std::string c1_branch;  // "marginal" or "true_misfit"
    double c1_marginal = kNaN;
    double c1_true = kNaN;
    MixedNormEstimate c2;
    double mean_zn = kNaN;
    double mean_zn_se = kNaN;
    double c3_lo = kNaN;
    double c3_hi = kNaN;
    double c3 = kNaN;
};

Thm2Conditions thm2_conditions(std::span<const double> misfit, const SampleTable& misfit_n,
                               std::span<const double> log_zn, const ExponentSet& exps, const PriorDensity& prior);

BoundRow thm1_row(const TruthData& truth, const RealizationTable& table, const ExponentSet& exps,
                  const PriorDensity& prior, const VerdictPolicy& policy = {});
BoundRow thm2_row(const TruthData& truth, const RealizationTable& table, const ExponentSet& exps,
                  const PriorPtr& prior, const VerdictPolicy& policy = {});

BoundRow check_thm1(const RandomMisfitFamily& family, int n, std::size_t m, const ExponentSet& exps,
                    int threads = 1);
BoundRow check_thm2(const RandomMisfitFamily& family, int n, std::size_t m, const ExponentSet& exps,
                    int threads = 1);

struct SweepOptions {
    std::vector<int> ns;
    std::size_t m = 2;
    ExponentSet exps;
    std::optional<double> c3;  // corollary; default 2 max(Z, 1/Z)
    VerdictPolicy policy;
    int threads = 1;
};

BoundReport check_corollary(const RandomMisfitFamily& family, const SweepOptions& options);
BoundReport check_forward(const RandomMisfitFamily& family, const SweepOptions& options);

/// Runs the requested checks over options.ns, drawing the realizations for
/// each N once and sharing them across checks. A failing N is recorded as an
/// error row; the remaining rows still run.
std::vector<BoundReport> sweep(const RandomMisfitFamily& family, const std::vector<CheckKind>& checks,
                               const SweepOptions& options);

}  // namespace randpost
