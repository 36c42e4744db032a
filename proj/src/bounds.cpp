#include "randpost/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "randpost/parallel.hpp"

namespace randpost {

namespace {

void require(bool ok, const std::string& what)
{
    if (!ok) throw std::invalid_argument(what);
}

const double kLogFloor = std::log(kNormalizerFloor);

double log_abs(double x) { return x == 0.0 ? -kInf : std::log(std::abs(x)); }

double log_add(double a, double b)
{
    const double m = std::max(a, b);
    if (m == -kInf) return -kInf;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

template <class F>
SampleTable log_table(std::size_t rows, std::size_t cols, F&& f)
{
    SampleTable t(rows, cols);
    for (std::size_t j = 0; j < rows; ++j) {
        for (std::size_t k = 0; k < cols; ++k) t(j, k) = f(j, k);
    }
    return t;
}

/// log |Phi - Phi_N| per (omega, node)
SampleTable log_misfit_error(std::span<const double> misfit, const SampleTable& misfit_n)
{
    return log_table(misfit_n.rows(), misfit_n.cols(),
                     [&](std::size_t j, std::size_t k) { return log_abs(misfit[k] - misfit_n(j, k)); });
}

double safe_ratio(double lhs, double rhs)
{
    if (rhs == 0.0) return lhs == 0.0 ? 0.0 : kInf;
    return lhs / rhs;
}

/// sqrt(mean d^2) with its relative influence per sample.
MixedNormEstimate root_mean_square(std::span<const double> d)
{
    MixedNormEstimate est;
    const auto m = d.size();
    std::vector<double> sq(m);
    for (std::size_t j = 0; j < m; ++j) sq[j] = d[j] * d[j];
    const double mean = compensated_sum(sq) / static_cast<double>(m);
    est.value = std::sqrt(mean);
    est.log_value = std::log(est.value);
    est.rel_influence.assign(m, 0.0);
    if (mean > 0.0) {
        for (std::size_t j = 0; j < m; ++j) est.rel_influence[j] = (sq[j] - mean) / (2.0 * mean);
    }
    return est;
}

double median(std::vector<double> v)
{
    if (v.empty()) return kNaN;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Ratio-cap and slope-dominance assessment over one sub-check's rows.
void assess_ratio_sequence(BoundReport& report, const std::string& label, const std::vector<BoundRow*>& eligible,
                           const std::vector<BoundRow*>& all_rows, const VerdictPolicy& policy)
{
    std::vector<double> ratios;
    std::vector<std::pair<double, double>> lhs_pts, rhs_pts;
    for (const auto* r : eligible) {
        ratios.push_back(r->ratio);
        if (r->lhs > 0.0 && std::isfinite(r->lhs)) lhs_pts.emplace_back(r->n, r->lhs);
        if (r->rhs > 0.0 && std::isfinite(r->rhs)) rhs_pts.emplace_back(r->n, r->rhs);
    }
    if (ratios.empty()) return;
    const bool all_finite = std::all_of(ratios.begin(), ratios.end(), [](double x) { return std::isfinite(x); });
    if (!all_finite) {
        report.findings.push_back(label + ": lhs/rhs ratio is not finite on some row");
    } else {
        const double med = median(ratios);
        const double peak = *std::max_element(ratios.begin(), ratios.end());
        report.summary[label + ".ratio_median"] = med;
        report.summary[label + ".ratio_max"] = peak;
        if (peak > policy.ratio_cap * med) {
            report.findings.push_back(label + ": ratio " + std::to_string(peak) + " exceeds " +
                                      std::to_string(policy.ratio_cap) + " x median " + std::to_string(med));
        }
    }
    RateFit lf, rf;
    if (lhs_pts.size() >= 3) lf = fit_rate(lhs_pts);
    if (rhs_pts.size() >= 3) rf = fit_rate(rhs_pts);
    report.rates[label + ".lhs"] = lf;
    report.rates[label + ".rhs"] = rf;
    for (auto* r : all_rows) {
        r->slope_lhs = lf.slope;
        r->slope_rhs = rf.slope;
    }
    if (std::isfinite(lf.slope) && std::isfinite(rf.slope) && lf.slope > rf.slope + policy.slope_slack) {
        report.findings.push_back(label + ": lhs slope " + std::to_string(lf.slope) + " is flatter than rhs slope " +
                                  std::to_string(rf.slope));
    }
}

void mark_errors(BoundReport& report)
{
    for (const auto& r : report.rows) {
        if (r.verdict == "error") report.findings.push_back("N=" + std::to_string(r.n) + ": " + r.note);
        if (r.verdict == "fail") report.findings.push_back("N=" + std::to_string(r.n) + " (" + r.check + "): " + r.note);
    }
}

BoundRow error_row(int n, std::size_t m, const std::string& check, const std::string& what)
{
    BoundRow r;
    r.n = n;
    r.m = m;
    r.check = check;
    r.verdict = "error";
    r.note = what;
    return r;
}

/// Smallest sweep N from which `holds` is true for every later row.
std::optional<int> first_stable(const std::vector<std::pair<int, bool>>& flags)
{
    std::optional<int> found;
    for (auto it = flags.rbegin(); it != flags.rend(); ++it) {
        if (!it->second) break;
        found = it->first;
    }
    return found;
}

}  // namespace

// ---------------------------------------------------------------------------

double ExponentSet::conjugate(double q)
{
    require(q > 1.0, "Hoelder exponent must exceed 1");
    if (q == kInf) return 1.0;
    return q / (q - 1.0);
}

void ExponentSet::validate() const
{
    for (double q : {q1, q2, p1, p2, p3}) require(q > 1.0 && std::isfinite(q), "exponents must be finite and > 1");
    require(rho_star > 2.0 && std::isfinite(rho_star), "rho_star must be finite and > 2");
}

CheckKind parse_check_kind(std::string_view tag)
{
    if (tag == "thm1") return CheckKind::thm1;
    if (tag == "thm2") return CheckKind::thm2;
    if (tag == "corollary") return CheckKind::corollary;
    if (tag == "forward") return CheckKind::forward;
    throw std::invalid_argument("unknown check '" + std::string(tag) + "'");
}

std::string_view to_string(CheckKind kind)
{
    switch (kind) {
    case CheckKind::thm1: return "thm1";
    case CheckKind::thm2: return "thm2";
    case CheckKind::corollary: return "corollary";
    case CheckKind::forward: return "forward";
    }
    return "?";
}

std::string_view to_string(Verdict v)
{
    switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::indeterminate: return "indeterminate";
    }
    return "?";
}

RateFit fit_rate(std::span<const std::pair<double, double>> points)
{
    require(points.size() >= 3, "fit_rate needs at least 3 points");
    const auto n = static_cast<double>(points.size());
    double sx = 0.0, sy = 0.0;
    for (const auto& [x, y] : points) {
        require(x > 0.0 && y > 0.0 && std::isfinite(y), "fit_rate needs positive N and values");
        sx += std::log(x);
        sy += std::log(y);
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [x, y] : points) {
        const double dx = std::log(x) - mx, dy = std::log(y) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    require(sxx > 0.0, "fit_rate needs at least two distinct N");
    RateFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    fit.points = points.size();
    return fit;
}

// ---------------------------------------------------------------------------
// realizations

RealizationTable realize(const RandomMisfitFamily& family, int n, std::size_t m, int threads)
{
    require(n >= 1, "N must be at least 1");
    require(m >= 1, "need at least one realization");
    const auto& prob = family.problem();
    const auto& prior = prob.prior();
    const std::size_t nodes = prob.grid().size();
    const DensityMeasure truth = true_posterior(prob);
    const bool with_forward = family.kind() == FamilyKind::perturbed_forward;

    RealizationTable t;
    t.n = n;
    t.m = m;
    t.misfit = SampleTable(m, nodes);
    t.log_zn.assign(m, kNaN);
    t.hellinger.assign(m, kNaN);
    if (with_forward) t.forward_error.emplace(m, nodes);

    std::vector<double> log_mass(nodes);
    for (std::size_t k = 0; k < nodes; ++k) log_mass[k] = std::log(prior.mass(k));

    parallel_for(m, threads, [&](std::size_t j) {
        const auto phi = misfit_field(family, n, j);
        std::copy(phi.begin(), phi.end(), t.misfit.row(j).begin());
        std::vector<double> terms(nodes);
        for (std::size_t k = 0; k < nodes; ++k) terms[k] = log_mass[k] - phi[k];
        const double log_zn = log_sum_exp(terms);
        t.log_zn[j] = log_zn;
        if (log_zn >= kLogFloor) {
            std::vector<double> ld(nodes);
            for (std::size_t k = 0; k < nodes; ++k) ld[k] = -phi[k];
            const DensityMeasure mu_n(prob.prior_ptr(), std::move(ld), log_zn);
            t.hellinger[j] = hellinger(truth, mu_n);
        }
        if (with_forward) {
            const auto err = forward_error_field(family, n, j);
            std::copy(err.begin(), err.end(), t.forward_error->row(j).begin());
        }
    });
    return t;
}

TruthData truth_of(const InverseProblem& problem)
{
    const auto phi = problem.misfit();
    return TruthData{std::vector<double>(phi.begin(), phi.end()), true_posterior(problem)};
}

// ---------------------------------------------------------------------------
// random approximate posterior

Thm1Conditions thm1_conditions(std::span<const double> misfit, const SampleTable& misfit_n, double log_z,
                               std::span<const double> log_zn, const ExponentSet& exps, const PriorDensity& prior)
{
    exps.validate();
    require(misfit.size() == misfit_n.cols(), "misfit and realization table disagree on node count");
    require(log_zn.size() == misfit_n.rows(), "one Z_N per realization required");
    const std::size_t m = misfit_n.rows(), n = misfit_n.cols();

    // D1: || E[(e^{-Phi/2} + e^{-Phi_N/2})^{2 q1}]^{1/q1} ||_{q2} = || E[h^{2q1}]^{1/(2q1)} ||_{2 q2}^2
    const SampleTable log_h = log_table(m, n, [&](std::size_t j, std::size_t k) {
        return log_add(-0.5 * misfit[k], -0.5 * misfit_n(j, k));
    });
    Thm1Conditions c;
    c.d1_root = mixed_norm_from_logs(log_h, 2.0 * exps.q1, 2.0 * exps.q2, prior);

    // D2: || E[(Z_N max{Z^-3, Z_N^-3} (e^{-Phi} + e^{-Phi_N})^2)^{q1}]^{1/q1} ||_{q2}
    bool underflow = false;
    for (double l : log_zn) underflow = underflow || !(l >= kLogFloor);
    if (underflow) {
        c.d2.value = kInf;
        c.d2.log_value = kInf;
        return c;
    }
    const SampleTable log_w = log_table(m, n, [&](std::size_t j, std::size_t k) {
        const double lzn = log_zn[j];
        return lzn + 3.0 * std::max(-log_z, -lzn) + 2.0 * log_add(-misfit[k], -misfit_n(j, k));
    });
    c.d2 = mixed_norm_from_logs(log_w, exps.q1, exps.q2, prior);
    return c;
}

BoundRow thm1_row(const TruthData& truth, const RealizationTable& table, const ExponentSet& exps,
                  const PriorDensity& prior, const VerdictPolicy& policy)
{
    BoundRow row;
    row.n = table.n;
    row.m = table.m;
    row.check = "thm1";

    const auto cond = thm1_conditions(truth.misfit, table.misfit, truth.log_z(), table.log_zn, exps, prior);
    row.d1 = cond.d1();
    row.d2 = cond.d2.value;
    if (!std::isfinite(row.d1) || !std::isfinite(row.d2)) {
        row.verdict = "fail";
        row.note = "condition norms D1/D2 are not finite";
        return row;
    }

    const double q1c = ExponentSet::conjugate(exps.q1), q2c = ExponentSet::conjugate(exps.q2);
    const auto err = mixed_norm_from_logs(log_misfit_error(truth.misfit, table.misfit), 2.0 * q1c, 2.0 * q2c, prior);
    const auto lhs = root_mean_square(table.hellinger);

    const double dsum = row.d1 + row.d2;
    row.lhs = lhs.value;
    row.rhs = dsum * err.value;
    row.ratio = safe_ratio(row.lhs, row.rhs);
    row.extras["error_norm"] = err.value;
    row.extras["error_norm_se"] = err.standard_error();

    const std::size_t m = table.m;
    std::vector<double> h_rhs(m), h_diff(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double h_d = (row.d1 * 2.0 * cond.d1_root.rel_influence[j] + row.d2 * cond.d2.rel_influence[j]) / dsum;
        h_rhs[j] = h_d + err.rel_influence[j];
        h_diff[j] = row.lhs * lhs.rel_influence[j] - row.rhs * h_rhs[j];
    }
    row.lhs_se = lhs.standard_error();
    row.rhs_se = row.rhs * influence_standard_error(h_rhs);
    const double se_diff = influence_standard_error(h_diff);
    row.extras["diff_se"] = se_diff;

    const double slack = std::isfinite(se_diff) ? policy.se_slack * se_diff : 0.0;
    if (!(row.lhs <= row.rhs + slack)) {
        row.verdict = "fail";
        row.note = "lhs exceeds rhs beyond the Monte Carlo band";
    }
    return row;
}

BoundRow check_thm1(const RandomMisfitFamily& family, int n, std::size_t m, const ExponentSet& exps, int threads)
{
    const TruthData truth = truth_of(family.problem());
    return thm1_row(truth, realize(family, n, m, threads), exps, family.problem().prior());
}

// ---------------------------------------------------------------------------
// marginal approximate posterior

Thm2Conditions thm2_conditions(std::span<const double> misfit, const SampleTable& misfit_n,
                               std::span<const double> log_zn, const ExponentSet& exps, const PriorDensity& prior)
{
    exps.validate();
    require(misfit.size() == misfit_n.cols(), "misfit and realization table disagree on node count");
    require(log_zn.size() == misfit_n.rows(), "one Z_N per realization required");
    const std::size_t m = misfit_n.rows(), n = misfit_n.cols();

    Thm2Conditions c;
    // (B1) min{ || E[e^{-Phi_N}]^{-1} ||_{p1}, || e^{Phi} ||_{p1} }
    std::vector<double> col(m), marg_terms(n), true_terms(n);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < m; ++j) col[j] = -misfit_n(j, k);
        const double log_mean = log_mean_exp(col);
        const double lm = std::log(prior.mass(k));
        marg_terms[k] = lm - exps.p1 * log_mean;
        true_terms[k] = lm + exps.p1 * misfit[k];
    }
    c.c1_marginal = std::exp(log_sum_exp(marg_terms) / exps.p1);
    c.c1_true = std::exp(log_sum_exp(true_terms) / exps.p1);
    c.c1 = std::min(c.c1_marginal, c.c1_true);
    c.c1_branch = c.c1_marginal <= c.c1_true ? "marginal" : "true_misfit";

    // (B2) || E[(e^{-Phi} + e^{-Phi_N})^{p2}]^{1/p2} ||_{2 p1' p3}
    const double p1c = ExponentSet::conjugate(exps.p1);
    const SampleTable log_s = log_table(m, n, [&](std::size_t j, std::size_t k) {
        return log_add(-misfit[k], -misfit_n(j, k));
    });
    c.c2 = mixed_norm_from_logs(log_s, exps.p2, 2.0 * p1c * exps.p3, prior);

    // (B3) band on E[Z_N]
    std::vector<double> zs(m);
    for (std::size_t j = 0; j < m; ++j) zs[j] = std::exp(log_zn[j]);
    c.mean_zn = compensated_sum(zs) / static_cast<double>(m);
    c.mean_zn_se = influence_standard_error(zs);
    const double band = std::isfinite(c.mean_zn_se) ? 3.0 * c.mean_zn_se : 0.0;
    c.c3_lo = c.mean_zn - band;
    c.c3_hi = c.mean_zn + band;
    c.c3 = c.c3_lo > 0.0 ? std::max(c.c3_hi, 1.0 / c.c3_lo) : kInf;
    return c;
}

namespace {

struct MarginalDistance {
    double value;
    double se;
};

/// d_H(mu, mu_N^marg) with a delta-method standard error over the omega draws.
MarginalDistance marginal_distance(const TruthData& truth, const SampleTable& misfit_n, const PriorPtr& prior)
{
    const auto marg = marginal_from_misfits(misfit_n, prior);
    const double d = hellinger(truth.posterior, marg.measure);
    const std::size_t m = misfit_n.rows(), n = misfit_n.cols();
    if (d == 0.0 || m < 2) return {d, d == 0.0 ? 0.0 : kNaN};

    const double h = d * d;
    const double log_s = marg.measure.log_normalizer();
    std::vector<double> coef(n), rho(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double p = truth.posterior.density_wrt_prior(k);
        rho[k] = marg.measure.density_wrt_prior(k);
        const double g = 0.5 * prior->mass(k) * (1.0 - std::sqrt(p / rho[k]));
        coef[k] = g - h * prior->mass(k);
    }
    std::vector<double> infl(m);
    for (std::size_t j = 0; j < m; ++j) {
        double dh = 0.0;
        for (std::size_t k = 0; k < n; ++k) dh += coef[k] * (std::exp(-misfit_n(j, k) - log_s) - rho[k]);
        infl[j] = dh / (2.0 * d);
    }
    return {d, influence_standard_error(infl)};
}

}  // namespace

BoundRow thm2_row(const TruthData& truth, const RealizationTable& table, const ExponentSet& exps,
                  const PriorPtr& prior, const VerdictPolicy&)
{
    BoundRow row;
    row.n = table.n;
    row.m = table.m;
    row.check = "thm2";

    const auto cond = thm2_conditions(truth.misfit, table.misfit, table.log_zn, exps, *prior);
    row.c1 = cond.c1;
    row.c2 = cond.c2.value;
    row.c3_lo = cond.c3_lo;
    row.c3_hi = cond.c3_hi;
    row.extras["C3"] = cond.c3;
    row.extras["mean_ZN"] = cond.mean_zn;
    row.extras["C1_marginal"] = cond.c1_marginal;
    row.extras["C1_true"] = cond.c1_true;

    const double p1c = ExponentSet::conjugate(exps.p1);
    const double p2c = ExponentSet::conjugate(exps.p2);
    const double p3c = ExponentSet::conjugate(exps.p3);
    const auto rhs = mixed_norm_from_logs(log_misfit_error(truth.misfit, table.misfit), p2c, 2.0 * p1c * p3c, *prior);
    const auto lhs = marginal_distance(truth, table.misfit, prior);
    row.lhs = lhs.value;
    row.lhs_se = lhs.se;
    row.rhs = rhs.value;
    row.rhs_se = rhs.standard_error();
    row.ratio = safe_ratio(row.lhs, row.rhs);

    if (!std::isfinite(row.c1) || !std::isfinite(row.c2) || !std::isfinite(cond.c3)) {
        row.verdict = "fail";
        row.note = "conditions (B1)-(B3) are not finite";
    }
    return row;
}

BoundRow check_thm2(const RandomMisfitFamily& family, int n, std::size_t m, const ExponentSet& exps, int threads)
{
    const TruthData truth = truth_of(family.problem());
    return thm2_row(truth, realize(family, n, m, threads), exps, family.problem().prior_ptr());
}

// ---------------------------------------------------------------------------
// sweeps

namespace {

void validate_options(const SweepOptions& o)
{
    require(!o.ns.empty(), "sweep needs at least one N");
    for (std::size_t i = 0; i < o.ns.size(); ++i) {
        require(o.ns[i] >= 1, "sweep N values must be positive");
        require(i == 0 || o.ns[i] > o.ns[i - 1], "sweep N values must be strictly ascending");
    }
    require(o.m >= 2, "sweep needs M >= 2");
    o.exps.validate();
}

double log_exp_integral(const SampleTable& misfit_n, double rho, const PriorDensity& prior)
{
    const SampleTable logs = misfit_n.map([rho](double phi) { return rho * phi; });
    return mixed_norm_from_logs(logs, 1.0, 1.0, prior).log_value;
}

std::vector<BoundRow> corollary_rows(const TruthData& truth, const RealizationTable& t, const ExponentSet& exps,
                                     const PriorPtr& prior)
{
    const double rho = exps.rho_star;
    const SampleTable log_err = log_misfit_error(truth.misfit, t.misfit);
    const auto l1 = mixed_norm_from_logs(log_err, 1.0, 1.0, *prior);
    const double lexp = log_exp_integral(t.misfit, rho, *prior);
    double min_misfit = kInf;
    for (std::size_t j = 0; j < t.m; ++j) {
        for (double v : t.misfit.row(j)) min_misfit = std::min(min_misfit, v);
    }

    const auto common = [&](BoundRow& r) {
        r.n = t.n;
        r.m = t.m;
        r.extras["error_L1"] = l1.value;
        r.extras["log_exp_integral"] = lexp;
        r.extras["exp_integral"] = std::exp(lexp);
        r.extras["min_misfit_N"] = min_misfit;
    };

    BoundRow eq6;
    common(eq6);
    eq6.check = "corollary_eq6";
    const auto lhs6 = marginal_distance(truth, t.misfit, prior);
    const auto rhs6 = mixed_norm_from_logs(log_err, 1.0, 2.0 * rho / (rho - 1.0), *prior);
    eq6.lhs = lhs6.value;
    eq6.lhs_se = lhs6.se;
    eq6.rhs = rhs6.value;
    eq6.rhs_se = rhs6.standard_error();
    eq6.ratio = safe_ratio(eq6.lhs, eq6.rhs);

    BoundRow eq7;
    common(eq7);
    eq7.check = "corollary_eq7";
    const auto lhs7 = root_mean_square(t.hellinger);
    const auto rhs7 = mixed_norm_from_logs(log_err, 2.0 * rho / (rho - 2.0), 1.0, *prior);
    eq7.lhs = lhs7.value;
    eq7.lhs_se = lhs7.standard_error();
    eq7.rhs = rhs7.value;
    eq7.rhs_se = rhs7.standard_error();
    eq7.ratio = safe_ratio(eq7.lhs, eq7.rhs);
    return {eq6, eq7};
}

std::vector<BoundRow> forward_rows(const TruthData& truth, const RealizationTable& t, const ExponentSet& exps,
                                   const PriorPtr& prior)
{
    const double rho = exps.rho_star;
    const double s = 4.0 * rho / (rho - 2.0);
    const double r = 2.0 * rho / (rho - 1.0);
    const SampleTable log_fe = t.forward_error->map([](double e) { return log_abs(e); });
    const auto small_root = mixed_norm_from_logs(log_fe, s, 2.0 * r, *prior);
    const double smallness = small_root.value * small_root.value;
    const double lexp = log_exp_integral(t.misfit, rho, *prior);

    const auto common = [&](BoundRow& row) {
        row.n = t.n;
        row.m = t.m;
        row.extras["smallness"] = smallness;
        row.extras["log_exp_integral"] = lexp;
        row.extras["exp_integral"] = std::exp(lexp);
    };

    BoundRow marg;
    common(marg);
    marg.check = "forward_marginal";
    const auto lhs_m = marginal_distance(truth, t.misfit, prior);
    const auto rhs_m = mixed_norm_from_logs(log_fe, 2.0, 2.0 * r, *prior);
    marg.lhs = lhs_m.value;
    marg.lhs_se = lhs_m.se;
    marg.rhs = rhs_m.value;
    marg.rhs_se = rhs_m.standard_error();
    marg.ratio = safe_ratio(marg.lhs, marg.rhs);

    BoundRow rnd;
    common(rnd);
    rnd.check = "forward_random";
    const auto lhs_r = root_mean_square(t.hellinger);
    const auto rhs_r = mixed_norm_from_logs(log_fe, s, 4.0, *prior);
    rnd.lhs = lhs_r.value;
    rnd.lhs_se = lhs_r.standard_error();
    rnd.rhs = rhs_r.value;
    rnd.rhs_se = rhs_r.standard_error();
    rnd.ratio = safe_ratio(rnd.lhs, rnd.rhs);
    return {marg, rnd};
}

std::vector<BoundRow*> rows_of(BoundReport& rep, const std::string& check, std::optional<int> from_n = std::nullopt)
{
    std::vector<BoundRow*> out;
    for (auto& r : rep.rows) {
        if (r.check == check && r.verdict != "error" && (!from_n || r.n >= *from_n)) out.push_back(&r);
    }
    return out;
}

void finalize_thm1(BoundReport& rep)
{
    std::vector<std::pair<double, double>> lhs, rhs, err;
    for (const auto& r : rep.rows) {
        if (r.verdict == "error") continue;
        if (r.lhs > 0.0) lhs.emplace_back(r.n, r.lhs);
        if (r.rhs > 0.0 && std::isfinite(r.rhs)) rhs.emplace_back(r.n, r.rhs);
        const auto e = r.extras.find("error_norm");
        if (e != r.extras.end() && e->second > 0.0) err.emplace_back(r.n, e->second);
    }
    if (lhs.size() >= 3) rep.rates["lhs"] = fit_rate(lhs);
    if (rhs.size() >= 3) rep.rates["rhs"] = fit_rate(rhs);
    if (err.size() >= 3) rep.rates["error_norm"] = fit_rate(err);
    for (auto& r : rep.rows) {
        if (rep.rates.contains("lhs")) r.slope_lhs = rep.rates["lhs"].slope;
        if (rep.rates.contains("rhs")) r.slope_rhs = rep.rates["rhs"].slope;
    }
    mark_errors(rep);
    rep.verdict = rep.findings.empty() ? Verdict::pass : Verdict::fail;
}

void finalize_thm2(BoundReport& rep, const VerdictPolicy& policy)
{
    auto rows = rows_of(rep, "thm2");
    assess_ratio_sequence(rep, "thm2", rows, rows, policy);
    if (rep.rates.contains("thm2.lhs")) rep.rates["lhs"] = rep.rates["thm2.lhs"];
    if (rep.rates.contains("thm2.rhs")) rep.rates["rhs"] = rep.rates["thm2.rhs"];
    mark_errors(rep);
    rep.verdict = rep.findings.empty() ? Verdict::pass : Verdict::fail;
}

/// Shared tail of the corollary and forward reports: mark rows below N*,
/// assess ratio sequences on rows from N*, and check the sup of the
/// exponential moment.
void finalize_thresholded(BoundReport& rep, const std::vector<std::string>& subchecks,
                          const std::vector<std::pair<int, bool>>& flags, const VerdictPolicy& policy)
{
    rep.n_star = first_stable(flags);
    for (auto& r : rep.rows) {
        r.n_star = rep.n_star;
        if (r.verdict == "error") continue;
        if (!rep.n_star || r.n < *rep.n_star) {
            r.verdict = "skip";
            r.note = "below N*";
        }
    }
    mark_errors(rep);
    if (!rep.n_star) {
        rep.verdict = rep.findings.empty() ? Verdict::indeterminate : Verdict::fail;
        return;
    }
    rep.summary["N_star"] = *rep.n_star;

    double sup_log = -kInf;
    for (const auto& r : rep.rows) {
        if (r.verdict == "error" || r.n < *rep.n_star) continue;
        sup_log = std::max(sup_log, r.extras.at("log_exp_integral"));
    }
    rep.summary["sup_log_exp_integral"] = sup_log;
    rep.summary["sup_exp_integral"] = std::exp(sup_log);
    if (!std::isfinite(sup_log)) rep.findings.push_back("exponential moment is not finite from N* on");

    for (const auto& sub : subchecks) {
        auto eligible = rows_of(rep, sub, rep.n_star);
        auto all = rows_of(rep, sub);
        assess_ratio_sequence(rep, sub, eligible, all, policy);
    }
    rep.verdict = rep.findings.empty() ? Verdict::pass : Verdict::fail;
}

}  // namespace

std::vector<BoundReport> sweep(const RandomMisfitFamily& family, const std::vector<CheckKind>& checks,
                               const SweepOptions& options)
{
    validate_options(options);
    require(!checks.empty(), "sweep needs at least one check");
    const bool want = [&] {
        for (auto c : checks) {
            if (c == CheckKind::forward) return true;
        }
        return false;
    }();
    require(!want || family.kind() == FamilyKind::perturbed_forward,
            "the forward-model check needs a perturbed_forward family");

    const auto& prob = family.problem();
    const auto& prior = prob.prior_ptr();
    const TruthData truth = truth_of(prob);
    const double z = truth.z();
    const double c3 = options.c3.value_or(2.0 * std::max(z, 1.0 / z));
    for (auto c : checks) {
        if (c == CheckKind::corollary) {
            require(c3 > std::max(z, 1.0 / z), "C3 must exceed max(Z, 1/Z)");
        }
    }

    std::vector<BoundReport> reports(checks.size());
    for (std::size_t i = 0; i < checks.size(); ++i) reports[i].kind = checks[i];
    double min_misfit = *std::min_element(truth.misfit.begin(), truth.misfit.end());

    for (int n : options.ns) {
        std::optional<RealizationTable> table;
        std::string failure;
        try {
            table.emplace(realize(family, n, options.m, options.threads));
        } catch (const std::exception& e) {
            failure = e.what();
        }
        for (std::size_t i = 0; i < checks.size(); ++i) {
            auto& rep = reports[i];
            const auto name = std::string(to_string(checks[i]));
            if (!table) {
                rep.rows.push_back(error_row(n, options.m, name, failure));
                continue;
            }
            try {
                switch (checks[i]) {
                case CheckKind::thm1:
                    rep.rows.push_back(thm1_row(truth, *table, options.exps, *prior, options.policy));
                    break;
                case CheckKind::thm2:
                    rep.rows.push_back(thm2_row(truth, *table, options.exps, prior, options.policy));
                    break;
                case CheckKind::corollary:
                    for (auto& r : corollary_rows(truth, *table, options.exps, prior)) rep.rows.push_back(std::move(r));
                    min_misfit = std::min(min_misfit, rep.rows.back().extras["min_misfit_N"]);
                    break;
                case CheckKind::forward:
                    for (auto& r : forward_rows(truth, *table, options.exps, prior)) rep.rows.push_back(std::move(r));
                    break;
                }
            } catch (const std::exception& e) {
                rep.rows.push_back(error_row(n, options.m, name, e.what()));
            }
        }
    }

    for (std::size_t i = 0; i < checks.size(); ++i) {
        auto& rep = reports[i];
        switch (checks[i]) {
        case CheckKind::thm1:
            finalize_thm1(rep);
            break;
        case CheckKind::thm2:
            finalize_thm2(rep, options.policy);
            break;
        case CheckKind::corollary: {
            // (i): common lower bound over the true misfit and every sampled realization
            const double c0 = std::max(0.0, -min_misfit);
            const double threshold = 0.5 * std::exp(-c0) * std::min(z - 1.0 / c3, c3 - z);
            rep.summary["Z"] = z;
            rep.summary["C0"] = c0;
            rep.summary["C3"] = c3;
            rep.summary["threshold"] = threshold;
            rep.summary["C0_by_construction"] = family.kind() == FamilyKind::sketched_quadratic ? 1.0 : 0.0;
            std::vector<std::pair<int, bool>> flags;
            for (auto& r : rep.rows) {
                if (r.check != "corollary_eq6") {
                    if (r.verdict == "error") flags.emplace_back(r.n, false);
                    continue;
                }
                flags.emplace_back(r.n, r.extras.at("error_L1") <= threshold);
            }
            finalize_thresholded(rep, {"corollary_eq6", "corollary_eq7"}, flags, options.policy);
            break;
        }
        case CheckKind::forward: {
            std::vector<std::pair<int, bool>> flags;
            for (auto& r : rep.rows) {
                if (r.check != "forward_marginal") {
                    if (r.verdict == "error") flags.emplace_back(r.n, false);
                    continue;
                }
                flags.emplace_back(r.n, r.extras.at("smallness") <= 1.0);
            }
            finalize_thresholded(rep, {"forward_marginal", "forward_random"}, flags, options.policy);
            break;
        }
        }
    }
    return reports;
}

BoundReport check_corollary(const RandomMisfitFamily& family, const SweepOptions& options)
{
    return std::move(sweep(family, {CheckKind::corollary}, options).front());
}

BoundReport check_forward(const RandomMisfitFamily& family, const SweepOptions& options)
{
    return std::move(sweep(family, {CheckKind::forward}, options).front());
}

}  // namespace randpost
