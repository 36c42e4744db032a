#include "doctest.h"

#include <cmath>
#include <vector>

#include "randpost/measure.hpp"
#include "randpost/stream.hpp"
#include "support.hpp"

using namespace randpost;
using randpost::testing::interval_grid;

namespace {

std::vector<double> nodal(const GridSpace& g, double (*f)(double))
{
    std::vector<double> v(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) v[k] = f(g.node(k)[0]);
    return v;
}

DensityMeasure random_measure(const PriorPtr& prior, Stream& s)
{
    std::vector<double> ld(prior->grid().size());
    for (auto& x : ld) x = 3.0 * s.normal();
    return DensityMeasure::normalized(prior, std::move(ld));
}

}  // namespace

TEST_CASE("two-point trapezoid grid")
{
    auto g = GridSpace::build(1, {{-1.0, 1.0}}, 2, QuadratureRule::trapezoid);
    REQUIRE(g->size() == 2);
    CHECK(g->node(0)[0] == -1.0);
    CHECK(g->node(1)[0] == 1.0);
    CHECK(g->weight(0) == 1.0);
    CHECK(g->weight(1) == 1.0);
}

TEST_CASE("unit square weights sum to one")
{
    for (auto rule : {QuadratureRule::trapezoid, QuadratureRule::gauss_legendre}) {
        auto g = GridSpace::build(2, {{0.0, 1.0}, {0.0, 1.0}}, 7, rule);
        double s = 0.0;
        for (double w : g->weights()) s += w;
        CHECK(s == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("five-node Gauss-Legendre integrates u^4 exactly")
{
    auto g = interval_grid(5);
    const auto v = nodal(*g, [](double u) { return u * u * u * u; });
    CHECK(std::abs(integrate(v, *g) - 0.4) < 1e-14);
}

TEST_CASE("grid validation")
{
    CHECK_THROWS_AS(GridSpace::build(0, {}, 4, QuadratureRule::trapezoid), std::invalid_argument);
    CHECK_THROWS_AS(GridSpace::build(4, {{0, 1}, {0, 1}, {0, 1}, {0, 1}}, 4, QuadratureRule::trapezoid),
                    std::invalid_argument);
    CHECK_THROWS_AS(GridSpace::build(1, {{1.0, 1.0}}, 4, QuadratureRule::trapezoid), std::invalid_argument);
    CHECK_THROWS_AS(GridSpace::build(1, {{0.0, 1.0}}, 1, QuadratureRule::trapezoid), std::invalid_argument);
    CHECK_THROWS_AS(GridSpace::build(2, {{0.0, 1.0}}, 4, QuadratureRule::trapezoid), std::invalid_argument);
}

TEST_CASE("node ordering runs the first axis fastest")
{
    auto g = GridSpace::build(2, {{0.0, 1.0}, {10.0, 11.0}}, 3, QuadratureRule::trapezoid);
    CHECK(g->node(1)[0] == 0.5);
    CHECK(g->node(1)[1] == 10.0);
    CHECK(g->node(3)[0] == 0.0);
    CHECK(g->node(3)[1] == 10.5);
}

TEST_CASE("integrals against the uniform prior")
{
    auto g = interval_grid(64);
    auto prior = PriorDensity::uniform(g);
    std::vector<double> one(g->size(), 1.0);
    CHECK(integrate(one, *g, prior->density()) == doctest::Approx(1.0).epsilon(1e-12));
    const auto odd = nodal(*g, [](double u) { return u; });
    CHECK(std::abs(integrate(odd, *g, prior->density())) < 1e-15);
    const auto lik = nodal(*g, [](double u) { return std::exp(-0.5 * (0.5 - u) * (0.5 - u)); });
    CHECK(std::abs(integrate(lik, *g, prior->density()) - randpost::testing::kTp1Z) < 1e-12);
}

TEST_CASE("doubling the node count leaves smooth integrals unchanged")
{
    const auto f = [](double u) { return std::exp(std::sin(3.0 * u)) * std::cos(u); };
    auto a = interval_grid(32), b = interval_grid(64);
    std::vector<double> va(a->size()), vb(b->size());
    for (std::size_t k = 0; k < a->size(); ++k) va[k] = f(a->node(k)[0]);
    for (std::size_t k = 0; k < b->size(); ++k) vb[k] = f(b->node(k)[0]);
    CHECK(std::abs(integrate(va, *a) - integrate(vb, *b)) < 1e-8);
}

TEST_CASE("truncated Gaussian prior is normalized on the grid")
{
    auto g = GridSpace::build(2, {{-1.0, 1.0}, {0.0, 2.0}}, 20, QuadratureRule::gauss_legendre);
    const std::vector<double> mean{0.2, 1.0}, sd{0.5, 2.0};
    auto p = PriorDensity::truncated_gaussian(g, mean, sd);
    double mass = 0.0;
    for (double m : p->masses()) mass += m;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p->strictly_positive());
    CHECK_THROWS_AS(PriorDensity(g, std::vector<double>(g->size(), 1.0)), std::invalid_argument);
}

TEST_CASE("log_sum_exp, log_mean_exp and compensated_sum")
{
    const std::vector<double> big{1000.0, 1000.0};
    CHECK(log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)));
    const std::vector<double> none{-kInf, -kInf};
    CHECK(log_sum_exp(none) == -kInf);
    CHECK(log_sum_exp(std::vector<double>{}) == -kInf);
    const std::vector<double> same(7, -3.25);
    CHECK(log_mean_exp(same) == -3.25);
    const std::vector<double> cancel{1e16, 1.0, -1e16};
    CHECK(compensated_sum(cancel) == 1.0);
}

TEST_CASE("Hellinger: identical, disjoint and Gaussian oracle")
{
    auto g = interval_grid(16);
    auto prior = PriorDensity::uniform(g);
    DensityMeasure mu = DensityMeasure::normalized(prior, std::vector<double>(g->size(), 0.0));
    CHECK(hellinger(mu, mu) == 0.0);

    std::vector<double> left(g->size(), -kInf), right(g->size(), -kInf);
    for (std::size_t k = 0; k < g->size(); ++k) (k < 8 ? left : right)[k] = 0.0;
    CHECK(hellinger(DensityMeasure::normalized(prior, left), DensityMeasure::normalized(prior, right)) ==
          doctest::Approx(1.0).epsilon(1e-14));

    auto wide = GridSpace::build(1, {{-8.0, 9.0}}, 2000, QuadratureRule::gauss_legendre);
    auto flat = PriorDensity::uniform(wide);
    std::vector<double> a(wide->size()), b(wide->size());
    for (std::size_t k = 0; k < wide->size(); ++k) {
        const double u = wide->node(k)[0];
        a[k] = -0.5 * u * u;
        b[k] = -0.5 * (u - 1.0) * (u - 1.0);
    }
    const double d = hellinger(DensityMeasure::normalized(flat, a), DensityMeasure::normalized(flat, b));
    CHECK(std::abs(d - std::sqrt(1.0 - std::exp(-0.125))) < 1e-4);
    CHECK(std::abs(d - 0.3427872480349942) < 1e-10);
}

TEST_CASE("Hellinger metric axioms on 100 random triples")
{
    auto g = interval_grid(24);
    auto prior = PriorDensity::uniform(g);
    auto s = derive_stream(11, {"hellinger", "triples"});
    for (int t = 0; t < 100; ++t) {
        const auto a = random_measure(prior, s), b = random_measure(prior, s), c = random_measure(prior, s);
        const double ab = hellinger(a, b), bc = hellinger(b, c), ac = hellinger(a, c);
        CHECK(ab == doctest::Approx(hellinger(b, a)).epsilon(1e-14));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        CHECK(ab > 0.0);
        CHECK(ac <= ab + bc + 1e-10);
        CHECK(hellinger(a, a) == 0.0);
    }
}

TEST_CASE("Hellinger does not depend on the dominating reference")
{
    auto g = interval_grid(24);
    auto prior = PriorDensity::uniform(g);
    auto s = derive_stream(11, {"hellinger", "reference"});
    for (int t = 0; t < 20; ++t) {
        const auto mu = random_measure(prior, s), nu = random_measure(prior, s);
        std::vector<double> mix(g->size());
        for (std::size_t k = 0; k < g->size(); ++k) mix[k] = 0.5 * (mu.lebesgue_density(k) + nu.lebesgue_density(k));
        const PriorDensity ref(g, mix);
        CHECK(std::abs(hellinger(mu, nu) - hellinger(mu, nu, ref)) < 1e-10);
        CHECK(std::abs(hellinger(mu, nu) - hellinger(mu, nu, mu.as_reference())) < 1e-10);
    }
}

TEST_CASE("Hellinger rejects measures on different grids")
{
    auto p1 = PriorDensity::uniform(interval_grid(8));
    auto p2 = PriorDensity::uniform(interval_grid(9));
    const auto a = DensityMeasure::normalized(p1, std::vector<double>(8, 0.0));
    const auto b = DensityMeasure::normalized(p2, std::vector<double>(9, 0.0));
    CHECK_THROWS_AS(hellinger(a, b), std::invalid_argument);
}

TEST_CASE("mixed norm examples")
{
    auto g = interval_grid(32);
    auto prior = PriorDensity::uniform(g);
    const auto id = [](double x) { return x; };

    SampleTable two(3, g->size(), 2.0);
    for (double qi : {1.0, 2.0, 5.0, kInf}) {
        for (double qo : {1.0, 3.0, kInf}) CHECK(mixed_norm(two, id, {qi, qo, 3}, *prior) == doctest::Approx(2.0));
    }

    SampleTable lin(1, g->size());
    for (std::size_t k = 0; k < g->size(); ++k) lin(0, k) = g->node(k)[0];
    // sup over the nodes, which stop just short of the endpoint
    CHECK(mixed_norm(lin, id, {1.0, kInf, 1}, *prior) == doctest::Approx(g->node(g->size() - 1)[0]));
    CHECK(mixed_norm(lin, id, {1.0, kInf, 1}, *prior) > 0.997);

    SampleTable pm(2, g->size());
    for (std::size_t k = 0; k < g->size(); ++k) {
        pm(0, k) = 1.7;
        pm(1, k) = -1.7;
    }
    CHECK(mixed_norm(pm, id, {1.0, 1.0, 2}, *prior) == doctest::Approx(1.7));
    CHECK_THROWS_AS(mixed_norm(pm, id, {1.0, 1.0, 3}, *prior), std::invalid_argument);
}

TEST_CASE("mixed norm is non-decreasing in both exponents")
{
    auto g = interval_grid(16);
    auto prior = PriorDensity::uniform(g);
    auto s = derive_stream(3, {"mixed", "monotone"});
    SampleTable t(50, g->size());
    for (std::size_t j = 0; j < t.rows(); ++j) {
        for (auto& v : t.row(j)) v = s.normal() * (1.0 + s.uniform());
    }
    const auto abs_map = [](double x) { return std::abs(x); };
    const double qs[] = {1.0, 1.5, 2.0, 4.0, 8.0, kInf};
    for (double qo : qs) {
        double prev = 0.0;
        for (double qi : qs) {
            const double v = mixed_norm(t, abs_map, {qi, qo, 50}, *prior);
            CHECK(v >= prev * (1.0 - 1e-12));
            prev = v;
        }
    }
    for (double qi : qs) {
        double prev = 0.0;
        for (double qo : qs) {
            const double v = mixed_norm(t, abs_map, {qi, qo, 50}, *prior);
            CHECK(v >= prev * (1.0 - 1e-12));
            prev = v;
        }
    }
}

TEST_CASE("log-domain mixed norm agrees with the direct one")
{
    auto g = interval_grid(16);
    auto prior = PriorDensity::uniform(g);
    auto s = derive_stream(3, {"mixed", "logs"});
    SampleTable t(40, g->size());
    for (std::size_t j = 0; j < t.rows(); ++j) {
        for (auto& v : t.row(j)) v = std::exp(s.normal());
    }
    const auto logs = t.map([](double x) { return std::log(x); });
    for (auto [qi, qo] : {std::pair{1.0, 1.0}, {2.0, 4.0}, {6.0, 1.0}, {3.0, kInf}}) {
        const auto est = mixed_norm_from_logs(logs, qi, qo, *prior);
        CHECK(est.value == doctest::Approx(mixed_norm(t, [](double x) { return x; }, {qi, qo, 40}, *prior)).epsilon(1e-12));
        CHECK(est.rel_influence.size() == 40);
        CHECK(std::isfinite(est.standard_error()));
    }
}

TEST_CASE("delta-method influence predicts the spread of the estimator")
{
    // F = (E[X])^1 with X iid per omega: the standard error must match sd/sqrt(M)
    auto g = interval_grid(4);
    auto prior = PriorDensity::uniform(g);
    auto s = derive_stream(5, {"influence"});
    SampleTable t(400, g->size());
    std::vector<double> col(t.rows());
    for (std::size_t j = 0; j < t.rows(); ++j) {
        const double x = 1.0 + s.uniform();
        col[j] = x;
        for (auto& v : t.row(j)) v = std::log(x);
    }
    const auto est = mixed_norm_from_logs(t, 1.0, 1.0, *prior);
    double mean = 0.0, ss = 0.0;
    for (double x : col) mean += x;
    mean /= col.size();
    for (double x : col) ss += (x - mean) * (x - mean);
    const double se = std::sqrt(ss / (col.size() - 1) / col.size());
    CHECK(est.value == doctest::Approx(mean).epsilon(1e-12));
    CHECK(est.standard_error() == doctest::Approx(se).epsilon(1e-10));
}

TEST_CASE("density measure validation")
{
    auto prior = PriorDensity::uniform(interval_grid(4));
    CHECK_THROWS_AS(DensityMeasure(prior, {0.0, 0.0, 0.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(DensityMeasure(prior, {0.0, std::nan(""), 0.0, 0.0}, 0.0), std::invalid_argument);
    const auto m = DensityMeasure::normalized(prior, {1.0, 2.0, -kInf, 0.5});
    CHECK(m.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.density_wrt_prior(2) == 0.0);
}
