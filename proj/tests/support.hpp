#pragma once

// Reference problems shared by the unit and acceptance tests.

#include <cmath>
#include <memory>

#include "randpost/misfit.hpp"

namespace randpost::testing {

inline GridPtr interval_grid(int n, double lo = -1.0, double hi = 1.0,
                             QuadratureRule rule = QuadratureRule::gauss_legendre)
{
    return GridSpace::build(1, {{lo, hi}}, n, rule);
}

/// G(u) = u, gamma = 1, y = 0.5, uniform prior on [-1, 1].
inline ProblemPtr tp1(int nodes = 64)
{
    auto prior = PriorDensity::uniform(interval_grid(nodes));
    ForwardModel g(1, 1, {{ForwardKind::affine, {1.0, 0.0}}});
    Eigen::VectorXd y(1);
    y << 0.5;
    return std::make_shared<const InverseProblem>(prior, std::move(g), GaussianNoise::identity(1), y);
}

/// G(u) = (u, u^2, sin u), gamma = I, y = G(0.3) + (0.1, -0.05, 0.02).
inline ProblemPtr tp2(int nodes = 64)
{
    auto prior = PriorDensity::uniform(interval_grid(nodes));
    ForwardModel g(1, 3,
                   {{ForwardKind::polynomial, {0, 1, 0, 0, 0, 1, 0, 0, 0}},
                    {ForwardKind::trigonometric, {0, 0, 0, 0, 0, 0, 1, 1, 0}}});
    Eigen::VectorXd y(3);
    y << 0.3 + 0.1, 0.09 - 0.05, std::sin(0.3) + 0.02;
    return std::make_shared<const InverseProblem>(prior, std::move(g), GaussianNoise::identity(3), y);
}

// Oracles from the normal CDF: Z = 0.5 sqrt(2 pi) (Phi(0.5) - Phi(-1.5)) and
// the mean of N(0.5, 1) truncated to [-1, 1].
inline constexpr double kTp1Z = 0.7828892683129504;
inline constexpr double kTp1Mean = 0.1437271158229403;

}  // namespace randpost::testing
