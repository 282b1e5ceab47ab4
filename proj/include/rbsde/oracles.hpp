#pragma once

#include <functional>

// Scenario oracles kept deliberately free of any solver machinery: plain
// std::vector recursions so the cross-checks exercise genuinely independent
// code paths. The build enforces this (the oracle target does not link the
// solver library).
namespace rbsde::oracles {

/// Classical binomial American put: V_N = payoff, V_i = max(payoff_i,
/// E[V_{i+1}] / (1 + r h)) on the lognormal node mapping
/// X = x0 exp(sigma W + (r - sigma^2/2) t). The per-step discount matches the
/// implicit one-step rate so two independent recursions target one value.
double american_put_binomial_dp(double r, double sigma, double x0, double strike, double T,
                                int steps);

/// Brute-force optimal stopping value for a reward table reward(i, j) on the
/// binomial walk (j = up-move count), maximized over all adapted stopping
/// rules by recursion over the full path tree. steps <= 10.
double exhaustive_stopping_value(int steps, const std::function<double(int, int)>& reward);

}  // namespace rbsde::oracles
