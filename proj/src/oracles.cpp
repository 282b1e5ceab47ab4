#include "rbsde/oracles.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace rbsde::oracles {

double american_put_binomial_dp(double r, double sigma, double x0, double strike, double T,
                                int steps) {
    if (!(sigma > 0.0)) throw std::invalid_argument("american_put_binomial_dp: sigma must be > 0");
    if (!(x0 > 0.0)) throw std::invalid_argument("american_put_binomial_dp: x0 must be > 0");
    if (strike < 0.0) throw std::invalid_argument("american_put_binomial_dp: strike must be >= 0");
    if (!(T > 0.0) || steps < 1)
        throw std::invalid_argument("american_put_binomial_dp: bad horizon or step count");

    const double h = T / steps;
    const double sh = std::sqrt(h);
    const double drift = r - 0.5 * sigma * sigma;
    const double disc = 1.0 / (1.0 + r * h);
    auto payoff = [&](int i, int j) {
        const double w = (2.0 * j - i) * sh;
        const double x = x0 * std::exp(sigma * w + drift * (i * h));
        return std::max(strike - x, 0.0);
    };

    std::vector<double> v(steps + 1);
    for (int j = 0; j <= steps; ++j) v[j] = payoff(steps, j);
    for (int i = steps - 1; i >= 0; --i)
        for (int j = 0; j <= i; ++j)
            v[j] = std::max(payoff(i, j), disc * (0.5 * (v[j + 1] + v[j])));
    return v[0];
}

namespace {

double tree_value(int steps, const std::function<double(int, int)>& reward, int i, int j) {
    const double stop_now = reward(i, j);
    if (i == steps) return stop_now;
    const double cont =
        0.5 * (tree_value(steps, reward, i + 1, j + 1) + tree_value(steps, reward, i + 1, j));
    return std::max(stop_now, cont);
}

}  // namespace

double exhaustive_stopping_value(int steps, const std::function<double(int, int)>& reward) {
    if (steps < 1) throw std::invalid_argument("exhaustive_stopping_value: steps must be >= 1");
    if (steps > 10)
        throw std::invalid_argument("exhaustive_stopping_value: steps above the exhaustive cap");
    if (!reward) throw std::invalid_argument("exhaustive_stopping_value: reward required");
    return tree_value(steps, reward, 0, 0);
}

}  // namespace rbsde::oracles
