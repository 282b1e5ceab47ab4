#pragma once

#include "rbsde/problem.hpp"

namespace rbsde {

struct StepConfig {
    double root_tol = 1e-13;
    int max_iter = 200;
};

struct SolutionPair {
    LatticeProcess y;   // steps 0..N
    LatticeProcess z;   // steps 0..N-1
};

/// Z(i,j) = (Y(i+1,j+1) - Y(i+1,j)) / (2 sqrt(dt)); equals E[Y dW | node]/dt
/// exactly on the binomial lattice.
Eigen::VectorXd z_extract(const Eigen::Ref<const Eigen::VectorXd>& y_next, double sqrt_dt);

/// Solves y - dt * f(t, y, z) = yhat for the unique root. Requires
/// dt * max(mu, 0) <= 1/2 so the map is strictly increasing with slope >= 1/2.
/// Newton with a bisection safeguard on a bracket grown by doubling from
/// yhat +- max(1, |yhat|). Bracket or iteration failure signals a generator
/// violating its declared mu.
double implicit_step(double yhat, double t, double z, const Generator& gen, double dt,
                     const StepConfig& cfg = {});

/// Backward implicit-in-y / explicit-in-z recursion for the non-reflected
/// equation. Requires the -infinity obstacle sentinel.
SolutionPair solve_bsde(const Problem& problem, const StepConfig& cfg = {});

namespace detail {

/// Root of a continuous strictly increasing g with g(root) = 0, bracketed by
/// doubling expansion around `center`. Shared by the plain and penalized steps.
double increasing_root(const std::function<double(double)>& g, double center, double root_tol,
                       int max_iter);

void require_step_condition(const Generator& gen, double dt);

}  // namespace detail

}  // namespace rbsde
