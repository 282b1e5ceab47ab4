#include "rbsde/bsde.hpp"

#include <cmath>
#include <stdexcept>

namespace rbsde {

Eigen::VectorXd z_extract(const Eigen::Ref<const Eigen::VectorXd>& y_next, double sqrt_dt) {
    const Eigen::Index n = y_next.size() - 1;
    if (n < 1) throw std::invalid_argument("z_extract: slice needs at least two entries");
    return (y_next.segment(1, n) - y_next.segment(0, n)) / (2.0 * sqrt_dt);
}

namespace detail {

void require_step_condition(const Generator& gen, double dt) {
    if (dt * std::max(gen.mu(), 0.0) > 0.5)
        throw std::invalid_argument(
            "step condition violated: dt * max(mu, 0) must be <= 1/2; refine the grid");
}

double increasing_root(const std::function<double(double)>& g, double center, double root_tol,
                       int max_iter) {
    double g0 = g(center);
    if (std::abs(g0) <= root_tol) return center;

    // Bracket by doubling away from the center.
    double lo = center, hi = center, glo = g0, ghi = g0;
    double d = std::max(1.0, std::abs(center));
    for (int k = 0;; ++k) {
        if (k > 200) throw std::runtime_error("increasing_root: bracket expansion failed");
        bool done = true;
        if (glo > 0.0) {
            lo -= d;
            glo = g(lo);
            done = false;
        }
        if (ghi < 0.0) {
            hi += d;
            ghi = g(hi);
            done = false;
        }
        if (done) break;
        d *= 2.0;
    }
    if (glo > 0.0 || ghi < 0.0)
        throw std::runtime_error("increasing_root: no sign change (generator breaks declared mu?)");

    double y = center, gy = g0;
    if (y < lo || y > hi) {
        y = 0.5 * (lo + hi);
        gy = g(y);
    }
    for (int it = 0; it < max_iter; ++it) {
        if (std::abs(gy) <= root_tol) return y;
        if (gy > 0.0) {
            hi = y;
            ghi = gy;
        } else {
            lo = y;
            glo = gy;
        }
        // Newton with finite-difference slope, clipped to the bracket.
        const double fd = std::max(1e-8, 1e-8 * std::abs(y));
        const double slope = (g(y + fd) - g(y - fd)) / (2.0 * fd);
        double cand = slope > 0.0 ? y - gy / slope : y;
        if (!(cand > lo && cand < hi)) cand = 0.5 * (lo + hi);
        if (cand == y) cand = 0.5 * (lo + hi);
        y = cand;
        gy = g(y);
        if (hi - lo <= root_tol * std::max(1.0, std::abs(y))) return y;
    }
    throw std::runtime_error("increasing_root: iteration cap reached");
}

}  // namespace detail

double implicit_step(double yhat, double t, double z, const Generator& gen, double dt,
                     const StepConfig& cfg) {
    if (!(cfg.root_tol > 0.0)) throw std::invalid_argument("implicit_step: root_tol must be > 0");
    detail::require_step_condition(gen, dt);
    auto g = [&](double y) { return y - dt * gen(t, y, z) - yhat; };
    return detail::increasing_root(g, yhat, cfg.root_tol, cfg.max_iter);
}

SolutionPair solve_bsde(const Problem& pb, const StepConfig& cfg) {
    if (pb.obstacle().finite())
        throw std::invalid_argument("solve_bsde: requires the -infinity obstacle sentinel");
    detail::require_step_condition(pb.generator(), pb.lattice().dt());

    const BinomialLattice& lat = pb.lattice();
    const int n = lat.steps();
    const double h = lat.dt();

    SolutionPair out{LatticeProcess(n), LatticeProcess(n - 1)};
    out.y.slice(n) = pb.terminal();
    for (int i = n - 1; i >= 0; --i) {
        const Eigen::VectorXd yhat = cond_expect(out.y.slice(i + 1));
        const Eigen::VectorXd zi = z_extract(out.y.slice(i + 1), lat.sqrt_dt());
        auto yi = out.y.slice(i);
        const double t = lat.t(i);
        for (int j = 0; j <= i; ++j) yi[j] = implicit_step(yhat[j], t, zi[j], pb.generator(), h, cfg);
        out.z.slice(i) = zi;
    }
    return out;
}

}  // namespace rbsde
