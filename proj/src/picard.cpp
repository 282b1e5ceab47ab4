#include "rbsde/picard.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rbsde {

std::vector<int> block_schedule(const TimeGrid& grid, double lambda, double chat) {
    if (lambda < 0.0) throw std::invalid_argument("block_schedule: lambda must be >= 0");
    if (!(chat > 0.0)) throw std::invalid_argument("block_schedule: chat must be positive");
    const double T = grid.horizon;
    const int n = grid.steps;
    double delta = T;
    if (lambda > 0.0) delta = std::min(T, 1.0 / ((2.0 * chat * lambda) * (2.0 * chat * lambda)));
    if (delta < grid.dt * (1.0 - 1e-12))
        throw std::invalid_argument("block_schedule: required mesh is below one grid step");

    int k = std::max(1, int(std::ceil(T / delta - 1e-12)));
    // snapped mesh must not exceed delta
    while (k < n && double((n + k - 1) / k) * grid.dt > delta * (1.0 + 1e-12)) ++k;

    std::vector<int> bounds;
    bounds.reserve(k + 1);
    for (int m = 0; m <= k; ++m) bounds.push_back(int(std::llround(double(m) * n / k)));
    for (std::size_t m = 1; m < bounds.size(); ++m)
        if (bounds[m] <= bounds[m - 1]) bounds[m] = bounds[m - 1] + 1;
    bounds.back() = n;
    return bounds;
}

SolutionTriple solve_z_frozen(const Problem& pb, const LatticeProcess& v, const StepConfig& cfg) {
    const int n = pb.lattice().steps();
    if (v.last_step() < n - 1)
        throw std::invalid_argument("solve_z_frozen: frozen process must cover steps 0..N-1");
    SolutionTriple out{LatticeProcess(n), LatticeProcess(n - 1), LatticeProcess(n - 1),
                       SolveMode::Projected, 0.0};
    detail::projected_range(pb, cfg, 0, n, pb.terminal(), &v, out.y, out.z, out.dk);
    return out;
}

std::pair<SolutionTriple, PicardTrace> picard_solve(const Problem& pb, const PicardConfig& cfg) {
    if (!(cfg.p > 1.0)) throw std::invalid_argument("picard_solve: p must exceed 1");
    const Generator& gen = pb.generator();
    if (gen.h5() && gen.h5()->alpha * cfg.p >= 1.0)
        throw std::invalid_argument("picard_solve: alpha * p must be < 1 under (H5)");
    if (!(cfg.stop_tol > 0.0)) throw std::invalid_argument("picard_solve: stop_tol must be > 0");

    const BinomialLattice& lat = pb.lattice();
    const int n = lat.steps();
    std::vector<int> bounds =
        cfg.blocks ? *cfg.blocks : block_schedule(lat.grid(), gen.lambda(), cfg.chat);
    if (bounds.size() < 2 || bounds.front() != 0 || bounds.back() != n)
        throw std::invalid_argument("picard_solve: block boundaries must run from 0 to N");
    for (std::size_t m = 1; m < bounds.size(); ++m)
        if (bounds[m] <= bounds[m - 1])
            throw std::invalid_argument("picard_solve: block boundaries must increase");

    SolutionTriple out{LatticeProcess(n), LatticeProcess(n - 1), LatticeProcess(n - 1),
                       SolveMode::Projected, 0.0};
    PicardTrace trace;
    trace.block_boundaries = bounds;

    Eigen::VectorXd terminal = pb.terminal();
    LatticeProcess frozen(n - 1);   // per-block Z^0 = 0
    LatticeProcess prev_y(n);       // previous sweep's Y on the block (0 before sweep 1)

    for (int b = int(bounds.size()) - 2; b >= 0; --b) {
        const int lo = bounds[b], hi = bounds[b + 1];
        for (int i = lo; i < hi; ++i) frozen.slice(i).setZero();
        for (int i = lo; i <= hi; ++i) prev_y.slice(i).setZero();
        double prev_hp = 0.0;
        bool converged = false;
        std::vector<double> ratios;
        for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
            detail::projected_range(pb, cfg.step, lo, hi, terminal, &frozen, out.y, out.z, out.dk);

            // frozen still holds the previous sweep's Z here (Z^0 on sweep 1)
            LatticeProcess zdiff(n - 1), ydiff(n);
            for (int i = lo; i < hi; ++i) zdiff.slice(i) = out.z.slice(i) - frozen.slice(i);
            for (int i = lo; i <= hi; ++i) ydiff.slice(i) = out.y.slice(i) - prev_y.slice(i);

            SweepRecord rec;
            rec.block = b;
            rec.sweep = sweep;
            rec.hp_diff = hp_norm_range(lat, zdiff, lo, hi, cfg.p, cfg.norms).value;
            rec.sp_diff = sp_norm_range(lat, ydiff, lo, hi, cfg.p, cfg.norms).value;
            rec.ratio = (sweep > 1 && prev_hp > 0.0) ? rec.hp_diff / prev_hp : 0.0;
            if (sweep > 1) ratios.push_back(rec.ratio);
            trace.records.push_back(rec);
            ++trace.total_sweeps;

            for (int i = lo; i < hi; ++i) frozen.slice(i) = out.z.slice(i);
            for (int i = lo; i <= hi; ++i) prev_y.slice(i) = out.y.slice(i);
            prev_hp = rec.hp_diff;
            if (rec.hp_diff <= cfg.stop_tol) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            std::ostringstream msg;
            msg << "picard_solve: block " << b << " did not contract within " << cfg.max_sweeps
                << " sweeps; measured ratios:";
            for (double r : ratios) msg << ' ' << r;
            throw std::runtime_error(msg.str());
        }
        terminal = out.y.slice(lo);
    }
    return {std::move(out), std::move(trace)};
}

}  // namespace rbsde
