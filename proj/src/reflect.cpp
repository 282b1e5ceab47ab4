#include "rbsde/reflect.hpp"

#include "rbsde/analysis.hpp"

#include <cmath>
#include <stdexcept>

namespace rbsde {

namespace detail {

void projected_range(const Problem& pb, const StepConfig& cfg, int first, int last,
                     const Eigen::VectorXd& terminal, const LatticeProcess* v_frozen,
                     LatticeProcess& y, LatticeProcess& z, LatticeProcess& dk) {
    const BinomialLattice& lat = pb.lattice();
    if (first < 0 || last > lat.steps() || first >= last)
        throw std::invalid_argument("projected_range: bad step range");
    if (terminal.size() != last + 1)
        throw std::invalid_argument("projected_range: terminal slice size mismatch");
    require_step_condition(pb.generator(), lat.dt());

    const double h = lat.dt();
    y.slice(last) = terminal;
    for (int i = last - 1; i >= first; --i) {
        const Eigen::VectorXd yhat = cond_expect(y.slice(i + 1));
        const Eigen::VectorXd zi = z_extract(y.slice(i + 1), lat.sqrt_dt());
        const double t = lat.t(i);
        auto yi = y.slice(i);
        auto dki = dk.slice(i);
        for (int j = 0; j <= i; ++j) {
            const double zarg = v_frozen ? (*v_frozen)(i, j) : zi[j];
            const double ycand = implicit_step(yhat[j], t, zarg, pb.generator(), h, cfg);
            const double l = pb.obstacle_at(i, j);
            yi[j] = std::max(ycand, l);
            dki[j] = yi[j] - ycand;
        }
        z.slice(i) = zi;
    }
}

}  // namespace detail

SolutionTriple solve_projected(const Problem& pb, const StepConfig& cfg) {
    const int n = pb.lattice().steps();
    SolutionTriple out{LatticeProcess(n), LatticeProcess(n - 1), LatticeProcess(n - 1),
                       SolveMode::Projected, 0.0};
    detail::projected_range(pb, cfg, 0, n, pb.terminal(), nullptr, out.y, out.z, out.dk);
    return out;
}

SolutionTriple solve_penalized(const Problem& pb, double level, const StepConfig& cfg) {
    if (level < 0.0) throw std::invalid_argument("solve_penalized: level must be >= 0");
    const BinomialLattice& lat = pb.lattice();
    detail::require_step_condition(pb.generator(), lat.dt());

    const int n = lat.steps();
    const double h = lat.dt();
    const Generator& f = pb.generator();
    SolutionTriple out{LatticeProcess(n), LatticeProcess(n - 1), LatticeProcess(n - 1),
                       SolveMode::Penalized, level};
    out.y.slice(n) = pb.terminal();
    for (int i = n - 1; i >= 0; --i) {
        const Eigen::VectorXd yhat = cond_expect(out.y.slice(i + 1));
        const Eigen::VectorXd zi = z_extract(out.y.slice(i + 1), lat.sqrt_dt());
        const double t = lat.t(i);
        auto yi = out.y.slice(i);
        auto dki = out.dk.slice(i);
        for (int j = 0; j <= i; ++j) {
            const double l = pb.obstacle_at(i, j);
            auto g = [&](double yy) {
                return yy - h * f(t, yy, zi[j]) - h * level * std::max(l - yy, 0.0) - yhat[j];
            };
            yi[j] = detail::increasing_root(g, yhat[j], cfg.root_tol, cfg.max_iter);
            dki[j] = level * h * std::max(l - yi[j], 0.0);
        }
        out.z.slice(i) = zi;
    }
    return out;
}

SkorokhodReport skorokhod_report(const SolutionTriple& triple, const Problem& pb) {
    const BinomialLattice& lat = pb.lattice();
    const int n = lat.steps();
    if (triple.y.last_step() != n)
        throw std::invalid_argument("skorokhod_report: triple does not match the lattice");

    SkorokhodReport rep;
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd& prob = lat.prob_slice(i);
        for (int j = 0; j <= i; ++j) {
            const double dkij = triple.dk(i, j);
            const double l = pb.obstacle_at(i, j);
            if (dkij != 0.0) rep.residual += prob[j] * (triple.y(i, j) - l) * dkij;
            rep.expected_k_terminal += prob[j] * dkij;
            rep.max_obstacle_violation =
                std::max(rep.max_obstacle_violation, std::max(l - triple.y(i, j), 0.0));
        }
    }
    // terminal slice can violate only if xi were below L_T, which Problem forbids
    const Eigen::VectorXd ln = pb.obstacle_slice(n);
    for (int j = 0; j <= n; ++j)
        rep.max_obstacle_violation =
            std::max(rep.max_obstacle_violation, std::max(ln[j] - triple.y(n, j), 0.0));
    return rep;
}

SweepReport penalization_sweep(const Problem& pb, const std::vector<double>& levels,
                               const StepConfig& cfg, const PathwiseOptions& paths) {
    for (std::size_t k = 1; k < levels.size(); ++k)
        if (!(levels[k] > levels[k - 1]))
            throw std::invalid_argument("penalization_sweep: levels must be strictly increasing");

    SweepReport rep;
    rep.p = pb.p();
    rep.reference = solve_projected(pb, cfg);

    const LatticeProcess* prev_y = nullptr;
    std::vector<SolutionTriple> solved;
    solved.reserve(levels.size());
    for (double level : levels) {
        solved.push_back(solve_penalized(pb, level, cfg));
        const SolutionTriple& tri = solved.back();

        SweepLevel row;
        row.level = level;
        LatticeProcess ydiff(tri.y.last_step()), zdiff(tri.z.last_step()), kdiff(tri.dk.last_step());
        ydiff.raw() = tri.y.raw() - rep.reference.y.raw();
        zdiff.raw() = tri.z.raw() - rep.reference.z.raw();
        kdiff.raw() = tri.dk.raw() - rep.reference.dk.raw();
        const NormValue sy = sp_norm(pb.lattice(), ydiff, rep.p, paths);
        row.sp_dist_y = sy.value;
        row.sp_dist_y_stderr = sy.std_error;
        row.method = method_name(sy.method);
        const NormValue hz = hp_norm(pb.lattice(), zdiff, rep.p, paths);
        row.hp_dist_z = hz.value;
        row.hp_dist_z_stderr = hz.std_error;
        const NormValue sk = ksup_norm(pb.lattice(), kdiff, rep.p, paths);
        row.sp_dist_k = sk.value;
        row.sp_dist_k_stderr = sk.std_error;
        row.skorokhod_residual = skorokhod_report(tri, pb).residual;
        if (prev_y) row.monotonicity_violation = (prev_y->raw() - tri.y.raw()).maxCoeff();
        prev_y = &tri.y;
        rep.levels.push_back(std::move(row));
    }
    return rep;
}

}  // namespace rbsde
