#include "rbsde/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rbsde {

std::string method_name(PathMethod m) {
    switch (m) {
        case PathMethod::ExactEnumeration: return "exact-enumeration";
        case PathMethod::Augmented: return "augmented";
        case PathMethod::Sampled: return "sampled";
    }
    return "?";
}

namespace {

// E[fn(path)^p]^{1/p} over paths restricted to steps [first, last]. fn sees a
// span where index k is the j-index at step first+k. Enumerates when the
// range fits the cap, otherwise samples full paths and restricts.
NormValue pathwise_p_mean(const BinomialLattice& lat, int first, int last,
                          const std::function<double(std::span<const int>)>& fn, double p,
                          const PathwiseOptions& opts) {
    if (!(p > 0.0)) throw std::invalid_argument("pathwise norm: exponent must be positive");
    if (opts.force == PathMethod::Augmented)
        throw std::invalid_argument("pathwise norm: augmented mode needs a node representation");
    if (opts.force == PathMethod::ExactEnumeration && last - first > opts.enum_cap)
        throw std::invalid_argument("pathwise norm: enumeration forced beyond the cap");
    const bool enumerate =
        opts.force == PathMethod::ExactEnumeration ||
        (!opts.force && last - first <= opts.enum_cap);
    NormValue out;
    if (enumerate) {
        const double moment = expect_path_functional(
            lat, first, last, [&](std::span<const int> nodes) { return std::pow(fn(nodes), p); },
            opts.enum_cap);
        out.value = std::pow(moment, 1.0 / p);
        out.method = PathMethod::ExactEnumeration;
        return out;
    }
    double sum = 0.0, sumsq = 0.0;
    std::size_t count = 0;
    sample_paths(lat, opts.sample_count, opts.seed, [&](std::span<const int> nodes) {
        const double v = std::pow(fn(nodes.subspan(first, last - first + 1)), p);
        sum += v;
        sumsq += v * v;
        ++count;
    });
    const double mean = sum / double(count);
    const double var = std::max(0.0, sumsq / double(count) - mean * mean);
    const double se_moment = count > 1 ? std::sqrt(var / double(count - 1)) : 0.0;
    out.value = std::pow(mean, 1.0 / p);
    out.method = PathMethod::Sampled;
    // delta method on x -> x^{1/p}
    out.std_error = mean > 0.0 ? se_moment * std::pow(mean, 1.0 / p - 1.0) / p : 0.0;
    return out;
}

double sup_abs_along(const LatticeProcess& x, int first, std::span<const int> nodes, int upto) {
    double m = 0.0;
    for (int k = 0; k <= upto; ++k) m = std::max(m, std::abs(x(first + k, nodes[k])));
    return m;
}

}  // namespace

NormValue sp_norm(const BinomialLattice& lat, const LatticeProcess& x, double p,
                  const PathwiseOptions& opts) {
    const int last = x.last_step();
    return pathwise_p_mean(
        lat, 0, last,
        [&](std::span<const int> nodes) { return sup_abs_along(x, 0, nodes, last); }, p, opts);
}

NormValue sp_norm_augmented(const BinomialLattice& lat,
                            const std::function<double(double)>& abs_node_fn, double p) {
    if (!(p > 0.0)) throw std::invalid_argument("sp_norm_augmented: exponent must be positive");
    const int n = lat.steps();
    for (int k = -n; k <= n; ++k)
        if (abs_node_fn(k * lat.sqrt_dt()) < 0.0)
            throw std::invalid_argument(
                "sp_norm_augmented: node representation must be nonnegative");
    const AugmentedLattice aug = augment_running_max(lat, abs_node_fn, NodeMonotonicity::None);
    const double moment = aug.expect_of_max(n, [&](double m) { return std::pow(m, p); });
    return NormValue{std::pow(moment, 1.0 / p), PathMethod::Augmented, std::nullopt};
}

NormValue hp_norm(const BinomialLattice& lat, const LatticeProcess& z, double p,
                  const PathwiseOptions& opts) {
    const double h = lat.dt();
    if (p == 2.0 && opts.force != PathMethod::Sampled) {
        double acc = 0.0;
        for (int i = 0; i <= z.last_step(); ++i)
            acc += h * lat.expect_slice(i, z.slice(i).array().square().matrix());
        return NormValue{std::sqrt(acc), PathMethod::ExactEnumeration, std::nullopt};
    }
    const int last = z.last_step();
    return pathwise_p_mean(
        lat, 0, last + 1,
        [&](std::span<const int> nodes) {
            double q = 0.0;
            for (int i = 0; i <= last; ++i) q += z(i, nodes[i]) * z(i, nodes[i]) * h;
            return std::sqrt(q);
        },
        p, opts);
}

NormValue ksup_norm(const BinomialLattice& lat, const LatticeProcess& dk, double p,
                    const PathwiseOptions& opts) {
    const int last = dk.last_step();
    return pathwise_p_mean(
        lat, 0, last + 1,
        [&](std::span<const int> nodes) {
            double k = 0.0, m = 0.0;
            for (int i = 0; i <= last; ++i) {
                k += dk(i, nodes[i]);
                m = std::max(m, std::abs(k));
            }
            return m;
        },
        p, opts);
}

NormValue sp_norm_range(const BinomialLattice& lat, const LatticeProcess& x, int first, int last,
                        double p, const PathwiseOptions& opts) {
    if (first < 0 || last > x.last_step() || first > last)
        throw std::invalid_argument("sp_norm_range: bad step range");
    return pathwise_p_mean(
        lat, first, last,
        [&](std::span<const int> nodes) { return sup_abs_along(x, first, nodes, last - first); },
        p, opts);
}

NormValue hp_norm_range(const BinomialLattice& lat, const LatticeProcess& z, int first, int last,
                        double p, const PathwiseOptions& opts) {
    if (first < 0 || last - 1 > z.last_step() || first >= last)
        throw std::invalid_argument("hp_norm_range: bad step range");
    const double h = lat.dt();
    if (p == 2.0 && opts.force != PathMethod::Sampled) {
        double acc = 0.0;
        for (int i = first; i < last; ++i)
            acc += h * lat.expect_slice(i, z.slice(i).array().square().matrix());
        return NormValue{std::sqrt(acc), PathMethod::ExactEnumeration, std::nullopt};
    }
    return pathwise_p_mean(
        lat, first, last,
        [&](std::span<const int> nodes) {
            double q = 0.0;
            for (int k = 0; k < last - first; ++k) {
                const double v = z(first + k, nodes[k]);
                q += v * v * h;
            }
            return std::sqrt(q);
        },
        p, opts);
}

double d_norm(const BinomialLattice& lat, const LatticeProcess& y) {
    const int n = y.last_step();
    Eigen::VectorXd snell = y.slice(n).cwiseAbs();
    for (int i = n - 1; i >= 0; --i)
        snell = y.slice(i).cwiseAbs().cwiseMax(cond_expect(snell));
    return snell[0];
}

NormReport norm_report(const BinomialLattice& lat, const SolutionTriple& triple, double p,
                       const std::vector<double>& betas, const PathwiseOptions& opts) {
    NormReport rep;
    rep.sp = sp_norm(lat, triple.y, p, opts);
    rep.hp = hp_norm(lat, triple.z, p, opts);
    rep.class_d = d_norm(lat, triple.y);
    for (double b : betas) rep.beta_sp.emplace_back(b, sp_norm(lat, triple.y, b, opts));
    return rep;
}

EstimateId estimate_id_from_string(const std::string& s) {
    if (s == "P2.1") return EstimateId::P21;
    if (s == "P3.1") return EstimateId::P31;
    if (s == "P4.2") return EstimateId::P42;
    if (s == "P4.3") return EstimateId::P43;
    if (s == "P5.1i") return EstimateId::P51i;
    if (s == "P5.1ii") return EstimateId::P51ii;
    throw std::invalid_argument("unknown estimate id '" + s + "'");
}

std::string to_string(EstimateId id) {
    switch (id) {
        case EstimateId::P21: return "P2.1";
        case EstimateId::P31: return "P3.1";
        case EstimateId::P42: return "P4.2";
        case EstimateId::P43: return "P4.3";
        case EstimateId::P51i: return "P5.1i";
        case EstimateId::P51ii: return "P5.1ii";
    }
    return "?";
}

std::vector<EstimateId> all_estimate_ids() {
    return {EstimateId::P21,  EstimateId::P31,  EstimateId::P42,
            EstimateId::P43,  EstimateId::P51i, EstimateId::P51ii};
}

StoppingRule StoppingRule::horizon() {
    return {"T", [](int, double) { return false; }};
}
StoppingRule StoppingRule::hit_above(double c) {
    return {"hit(W>=" + std::to_string(c) + ")", [c](int, double w) { return w >= c; }};
}
StoppingRule StoppingRule::hit_below(double c) {
    return {"hit(W<=" + std::to_string(c) + ")", [c](int, double w) { return w <= c; }};
}
StoppingRule StoppingRule::hit_abs(double c) {
    return {"hit(|W|>=" + std::to_string(c) + ")",
            [c](int, double w) { return std::abs(w) >= c; }};
}

EstimateReport check_estimate(EstimateId id, const Problem& pb, const SolutionTriple& triple,
                              const StoppingRule& tau, double exponent,
                              const PathwiseOptions& opts) {
    const BinomialLattice& lat = pb.lattice();
    const int n = lat.steps();
    if (triple.y.last_step() != n)
        throw std::invalid_argument("check_estimate: triple does not match the problem lattice");
    const bool stop_at_horizon =
        id == EstimateId::P31 || id == EstimateId::P43 || id == EstimateId::P51i ||
        id == EstimateId::P51ii;
    const StoppingRule rule = stop_at_horizon ? StoppingRule::horizon() : tau;
    const double e = exponent;
    if (!(e > 0.0)) throw std::invalid_argument("check_estimate: exponent must be positive");
    const double h = lat.dt();
    const Generator& f = pb.generator();

    // Accumulated path moments (shared single pass).
    double zq = 0, kp = 0, ys = 0, ls = 0, fi = 0, xip = 0, raw = 0, fint_raw = 0;
    auto per_path = [&](std::span<const int> nodes, double w) {
        int stop = n;
        for (int i = 0; i <= n; ++i)
            if (rule.stop_when(i, lat.node_value(i, nodes[i]))) {
                stop = i;
                break;
            }
        double a = 0, k = 0, ymax = 0, lmax = 0, fint = 0;
        for (int i = 0; i <= stop; ++i) {
            ymax = std::max(ymax, std::abs(triple.y(i, nodes[i])));
            lmax = std::max(lmax, std::max(pb.obstacle_at(i, nodes[i]), 0.0));
            if (i < stop) {
                a += triple.z(i, nodes[i]) * triple.z(i, nodes[i]) * h;
                k += triple.dk(i, nodes[i]);
                fint += h * std::abs(f(lat.t(i), lmax, 0.0));
            }
        }
        const double xiabs = std::abs(pb.terminal()[nodes[n]]);
        zq += w * std::pow(a, e / 2.0);
        kp += w * std::pow(k, e);
        ys += w * std::pow(ymax, e);
        ls += w * std::pow(lmax, e);
        fi += w * std::pow(fint, e);
        xip += w * std::pow(xiabs, e);
        raw += w * (xiabs + lmax + fint);
        fint_raw += w * fint;
    };

    EstimateReport rep;
    rep.id = id;
    rep.exponent = e;
    rep.tau_name = rule.name;
    if (n <= opts.enum_cap) {
        enumerate_paths(lat, per_path, opts.enum_cap);
        rep.method = PathMethod::ExactEnumeration;
    } else {
        const double w = 1.0 / double(opts.sample_count);
        sample_paths(lat, opts.sample_count, opts.seed,
                     [&](std::span<const int> nodes) { per_path(nodes, w); });
        rep.method = PathMethod::Sampled;
    }

    switch (id) {
        case EstimateId::P21:
        case EstimateId::P42:
            rep.lhs = zq + kp;
            rep.rhs = ys + ls + fi;
            rep.rhs_base_term = ys + ls;
            rep.rhs_f_term = fi;
            break;
        case EstimateId::P31:
            rep.lhs = ys;
            rep.rhs = xip + ls + fi;
            rep.rhs_base_term = xip + ls;
            rep.rhs_f_term = fi;
            break;
        case EstimateId::P43:
            rep.lhs = ys + zq + kp;
            rep.rhs = xip + ls + fi;
            rep.rhs_base_term = xip + ls;
            rep.rhs_f_term = fi;
            break;
        case EstimateId::P51i:
            rep.lhs = d_norm(lat, triple.y);
            rep.rhs = raw;
            rep.rhs_base_term = raw - fint_raw;
            rep.rhs_f_term = fint_raw;
            break;
        case EstimateId::P51ii:
            rep.lhs = ys + zq + kp;
            rep.rhs = std::pow(raw, e);
            rep.rhs_base_term = raw - fint_raw;
            rep.rhs_f_term = fint_raw;
            break;
    }
    rep.ratio = rep.lhs == 0.0 ? 0.0 : rep.lhs / rep.rhs;
    return rep;
}

TanakaReport tanaka_check(std::span<const double> path, double a, const TestFunction& fn,
                          int grid_levels) {
    const int n = int(path.size()) - 1;
    if (n < 1) throw std::invalid_argument("tanaka_check: path needs at least two points");
    if (!fn.gpp) throw std::invalid_argument("tanaka_check: second derivative required");
    auto sgn = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };

    // increments in the algebraically reduced form, exactly nonnegative:
    // |x1-a| - |x0-a| - sgn(x0-a)(x1-x0) collapses branchwise
    auto local_time = [&](double level, double& min_inc) {
        double lt = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x0 = path[i], x1 = path[i + 1];
            double inc;
            if (x0 > level)
                inc = x1 >= level ? 0.0 : 2.0 * (level - x1);
            else if (x0 < level)
                inc = x1 <= level ? 0.0 : 2.0 * (x1 - level);
            else
                inc = std::abs(x1 - level);
            min_inc = std::min(min_inc, inc);
            lt += inc;
        }
        return lt;
    };

    TanakaReport rep;
    rep.level = a;
    rep.min_increment = 0.0;
    rep.local_time_terminal = local_time(a, rep.min_increment);
    double stoch = 0.0;
    for (int i = 0; i < n; ++i) stoch += sgn(path[i] - a) * (path[i + 1] - path[i]);
    rep.identity_residual = std::abs(std::abs(path[n] - a) - std::abs(path[0] - a) - stoch -
                                     rep.local_time_terminal);

    const int levels = grid_levels > 0 ? grid_levels : 4 * n;
    rep.grid_levels = levels;
    const double lo = *std::min_element(path.begin(), path.end());
    const double hi = *std::max_element(path.begin(), path.end());
    const double da = (hi - lo) / levels;
    double occ = 0.0;
    for (int k = 0; k < levels; ++k) {
        const double level = lo + (k + 0.5) * da;
        double unused = 0.0;
        occ += local_time(level, unused) * fn.gpp(level) * da;
    }
    double qv = 0.0;
    for (int i = 0; i < n; ++i)
        qv += fn.gpp(path[i]) * (path[i + 1] - path[i]) * (path[i + 1] - path[i]);
    rep.occupation_residual = std::abs(occ - qv);
    rep.occupation_scale = qv;
    return rep;
}

ComparisonReport compare_solutions(const SolutionTriple& a, const SolutionTriple& b,
                                   ComparisonRelation relation) {
    ComparisonReport rep;
    if (relation == ComparisonRelation::YLessEqual) {
        if (a.y.last_step() != b.y.last_step())
            throw std::invalid_argument("compare_solutions: lattice mismatch");
        for (int i = 0; i <= a.y.last_step(); ++i)
            for (int j = 0; j <= i; ++j) {
                const double v = a.y(i, j) - b.y(i, j);
                if (v > rep.max_violation) {
                    rep.max_violation = v;
                    rep.worst_step = i;
                    rep.worst_node = j;
                }
            }
    } else {
        if (a.dk.last_step() != b.dk.last_step())
            throw std::invalid_argument("compare_solutions: lattice mismatch");
        for (int i = 0; i <= a.dk.last_step(); ++i)
            for (int j = 0; j <= i; ++j) {
                const double v = b.dk(i, j) - a.dk(i, j);
                if (v > rep.max_violation) {
                    rep.max_violation = v;
                    rep.worst_step = i;
                    rep.worst_node = j;
                }
            }
    }
    return rep;
}

namespace {

StabilityReport stability_core(const Problem& pb, const SolutionTriple& a,
                               const LatticeProcess& va, const SolutionTriple& b,
                               const LatticeProcess& vb, int first, int last, bool boundary_term,
                               bool common_y, double p, const PathwiseOptions& opts) {
    const BinomialLattice& lat = pb.lattice();
    const double h = lat.dt();
    const Generator& f = pb.generator();

    const NormValue sy = pathwise_p_mean(
        lat, first, last,
        [&](std::span<const int> nodes) {
            double m = 0.0;
            for (int k = 0; k <= last - first; ++k) {
                const int i = first + k;
                m = std::max(m, std::abs(a.y(i, nodes[k]) - b.y(i, nodes[k])));
            }
            return m;
        },
        p, opts);
    const NormValue hz = pathwise_p_mean(
        lat, first, last,
        [&](std::span<const int> nodes) {
            double q = 0.0;
            for (int k = 0; k < last - first; ++k) {
                const int i = first + k;
                const double d = a.z(i, nodes[k]) - b.z(i, nodes[k]);
                q += d * d * h;
            }
            return std::sqrt(q);
        },
        p, opts);
    const NormValue fdiff = pathwise_p_mean(
        lat, first, last,
        [&](std::span<const int> nodes) {
            double s = 0.0;
            for (int k = 0; k < last - first; ++k) {
                const int i = first + k;
                const int j = nodes[k];
                const double t = lat.t(i);
                const double ya = a.y(i, j);
                const double yb = common_y ? ya : b.y(i, j);
                s += h * std::abs(f(t, ya, va(i, j)) - f(t, yb, vb(i, j)));
            }
            return s;
        },
        p, opts);

    StabilityReport rep;
    rep.lhs = sy.value + hz.value;
    rep.rhs = fdiff.value;
    if (boundary_term) {
        const Eigen::VectorXd dyq = (a.y.slice(last) - b.y.slice(last)).cwiseAbs();
        rep.rhs += std::pow(lat.expect_slice(last, dyq.array().pow(p).matrix()), 1.0 / p);
    }
    rep.ratio = rep.lhs == 0.0 ? 0.0 : rep.lhs / rep.rhs;
    return rep;
}

}  // namespace

StabilityReport zfrozen_stability(const Problem& pb, const SolutionTriple& a,
                                  const LatticeProcess& va, const SolutionTriple& b,
                                  const LatticeProcess& vb, double p,
                                  const PathwiseOptions& opts) {
    return stability_core(pb, a, va, b, vb, 0, pb.lattice().steps(), false, false, p, opts);
}

StabilityReport zfrozen_stability_interval(const Problem& pb, const SolutionTriple& a,
                                           const LatticeProcess& va, const SolutionTriple& b,
                                           const LatticeProcess& vb, int first, int last, double p,
                                           const PathwiseOptions& opts) {
    if (first < 0 || last > pb.lattice().steps() || first >= last)
        throw std::invalid_argument("zfrozen_stability_interval: bad step range");
    return stability_core(pb, a, va, b, vb, first, last, true, true, p, opts);
}

}  // namespace rbsde
