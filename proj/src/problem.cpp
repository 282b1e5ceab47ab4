#include "rbsde/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace rbsde {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Raw engine bits -> [0,1); keeps probe streams bit-identical everywhere.
double uniform01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

double uniform_in(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

}  // namespace

Generator::Generator(std::function<double(double, double, double)> fn, double mu, double lambda,
                     bool depends_on_z, std::optional<H5Params> h5)
    : fn_(std::move(fn)), mu_(mu), lambda_(lambda), depends_on_z_(depends_on_z), h5_(std::move(h5)) {
    if (!fn_) throw std::invalid_argument("Generator: evaluation function required");
    if (lambda_ < 0.0) throw std::invalid_argument("Generator: lambda must be >= 0");
    if (h5_) {
        if (h5_->gamma < 0.0) throw std::invalid_argument("Generator: H5 gamma must be >= 0");
        if (!(h5_->alpha > 0.0 && h5_->alpha < 1.0))
            throw std::invalid_argument("Generator: H5 alpha must lie in (0,1)");
        if (!h5_->g) throw std::invalid_argument("Generator: H5 g required");
    }
}

Obstacle Obstacle::none() { return Obstacle(); }

Obstacle Obstacle::constant(double c) {
    Obstacle o;
    o.kind_ = ObstacleKind::Constant;
    o.constant_ = c;
    return o;
}

Obstacle Obstacle::deterministic(std::function<double(double)> of_time) {
    if (!of_time) throw std::invalid_argument("Obstacle: time function required");
    Obstacle o;
    o.kind_ = ObstacleKind::DeterministicTime;
    o.of_time_ = std::move(of_time);
    return o;
}

Obstacle Obstacle::node_value(std::function<double(double)> of_node, NodeMonotonicity monotone) {
    if (!of_node) throw std::invalid_argument("Obstacle: node function required");
    Obstacle o;
    o.kind_ = ObstacleKind::NodeValue;
    o.of_node_ = std::move(of_node);
    o.monotone_ = monotone;
    return o;
}

Obstacle Obstacle::time_node(std::function<double(double, double)> of_time_node) {
    if (!of_time_node) throw std::invalid_argument("Obstacle: time-node function required");
    Obstacle o;
    o.kind_ = ObstacleKind::TimeNode;
    o.of_time_node_ = std::move(of_time_node);
    return o;
}

double Obstacle::value(double t, double w) const {
    switch (kind_) {
        case ObstacleKind::NegInfinity: return kNegInf;
        case ObstacleKind::Constant: return constant_;
        case ObstacleKind::DeterministicTime: return of_time_(t);
        case ObstacleKind::NodeValue: return of_node_(w);
        case ObstacleKind::TimeNode: return of_time_node_(t, w);
    }
    return kNegInf;
}

Problem::Problem(std::shared_ptr<const BinomialLattice> lattice, Eigen::VectorXd xi, Generator gen,
                 Obstacle obstacle, double p)
    : lattice_(std::move(lattice)), xi_(std::move(xi)), gen_(std::move(gen)),
      obstacle_(std::move(obstacle)), p_(p) {
    if (!lattice_) throw std::invalid_argument("Problem: lattice required");
    const int n = lattice_->steps();
    if (xi_.size() != n + 1)
        throw std::invalid_argument("Problem: terminal data size must match the lattice");
    if (!(p_ >= 1.0 && p_ <= 2.0)) throw std::invalid_argument("Problem: p must lie in [1,2]");
    if (obstacle_.finite()) {
        const double T = lattice_->grid().horizon;
        for (int j = 0; j <= n; ++j) {
            if (obstacle_.value(T, lattice_->node_value(n, j)) > xi_[j])
                throw std::invalid_argument("Problem: obstacle exceeds terminal data at node " +
                                            std::to_string(j));
        }
    }
}

double Problem::obstacle_at(int i, int j) const {
    return obstacle_.value(lattice_->t(i), lattice_->node_value(i, j));
}

Eigen::VectorXd Problem::obstacle_slice(int i) const {
    Eigen::VectorXd out(i + 1);
    for (int j = 0; j <= i; ++j) out[j] = obstacle_at(i, j);
    return out;
}

namespace {

// E[(running max of L^+ up to `upto`)^p] and E[(sum_i h |f(t_i, M_i, 0)|)^p]
// in one pass; exact when the obstacle is deterministic or the lattice is
// enumerable, sampled otherwise.
struct ObstacleMoments {
    double h4a = 0.0;
    double h4b = 0.0;
    std::string method;
};

ObstacleMoments obstacle_moments(const Problem& pb, const ProbeConfig& cfg, std::uint64_t seed) {
    const BinomialLattice& lat = pb.lattice();
    const int n = lat.steps();
    const double h = lat.dt();
    const double p = pb.p();
    const Generator& f = pb.generator();
    ObstacleMoments out;

    const ObstacleKind kind = pb.obstacle().kind();
    if (kind == ObstacleKind::NegInfinity || kind == ObstacleKind::Constant ||
        kind == ObstacleKind::DeterministicTime) {
        // L^{+,*} is deterministic; both moments collapse to plain values.
        double m = 0.0, fint = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double l = kind == ObstacleKind::NegInfinity ? 0.0
                                                               : std::max(pb.obstacle_at(i, 0), 0.0);
            m = std::max(m, l);
            if (i < n) fint += h * std::abs(f(lat.t(i), m, 0.0));
        }
        out.h4a = std::pow(m, p);
        out.h4b = std::pow(fint, p);
        out.method = "exact";
        return out;
    }

    auto functional = [&](std::span<const int> nodes, double& a, double& b) {
        double m = 0.0, fint = 0.0;
        for (int i = 0; i <= n; ++i) {
            m = std::max(m, std::max(pb.obstacle_at(i, nodes[i]), 0.0));
            if (i < n) fint += h * std::abs(f(lat.t(i), m, 0.0));
        }
        a = std::pow(m, p);
        b = std::pow(fint, p);
    };

    if (n <= cfg.enum_cap) {
        double ea = 0.0, eb = 0.0;
        enumerate_paths(lat, [&](std::span<const int> nodes, double w) {
            double a, b;
            functional(nodes, a, b);
            ea += w * a;
            eb += w * b;
        });
        out.h4a = ea;
        out.h4b = eb;
        out.method = "exact-enumeration";
    } else {
        double sa = 0.0, sb = 0.0;
        std::size_t cnt = 0;
        sample_paths(lat, cfg.sample_count, seed, [&](std::span<const int> nodes) {
            double a, b;
            functional(nodes, a, b);
            sa += a;
            sb += b;
            ++cnt;
        });
        out.h4a = sa / double(cnt);
        out.h4b = sb / double(cnt);
        out.method = "sampled";
    }
    return out;
}

}  // namespace

AssumptionReport validate_assumptions(const Problem& pb, int probes, std::uint64_t seed,
                                      const ProbeConfig& cfg) {
    if (probes < 1) throw std::invalid_argument("validate_assumptions: probes must be >= 1");
    const BinomialLattice& lat = pb.lattice();
    const Generator& f = pb.generator();
    const double T = lat.grid().horizon;
    const double R = cfg.box_radius;
    std::mt19937_64 rng(seed);

    AssumptionReport rep;
    rep.h1.method = rep.h2.method = rep.h3b.method = "probe";

    for (int k = 0; k < probes; ++k) {
        const double t = uniform_in(rng, 0.0, T);
        const double y = uniform_in(rng, -R, R);
        const double y2 = uniform_in(rng, -R, R);
        const double z = uniform_in(rng, -R, R);
        const double z2 = uniform_in(rng, -R, R);

        // (H1): |f(t,y,z) - f(t,y,z')| <= lambda |z - z'|
        {
            const double v = std::abs(f(t, y, z) - f(t, y, z2)) -
                             f.lambda() * std::abs(z - z2);
            if (v > rep.h1.max_violation) {
                rep.h1.max_violation = v;
                rep.h1.witness = ProbeWitness{t, y, y, z, z2, v};
            }
        }
        // (H2): (y - y')(f(t,y,z) - f(t,y',z)) <= mu (y - y')^2
        {
            const double dy = y - y2;
            const double v = dy * (f(t, y, z) - f(t, y2, z)) - f.mu() * dy * dy;
            if (v > rep.h2.max_violation) {
                rep.h2.max_violation = v;
                rep.h2.witness = ProbeWitness{t, y, y2, z, z, v};
            }
        }
        // (H3b): continuity in y via a shrinking-increment probe.
        {
            const double d1 = std::abs(f(t, y + 1e-4, z) - f(t, y, z));
            const double d2 = std::abs(f(t, y + 1e-4 / 16.0, z) - f(t, y, z));
            const double v = d2 - (0.5 * d1 + cfg.tol);
            if (v > rep.h3b.max_violation) {
                rep.h3b.max_violation = v;
                rep.h3b.witness = ProbeWitness{t, y, y, z, z, v};
            }
        }
        // (H5) when declared.
        if (f.h5()) {
            if (!rep.h5) {
                rep.h5 = CheckResult{};
                rep.h5->method = "probe";
            }
            const H5Params& p5 = *f.h5();
            const double bound = p5.gamma * std::pow(p5.g(t) + std::abs(y) + std::abs(z), p5.alpha);
            const double v = std::abs(f(t, y, z) - f(t, y, 0.0)) - bound;
            if (v > rep.h5->max_violation) {
                rep.h5->max_violation = v;
                rep.h5->witness = ProbeWitness{t, y, y, z, 0, v};
            }
        }
        // Growth diagnostics (measured only).
        rep.lipschitz_y_slope = std::max(
            rep.lipschitz_y_slope,
            std::abs(y - y2) > 1e-12 ? std::abs(f(t, y, 0.0) - f(t, y2, 0.0)) / std::abs(y - y2)
                                     : 0.0);
        rep.growth_phi_excess = std::max(
            rep.growth_phi_excess, std::abs(f(t, y, 0.0)) - std::abs(f(t, 0.0, 0.0)));
        // If depends_on_z is false, evaluation must ignore z.
        if (!f.depends_on_z()) {
            const double v = std::abs(f(t, y, z) - f(t, y, z2));
            if (v > rep.h1.max_violation + cfg.tol && v > cfg.tol) {
                rep.h1.max_violation = std::max(rep.h1.max_violation, v);
                rep.h1.witness = ProbeWitness{t, y, y, z, z2, v};
            }
        }
    }
    rep.h1.passed = rep.h1.max_violation <= cfg.tol;
    rep.h2.passed = rep.h2.max_violation <= cfg.tol;
    rep.h3b.passed = rep.h3b.max_violation <= 0.0;
    if (rep.h5) rep.h5->passed = rep.h5->max_violation <= cfg.tol;

    const int n = lat.steps();
    const double h = lat.dt();
    // (H3a): E|xi|^p, exact over the terminal slice.
    rep.h3a.method = "exact";
    rep.h3a.magnitude =
        lat.expect_slice(n, pb.terminal().array().abs().pow(pb.p()).matrix());
    // (H3c): (int |f(s,0,0)| ds)^p, deterministic coefficient.
    {
        double fint = 0.0;
        for (int i = 0; i < n; ++i) fint += h * std::abs(f(lat.t(i), 0.0, 0.0));
        rep.h3c.method = "exact";
        rep.h3c.magnitude = std::pow(fint, pb.p());
    }
    // (H3d): int sup_{|y|<=r} |f(s,y,0) - f(s,0,0)| ds over a y-grid.
    {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            double sup = 0.0;
            for (int k = 0; k <= 32; ++k) {
                const double y = -R + 2.0 * R * k / 32.0;
                sup = std::max(sup, std::abs(f(lat.t(i), y, 0.0) - f(lat.t(i), 0.0, 0.0)));
            }
            acc += h * sup;
        }
        rep.h3d.method = "y-grid";
        rep.h3d.magnitude = acc;
    }
    const ObstacleMoments om = obstacle_moments(pb, cfg, seed ^ 0x9e3779b97f4a7c15ull);
    rep.h4a.magnitude = om.h4a;
    rep.h4a.method = om.method;
    rep.h4b.magnitude = om.h4b;
    rep.h4b.method = om.method;
    return rep;
}

Problem exp_shift(const Problem& pb, double a) {
    const double T = pb.lattice().grid().horizon;
    const Generator& f = pb.generator();

    auto base = f;  // capture by value; Generator is copyable
    auto shifted_fn = [base, a](double t, double y, double z) {
        const double e = std::exp(a * t);
        return e * base(t, std::exp(-a * t) * y, std::exp(-a * t) * z) - a * y;
    };
    std::optional<H5Params> h5;
    if (f.h5()) {
        const double c = std::exp(std::abs(a) * T);
        auto g0 = f.h5()->g;
        h5 = H5Params{f.h5()->gamma * c, f.h5()->alpha, [g0, c](double t) { return c * g0(t); }};
    }
    Generator gen(shifted_fn, f.mu() - a, f.lambda(), f.depends_on_z(), std::move(h5));

    Eigen::VectorXd xi = std::exp(a * T) * pb.terminal();

    Obstacle obs = Obstacle::none();
    const Obstacle& L = pb.obstacle();
    switch (L.kind()) {
        case ObstacleKind::NegInfinity: break;
        case ObstacleKind::Constant:
        case ObstacleKind::DeterministicTime:
        case ObstacleKind::NodeValue:
        case ObstacleKind::TimeNode: {
            auto l0 = L;
            obs = Obstacle::time_node(
                [l0, a](double t, double w) { return std::exp(a * t) * l0.value(t, w); });
            break;
        }
    }
    return Problem(pb.lattice_ptr(), std::move(xi), std::move(gen), std::move(obs), pb.p());
}

LatticeProcess scale_by_exp(const LatticeProcess& x, const TimeGrid& grid, double a) {
    LatticeProcess out(x.last_step());
    for (int i = 0; i <= x.last_step(); ++i)
        out.slice(i) = std::exp(a * grid.t(i)) * x.slice(i);
    return out;
}

namespace {

double take(std::map<std::string, double>& params, const std::string& key, double fallback) {
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    const double v = it->second;
    params.erase(it);
    return v;
}

}  // namespace

std::vector<std::string> scenario_names() {
    return {"martingale",      "ode-cubic",    "never-binding",
            "binding-obstacle", "american-put", "monotone-nonlipschitz"};
}

Problem scenario(const std::string& name, int steps, const std::map<std::string, double>& params) {
    std::map<std::string, double> rest = params;
    const double T = take(rest, "T", 1.0);
    const double p = take(rest, "p", 2.0);
    auto lat = std::make_shared<const BinomialLattice>(T, steps);
    const int n = lat->steps();

    auto terminal = [&](const std::function<double(double)>& fn) {
        Eigen::VectorXd xi(n + 1);
        for (int j = 0; j <= n; ++j) xi[j] = fn(lat->node_value(n, j));
        return xi;
    };
    auto finish = [&](Eigen::VectorXd xi, Generator gen, Obstacle obs) {
        if (!rest.empty())
            throw std::invalid_argument("scenario " + name + ": unknown parameter '" +
                                        rest.begin()->first + "'");
        return Problem(lat, std::move(xi), std::move(gen), std::move(obs), p);
    };

    if (name == "martingale") {
        Generator gen([](double, double, double) { return 0.0; }, 0.0, 0.0, false);
        return finish(terminal([](double w) { return w * w; }), std::move(gen), Obstacle::none());
    }
    if (name == "ode-cubic") {
        const double c = take(rest, "c", 1.0);
        Generator gen([](double, double y, double) { return -y * y * y; }, 0.0, 0.0, false);
        return finish(Eigen::VectorXd::Constant(n + 1, c), std::move(gen), Obstacle::none());
    }
    if (name == "never-binding") {
        const double c = take(rest, "c", 0.0);
        Generator gen([](double, double, double) { return 0.0; }, 0.0, 0.0, false);
        return finish(terminal([c](double w) { return c + w * w; }), std::move(gen),
                      Obstacle::constant(c));
    }
    if (name == "binding-obstacle") {
        const double ell0 = take(rest, "ell0", 1.0);
        Generator gen([](double, double, double) { return 0.0; }, 0.0, 0.0, false);
        Obstacle obs = Obstacle::deterministic([ell0, T](double t) { return ell0 * (1.0 - t / T); });
        return finish(Eigen::VectorXd::Zero(n + 1), std::move(gen), std::move(obs));
    }
    if (name == "american-put") {
        const double r = take(rest, "r", 0.05);
        const double sigma = take(rest, "sigma", 0.3);
        const double x0 = take(rest, "x0", 100.0);
        const double strike = take(rest, "strike", 100.0);
        if (!(sigma > 0.0)) throw std::invalid_argument("american-put: sigma must be positive");
        if (!(x0 > 0.0)) throw std::invalid_argument("american-put: x0 must be positive");
        if (strike < 0.0) throw std::invalid_argument("american-put: strike must be >= 0");
        auto payoff = [r, sigma, x0, strike](double t, double w) {
            const double x = x0 * std::exp(sigma * w + (r - 0.5 * sigma * sigma) * t);
            return std::max(strike - x, 0.0);
        };
        Generator gen([r](double, double y, double) { return -r * y; }, -r, 0.0, false);
        Eigen::VectorXd xi(n + 1);
        for (int j = 0; j <= n; ++j) xi[j] = payoff(T, lat->node_value(n, j));
        return finish(std::move(xi), std::move(gen), Obstacle::time_node(payoff));
    }
    if (name == "monotone-nonlipschitz") {
        const double lambda = take(rest, "lambda", 0.2);
        const double ell0 = take(rest, "ell0", 0.5);
        if (lambda < 0.0) throw std::invalid_argument("monotone-nonlipschitz: lambda must be >= 0");
        Generator gen([lambda](double, double y, double z) { return -y * y * y + lambda * z; }, 0.0,
                      lambda, true, H5Params{1.0, 0.5, [](double) { return 1.0; }});
        Obstacle obs = Obstacle::deterministic([ell0, T](double t) { return ell0 * (1.0 - t / T); });
        return finish(terminal([](double w) { return std::max(w, 0.0); }), std::move(gen),
                      std::move(obs));
    }
    throw std::invalid_argument("scenario: unknown name '" + name + "'");
}

LatticeProcess lift_to_lattice(const Problem& pb,
                               const std::function<double(double, double)>& expr) {
    if (!expr) throw std::invalid_argument("lift_to_lattice: expression required");
    return LatticeProcess::tabulate(pb.lattice(), pb.lattice().steps(), expr);
}

}  // namespace rbsde
