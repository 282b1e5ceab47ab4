#pragma once

#include "rbsde/lattice.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

namespace rbsde {

struct H5Params {
    double gamma = 0.0;                     // >= 0
    double alpha = 0.5;                     // in (0, 1)
    std::function<double(double)> g;        // nonnegative time function
};

/// Driver f(t, y, z) with its declared structural constants: mu bounds the
/// one-sided monotonicity in y, lambda the Lipschitz constant in z.
class Generator {
public:
    Generator(std::function<double(double, double, double)> fn, double mu, double lambda,
              bool depends_on_z, std::optional<H5Params> h5 = std::nullopt);

    double operator()(double t, double y, double z) const { return fn_(t, y, z); }
    double mu() const { return mu_; }
    double lambda() const { return lambda_; }
    bool depends_on_z() const { return depends_on_z_; }
    const std::optional<H5Params>& h5() const { return h5_; }

private:
    std::function<double(double, double, double)> fn_;
    double mu_;
    double lambda_;
    bool depends_on_z_;
    std::optional<H5Params> h5_;
};

enum class ObstacleKind { NegInfinity, Constant, DeterministicTime, NodeValue, TimeNode };

/// Lower barrier. NegInfinity is the sentinel that disables reflection.
/// The kind records how much structure is available: deterministic-in-time
/// and time-independent node barriers admit exact running-max shortcuts.
class Obstacle {
public:
    static Obstacle none();
    static Obstacle constant(double c);
    static Obstacle deterministic(std::function<double(double)> of_time);
    static Obstacle node_value(std::function<double(double)> of_node,
                               NodeMonotonicity monotone = NodeMonotonicity::None);
    static Obstacle time_node(std::function<double(double, double)> of_time_node);

    ObstacleKind kind() const { return kind_; }
    bool finite() const { return kind_ != ObstacleKind::NegInfinity; }
    NodeMonotonicity monotonicity() const { return monotone_; }

    /// Barrier level at (t, w); -infinity for the sentinel.
    double value(double t, double w) const;

private:
    Obstacle() = default;
    ObstacleKind kind_ = ObstacleKind::NegInfinity;
    double constant_ = 0.0;
    std::function<double(double)> of_time_;
    std::function<double(double)> of_node_;
    std::function<double(double, double)> of_time_node_;
    NodeMonotonicity monotone_ = NodeMonotonicity::None;
};

/// Full problem statement (xi, f, L) on a lattice, with the integrability
/// exponent p in [1, 2]. Validates L_T <= xi at every terminal node.
class Problem {
public:
    Problem(std::shared_ptr<const BinomialLattice> lattice, Eigen::VectorXd xi, Generator gen,
            Obstacle obstacle, double p);

    const BinomialLattice& lattice() const { return *lattice_; }
    std::shared_ptr<const BinomialLattice> lattice_ptr() const { return lattice_; }
    const Eigen::VectorXd& terminal() const { return xi_; }
    const Generator& generator() const { return gen_; }
    const Obstacle& obstacle() const { return obstacle_; }
    double p() const { return p_; }

    double obstacle_at(int i, int j) const;
    Eigen::VectorXd obstacle_slice(int i) const;

private:
    std::shared_ptr<const BinomialLattice> lattice_;
    Eigen::VectorXd xi_;
    Generator gen_;
    Obstacle obstacle_;
    double p_;
};

struct ProbeConfig {
    double box_radius = 10.0;   // y, z probe box half-width
    double tol = 1e-9;          // slack on exact algebraic identities
    int enum_cap = kDefaultEnumCap;
    std::size_t sample_count = 20000;
};

struct ProbeWitness {
    double t = 0, y = 0, y2 = 0, z = 0, z2 = 0;
    double violation = 0;
};

struct CheckResult {
    bool passed = true;
    double max_violation = 0.0;
    std::optional<ProbeWitness> witness;
    double magnitude = 0.0;     // recorded value for the exact/moment checks
    std::string method;
};

/// Per-assumption probe evidence. Probe checks are diagnostics on a sampled
/// box, not proofs; moment entries are exact on the lattice where the
/// obstacle structure allows and sampled otherwise.
struct AssumptionReport {
    CheckResult h1;     // Lipschitz in z
    CheckResult h2;     // one-sided monotone in y
    CheckResult h3a;    // E|xi|^p (magnitude)
    CheckResult h3b;    // continuity in y (shrinking-increment probe)
    CheckResult h3c;    // E(int |f(s,0,0)| ds)^p (magnitude)
    CheckResult h3d;    // int sup_{|y|<=r} |f(s,y,0)-f(s,0,0)| ds (magnitude)
    CheckResult h4a;    // E(L_T^{+,*})^p (magnitude)
    CheckResult h4b;    // E(int |f(s, L_s^{+,*}, 0)| ds)^p (magnitude)
    std::optional<CheckResult> h5;
    double lipschitz_y_slope = 0.0;   // measured max |df/dy| over probe pairs
    double growth_phi_excess = 0.0;   // measured sup |f(t,y,0)| - |f(t,0,0)| on the box
};

AssumptionReport validate_assumptions(const Problem& problem, int probes, std::uint64_t seed,
                                      const ProbeConfig& cfg = {});

/// The exponential change of variables Y~ = e^{at} Y: transformed data
/// xi~ = e^{aT} xi, L~_t = e^{at} L_t and generator
/// f~(t,y,z) = e^{at} f(t, e^{-at}y, e^{-at}z) - a y, whose monotonicity
/// constant is mu - a.
Problem exp_shift(const Problem& problem, double a);

/// Multiplies slice i by e^{a t_i}; inverse of the shift on Y/Z processes.
LatticeProcess scale_by_exp(const LatticeProcess& x, const TimeGrid& grid, double a);

/// Scenario catalog. Names: martingale, ode-cubic, never-binding,
/// binding-obstacle, american-put, monotone-nonlipschitz. params may override
/// the documented per-scenario defaults plus "T" and "p"; unknown keys throw.
Problem scenario(const std::string& name, int steps,
                 const std::map<std::string, double>& params = {});

std::vector<std::string> scenario_names();

LatticeProcess lift_to_lattice(const Problem& problem,
                               const std::function<double(double, double)>& expr);

}  // namespace rbsde
