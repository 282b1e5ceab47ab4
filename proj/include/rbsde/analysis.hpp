#pragma once

#include "rbsde/reflect.hpp"

#include <span>
#include <string>

namespace rbsde {

std::string method_name(PathMethod m);

struct NormValue {
    double value = 0.0;
    PathMethod method = PathMethod::ExactEnumeration;
    std::optional<double> std_error;  // sampled entries only
};

/// S^p norm E[(max_i |X_i|)^p]^{1/p}. Enumerates exactly when the horizon is
/// within the cap, samples otherwise.
NormValue sp_norm(const BinomialLattice& lat, const LatticeProcess& x, double p,
                  const PathwiseOptions& opts = {});

/// S^p via the exact running-max augmentation; abs_node_fn must be the
/// time-independent nonnegative node representation of |X|.
NormValue sp_norm_augmented(const BinomialLattice& lat,
                            const std::function<double(double)>& abs_node_fn, double p);

/// H^p norm E[(sum_i Z_i^2 h)^{p/2}]^{1/p}; slicewise exact when p = 2.
NormValue hp_norm(const BinomialLattice& lat, const LatticeProcess& z, double p,
                  const PathwiseOptions& opts = {});

/// S^p norm of the cumulative process K_t = sum_{i<t} dk_i:
/// E[(max_i |K_i|)^p]^{1/p} over lattice paths.
NormValue ksup_norm(const BinomialLattice& lat, const LatticeProcess& dk, double p,
                    const PathwiseOptions& opts = {});

/// Range-restricted variants over steps [first, last] (H^p integrates over
/// [first, last)); used by the block Picard loop and sub-interval checks.
NormValue sp_norm_range(const BinomialLattice& lat, const LatticeProcess& x, int first, int last,
                        double p, const PathwiseOptions& opts = {});
NormValue hp_norm_range(const BinomialLattice& lat, const LatticeProcess& z, int first, int last,
                        double p, const PathwiseOptions& opts = {});

/// Class-D norm sup{E|Y_sigma|}: the initial value of the Snell envelope of
/// |Y|, computed exactly by backward dynamic programming.
double d_norm(const BinomialLattice& lat, const LatticeProcess& y);

struct NormReport {
    NormValue sp;
    NormValue hp;
    double class_d = 0.0;
    std::vector<std::pair<double, NormValue>> beta_sp;  // (beta, S^beta of Y)
};

NormReport norm_report(const BinomialLattice& lat, const SolutionTriple& triple, double p,
                       const std::vector<double>& betas, const PathwiseOptions& opts = {});

enum class EstimateId { P21, P31, P42, P43, P51i, P51ii };

EstimateId estimate_id_from_string(const std::string& s);
std::string to_string(EstimateId id);
std::vector<EstimateId> all_estimate_ids();

/// Adapted stopping rule: tau = first step where the predicate fires, else N.
struct StoppingRule {
    std::string name;
    std::function<bool(int, double)> stop_when;  // (step, node W-value)

    static StoppingRule horizon();
    static StoppingRule hit_above(double threshold);
    static StoppingRule hit_below(double threshold);
    static StoppingRule hit_abs(double threshold);
};

struct EstimateReport {
    EstimateId id = EstimateId::P21;
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
    double exponent = 0.0;       // p, or beta for P51ii
    double rhs_base_term = 0.0;  // data moments without the driver integral
    double rhs_f_term = 0.0;     // the int |f(s, L^{+,*}, 0)| ds moment
    std::string tau_name;
    PathMethod method = PathMethod::ExactEnumeration;
};

/// LHS/RHS of the a priori estimate `id` for the given triple, with the
/// pathwise running-max and stopped terms taken over the exact lattice
/// measure (enumerated) or sampled beyond the cap. ratio = lhs/rhs, 0 when
/// both sides vanish.
EstimateReport check_estimate(EstimateId id, const Problem& problem, const SolutionTriple& triple,
                              const StoppingRule& tau, double exponent,
                              const PathwiseOptions& opts = {});

struct TestFunction {
    std::function<double(double)> g;
    std::function<double(double)> gpp;  // second derivative
};

struct TanakaReport {
    double level = 0.0;                // a
    double local_time_terminal = 0.0;  // discrete symmetric local time at T
    double min_increment = 0.0;        // smallest one-step local-time increment
    double identity_residual = 0.0;    // |X_T-a| - |X_0-a| - sum sgn dX - L_T
    double occupation_residual = 0.0;  // |sum_a L_T(a) g''(a) da - sum_i g''(X_i) d[X]_i|
    double occupation_scale = 0.0;     // sum_i g''(X_i) d[X]_i
    int grid_levels = 0;
};

/// Discrete Tanaka identity on a single lattice path with sgn(0) = 0, plus
/// the occupation-formula residual over a uniform level grid (4N levels by
/// default) spanning the path range.
TanakaReport tanaka_check(std::span<const double> path, double a, const TestFunction& fn,
                          int grid_levels = 0);

enum class ComparisonRelation { YLessEqual, DkGreaterEqual };

struct ComparisonReport {
    double max_violation = 0.0;
    int worst_step = -1;
    int worst_node = -1;
};

/// Nodewise violation of Y_A <= Y_B (or dK_A >= dK_B) with the worst node.
ComparisonReport compare_solutions(const SolutionTriple& a, const SolutionTriple& b,
                                   ComparisonRelation relation);

struct StabilityReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
};

/// Discrete form of the z-frozen stability bound:
/// ||Y-Y'||_{S^p} + ||Z-Z'||_{H^p} vs ||int |f(s,Y,V) - f(s,Y',V')| ds||_p.
StabilityReport zfrozen_stability(const Problem& problem, const SolutionTriple& a,
                                  const LatticeProcess& va, const SolutionTriple& b,
                                  const LatticeProcess& vb, double p,
                                  const PathwiseOptions& opts = {});

/// Sub-interval variant on steps [first, last]: the right-hand side gains the
/// boundary term ||Y_last - Y'_last||_p and the f-difference is taken at the
/// common Y.
StabilityReport zfrozen_stability_interval(const Problem& problem, const SolutionTriple& a,
                                           const LatticeProcess& va, const SolutionTriple& b,
                                           const LatticeProcess& vb, int first, int last, double p,
                                           const PathwiseOptions& opts = {});

}  // namespace rbsde
