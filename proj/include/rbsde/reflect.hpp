#pragma once

#include "rbsde/bsde.hpp"

#include <optional>
#include <vector>

namespace rbsde {

enum class SolveMode { Projected, Penalized };

/// Reflected solution. dk holds the per-step pushing increments; the
/// cumulative process is K_t = sum_{i < t} dk(i, node_i) along each path,
/// so K_0 = 0 and K is nondecreasing pathwise iff dk >= 0 nodewise.
struct SolutionTriple {
    LatticeProcess y;    // steps 0..N
    LatticeProcess z;    // steps 0..N-1
    LatticeProcess dk;   // steps 0..N-1
    SolveMode mode = SolveMode::Projected;
    double penalty_level = 0.0;
};

/// Discrete Snell construction: project the implicit generator step onto the
/// obstacle. Complementarity (Y_i - L_i) * dK_i = 0 holds nodewise exactly.
SolutionTriple solve_projected(const Problem& problem, const StepConfig& cfg = {});

/// Implicit penalized step: solve y - h f(t,y,z) - h n (y - L)^- = yhat.
/// The penalty adds nonnegative slope, so the step is well-posed for any
/// n >= 0; dK(i,j) = n h (Y(i,j) - L(i,j))^- exactly.
SolutionTriple solve_penalized(const Problem& problem, double level, const StepConfig& cfg = {});

struct SkorokhodReport {
    double residual = 0.0;               // E[sum_i (Y_i - L_i) dK_i], exact slicewise
    double max_obstacle_violation = 0.0; // max over nodes of (L - Y)^+
    double expected_k_terminal = 0.0;    // E[K_T], exact slicewise
};

SkorokhodReport skorokhod_report(const SolutionTriple& triple, const Problem& problem);

enum class PathMethod { ExactEnumeration, Augmented, Sampled };

struct PathwiseOptions {
    int enum_cap = kDefaultEnumCap;
    std::size_t sample_count = 20000;
    std::uint64_t seed = 20240901;
    // default: enumerate when the range fits the cap, sample otherwise.
    // Forcing ExactEnumeration beyond the cap is an error.
    std::optional<PathMethod> force;
};

struct SweepLevel {
    double level = 0.0;
    double sp_dist_y = 0.0;
    double hp_dist_z = 0.0;
    double sp_dist_k = 0.0;
    double skorokhod_residual = 0.0;
    double monotonicity_violation = 0.0;  // max over nodes of Y^{prev} - Y^{cur}
    std::string method;
    std::optional<double> sp_dist_y_stderr;  // sampled runs only
    std::optional<double> hp_dist_z_stderr;
    std::optional<double> sp_dist_k_stderr;
};

struct SweepReport {
    std::vector<SweepLevel> levels;
    SolutionTriple reference;
    double p = 2.0;
};

/// Penalization level sweep against the projected reference: S^p/H^p
/// distances, Skorokhod residuals and the nodewise monotonicity of Y^n in n.
SweepReport penalization_sweep(const Problem& problem, const std::vector<double>& levels,
                               const StepConfig& cfg = {}, const PathwiseOptions& paths = {});

namespace detail {

/// Projected backward recursion on steps [first, last] writing into the given
/// processes; terminal is the Y slice at `last`. When v_frozen is non-null
/// the generator's z-argument is read from it instead of the extracted z.
void projected_range(const Problem& problem, const StepConfig& cfg, int first, int last,
                     const Eigen::VectorXd& terminal, const LatticeProcess* v_frozen,
                     LatticeProcess& y, LatticeProcess& z, LatticeProcess& dk);

}  // namespace detail

}  // namespace rbsde
