#pragma once

#include "rbsde/analysis.hpp"

namespace rbsde {

struct PicardConfig {
    double p = 2.0;           // > 1; alpha * p < 1 required when H5 is declared
    double chat = 1.0;        // empirical stability constant for the block mesh
    int max_sweeps = 50;
    double stop_tol = 1e-10;  // on the successive H^p distance per block
    std::optional<std::vector<int>> blocks;  // explicit boundaries (step indices)
    PathwiseOptions norms;
    StepConfig step;
};

struct SweepRecord {
    int block = 0;       // index into the boundary list, 0 = earliest in time
    int sweep = 0;       // 1-based within the block
    double hp_diff = 0;  // H^p distance of successive Z on the block
    double sp_diff = 0;  // S^p distance of successive Y on the block
    double ratio = 0;    // hp_diff / previous hp_diff (0 for the first sweep)
};

struct PicardTrace {
    std::vector<SweepRecord> records;
    std::vector<int> block_boundaries;
    int total_sweeps = 0;
};

/// Uniform block boundaries snapped to grid steps with mesh
/// delta = min(T, (2 chat lambda)^-2); the whole grid when lambda = 0.
/// Throws if delta is below one grid step.
std::vector<int> block_schedule(const TimeGrid& grid, double lambda, double chat);

/// Projected reflected solve with the generator's z-argument frozen at the
/// exogenous process v. The output Z is still the extracted martingale
/// component of the solution.
SolutionTriple solve_z_frozen(const Problem& problem, const LatticeProcess& v,
                              const StepConfig& cfg = {});

/// Block Picard construction: blocks processed backward in time; within each
/// block the z-argument is frozen at the previous sweep's Z (first sweep
/// freezes at 0) until the successive H^p distance drops below stop_tol.
/// Earlier blocks take the later block's initial-time Y as terminal data and
/// the pushing increments concatenate.
std::pair<SolutionTriple, PicardTrace> picard_solve(const Problem& problem,
                                                    const PicardConfig& cfg = {});

}  // namespace rbsde
