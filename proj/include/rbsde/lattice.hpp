#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace rbsde {

/// Uniform partition of [0, T] into N steps of size dt = T/N.
struct TimeGrid {
    double horizon;
    int steps;
    double dt;

    TimeGrid(double T, int N);

    double t(int i) const { return i * dt; }
};

/// Recombining binomial model of a 1-d Brownian motion: increments +-sqrt(dt)
/// with probability 1/2 each. Node (i, j), j in {0..i}, carries W-value
/// (2j - i) * sqrt(dt). Slice probabilities are binomial(i, 1/2), carried
/// exactly through a long-double Pascal recurrence.
class BinomialLattice {
public:
    BinomialLattice(double T, int N);

    const TimeGrid& grid() const { return grid_; }
    int steps() const { return grid_.steps; }
    double dt() const { return grid_.dt; }
    double sqrt_dt() const { return sqrt_dt_; }
    double t(int i) const { return grid_.t(i); }

    double node_value(int i, int j) const { return (2 * j - i) * sqrt_dt_; }

    /// Binomial(i, 1/2) probabilities of the i-th slice (i+1 entries).
    const Eigen::VectorXd& prob_slice(int i) const;

    /// Exact expectation of a slice of node values under the lattice measure.
    double expect_slice(int i, const Eigen::Ref<const Eigen::VectorXd>& values) const;

private:
    TimeGrid grid_;
    double sqrt_dt_;
    std::vector<Eigen::VectorXd> probs_;
};

BinomialLattice build_lattice(double T, int N);

/// One real value per lattice node, slices 0..last_step (slice i has i+1
/// entries). Flat Eigen storage; slices are contiguous segments.
class LatticeProcess {
public:
    LatticeProcess() = default;
    explicit LatticeProcess(int last_step);

    int last_step() const { return last_step_; }

    Eigen::Ref<Eigen::VectorXd> slice(int i);
    Eigen::Ref<const Eigen::VectorXd> slice(int i) const;

    double& operator()(int i, int j) { return values_[offset(i) + j]; }
    double operator()(int i, int j) const { return values_[offset(i) + j]; }

    Eigen::VectorXd& raw() { return values_; }
    const Eigen::VectorXd& raw() const { return values_; }

    /// Tabulates fn(t_i, W(i,j)) on slices 0..last_step.
    static LatticeProcess tabulate(const BinomialLattice& lat, int last_step,
                                   const std::function<double(double, double)>& fn);

private:
    static std::ptrdiff_t offset(int i) { return std::ptrdiff_t(i) * (i + 1) / 2; }

    int last_step_ = -1;
    Eigen::VectorXd values_;
};

/// One-step conditional expectation: slice at step i+1 (n+1 entries) down to
/// step i (n entries). value(i,j) = (X(i+1,j+1) + X(i+1,j)) / 2.
Eigen::VectorXd cond_expect(const Eigen::Ref<const Eigen::VectorXd>& next);

/// Process overload with range checking against the process extent.
Eigen::VectorXd cond_expect(const LatticeProcess& x, int i);

inline constexpr int kDefaultEnumCap = 20;

/// Visits every lattice path restricted to steps [first, last]. nodes[k] is
/// the j-index at step first+k; weight = prob_slice(first)[nodes[0]] * 2^-(last-first).
/// Weights over all visits sum to 1 exactly. Throws if last-first exceeds cap.
void for_each_path(const BinomialLattice& lat, int first, int last,
                   const std::function<void(std::span<const int>, double)>& visit,
                   int cap = kDefaultEnumCap);

/// Full-horizon enumeration, 2^N paths.
void enumerate_paths(const BinomialLattice& lat,
                     const std::function<void(std::span<const int>, double)>& visit,
                     int cap = kDefaultEnumCap);

/// Exact expectation of a path functional over steps [first, last].
double expect_path_functional(const BinomialLattice& lat, int first, int last,
                              const std::function<double(std::span<const int>)>& fn,
                              int cap = kDefaultEnumCap);

/// Deterministic i.i.d. lattice paths from step 0; bit-identical for a fixed
/// seed (raw engine bits drive the coin flips, no distribution adapters).
void sample_paths(const BinomialLattice& lat, std::size_t count, std::uint64_t seed,
                  const std::function<void(std::span<const int>)>& visit);

struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t count = 0;
};

MeanEstimate sample_functional_mean(const BinomialLattice& lat, std::size_t count,
                                    std::uint64_t seed,
                                    const std::function<double(std::span<const int>)>& fn);

enum class NodeMonotonicity { Increasing, Decreasing, None };

/// Joint law of (node, running max of a per-node functional g). States are
/// deduplicated by (node, max value); the max value set is the g-image of the
/// visited node levels, so the state count at step i is O(i^2).
class AugmentedLattice {
public:
    struct State {
        int node;
        double running_max;
        double prob;
    };

    int steps() const { return int(states_.size()) - 1; }
    const std::vector<State>& states(int i) const { return states_.at(i); }

    /// Node marginal at step i; must match the base lattice probabilities.
    Eigen::VectorXd marginal(int i) const;

    /// Distribution of the running max at step i as sorted (value, prob) pairs.
    std::vector<std::pair<double, double>> max_distribution(int i) const;

    /// E[fn(running max at step i)].
    double expect_of_max(int i, const std::function<double(double)>& fn) const;

private:
    friend AugmentedLattice augment_running_max(const BinomialLattice&,
                                                const std::function<double(double)>&,
                                                NodeMonotonicity);
    std::vector<std::vector<State>> states_;
};

/// Builds the exact joint law of (W-node, max_{s<=i} g(W_s)). A declared
/// monotonicity is validated on every reachable level; violations throw.
AugmentedLattice augment_running_max(const BinomialLattice& lat,
                                     const std::function<double(double)>& g,
                                     NodeMonotonicity declared = NodeMonotonicity::None);

}  // namespace rbsde
