#include "rbsde/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

namespace rbsde {

TimeGrid::TimeGrid(double T, int N) : horizon(T), steps(N), dt(T / N) {
    if (!(T > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be positive");
    if (N < 1) throw std::invalid_argument("TimeGrid: step count must be >= 1");
}

BinomialLattice::BinomialLattice(double T, int N)
    : grid_(T, N), sqrt_dt_(std::sqrt(T / N)) {
    probs_.reserve(N + 1);
    // Pascal recurrence carried in long double; the slice values are dyadic
    // rationals C(i,j)/2^i and stay exact well past desk-scale depths.
    std::vector<long double> row{1.0L};
    for (int i = 0; i <= N; ++i) {
        Eigen::VectorXd slice(i + 1);
        for (int j = 0; j <= i; ++j) slice[j] = double(row[j]);
        probs_.push_back(std::move(slice));
        if (i == N) break;
        std::vector<long double> next(i + 2, 0.0L);
        for (int j = 0; j <= i; ++j) {
            next[j] += row[j] * 0.5L;
            next[j + 1] += row[j] * 0.5L;
        }
        row = std::move(next);
    }
}

const Eigen::VectorXd& BinomialLattice::prob_slice(int i) const {
    if (i < 0 || i > steps()) throw std::out_of_range("prob_slice: step out of range");
    return probs_[i];
}

double BinomialLattice::expect_slice(int i, const Eigen::Ref<const Eigen::VectorXd>& values) const {
    const Eigen::VectorXd& p = prob_slice(i);
    if (values.size() != p.size())
        throw std::invalid_argument("expect_slice: slice size mismatch");
    return p.dot(values);
}

BinomialLattice build_lattice(double T, int N) { return BinomialLattice(T, N); }

LatticeProcess::LatticeProcess(int last_step) : last_step_(last_step) {
    if (last_step < 0) throw std::invalid_argument("LatticeProcess: last_step must be >= 0");
    values_ = Eigen::VectorXd::Zero(offset(last_step + 1));
}

Eigen::Ref<Eigen::VectorXd> LatticeProcess::slice(int i) {
    if (i < 0 || i > last_step_) throw std::out_of_range("LatticeProcess::slice: step out of range");
    return values_.segment(offset(i), i + 1);
}

Eigen::Ref<const Eigen::VectorXd> LatticeProcess::slice(int i) const {
    if (i < 0 || i > last_step_) throw std::out_of_range("LatticeProcess::slice: step out of range");
    return values_.segment(offset(i), i + 1);
}

LatticeProcess LatticeProcess::tabulate(const BinomialLattice& lat, int last_step,
                                        const std::function<double(double, double)>& fn) {
    LatticeProcess out(last_step);
    for (int i = 0; i <= last_step; ++i) {
        const double t = lat.t(i);
        auto s = out.slice(i);
        for (int j = 0; j <= i; ++j) s[j] = fn(t, lat.node_value(i, j));
    }
    return out;
}

Eigen::VectorXd cond_expect(const Eigen::Ref<const Eigen::VectorXd>& next) {
    const Eigen::Index n = next.size() - 1;
    if (n < 1) throw std::invalid_argument("cond_expect: slice needs at least two entries");
    return 0.5 * (next.segment(1, n) + next.segment(0, n));
}

Eigen::VectorXd cond_expect(const LatticeProcess& x, int i) {
    if (i < 0 || i + 1 > x.last_step())
        throw std::out_of_range("cond_expect: step out of range");
    return cond_expect(x.slice(i + 1));
}

void for_each_path(const BinomialLattice& lat, int first, int last,
                   const std::function<void(std::span<const int>, double)>& visit, int cap) {
    if (first < 0 || last > lat.steps() || first > last)
        throw std::invalid_argument("for_each_path: bad step range");
    const int len = last - first;
    if (len > cap) throw std::invalid_argument("for_each_path: range exceeds enumeration cap");

    const Eigen::VectorXd& p0 = lat.prob_slice(first);
    std::vector<int> nodes(len + 1);
    const double step_w = std::ldexp(1.0, -len);  // 2^-len
    const std::uint64_t total = std::uint64_t(1) << len;
    for (int j0 = 0; j0 <= first; ++j0) {
        const double w = p0[j0] * step_w;
        for (std::uint64_t mask = 0; mask < total; ++mask) {
            nodes[0] = j0;
            for (int k = 0; k < len; ++k)
                nodes[k + 1] = nodes[k] + int((mask >> k) & 1u);
            visit(std::span<const int>(nodes.data(), nodes.size()), w);
        }
    }
}

void enumerate_paths(const BinomialLattice& lat,
                     const std::function<void(std::span<const int>, double)>& visit, int cap) {
    for_each_path(lat, 0, lat.steps(), visit, cap);
}

double expect_path_functional(const BinomialLattice& lat, int first, int last,
                              const std::function<double(std::span<const int>)>& fn, int cap) {
    double acc = 0.0;
    for_each_path(lat, first, last,
                  [&](std::span<const int> nodes, double w) { acc += w * fn(nodes); }, cap);
    return acc;
}

void sample_paths(const BinomialLattice& lat, std::size_t count, std::uint64_t seed,
                  const std::function<void(std::span<const int>)>& visit) {
    if (count < 1) throw std::invalid_argument("sample_paths: count must be >= 1");
    const int n = lat.steps();
    std::mt19937_64 rng(seed);
    std::vector<int> nodes(n + 1);
    for (std::size_t s = 0; s < count; ++s) {
        nodes[0] = 0;
        std::uint64_t bits = 0;
        for (int i = 0; i < n; ++i) {
            if (i % 64 == 0) bits = rng();
            nodes[i + 1] = nodes[i] + int((bits >> (i % 64)) & 1u);
        }
        visit(std::span<const int>(nodes.data(), nodes.size()));
    }
}

MeanEstimate sample_functional_mean(const BinomialLattice& lat, std::size_t count,
                                    std::uint64_t seed,
                                    const std::function<double(std::span<const int>)>& fn) {
    double sum = 0.0, sumsq = 0.0;
    sample_paths(lat, count, seed, [&](std::span<const int> nodes) {
        const double v = fn(nodes);
        sum += v;
        sumsq += v * v;
    });
    MeanEstimate est;
    est.count = count;
    est.mean = sum / double(count);
    const double var = std::max(0.0, sumsq / double(count) - est.mean * est.mean);
    est.std_error = count > 1 ? std::sqrt(var / double(count - 1)) : 0.0;
    return est;
}

Eigen::VectorXd AugmentedLattice::marginal(int i) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(i + 1);
    for (const State& s : states(i)) out[s.node] += s.prob;
    return out;
}

std::vector<std::pair<double, double>> AugmentedLattice::max_distribution(int i) const {
    std::map<double, double> dist;
    for (const State& s : states(i)) dist[s.running_max] += s.prob;
    return {dist.begin(), dist.end()};
}

double AugmentedLattice::expect_of_max(int i, const std::function<double(double)>& fn) const {
    double acc = 0.0;
    for (const State& s : states(i)) acc += s.prob * fn(s.running_max);
    return acc;
}

AugmentedLattice augment_running_max(const BinomialLattice& lat,
                                     const std::function<double(double)>& g,
                                     NodeMonotonicity declared) {
    const int n = lat.steps();
    // g evaluated once per level so identical max values compare bitwise equal.
    std::vector<double> glevel(2 * n + 1);
    for (int k = -n; k <= n; ++k) glevel[k + n] = g(k * lat.sqrt_dt());

    if (declared != NodeMonotonicity::None) {
        for (int k = -n; k < n; ++k) {
            const double lo = glevel[k + n], hi = glevel[k + n + 1];
            const bool ok = declared == NodeMonotonicity::Increasing ? hi >= lo : hi <= lo;
            if (!ok)
                throw std::invalid_argument(
                    "augment_running_max: declared monotonicity fails at probe level " +
                    std::to_string(k));
        }
    }

    AugmentedLattice aug;
    aug.states_.resize(n + 1);
    // key: (node j, running max); values merged by probability.
    std::map<std::pair<int, double>, double> cur;
    cur[{0, glevel[n]}] = 1.0;
    for (int i = 0;; ++i) {
        auto& out = aug.states_[i];
        out.reserve(cur.size());
        for (const auto& [key, prob] : cur) out.push_back({key.first, key.second, prob});
        if (i == n) break;
        std::map<std::pair<int, double>, double> next;
        for (const auto& [key, prob] : cur) {
            const auto [j, m] = key;
            for (int up = 0; up <= 1; ++up) {
                const int jn = j + up;
                const int level = 2 * jn - (i + 1);
                const double mn = std::max(m, glevel[level + n]);
                next[{jn, mn}] += prob * 0.5;
            }
        }
        cur = std::move(next);
    }
    return aug;
}

}  // namespace rbsde
