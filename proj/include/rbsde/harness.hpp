#pragma once

#include "rbsde/picard.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rbsde {

/// One CSV record. Columns (fixed order):
/// run_id, scenario, N, quantity, value, stderr, method, level, sweep, note
struct ResultRow {
    std::string run_id;
    std::string scenario;
    int steps = 0;
    std::string quantity;
    double value = 0.0;
    std::optional<double> std_error;
    std::string method;
    std::optional<double> level;
    std::optional<int> sweep;
    std::string note;
};

std::string csv_header();
std::string to_csv_line(const ResultRow& row);

/// Bit-stable CSV: fixed column order, '.' decimal separator, LF endings,
/// shortest round-trip double formatting.
void write_csv(const std::vector<ResultRow>& rows, const std::string& path);

struct RunConfig {
    std::string subcommand = "solve";
    std::string scenario_name = "american-put";
    std::map<std::string, double> scenario_params;
    int steps = 100;
    double p = 2.0;
    std::vector<double> beta_list;
    std::vector<double> levels;
    double chat = 1.0;
    std::uint64_t seed = 1;
    std::string mode = "projected";  // solve: projected | penalized | plain
    double level = 64.0;             // penalized level for solve --mode penalized
    std::string out;                 // empty -> stdout
    std::vector<std::string> estimate_ids;  // empty -> all
    int pairs = 20;
    int tanaka_paths = 100;
    int tanaka_grid = 0;  // 0 -> 4N default
    double stop_tol = 1e-10;
    int max_sweeps = 50;
    std::string oracle_which = "american-put";  // american-put | stopping
};

/// Strict JSON config: unknown keys are rejected with a diagnostic naming the
/// key; values are type-checked.
RunConfig read_config(const std::string& path);

/// Canonical JSON text of a config; reading a config and normalizing it twice
/// is a fixed point.
std::string normalize_config(const RunConfig& cfg);

/// Full CLI entry point. Exit codes: 0 success, 2 validation error,
/// 3 solver failure.
int cli_main(int argc, const char* const* argv);

/// Convergence study: N-refinement self-convergence of the projected Y0 and,
/// when levels are present, a penalization sweep; emits rows and monotone
/// verdicts.
std::vector<ResultRow> convergence_study(const RunConfig& cfg, const std::vector<int>& refine_steps);

}  // namespace rbsde
