#include "rbsde/harness.hpp"

#include "rbsde/oracles.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

namespace rbsde {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // trim to the shortest representation that round-trips
    for (int prec = 1; prec < 17; ++prec) {
        char cand[40];
        std::snprintf(cand, sizeof(cand), "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(cand, "%lf", &back);
        if (back == v) return cand;
    }
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_double(*v) : ""; }

double uniform01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

}  // namespace

std::string csv_header() {
    return "run_id,scenario,N,quantity,value,stderr,method,level,sweep,note";
}

std::string to_csv_line(const ResultRow& r) {
    auto clean = [](std::string s) {
        for (char& c : s)
            if (c == ',' || c == '\n') c = ';';
        return s;
    };
    std::ostringstream os;
    os << clean(r.run_id) << ',' << clean(r.scenario) << ',' << r.steps << ','
       << clean(r.quantity) << ',' << fmt_double(r.value) << ',' << fmt_opt(r.std_error) << ','
       << clean(r.method) << ',' << fmt_opt(r.level) << ','
       << (r.sweep ? std::to_string(*r.sweep) : "") << ',' << clean(r.note);
    return os.str();
}

void write_csv(const std::vector<ResultRow>& rows, const std::string& path) {
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!path.empty()) {
        file.open(path, std::ios::binary);  // binary keeps LF endings everywhere
        if (!file) throw std::runtime_error("write_csv: cannot open '" + path + "'");
        out = &file;
    }
    *out << csv_header() << '\n';
    for (const ResultRow& r : rows) *out << to_csv_line(r) << '\n';
    out->flush();
}

namespace {

using nlohmann::json;

const std::vector<std::string> kSubcommands = {"solve",    "sweep",  "picard", "estimates",
                                               "compare",  "tanaka", "oracle"};

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const auto& k : allowed)
            if (it.key() == k) ok = true;
        if (!ok)
            throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
    }
}

}  // namespace

RunConfig read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("read_config: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("read_config: malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("read_config: top level must be an object");
    check_keys(j,
               {"subcommand", "scenario", "steps", "p", "beta_list", "levels", "chat", "seed",
                "mode", "level", "out", "estimate_ids", "pairs", "tanaka_paths", "tanaka_grid",
                "stop_tol", "max_sweeps", "oracle_which"},
               "document");

    RunConfig cfg;
    auto fetch = [&](const char* key, auto& dst) {
        if (!j.contains(key)) return;
        try {
            dst = j.at(key).get<std::decay_t<decltype(dst)>>();
        } catch (const json::exception&) {
            throw std::invalid_argument(std::string("config: bad value type for key '") + key +
                                        "'");
        }
    };
    fetch("subcommand", cfg.subcommand);
    if (j.contains("scenario")) {
        const json& s = j.at("scenario");
        if (!s.is_object()) throw std::invalid_argument("config: 'scenario' must be an object");
        check_keys(s, {"name", "params"}, "scenario");
        if (s.contains("name")) cfg.scenario_name = s.at("name").get<std::string>();
        if (s.contains("params")) {
            const json& p = s.at("params");
            if (!p.is_object())
                throw std::invalid_argument("config: 'scenario.params' must be an object");
            for (auto it = p.begin(); it != p.end(); ++it) {
                if (!it.value().is_number())
                    throw std::invalid_argument("config: scenario parameter '" + it.key() +
                                                "' must be numeric");
                cfg.scenario_params[it.key()] = it.value().get<double>();
            }
        }
    }
    fetch("steps", cfg.steps);
    fetch("p", cfg.p);
    fetch("beta_list", cfg.beta_list);
    fetch("levels", cfg.levels);
    fetch("chat", cfg.chat);
    fetch("seed", cfg.seed);
    fetch("mode", cfg.mode);
    fetch("level", cfg.level);
    fetch("out", cfg.out);
    fetch("estimate_ids", cfg.estimate_ids);
    fetch("pairs", cfg.pairs);
    fetch("tanaka_paths", cfg.tanaka_paths);
    fetch("tanaka_grid", cfg.tanaka_grid);
    fetch("stop_tol", cfg.stop_tol);
    fetch("max_sweeps", cfg.max_sweeps);
    fetch("oracle_which", cfg.oracle_which);

    bool known = false;
    for (const auto& s : kSubcommands) known = known || s == cfg.subcommand;
    if (!known) throw std::invalid_argument("config: unknown subcommand '" + cfg.subcommand + "'");
    return cfg;
}

std::string normalize_config(const RunConfig& cfg) {
    json j;
    j["subcommand"] = cfg.subcommand;
    j["scenario"]["name"] = cfg.scenario_name;
    j["scenario"]["params"] = json::object();
    for (const auto& [k, v] : cfg.scenario_params) j["scenario"]["params"][k] = v;
    j["steps"] = cfg.steps;
    j["p"] = cfg.p;
    j["beta_list"] = cfg.beta_list;
    j["levels"] = cfg.levels;
    j["chat"] = cfg.chat;
    j["seed"] = cfg.seed;
    j["mode"] = cfg.mode;
    j["level"] = cfg.level;
    j["out"] = cfg.out;
    j["estimate_ids"] = cfg.estimate_ids;
    j["pairs"] = cfg.pairs;
    j["tanaka_paths"] = cfg.tanaka_paths;
    j["tanaka_grid"] = cfg.tanaka_grid;
    j["stop_tol"] = cfg.stop_tol;
    j["max_sweeps"] = cfg.max_sweeps;
    j["oracle_which"] = cfg.oracle_which;
    return j.dump(2) + "\n";
}

namespace {

std::string make_run_id(const RunConfig& cfg) {
    std::ostringstream os;
    os << cfg.subcommand << '-' << cfg.scenario_name << "-N" << cfg.steps << "-s" << cfg.seed;
    return os.str();
}

ResultRow base_row(const RunConfig& cfg) {
    ResultRow r;
    r.run_id = make_run_id(cfg);
    r.scenario = cfg.scenario_name;
    r.steps = cfg.steps;
    return r;
}

PathwiseOptions pathwise_from(const RunConfig& cfg) {
    PathwiseOptions opts;
    opts.seed = cfg.seed;
    return opts;
}

std::vector<ResultRow> run_solve(const RunConfig& cfg) {
    Problem pb = scenario(cfg.scenario_name, cfg.steps, cfg.scenario_params);
    const PathwiseOptions opts = pathwise_from(cfg);
    std::vector<ResultRow> rows;
    auto push = [&](const std::string& q, double v, const std::string& method = "",
                    std::optional<double> se = std::nullopt) {
        ResultRow r = base_row(cfg);
        r.quantity = q;
        r.value = v;
        r.method = method;
        r.std_error = se;
        if (cfg.mode == "penalized") r.level = cfg.level;
        rows.push_back(std::move(r));
    };

    SolutionTriple tri;
    if (cfg.mode == "projected") {
        tri = solve_projected(pb);
    } else if (cfg.mode == "penalized") {
        tri = solve_penalized(pb, cfg.level);
    } else if (cfg.mode == "plain") {
        if (pb.obstacle().finite())
            throw std::invalid_argument("solve --mode plain requires an obstacle-free scenario");
        SolutionPair pair = solve_bsde(pb);
        tri.y = std::move(pair.y);
        tri.z = std::move(pair.z);
        tri.dk = LatticeProcess(cfg.steps - 1);
    } else {
        throw std::invalid_argument("solve: unknown mode '" + cfg.mode + "'");
    }

    push("Y0", tri.y(0, 0));
    const SkorokhodReport sk = skorokhod_report(tri, pb);
    push("skorokhod_residual", sk.residual);
    push("max_obstacle_violation", sk.max_obstacle_violation);
    push("expected_K_T", sk.expected_k_terminal);
    const NormReport norms = norm_report(pb.lattice(), tri, cfg.p, cfg.beta_list, opts);
    push("sp_norm_Y", norms.sp.value, method_name(norms.sp.method), norms.sp.std_error);
    push("hp_norm_Z", norms.hp.value, method_name(norms.hp.method), norms.hp.std_error);
    push("class_d_norm_Y", norms.class_d, "exact");
    for (const auto& [beta, nv] : norms.beta_sp) {
        ResultRow r = base_row(cfg);
        r.quantity = "beta_sp_norm_Y";
        r.value = nv.value;
        r.method = method_name(nv.method);
        r.std_error = nv.std_error;
        r.level = beta;
        r.note = "beta";
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<ResultRow> run_sweep(const RunConfig& cfg) {
    if (cfg.levels.empty()) throw std::invalid_argument("sweep: --levels required");
    Problem pb = scenario(cfg.scenario_name, cfg.steps, cfg.scenario_params);
    const SweepReport rep = penalization_sweep(pb, cfg.levels, {}, pathwise_from(cfg));
    std::vector<ResultRow> rows;
    for (const SweepLevel& lv : rep.levels) {
        auto push = [&](const std::string& q, double v, std::optional<double> se = std::nullopt) {
            ResultRow r = base_row(cfg);
            r.quantity = q;
            r.value = v;
            r.level = lv.level;
            r.method = lv.method;
            r.std_error = se;
            rows.push_back(std::move(r));
        };
        push("sp_dist_Y", lv.sp_dist_y, lv.sp_dist_y_stderr);
        push("hp_dist_Z", lv.hp_dist_z, lv.hp_dist_z_stderr);
        push("sp_dist_K", lv.sp_dist_k, lv.sp_dist_k_stderr);
        push("skorokhod_residual", lv.skorokhod_residual);
        push("monotonicity_violation", lv.monotonicity_violation);
    }
    ResultRow ref = base_row(cfg);
    ref.quantity = "projected_skorokhod_residual";
    ref.value = skorokhod_report(rep.reference, pb).residual;
    rows.push_back(std::move(ref));
    return rows;
}

std::vector<ResultRow> run_picard(const RunConfig& cfg) {
    Problem pb = scenario(cfg.scenario_name, cfg.steps, cfg.scenario_params);
    PicardConfig pc;
    pc.p = cfg.p;
    pc.chat = cfg.chat;
    pc.stop_tol = cfg.stop_tol;
    pc.max_sweeps = cfg.max_sweeps;
    pc.norms = pathwise_from(cfg);
    auto [tri, trace] = picard_solve(pb, pc);

    std::vector<ResultRow> rows;
    for (const SweepRecord& rec : trace.records) {
        auto push = [&](const std::string& q, double v) {
            ResultRow r = base_row(cfg);
            r.quantity = q;
            r.value = v;
            r.sweep = rec.sweep;
            r.note = "block=" + std::to_string(rec.block);
            rows.push_back(std::move(r));
        };
        push("hp_diff", rec.hp_diff);
        push("sp_diff", rec.sp_diff);
        push("contraction_ratio", rec.ratio);
    }
    ResultRow r = base_row(cfg);
    r.quantity = "Y0";
    r.value = tri.y(0, 0);
    r.note = "blocks=" + std::to_string(trace.block_boundaries.size() - 1);
    rows.push_back(std::move(r));
    return rows;
}

std::vector<ResultRow> run_estimates(const RunConfig& cfg) {
    Problem pb = scenario(cfg.scenario_name, cfg.steps, cfg.scenario_params);
    const PathwiseOptions opts = pathwise_from(cfg);
    std::vector<EstimateId> ids;
    if (cfg.estimate_ids.empty())
        ids = all_estimate_ids();
    else
        for (const auto& s : cfg.estimate_ids) ids.push_back(estimate_id_from_string(s));

    std::vector<ResultRow> rows;
    const SolutionTriple projected = solve_projected(pb);
    for (EstimateId id : ids) {
        // P4.2 / P4.3 are statements about the penalized solutions
        const bool penalized = id == EstimateId::P42 || id == EstimateId::P43;
        const double exponent = id == EstimateId::P51i ? 1.0
                               : id == EstimateId::P51ii ? (cfg.beta_list.empty() ? 0.5 : cfg.beta_list.front())
                                                         : cfg.p;
        std::vector<double> levels = penalized ? (cfg.levels.empty() ? std::vector<double>{16.0}
                                                                     : cfg.levels)
                                               : std::vector<double>{0.0};
        for (double lv : levels) {
            const SolutionTriple tri = penalized ? solve_penalized(pb, lv) : projected;
            const EstimateReport rep =
                check_estimate(id, pb, tri, StoppingRule::horizon(), exponent, opts);
            auto push = [&](const std::string& q, double v) {
                ResultRow r = base_row(cfg);
                r.quantity = q;
                r.value = v;
                r.method = method_name(rep.method);
                r.note = to_string(id) + " tau=" + rep.tau_name;
                if (penalized) r.level = lv;
                rows.push_back(std::move(r));
            };
            push("estimate_lhs", rep.lhs);
            push("estimate_rhs", rep.rhs);
            push("estimate_ratio", rep.ratio);
        }
    }
    return rows;
}

// Ordered pair construction for the comparison suite: xi' = xi + dxi,
// f' = f + df (df >= 0 keeps H1/H2 with the same constants), L' = L + dl with
// dl <= dxi so L'_T <= xi' stays valid.
struct OrderedPair {
    Problem base;
    Problem dominating;
    bool shared_obstacle;
};

OrderedPair make_ordered_pair(const std::string& name, int steps,
                              const std::map<std::string, double>& params, std::mt19937_64& rng,
                              bool shared_obstacle) {
    Problem base = scenario(name, steps, params);
    const double dxi = uniform01(rng);
    const double df = uniform01(rng) * 0.5;
    const double dl = shared_obstacle ? 0.0 : uniform01(rng) * dxi;

    const Generator& g0 = base.generator();
    Generator g1([g0, df](double t, double y, double z) { return g0(t, y, z) + df; }, g0.mu(),
                 g0.lambda(), g0.depends_on_z(),
                 g0.h5() ? std::optional<H5Params>(*g0.h5()) : std::nullopt);
    Eigen::VectorXd xi1 = base.terminal().array() + dxi;
    Obstacle l1 = base.obstacle();
    if (base.obstacle().finite() && dl > 0.0) {
        auto l0 = base.obstacle();
        l1 = Obstacle::time_node([l0, dl](double t, double w) { return l0.value(t, w) + dl; });
    }
    Problem dom(base.lattice_ptr(), std::move(xi1), std::move(g1), std::move(l1), base.p());
    return {std::move(base), std::move(dom), shared_obstacle};
}

std::vector<ResultRow> run_compare(const RunConfig& cfg) {
    if (cfg.pairs < 1) throw std::invalid_argument("compare: pairs must be >= 1");
    std::mt19937_64 rng(cfg.seed);
    const std::vector<std::string> catalog = {"never-binding", "binding-obstacle", "american-put",
                                              "monotone-nonlipschitz", "martingale", "ode-cubic"};
    std::vector<ResultRow> rows;
    for (int k = 0; k < cfg.pairs; ++k) {
        const std::string& name = catalog[k % catalog.size()];
        const bool shared = k % 2 == 0;
        OrderedPair pair = make_ordered_pair(name, cfg.steps, {}, rng, shared);
        const bool reflected = pair.base.obstacle().finite();

        SolutionTriple a, b;
        if (reflected) {
            a = solve_projected(pair.base);
            b = solve_projected(pair.dominating);
        } else {
            SolutionPair pa = solve_bsde(pair.base), pb2 = solve_bsde(pair.dominating);
            a.y = std::move(pa.y);
            a.z = std::move(pa.z);
            a.dk = LatticeProcess(cfg.steps - 1);
            b.y = std::move(pb2.y);
            b.z = std::move(pb2.z);
            b.dk = LatticeProcess(cfg.steps - 1);
        }
        const ComparisonReport yrep = compare_solutions(a, b, ComparisonRelation::YLessEqual);
        ResultRow r = base_row(cfg);
        r.scenario = name;
        r.quantity = "y_ordering_violation";
        r.value = yrep.max_violation;
        r.sweep = k;
        r.note = shared ? "shared-obstacle" : "offset-obstacle";
        rows.push_back(r);
        if (reflected && shared) {
            const ComparisonReport krep =
                compare_solutions(a, b, ComparisonRelation::DkGreaterEqual);
            ResultRow rk = base_row(cfg);
            rk.scenario = name;
            rk.quantity = "dk_ordering_violation";
            rk.value = krep.max_violation;
            rk.sweep = k;
            rk.note = "shared-obstacle";
            rows.push_back(rk);
        }
    }
    return rows;
}

std::vector<ResultRow> run_tanaka(const RunConfig& cfg) {
    Problem pb = scenario(cfg.scenario_name, cfg.steps, cfg.scenario_params);
    const BinomialLattice& lat = pb.lattice();
    const int n = lat.steps();
    std::mt19937_64 rng(cfg.seed);

    TestFunction quad{[](double x) { return x * x; }, [](double) { return 2.0; }};
    double max_identity = 0.0, min_inc = 0.0, max_occ = 0.0, occ_scale = 0.0;
    std::vector<double> path(n + 1);
    for (int s = 0; s < cfg.tanaka_paths; ++s) {
        path[0] = 0.0;
        int j = 0;  // up-move count
        for (int i = 0; i < n; ++i) {
            j += int(rng() & 1u);
            path[i + 1] = lat.node_value(i + 1, j);
        }
        const double a = (uniform01(rng) * 2.0 - 1.0) * (std::sqrt(double(n)) * lat.sqrt_dt());
        const TanakaReport rep = tanaka_check(path, a, quad, cfg.tanaka_grid);
        max_identity = std::max(max_identity, rep.identity_residual);
        min_inc = std::min(min_inc, rep.min_increment);
        max_occ = std::max(max_occ, rep.occupation_residual);
        occ_scale = std::max(occ_scale, rep.occupation_scale);
    }
    std::vector<ResultRow> rows;
    auto push = [&](const std::string& q, double v) {
        ResultRow r = base_row(cfg);
        r.quantity = q;
        r.value = v;
        r.note = "paths=" + std::to_string(cfg.tanaka_paths);
        rows.push_back(std::move(r));
    };
    push("max_identity_residual", max_identity);
    push("min_local_time_increment", min_inc);
    push("max_occupation_residual", max_occ);
    push("max_occupation_scale", occ_scale);
    return rows;
}

std::vector<ResultRow> run_oracle(const RunConfig& cfg) {
    std::vector<ResultRow> rows;
    ResultRow r = base_row(cfg);
    if (cfg.oracle_which == "american-put") {
        std::map<std::string, double> p = cfg.scenario_params;
        auto get = [&](const char* k, double d) {
            auto it = p.find(k);
            return it == p.end() ? d : it->second;
        };
        r.scenario = "american-put";
        r.quantity = "american_dp_price";
        r.value = oracles::american_put_binomial_dp(get("r", 0.05), get("sigma", 0.3),
                                                    get("x0", 100.0), get("strike", 100.0),
                                                    get("T", 1.0), cfg.steps);
        r.method = "oracle";
        r.note = "independent binomial DP";
    } else if (cfg.oracle_which == "stopping") {
        Problem pb = scenario(cfg.scenario_name, cfg.steps, cfg.scenario_params);
        const Generator& f = pb.generator();
        if (f.depends_on_z() || f(0.0, 0.0, 0.0) != 0.0 || f(0.3, 1.0, 0.0) != 0.0 ||
            f(0.7, -2.0, 0.0) != 0.0)
            throw std::invalid_argument("oracle stopping: requires a scenario with f = 0");
        const int n = pb.lattice().steps();
        auto reward = [&](int i, int j) {
            return i == n ? pb.terminal()[j] : pb.obstacle_at(i, j);
        };
        r.quantity = "exhaustive_stopping_value";
        r.value = oracles::exhaustive_stopping_value(n, reward);
        r.method = "oracle";
        r.note = "full path-tree search";
    } else {
        throw std::invalid_argument("oracle: unknown target '" + cfg.oracle_which + "'");
    }
    rows.push_back(std::move(r));
    return rows;
}

std::vector<double> parse_level_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
    }
    return out;
}

}  // namespace

std::vector<ResultRow> convergence_study(const RunConfig& cfg,
                                         const std::vector<int>& refine_steps) {
    std::vector<ResultRow> rows;
    double prev_y0 = 0.0, prev_delta = 0.0;
    bool have_prev = false, have_delta = false;
    bool monotone = true;
    for (int n : refine_steps) {
        Problem pb = scenario(cfg.scenario_name, n, cfg.scenario_params);
        const SolutionTriple tri = solve_projected(pb);
        ResultRow r = base_row(cfg);
        r.steps = n;
        r.quantity = "Y0";
        r.value = tri.y(0, 0);
        rows.push_back(r);
        if (have_prev) {
            const double delta = std::abs(tri.y(0, 0) - prev_y0);
            ResultRow d = base_row(cfg);
            d.steps = n;
            d.quantity = "self_convergence_delta";
            d.value = delta;
            rows.push_back(d);
            if (have_delta && delta > prev_delta) monotone = false;
            prev_delta = delta;
            have_delta = true;
        }
        prev_y0 = tri.y(0, 0);
        have_prev = true;
    }
    if (refine_steps.size() > 2) {
        ResultRow v = base_row(cfg);
        v.quantity = "self_convergence_monotone";
        v.value = monotone ? 1.0 : 0.0;
        v.note = "verdict";
        rows.push_back(v);
    }
    if (!cfg.levels.empty()) {
        Problem pb = scenario(cfg.scenario_name, cfg.steps, cfg.scenario_params);
        const SweepReport sweep = penalization_sweep(pb, cfg.levels, {}, pathwise_from(cfg));
        bool level_monotone = true;
        for (std::size_t k = 0; k < sweep.levels.size(); ++k) {
            ResultRow r = base_row(cfg);
            r.quantity = "sp_dist_Y";
            r.value = sweep.levels[k].sp_dist_y;
            r.level = sweep.levels[k].level;
            r.method = sweep.levels[k].method;
            rows.push_back(std::move(r));
            if (k > 0 && sweep.levels[k].sp_dist_y > sweep.levels[k - 1].sp_dist_y)
                level_monotone = false;
        }
        ResultRow v = base_row(cfg);
        v.quantity = "level_convergence_monotone";
        v.value = level_monotone ? 1.0 : 0.0;
        v.note = "verdict";
        rows.push_back(v);
    }
    return rows;
}

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"reflected BSDE lattice laboratory"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path;
    std::string levels_csv, betas_csv, ids_csv;
    std::vector<std::string> param_kvs;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file (flags override)");
        sub->add_option("--scenario", cfg.scenario_name, "scenario name");
        sub->add_option("--steps", cfg.steps, "time steps N");
        sub->add_option("--p", cfg.p, "integrability exponent");
        sub->add_option("--seed", cfg.seed, "RNG seed");
        sub->add_option("--out", cfg.out, "output CSV path (default stdout)");
        sub->add_option("--param", param_kvs, "scenario parameter key=value (repeatable)");
    };

    CLI::App* solve = app.add_subcommand("solve", "run one solver");
    add_common(solve);
    solve->add_option("--mode", cfg.mode, "projected | penalized | plain");
    solve->add_option("--level", cfg.level, "penalization level");
    solve->add_option("--beta-list", betas_csv, "comma-separated beta exponents");

    CLI::App* sweep = app.add_subcommand("sweep", "penalization level sweep");
    add_common(sweep);
    sweep->add_option("--levels", levels_csv, "comma-separated penalty levels")->required();

    CLI::App* picard = app.add_subcommand("picard", "block Picard construction");
    add_common(picard);
    picard->add_option("--chat", cfg.chat, "stability constant for block mesh");
    picard->add_option("--stop-tol", cfg.stop_tol, "successive H^p stopping tolerance");
    picard->add_option("--max-sweeps", cfg.max_sweeps, "sweep cap per block");

    CLI::App* estimates = app.add_subcommand("estimates", "a priori estimate ratios");
    add_common(estimates);
    estimates->add_option("--id", ids_csv, "comma-separated estimate ids (default all)");
    estimates->add_option("--levels", levels_csv, "penalty levels for P4.2");
    estimates->add_option("--beta-list", betas_csv, "beta for P5.1ii");

    CLI::App* compare = app.add_subcommand("compare", "randomized ordered-pair comparisons");
    add_common(compare);
    compare->add_option("--pairs", cfg.pairs, "number of ordered pairs");

    CLI::App* tanaka = app.add_subcommand("tanaka", "discrete Tanaka identity suite");
    add_common(tanaka);
    tanaka->add_option("--paths", cfg.tanaka_paths, "number of random paths");
    tanaka->add_option("--grid", cfg.tanaka_grid, "occupation grid levels (0 = 4N)");

    CLI::App* oracle = app.add_subcommand("oracle", "independent scenario oracles");
    add_common(oracle);
    oracle->add_option("--which", cfg.oracle_which, "american-put | stopping");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        cfg.subcommand = sub->get_name();
        if (!config_path.empty()) {
            RunConfig merged = read_config(config_path);
            merged.subcommand = cfg.subcommand;
            auto passed = [&](const char* name) {
                const CLI::Option* o = sub->get_option_no_throw(name);
                return o && o->count() > 0;
            };
            if (passed("--scenario")) merged.scenario_name = cfg.scenario_name;
            if (passed("--steps")) merged.steps = cfg.steps;
            if (passed("--p")) merged.p = cfg.p;
            if (passed("--seed")) merged.seed = cfg.seed;
            if (passed("--out")) merged.out = cfg.out;
            if (passed("--mode")) merged.mode = cfg.mode;
            if (passed("--level")) merged.level = cfg.level;
            if (passed("--chat")) merged.chat = cfg.chat;
            if (passed("--stop-tol")) merged.stop_tol = cfg.stop_tol;
            if (passed("--max-sweeps")) merged.max_sweeps = cfg.max_sweeps;
            if (passed("--pairs")) merged.pairs = cfg.pairs;
            if (passed("--paths")) merged.tanaka_paths = cfg.tanaka_paths;
            if (passed("--grid")) merged.tanaka_grid = cfg.tanaka_grid;
            if (passed("--which")) merged.oracle_which = cfg.oracle_which;
            cfg = merged;
        }
        for (const std::string& kv : param_kvs) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos || eq == 0)
                throw std::invalid_argument("--param expects key=value, got '" + kv + "'");
            cfg.scenario_params[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
        }
        if (!levels_csv.empty()) cfg.levels = parse_level_list(levels_csv);
        if (!betas_csv.empty()) cfg.beta_list = parse_level_list(betas_csv);
        if (!ids_csv.empty()) {
            cfg.estimate_ids.clear();
            std::stringstream ss(ids_csv);
            std::string tok;
            while (std::getline(ss, tok, ','))
                if (!tok.empty()) cfg.estimate_ids.push_back(tok);
        }

        std::vector<ResultRow> rows;
        if (cfg.subcommand == "solve") rows = run_solve(cfg);
        else if (cfg.subcommand == "sweep") rows = run_sweep(cfg);
        else if (cfg.subcommand == "picard") rows = run_picard(cfg);
        else if (cfg.subcommand == "estimates") rows = run_estimates(cfg);
        else if (cfg.subcommand == "compare") rows = run_compare(cfg);
        else if (cfg.subcommand == "tanaka") rows = run_tanaka(cfg);
        else if (cfg.subcommand == "oracle") rows = run_oracle(cfg);
        write_csv(rows, cfg.out);
        return 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return 3;
    }
}

}  // namespace rbsde
