#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sburgers/analysis.hpp"
#include "sburgers/brownian.hpp"
#include "sburgers/config.hpp"
#include "sburgers/fbsde.hpp"
#include "sburgers/fd_solver.hpp"
#include "sburgers/inviscid.hpp"
#include "sburgers/io.hpp"
#include "sburgers/scenario.hpp"

namespace sburgers::cli {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::int64_t seed_override = -1;
    int threads = 0;
    double tol_override = 0.0;
};

namespace detail {

class Stopwatch {
public:
    double lap() {
        const auto now = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        return s;
    }

private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

struct Loaded {
    Config cfg;
    Scenario sc;
};

inline Loaded load(const CommonOpts& opt) {
    Loaded l{Config::parse_file(opt.config_path), {}};
    l.sc = load_scenario(l.cfg);
    if (opt.seed_override >= 0) {
        l.sc.noise_seed = static_cast<std::uint64_t>(opt.seed_override);
        l.sc.mc.seed = derive_seed(l.sc.noise_seed, 0xC11u);
    }
    if (opt.threads > 0) l.sc.mc.threads = opt.threads;
    if (opt.tol_override > 0.0) l.sc.mc.tol = opt.tol_override;
    return l;
}

inline NoiseField make_noise(const Scenario& sc) {
    auto b = build_brownian(sc.noise_seed, sc.problem.noise_dim, sc.problem.horizon,
                            sc.time.steps());
    return synthesize_noise_field(sc.problem.g, b, sc.grid, sc.deriv_order,
                                  sc.problem.holder_beta);
}

inline void dump_noise_if_requested(const Loaded& l, const NoiseField& eta, RunWriter& run) {
    if (!l.cfg.get_bool("output", "dump_noise", false)) return;
    auto f = run.open("noise.csv");
    write_noise_csv(f, eta);
    auto side = run.open("noise_meta.json");
    side << noise_sidecar(eta, l.sc.noise_seed).dump(2) << "\n";
}

inline nlohmann::json window_log_json(const std::vector<WindowRecord>& windows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& w : windows) {
        arr.push_back({{"j_begin", w.j_begin},
                       {"j_end", w.j_end},
                       {"converged", w.log.converged},
                       {"sweeps", w.log.sweeps},
                       {"distances", w.log.distances},
                       {"contraction_ratio", w.log.contraction_ratio},
                       {"K", w.K},
                       {"C", w.C},
                       {"gamma", w.gamma},
                       {"sup_norm", w.sup_norm},
                       {"lipschitz_x", w.lipschitz_x},
                       {"bound_ok", w.bound_ok},
                       {"length_warning", w.length_warning}});
    }
    return arr;
}

inline int cmd_solve_fd(const CommonOpts& opt) {
    auto l = load(opt);
    RunWriter run(opt.out_dir, "solve-fd");
    Stopwatch watch;
    auto eta = make_noise(l.sc);
    run.note_timing("noise_synthesis", watch.lap());
    GridSpec gs(l.sc.grid, l.sc.time);
    auto yhat = fd_solve_forward(l.sc.problem, eta, gs);
    run.note_timing("fd_solve", watch.lap());
    auto y = reconstruct(yhat, eta);
    {
        auto f = run.open("yhat_fd.csv");
        write_field_csv(f, yhat);
    }
    {
        auto f = run.open("y_fd.csv");
        write_field_csv(f, y);
    }
    dump_noise_if_requested(l, eta, run);
    run.note("max_cfl_observed", gs.report.max_cfl_observed);
    run.note("sup_norm_yhat", yhat.sup_norm());
    run.note("sup_norm_y", y.sup_norm());
    run.write_manifest(l.cfg.raw_text(), opt.config_path, l.sc.noise_seed);
    return 0;
}

inline int cmd_solve_fbsde(const CommonOpts& opt) {
    auto l = load(opt);
    RunWriter run(opt.out_dir, "solve-fbsde");
    Stopwatch watch;
    auto eta = make_noise(l.sc);
    run.note_timing("noise_synthesis", watch.lap());
    auto glob = global_continuation(l.sc.problem, eta, l.sc.grid, l.sc.mc, l.sc.window);
    run.note_timing("continuation", watch.lap());
    {
        auto f = run.open("yhat_fbsde.csv");
        write_field_csv(f, glob.yhat);
    }
    {
        SpaceTimeField y = glob.yhat;
        y.gradient.clear();
        y = reconstruct(y, eta);
        auto f = run.open("y_fbsde.csv");
        write_field_csv(f, y);
    }
    dump_noise_if_requested(l, eta, run);
    nlohmann::json meta;
    meta["completed"] = glob.completed;
    meta["failure"] = glob.failure;
    meta["K"] = glob.K;
    meta["C"] = glob.C;
    meta["M"] = glob.M;
    meta["M1"] = glob.M1;
    meta["gamma_first"] = glob.gamma_first;
    meta["gamma_later"] = glob.gamma_later;
    meta["windows"] = window_log_json(glob.windows);
    meta["noise_seed"] = l.sc.noise_seed;
    meta["mc_seed"] = l.sc.mc.seed;
    meta["sup_norm_yhat"] = glob.yhat.sup_norm();

    if (glob.completed && l.cfg.get_bool("fbsde", "run_markov", false)) {
        // check the identity on the first solved window (the reversed-final one)
        auto eta_bar = std::make_shared<const NoiseField>(time_reverse(eta));
        TransformedForce Fp(l.sc.problem.f, l.sc.problem.viscosity, eta_bar, true);
        auto Fm = cutoff_force(Fp, glob.M);
        const auto& w0 = glob.windows.front();
        auto terminal = terminal_from_initial(l.sc.problem.h);
        auto sol = picard_local_solve(Fm, terminal, l.sc.problem.viscosity, w0.j_begin, w0.j_end,
                                      l.sc.grid, l.sc.mc, glob.M);
        const auto samples =
            static_cast<std::size_t>(l.cfg.get_int("fbsde", "markov_samples", 2000));
        auto rep = markov_identity_check(sol, Fm, terminal, l.sc.problem.viscosity, l.sc.grid,
                                         l.sc.mc, samples);
        meta["markov"] = {{"max", rep.max_discrepancy},
                          {"mean", rep.mean_discrepancy},
                          {"stderr", rep.mc_stderr},
                          {"tolerance", rep.tolerance},
                          {"pass", rep.pass},
                          {"samples", rep.samples}};
        run.note_timing("markov_check", watch.lap());
    }
    {
        auto f = run.open("metadata.json");
        f << meta.dump(2) << "\n";
    }
    run.note("completed", glob.completed);
    run.write_manifest(l.cfg.raw_text(), opt.config_path, l.sc.noise_seed);
    if (!glob.completed) {
        std::cerr << "solve-fbsde: " << glob.failure << "\n";
        return 1;
    }
    return 0;
}

inline int cmd_solve_inviscid(const CommonOpts& opt) {
    auto l = load(opt);
    RunWriter run(opt.out_dir, "solve-inviscid");
    Stopwatch watch;
    auto eta_full = make_noise(l.sc);
    const auto wsteps = static_cast<std::size_t>(
        l.cfg.get_int("inviscid", "window_steps", static_cast<long>(l.sc.time.steps())));
    auto eta = restrict_noise(eta_full, wsteps);
    auto eta_bar = std::make_shared<const NoiseField>(time_reverse(eta));
    run.note_timing("noise_synthesis", watch.lap());

    BurgersProblem p0 = l.sc.problem;
    p0.viscosity = 0.0;
    TransformedForce F0(p0.f, 0.0, eta_bar, true);
    const double M = l.sc.window.bound_M.value_or(0.0) > 0.0 ? *l.sc.window.bound_M : 0.0;
    double sup_h = 0.0;
    {
        std::vector<double> x(p0.dim), hv(p0.dim);
        for (std::size_t m = 0; m < l.sc.grid.total_nodes(); ++m) {
            l.sc.grid.node_point(m, x);
            p0.h.value(x, hv);
            for (double v : hv) sup_h = std::max(sup_h, std::fabs(v));
        }
    }
    const double Muse =
        M > 0.0 ? M
                : std::max(2.0 * sup_h + eta.time_grid().horizon() *
                                             p0.f.growth_L * (1.0 + sup_h),
                           1.0);
    auto F0M = cutoff_force(F0, Muse);
    auto sol = characteristics_fixed_point(F0M, terminal_from_initial(p0.h), 0, wsteps, l.sc.grid,
                                           l.sc.mc);
    run.note_timing("characteristics", watch.lap());

    auto yhat0 = time_reverse(sol.ybar);
    auto y0 = yhat0;
    y0.gradient.clear();
    y0 = reconstruct(y0, eta);
    const double guard = shock_guard_time(y0);
    {
        auto f = run.open("yhat_inviscid.csv");
        write_field_csv(f, yhat0);
    }
    {
        auto f = run.open("y_inviscid.csv");
        write_field_csv(f, y0);
    }
    nlohmann::json meta;
    meta["converged"] = sol.log.converged;
    meta["sweeps"] = sol.log.sweeps;
    meta["distances"] = sol.log.distances;
    meta["sup_norm"] = sol.sup_norm;
    meta["lipschitz_x"] = sol.lipschitz_x;
    meta["window_horizon"] = eta.time_grid().horizon();
    meta["shock_guard_time"] = guard;
    meta["cutoff_M"] = Muse;
    const double N = l.cfg.get_double("inviscid", "truncation_N", 0.0);
    if (N > 0.0) {
        auto w = local_existence_window(l.sc.problem, eta_full, N, l.sc.grid,
                                        l.sc.mc.window_safety);
        meta["existence_window"] = {{"S", w.S},     {"T_N", w.T_N}, {"beta", w.beta},
                                    {"K_N", w.K_N}, {"C_N", w.C_N}, {"M_N", w.M_N}};
    }
    {
        auto f = run.open("metadata.json");
        f << meta.dump(2) << "\n";
    }
    run.write_manifest(l.cfg.raw_text(), opt.config_path, l.sc.noise_seed);
    if (!sol.log.converged) {
        std::cerr << "solve-inviscid: fixed point did not converge\n";
        return 1;
    }
    return 0;
}

inline int cmd_compare(const CommonOpts& opt) {
    auto l = load(opt);
    RunWriter run(opt.out_dir, "compare");
    Stopwatch watch;
    auto eta = make_noise(l.sc);
    run.note_timing("noise_synthesis", watch.lap());

    GridSpec gs(l.sc.grid, l.sc.time);
    auto yhat_fd = fd_solve_forward(l.sc.problem, eta, gs);
    run.note_timing("fd_solve", watch.lap());
    auto glob = global_continuation(l.sc.problem, eta, l.sc.grid, l.sc.mc, l.sc.window);
    run.note_timing("fbsde_solve", watch.lap());
    if (!glob.completed) {
        run.write_manifest(l.cfg.raw_text(), opt.config_path, l.sc.noise_seed);
        std::cerr << "compare: " << glob.failure << "\n";
        return 1;
    }

    const std::size_t per = l.sc.grid.total_nodes() * l.sc.problem.dim;
    std::vector<std::vector<double>> rows;
    double max_disc = 0.0;
    for (std::size_t j = 0; j <= l.sc.time.steps(); ++j) {
        double sup = 0.0, mean = 0.0;
        const double* a = yhat_fd.slice(j);
        const double* b = glob.yhat.slice(j);
        for (std::size_t q = 0; q < per; ++q) {
            const double d = std::fabs(a[q] - b[q]);
            sup = std::max(sup, d);
            mean += d;
        }
        mean /= static_cast<double>(per);
        rows.push_back({l.sc.time.time(j), sup, mean});
        max_disc = std::max(max_disc, sup);
    }
    {
        auto f = run.open("discrepancy.csv");
        write_table_csv(f, {"t", "sup_err", "mean_err"}, rows);
    }
    double sup_fd = yhat_fd.sup_norm();
    const double rel_tol = opt.tol_override > 0.0
                               ? opt.tol_override
                               : l.cfg.get_double("compare", "tolerance", 0.05);
    const double rel = sup_fd > 0.0 ? max_disc / sup_fd : 0.0;
    nlohmann::json meta;
    meta["max_discrepancy"] = max_disc;
    meta["sup_norm_fd"] = sup_fd;
    meta["relative_discrepancy"] = rel;
    meta["tolerance_relative"] = rel_tol;
    meta["pass"] = rel <= rel_tol;
    meta["fbsde_windows"] = window_log_json(glob.windows);
    {
        auto f = run.open("compare.json");
        f << meta.dump(2) << "\n";
    }
    run.write_manifest(l.cfg.raw_text(), opt.config_path, l.sc.noise_seed);
    if (rel > rel_tol) {
        std::cerr << "compare: relative discrepancy " << rel << " exceeds tolerance " << rel_tol
                  << "\n";
        return 1;
    }
    return 0;
}

inline int cmd_inviscid_sweep(const CommonOpts& opt) {
    auto l = load(opt);
    RunWriter run(opt.out_dir, "inviscid-sweep");
    Stopwatch watch;
    auto eta = make_noise(l.sc);
    auto nus = l.cfg.get_double_list("sweep", "nus", {0.2, 0.1, 0.05, 0.025});
    const auto wsteps = static_cast<std::size_t>(
        l.cfg.get_int("sweep", "window_steps", static_cast<long>(l.sc.time.steps())));
    auto rep = viscosity_sweep(l.sc.problem, nus, eta, l.sc.grid, wsteps, l.sc.mc, l.sc.window);
    run.note_timing("sweep", watch.lap());

    std::vector<std::vector<double>> rows;
    for (const auto& r : rep.rows)
        rows.push_back({r.nu, r.sup_err, r.mean_err, r.converged ? 1.0 : 0.0});
    {
        auto f = run.open("sweep.csv");
        write_table_csv(f, {"nu", "sup_err", "mean_err", "converged"}, rows);
    }
    nlohmann::json meta;
    meta["exponent"] = rep.exponent;
    meta["r_squared"] = rep.r_squared;
    meta["exponent_degenerate"] = rep.exponent_degenerate;
    meta["monotone_ok"] = rep.monotone_ok;
    meta["partial"] = rep.partial;
    meta["window_horizon"] = rep.window_horizon;
    meta["shock_guard_time"] = rep.shock_time;
    const double N = l.cfg.get_double("sweep", "truncation_N", 0.0);
    if (N > 0.0) {
        auto w = local_existence_window(l.sc.problem, eta, N, l.sc.grid, l.sc.mc.window_safety);
        meta["S"] = w.S;
        meta["T_N"] = w.T_N;
        meta["beta"] = w.beta;
    } else {
        meta["S"] = rep.window_horizon;
    }
    {
        auto f = run.open("sweep.json");
        f << meta.dump(2) << "\n";
    }
    run.write_manifest(l.cfg.raw_text(), opt.config_path, l.sc.noise_seed);
    return rep.partial ? 1 : 0;
}

inline int cmd_holder(const CommonOpts& opt) {
    auto l = load(opt);
    RunWriter run(opt.out_dir, "holder");
    Stopwatch watch;
    const auto seeds = static_cast<std::size_t>(l.cfg.get_int("holder", "seeds", 100));
    const auto steps = static_cast<std::size_t>(l.cfg.get_int("holder", "time_steps", 1 << 14));
    const auto nodes = static_cast<std::size_t>(l.cfg.get_int("holder", "nodes", 8));
    const auto max_lag = static_cast<std::size_t>(l.cfg.get_int("holder", "max_lag", 16));
    const double band_lo = l.cfg.get_double("holder", "band_lo", 0.4);
    const double band_hi = l.cfg.get_double("holder", "band_hi", 0.55);

    auto grid = l.sc.problem.make_grid(nodes);
    std::vector<std::vector<double>> rows;
    std::size_t in_band = 0, degenerate = 0;
    for (std::size_t s = 0; s < seeds; ++s) {
        auto b = build_brownian(l.sc.noise_seed + s, l.sc.problem.noise_dim,
                                l.sc.problem.horizon, steps);
        auto eta = synthesize_noise_field(l.sc.problem.g, b, grid, 0, l.sc.problem.holder_beta);
        std::vector<double> series(eta.time_grid().slices());
        const std::size_t mid = grid.total_nodes() / 2;
        for (std::size_t j = 0; j < series.size(); ++j) series[j] = eta.at(0, j, mid, 0);
        const auto est = holder_exponent(series, max_lag);
        if (est.degenerate) {
            ++degenerate;
            rows.push_back({static_cast<double>(s), 0.0, 0.0, 0.0});
            continue;
        }
        const bool ok = est.exponent >= band_lo && est.exponent <= band_hi;
        if (ok) ++in_band;
        rows.push_back({static_cast<double>(s), est.exponent, est.r_squared, ok ? 1.0 : 0.0});
    }
    run.note_timing("estimation", watch.lap());
    {
        auto f = run.open("holder.csv");
        write_table_csv(f, {"seed", "exponent", "r_squared", "in_band"}, rows);
    }
    nlohmann::json meta;
    meta["seeds"] = seeds;
    meta["band"] = {band_lo, band_hi};
    meta["fraction_in_band"] =
        seeds ? static_cast<double>(in_band) / static_cast<double>(seeds) : 0.0;
    meta["degenerate"] = degenerate;
    meta["beta_over_two"] = 0.5 * l.sc.problem.holder_beta;
    {
        auto f = run.open("holder.json");
        f << meta.dump(2) << "\n";
    }
    run.write_manifest(l.cfg.raw_text(), opt.config_path, l.sc.noise_seed);
    return 0;
}

inline int cmd_adaptedness(const CommonOpts& opt) {
    auto l = load(opt);
    RunWriter run(opt.out_dir, "adaptedness");
    const double frac = l.cfg.get_double("adaptedness", "split_fraction", 0.5);
    const std::size_t split_step =
        std::max<std::size_t>(1, static_cast<std::size_t>(frac * l.sc.time.steps()));
    const double t_split = l.sc.time.time(split_step);
    auto b1 = build_brownian(l.sc.noise_seed, l.sc.problem.noise_dim, l.sc.problem.horizon,
                             l.sc.time.steps());
    auto b2 = b1.resampled_after(split_step, derive_seed(l.sc.noise_seed, 0x5EEDu));

    nlohmann::json meta;
    std::vector<std::vector<double>> rows;
    bool all_pass = true;
    const std::string solvers = l.cfg.get_string("adaptedness", "solvers", "fd,fbsde");

    if (solvers.find("fd") != std::string::npos) {
        auto solve = [&](const BrownianPath& b) {
            GridSpec gs(l.sc.grid, l.sc.time);
            auto eta = synthesize_noise_field(l.sc.problem.g, b, l.sc.grid, l.sc.deriv_order);
            return fd_solve_forward(l.sc.problem, eta, gs);
        };
        const auto rep = adaptedness_check(solve, t_split, b1, b2);
        meta["fd"] = {{"pass", rep.pass},
                      {"first_divergence_time", rep.first_divergence_time},
                      {"slices_compared", rep.slices_compared}};
        rows.push_back({0.0, rep.pass ? 1.0 : 0.0, rep.first_divergence_time});
        all_pass = all_pass && rep.pass;
    }
    if (solvers.find("fbsde") != std::string::npos) {
        // align the window boundaries with the split so adaptedness holds at
        // window granularity
        std::size_t fs = l.sc.window.fixed_steps;
        if (l.sc.window.mode != WindowPolicy::Mode::fixed_steps || fs == 0 ||
            split_step % fs != 0) {
            fs = split_step;
            for (std::size_t cand = split_step; cand >= 1; --cand)
                if (split_step % cand == 0 && cand <= l.sc.time.steps() / 2) {
                    fs = cand;
                    break;
                }
        }
        WindowPolicy pol = l.sc.window;
        pol.mode = WindowPolicy::Mode::fixed_steps;
        pol.fixed_steps = fs;
        pol.with_gradient = false;
        auto solve = [&](const BrownianPath& b) {
            auto eta = synthesize_noise_field(l.sc.problem.g, b, l.sc.grid, l.sc.deriv_order);
            auto glob = global_continuation(l.sc.problem, eta, l.sc.grid, l.sc.mc, pol);
            if (!glob.completed)
                throw std::runtime_error("adaptedness: fbsde solve did not converge");
            return glob.yhat;
        };
        const auto rep = adaptedness_check(solve, t_split, b1, b2);
        meta["fbsde"] = {{"pass", rep.pass},
                         {"first_divergence_time", rep.first_divergence_time},
                         {"slices_compared", rep.slices_compared},
                         {"window_steps", fs}};
        rows.push_back({1.0, rep.pass ? 1.0 : 0.0, rep.first_divergence_time});
        all_pass = all_pass && rep.pass;
    }
    meta["t_split"] = t_split;
    {
        auto f = run.open("adaptedness.csv");
        write_table_csv(f, {"solver", "pass", "first_divergence_time"}, rows);
    }
    {
        auto f = run.open("adaptedness.json");
        f << meta.dump(2) << "\n";
    }
    run.write_manifest(l.cfg.raw_text(), opt.config_path, l.sc.noise_seed);
    if (!all_pass) {
        std::cerr << "adaptedness: a solver depended on post-split noise\n";
        return 1;
    }
    return 0;
}

inline int cmd_report(const CommonOpts& opt) {
    namespace fs = std::filesystem;
    RunWriter run(fs::path(opt.out_dir) / "report", "report");
    std::vector<fs::path> manifests;
    for (auto it = fs::recursive_directory_iterator(opt.out_dir);
         it != fs::recursive_directory_iterator(); ++it) {
        if (it->is_regular_file() && it->path().filename() == "manifest.json" &&
            it->path().parent_path().filename() != "report")
            manifests.push_back(it->path());
    }
    std::sort(manifests.begin(), manifests.end());

    auto md = run.open("summary.md");
    md << "# Run summary\n\n";
    md << "| run | subcommand | config hash | seed | outputs |\n";
    md << "|---|---|---|---|---|\n";
    int plot_idx = 0;
    std::vector<std::string> plot_files;
    for (const auto& mpath : manifests) {
        std::ifstream in(mpath);
        nlohmann::json j;
        in >> j;
        const auto rel = fs::relative(mpath.parent_path(), opt.out_dir).string();
        md << "| " << rel << " | " << j.value("subcommand", "?") << " | "
           << j.value("config_hash", "?") << " | " << j.value("seed", 0) << " | ";
        for (const auto& o : j.value("outputs", std::vector<std::string>{})) md << o << " ";
        md << "|\n";

        // two-column plot data from the known table artifacts
        for (const auto& [name, cols] :
             std::vector<std::pair<std::string, std::pair<int, int>>>{
                 {"discrepancy.csv", {0, 1}}, {"sweep.csv", {0, 1}}, {"holder.csv", {0, 1}}}) {
            const fs::path src = mpath.parent_path() / name;
            if (!fs::exists(src)) continue;
            std::ifstream csv(src);
            std::string line;
            std::getline(csv, line);  // header
            std::ostringstream data;
            while (std::getline(csv, line)) {
                std::vector<std::string> fields;
                std::istringstream ls(line);
                std::string cell;
                while (std::getline(ls, cell, ',')) fields.push_back(cell);
                if (static_cast<int>(fields.size()) > std::max(cols.first, cols.second))
                    data << fields[cols.first] << " " << fields[cols.second] << "\n";
            }
            const std::string fname =
                "plot_" + std::to_string(plot_idx++) + "_" + name.substr(0, name.find('.')) +
                ".dat";
            auto pf = run.open(fname);
            pf << data.str();
            plot_files.push_back(fname);
        }
    }
    md << "\nPlot data files: ";
    for (const auto& f : plot_files) md << f << " ";
    md << "\n";
    run.note("runs", manifests.size());
    run.write_manifest("", "", 0);
    return 0;
}

}  // namespace detail

/// Entry point shared by the binary and the in-process tests.
inline int run(std::vector<std::string> args) {
    CLI::App app{"stochastic Burgers scenario runner"};
    app.require_subcommand(1);

    CommonOpts opt;
    auto add_common = [&opt](CLI::App* sub, bool need_config = true) {
        auto* c = sub->add_option("--config", opt.config_path, "scenario config file");
        if (need_config) c->required();
        sub->add_option("--out", opt.out_dir, "output directory")
            ->required()
            ->envname("SBURGERS_OUT");
        sub->add_option("--seed", opt.seed_override, "override the noise seed");
        sub->add_option("--threads", opt.threads, "cap worker threads");
        sub->add_option("--tol", opt.tol_override, "override the solver/compare tolerance");
    };

    auto* fd = app.add_subcommand("solve-fd", "finite-difference solve of the substituted equation");
    add_common(fd);
    auto* fb = app.add_subcommand("solve-fbsde", "stitched local FBSDE solves");
    add_common(fb);
    auto* in = app.add_subcommand("solve-inviscid", "nu = 0 characteristics fixed point");
    add_common(in);
    auto* cp = app.add_subcommand("compare", "FBSDE vs finite differences on shared noise");
    add_common(cp);
    auto* sw = app.add_subcommand("inviscid-sweep", "vanishing-viscosity error sweep");
    add_common(sw);
    auto* ho = app.add_subcommand("holder", "time-Hoelder exponent of the noise field");
    add_common(ho);
    auto* ad = app.add_subcommand("adaptedness", "coupled-noise bit-identity check");
    add_common(ad);
    auto* rp = app.add_subcommand("report", "assemble CSV/JSON artifacts into a summary");
    add_common(rp, false);

    std::vector<const char*> argv;
    argv.push_back("sburgers");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (fd->parsed()) return detail::cmd_solve_fd(opt);
        if (fb->parsed()) return detail::cmd_solve_fbsde(opt);
        if (in->parsed()) return detail::cmd_solve_inviscid(opt);
        if (cp->parsed()) return detail::cmd_compare(opt);
        if (sw->parsed()) return detail::cmd_inviscid_sweep(opt);
        if (ho->parsed()) return detail::cmd_holder(opt);
        if (ad->parsed()) return detail::cmd_adaptedness(opt);
        if (rp->parsed()) return detail::cmd_report(opt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid request: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace sburgers::cli
