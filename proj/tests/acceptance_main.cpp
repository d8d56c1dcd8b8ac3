// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Tolerances are pinned here, not configurable.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "sburgers/cli_app.hpp"
#include "sburgers/sburgers.hpp"

using namespace sburgers;

namespace {

struct Result {
    bool pass = false;
    std::string detail;
};

struct Harness {
    int failures = 0;
    int index = 0;

    void run(const std::string& name, const std::function<Result()>& fn) {
        ++index;
        const auto t0 = std::chrono::steady_clock::now();
        Result r;
        try {
            r = fn();
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] %2d. %s — %s (%.1fs)\n", r.pass ? "PASS" : "FAIL", index, name.c_str(),
                    r.detail.c_str(), secs);
        std::fflush(stdout);
        if (!r.pass) ++failures;
    }
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Shared reference instances: smooth 1D periodic presets on [-1,1], T = 1/4,
// dt = 1/256 (64 steps), 64 nodes, frozen noise seed.
// ---------------------------------------------------------------------------

constexpr std::size_t kNodes = 64;
constexpr std::size_t kSteps = 64;  // dt = 1/256 over T = 0.25
constexpr std::uint64_t kNoiseSeed = 2027;

BurgersProblem reference_instance(double nu) {
    BurgersProblem p;
    p.viscosity = nu;
    p.horizon = 0.25;
    p.dim = 1;
    p.noise_dim = 1;
    p.domain = {{-1.0, 1.0, 8}};
    p.h = h_sine(1, {{0.4, {std::numbers::pi}, 0.0}});
    p.f = f_zero(1);
    p.g = g_sine(1, 1, {{0.15, {std::numbers::pi}, 0.6}});
    return p;
}

McParams reference_mc() {
    McParams mc;
    mc.paths = 20000;
    mc.tol = 1e-3;
    mc.max_sweeps = 12;
    mc.window_safety = 0.8;
    mc.seed = 4242;
    return mc;
}

struct Instance {
    double nu = 0.0;
    BurgersProblem problem;
    std::shared_ptr<NoiseField> eta;
    SpaceTimeField yhat_fd;
    GlobalSolution glob;
    double sup_fd = 0.0;
    double dist = 0.0;
    double picard_ratio = 0.0;  // from a full-horizon single-window solve
    bool picard_converged = false;
    bool ok = false;
};

struct Shared {
    std::vector<Instance> instances;  // nu = 0.05, 0.1, 0.2
    Instance* at(double nu) {
        for (auto& i : instances)
            if (i.nu == nu) return &i;
        return nullptr;
    }
};

Shared g_shared;

Instance solve_instance(double nu) {
    Instance inst;
    inst.nu = nu;
    inst.problem = reference_instance(nu);
    auto sg = inst.problem.make_grid(kNodes);
    auto b = build_brownian(kNoiseSeed, 1, inst.problem.horizon, kSteps);
    inst.eta = std::make_shared<NoiseField>(synthesize_noise_field(inst.problem.g, b, sg));
    GridSpec grid(sg, TimeGrid(inst.problem.horizon, kSteps));
    inst.yhat_fd = fd_solve_forward(inst.problem, *inst.eta, grid);
    inst.sup_fd = inst.yhat_fd.sup_norm();
    inst.glob = global_continuation(inst.problem, *inst.eta, sg, reference_mc());
    inst.dist = inst.glob.completed ? sup_distance(inst.glob.yhat, inst.yhat_fd) : 1e300;

    // full-horizon single window: long enough for the Picard iteration to
    // show an actual contraction sequence (the auto windows converge in one
    // or two sweeps)
    auto eta_bar = std::make_shared<const NoiseField>(time_reverse(*inst.eta));
    TransformedForce Fbar(inst.problem.f, nu, eta_bar, true);
    auto single = picard_local_solve(Fbar, terminal_from_initial(inst.problem.h), nu, 0, kSteps,
                                     sg, reference_mc());
    inst.picard_ratio = single.log.contraction_ratio;
    inst.picard_converged = single.log.converged;
    inst.ok = inst.glob.completed;
    return inst;
}

// ---------------------------------------------------------------------------

Result criterion_cole_hopf() {
    const double nu = 0.1 / std::numbers::pi;
    const auto prof = profile_sine(-1.0, std::numbers::pi);
    auto run_level = [&](int lvl, double& sup_err) {
        BurgersProblem p = reference_instance(nu);
        p.horizon = 1.0;
        p.h = h_sine(1, {{-1.0, {std::numbers::pi}, 0.0}});
        p.g = g_zero(1, 1);
        const std::size_t nodes = 512u << lvl;   // h_x = 1/256 at level 0
        const std::size_t steps = 1024u << lvl;  // dt = 1/1024 at level 0
        auto sg = p.make_grid(nodes);
        auto b = build_brownian(1, 1, 1.0, steps);
        auto eta = synthesize_noise_field(p.g, b, sg, 2);
        GridSpec grid(sg, TimeGrid(1.0, steps));
        auto yh = fd_solve_forward(p, eta, grid);
        sup_err = 0.0;
        for (std::size_t j = 0; j <= steps; ++j) {
            const double t = grid.time.time(j);
            if (t > 0.8 + 1e-12) break;
            for (std::size_t m = 0; m < nodes; ++m) {
                const double exact = cole_hopf_oracle_1d(nu, prof, t, sg.coord(0, m));
                sup_err = std::max(sup_err, std::fabs(yh.at(j, m, 0) - exact));
            }
        }
    };
    const auto t0 = std::chrono::steady_clock::now();
    double e0 = 0.0, e1 = 0.0;
    run_level(0, e0);
    run_level(1, e1);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double ratio = e0 / e1;
    Result r;
    r.pass = e0 <= 1e-2 && ratio >= 1.8 && secs <= 30.0;
    r.detail = "sup err " + fmt(e0) + " (<= 0.01), halving ratio " + fmt(ratio) +
               " (>= 1.8), runtime " + fmt(secs) + "s (<= 30)";
    return r;
}

Result criterion_fbsde_fd() {
    Result r;
    r.pass = true;
    for (double nu : {0.05, 0.1, 0.2}) {
        const auto t0 = std::chrono::steady_clock::now();
        g_shared.instances.push_back(solve_instance(nu));
        auto& inst = g_shared.instances.back();
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool ok = inst.ok && inst.dist <= 0.05 * inst.sup_fd && inst.picard_converged &&
                        inst.picard_ratio <= 0.9 && secs <= 300.0;
        r.pass = r.pass && ok;
        r.detail += "nu=" + fmt(nu) + ": dist " + fmt(inst.dist) + " vs " +
                    fmt(0.05 * inst.sup_fd) + ", rho " + fmt(inst.picard_ratio) + ", " +
                    fmt(secs) + "s; ";
    }
    return r;
}

Result criterion_linear_bsde() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t steps = 256;
    TimeGrid tg(1.0, steps);
    SpatialGrid sg({{-1.0, 1.0, 16}}, BoundaryMode::periodic);
    auto b = build_brownian(5, 1, 1.0, steps);
    auto eta = std::make_shared<const NoiseField>(synthesize_noise_field(g_zero(1, 1), b, sg));
    TransformedForce Fbar(f_linear_drag(1, 1.0), 0.1, eta, true);
    McParams mc = reference_mc();
    mc.paths = 4000;
    mc.max_sweeps = 20;
    FbsdeBatch batch;
    auto sol = picard_local_solve(Fbar, terminal_from_initial(h_constant(1, {1.0})), 0.1, 0,
                                  steps, sg, mc, 0.0, &batch);
    const double dt = tg.dt();
    double worst_excess = -1e300;
    double worst_err = 0.0;
    for (std::size_t l = 0; l <= steps; ++l) {
        double mean = 0.0, sq = 0.0;
        for (std::size_t p = 0; p < batch.paths; ++p) {
            const double v = batch.y_at(p, l)[0];
            mean += v;
            sq += v * v;
        }
        mean /= static_cast<double>(batch.paths);
        const double var =
            std::max(0.0, sq / static_cast<double>(batch.paths) - mean * mean);
        const double stderr_l = std::sqrt(var / static_cast<double>(batch.paths));
        const double err = std::fabs(mean - std::exp(-(1.0 - tg.time(l))));
        worst_err = std::max(worst_err, err);
        worst_excess = std::max(worst_excess, err - (3.0 * dt + 3.0 * stderr_l));
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Result r;
    r.pass = sol.log.converged && worst_excess <= 0.0 && secs <= 30.0;
    r.detail = "max |Y - exp(-(T-t))| " + fmt(worst_err) + ", margin to 3dt+3se " +
               fmt(-worst_excess) + ", runtime " + fmt(secs) + "s";
    return r;
}

// first-window local solves of the reference instances, reused by 4 and 5
struct WindowCheck {
    LocalSolution sol;
    FbsdeBatch batch;
    std::shared_ptr<const NoiseField> eta_bar;
    std::unique_ptr<TransformedForce> Fm;
    TerminalCondition terminal;
    double nu = 0.0;
};

std::map<double, WindowCheck> g_windows;

WindowCheck& window_check_for(const Instance& inst) {
    auto it = g_windows.find(inst.nu);
    if (it != g_windows.end()) return it->second;
    WindowCheck wc;
    wc.nu = inst.nu;
    wc.eta_bar = std::make_shared<const NoiseField>(time_reverse(*inst.eta));
    TransformedForce Fp(inst.problem.f, inst.nu, wc.eta_bar, true);
    wc.Fm = std::make_unique<TransformedForce>(cutoff_force(Fp, inst.glob.M));
    wc.terminal = terminal_from_initial(inst.problem.h);
    const auto& w0 = inst.glob.windows.front();
    wc.sol = picard_local_solve(*wc.Fm, wc.terminal, inst.nu, w0.j_begin, w0.j_end,
                                inst.problem.make_grid(kNodes), reference_mc(), inst.glob.M,
                                &wc.batch);
    return g_windows.emplace(inst.nu, std::move(wc)).first->second;
}

Result criterion_markov() {
    Result r;
    r.pass = true;
    auto grid = reference_instance(0.1).make_grid(kNodes);
    for (double nu : {0.05, 0.1, 0.2}) {
        auto* inst = g_shared.at(nu);
        if (!inst || !inst->ok) {
            r.pass = false;
            r.detail += "nu=" + fmt(nu) + ": no converged solve; ";
            continue;
        }
        auto& wc = window_check_for(*inst);
        auto rep = markov_identity_check(wc.sol, *wc.Fm, wc.terminal, nu, grid, reference_mc(),
                                         4000);
        r.pass = r.pass && rep.pass;
        r.detail += "nu=" + fmt(nu) + ": max " + fmt(rep.max_discrepancy) + " tol " +
                    fmt(rep.tolerance) + "; ";
    }
    return r;
}

Result criterion_derivative() {
    auto* inst = g_shared.at(0.1);
    Result r;
    if (!inst || !inst->ok) {
        r.detail = "reference solve unavailable";
        return r;
    }
    auto grid = inst->problem.make_grid(kNodes);
    auto& wc = window_check_for(*inst);
    McParams mc = reference_mc();
    derivative_fbsde_solve(wc.batch, wc.terminal, *wc.Fm, inst->nu, grid, wc.sol.ybar, mc);

    // the compared quantity is dY - FD(Y): both sides carry Monte Carlo
    // noise, so the half-sample split rebuilds both per half
    const double h = grid.spacing(0);
    auto discrepancy_profile = [&](const SpaceTimeField& ybar) {
        std::vector<double> d(kNodes);
        for (std::size_t m = 0; m < kNodes; ++m) {
            const std::size_t mp = (m + 1) % kNodes, mm = (m + kNodes - 1) % kNodes;
            const double fd = (ybar.at(0, mp, 0) - ybar.at(0, mm, 0)) / (2.0 * h);
            d[m] = ybar.grad_at(0, m, 0, 0) - fd;
        }
        return d;
    };
    auto half_profile = [&](int parity) {
        auto hb = detail::half_batch(wc.batch, parity);
        auto pass = regress_backward(hb, wc.terminal, *wc.Fm, inst->nu, grid, mc);
        SpaceTimeField yb = pass.yfield;
        derivative_fbsde_solve(hb, wc.terminal, *wc.Fm, inst->nu, grid, yb, mc);
        return discrepancy_profile(yb);
    };
    const auto d0 = half_profile(0);
    const auto d1 = half_profile(1);
    double half_diff = 0.0;
    for (std::size_t m = 0; m < kNodes; ++m)
        half_diff = std::max(half_diff, std::fabs(d0[m] - d1[m]));
    const double mc_stderr = 0.5 * half_diff;

    const auto dfull = discrepancy_profile(wc.sol.ybar);
    double worst = 0.0;
    for (double v : dfull) worst = std::max(worst, std::fabs(v));
    const double tol = std::max(5e-3, 3.0 * mc_stderr);
    r.pass = worst <= tol;
    r.detail = "max |dY - FD(Y)| " + fmt(worst) + " vs max(5e-3, 3se) = " + fmt(tol);
    return r;
}

Result criterion_adaptedness() {
    BurgersProblem p = reference_instance(0.1);
    auto sg = p.make_grid(kNodes);
    const std::size_t split = kSteps / 2;
    const double t_split = p.horizon / 2.0;
    auto b1 = build_brownian(kNoiseSeed, 1, p.horizon, kSteps);
    auto b2 = b1.resampled_after(split, 987654321);

    auto solve_fd = [&](const BrownianPath& b) {
        GridSpec gs(sg, TimeGrid(p.horizon, kSteps));
        auto eta = synthesize_noise_field(p.g, b, sg);
        return fd_solve_forward(p, eta, gs);
    };
    const auto rep_fd = adaptedness_check(solve_fd, t_split, b1, b2);

    McParams mc = reference_mc();
    mc.paths = 6000;
    WindowPolicy pol;
    pol.mode = WindowPolicy::Mode::fixed_steps;
    pol.fixed_steps = 16;  // divides the split step
    pol.with_gradient = false;
    auto solve_fb = [&](const BrownianPath& b) {
        auto eta = synthesize_noise_field(p.g, b, sg);
        auto glob = global_continuation(p, eta, sg, mc, pol);
        if (!glob.completed) throw std::runtime_error("fbsde solve did not converge");
        return glob.yhat;
    };
    const auto rep_fb = adaptedness_check(solve_fb, t_split, b1, b2);

    Result r;
    r.pass = rep_fd.pass && rep_fb.pass;
    r.detail = std::string("fd ") + (rep_fd.pass ? "bit-identical" : "diverged") + " (" +
               std::to_string(rep_fd.slices_compared) + " slices), fbsde " +
               (rep_fb.pass ? "bit-identical" : "diverged") + " (" +
               std::to_string(rep_fb.slices_compared) + " slices)";
    return r;
}

Result criterion_inviscid_limit() {
    const auto t0 = std::chrono::steady_clock::now();
    BurgersProblem p = reference_instance(0.0);
    p.h = h_sine(1, {{0.35, {std::numbers::pi}, 0.0}});
    p.g = g_zero(1, 1);  // deterministic smooth pre-shock instance
    auto sg = p.make_grid(48);
    auto b = build_brownian(kNoiseSeed, 1, p.horizon, kSteps);
    auto eta = synthesize_noise_field(p.g, b, sg);
    McParams mc = reference_mc();
    std::vector<double> nus{0.2, 0.1, 0.05, 0.025};
    auto rep = viscosity_sweep(p, nus, eta, sg, kSteps, mc);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Result r;
    r.pass = !rep.partial && rep.monotone_ok && !rep.exponent_degenerate &&
             rep.exponent >= 0.45 && secs <= 900.0;
    std::string errs;
    for (const auto& row : rep.rows) errs += fmt(row.sup_err) + " ";
    r.detail = "errors [" + errs + "], monotone " + (rep.monotone_ok ? "yes" : "no") +
               ", exponent " + fmt(rep.exponent) + " (>= 0.45), runtime " + fmt(secs) + "s";
    return r;
}

Result criterion_uniform_bound() {
    Result r;
    double lo = 1e300, hi = 0.0;
    bool below_m = true;
    std::string sups;
    for (double nu : {0.05, 0.1, 0.2}) {
        auto* inst = g_shared.at(nu);
        if (!inst || !inst->ok) {
            r.detail = "reference solves unavailable";
            return r;
        }
        const double s = inst->glob.yhat.sup_norm();
        lo = std::min(lo, s);
        hi = std::max(hi, s);
        below_m = below_m && s <= inst->glob.M;
        sups += fmt(s) + " ";
    }
    const double variation = (hi - lo) / hi;
    r.pass = variation <= 0.10 && below_m;
    r.detail = "sup norms [" + sups + "], variation " + fmt(variation) +
               " (<= 0.1), below M " + (below_m ? "yes" : "no");
    return r;
}

Result criterion_holder() {
    const auto t0 = std::chrono::steady_clock::now();
    BurgersProblem p = reference_instance(0.1);
    auto grid = p.make_grid(8);
    const std::size_t steps = 1 << 14;
    std::size_t in_band = 0;
    const std::size_t seeds = 100;
    for (std::size_t s = 0; s < seeds; ++s) {
        auto b = build_brownian(kNoiseSeed + 100 + s, 1, 1.0, steps);
        auto eta = synthesize_noise_field(p.g, b, grid, 0);
        std::vector<double> series(eta.time_grid().slices());
        for (std::size_t j = 0; j < series.size(); ++j) series[j] = eta.at(0, j, 3, 0);
        const auto est = holder_exponent(series, 16);
        if (!est.degenerate && est.exponent >= 0.4 && est.exponent <= 0.55) ++in_band;
    }
    const double fraction = static_cast<double>(in_band) / static_cast<double>(seeds);

    // reconstructed y exponent of the reference solve
    double y_exp = 0.0;
    bool y_ok = false;
    if (auto* inst = g_shared.at(0.1); inst && inst->ok) {
        SpaceTimeField y = inst->glob.yhat;
        y.gradient.clear();
        y = reconstruct(y, *inst->eta);
        std::vector<double> series(y.time.slices());
        for (std::size_t j = 0; j < series.size(); ++j) series[j] = y.at(j, kNodes / 2, 0);
        const auto est = holder_exponent(series, 8);
        y_exp = est.exponent;
        y_ok = !est.degenerate && est.exponent <= 0.55;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Result r;
    r.pass = fraction >= 0.95 && y_ok;
    r.detail = "eta exponent in [0.4, 0.55] for " + fmt(100.0 * fraction) +
               "% of seeds (>= 95%), y exponent " + fmt(y_exp) + " (<= 0.55), " + fmt(secs) + "s";
    return r;
}

Result criterion_periodicity() {
    BurgersProblem p = reference_instance(0.1);
    auto b = build_brownian(kNoiseSeed, 1, p.horizon, kSteps);
    GridSpec grid(p.make_grid(kNodes), TimeGrid(p.horizon, kSteps));
    std::vector<double> shift{0.5};  // quarter period
    const double disc = periodic_shift_check(p, b, grid, shift);
    GridSpec grid2(p.make_grid(kNodes), TimeGrid(p.horizon, kSteps));
    auto eta = synthesize_noise_field(p.g, b, grid2.space);
    const double scale = fd_solve_forward(p, eta, grid2).sup_norm();
    const double rel = scale > 0.0 ? disc / scale : disc;
    Result r;
    r.pass = rel <= 1e-10;
    r.detail = "relative shift discrepancy " + fmt(rel) + " (<= 1e-10)";
    return r;
}

Result criterion_reproducibility() {
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "sburgers_acceptance_repro";
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path cfg = root / "scenario.cfg";
    {
        std::ofstream f(cfg);
        f << "[problem]\ndimension = 1\nnoise_dim = 1\nviscosity = 0.1\nhorizon = 0.25\n"
             "domain = periodic\ndomain_lo = -1\ndomain_hi = 1\n"
             "[initial]\npreset = sine\namp = 0.4\nmode = 1\n"
             "[noise_g]\npreset = sine\namp = 0.1\nmode = 1\nphase = 0.6\n"
             "[grid]\nnodes = 16\ntime_steps = 32\n[noise]\nseed = 11\n"
             "[mc]\npaths = 1200\ntol = 2e-3\n[window]\nwith_gradient = false\n"
             "[output]\ndump_noise = true\n"
             "[sweep]\nnus = 0.4, 0.2, 0.1, 0.04\nwindow_steps = 32\n"
             "[holder]\nseeds = 4\ntime_steps = 2048\n[compare]\ntolerance = 0.2\n";
    }
    auto payloads = [&](const fs::path& dir) {
        std::map<std::string, std::string> out;
        for (const auto& e : fs::recursive_directory_iterator(dir)) {
            if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
            std::ifstream in(e.path(), std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            out[fs::relative(e.path(), dir).string()] = ss.str();
        }
        return out;
    };
    Result r;
    r.pass = true;
    for (const char* sub : {"solve-fd", "solve-fbsde", "solve-inviscid", "compare", "holder",
                            "adaptedness", "inviscid-sweep"}) {
        const fs::path d1 = root / (std::string(sub) + "_1");
        const fs::path d2 = root / (std::string(sub) + "_2");
        const int c1 = cli::run({sub, "--config", cfg.string(), "--out", d1.string()});
        const int c2 = cli::run({sub, "--config", cfg.string(), "--out", d2.string()});
        bool same = c1 == 0 && c2 == 0;
        if (same) {
            const auto p1 = payloads(d1);
            const auto p2 = payloads(d2);
            same = p1.size() == p2.size();
            if (same)
                for (const auto& [name, bytes] : p1)
                    if (!p2.count(name) || p2.at(name) != bytes) same = false;
        }
        if (!same) {
            r.pass = false;
            r.detail += std::string(sub) + " differs; ";
        }
    }
    if (r.pass) r.detail = "all subcommand payloads byte-identical across reruns";
    fs::remove_all(root);
    return r;
}

}  // namespace

int main() {
    std::printf("acceptance suite — reference instances at dt=1/256, 64 nodes\n");
    Harness h;
    h.run("Cole-Hopf oracle agreement (FD, deterministic Burgers)", criterion_cole_hopf);
    h.run("FBSDE vs FD cross-validation on three frozen-noise instances", criterion_fbsde_fd);
    h.run("linear backward equation closed form", criterion_linear_bsde);
    h.run("Markov identity on fresh paths", criterion_markov);
    h.run("derivative process vs finite differences", criterion_derivative);
    h.run("adaptedness under coupled noise split at T/2", criterion_adaptedness);
    h.run("vanishing-viscosity limit rate", criterion_inviscid_limit);
    h.run("uniform-in-viscosity bound", criterion_uniform_bound);
    h.run("Hoelder regularity of the noise field and the solution", criterion_holder);
    h.run("periodic shift equivariance", criterion_periodicity);
    h.run("reproducibility of CLI payloads", criterion_reproducibility);
    std::printf("%d/%d criteria passed\n", h.index - h.failures, h.index);
    return h.failures == 0 ? 0 : 1;
}
