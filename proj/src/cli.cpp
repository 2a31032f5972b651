#include "smc/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>

#include <CLI11.hpp>

#include "smc/correction.hpp"
#include "smc/errors.hpp"
#include "smc/fd.hpp"
#include "smc/nonregen.hpp"
#include "smc/simulate.hpp"
#include "smc/sweep.hpp"

namespace smc {

namespace {

std::string pretty(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

bool any_nonregen(const StateSpaceModel& m) {
    for (const auto& s : m.states)
        if (!s.regeneration && !s.absorbing) return true;
    return false;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write output file: " + path);
    out << text;
}

void write_series_csv(const std::string& path,
                      const std::vector<std::pair<double, double>>& series) {
    std::string text = "t,value\n";
    for (const auto& [t, v] : series)
        text += csv_number(t) + "," + csv_number(v) + "\n";
    write_file(path, text);
}

SimConfig sim_defaults(const StateSpaceModel& m, std::optional<double> horizon,
                       std::optional<std::pair<double, double>> window,
                       long replications, std::uint64_t seed) {
    SimConfig cfg;
    const bool qs_mode = m.has_absorbing() && !m.renewal;
    cfg.horizon = horizon.value_or(qs_mode ? 6.0 : 1000.0);
    const std::pair<double, double> w =
        window.value_or(qs_mode ? std::make_pair(4.0, 6.0) : std::make_pair(100.0, 1000.0));
    cfg.hazard_window = w;
    cfg.averaging_window = w;
    cfg.replications = replications;
    cfg.seed = seed;
    return cfg;
}

struct CommonArgs {
    std::string model_path;
    std::string out_path;
    std::uint64_t seed = 12345;
    long replications = 100000;
    std::optional<double> horizon;
    std::optional<std::vector<double>> window;
    double dt = 6e-4;
    long steps = 10000;
    double tol = 1e-10;
    int max_iter = 200;
    bool strip_renewal = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_sim, bool with_fd,
                bool with_fp) {
    cmd->add_option("--model", a.model_path, "model JSON file")->required();
    cmd->add_option("--out", a.out_path, "CSV output path");
    if (with_sim) {
        cmd->add_option("--seed", a.seed, "RNG seed");
        cmd->add_option("--replications", a.replications, "Monte Carlo replications");
        cmd->add_option_function<double>(
               "--horizon", [&a](const double& v) { a.horizon = v; }, "simulation horizon")
            ->expected(1);
        cmd->add_option_function<std::vector<double>>(
               "--window", [&a](const std::vector<double>& v) { a.window = v; },
               "window A B (hazard and averaging)")
            ->expected(2);
        cmd->add_flag("--strip-renewal", a.strip_renewal,
                      "drop the artificial renewal (absorbing semantics)");
    }
    if (with_fd) {
        cmd->add_option("--dt", a.dt, "finite-difference step");
        cmd->add_option("--steps", a.steps, "finite-difference step count");
        if (!with_sim)
            cmd->add_option_function<std::vector<double>>(
                   "--window", [&a](const std::vector<double>& v) { a.window = v; },
                   "averaging window A B")
                ->expected(2);
    }
    if (with_fp) {
        cmd->add_option("--tol", a.tol, "fixed-point tolerance on k");
        cmd->add_option("--max-iter", a.max_iter, "fixed-point iteration cap");
    }
}

std::pair<double, double> window_pair(const CommonArgs& a,
                                      std::pair<double, double> fallback) {
    if (a.window && a.window->size() == 2) return {(*a.window)[0], (*a.window)[1]};
    return fallback;
}

void print_trace(const FixedPointTrace& trace, std::ostream& err) {
    err << "fixed-point trace (iteration, k):\n";
    for (size_t i = 0; i < trace.iterations.size(); ++i)
        err << "  " << i << ", " << pretty(trace.iterations[i].k) << "\n";
}

int cmd_steady(const CommonArgs& a, std::ostream& out) {
    const StateSpaceModel m = ModelDocument::from_file(a.model_path).resolve();
    Eigen::VectorXd p;
    std::vector<double> rates;
    if (any_nonregen(m)) {
        auto sol = solve_nonregen(m);
        p = sol.p;
        rates = sol.rates;
        out << "steady state (non-regeneration two-pass, " << sol.passes << " passes)\n";
    } else {
        auto sol = correct_steady(m);
        p = sol.p;
        rates = sol.rates;
        out << "steady state (corrected rates)\n";
    }
    for (int s = 0; s < m.n(); ++s)
        out << "  P[" << m.states[s].name << "] = " << pretty(p(s)) << "\n";
    out << "rates:\n";
    for (size_t t = 0; t < rates.size(); ++t)
        out << "  " << m.transition_label(static_cast<int>(t)) << " -> "
            << pretty(rates[t]) << "\n";
    if (!a.out_path.empty()) {
        std::string csv = "state,P\n";
        for (int s = 0; s < m.n(); ++s)
            csv += m.states[s].name + "," + csv_number(p(s)) + "\n";
        write_file(a.out_path, csv);
    }
    return 0;
}

int cmd_hazard(const CommonArgs& a, std::ostream& out, std::ostream& err) {
    const StateSpaceModel m = ModelDocument::from_file(a.model_path).resolve();
    HazardSolution sol;
    try {
        sol = solve_hazard(m, a.tol, a.max_iter);
    } catch (const NonConvergenceError& e) {
        print_trace(e.trace, err);
        throw;
    }
    const double rh = renewal_hazard(m);
    out << "asymptotic hazard (Perron-Frobenius): k = " << pretty(sol.qs.k) << "\n";
    out << "renewal-based hazard:                 h = " << pretty(rh) << "\n";
    out << "gap (transient contribution):         " << pretty(sol.qs.k - rh) << "\n";
    out << "iterations: " << sol.trace.iterations.size() - 1
        << ", final residual: " << pretty(sol.trace.final_residual) << "\n";
    out << "slem diagnostic |l2|/|l1|: " << pretty(sol.qs.slem) << "\n";
    out << "conditional probabilities:\n";
    for (size_t i = 0; i < sol.qs.up_states.size(); ++i)
        out << "  v[" << m.states[sol.qs.up_states[i]].name << "] = "
            << pretty(sol.qs.v(static_cast<int>(i))) << "\n";
    out << "corrected rates:\n";
    for (size_t t = 0; t < sol.rates.size(); ++t) {
        out << "  " << m.transition_label(static_cast<int>(t)) << " -> "
            << pretty(sol.rates[t]);
        if (sol.corrections[t])
            out << "  (gamma = " << pretty(sol.corrections[t]->gamma) << ")";
        out << "\n";
    }
    if (!a.out_path.empty()) {
        std::string csv = "iteration,k\n";
        for (size_t i = 0; i < sol.trace.iterations.size(); ++i)
            csv += std::to_string(i) + "," + csv_number(sol.trace.iterations[i].k) + "\n";
        write_file(a.out_path, csv);
    }
    return 0;
}

int cmd_simulate(const CommonArgs& a, std::ostream& out) {
    StateSpaceModel m = ModelDocument::from_file(a.model_path).resolve();
    if (a.strip_renewal) m = m.without_renewal();
    SimConfig cfg = sim_defaults(m, a.horizon,
                                 a.window ? std::optional(window_pair(a, {0, 0}))
                                          : std::nullopt,
                                 a.replications, a.seed);
    const SimResult r = simulate(m, cfg);
    out << "Monte Carlo: " << cfg.replications << " replications, horizon "
        << pretty(cfg.horizon) << ", averaging [" << pretty(cfg.averaging_window.first)
        << ", " << pretty(cfg.averaging_window.second) << "]\n";
    for (int s = 0; s < m.n(); ++s)
        out << "  P[" << m.states[s].name << "] = " << pretty(r.state_probs[s].value)
            << " +- " << pretty(r.state_probs[s].std_error) << "\n";
    if (r.hazard)
        out << "  hazard = " << pretty(r.hazard->value) << " +- "
            << pretty(r.hazard->std_error) << "  (samples: " << r.hazard->samples
            << ")\n";
    if (!a.out_path.empty() && r.hazard) write_series_csv(a.out_path, r.hazard->series);
    return 0;
}

int cmd_fd(const CommonArgs& a, std::ostream& out) {
    const StateSpaceModel m = ModelDocument::from_file(a.model_path).resolve();
    const auto w = window_pair(a, {4.0, 6.0});
    const FdResult r = fd_hazard(m, a.dt, a.steps, w);
    out << "finite difference: dt = " << pretty(a.dt) << ", steps = " << a.steps
        << ", window [" << pretty(w.first) << ", " << pretty(w.second) << "]\n";
    out << "  window-average hazard = " << pretty(r.window_average) << "\n";
    out << "  mass defect = " << pretty(r.mass_defect) << "\n";
    if (!a.out_path.empty()) write_series_csv(a.out_path, r.series);
    return 0;
}

int cmd_verify(const CommonArgs& a, std::ostream& out) {
    const StateSpaceModel m = ModelDocument::from_file(a.model_path).resolve();
    const bool absorbing = m.has_absorbing();

    if (absorbing) {
        const StateSpaceModel qs = m.without_renewal();
        const HazardSolution sol = solve_hazard(qs, a.tol, a.max_iter);
        out << "analytic PF hazard: k = " << pretty(sol.qs.k) << "\n";
        bool fd_ok = true;
        try {
            const FdResult fd = fd_hazard(qs, a.dt, a.steps, window_pair(a, {4.0, 6.0}));
            out << "finite-difference hazard: " << pretty(fd.window_average)
                << "  |analytic - fd| = " << pretty(std::abs(sol.qs.k - fd.window_average))
                << "\n";
        } catch (const ValidationError& e) {
            fd_ok = false;
            out << "finite-difference oracle not applicable: " << e.what() << "\n";
        }
        (void)fd_ok;
        SimConfig cfg = sim_defaults(qs, a.horizon,
                                     a.window ? std::optional(window_pair(a, {0, 0}))
                                              : std::nullopt,
                                     a.replications, a.seed);
        const SimResult mc = simulate(qs, cfg);
        if (mc.hazard) {
            const double d = std::abs(sol.qs.k - mc.hazard->value);
            out << "Monte Carlo hazard: " << pretty(mc.hazard->value) << " +- "
                << pretty(mc.hazard->std_error) << "  |analytic - mc| = " << pretty(d)
                << " (" << pretty(d / std::max(mc.hazard->std_error, 1e-300))
                << " std errors)\n";
        }
    }
    if (!absorbing || m.renewal) {
        // steady side
        Eigen::VectorXd p;
        if (any_nonregen(m))
            p = solve_nonregen(m).p;
        else
            p = correct_steady(m).p;
        SimConfig cfg = sim_defaults(m, a.horizon,
                                     a.window ? std::optional(window_pair(a, {0, 0}))
                                              : std::nullopt,
                                     a.replications, a.seed);
        const SimResult mc = simulate(m, cfg);
        out << "steady-state comparison (analytic vs Monte Carlo):\n";
        for (int s = 0; s < m.n(); ++s) {
            const double d = std::abs(p(s) - mc.state_probs[s].value);
            out << "  P[" << m.states[s].name << "]: " << pretty(p(s)) << " vs "
                << pretty(mc.state_probs[s].value) << " +- "
                << pretty(mc.state_probs[s].std_error) << "  (delta "
                << pretty(d / std::max(mc.state_probs[s].std_error, 1e-300))
                << " std errors)\n";
        }
        if (m.renewal && absorbing && mc.hazard) {
            const double rh = renewal_hazard(m);
            out << "renewal hazard: analytic " << pretty(rh) << " vs mc "
                << pretty(mc.hazard->value) << " +- " << pretty(mc.hazard->std_error)
                << "\n";
        }
    }
    return 0;
}

int cmd_sweep(const CommonArgs& a, const SweepSpec& spec, std::ostream& out) {
    const ModelDocument doc = ModelDocument::from_file(a.model_path);
    SweepOptions opts;
    const StateSpaceModel m = doc.resolve();
    opts.sim = sim_defaults(m, a.horizon,
                            a.window ? std::optional(window_pair(a, {0, 0}))
                                     : std::nullopt,
                            a.replications, a.seed);
    opts.fd_dt = a.dt;
    opts.fd_steps = a.steps;
    opts.fd_window = window_pair(a, {4.0, 6.0});
    opts.tol = a.tol;
    opts.max_iter = a.max_iter;
    const std::string csv = run_sweep(doc, spec, opts);
    if (!a.out_path.empty())
        write_file(a.out_path, csv);
    else
        out << csv;
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"asymptotic measures of state-space models with non-exponential "
                 "transitions via corrected Markov models"};
    app.require_subcommand(1);

    CommonArgs a;
    SweepSpec spec;
    std::vector<double> linspace;
    std::string analysis = "hazard";

    CLI::App* steady = app.add_subcommand("steady", "corrected steady-state probabilities");
    add_common(steady, a, false, false, false);
    CLI::App* hazard = app.add_subcommand("hazard", "quasi-stationary hazard fixed point");
    add_common(hazard, a, false, false, true);
    CLI::App* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo oracle");
    add_common(simulate_cmd, a, true, false, false);
    CLI::App* fd = app.add_subcommand("fd", "finite-difference oracle");
    add_common(fd, a, false, true, false);
    CLI::App* verify = app.add_subcommand("verify", "analytic vs both applicable oracles");
    add_common(verify, a, true, true, true);
    CLI::App* sweep = app.add_subcommand("sweep", "parameter sweep to CSV");
    add_common(sweep, a, true, true, true);
    sweep->add_option("--path", spec.parameter_path, "dotted model path to sweep")->required();
    sweep->add_option("--values", spec.values, "comma-separated values")->delimiter(',');
    sweep->add_option("--linspace", linspace, "A B N evenly spaced values")->expected(3);
    sweep->add_option("--analysis", analysis, "steady | hazard | simulate | fd");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << "argument error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (*steady) return cmd_steady(a, out);
        if (*hazard) return cmd_hazard(a, out, err);
        if (*simulate_cmd) return cmd_simulate(a, out);
        if (*fd) return cmd_fd(a, out);
        if (*verify) return cmd_verify(a, out);
        if (*sweep) {
            if (!linspace.empty()) {
                const int n = static_cast<int>(linspace[2]);
                for (int i = 0; i < n; ++i)
                    spec.values.push_back(
                        linspace[0] + (linspace[1] - linspace[0]) * i / std::max(n - 1, 1));
            }
            if (analysis == "steady") spec.analysis = SweepAnalysis::steady;
            else if (analysis == "hazard") spec.analysis = SweepAnalysis::hazard;
            else if (analysis == "simulate") spec.analysis = SweepAnalysis::simulate;
            else if (analysis == "fd") spec.analysis = SweepAnalysis::fd;
            else throw ValidationError("sweep: unknown analysis '" + analysis + "'");
            return cmd_sweep(a, spec, out);
        }
    } catch (const ValidationError& e) {
        err << "validation error:\n" << e.what() << "\n";
        return 1;
    } catch (const NonConvergenceError& e) {
        err << "numerical non-convergence: " << e.what() << "\n";
        print_trace(e.trace, err);
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const std::runtime_error& e) {
        err << "i/o error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}

} // namespace smc
