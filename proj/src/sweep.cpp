#include "smc/sweep.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "smc/correction.hpp"
#include "smc/errors.hpp"
#include "smc/fd.hpp"
#include "smc/nonregen.hpp"

namespace smc {

std::string csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::string sanitize(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

bool any_nonregen(const StateSpaceModel& m) {
    for (const auto& s : m.states)
        if (!s.regeneration && !s.absorbing) return true;
    return false;
}

} // namespace

std::string run_sweep(const ModelDocument& doc, const SweepSpec& spec,
                      const SweepOptions& opts) {
    if (spec.values.empty()) throw ValidationError("sweep: no values given");
    const StateSpaceModel base = doc.resolve();
    {
        ModelDocument probe = doc; // bad paths fail the sweep, not every row
        probe.set_path(spec.parameter_path, spec.values.front());
    }

    // columns for the hazard analysis: every non-exponential transition keeps
    // its base-model index even when the sweep mutates parameters
    std::vector<int> corrected;
    for (size_t t = 0; t < base.transitions.size(); ++t)
        if (!base.transitions[t].dist.is_exponential()) corrected.push_back(static_cast<int>(t));

    std::ostringstream csv;
    csv << "param,status";
    switch (spec.analysis) {
        case SweepAnalysis::steady:
            for (const auto& s : base.states) csv << ",P_" << s.name;
            break;
        case SweepAnalysis::hazard:
            for (int t : corrected) csv << ",gamma_" << t << ",mu_hat_" << t;
            csv << ",k,renewal_hazard,slem,iterations";
            break;
        case SweepAnalysis::simulate:
            for (const auto& s : base.states) csv << ",P_" << s.name << ",se_" << s.name;
            csv << ",hazard,hazard_se";
            break;
        case SweepAnalysis::fd:
            csv << ",window_average,mass_defect";
            break;
    }
    csv << "\n";

    for (double value : spec.values) {
        ModelDocument point = doc;
        csv << csv_number(value);
        try {
            point.set_path(spec.parameter_path, value);
            const StateSpaceModel m = point.resolve();
            switch (spec.analysis) {
                case SweepAnalysis::steady: {
                    Eigen::VectorXd p;
                    if (any_nonregen(m))
                        p = solve_nonregen(m).p;
                    else
                        p = correct_steady(m).p;
                    csv << ",ok";
                    for (int s = 0; s < m.n(); ++s) csv << "," << csv_number(p(s));
                    break;
                }
                case SweepAnalysis::hazard: {
                    const HazardSolution sol =
                        solve_hazard(m, opts.tol, opts.max_iter);
                    const double rh = renewal_hazard(m);
                    csv << ",ok";
                    for (int t : corrected) {
                        if (t < static_cast<int>(sol.corrections.size()) && sol.corrections[t]) {
                            csv << "," << csv_number(sol.corrections[t]->gamma) << ","
                                << csv_number(sol.corrections[t]->mu_hat);
                        } else {
                            csv << ",,";
                        }
                    }
                    csv << "," << csv_number(sol.qs.k) << "," << csv_number(rh) << ","
                        << csv_number(sol.qs.slem) << ","
                        << sol.trace.iterations.size() - 1;
                    break;
                }
                case SweepAnalysis::simulate: {
                    const SimResult r = simulate(m, opts.sim);
                    csv << ",ok";
                    for (const auto& e : r.state_probs)
                        csv << "," << csv_number(e.value) << "," << csv_number(e.std_error);
                    if (r.hazard)
                        csv << "," << csv_number(r.hazard->value) << ","
                            << csv_number(r.hazard->std_error);
                    else
                        csv << ",,";
                    break;
                }
                case SweepAnalysis::fd: {
                    const FdResult r = fd_hazard(m, opts.fd_dt, opts.fd_steps, opts.fd_window);
                    csv << ",ok," << csv_number(r.window_average) << ","
                        << csv_number(r.mass_defect);
                    break;
                }
            }
        } catch (const std::exception& e) {
            csv << "," << sanitize(e.what());
        }
        csv << "\n";
    }
    return csv.str();
}

} // namespace smc
