#include "smc/nonregen.hpp"

#include <cmath>
#include <sstream>

#include "smc/correction.hpp"
#include "smc/ctmc.hpp"
#include "smc/errors.hpp"

namespace smc {

double residual_mean_fixed_delay(double tau, double lambda) {
    if (!(tau > 0.0) || !(lambda > 0.0))
        throw ValidationError("residual_mean_fixed_delay: tau and lambda must be positive");
    const double lt = lambda * tau;
    const double f = -std::expm1(-lt); // F(tau)
    double num;                        // tau*lambda - F(tau), cancels for small lt
    if (lt < 1e-4) {
        num = lt * lt * (0.5 - lt / 6.0 + lt * lt / 24.0);
    } else {
        num = lt + std::expm1(-lt);
    }
    return num / (lambda * f);
}

double rate_from_balance(double mu, double lambda, double mu1) {
    const double denom = lambda + mu1 - mu;
    if (!(denom > 0.0))
        throw ValidationError("rate_from_balance: lambda + mu1 - mu must be positive");
    return mu * lambda / denom;
}

double weighted_inflow_rate(const std::vector<InflowClass>& classes) {
    if (classes.empty())
        throw ValidationError("weighted_inflow_rate: no inflow classes");
    double num = 0.0;
    double den = 0.0;
    for (const auto& c : classes) {
        if (!(c.source_probability > 0.0) || !(c.inflow_rate > 0.0) || !(c.branch_rate > 0.0))
            throw ValidationError("weighted_inflow_rate: class fields must be positive");
        num += c.source_probability * c.inflow_rate * c.branch_rate;
        den += c.source_probability * c.inflow_rate;
    }
    if (!(den > 0.0))
        throw ValidationError("weighted_inflow_rate: zero total inflow weight");
    return num / den;
}

namespace {

struct NonregenState {
    int state = -1;
    int out_transition = -1;     // the single outflow
    int restart_transition = -1; // where its clock starts fresh
    double tau = 0.0;
};

std::vector<NonregenState> analyze_structure(const StateSpaceModel& model) {
    std::vector<std::string> errors;
    std::vector<NonregenState> out;
    for (int s = 0; s < model.n(); ++s) {
        if (model.states[s].regeneration || model.states[s].absorbing) continue;
        NonregenState ns;
        ns.state = s;
        const auto outs = model.outflows(s);
        if (outs.size() != 1) {
            errors.push_back("solve_nonregen: non-regeneration state " + model.states[s].name +
                             " must have exactly one outflow, has " + std::to_string(outs.size()));
            continue;
        }
        ns.out_transition = outs[0];
        const auto& tr = model.transitions[ns.out_transition];
        if (tr.clock != ClockMode::resume || tr.clock_id.empty()) {
            errors.push_back("solve_nonregen: outflow of " + model.states[s].name +
                             " must continue a named clock");
            continue;
        }
        if (!tr.dist.is_fixed_delay()) {
            errors.push_back("solve_nonregen: only fixed-delay residual corrections are "
                             "supported; " + model.transition_label(ns.out_transition) +
                             " is " + tr.dist.to_string());
            continue;
        }
        ns.tau = tr.dist.delay();
        for (size_t t = 0; t < model.transitions.size(); ++t) {
            const auto& other = model.transitions[t];
            if (other.clock == ClockMode::restart && other.clock_id == tr.clock_id) {
                if (ns.restart_transition >= 0) {
                    errors.push_back("solve_nonregen: clock \"" + tr.clock_id +
                                     "\" is restarted by more than one transition");
                    break;
                }
                ns.restart_transition = static_cast<int>(t);
            }
        }
        if (ns.restart_transition < 0) {
            errors.push_back("solve_nonregen: clock \"" + tr.clock_id +
                             "\" has no restart transition");
            continue;
        }
        const auto& rt = model.transitions[ns.restart_transition];
        if (!rt.dist.is_fixed_delay() || rt.dist.delay() != ns.tau) {
            errors.push_back("solve_nonregen: clock \"" + tr.clock_id +
                             "\" has inconsistent delays between restart and continue");
            continue;
        }
        for (int in : model.inflows(s)) {
            const auto& itr = model.transitions[in];
            if (!itr.dist.is_exponential())
                errors.push_back("solve_nonregen: inflow " + model.transition_label(in) +
                                 " into non-regeneration state must be exponential");
            if (!model.states[itr.from].regeneration)
                errors.push_back("solve_nonregen: chained non-regeneration states (" +
                                 model.states[itr.from].name + " -> " + model.states[s].name +
                                 ") are unsupported");
        }
        out.push_back(ns);
    }
    if (!errors.empty()) throw ValidationError(errors);
    return out;
}

struct PassResult {
    std::vector<double> rates;
    Eigen::VectorXd p;
};

// rates with the non-regeneration outflows pinned to placeholder * (1/tau)
PassResult run_passes(const StateSpaceModel& model,
                      const std::vector<NonregenState>& nrs, double placeholder_scale) {
    std::vector<double> rates(model.transitions.size(), 0.0);
    std::vector<bool> pinned(model.transitions.size(), false);
    for (const auto& ns : nrs) {
        rates[ns.out_transition] = placeholder_scale / ns.tau;
        pinned[ns.out_transition] = true;
    }
    for (size_t t = 0; t < model.transitions.size(); ++t) {
        if (pinned[t]) continue;
        const auto& tr = model.transitions[t];
        if (tr.dist.is_exponential()) {
            rates[t] = tr.dist.rate();
            continue;
        }
        OutflowRace race;
        race.target = tr.dist;
        race.decay = 0.0;
        for (int o : model.outflows(tr.from))
            if (o != static_cast<int>(t)) race.competitors.push_back(model.transitions[o].dist);
        rates[t] = equivalent_rate(race).mu_hat;
    }

    const bool renew = model.renewal.has_value();
    Eigen::VectorXd p1 = steady_state(build_generator(model, rates, renew)).p;

    // pass 2: per-class mean sojourns, composed by the inflow fluxes. The
    // state probability is entry flux times mean sojourn, so the equivalent
    // rate is the inverse of the flux-weighted mean: the averaging op runs on
    // the class mean holding times and the result is inverted.
    for (const auto& ns : nrs) {
        std::vector<InflowClass> classes;
        const std::string& clock = model.transitions[ns.out_transition].clock_id;
        for (int in : model.inflows(ns.state)) {
            const auto& itr = model.transitions[in];
            InflowClass c;
            c.source_probability = p1(itr.from);
            c.inflow_rate = itr.dist.rate();
            bool clock_ran_in_source = false;
            for (int o : model.outflows(itr.from))
                if (model.transitions[o].clock_id == clock) clock_ran_in_source = true;
            if (clock_ran_in_source) {
                // the clock lost the race to this inflow; the residual delay remains
                c.branch_rate = residual_mean_fixed_delay(ns.tau, c.inflow_rate);
            } else {
                // the clock starts on entry and runs its full delay
                c.branch_rate = ns.tau;
            }
            classes.push_back(c); // branch_rate field carries the class mean here
        }
        rates[ns.out_transition] = 1.0 / weighted_inflow_rate(classes);
    }

    PassResult out;
    out.p = steady_state(build_generator(model, rates, renew)).p;
    out.rates = std::move(rates);
    return out;
}

} // namespace

NonregenSolution solve_nonregen(const StateSpaceModel& model) {
    if (model.has_absorbing() && !model.renewal)
        throw ValidationError(
            "solve_nonregen: model has absorbing states and no artificial renewal");

    const auto nrs = analyze_structure(model);
    NonregenSolution sol;
    if (nrs.empty()) {
        SteadyCorrectionResult sc = correct_steady(model);
        sol.p = sc.p;
        sol.rates = sc.rates;
        sol.passes = 1;
        return sol;
    }

    const PassResult a = run_passes(model, nrs, 1.0);
    const PassResult b = run_passes(model, nrs, 10.0); // placeholder invariance check
    const double gap = (a.p - b.p).lpNorm<Eigen::Infinity>();
    if (gap > 1e-10) {
        std::ostringstream os;
        os << "solve_nonregen: result depends on placeholder rates (gap " << gap
           << "); the single-outflow assumption is violated";
        throw NumericalError(os.str());
    }
    sol.p = a.p;
    sol.rates = a.rates;
    sol.passes = 2;
    return sol;
}

} // namespace smc
