#include "smc/fd.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "smc/ctmc.hpp"
#include "smc/errors.hpp"

namespace smc {

namespace {

struct ExpOut {
    int target = -1;
    double rate = 0.0;
};

struct AgeState {
    int non_exp_target = -1;
    DistributionSpec law = DistributionSpec::exponential(1.0);
    std::vector<double> fire_q; // conditional firing probability per age bin
    std::vector<double> bins;   // probability mass by age
};

struct MarchState {
    bool aged = false;
    bool absorbing = false;
    double scalar = 0.0;
    std::vector<ExpOut> exp_outs;
    double exp_rate_sum = 0.0;
    AgeState age;
};

} // namespace

FdResult fd_hazard(const StateSpaceModel& model_in, double dt, long steps,
                   std::pair<double, double> window) {
    const StateSpaceModel model = model_in.without_renewal();
    if (!(dt > 0.0)) throw ValidationError("fd_hazard: dt must be positive");
    if (steps < 1) throw ValidationError("fd_hazard: steps must be >= 1");
    if (!(window.first >= 0.0 && window.first < window.second &&
          window.second <= dt * static_cast<double>(steps) * (1.0 + 1e-12)))
        throw ValidationError("fd_hazard: dt*steps must cover the window");
    if (!model.has_absorbing())
        throw ValidationError("fd_hazard: model has no absorbing states");

    std::vector<std::string> errors;
    bool any_non_exp = false;
    for (int s = 0; s < model.n(); ++s) {
        int non_exp = 0;
        for (int t : model.outflows(s))
            if (!model.transitions[t].dist.is_exponential()) ++non_exp;
        if (non_exp > 1)
            errors.push_back("fd_hazard: state " + model.states[s].name + " has " +
                             std::to_string(non_exp) +
                             " non-exponential outflows; the age variable supports one");
        any_non_exp = any_non_exp || non_exp > 0;
    }
    for (size_t t = 0; t < model.transitions.size(); ++t)
        if (model.transitions[t].clock == ClockMode::resume)
            errors.push_back("fd_hazard: continue clock on " +
                             model.transition_label(static_cast<int>(t)) +
                             " is outside the supplementary-variable scheme");
    if (!errors.empty()) throw ValidationError(errors);

    const int n = model.n();
    FdResult res;
    res.series.reserve(steps);

    std::vector<char> failed(n, 0);
    for (int f : model.absorbing_states()) failed[f] = 1;

    auto readout = [&](double f_before, double f_after) {
        const double mid = 0.5 * ((1.0 - f_before) + (1.0 - f_after));
        return mid > 0.0 ? (f_after - f_before) / (dt * mid) : 0.0;
    };

    if (!any_non_exp) {
        // fully exponential: march with the exact one-step propagator
        std::vector<double> rates(model.transitions.size());
        for (size_t t = 0; t < model.transitions.size(); ++t)
            rates[t] = model.transitions[t].dist.rate();
        const Generator g = build_generator(model, rates);
        const Eigen::MatrixXd prop = (g.q * dt).exp();
        Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
        p(model.initial) = 1.0;
        auto absorbed = [&](const Eigen::VectorXd& v) {
            double f = 0.0;
            for (int s = 0; s < n; ++s)
                if (failed[s]) f += v(s);
            return f;
        };
        double defect = 0.0;
        for (long step = 0; step < steps; ++step) {
            const double f0 = absorbed(p);
            p = prop * p;
            const double f1 = absorbed(p);
            res.series.emplace_back((step + 0.5) * dt, readout(f0, f1));
            defect = std::max(defect, std::abs(1.0 - p.sum()));
        }
        res.mass_defect = defect;
    } else {
        std::vector<MarchState> st(n);
        for (int s = 0; s < n; ++s) {
            st[s].absorbing = failed[s] != 0;
            for (int t : model.outflows(s)) {
                const auto& tr = model.transitions[t];
                if (tr.dist.is_exponential()) {
                    st[s].exp_outs.push_back({tr.to, tr.dist.rate()});
                    st[s].exp_rate_sum += tr.dist.rate();
                } else {
                    st[s].aged = true;
                    st[s].age.non_exp_target = tr.to;
                    st[s].age.law = tr.dist;
                }
            }
        }
        // conditional firing probability of the aged law inside each step
        for (int s = 0; s < n; ++s) {
            if (!st[s].aged) continue;
            auto& age = st[s].age;
            age.fire_q.resize(steps + 1);
            age.bins.assign(steps + 2, 0.0);
            const auto& law = age.law;
            for (long j = 0; j <= steps; ++j) {
                const double f0 = law.cdf(j * dt);
                const double f1 = law.cdf((j + 1) * dt);
                const double surv = 1.0 - f0;
                age.fire_q[j] = surv > 1e-300 ? std::min(1.0, (f1 - f0) / surv) : 1.0;
            }
        }

        if (st[model.initial].aged)
            st[model.initial].age.bins[0] = 1.0;
        else
            st[model.initial].scalar = 1.0;

        std::vector<double> inflow(n, 0.0);
        double absorbed_mass = 0.0;
        double defect = 0.0;
        for (long step = 0; step < steps; ++step) {
            const double f0 = absorbed_mass;
            std::fill(inflow.begin(), inflow.end(), 0.0);

            for (int s = 0; s < n; ++s) {
                MarchState& ms = st[s];
                if (ms.absorbing) continue;
                if (!ms.aged) {
                    if (ms.exp_rate_sum <= 0.0 || ms.scalar == 0.0) continue;
                    const double keep = std::exp(-ms.exp_rate_sum * dt);
                    const double lost = ms.scalar * (1.0 - keep);
                    for (const auto& o : ms.exp_outs)
                        inflow[o.target] += lost * (o.rate / ms.exp_rate_sum);
                    ms.scalar *= keep;
                    continue;
                }
                auto& bins = ms.age.bins;
                const double keep = std::exp(-ms.exp_rate_sum * dt);
                const long top = std::min<long>(step, steps);
                double fired_total = 0.0;
                double exp_total = 0.0;
                // descending shift: bin j ages into j+1 after draining
                for (long j = top; j >= 0; --j) {
                    const double m = bins[j];
                    if (m == 0.0) {
                        bins[j + 1] = 0.0;
                        continue;
                    }
                    const double stay = m * keep;
                    exp_total += m - stay;
                    const double fired = stay * ms.age.fire_q[j];
                    fired_total += fired;
                    bins[j + 1] = stay - fired;
                }
                bins[0] = 0.0;
                if (exp_total > 0.0)
                    for (const auto& o : ms.exp_outs)
                        inflow[o.target] += exp_total * (o.rate / ms.exp_rate_sum);
                if (fired_total > 0.0) inflow[ms.age.non_exp_target] += fired_total;
            }

            for (int s = 0; s < n; ++s) {
                if (inflow[s] == 0.0) continue;
                if (st[s].absorbing)
                    absorbed_mass += inflow[s];
                else if (st[s].aged)
                    st[s].age.bins[0] += inflow[s];
                else
                    st[s].scalar += inflow[s];
            }

            res.series.emplace_back((step + 0.5) * dt, readout(f0, absorbed_mass));

            double total = absorbed_mass;
            for (int s = 0; s < n; ++s) {
                total += st[s].scalar;
                if (st[s].aged)
                    for (long j = 0; j <= std::min<long>(step + 1, steps + 1); ++j)
                        total += st[s].age.bins[j];
            }
            defect = std::max(defect, std::abs(1.0 - total));
        }
        res.mass_defect = defect;
    }

    double sum = 0.0;
    long count = 0;
    for (const auto& [t, h] : res.series) {
        if (t >= window.first && t <= window.second) {
            sum += h;
            ++count;
        }
    }
    if (count == 0)
        throw NumericalError("fd_hazard: no steps fall inside the averaging window");
    res.window_average = sum / count;
    return res;
}

} // namespace smc
