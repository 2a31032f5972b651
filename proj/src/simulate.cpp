#include "smc/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <thread>

#include "smc/errors.hpp"
#include "smc/rng.hpp"

namespace smc {

namespace {

constexpr int kBatches = 256;

int resolve_threads(int requested) {
    if (requested > 0) return std::min(requested, 64);
    if (const char* env = std::getenv("SMC_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return std::min(v, 64);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(std::min(hw, 64u));
}

struct CompiledOutflow {
    DistributionSpec dist = DistributionSpec::exponential(1.0);
    int target = -1;
    int clock = -1; // index into the clock table, -1: none
    bool resume = false;
    bool to_failed = false;
};

struct CompiledState {
    std::vector<CompiledOutflow> outs;
    bool failed = false;    // member of the failed (absorbing-marked) set
    bool absorbing = false; // terminal for the replication (no renewal)
};

struct Compiled {
    std::vector<CompiledState> states;
    int n_clocks = 0;
    int initial = 0;
    bool renewal_mode = false;
};

Compiled compile(const StateSpaceModel& model) {
    Compiled c;
    c.initial = model.initial;
    c.renewal_mode = model.renewal.has_value();
    c.states.resize(model.n());
    std::vector<std::string> clock_names;
    auto clock_index = [&](const std::string& id) {
        for (size_t i = 0; i < clock_names.size(); ++i)
            if (clock_names[i] == id) return static_cast<int>(i);
        clock_names.push_back(id);
        return static_cast<int>(clock_names.size() - 1);
    };
    for (int s = 0; s < model.n(); ++s) {
        c.states[s].failed = model.states[s].absorbing;
        c.states[s].absorbing = model.states[s].absorbing && !c.renewal_mode;
    }
    for (const auto& tr : model.transitions) {
        CompiledOutflow o;
        o.dist = tr.dist;
        o.target = tr.to;
        o.to_failed = model.states[tr.to].absorbing;
        if (!tr.clock_id.empty()) {
            o.clock = clock_index(tr.clock_id);
            o.resume = tr.clock == ClockMode::resume;
        }
        c.states[tr.from].outs.push_back(o);
    }
    if (model.renewal) {
        CompiledOutflow o;
        o.dist = DistributionSpec::exponential(model.renewal->rate);
        o.target = model.renewal->to;
        o.to_failed = model.states[model.renewal->to].absorbing;
        c.states[model.renewal->from].outs.push_back(o);
    }
    c.n_clocks = static_cast<int>(clock_names.size());
    return c;
}

struct BatchTally {
    std::vector<double> occ_sum;   // per state
    std::vector<double> occ_sumsq; // per state
    // absorbing mode
    std::vector<std::uint64_t> absorb_bin;
    std::uint64_t absorbed_before = 0; // before the hazard window opens
    // renewal mode
    std::vector<std::uint64_t> event_bin;
    std::vector<double> uptime_bin;
    std::uint64_t events = 0;
    double uptime = 0.0;
    long reps = 0;
};

double overlap(double a0, double a1, double b0, double b1) {
    const double lo = std::max(a0, b0);
    const double hi = std::min(a1, b1);
    return hi > lo ? hi - lo : 0.0;
}

} // namespace

SimResult simulate(const StateSpaceModel& model, const SimConfig& cfg) {
    if (cfg.replications < 1)
        throw ValidationError("simulate: replications must be >= 1");
    if (!(cfg.horizon > 0.0))
        throw ValidationError("simulate: horizon must be positive");
    auto check_window = [&](std::pair<double, double> w, const char* name) {
        if (!(w.first >= 0.0 && w.second <= cfg.horizon && w.first < w.second))
            throw ValidationError(std::string("simulate: ") + name +
                                  " must satisfy 0 <= a < b <= horizon");
    };
    check_window(cfg.hazard_window, "hazard_window");
    check_window(cfg.averaging_window, "averaging_window");
    if (cfg.hazard_bins < 1) throw ValidationError("simulate: hazard_bins must be >= 1");

    const Compiled c = compile(model);
    const int n = model.n();
    const int bins = cfg.hazard_bins;
    const double wa = cfg.hazard_window.first;
    const double wb = cfg.hazard_window.second;
    const double bin_w = (wb - wa) / bins;
    const double avg_a = cfg.averaging_window.first;
    const double avg_b = cfg.averaging_window.second;
    const double avg_len = avg_b - avg_a;

    bool any_failed = false;
    for (const auto& s : c.states) any_failed = any_failed || s.failed;

    std::vector<BatchTally> tallies(kBatches);
    for (auto& t : tallies) {
        t.occ_sum.assign(n, 0.0);
        t.occ_sumsq.assign(n, 0.0);
        t.absorb_bin.assign(bins, 0);
        t.event_bin.assign(bins, 0);
        t.uptime_bin.assign(bins, 0.0);
    }

    std::atomic<int> next_batch{0};
    const long total = cfg.replications;

    auto worker = [&]() {
        std::vector<double> occ(n);
        std::vector<double> clock_fire(std::max(c.n_clocks, 1));
        std::vector<char> clock_armed(std::max(c.n_clocks, 1));
        for (;;) {
            const int b = next_batch.fetch_add(1);
            if (b >= kBatches) return;
            BatchTally& tally = tallies[b];
            const long lo = total * b / kBatches;
            const long hi = total * (b + 1) / kBatches;
            tally.reps = hi - lo;
            for (long rep = lo; rep < hi; ++rep) {
                SplitMix64 rng = SplitMix64::for_stream(cfg.seed, static_cast<std::uint64_t>(rep));
                std::fill(occ.begin(), occ.end(), 0.0);
                std::fill(clock_armed.begin(), clock_armed.end(), char(0));
                int state = c.initial;
                double t = 0.0;
                bool absorbed = false;
                double absorb_time = 0.0;

                while (t < cfg.horizon) {
                    const CompiledState& st = c.states[state];
                    if (st.absorbing) {
                        absorbed = true;
                        absorb_time = t;
                        occ[state] += overlap(t, cfg.horizon, avg_a, avg_b);
                        break;
                    }
                    // race between the outflows; an armed clock keeps its
                    // absolute firing time until it fires or is restarted
                    double best = std::numeric_limits<double>::infinity();
                    int best_o = -1;
                    for (size_t o = 0; o < st.outs.size(); ++o) {
                        const CompiledOutflow& out = st.outs[o];
                        double cand;
                        if (out.clock >= 0 && out.resume && clock_armed[out.clock]) {
                            cand = std::max(t, clock_fire[out.clock]);
                        } else {
                            cand = t + out.dist.sample(rng.uniform01());
                            if (out.clock >= 0) {
                                clock_armed[out.clock] = 1;
                                clock_fire[out.clock] = cand;
                            }
                        }
                        if (cand < best) {
                            best = cand;
                            best_o = static_cast<int>(o);
                        }
                    }
                    if (best_o < 0) { // no outflows: sit here to the horizon
                        occ[state] += overlap(t, cfg.horizon, avg_a, avg_b);
                        break;
                    }
                    const double t_next = std::min(best, cfg.horizon);
                    occ[state] += overlap(t, t_next, avg_a, avg_b);
                    if (c.renewal_mode && !st.failed && t_next > t) {
                        const double u0 = std::max(t, wa);
                        const double u1 = std::min(t_next, wb);
                        if (u1 > u0) {
                            tally.uptime += u1 - u0;
                            int b0 = std::clamp(static_cast<int>((u0 - wa) / bin_w), 0, bins - 1);
                            int b1 = std::clamp(static_cast<int>((u1 - wa) / bin_w), 0, bins - 1);
                            for (int bb = b0; bb <= b1; ++bb) {
                                const double e0 = wa + bb * bin_w;
                                tally.uptime_bin[bb] += overlap(u0, u1, e0, e0 + bin_w);
                            }
                        }
                    }
                    if (best >= cfg.horizon) {
                        t = cfg.horizon;
                        break;
                    }
                    const CompiledOutflow& fired = st.outs[best_o];
                    if (fired.clock >= 0) clock_armed[fired.clock] = 0; // consumed
                    if (c.renewal_mode && fired.to_failed && best >= wa && best < wb) {
                        ++tally.events;
                        ++tally.event_bin[std::min(static_cast<int>((best - wa) / bin_w),
                                                   bins - 1)];
                    }
                    state = fired.target;
                    t = best;
                }

                for (int s = 0; s < n; ++s) {
                    const double frac = occ[s] / avg_len;
                    tally.occ_sum[s] += frac;
                    tally.occ_sumsq[s] += frac * frac;
                }
                if (absorbed && !c.renewal_mode) {
                    if (absorb_time < wa)
                        ++tally.absorbed_before;
                    else if (absorb_time < wb)
                        ++tally.absorb_bin[std::min(
                            static_cast<int>((absorb_time - wa) / bin_w), bins - 1)];
                }
            }
        }
    };

    const int n_threads = std::min(resolve_threads(cfg.threads), kBatches);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    // ordered deterministic reduction over the fixed batch layout
    SimResult res;
    std::vector<double> sum(n, 0.0), sumsq(n, 0.0);
    std::vector<std::uint64_t> absorb_bin(bins, 0), event_bin(bins, 0);
    std::vector<double> uptime_bin(bins, 0.0);
    std::uint64_t absorbed_before = 0, events = 0;
    double uptime = 0.0;
    for (const auto& tally : tallies) {
        for (int s = 0; s < n; ++s) {
            sum[s] += tally.occ_sum[s];
            sumsq[s] += tally.occ_sumsq[s];
        }
        for (int b = 0; b < bins; ++b) {
            absorb_bin[b] += tally.absorb_bin[b];
            event_bin[b] += tally.event_bin[b];
            uptime_bin[b] += tally.uptime_bin[b];
        }
        absorbed_before += tally.absorbed_before;
        events += tally.events;
        uptime += tally.uptime;
    }

    res.state_probs.resize(n);
    for (int s = 0; s < n; ++s) {
        OracleEstimate& e = res.state_probs[s];
        e.samples = total;
        e.value = sum[s] / total;
        const double var = std::max(
            0.0, (sumsq[s] - total * e.value * e.value) / std::max<long>(total - 1, 1));
        e.std_error = std::sqrt(var / total);
    }

    if (c.renewal_mode && any_failed) {
        OracleEstimate h;
        h.samples = total;
        if (!(uptime > 0.0))
            throw NumericalError("simulate: zero up-time in the hazard window");
        h.value = static_cast<double>(events) / uptime;
        // batch-means standard error of the ratio estimator
        double mean = 0.0, m2 = 0.0;
        int nb = 0;
        for (const auto& tally : tallies) {
            if (!(tally.uptime > 0.0)) continue;
            const double hb = static_cast<double>(tally.events) / tally.uptime;
            ++nb;
            const double d = hb - mean;
            mean += d / nb;
            m2 += d * (hb - mean);
        }
        if (nb > 1) h.std_error = std::sqrt(m2 / (nb - 1) / nb);
        h.series.reserve(bins);
        for (int b = 0; b < bins; ++b) {
            const double mid = wa + (b + 0.5) * bin_w;
            const double v = uptime_bin[b] > 0.0 ? event_bin[b] / uptime_bin[b] : 0.0;
            h.series.emplace_back(mid, v);
        }
        res.hazard = std::move(h);
    } else if (any_failed) {
        OracleEstimate h;
        std::uint64_t absorbed_so_far = absorbed_before;
        double sum_h = 0.0, var_h = 0.0;
        const std::uint64_t survivors_at_start = total - absorbed_before;
        h.series.reserve(bins);
        for (int b = 0; b < bins; ++b) {
            const std::uint64_t survivors = total - absorbed_so_far;
            if (survivors == 0) {
                std::ostringstream os;
                os << "simulate: zero survivors at t=" << wa + b * bin_w
                   << " inside the hazard window (survivors at window start: "
                   << survivors_at_start << ")";
                throw NumericalError(os.str());
            }
            const double hb = static_cast<double>(absorb_bin[b]) /
                              (static_cast<double>(survivors) * bin_w);
            sum_h += hb;
            // Poisson approximation for the per-bin count variance
            var_h += static_cast<double>(absorb_bin[b]) /
                     (static_cast<double>(survivors) * static_cast<double>(survivors) *
                      bin_w * bin_w);
            h.series.emplace_back(wa + (b + 0.5) * bin_w, hb);
            absorbed_so_far += absorb_bin[b];
        }
        h.value = sum_h / bins;
        h.std_error = std::sqrt(var_h) / bins;
        h.samples = static_cast<long>(survivors_at_start);
        res.hazard = std::move(h);
    }
    return res;
}

} // namespace smc
