#include "smc/correction.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "smc/quadrature.hpp"

namespace smc {

namespace {

constexpr double kQuadTol = 1e-11;
constexpr double kInf = std::numeric_limits<double>::infinity();

double competitor_log_survival(const std::vector<DistributionSpec>& comps, double t) {
    double s = 0.0;
    for (const auto& c : comps) {
        s += c.log_survival(t);
        if (s == -kInf) break;
    }
    return s;
}

// Exponential decay rate of e^{kt} (1-G)(1-F); +inf for bounded support.
double race_tail_bound(const OutflowRace& race) {
    if (race.target.is_fixed_delay()) return kInf;
    double bound = race.target.tail_rate();
    for (const auto& c : race.competitors) {
        if (c.is_fixed_delay()) return kInf;
        bound += c.tail_rate();
        if (bound == kInf) return kInf;
    }
    return bound;
}

// Smallest fixed-delay competitor: survival product is zero past it.
double competitor_cutoff(const std::vector<DistributionSpec>& comps) {
    double cut = kInf;
    for (const auto& c : comps)
        if (c.is_fixed_delay()) cut = std::min(cut, c.delay());
    return cut;
}

// Initial segmentation for the adaptive integrator: fixed-delay kinks plus
// quantile anchors of every law involved, so the recursion's first probes
// cannot step over a narrow density peak inside a wide truncation domain.
std::vector<double> integration_grid(const DistributionSpec* target,
                                     const std::vector<DistributionSpec>& comps,
                                     double lo, double hi) {
    std::vector<double> pts{lo, hi};
    auto add = [&](const DistributionSpec& d) {
        if (d.is_fixed_delay()) {
            if (d.delay() > lo && d.delay() < hi) pts.push_back(d.delay());
            return;
        }
        for (double p : {0.001, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999,
                         1.0 - 1e-6, 1.0 - 1e-9}) {
            const double q = d.quantile(p);
            if (q > lo && q < hi) pts.push_back(q);
        }
    };
    if (target) add(*target);
    for (const auto& c : comps) add(c);
    for (int i = 1; i < 16; ++i) pts.push_back(lo + (hi - lo) * i / 16.0);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

// A fixed-delay survival is zero at its own delay; integrating up to the
// left limit keeps panel endpoints on the continuous side.
double left_limit(double t) { return std::nextafter(t, 0.0); }

// Doubles the horizon until the integrand at the end is below 1e-14 of its
// peak (the spec's tail test). Throws when no decay is found.
double scan_truncation(const std::function<double(double)>& f, double t0,
                       const std::string& what) {
    double T = std::max(t0, 1e-6);
    for (int iter = 0; iter < 400 && T < 1e290; ++iter) {
        double peak = 0.0;
        int argmax = 0;
        constexpr int grid = 512;
        for (int i = 0; i <= grid; ++i) {
            const double v = std::abs(f(T * i / grid));
            if (v > peak) {
                peak = v;
                argmax = i;
            }
        }
        if (peak == 0.0) return T;
        if (argmax > grid * 9 / 10 || std::abs(f(T)) > 1e-14 * peak) {
            T *= 2.0;
            continue;
        }
        return T;
    }
    throw NonConvergenceError(what + ": integrand does not decay; correction integral diverges");
}

// integral of e^{kt} * survival-product(target + competitors) dt  (1/A);
// the exponent is assembled in log space so e^{kt} cannot overflow against
// underflowing survival factors
QuadratureResult age_weight_integral(const OutflowRace& race) {
    const double k = race.decay;
    const auto& comps = race.competitors;
    double hi = competitor_cutoff(comps);
    if (race.target.is_fixed_delay()) hi = std::min(hi, race.target.delay());

    auto f = [&](double t) {
        const double e = k * t + race.target.log_survival(t) + competitor_log_survival(comps, t);
        return std::exp(e);
    };
    if (hi == kInf) {
        double t0 = race.target.quantile(1.0 - 1e-12);
        for (const auto& c : comps)
            if (!c.is_fixed_delay()) t0 = std::max(t0, c.quantile(1.0 - 1e-12));
        hi = scan_truncation(f, t0, "age-weight integral");
    } else {
        hi = left_limit(hi);
    }
    return integrate_segments(f, integration_grid(&race.target, comps, 0.0, hi), kQuadTol);
}

// integral of e^{kt} (1-F) g dt (the winning-race ratio). For a Weibull
// target the substitution u = (t/scale)^shape turns g dt into e^{-u} du,
// removing the t^{shape-1} endpoint singularity.
QuadratureResult winning_ratio_integral(const DistributionSpec& target,
                                        const std::vector<DistributionSpec>& comps,
                                        double k) {
    const double cut = competitor_cutoff(comps);

    if (target.kind() == DistKind::weibull) {
        const double beta = target.shape();
        const double sigma = target.scale();
        auto t_of_u = [=](double u) { return sigma * std::pow(u, 1.0 / beta); };
        auto fu = [&](double u) {
            const double t = t_of_u(u);
            return std::exp(k * t - u + competitor_log_survival(comps, t));
        };
        double hi_u;
        if (cut < kInf) {
            hi_u = left_limit(std::pow(cut / sigma, beta));
        } else {
            double u0 = std::max(1.0, -std::log(1e-12)); // target quantile in u-space
            for (const auto& c : comps)
                if (!c.is_fixed_delay())
                    u0 = std::max(u0, std::pow(c.quantile(1.0 - 1e-12) / sigma, beta));
            hi_u = scan_truncation(fu, u0, "winning-ratio integral");
        }
        // quantile anchors mapped into u-space, plus a uniform backbone
        std::vector<double> pts{0.0, hi_u};
        for (double p : {0.001, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999, 1.0 - 1e-6}) {
            const double u = -std::log1p(-p);
            if (u > 0.0 && u < hi_u) pts.push_back(u);
        }
        for (const auto& c : comps) {
            if (c.is_fixed_delay()) continue;
            for (double p : {0.1, 0.5, 0.9, 0.999}) {
                const double u = std::pow(c.quantile(p) / sigma, beta);
                if (u > 0.0 && u < hi_u) pts.push_back(u);
            }
        }
        for (int i = 1; i < 16; ++i) pts.push_back(hi_u * i / 16.0);
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        return integrate_segments(fu, pts, kQuadTol);
    }

    auto f = [&](double t) {
        return std::exp(k * t + target.log_pdf(t) + competitor_log_survival(comps, t));
    };
    double hi = cut;
    if (hi == kInf) {
        double t0 = target.quantile(1.0 - 1e-12);
        for (const auto& c : comps)
            if (!c.is_fixed_delay()) t0 = std::max(t0, c.quantile(1.0 - 1e-12));
        hi = scan_truncation(f, t0, "winning-ratio integral");
    } else {
        hi = left_limit(hi);
    }
    return integrate_segments(f, integration_grid(&target, comps, 0.0, hi), kQuadTol);
}

void check_result(const CorrectionResult& r, const std::string& what) {
    if (!(r.gamma > 0.0) || !std::isfinite(r.gamma))
        throw NonConvergenceError(what + ": winning-race ratio is not positive (gamma=" +
                                  std::to_string(r.gamma) + ")");
    if (!(r.mu_hat > 0.0) || !std::isfinite(r.mu_hat))
        throw NonConvergenceError(what + ": equivalent rate is not positive");
}

} // namespace

double equivalent_rate_fixed_delay(double tau, double lambda, double k) {
    if (!(tau > 0.0)) throw ValidationError("equivalent_rate_fixed_delay: tau must be positive");
    if (lambda < 0.0 || k < 0.0)
        throw ValidationError("equivalent_rate_fixed_delay: lambda and k must be >= 0");
    const double x = lambda - k;
    if (std::abs(x) < 1e-8) {
        // series of y/(e^y - 1) around y = 0 to avoid 0/0
        const double y = tau * x;
        return (1.0 - y / 2.0 + y * y / 12.0) / tau;
    }
    return x / std::expm1(tau * x);
}

CorrectionResult equivalent_rate(const OutflowRace& race) {
    if (race.decay < 0.0)
        throw ValidationError("equivalent_rate: decay must be >= 0");
    const double k = race.decay;
    const auto& comps = race.competitors;

    const double bound = race_tail_bound(race);
    if (k > bound) {
        std::ostringstream os;
        os << "equivalent_rate: decay k=" << k << " exceeds the race tail rate " << bound
           << "; e^{kt} (1-G)(1-F) diverges";
        throw NonConvergenceError(os.str());
    }

    bool all_exp = true;
    double comp_exp_sum = 0.0;
    for (const auto& c : comps) {
        if (c.is_exponential())
            comp_exp_sum += c.rate();
        else
            all_exp = false;
    }

    CorrectionResult r;

    if (race.target.is_exponential() && all_exp) {
        const double mu = race.target.rate();
        const double denom = mu + comp_exp_sum - k;
        if (!(denom > 0.0))
            throw NonConvergenceError("equivalent_rate: k >= combined exponential rate");
        r.gamma = mu / denom;
        r.a_const = denom;
        r.mu_hat = mu;
        r.method = CorrectionMethod::closed_form_exp;
        return r;
    }

    if (race.target.is_fixed_delay() && all_exp) {
        const double tau = race.target.delay();
        r.mu_hat = equivalent_rate_fixed_delay(tau, comp_exp_sum, k);
        r.gamma = std::exp(-(comp_exp_sum - k) * tau);
        r.a_const = r.mu_hat / r.gamma;
        r.method = CorrectionMethod::closed_form_fixed;
        check_result(r, "equivalent_rate");
        return r;
    }

    if (race.target.is_fixed_delay()) {
        const double tau = race.target.delay();
        r.gamma = std::exp(k * tau + competitor_log_survival(comps, tau));
        auto f = [&](double t) { return std::exp(k * t + competitor_log_survival(comps, t)); };
        const double hi = left_limit(std::min(tau, competitor_cutoff(comps)));
        const QuadratureResult a =
            integrate_segments(f, integration_grid(nullptr, comps, 0.0, hi), kQuadTol);
        r.a_const = 1.0 / a.value;
        r.mu_hat = r.gamma * r.a_const;
        r.quad_error = a.error_estimate;
        r.method = CorrectionMethod::quadrature;
        check_result(r, "equivalent_rate");
        return r;
    }

    const QuadratureResult a = age_weight_integral(race);
    const QuadratureResult gam = winning_ratio_integral(race.target, comps, k);
    r.gamma = gam.value;
    r.a_const = 1.0 / a.value;
    r.mu_hat = r.gamma * r.a_const;
    r.quad_error = a.error_estimate + gam.error_estimate;
    r.method = CorrectionMethod::quadrature;
    check_result(r, "equivalent_rate");
    return r;
}

CorrectionResult equivalent_rate_vs_exponential(const DistributionSpec& g,
                                                double lambda, double k) {
    if (!(lambda > 0.0))
        throw ValidationError("equivalent_rate_vs_exponential: lambda must be positive");
    if (k < 0.0) throw ValidationError("equivalent_rate_vs_exponential: k must be >= 0");

    CorrectionResult r;
    const double x = lambda - k;

    if (g.is_exponential()) {
        const double mu = g.rate();
        const double denom = mu + x;
        if (!(denom > 0.0))
            throw NonConvergenceError("equivalent_rate_vs_exponential: k >= lambda + mu");
        r.gamma = mu / denom;
        r.a_const = denom;
        r.mu_hat = mu;
        r.method = CorrectionMethod::closed_form_exp;
        return r;
    }
    if (g.is_fixed_delay()) {
        r.gamma = std::exp(-x * g.delay());
        r.mu_hat = equivalent_rate_fixed_delay(g.delay(), lambda, k);
        r.a_const = r.mu_hat / r.gamma;
        r.method = CorrectionMethod::closed_form_fixed;
        return r;
    }

    if (x < 0.0 && g.tail_rate() <= -x) {
        std::ostringstream os;
        os << "equivalent_rate_vs_exponential: k - lambda = " << -x
           << " is not beaten by the tail of " << g.to_string() << "; integral diverges";
        throw NonConvergenceError(os.str());
    }

    if (std::abs(x) < 1e-12) {
        // lambda == k: no deviation from the exponential equivalent
        r.gamma = 1.0;
        r.mu_hat = 1.0 / g.mean();
        r.a_const = r.mu_hat;
        r.method = CorrectionMethod::quadrature;
        return r;
    }

    const std::vector<DistributionSpec> comp{DistributionSpec::exponential(lambda)};
    // gamma_a as a single integral against e^{-(lambda-k) t}
    QuadratureResult gam = winning_ratio_integral(g, comp, k);
    r.gamma = gam.value;
    r.quad_error = gam.error_estimate;
    r.mu_hat = x / (1.0 / r.gamma - 1.0);
    r.a_const = r.mu_hat / r.gamma;
    r.method = CorrectionMethod::quadrature;
    check_result(r, "equivalent_rate_vs_exponential");
    return r;
}

// ---------------------------------------------------------------------------

namespace {

struct RatesAndCorrections {
    std::vector<double> rates;
    std::vector<std::optional<CorrectionResult>> corrections;
};

// exponential transitions keep their rate; everything else races its
// siblings at decay k
RatesAndCorrections corrected_rates(const StateSpaceModel& model, double k) {
    RatesAndCorrections out;
    out.rates.resize(model.transitions.size(), 0.0);
    out.corrections.resize(model.transitions.size());
    for (size_t t = 0; t < model.transitions.size(); ++t) {
        const auto& tr = model.transitions[t];
        if (tr.dist.is_exponential()) {
            out.rates[t] = tr.dist.rate();
            continue;
        }
        OutflowRace race;
        race.target = tr.dist;
        race.decay = k;
        for (int o : model.outflows(tr.from))
            if (o != static_cast<int>(t)) race.competitors.push_back(model.transitions[o].dist);
        try {
            CorrectionResult c = equivalent_rate(race);
            out.rates[t] = c.mu_hat;
            out.corrections[t] = c;
        } catch (const NonConvergenceError& e) {
            throw NonConvergenceError(std::string(e.what()) + " (transition " +
                                      model.transition_label(static_cast<int>(t)) + ")");
        }
    }
    return out;
}

void require_regenerative(const StateSpaceModel& model, const char* who) {
    std::vector<std::string> errors;
    for (size_t t = 0; t < model.transitions.size(); ++t) {
        const auto& tr = model.transitions[t];
        if (!tr.dist.is_exponential() && !model.states[tr.from].regeneration)
            errors.push_back(std::string(who) + ": non-exponential transition " +
                             model.transition_label(static_cast<int>(t)) +
                             " leaves a non-regeneration state; use solve_nonregen");
    }
    if (!errors.empty()) throw ValidationError(errors);
}

double mean_holding(const std::vector<DistributionSpec>& outs) {
    if (outs.empty()) throw ValidationError("mean_holding: state has no outflows");
    bool all_exp = true;
    double sum = 0.0;
    for (const auto& d : outs) {
        if (d.is_exponential())
            sum += d.rate();
        else
            all_exp = false;
    }
    if (all_exp) return 1.0 / sum;
    double hi = competitor_cutoff(outs);
    auto f = [&](double t) { return std::exp(competitor_log_survival(outs, t)); };
    if (hi == kInf) {
        double t0 = 1.0;
        for (const auto& d : outs)
            if (!d.is_fixed_delay()) t0 = std::max(t0, d.quantile(1.0 - 1e-12));
        hi = scan_truncation(f, t0, "mean holding time");
    } else {
        hi = left_limit(hi);
    }
    return integrate_segments(f, integration_grid(nullptr, outs, 0.0, hi), kQuadTol).value;
}

} // namespace

SteadyCorrectionResult correct_steady(const StateSpaceModel& model) {
    if (model.has_absorbing() && !model.renewal)
        throw ValidationError(
            "correct_steady: model has absorbing states and no artificial renewal");
    require_regenerative(model, "correct_steady");

    SteadyCorrectionResult res;
    auto rc = corrected_rates(model, 0.0);
    res.rates = std::move(rc.rates);
    res.corrections = std::move(rc.corrections);
    res.generator = build_generator(model, res.rates, model.renewal.has_value());
    res.p = steady_state(res.generator).p;
    return res;
}

double renewal_hazard(const StateSpaceModel& model) {
    const auto failed = model.absorbing_states();
    if (failed.empty())
        throw ValidationError("renewal_hazard: model has no absorbing (failed) states");
    require_regenerative(model, "renewal_hazard");

    auto rc = corrected_rates(model, 0.0);
    Generator g = build_generator(model, rc.rates, model.renewal.has_value());
    // synthesize renewal edges for any absorbing state not already renewed;
    // the rate does not affect conditional probabilities (single outflow)
    for (int f : failed) {
        if (!g.absorbing[f]) continue;
        g.q(model.initial, f) += 1.0;
        g.q(f, f) -= 1.0;
        g.absorbing[f] = false;
    }
    const Eigen::VectorXd p = steady_state(g).p;

    std::vector<bool> is_failed(model.n(), false);
    for (int f : failed) is_failed[f] = true;
    double flux = 0.0;
    double up = 0.0;
    for (int i = 0; i < model.n(); ++i) {
        if (is_failed[i]) continue;
        up += p(i);
        for (int f : failed) flux += g.q(f, i) * p(i);
    }
    if (!(up > 0.0)) throw NumericalError("renewal_hazard: zero probability outside the failed set");
    return flux / up;
}

HazardSolution solve_hazard(const StateSpaceModel& model, double tol, int max_iter,
                            double relaxation, std::optional<double> warm_start) {
    const StateSpaceModel base = model.without_renewal();
    if (!base.has_absorbing())
        throw ValidationError("solve_hazard: model has no absorbing states");
    require_regenerative(base, "solve_hazard");
    if (!(tol > 0.0) || max_iter < 1 || !(relaxation > 0.0 && relaxation <= 1.0))
        throw ValidationError("solve_hazard: bad tolerance/max_iter/relaxation");
    if (warm_start && !(*warm_start > 0.0))
        throw ValidationError("solve_hazard: warm-start k must be positive");

    HazardSolution sol;
    auto& trace = sol.trace;

    // default initial guess: uncorrected exponential model, rates from the means
    std::vector<double> rates0(base.transitions.size());
    for (size_t t = 0; t < base.transitions.size(); ++t)
        rates0[t] = 1.0 / base.transitions[t].dist.mean();
    double k = warm_start ? *warm_start
                          : quasi_stationary(build_generator(base, rates0)).k;
    trace.iterations.push_back({k, rates0});

    double relax = relaxation;
    std::vector<double> deltas;
    for (int it = 0; it < max_iter; ++it) {
        RatesAndCorrections rc;
        try {
            rc = corrected_rates(base, k);
        } catch (const NonConvergenceError& e) {
            throw NonConvergenceError(e.what(), trace);
        }
        const QuasiStationaryResult qs = quasi_stationary(build_generator(base, rc.rates));
        const double delta = qs.k - k;
        deltas.push_back(delta);
        const size_t nd = deltas.size();
        if (relax == relaxation && nd >= 3 && deltas[nd - 1] * deltas[nd - 2] < 0.0 &&
            deltas[nd - 2] * deltas[nd - 3] < 0.0)
            relax = 0.5; // damp detected oscillation

        const double k_next = k + relax * delta;
        trace.iterations.push_back({k_next, rc.rates});
        trace.final_residual = std::abs(k_next - k);
        k = k_next;

        if (trace.final_residual < tol) {
            trace.converged = true;
            // report self-consistent corrections and eigensystem at the final k
            auto final_rc = corrected_rates(base, k);
            sol.rates = std::move(final_rc.rates);
            sol.corrections = std::move(final_rc.corrections);
            sol.qs = quasi_stationary(build_generator(base, sol.rates));
            return sol;
        }
    }
    std::ostringstream os;
    os << "solve_hazard: no convergence after " << max_iter
       << " iterations (last |dk| = " << trace.final_residual << ")";
    throw NonConvergenceError(os.str(), trace);
}

Eigen::VectorXd embedded_renewal_steady(const StateSpaceModel& model) {
    if (model.has_absorbing() && !model.renewal)
        throw ValidationError(
            "embedded_renewal_steady: model has absorbing states and no artificial renewal");
    require_regenerative(model, "embedded_renewal_steady");

    const int n = model.n();
    // outflow laws per state, with the renewal edge as an exponential outflow
    std::vector<std::vector<DistributionSpec>> dists(n);
    std::vector<std::vector<int>> targets(n);
    for (const auto& tr : model.transitions) {
        dists[tr.from].push_back(tr.dist);
        targets[tr.from].push_back(tr.to);
    }
    if (model.renewal) {
        dists[model.renewal->from].push_back(DistributionSpec::exponential(model.renewal->rate));
        targets[model.renewal->from].push_back(model.renewal->to);
    }

    Eigen::MatrixXd kmat = Eigen::MatrixXd::Zero(n, n); // column-stochastic jump chain
    Eigen::VectorXd holding(n);
    for (int s = 0; s < n; ++s) {
        if (dists[s].empty())
            throw ValidationError("embedded_renewal_steady: state " + model.states[s].name +
                                  " has no outflows");
        for (size_t o = 0; o < dists[s].size(); ++o) {
            OutflowRace race;
            race.target = dists[s][o];
            race.decay = 0.0;
            for (size_t c = 0; c < dists[s].size(); ++c)
                if (c != o) race.competitors.push_back(dists[s][c]);
            kmat(targets[s][o], s) += equivalent_rate(race).gamma;
        }
        holding(s) = mean_holding(dists[s]);
    }

    // stationary vector of the embedded chain: (K - I) pi = 0, sum pi = 1
    Eigen::MatrixXd a = kmat - Eigen::MatrixXd::Identity(n, n);
    a.row(n - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b(n - 1) = 1.0;
    Eigen::VectorXd pi = Eigen::PartialPivLU<Eigen::MatrixXd>(a).solve(b);
    if (!pi.allFinite())
        throw NumericalError("embedded_renewal_steady: singular embedded chain");

    Eigen::VectorXd p = pi.cwiseProduct(holding);
    const double total = p.sum();
    if (!(total > 0.0))
        throw NumericalError("embedded_renewal_steady: nonpositive holding-time weights");
    return p / total;
}

} // namespace smc
