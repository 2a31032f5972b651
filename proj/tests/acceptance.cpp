// End-to-end acceptance suite. Each criterion prints one pass/fail line;
// the process exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "smc/correction.hpp"
#include "smc/ctmc.hpp"
#include "smc/fd.hpp"
#include "smc/model.hpp"
#include "smc/nonregen.hpp"
#include "smc/rng.hpp"
#include "smc/simulate.hpp"
#include "smc/sweep.hpp"

using namespace smc;

namespace {

int g_failures = 0;

struct CheckError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check_near(const std::string& label, double got, double want, double tol) {
    if (!(std::abs(got - want) <= tol)) {
        std::ostringstream os;
        os << label << ": got " << got << ", want " << want << " +- " << tol
           << " (off by " << got - want << ")";
        throw CheckError(os.str());
    }
}

void check_true(const std::string& label, bool ok) {
    if (!ok) throw CheckError(label);
}

void criterion(const std::string& name, const std::function<void()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string why;
    bool ok = true;
    try {
        body();
    } catch (const std::exception& e) {
        ok = false;
        why = e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %s (%.1fs)\n", ok ? "PASS" : "FAIL", name.c_str(), secs);
    if (!ok) {
        std::printf("       %s\n", why.c_str());
        ++g_failures;
    }
    std::fflush(stdout);
}

StateSpaceModel load(const std::string& name) {
    return ModelDocument::from_file(std::string(SMC_MODELS_DIR) + "/" + name).resolve();
}

ModelDocument load_doc(const std::string& name) {
    return ModelDocument::from_file(std::string(SMC_MODELS_DIR) + "/" + name);
}

SimConfig steady_cfg(long reps) {
    SimConfig cfg;
    cfg.replications = reps;
    cfg.horizon = 1000.0;
    cfg.hazard_window = {100.0, 1000.0};
    cfg.averaging_window = {100.0, 1000.0};
    cfg.seed = 12345;
    return cfg;
}

// minimal CSV reader for the sweep outputs
struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    explicit Csv(const std::string& text) {
        std::istringstream in(text);
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            std::vector<std::string> fields;
            std::istringstream ls(line);
            std::string f;
            while (std::getline(ls, f, ',')) fields.push_back(f);
            if (first) {
                header = fields;
                first = false;
            } else if (!fields.empty()) {
                rows.push_back(fields);
            }
        }
    }
    double num(size_t row, const std::string& col) const {
        for (size_t c = 0; c < header.size(); ++c)
            if (header[c] == col) return std::stod(rows.at(row).at(c));
        throw CheckError("csv column not found: " + col);
    }
};

} // namespace

int main() {
    criterion("1. two-part exponential: PF hazard and renewal hazard", [] {
        const auto m = load("two_part_exp.json");
        const auto sol = solve_hazard(m);
        check_near("PF hazard k", sol.qs.k, 0.58579, 1e-5);
        check_near("renewal hazard", renewal_hazard(m), 0.5, 1e-10);
        check_true("Corollary-3 identity", sol.qs.pf_identity_gap < 1e-9);
    });

    criterion("2. steady-state fixed-delay correction and 1e6-replication MC", [] {
        const auto m = load("two_part_fixed.json");
        const auto sc = correct_steady(m);
        check_near("corrected repair rate", sc.rates[1], 0.58198, 1e-5);
        const double rh = renewal_hazard(m);
        check_near("renewal hazard", rh, 0.55835, 1e-5);
        const auto mc = simulate(m, steady_cfg(1000000));
        check_true("MC produced a hazard estimate", mc.hazard.has_value());
        // 0.55829 is itself a million-replication estimate, so the gate uses
        // the combined standard error of the two independent runs
        const double se = mc.hazard->std_error * std::sqrt(2.0);
        check_near("MC hazard vs reference 0.55829", mc.hazard->value, 0.55829, 3.0 * se);
    });

    criterion("3. quasi-stationary fixed point and the FD oracle", [] {
        const auto m = load("two_part_fixed.json");
        const auto sol = solve_hazard(m);
        check_true("fixed point converged", sol.trace.converged);
        check_near("k", sol.qs.k, 0.62518, 1e-5);
        check_near("corrected repair rate", sol.rates[1], 0.82427, 1e-5);
        const auto fd = fd_hazard(m, 6e-4, 10000, {4.0, 6.0});
        check_near("FD window average", fd.window_average, 0.62513, 5e-4);
    });

    criterion("4. extreme three-state scenario with monotone convergence", [] {
        const auto sol = solve_hazard(load("extreme.json"));
        check_true("converged", sol.trace.converged);
        check_near("mu_hat (U1->U2)", sol.rates[1], 1.913, 2e-3);
        check_near("mu_hat (U2->F)", sol.rates[2], 1.913, 2e-3);
        check_near("k", sol.qs.k, 1.5756, 1e-3);
        check_near("exponential baseline", sol.trace.iterations.front().k, 0.78377, 1e-5);
        for (size_t i = 1; i < sol.trace.iterations.size(); ++i)
            check_true("trace is monotone (no sign alternation)",
                       sol.trace.iterations[i].k >=
                           sol.trace.iterations[i - 1].k - 1e-12);
    });

    criterion("5. weibull sweep point at shape 1", [] {
        auto doc = load_doc("two_part_weibull.json");
        doc.set_path("params.beta", 1.0);
        const auto sol = solve_hazard(doc.resolve());
        check_true("repair correction present", sol.corrections[1].has_value());
        check_near("gamma_a", sol.corrections[1]->gamma, 0.70711, 1e-5);
        check_near("mu_hat", sol.corrections[1]->mu_hat, 1.0, 1e-6);
        check_near("h_a", sol.qs.k, 0.58579, 1e-5);
    });

    criterion("6. lognormal sweep points at SCV 1 and SCV 5", [] {
        auto doc = load_doc("two_part_lognormal.json");
        doc.set_path("params.scv", 1.0);
        const auto s1 = solve_hazard(doc.resolve());
        check_near("SCV=1 gamma_a", s1.corrections[1]->gamma, 0.70425, 1e-4);
        check_near("SCV=1 mu_hat", s1.corrections[1]->mu_hat, 0.97273, 1e-4);
        check_near("SCV=1 h_a", s1.qs.k, 0.59150, 1e-4);
        doc.set_path("params.scv", 5.0);
        const auto s5 = solve_hazard(doc.resolve());
        check_near("SCV=5 gamma_a", s5.corrections[1]->gamma, 0.73608, 1e-4);
        check_near("SCV=5 mu_hat", s5.corrections[1]->mu_hat, 1.31689, 1e-4);
        check_near("SCV=5 h_a", s5.qs.k, 0.52784, 1e-4);
    });

    criterion("7. single-repair-server model and its MC cross-check", [] {
        const auto m = load("single_repair.json");
        const auto sol = solve_nonregen(m);
        check_near("P1", sol.p(1), 0.53391, 1e-5);
        check_near("P2", sol.p(2), 0.31072, 1e-5);
        const auto mc = simulate(m, steady_cfg(100000));
        for (int s = 0; s < m.n(); ++s)
            check_near("MC P" + std::to_string(s), mc.state_probs[s].value, sol.p(s),
                       4.0 * mc.state_probs[s].std_error);
    });

    criterion("8. common-cause model: monotonicity, MC agreement, Markov margin", [] {
        auto doc = load_doc("distefano.json");
        // (a) down-state probability monotone in q on an 11-point grid
        double prev = -1.0;
        for (int i = 0; i <= 10; ++i) {
            const double q = 0.05 * i;
            doc.set_path("params.q", q);
            const auto sol = solve_nonregen(doc.resolve());
            const double down = sol.p(3) + sol.p(4);
            check_true("monotone at q=" + std::to_string(q), down > prev);
            prev = down;
        }
        // (b) full pipeline within 4 std errors of MC at four q values
        for (double q : {0.0, 0.1, 0.3, 0.5}) {
            doc.set_path("params.q", q);
            const auto m = doc.resolve();
            const auto sol = solve_nonregen(m);
            const auto mc = simulate(m, steady_cfg(100000));
            const double down = sol.p(3) + sol.p(4);
            const double down_mc = mc.state_probs[3].value + mc.state_probs[4].value;
            const double se = std::sqrt(std::pow(mc.state_probs[3].std_error, 2) +
                                        std::pow(mc.state_probs[4].std_error, 2));
            check_near("q=" + std::to_string(q) + " down probability vs MC", down,
                       down_mc, 4.0 * se);
        }
        // (c) reported nonzero margin against the naive Markov approximation
        doc.set_path("params.q", 0.5);
        const auto m = doc.resolve();
        const auto full = solve_nonregen(m);
        std::vector<double> naive_rates(m.transitions.size());
        for (size_t t = 0; t < m.transitions.size(); ++t)
            naive_rates[t] = 1.0 / m.transitions[t].dist.mean();
        const auto naive = steady_state(build_generator(m, naive_rates)).p;
        const double margin = std::abs((full.p(3) + full.p(4)) - (naive(3) + naive(4)));
        std::printf("       margin vs naive Markov at tau=10, q=0.5: %.6f\n", margin);
        check_true("margin exceeds the frozen floor 5e-4", margin > 5e-4);
    });

    criterion("9. property suites", [] {
        // Lemma 2: corrected chain vs two-step renewal on 50 random models
        SplitMix64 rng = SplitMix64::for_stream(987654321, 1);
        for (int trial = 0; trial < 50; ++trial) {
            const int n = 3 + static_cast<int>(rng.next_u64() % 4);
            StateSpaceModel m;
            for (int i = 0; i < n; ++i) m.states.push_back({"s" + std::to_string(i)});
            std::vector<bool> has_fixed(n, false);
            auto random_dist = [&](int from) {
                const double u = rng.uniform01();
                if (u < 0.3)
                    return DistributionSpec::exponential(0.4 + 2.0 * rng.uniform01());
                if (u < 0.55 && !has_fixed[from]) {
                    has_fixed[from] = true;
                    return DistributionSpec::fixed_delay(0.4 + 1.6 * rng.uniform01());
                }
                if (u < 0.8)
                    return DistributionSpec::weibull(0.8 + 1.7 * rng.uniform01(),
                                                     0.4 + 1.2 * rng.uniform01());
                return DistributionSpec::from_mean_scv(DistKind::lognormal,
                                                       0.4 + 1.2 * rng.uniform01(),
                                                       0.3 + 1.7 * rng.uniform01());
            };
            for (int i = 0; i < n; ++i)
                m.transitions.push_back({i, (i + 1) % n, random_dist(i)});
            for (int e = 0; e < 1 + static_cast<int>(rng.next_u64() % n); ++e) {
                const int i = static_cast<int>(rng.next_u64() % n);
                int j = static_cast<int>(rng.next_u64() % n);
                if (i == j) j = (j + 1) % n;
                m.transitions.push_back({i, j, random_dist(i)});
            }
            const auto direct = correct_steady(m).p;
            const auto renewal = embedded_renewal_steady(m);
            check_true("Lemma 2 equivalence on random model " + std::to_string(trial),
                       (direct - renewal).lpNorm<Eigen::Infinity>() < 1e-8);
        }

        // Lemma 3 placeholder invariance at 1e-10: checked inside every
        // solve_nonregen run (placeholders 1/tau and 10/tau must agree)
        (void)solve_nonregen(load("single_repair.json"));
        auto doc = load_doc("distefano.json");
        doc.set_path("params.q", 0.3);
        (void)solve_nonregen(doc.resolve());

        // residual-mean vs balance equivalence on a 20x20 grid
        for (int i = 1; i <= 20; ++i)
            for (int j = 1; j <= 20; ++j) {
                const double tau = 0.2 * i;
                const double lambda = 0.2 * j;
                const double mu1 = equivalent_rate_fixed_delay(tau, lambda, 0.0);
                const double a = rate_from_balance(1.0 / tau, lambda, mu1);
                const double b = 1.0 / residual_mean_fixed_delay(tau, lambda);
                check_true("mttr/balance grid",
                           std::abs(a - b) < 1e-10 * std::max(1.0, a));
            }

        // generator columns sum to zero; Corollary-3 identity on QS solves
        SplitMix64 grng = SplitMix64::for_stream(555, 2);
        for (int trial = 0; trial < 25; ++trial) {
            const int n = 3 + static_cast<int>(grng.next_u64() % 4); // up states + 1
            StateSpaceModel m;
            for (int i = 0; i < n; ++i)
                m.states.push_back({"s" + std::to_string(i), i == n - 1});
            std::vector<double> rates;
            auto add = [&](int from, int to) {
                m.transitions.push_back({from, to, DistributionSpec::exponential(1.0)});
                rates.push_back(0.2 + 2.0 * grng.uniform01());
            };
            for (int i = 0; i < n - 1; ++i) add(i, (i + 1) % (n - 1)); // up-state ring
            for (int i = 0; i < n - 1; ++i) add(i, n - 1);             // edges to failure
            const Generator g = build_generator(m, rates);
            for (int col = 0; col < n; ++col)
                check_true("column sum", std::abs(g.q.col(col).sum()) < 1e-14);
            const auto qs = quasi_stationary(g);
            check_true("Corollary-3 identity", qs.pf_identity_gap < 1e-9);
        }
        for (const auto* name : {"two_part_exp.json", "two_part_fixed.json", "extreme.json"}) {
            const auto sol = solve_hazard(load(name));
            check_true(std::string("Corollary-3 identity on ") + name,
                       sol.qs.pf_identity_gap < 1e-9);
        }
    });

    criterion("10. rho sweep: PF above renewal, gap shrinking toward small rho", [] {
        SweepSpec spec;
        spec.parameter_path = "params.lam";
        spec.values = {0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
        spec.analysis = SweepAnalysis::hazard;
        SweepOptions opts;
        const Csv csv(run_sweep(load_doc("two_part_exp.json"), spec, opts));
        check_true("11 rows", csv.rows.size() == 11);
        for (size_t r = 0; r < csv.rows.size(); ++r) {
            check_true("row status ok", csv.rows[r][1] == "ok");
            const double pf = csv.num(r, "k");
            const double ren = csv.num(r, "renewal_hazard");
            check_true("PF >= renewal", pf >= ren);
        }
        const double gap_lo = (csv.num(0, "k") - csv.num(0, "renewal_hazard")) /
                              csv.num(0, "renewal_hazard");
        const double gap_hi = (csv.num(10, "k") - csv.num(10, "renewal_hazard")) /
                              csv.num(10, "renewal_hazard");
        check_true("relative gap < 2% at rho = 0.01", gap_lo < 0.02);
        check_true("relative gap > 15% at rho = 1", gap_hi > 0.15);
    });

    std::printf("%s: %d criterion(s) failed\n", g_failures == 0 ? "OK" : "FAILED",
                g_failures);
    return g_failures;
}
