#ifndef SMC_SIMULATE_HPP
#define SMC_SIMULATE_HPP

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "smc/model.hpp"

namespace smc {

struct SimConfig {
    long replications = 100000; // desk scale
    double horizon = 0.0;
    std::uint64_t seed = 12345;
    std::pair<double, double> hazard_window{0.0, 0.0};
    std::pair<double, double> averaging_window{0.0, 0.0};
    int hazard_bins = 50;
    int threads = 0; // 0: SMC_THREADS env, else hardware concurrency
};

struct OracleEstimate {
    double value = 0.0;
    double std_error = 0.0;
    long samples = 0;
    std::vector<std::pair<double, double>> series; // (t, value) when applicable
};

struct SimResult {
    std::vector<OracleEstimate> state_probs; // per state, time-averaged
    std::optional<OracleEstimate> hazard;
};

// Discrete-event Monte Carlo over the model's semantics. Absorbing models
// stop replications at absorption and estimate the quasi-stationary hazard
// (absorptions over surviving mass per bin); models with an artificial
// renewal run to the horizon and estimate the renewal hazard (failure
// entries over up-time). Bit-exact reproducible for a fixed seed and
// replication count, at any thread count.
SimResult simulate(const StateSpaceModel& model, const SimConfig& cfg);

} // namespace smc

#endif
