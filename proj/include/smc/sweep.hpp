#ifndef SMC_SWEEP_HPP
#define SMC_SWEEP_HPP

#include <string>
#include <vector>

#include "smc/model.hpp"
#include "smc/simulate.hpp"

namespace smc {

enum class SweepAnalysis { steady, hazard, simulate, fd };

struct SweepSpec {
    std::string parameter_path; // "params.q", "transitions.1.dist.shape", ...
    std::vector<double> values;
    SweepAnalysis analysis = SweepAnalysis::hazard;
};

struct SweepOptions {
    SimConfig sim;     // simulate analysis
    double fd_dt = 6e-4;
    long fd_steps = 10000;
    std::pair<double, double> fd_window{4.0, 6.0};
    double tol = 1e-10;
    int max_iter = 200;
};

// One CSV row per value, in spec order; numbers carry 17 significant digits.
// Per-point failures land in the status column and the sweep continues.
std::string run_sweep(const ModelDocument& doc, const SweepSpec& spec,
                      const SweepOptions& opts);

// 17-significant-digit decimal text used for all CSV output.
std::string csv_number(double v);

} // namespace smc

#endif
