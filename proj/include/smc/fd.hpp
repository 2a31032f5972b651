#ifndef SMC_FD_HPP
#define SMC_FD_HPP

#include <utility>
#include <vector>

#include "smc/model.hpp"

namespace smc {

struct FdResult {
    std::vector<std::pair<double, double>> series; // (t, hazard) per step
    double window_average = 0.0;
    double mass_defect = 0.0; // max |1 - total probability| over the march
};

// Supplementary-variable forward march for absorbing models: the holding-time
// age of each state's single non-exponential outflow is carried on a grid of
// width dt (exact upwind transport), exponential flows apply per-step factors
// e^{-lambda dt}. Models with no non-exponential transition march with the
// exact one-step propagator exp(Q dt). The hazard readout is
// dF / (dt * midpoint survivors), second order in dt.
// Requires: at most one non-exponential outflow per state, no continue
// clocks; any artificial renewal is ignored.
FdResult fd_hazard(const StateSpaceModel& model, double dt, long steps,
                   std::pair<double, double> window);

} // namespace smc

#endif
