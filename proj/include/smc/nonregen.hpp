#ifndef SMC_NONREGEN_HPP
#define SMC_NONREGEN_HPP

#include <vector>

#include <Eigen/Dense>

#include "smc/model.hpp"

namespace smc {

// One way of arriving at a non-regeneration state: the unnormalized steady
// probability of the source, the inflow rate, and the equivalent outflow rate
// that applies when arriving this way.
struct InflowClass {
    double source_probability = 0.0;
    double inflow_rate = 0.0;
    double branch_rate = 0.0;
};

// Mean remaining delay given the clock already ran for an Exp(lambda) time
// conditioned below tau: tau/F(tau) - 1/lambda, strictly between 0 and tau.
double residual_mean_fixed_delay(double tau, double lambda);

// Balance-derived second-stage rate mu*lambda/(lambda + mu1 - mu); its
// reciprocal equals residual_mean_fixed_delay when mu = 1/tau and mu1 is the
// fixed-delay correction.
double rate_from_balance(double mu, double lambda, double mu1);

// Inflow-weighted rate average: sum(P_i lam_i mu_i) / sum(P_i lam_i).
double weighted_inflow_rate(const std::vector<InflowClass>& classes);

struct NonregenSolution {
    Eigen::VectorXd p;
    std::vector<double> rates; // per transition index
    int passes = 0;
};

// Two-pass solve for models with marked non-regeneration states: pass 1 uses
// placeholder rates there (the result's relative probabilities do not depend
// on them: single outflow), pass 2 installs rates from flux-weighted mean
// sojourns per inflow class (residual delay when the clock ran in the source,
// the full delay when it starts on entry) and re-solves. Each
// non-regeneration state must have exactly one outflow, driven by a
// fixed-delay clock.
NonregenSolution solve_nonregen(const StateSpaceModel& model);

} // namespace smc

#endif
