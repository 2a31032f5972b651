#ifndef SMC_CTMC_HPP
#define SMC_CTMC_HPP

#include <vector>

#include <Eigen/Dense>

#include "smc/model.hpp"

namespace smc {

// Rate matrix in the column convention: q(j,i) is the rate from state i to
// state j and dP/dt = Q*P, so every COLUMN sums to zero. Most texts use the
// row convention; everything in this library is column-based.
struct Generator {
    Eigen::MatrixXd q;
    std::vector<bool> absorbing;

    int n() const { return static_cast<int>(q.rows()); }
};

// Assembles the generator from per-transition rates (indexed like
// model.transitions). Parallel transitions between the same ordered pair are
// summed. include_renewal adds the model's artificial renewal edge, turning
// absorbing states into ordinary ones.
Generator build_generator(const StateSpaceModel& model,
                          const std::vector<double>& rates,
                          bool include_renewal = false);

struct SteadyStateResult {
    Eigen::VectorXd p;
    double residual = 0.0; // ||Q p||_inf after the solve
};

// Q p = 0, sum p = 1 by dense LU with the last balance row replaced by the
// normalization row. Requires an irreducible chain.
SteadyStateResult steady_state(const Generator& g);

struct QuasiStationaryResult {
    double k = 0.0;              // decay rate: |largest eigenvalue| of the up-block
    Eigen::VectorXd v;           // conditional probabilities over up states, sum = 1
    double residual = 0.0;       // ||Q~ v + k v||_inf
    std::vector<double> edge_rates; // per up state: total rate into the absorbing set
    double pf_identity_gap = 0.0;   // |k - sum v_i * edge_rates_i|
    double slem = 0.0;              // |lambda_2| / |lambda_1| of the up-block
    std::vector<int> up_states;     // indices into the generator
};

// Perron-Frobenius analysis of the non-absorbing block. All absorbing states
// are merged; the up states must form a single communicating class.
QuasiStationaryResult quasi_stationary(const Generator& g);

// Fourth-order explicit integration (step-doubling control) of dP/dt = Q P.
// Returns P at each requested time; times must be increasing and the
// trajectory starts at (times[0], p0).
std::vector<Eigen::VectorXd> transient(const Generator& g,
                                       const Eigen::VectorXd& p0,
                                       const std::vector<double>& times);

} // namespace smc

#endif
