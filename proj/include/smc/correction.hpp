#ifndef SMC_CORRECTION_HPP
#define SMC_CORRECTION_HPP

#include <optional>
#include <vector>

#include "smc/ctmc.hpp"
#include "smc/distribution.hpp"
#include "smc/errors.hpp"
#include "smc/model.hpp"

namespace smc {

// A race at one state: the transition being corrected (target, law G) against
// the combined remaining outflows (competitors, survival product = 1-F).
// decay k >= 0 weights older ages by e^{kt}; k = 0 is the steady-state case.
struct OutflowRace {
    DistributionSpec target = DistributionSpec::exponential(1.0);
    std::vector<DistributionSpec> competitors;
    double decay = 0.0;
};

enum class CorrectionMethod { closed_form_fixed, closed_form_exp, quadrature };

struct CorrectionResult {
    double gamma = 0.0;   // winning-race ratio: integral of e^{kt} (1-F) g
    double a_const = 0.0; // normalization A: 1 / integral of e^{kt} (1-G)(1-F)
    double mu_hat = 0.0;  // equivalent exponential rate, A * gamma
    CorrectionMethod method = CorrectionMethod::quadrature;
    double quad_error = 0.0; // accumulated quadrature error estimate (0 for closed forms)
};

// Raised when a correction integral diverges (heavy tail against e^{kt}) or
// the fixed-point iteration fails; carries whatever trace exists.
struct FixedPointTrace {
    struct Step {
        double k = 0.0;
        std::vector<double> rates; // per transition index
    };
    std::vector<Step> iterations;
    bool converged = false;
    double final_residual = 0.0; // |k_{j+1} - k_j|
};

class NonConvergenceError : public NumericalError {
public:
    NonConvergenceError(const std::string& what, FixedPointTrace trace = {})
        : NumericalError(what), trace(std::move(trace)) {}
    FixedPointTrace trace;
};

// General weighted-age correction (double-integral route).
CorrectionResult equivalent_rate(const OutflowRace& race);

// Single-integral route for a target racing one exponential competitor of
// rate lambda: gamma = integral of e^{-(lambda-k)t} g, mu = (lambda-k)/(1/gamma - 1).
CorrectionResult equivalent_rate_vs_exponential(const DistributionSpec& g,
                                                double lambda, double k);

// Closed form for a fixed delay tau against exponential flow lambda:
// (lambda-k)/(e^{tau(lambda-k)} - 1), continuous through lambda == k.
double equivalent_rate_fixed_delay(double tau, double lambda, double k);

struct SteadyCorrectionResult {
    std::vector<double> rates; // per transition index
    std::vector<std::optional<CorrectionResult>> corrections; // set for corrected transitions
    Generator generator;
    Eigen::VectorXd p;
};

// Replaces every non-exponential transition by its k = 0 equivalent rate and
// solves the corrected steady state (artificial renewal included if present).
SteadyCorrectionResult correct_steady(const StateSpaceModel& model);

// Renewal-based system hazard: corrected steady state of the renewal model,
// then flux into the failed set over the probability of being outside it.
// Synthesizes {absorbing -> state 0, rate 1} when the model carries no
// artificial renewal (the rate is irrelevant per the single-outflow lemma).
double renewal_hazard(const StateSpaceModel& model);

struct HazardSolution {
    QuasiStationaryResult qs;
    FixedPointTrace trace;
    std::vector<double> rates;
    std::vector<std::optional<CorrectionResult>> corrections;
};

// Alternates local corrections at decay k with the global Perron-Frobenius
// eigenvalue until |dk| < tol. Starts from the uncorrected exponential model
// (rates = 1/mean) unless a warm-start k is given. Three consecutive
// sign-alternating updates switch the relaxation factor to 0.5.
HazardSolution solve_hazard(const StateSpaceModel& model, double tol = 1e-10,
                            int max_iter = 200, double relaxation = 1.0,
                            std::optional<double> warm_start = {});

// Two-step renewal evaluation: embedded jump chain from the winning-race
// ratios, stationary vector weighted by mean holding times. Equivalence
// oracle for correct_steady.
Eigen::VectorXd embedded_renewal_steady(const StateSpaceModel& model);

} // namespace smc

#endif
