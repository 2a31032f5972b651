#ifndef SMC_QUADRATURE_HPP
#define SMC_QUADRATURE_HPP

#include <functional>
#include <vector>

namespace smc {

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0; // accumulated local Richardson estimates
};

// Adaptive composite Simpson on [a, b] to an absolute tolerance.
QuadratureResult integrate(const std::function<double(double)>& f, double a,
                           double b, double abs_tol, int max_depth = 48);

// Same, but splitting the domain at interior breakpoints (kinks of the
// integrand, e.g. fixed-delay survival discontinuities).
QuadratureResult integrate_segments(const std::function<double(double)>& f,
                                    std::vector<double> points, double abs_tol,
                                    int max_depth = 48);

} // namespace smc

#endif
