#include "smc/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace smc {

namespace {

struct SimpsonWorker {
    const std::function<double(double)>& f;
    double abs_tol;
    int max_depth;
    double error_acc = 0.0;

    // classic adaptive Simpson with Richardson correction
    double recurse(double a, double b, double fa, double fm, double fb,
                   double whole, int depth) {
        const double m = 0.5 * (a + b);
        const double lm = 0.5 * (a + m);
        const double rm = 0.5 * (m + b);
        const double flm = f(lm);
        const double frm = f(rm);
        const double h6 = (b - a) / 12.0;
        const double left = h6 * (fa + 4.0 * flm + fm);
        const double right = h6 * (fm + 4.0 * frm + fb);
        const double delta = left + right - whole;
        if (depth >= max_depth || std::abs(delta) <= 15.0 * abs_tol) {
            error_acc += std::abs(delta) / 15.0;
            return left + right + delta / 15.0;
        }
        return recurse(a, m, fa, flm, fm, left, depth + 1) +
               recurse(m, b, fm, frm, fb, right, depth + 1);
    }
};

} // namespace

QuadratureResult integrate(const std::function<double(double)>& f, double a,
                           double b, double abs_tol, int max_depth) {
    if (!(b > a)) return {0.0, 0.0};
    SimpsonWorker w{f, abs_tol, max_depth};
    const double m = 0.5 * (a + b);
    const double fa = f(a);
    const double fm = f(m);
    const double fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double v = w.recurse(a, b, fa, fm, fb, whole, 0);
    return {v, w.error_acc};
}

QuadratureResult integrate_segments(const std::function<double(double)>& f,
                                    std::vector<double> points, double abs_tol,
                                    int max_depth) {
    std::sort(points.begin(), points.end());
    QuadratureResult total;
    const int nseg = static_cast<int>(points.size()) - 1;
    if (nseg < 1) return total;
    const double seg_tol = abs_tol / nseg;
    for (int i = 0; i < nseg; ++i) {
        if (!(points[i + 1] > points[i])) continue;
        QuadratureResult r =
            integrate(f, points[i], points[i + 1], seg_tol, max_depth);
        total.value += r.value;
        total.error_estimate += r.error_estimate;
    }
    return total;
}

} // namespace smc
