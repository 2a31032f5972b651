#include "smc/ctmc.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <queue>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "smc/errors.hpp"

namespace smc {

namespace {

// forward/backward reachability over nonzero off-diagonal entries
std::vector<bool> reachable(const Eigen::MatrixXd& q, int start, bool transpose) {
    const int n = static_cast<int>(q.rows());
    std::vector<bool> seen(n, false);
    std::queue<int> work;
    seen[start] = true;
    work.push(start);
    while (!work.empty()) {
        const int i = work.front();
        work.pop();
        for (int j = 0; j < n; ++j) {
            if (j == i || seen[j]) continue;
            const double r = transpose ? q(i, j) : q(j, i); // i -> j edge
            if (r > 0.0) {
                seen[j] = true;
                work.push(j);
            }
        }
    }
    return seen;
}

} // namespace

Generator build_generator(const StateSpaceModel& model,
                          const std::vector<double>& rates,
                          bool include_renewal) {
    const int n = model.n();
    if (rates.size() != model.transitions.size())
        throw ValidationError("build_generator: rates size does not match transitions");
    Generator g;
    g.q = Eigen::MatrixXd::Zero(n, n);
    g.absorbing.assign(n, false);
    for (int i = 0; i < n; ++i) g.absorbing[i] = model.states[i].absorbing;

    for (size_t t = 0; t < model.transitions.size(); ++t) {
        const auto& tr = model.transitions[t];
        const double r = rates[t];
        if (!(r > 0.0) || !std::isfinite(r)) {
            std::ostringstream os;
            os << "build_generator: nonpositive rate " << r << " on "
               << model.transition_label(static_cast<int>(t));
            throw ValidationError(os.str());
        }
        g.q(tr.to, tr.from) += r;
        g.q(tr.from, tr.from) -= r;
    }
    if (include_renewal) {
        if (!model.renewal)
            throw ValidationError("build_generator: model has no artificial renewal");
        const auto& r = *model.renewal;
        g.q(r.to, r.from) += r.rate;
        g.q(r.from, r.from) -= r.rate;
        g.absorbing[r.from] = false;
    }
    return g;
}

SteadyStateResult steady_state(const Generator& g) {
    const int n = g.n();
    for (int i = 0; i < n; ++i)
        if (g.absorbing[i])
            throw ValidationError(
                "steady_state: generator has an absorbing state (index " +
                std::to_string(i) + "); add an artificial renewal transition");

    // irreducibility: everything reachable from 0 and 0 reachable from everything
    const auto fwd = reachable(g.q, 0, false);
    const auto bwd = reachable(g.q, 0, true);
    std::vector<int> bad;
    for (int i = 0; i < n; ++i)
        if (!fwd[i] || !bwd[i]) bad.push_back(i);
    if (!bad.empty()) {
        std::ostringstream os;
        os << "steady_state: chain is reducible; states not in the communicating "
              "class of state 0:";
        for (int i : bad) os << " " << i;
        throw NumericalError(os.str());
    }

    Eigen::MatrixXd a = g.q;
    a.row(n - 1).setOnes(); // replace one balance equation by normalization
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b(n - 1) = 1.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    Eigen::VectorXd p = lu.solve(b);
    if (!p.allFinite())
        throw NumericalError("steady_state: singular linear system");

    for (int i = 0; i < n; ++i) {
        if (p(i) < -1e-9)
            throw NumericalError("steady_state: negative probability at state " +
                                 std::to_string(i));
        if (p(i) < 0.0) p(i) = 0.0;
    }
    p /= p.sum();
    SteadyStateResult r;
    r.residual = (g.q * p).lpNorm<Eigen::Infinity>();
    r.p = std::move(p);
    return r;
}

QuasiStationaryResult quasi_stationary(const Generator& g) {
    const int n = g.n();
    QuasiStationaryResult res;
    for (int i = 0; i < n; ++i)
        if (!g.absorbing[i]) res.up_states.push_back(i);
    const int m = static_cast<int>(res.up_states.size());
    if (m == n)
        throw ValidationError("quasi_stationary: no absorbing state");
    if (m == 0)
        throw ValidationError("quasi_stationary: no non-absorbing states");

    Eigen::MatrixXd block(m, m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) block(a, b) = g.q(res.up_states[a], res.up_states[b]);

    // total direct rate into the (merged) absorbing set, per up state
    res.edge_rates.assign(m, 0.0);
    for (int b = 0; b < m; ++b) {
        double col = 0.0;
        for (int a = 0; a < m; ++a)
            if (a != b) col += block(a, b);
        res.edge_rates[b] = -block(b, b) - col;
        if (res.edge_rates[b] < 0.0 && res.edge_rates[b] > -1e-12) res.edge_rates[b] = 0.0;
    }

    // the up states must form one communicating class
    {
        const auto fwd = reachable(block, 0, false);
        const auto bwd = reachable(block, 0, true);
        std::vector<int> bad;
        for (int i = 0; i < m; ++i)
            if (!fwd[i] || !bwd[i]) bad.push_back(res.up_states[i]);
        if (!bad.empty()) {
            std::ostringstream os;
            os << "quasi_stationary: non-absorbing states are not a single "
                  "communicating class; offending states:";
            for (int i : bad) os << " " << i;
            throw NumericalError(os.str());
        }
    }

    if (m == 1) {
        res.k = -block(0, 0);
        res.v = Eigen::VectorXd::Ones(1);
        res.residual = 0.0;
        res.pf_identity_gap = std::abs(res.k - res.edge_rates[0]);
        res.slem = 0.0;
        return res;
    }

    Eigen::EigenSolver<Eigen::MatrixXd> es(block);
    if (es.info() != Eigen::Success)
        throw NumericalError("quasi_stationary: eigensolver failed");
    const auto& vals = es.eigenvalues();

    int dom = 0;
    for (int i = 1; i < m; ++i)
        if (vals(i).real() > vals(dom).real()) dom = i;
    double next_real = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i)
        if (i != dom) next_real = std::max(next_real, vals(i).real());

    const std::complex<double> lead = vals(dom);
    if (std::abs(lead.imag()) > 1e-9 * std::abs(lead.real()))
        throw NumericalError("quasi_stationary: dominant eigenvalue is complex");
    if (!(std::abs(lead.real() - next_real) > 1e-12 * std::abs(lead.real())))
        throw NumericalError("quasi_stationary: dominant eigenvalue is not simple");

    res.k = -lead.real();
    if (!(res.k > 0.0))
        throw NumericalError("quasi_stationary: nonpositive decay rate");

    Eigen::VectorXcd vc = es.eigenvectors().col(dom);
    // fix the sign by the largest-magnitude entry, then normalize to sum 1
    int big = 0;
    for (int i = 1; i < m; ++i)
        if (std::abs(vc(i).real()) > std::abs(vc(big).real())) big = i;
    Eigen::VectorXd v(m);
    const double sign = vc(big).real() < 0.0 ? -1.0 : 1.0;
    for (int i = 0; i < m; ++i) {
        if (std::abs(vc(i).imag()) > 1e-9 * (1.0 + std::abs(vc(i).real())))
            throw NumericalError("quasi_stationary: complex eigenvector");
        v(i) = sign * vc(i).real();
    }
    v /= v.sum();
    for (int i = 0; i < m; ++i)
        if (!(v(i) > 0.0))
            throw NumericalError(
                "quasi_stationary: eigenvector has nonpositive entries "
                "(reducible block?)");

    res.residual = (block * v + res.k * v).lpNorm<Eigen::Infinity>();
    double identity = 0.0;
    for (int i = 0; i < m; ++i) identity += v(i) * res.edge_rates[i];
    res.pf_identity_gap = std::abs(res.k - identity);

    // second largest eigenvalue modulus relative to the first (diagnostic)
    double second = 0.0;
    for (int i = 0; i < m; ++i)
        if (i != dom) second = std::max(second, std::abs(vals(i)));
    res.slem = std::abs(lead) > 0.0 ? second / std::abs(lead) : 0.0;

    res.v = std::move(v);
    return res;
}

namespace {

Eigen::VectorXd rk4_step(const Eigen::MatrixXd& q, const Eigen::VectorXd& p, double h) {
    const Eigen::VectorXd k1 = q * p;
    const Eigen::VectorXd k2 = q * (p + 0.5 * h * k1);
    const Eigen::VectorXd k3 = q * (p + 0.5 * h * k2);
    const Eigen::VectorXd k4 = q * (p + h * k3);
    return p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

} // namespace

std::vector<Eigen::VectorXd> transient(const Generator& g, const Eigen::VectorXd& p0,
                                       const std::vector<double>& times) {
    if (times.empty()) return {};
    if (p0.size() != g.n())
        throw ValidationError("transient: p0 size does not match generator");
    if (std::abs(p0.sum() - 1.0) > 1e-12)
        throw ValidationError("transient: p0 must sum to 1");
    for (size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw ValidationError("transient: times must be increasing");

    constexpr double err_tol = 1e-12;
    std::vector<Eigen::VectorXd> out;
    out.reserve(times.size());
    out.push_back(p0);

    Eigen::VectorXd p = p0;
    double t = times[0];
    double h = 0.0;
    {
        const double span = times.back() - times.front();
        h = span > 0.0 ? span / 256.0 : 1.0;
    }

    for (size_t idx = 1; idx < times.size(); ++idx) {
        const double target = times[idx];
        while (t < target) {
            double step = std::min(h, target - t);
            for (;;) {
                const Eigen::VectorXd one = rk4_step(g.q, p, step);
                const Eigen::VectorXd half = rk4_step(g.q, rk4_step(g.q, p, 0.5 * step), 0.5 * step);
                const double err = (one - half).lpNorm<Eigen::Infinity>() / 15.0;
                if (err <= err_tol || step <= 1e-14 * std::max(1.0, std::abs(t))) {
                    if (step <= 1e-14 * std::max(1.0, std::abs(t)) && err > err_tol)
                        throw NumericalError("transient: step size underflow at t=" +
                                             std::to_string(t) + " (err=" + std::to_string(err) + ")");
                    p = half;
                    t += step;
                    if (err > 0.0)
                        h = std::clamp(step * std::pow(err_tol / err, 0.2) * 0.9, step * 0.2,
                                       step * 4.0);
                    else
                        h = step * 4.0;
                    break;
                }
                step *= 0.5;
            }
        }
        out.push_back(p);
    }
    return out;
}

} // namespace smc
