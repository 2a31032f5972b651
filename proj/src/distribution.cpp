#include "smc/distribution.hpp"

#include <cmath>
#include <sstream>

#include "smc/errors.hpp"

namespace smc {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779;
constexpr double kInfLog = std::numeric_limits<double>::infinity();

void require_positive(double v, const char* name, const char* kind) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        std::ostringstream os;
        os << kind << ": parameter '" << name << "' must be strictly positive, got " << v;
        throw ValidationError(os.str());
    }
}

} // namespace

const char* dist_kind_name(DistKind k) {
    switch (k) {
        case DistKind::exponential: return "exponential";
        case DistKind::fixed_delay: return "fixed";
        case DistKind::weibull: return "weibull";
        case DistKind::lognormal: return "lognormal";
    }
    return "?";
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must be in (0,1)");
    // Acklam's approximation, |relative error| < 1.15e-9 before refinement.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // One Newton step on Phi(x) - p = 0.
    const double e = normal_cdf(x) - p;
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    if (pdf > 0.0) x -= e / pdf;
    return x;
}

DistributionSpec DistributionSpec::exponential(double rate) {
    require_positive(rate, "rate", "exponential");
    return {DistKind::exponential, rate, 0.0};
}

DistributionSpec DistributionSpec::fixed_delay(double delay) {
    require_positive(delay, "delay", "fixed");
    return {DistKind::fixed_delay, delay, 0.0};
}

DistributionSpec DistributionSpec::weibull(double shape, double scale) {
    require_positive(shape, "shape", "weibull");
    require_positive(scale, "scale", "weibull");
    return {DistKind::weibull, shape, scale};
}

DistributionSpec DistributionSpec::weibull_from_mean(double shape, double mean) {
    require_positive(shape, "shape", "weibull");
    require_positive(mean, "mean", "weibull");
    const double scale = mean / std::tgamma(1.0 + 1.0 / shape);
    return weibull(shape, scale);
}

DistributionSpec DistributionSpec::lognormal(double mean_log, double sd_log) {
    if (!std::isfinite(mean_log))
        throw ValidationError("lognormal: parameter 'mean_log' must be finite");
    require_positive(sd_log, "sd_log", "lognormal");
    return {DistKind::lognormal, mean_log, sd_log};
}

DistributionSpec DistributionSpec::from_mean_scv(DistKind kind, double mean,
                                                 std::optional<double> scv) {
    require_positive(mean, "mean", dist_kind_name(kind));
    switch (kind) {
        case DistKind::exponential:
            if (scv && std::abs(*scv - 1.0) > 1e-12)
                throw ValidationError("exponential: scv is fixed at 1");
            return exponential(1.0 / mean);
        case DistKind::fixed_delay:
            if (scv && *scv != 0.0)
                throw ValidationError("fixed: scv is fixed at 0");
            return fixed_delay(mean);
        case DistKind::lognormal: {
            if (!scv || !(*scv > 0.0))
                throw ValidationError("lognormal: mean/scv form requires scv > 0");
            const double s2 = std::log1p(*scv);
            return lognormal(std::log(mean) - 0.5 * s2, std::sqrt(s2));
        }
        case DistKind::weibull:
            throw ValidationError(
                "weibull: mean/scv parametrization unsupported; supply shape and mean");
    }
    throw ValidationError("unknown distribution kind");
}

double DistributionSpec::rate() const {
    if (kind_ != DistKind::exponential) throw std::logic_error("rate(): not exponential");
    return a_;
}
double DistributionSpec::delay() const {
    if (kind_ != DistKind::fixed_delay) throw std::logic_error("delay(): not fixed");
    return a_;
}
double DistributionSpec::shape() const {
    if (kind_ != DistKind::weibull) throw std::logic_error("shape(): not weibull");
    return a_;
}
double DistributionSpec::scale() const {
    if (kind_ != DistKind::weibull) throw std::logic_error("scale(): not weibull");
    return b_;
}
double DistributionSpec::mean_log() const {
    if (kind_ != DistKind::lognormal) throw std::logic_error("mean_log(): not lognormal");
    return a_;
}
double DistributionSpec::sd_log() const {
    if (kind_ != DistKind::lognormal) throw std::logic_error("sd_log(): not lognormal");
    return b_;
}

EvalResult DistributionSpec::eval(double t) const {
    if (t < 0.0 || !std::isfinite(t))
        throw std::domain_error("distribution eval: t must be finite and >= 0");
    EvalResult r;
    switch (kind_) {
        case DistKind::exponential: {
            r.survival = std::exp(-a_ * t);
            r.cdf = -std::expm1(-a_ * t);
            r.pdf = a_ * r.survival;
            r.hazard = a_;
            break;
        }
        case DistKind::fixed_delay: {
            if (t < a_) {
                r = {0.0, 1.0, 0.0, 0.0};
            } else {
                r = {1.0, 0.0, 0.0, std::nullopt}; // beyond the point mass
            }
            break;
        }
        case DistKind::weibull: {
            const double x = t / b_;
            const double xb = std::pow(x, a_);
            r.survival = std::exp(-xb);
            r.cdf = -std::expm1(-xb);
            const double haz = a_ / b_ * std::pow(x, a_ - 1.0);
            r.pdf = haz * r.survival;
            if (r.survival > 0.0)
                r.hazard = haz;
            break;
        }
        case DistKind::lognormal: {
            if (t == 0.0) {
                r = {0.0, 1.0, 0.0, 0.0};
                break;
            }
            const double z = (std::log(t) - a_) / b_;
            r.cdf = 0.5 * std::erfc(-z * M_SQRT1_2);
            r.survival = 0.5 * std::erfc(z * M_SQRT1_2);
            r.pdf = kInvSqrt2Pi / (t * b_) * std::exp(-0.5 * z * z);
            if (r.survival > 0.0)
                r.hazard = r.pdf / r.survival;
            else if (r.pdf == 0.0)
                r.hazard = std::nullopt;
            break;
        }
    }
    return r;
}

double DistributionSpec::log_survival(double t) const {
    if (t < 0.0 || !std::isfinite(t))
        throw std::domain_error("log_survival: t must be finite and >= 0");
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    switch (kind_) {
        case DistKind::exponential:
            return -a_ * t;
        case DistKind::fixed_delay:
            return t < a_ ? 0.0 : neg_inf;
        case DistKind::weibull:
            return -std::pow(t / b_, a_);
        case DistKind::lognormal: {
            if (t == 0.0) return 0.0;
            const double z = (std::log(t) - a_) / b_;
            if (z < 36.0) {
                const double s = 0.5 * std::erfc(z * M_SQRT1_2);
                if (s > 0.0) return std::log(s);
            }
            // Mills-ratio asymptotic for the far tail
            return -0.5 * z * z - std::log(z) - 0.5 * std::log(2.0 * M_PI);
        }
    }
    return neg_inf;
}

double DistributionSpec::log_pdf(double t) const {
    if (t < 0.0 || !std::isfinite(t))
        throw std::domain_error("log_pdf: t must be finite and >= 0");
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    switch (kind_) {
        case DistKind::exponential:
            return std::log(a_) - a_ * t;
        case DistKind::fixed_delay:
            return neg_inf; // point mass has no density
        case DistKind::weibull: {
            if (t == 0.0) return a_ > 1.0 ? neg_inf : (a_ == 1.0 ? -std::log(b_) : kInfLog);
            const double x = t / b_;
            return std::log(a_ / b_) + (a_ - 1.0) * std::log(x) - std::pow(x, a_);
        }
        case DistKind::lognormal: {
            if (t == 0.0) return neg_inf;
            const double z = (std::log(t) - a_) / b_;
            return -std::log(t * b_) - 0.5 * std::log(2.0 * M_PI) - 0.5 * z * z;
        }
    }
    return neg_inf;
}

Moments DistributionSpec::moments() const {
    switch (kind_) {
        case DistKind::exponential:
            return {1.0 / a_, 1.0};
        case DistKind::fixed_delay:
            return {a_, 0.0};
        case DistKind::weibull: {
            const double g1 = std::tgamma(1.0 + 1.0 / a_);
            const double g2 = std::tgamma(1.0 + 2.0 / a_);
            return {b_ * g1, g2 / (g1 * g1) - 1.0};
        }
        case DistKind::lognormal: {
            const double s2 = b_ * b_;
            return {std::exp(a_ + 0.5 * s2), std::expm1(s2)};
        }
    }
    return {};
}

double DistributionSpec::sample(double u) const {
    if (!(u > 0.0 && u < 1.0))
        throw std::domain_error("sample: u must be in (0,1)");
    switch (kind_) {
        case DistKind::exponential:
            return -std::log1p(-u) / a_;
        case DistKind::fixed_delay:
            return a_;
        case DistKind::weibull:
            return b_ * std::pow(-std::log1p(-u), 1.0 / a_);
        case DistKind::lognormal:
            return std::exp(a_ + b_ * normal_quantile(u));
    }
    return 0.0;
}

double DistributionSpec::quantile(double p) const {
    if (!(p >= 0.0 && p < 1.0))
        throw std::domain_error("quantile: p must be in [0,1)");
    if (p == 0.0) return 0.0;
    if (kind_ == DistKind::fixed_delay) return a_;
    double lo = 0.0;
    double hi = std::max(moments().mean, 1e-12);
    int guard = 0;
    while (cdf(hi) < p) {
        hi *= 2.0;
        if (++guard > 4000) throw NumericalError("quantile: bracket search failed");
    }
    while (hi - lo > 1e-13) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double DistributionSpec::tail_rate() const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (kind_) {
        case DistKind::exponential: return a_;
        case DistKind::fixed_delay: return inf;
        case DistKind::weibull:
            if (a_ > 1.0) return inf;
            if (a_ == 1.0) return 1.0 / b_;
            return 0.0;
        case DistKind::lognormal: return 0.0;
    }
    return 0.0;
}

std::string DistributionSpec::to_string() const {
    std::ostringstream os;
    os << dist_kind_name(kind_) << "(";
    switch (kind_) {
        case DistKind::exponential: os << "rate=" << a_; break;
        case DistKind::fixed_delay: os << "delay=" << a_; break;
        case DistKind::weibull: os << "shape=" << a_ << ", scale=" << b_; break;
        case DistKind::lognormal: os << "mean_log=" << a_ << ", sd_log=" << b_; break;
    }
    os << ")";
    return os.str();
}

} // namespace smc
