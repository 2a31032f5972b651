#ifndef SMC_DISTRIBUTION_HPP
#define SMC_DISTRIBUTION_HPP

#include <limits>
#include <optional>
#include <string>

namespace smc {

enum class DistKind { exponential, fixed_delay, weibull, lognormal };

const char* dist_kind_name(DistKind k);

// Point evaluation of a holding-time law. `hazard` is empty beyond the
// support (survival == 0), never a silent number.
struct EvalResult {
    double cdf = 0.0;
    double survival = 1.0;
    double pdf = 0.0;
    std::optional<double> hazard;
};

struct Moments {
    double mean = 0.0;
    double scv = 0.0; // variance / mean^2
};

// Immutable holding-time distribution. Evaluation and sampling are pure;
// values are safe to share across threads.
class DistributionSpec {
public:
    static DistributionSpec exponential(double rate);
    static DistributionSpec fixed_delay(double delay);
    static DistributionSpec weibull(double shape, double scale);
    static DistributionSpec weibull_from_mean(double shape, double mean);
    static DistributionSpec lognormal(double mean_log, double sd_log);
    // mean/SCV parametrization; weibull is not constructible this way
    // (callers supply shape via weibull_from_mean).
    static DistributionSpec from_mean_scv(DistKind kind, double mean,
                                          std::optional<double> scv = {});

    DistKind kind() const { return kind_; }
    bool is_exponential() const { return kind_ == DistKind::exponential; }
    bool is_fixed_delay() const { return kind_ == DistKind::fixed_delay; }

    double rate() const;     // exponential
    double delay() const;    // fixed_delay
    double shape() const;    // weibull
    double scale() const;    // weibull
    double mean_log() const; // lognormal
    double sd_log() const;   // lognormal

    EvalResult eval(double t) const;
    double cdf(double t) const { return eval(t).cdf; }
    double survival(double t) const { return eval(t).survival; }
    double pdf(double t) const { return eval(t).pdf; }

    // Log-space forms for integrands weighted by e^{kt}; they stay finite
    // far beyond the underflow range of survival/pdf. -inf past the support.
    double log_survival(double t) const;
    double log_pdf(double t) const;

    Moments moments() const;
    double mean() const { return moments().mean; }

    // Inverse-CDF sampling; deterministic given u in (0,1).
    double sample(double u) const;

    // Bisection on the CDF to 1e-13 absolute (domain truncation helper).
    double quantile(double p) const;

    // Exponential decay rate of the survival tail: rate for exponential,
    // +inf for bounded support or superexponential tails (weibull shape>1),
    // 0 for subexponential tails (lognormal, weibull shape<1).
    double tail_rate() const;

    std::string to_string() const;

    bool operator==(const DistributionSpec&) const = default;

private:
    DistributionSpec(DistKind k, double a, double b) : kind_(k), a_(a), b_(b) {}
    DistKind kind_;
    double a_;
    double b_;
};

// Standard normal CDF via std::erfc, correct to ~1 ulp.
double normal_cdf(double z);
// Inverse standard normal CDF: Acklam's rational approximation refined by
// one Newton step against normal_cdf; ~1e-15 relative.
double normal_quantile(double p);

} // namespace smc

#endif
