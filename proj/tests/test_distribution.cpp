#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "smc/distribution.hpp"
#include "smc/errors.hpp"
#include "smc/quadrature.hpp"
#include "smc/rng.hpp"

using namespace smc;

namespace {

// Independent oracle: standard normal CDF by quadrature of the density,
// never through erfc.
double normal_cdf_oracle(double z) {
    auto phi = [](double x) {
        return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    };
    const double body = integrate(phi, 0.0, std::abs(z), 1e-14, 60).value;
    return z >= 0.0 ? 0.5 + body : 0.5 - body;
}

// Independent oracle: Gamma(x) for x > 1 by quadrature of t^{x-1} e^{-t}.
double gamma_oracle(double x) {
    auto f = [x](double t) { return std::pow(t, x - 1.0) * std::exp(-t); };
    return integrate(f, 0.0, 60.0, 1e-13, 60).value;
}

std::vector<DistributionSpec> sample_specs() {
    return {
        DistributionSpec::exponential(1.0),
        DistributionSpec::exponential(0.37),
        DistributionSpec::weibull(0.7, 1.3),
        DistributionSpec::weibull(1.0, 1.0),
        DistributionSpec::weibull(2.4, 0.8),
        DistributionSpec::lognormal(-0.3465735902799726, 0.8325546111576977),
        DistributionSpec::lognormal(0.5, 1.6),
    };
}

} // namespace

TEST_CASE("exponential point evaluation") {
    auto d = DistributionSpec::exponential(1.0);
    auto r = d.eval(1.0);
    CHECK(r.cdf == doctest::Approx(0.632121).epsilon(1e-5));
    CHECK(r.hazard.has_value());
    CHECK(*r.hazard == doctest::Approx(1.0));
    CHECK(r.survival + r.cdf == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("fixed delay before the point mass") {
    auto d = DistributionSpec::fixed_delay(1.0);
    auto r = d.eval(0.5);
    CHECK(r.cdf == 0.0);
    CHECK(r.survival == 1.0);
    CHECK(r.pdf == 0.0);
    CHECK(*r.hazard == 0.0);
    auto past = d.eval(1.0);
    CHECK(past.cdf == 1.0);
    CHECK(!past.hazard.has_value()); // beyond-support signal
}

TEST_CASE("weibull shape 1 is exponential: constant hazard") {
    auto d = DistributionSpec::weibull(1.0, 1.0);
    for (double t : {0.1, 0.5, 1.0, 3.7, 10.0})
        CHECK(*d.eval(t).hazard == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("lognormal mean 1 scv 1 cdf at t=1 against the normal-CDF oracle") {
    auto d = DistributionSpec::from_mean_scv(DistKind::lognormal, 1.0, 1.0);
    // argument is sqrt(ln 2)/2
    const double z = std::sqrt(std::log(2.0)) / 2.0;
    const double expected = normal_cdf_oracle(z);
    CHECK(expected == doctest::Approx(0.66139).epsilon(2e-5)); // frozen
    CHECK(d.cdf(1.0) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("negative t is a domain error") {
    auto d = DistributionSpec::exponential(1.0);
    CHECK_THROWS_AS(d.eval(-0.1), std::domain_error);
}

TEST_CASE("moments") {
    auto exp2 = DistributionSpec::exponential(2.0);
    CHECK(exp2.moments().mean == doctest::Approx(0.5));
    CHECK(exp2.moments().scv == doctest::Approx(1.0));

    auto fx = DistributionSpec::fixed_delay(1.0);
    CHECK(fx.moments().mean == doctest::Approx(1.0));
    CHECK(fx.moments().scv == doctest::Approx(0.0));

    auto wb = DistributionSpec::weibull(2.0, 1.0);
    const double expected = gamma_oracle(1.5);
    CHECK(expected == doctest::Approx(0.886227).epsilon(1e-6)); // frozen, Gamma(1.5)
    CHECK(wb.moments().mean == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("from_mean_scv") {
    SUBCASE("lognormal mean 1 scv 1") {
        auto d = DistributionSpec::from_mean_scv(DistKind::lognormal, 1.0, 1.0);
        CHECK(d.mean_log() == doctest::Approx(-0.346574).epsilon(1e-5));
        CHECK(d.sd_log() == doctest::Approx(0.832555).epsilon(1e-5));
    }
    SUBCASE("weibull mean 1 shape 1 gives scale 1") {
        auto d = DistributionSpec::weibull_from_mean(1.0, 1.0);
        CHECK(d.scale() == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("exponential mean 0.25 gives rate 4") {
        auto d = DistributionSpec::from_mean_scv(DistKind::exponential, 0.25);
        CHECK(d.rate() == doctest::Approx(4.0));
    }
    SUBCASE("weibull by mean/scv is rejected") {
        CHECK_THROWS_AS(DistributionSpec::from_mean_scv(DistKind::weibull, 1.0, 0.5),
                        ValidationError);
    }
    SUBCASE("round trip within 1e-10 relative") {
        for (double mean : {0.3, 1.0, 4.5}) {
            for (double scv : {0.2, 1.0, 5.0}) {
                auto d = DistributionSpec::from_mean_scv(DistKind::lognormal, mean, scv);
                CHECK(d.moments().mean == doctest::Approx(mean).epsilon(1e-10));
                CHECK(d.moments().scv == doctest::Approx(scv).epsilon(1e-10));
            }
            auto e = DistributionSpec::from_mean_scv(DistKind::exponential, mean);
            CHECK(e.moments().mean == doctest::Approx(mean).epsilon(1e-12));
        }
    }
}

TEST_CASE("inverse-CDF sampling") {
    auto e = DistributionSpec::exponential(1.0);
    CHECK(e.sample(1.0 - std::exp(-1.0)) == doctest::Approx(1.0).epsilon(1e-12));

    auto f = DistributionSpec::fixed_delay(2.0);
    CHECK(f.sample(0.123) == 2.0);
    CHECK(f.sample(0.9) == 2.0);

    auto ln = DistributionSpec::from_mean_scv(DistKind::lognormal, 1.0, 1.0);
    CHECK(ln.sample(0.5) == doctest::Approx(0.70711).epsilon(1e-5)); // median e^{mean_log}

    CHECK_THROWS_AS(e.sample(0.0), std::domain_error);
    CHECK_THROWS_AS(e.sample(1.0), std::domain_error);
}

TEST_CASE("invalid parameters are rejected") {
    CHECK_THROWS_AS(DistributionSpec::exponential(0.0), ValidationError);
    CHECK_THROWS_AS(DistributionSpec::exponential(-1.0), ValidationError);
    CHECK_THROWS_AS(DistributionSpec::fixed_delay(0.0), ValidationError);
    CHECK_THROWS_AS(DistributionSpec::weibull(-2.0, 1.0), ValidationError);
    CHECK_THROWS_AS(DistributionSpec::lognormal(0.0, 0.0), ValidationError);
}

TEST_CASE("property: cdf monotone in [0,1] on a grid") {
    for (const auto& d : sample_specs()) {
        const double hi = d.quantile(1.0 - 1e-9);
        double prev = 0.0;
        for (int i = 0; i <= 1000; ++i) {
            const double t = hi * i / 1000.0;
            const double c = d.cdf(t);
            CHECK(c >= prev);
            CHECK(c >= 0.0);
            CHECK(c <= 1.0);
            prev = c;
        }
    }
}

TEST_CASE("property: pdf quadrature matches cdf to 1e-8 (continuous kinds)") {
    for (const auto& d : sample_specs()) {
        const double hi = d.quantile(1.0 - 1e-12);
        double integral = 0.0;
        if (d.kind() == DistKind::weibull && d.shape() < 1.0) {
            // integrable singularity at 0: integrate in u = (t/scale)^shape
            auto fu = [](double) { return 1.0; };
            (void)fu;
            const double u_hi = std::pow(hi / d.scale(), d.shape());
            integral = integrate([](double u) { return std::exp(-u); }, 0.0, u_hi, 1e-12, 60).value;
        } else {
            integral = integrate([&](double t) { return d.pdf(t); }, 0.0, hi, 1e-12, 60).value;
        }
        CHECK(integral == doctest::Approx(d.cdf(hi)).epsilon(1e-8));
    }
}

TEST_CASE("property: hazard * survival = pdf wherever survival > 1e-300") {
    for (const auto& d : sample_specs()) {
        const double hi = d.quantile(1.0 - 1e-9);
        for (int i = 1; i <= 200; ++i) {
            const double t = hi * i / 200.0;
            const auto r = d.eval(t);
            if (r.survival <= 1e-300 || !r.hazard) continue;
            CHECK(*r.hazard * r.survival == doctest::Approx(r.pdf).epsilon(1e-12));
        }
    }
}

TEST_CASE("property: empirical mean of 1e6 samples within 5 standard errors") {
    SplitMix64 rng = SplitMix64::for_stream(20240817, 1);
    for (const auto& d : sample_specs()) {
        const auto m = d.moments();
        const long n = 1000000;
        double sum = 0.0;
        for (long i = 0; i < n; ++i) sum += d.sample(rng.uniform01());
        const double mean = sum / n;
        const double se = std::sqrt(m.scv * m.mean * m.mean / n);
        CHECK(std::abs(mean - m.mean) < 5.0 * std::max(se, 1e-12));
    }
}

TEST_CASE("quantile: bisection against closed forms") {
    auto e = DistributionSpec::exponential(2.0);
    CHECK(e.quantile(0.5) == doctest::Approx(std::log(2.0) / 2.0).epsilon(1e-9));
    auto w = DistributionSpec::weibull(2.0, 1.0);
    CHECK(w.quantile(1.0 - 1e-6) ==
          doctest::Approx(std::sqrt(-std::log(1e-6))).epsilon(1e-7));
    auto f = DistributionSpec::fixed_delay(3.0);
    CHECK(f.quantile(0.2) == 3.0);
}

TEST_CASE("normal_quantile inverts normal_cdf") {
    for (double p : {1e-10, 0.001, 0.1, 0.5, 0.77, 0.999, 1.0 - 1e-10}) {
        const double z = normal_quantile(p);
        CHECK(normal_cdf(z) == doctest::Approx(p).epsilon(1e-12));
    }
}
