#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cogsched/channel.hpp"

using namespace cogsched;

TEST_SUITE("channel") {

TEST_CASE("inverse cdf hits both ends of the support") {
  const GainDistribution d{1.0, 10.0};
  CHECK(d.quantile(0.0) == 0.0);
  CHECK(d.quantile(1.0) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(d.quantile(1.0 - 1e-15) == doctest::Approx(10.0).epsilon(1e-6));
}

TEST_CASE("sample mean matches the truncated-exponential mean") {
  const GainDistribution d{1.0, 10.0};
  // Independent oracle: numerical integration of x f(x) on [0, 10].
  const double norm = -std::expm1(-10.0);
  const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [&](double x) { return x * std::exp(-x) / norm; }, 0.0, 10.0, 15, 1e-14);
  CHECK(integral == doctest::Approx(0.9995459800899031).epsilon(1e-12));
  CHECK(d.truncated_mean() == doctest::Approx(integral).epsilon(1e-12));

  Engine rng = make_stream(11, StreamPurpose::validation, 0);
  double sum = 0.0;
  const int n = 1'000'000;
  for (int i = 0; i < n; ++i) sum += sample_gain(d, rng);
  // Standard deviation is about 1, so 4 standard errors is 0.004.
  CHECK(sum / n == doctest::Approx(integral).epsilon(0.004));
}

TEST_CASE("empirical cdf stays within the KS distance") {
  const GainDistribution d{0.4, 4.0};
  Engine rng = make_stream(12, StreamPurpose::validation, 0);
  std::vector<double> xs(100'000);
  for (auto& x : xs) x = sample_gain(d, rng);
  std::sort(xs.begin(), xs.end());
  double ks = 0.0;
  const auto n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = d.cdf(xs[i]);
    ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
  }
  CHECK(ks < 0.01);
  CHECK(xs.front() >= 0.0);
  CHECK(xs.back() <= 4.0);
}

TEST_CASE("invalid gain laws are rejected") {
  CHECK_THROWS_AS((GainDistribution{0.0, 1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((GainDistribution{2.0, 1.0}.validate()), std::invalid_argument);
  CHECK_NOTHROW((GainDistribution{1.0, 1.0}.validate()));
}

TEST_CASE("rate formula") {
  CHECK(transmission_rate(0.0, 5.0) == 0.0);
  CHECK(transmission_rate(5.0, 0.0) == 0.0);
  CHECK(transmission_rate(std::exp(1.0) - 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(transmission_rate(100.0, 10.0) == doctest::Approx(6.90875477931522).epsilon(1e-13));
  // Monotone in both arguments.
  double prev = 0.0;
  for (double p = 0.0; p <= 100.0; p += 0.5) {
    const double r = transmission_rate(p, 0.7);
    CHECK(r >= prev);
    prev = r;
  }
}

TEST_CASE("instantaneous cap") {
  CHECK(capped_power(100.0, 2.0, 20.0) == 10.0);
  CHECK(capped_power(100.0, 0.0, 20.0) == 100.0);
  CHECK(capped_power(100.0, 0.1, 20.0) == 100.0);
  Engine rng = make_stream(13, StreamPurpose::validation, 0);
  const GainDistribution d{0.4, 4.0};
  for (int i = 0; i < 100'000; ++i) {
    const double g = sample_gain(d, rng);
    const double p = capped_power(100.0 * uniform01(rng), g, 20.0);
    CHECK_LE(p * g, 20.0 * (1.0 + 1e-12));
  }
}

TEST_CASE("csi error mapping") {
  const ChannelRealization truth{1.0, 1.0};
  const auto same = apply_csi_error(ChannelRealization{0.37, 2.5}, CsiErrorModel{0.0}, 0.0, 0.0);
  CHECK(same.gamma == 0.37);
  CHECK(same.g == 2.5);
  const CsiErrorModel model{0.1};
  CHECK(apply_csi_error(truth, model, 0.05, 0.0).gamma == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(apply_csi_error(truth, model, 0.0, -0.05).g == doctest::Approx(1.0).epsilon(1e-15));

  Engine a = make_stream(14, StreamPurpose::csi_direct, 0);
  Engine b = make_stream(14, StreamPurpose::csi_interference, 0);
  Engine gains = make_stream(14, StreamPurpose::direct_gain, 0);
  const GainDistribution law{1.0, 10.0};
  for (int i = 0; i < 100'000; ++i) {
    const ChannelRealization t{sample_gain(law, gains), sample_gain(law, gains)};
    const auto used = apply_csi_error(t, model, a, b);
    CHECK_LE(used.gamma, t.gamma);
    CHECK_GE(used.g, t.g);
  }
  CHECK_THROWS_AS(CsiErrorModel{1.0}.validate(), std::invalid_argument);
}

}  // TEST_SUITE
