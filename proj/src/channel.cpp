#include "cogsched/channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cogsched {

void GainDistribution::validate() const {
  if (!(mean > 0.0) || !(max_gain > 0.0) || max_gain < mean) {
    throw std::invalid_argument("gain distribution needs 0 < mean <= max_gain");
  }
}

double GainDistribution::cdf(double x) const {
  if (x <= 0.0) return 0.0;
  if (x >= max_gain) return 1.0;
  return -std::expm1(-x / mean) / -std::expm1(-max_gain / mean);
}

double GainDistribution::quantile(double u) const {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return max_gain;
  const double mass = -std::expm1(-max_gain / mean);
  return std::min(max_gain, -mean * std::log1p(-u * mass));
}

double GainDistribution::truncated_mean() const {
  const double tail = std::exp(-max_gain / mean);
  return mean - max_gain * tail / (1.0 - tail);
}

double sample_gain(const GainDistribution& dist, Engine& rng) {
  return dist.quantile(uniform01(rng));
}

void CsiErrorModel::validate() const {
  if (!(alpha >= 0.0) || !(alpha < 1.0)) {
    throw std::invalid_argument("CSI error alpha must lie in [0, 1)");
  }
}

double transmission_rate(double power, double gamma) {
  return std::log1p(power * gamma);
}

double capped_power(double power_param, double g, double inst_threshold) {
  if (g <= 0.0) return power_param;
  return std::min(inst_threshold / g, power_param);
}

ChannelRealization apply_csi_error(const ChannelRealization& truth, const CsiErrorModel& model,
                                   double u_gamma, double u_g) {
  if (model.perfect()) return truth;
  const double half = model.alpha / 2.0;
  ChannelRealization used;
  used.gamma = truth.gamma * (1.0 + u_gamma) / (1.0 + half);
  used.g = truth.g * (1.0 + u_g) / (1.0 - half);
  // (1+u)/(1+a/2) can round a hair above 1 at u = a/2.
  used.gamma = std::min(used.gamma, truth.gamma);
  used.g = std::max(used.g, truth.g);
  return used;
}

ChannelRealization apply_csi_error(const ChannelRealization& truth, const CsiErrorModel& model,
                                   Engine& rng_gamma, Engine& rng_g) {
  if (model.perfect()) return truth;
  const double u_gamma = model.alpha * (uniform01(rng_gamma) - 0.5);
  const double u_g = model.alpha * (uniform01(rng_g) - 0.5);
  return apply_csi_error(truth, model, u_gamma, u_g);
}

}  // namespace cogsched
