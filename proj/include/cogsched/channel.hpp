#pragma once

#include "cogsched/rng.hpp"

namespace cogsched {

/// Exponential power-gain law truncated (and renormalized) on [0, max_gain].
struct GainDistribution {
  double mean = 1.0;
  double max_gain = 10.0;

  /// Throws std::invalid_argument unless 0 < mean <= max_gain.
  void validate() const;

  double cdf(double x) const;
  /// Inverse CDF; u = 0 maps to 0 and u = 1 maps to max_gain.
  double quantile(double u) const;
  /// Closed-form mean of the truncated law (slightly below `mean`).
  double truncated_mean() const;

  friend bool operator==(const GainDistribution&, const GainDistribution&) = default;
};

double sample_gain(const GainDistribution& dist, Engine& rng);

struct ChannelRealization {
  double gamma = 0.0;  // direct link (SU -> base station)
  double g = 0.0;      // interference link (SU -> PU)
};

/// Relative estimation error magnitude; observed gains are off by a factor
/// (1 + U) with U uniform on [-alpha/2, alpha/2].
struct CsiErrorModel {
  double alpha = 0.0;

  void validate() const;
  bool perfect() const { return alpha == 0.0; }
};

/// Nats delivered in one slot at `power` over direct gain `gamma`.
double transmission_rate(double power, double gamma);

/// Per-slot power under the instantaneous interference cap. g == 0 means
/// the cap is inactive.
double capped_power(double power_param, double g, double inst_threshold);

/// Maps true gains to the values the system acts on, given the two
/// relative errors u_gamma, u_g in [-alpha/2, alpha/2]. The direct gain is
/// deflated and the interference gain inflated so that
/// used.gamma <= truth.gamma and used.g >= truth.g.
ChannelRealization apply_csi_error(const ChannelRealization& truth, const CsiErrorModel& model,
                                   double u_gamma, double u_g);

ChannelRealization apply_csi_error(const ChannelRealization& truth, const CsiErrorModel& model,
                                   Engine& rng_gamma, Engine& rng_g);

}  // namespace cogsched
