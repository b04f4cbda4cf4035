#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "swiptmac/errors.hpp"
#include "swiptmac/fading.hpp"
#include "swiptmac/region.hpp"

namespace swiptmac {

/// Per-slot harvest process at a transmitter. All kinds are stationary with
/// the configured mean; Uniform spans [0, 2 mean], TwoPoint is {0, 2 mean}
/// with equal odds.
enum class HarvestKind { Constant, Exponential, Uniform, TwoPoint };

inline const char* harvest_kind_name(HarvestKind k) {
  switch (k) {
    case HarvestKind::Constant: return "constant";
    case HarvestKind::Exponential: return "exponential";
    case HarvestKind::Uniform: return "uniform";
    case HarvestKind::TwoPoint: return "two-point";
  }
  return "?";
}

/// A complete problem instance. Every energy-like quantity is in joules per
/// slot; rates are bits per channel use.
struct Scenario {
  JointFadeTable fading;
  std::vector<double> harvest_mean;  // E[Y^s(i)], one per user
  HarvestKind harvest_kind = HarvestKind::Exponential;
  std::vector<double> rho;           // per-user minimum rates
  double sigma2 = 1.0;               // receiver noise energy per channel use
  ReceiverEnergetics rx;
  double slot_seconds = 1e-6;        // bookkeeping for unit conversion only

  std::size_t users() const { return fading.users; }

  void validate() const {
    if (fading.users == 0 || fading.states == 0)
      throw invalid_parameter("scenario: empty fade table");
    if (harvest_mean.size() != fading.users)
      throw invalid_parameter("scenario: harvest_mean size must equal user count");
    if (rho.size() != fading.users)
      throw invalid_parameter("scenario: rho size must equal user count");
    for (double y : harvest_mean)
      if (!(y > 0.0)) throw invalid_parameter("scenario: harvest means must be > 0");
    for (double r : rho)
      if (!(r >= 0.0)) throw invalid_parameter("scenario: minimum rates must be >= 0");
    if (!(sigma2 > 0.0)) throw invalid_parameter("scenario: sigma2 must be > 0");
    if (!(rx.eta > 0.0) || !(rx.eta <= 1.0))
      throw invalid_parameter("scenario: eta must be in (0, 1]");
    if (!(rx.rx_consumption >= 0.0) || !(rx.rx_harvest >= 0.0))
      throw invalid_parameter("scenario: receiver powers must be >= 0");
    if (!(slot_seconds > 0.0)) throw invalid_parameter("scenario: slot duration must be > 0");
  }

  double energy_deficit() const { return deficit(rx); }
};

}  // namespace swiptmac
