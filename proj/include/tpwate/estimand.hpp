#pragma once

#include <stdexcept>
#include <string>

namespace tpwate {

enum class Estimand { ATE, ATT, ATC, ATO };

// Tilting weight w(e), its first derivative with respect to e, and its second
// derivative.  The first derivative feeds the weighting-term augmentation in
// the doubly robust estimators; the second enters the stacked-score Jacobian.
struct WeightValue {
  double w;
  double wdot;
  double wddot;
};

inline WeightValue weight_value(Estimand kind, double e) {
  if (!(e > 0.0 && e < 1.0))
    throw std::domain_error("propensity must lie strictly inside (0,1)");
  switch (kind) {
    case Estimand::ATE: return {1.0, 0.0, 0.0};
    case Estimand::ATT: return {e, 1.0, 0.0};
    case Estimand::ATC: return {1.0 - e, -1.0, 0.0};
    case Estimand::ATO: return {e * (1.0 - e), 1.0 - 2.0 * e, -2.0};
  }
  throw std::logic_error("unreachable");
}

// The augmented weighting estimators stay consistent under a misspecified
// propensity model only when w is linear in e.
inline bool supports_double_robustness(Estimand kind) {
  return kind != Estimand::ATO;
}

inline Estimand parse_estimand(const std::string& s) {
  if (s == "ate") return Estimand::ATE;
  if (s == "att") return Estimand::ATT;
  if (s == "atc") return Estimand::ATC;
  if (s == "ato") return Estimand::ATO;
  throw std::invalid_argument("unknown estimand: " + s);
}

inline const char* estimand_name(Estimand kind) {
  switch (kind) {
    case Estimand::ATE: return "ate";
    case Estimand::ATT: return "att";
    case Estimand::ATC: return "atc";
    case Estimand::ATO: return "ato";
  }
  return "?";
}

}  // namespace tpwate
