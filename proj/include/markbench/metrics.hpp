#pragma once

#include <optional>
#include <string>
#include <vector>

namespace markbench::metrics {

// True-positive rate at a fixed false-positive budget.  The decision
// threshold is calibrated on the clean-image p-values: it is the largest
// cutoff with at most `fpr` of the clean set strictly below it.
struct TprResult {
  double tpr = 0.0;
  double threshold = 0.0;  // calibrated p-value cutoff
  double fpr_achieved = 0.0;
};
TprResult tpr_at_fpr(const std::vector<double>& watermarked_p, const std::vector<double>& clean_p,
                     double fpr = 0.01);

// A point on the attack trade-off plane.
struct AttackPoint {
  std::string attack;      // attack id, e.g. "noising-eps2"
  double accuracy = 0.0;   // verification accuracy after the attack
  double distance = 0.0;   // perceptual distance paid by the attack
};

// Non-dominated subset under (min accuracy, min distance); ties kept.
std::vector<AttackPoint> pareto_front(const std::vector<AttackPoint>& points);

// Cheapest attack that breaks verification (accuracy below `break_acc`).
std::optional<AttackPoint> best_attack(const std::vector<AttackPoint>& points,
                                       double break_acc = 0.10);

// Mean of a vector (0 for empty input).
double mean(const std::vector<double>& v);

}  // namespace markbench::metrics
