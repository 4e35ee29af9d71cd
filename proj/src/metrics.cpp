#include "markbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace markbench::metrics {

TprResult tpr_at_fpr(const std::vector<double>& watermarked_p, const std::vector<double>& clean_p,
                     double fpr) {
  if (clean_p.empty() || watermarked_p.empty())
    throw std::invalid_argument("tpr_at_fpr: empty input");
  std::vector<double> sorted = clean_p;
  std::sort(sorted.begin(), sorted.end());
  // With threshold c[k], the strictly-below count is at most k, i.e. at most
  // a fraction k/n of the clean set fires.
  const size_t k = static_cast<size_t>(std::floor(fpr * static_cast<double>(sorted.size())));
  TprResult out;
  out.threshold = sorted[std::min(k, sorted.size() - 1)];
  size_t fp = 0;
  for (double p : clean_p)
    if (p < out.threshold) ++fp;
  out.fpr_achieved = static_cast<double>(fp) / static_cast<double>(clean_p.size());
  size_t tp = 0;
  for (double p : watermarked_p)
    if (p < out.threshold) ++tp;
  out.tpr = static_cast<double>(tp) / static_cast<double>(watermarked_p.size());
  return out;
}

std::vector<AttackPoint> pareto_front(const std::vector<AttackPoint>& points) {
  std::vector<AttackPoint> front;
  for (const auto& p : points) {
    bool dominated = false;
    for (const auto& q : points) {
      const bool q_no_worse = q.accuracy <= p.accuracy && q.distance <= p.distance;
      const bool q_better = q.accuracy < p.accuracy || q.distance < p.distance;
      if (q_no_worse && q_better) {
        dominated = true;
        break;
      }
    }
    if (!dominated) front.push_back(p);
  }
  std::sort(front.begin(), front.end(), [](const AttackPoint& a, const AttackPoint& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.accuracy != b.accuracy) return a.accuracy < b.accuracy;
    return a.attack < b.attack;
  });
  return front;
}

std::optional<AttackPoint> best_attack(const std::vector<AttackPoint>& points, double break_acc) {
  std::optional<AttackPoint> best;
  for (const auto& p : points) {
    if (p.accuracy >= break_acc) continue;
    if (!best || p.distance < best->distance) best = p;
  }
  return best;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace markbench::metrics
