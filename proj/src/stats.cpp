#include "lhids/stats.hpp"

#include <algorithm>
#include <cmath>

#include "lhids/errors.hpp"

namespace lhids {

double mean(std::span<const double> values) {
  if (values.empty()) fail(ErrorCode::kBadParameter, "mean of empty set");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  double m = sum / n;
  // One correction pass, then clamp so constant inputs come back exactly.
  double residual = 0.0;
  for (double v : values) residual += v - m;
  m += residual / n;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return std::clamp(m, *lo, *hi);
}

double population_std(std::span<const double> values) {
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

double skewness(std::span<const double> values) {
  const double m = mean(values);
  const double s = population_std(values);
  if (s == 0.0) return 0.0;
  double acc = 0.0;
  for (double v : values) acc += std::pow((v - m) / s, 3);
  return acc / static_cast<double>(values.size());
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) fail(ErrorCode::kBadParameter, "quantile of empty set");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace lhids
