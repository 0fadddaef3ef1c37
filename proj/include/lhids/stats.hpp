#pragma once

#include <span>
#include <vector>

namespace lhids {

double mean(std::span<const double> values);
// Population (1/n) standard deviation.
double population_std(std::span<const double> values);
// Third standardized moment; 0 when the spread is zero.
double skewness(std::span<const double> values);
// Linear-interpolated quantile of unsorted values, q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace lhids
