#pragma once

#include <span>
#include <vector>

namespace normprimes {

struct ErrorReport {
  std::vector<double> samples;
  double mean = 0.0;
  double stdev = 0.0;  // sample standard deviation (n - 1)
  double stdev_over_mean = 0.0;
  double maxmin_ratio = 0.0;
};

/// Sample standard deviation divided by the mean. Needs at least two
/// samples and a nonzero mean.
double stdev_over_mean(std::span<const double> samples);

/// max / min over strictly positive samples.
double maxmin_ratio(std::span<const double> samples);

ErrorReport make_error_report(std::span<const double> samples);

}  // namespace normprimes
