#include "normprimes/stats.hpp"

#include <algorithm>
#include <cmath>

#include "normprimes/errors.hpp"

namespace normprimes {

namespace {

double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_stdev(std::span<const double> xs, double mean) {
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

double stdev_over_mean(std::span<const double> samples) {
  if (samples.size() < 2) throw DegenerateInputError("stdev_over_mean needs at least two samples");
  const double m = mean_of(samples);
  if (m == 0.0) throw DegenerateInputError("stdev_over_mean is undefined for zero mean");
  return sample_stdev(samples, m) / m;
}

double maxmin_ratio(std::span<const double> samples) {
  if (samples.empty()) throw DegenerateInputError("maxmin_ratio needs at least one sample");
  for (double x : samples) {
    if (!(x > 0.0)) throw DomainError("maxmin_ratio needs strictly positive samples");
  }
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  return *hi / *lo;
}

ErrorReport make_error_report(std::span<const double> samples) {
  ErrorReport r;
  r.samples.assign(samples.begin(), samples.end());
  r.mean = mean_of(samples);
  r.stdev = samples.size() >= 2 ? sample_stdev(samples, r.mean) : 0.0;
  r.stdev_over_mean = stdev_over_mean(samples);
  r.maxmin_ratio = maxmin_ratio(samples);
  return r;
}

}  // namespace normprimes
