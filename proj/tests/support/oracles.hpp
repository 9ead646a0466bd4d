#pragma once

// Reference computations that tests check the library against. None of
// these call into the code under test.

#include <algorithm>
#include <array>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace nprobe::testing {

/// Best training accuracy of any 1-D threshold classifier (either polarity),
/// found by trying every midpoint between sorted values.
inline double best_threshold_accuracy(const std::vector<double>& x, const std::vector<int>& y) {
  std::vector<double> cuts{-std::numeric_limits<double>::infinity()};
  auto sorted = x;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
    cuts.push_back(0.5 * (sorted[i] + sorted[i + 1]));
  double best = 0.0;
  for (double t : cuts) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < x.size(); ++i) pos += (x[i] > t) == (y[i] == 1);
    const double acc = double(pos) / double(x.size());
    best = std::max({best, acc, 1.0 - acc});
  }
  return best;
}

struct Separator {
  double angle = 0.0;   // normal direction (cos, sin)
  double offset = 0.0;  // boundary: n . x = offset
  double margin = -1.0;
  int sign_of(double x0, double x1) const {
    return std::cos(angle) * x0 + std::sin(angle) * x1 - offset > 0 ? 1 : 0;
  }
};

/// Exhaustive grid over boundary normals and offsets; keeps the separator
/// with zero training errors and the widest margin.
inline Separator grid_linear_separator(const std::vector<std::array<double, 2>>& pts,
                                       const std::vector<int>& y, int angle_steps = 720,
                                       int offset_steps = 801, double offset_range = 4.0) {
  Separator best;
  for (int a = 0; a < angle_steps; ++a) {
    const double th = 2.0 * M_PI * a / angle_steps;
    const double c = std::cos(th), s = std::sin(th);
    for (int o = 0; o < offset_steps; ++o) {
      const double b = -offset_range + 2.0 * offset_range * o / (offset_steps - 1);
      double margin = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const double d = c * pts[i][0] + s * pts[i][1] - b;
        const double signed_d = y[i] == 1 ? d : -d;
        margin = std::min(margin, signed_d);
        if (margin <= best.margin) break;
      }
      if (margin > best.margin) best = {th, b, margin};
    }
  }
  return best;
}

/// Upper-tail p-value of Pearson's chi-square goodness-of-fit statistic.
inline double chi_square_p_value(const std::vector<double>& observed,
                                 const std::vector<double>& expected) {
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double d = observed[i] - expected[i];
    stat += d * d / expected[i];
  }
  boost::math::chi_squared dist(static_cast<double>(observed.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

inline double population_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

inline double population_std(const std::vector<double>& v) {
  const double m = population_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size()));
}

}  // namespace nprobe::testing
