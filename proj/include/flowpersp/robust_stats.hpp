// Numeric helpers shared by both estimators.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace flowpersp {

inline constexpr double kDefaultTrim = 0.15;

// Fraction removed from each tail before averaging; 0 <= trim < 0.5.
class TrimSpec {
 public:
  explicit TrimSpec(double trim = kDefaultTrim);
  double trim() const noexcept { return trim_; }

  // floor(trim * n): number of values dropped from each tail.
  std::size_t per_tail(std::size_t n) const noexcept;

 private:
  double trim_;
};

// Mean of the values left after dropping floor(trim * N) from each end of
// the sorted input. Throws InsufficientDataError if nothing remains.
double trimmed_mean(std::span<const double> values, TrimSpec spec = TrimSpec{});

struct LsqPair {
  double a = 0.0;
  double b = 0.0;
};

// argmin_x sum (a x - b)^2 = sum(ab) / sum(a^2). Throws DegenerateSystemError
// when sum(a^2) == 0.
double scalar_lsq(std::span<const LsqPair> pairs);

// Sum of squared residuals (a x - b)^2.
double lsq_objective(std::span<const LsqPair> pairs, double x);

// Derivative of evenly spaced samples. Central difference where both
// neighbours are present, one-sided where only one is, empty where neither
// is (or the sample itself is missing).
std::vector<std::optional<double>> central_diff(
    std::span<const std::optional<double>> samples, double spacing);

}  // namespace flowpersp
