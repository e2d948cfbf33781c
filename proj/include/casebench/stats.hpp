#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace casebench {

struct Confusion {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
};

/// Rates are percentages; a rate whose denominator is zero is absent.
struct MetricRow {
  std::optional<double> sens, spec, ppv, npv, f1, acc;
  std::int64_t n_pos = 0;     // positive calls, TP + FP
  std::int64_t diff_pos = 0;  // n_pos - actual positives
};

Confusion confusion(std::span<const int> y_true, std::span<const int> y_pred);
MetricRow metrics(const Confusion& c);

/// "87.62", or "NA" for an absent rate.
std::string format_rate(const std::optional<double>& rate);

struct WilcoxonResult {
  double statistic = 0;  // W+: sum of ranks of positive differences
  double p_value = 1;    // two-sided
  std::size_t n_used = 0;
  bool exact = false;
  bool degenerate = false;  // every difference was zero
};

/// Paired signed-rank test on x - y. Zero differences are dropped, tied
/// |d| get midranks. Exact null distribution for n <= 25, normal
/// approximation with tie-corrected variance and continuity correction above.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y);
/// One-sample test of x against location mu.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, double mu = 0.0);

inline constexpr std::size_t kWilcoxonExactLimit = 25;

/// Signed-rank test on already-formed differences with the exact/normal
/// path forced; used to compare the two paths.
WilcoxonResult wilcoxon_exact(std::span<const double> differences);
WilcoxonResult wilcoxon_normal(std::span<const double> differences);

/// Benjamini-Yekutieli step-up adjustment, returned in input order.
std::vector<double> benjamini_yekutieli(std::span<const double> p_values);

double normal_cdf(double z);

}  // namespace casebench
