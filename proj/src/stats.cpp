#include "casebench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace casebench {

Confusion confusion(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) throw std::invalid_argument("confusion: length mismatch");
  Confusion c;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i], p = y_pred[i];
    if ((t != 0 && t != 1) || (p != 0 && p != 1)) throw std::invalid_argument("confusion: labels must be 0 or 1");
    if (t == 1) {
      (p == 1 ? c.tp : c.fn) += 1;
    } else {
      (p == 1 ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

namespace {

std::optional<double> percent(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricRow metrics(const Confusion& c) {
  MetricRow m;
  m.sens = percent(c.tp, c.tp + c.fn);
  m.spec = percent(c.tn, c.tn + c.fp);
  m.ppv = percent(c.tp, c.tp + c.fp);
  m.npv = percent(c.tn, c.tn + c.fn);
  m.acc = percent(c.tp + c.tn, c.total());
  if (m.sens && m.ppv && (*m.sens + *m.ppv) > 0) {
    m.f1 = 2.0 * *m.sens * *m.ppv / (*m.sens + *m.ppv);
  } else if (m.sens && m.ppv) {
    m.f1 = 0.0;
  }
  m.n_pos = c.tp + c.fp;
  m.diff_pos = m.n_pos - (c.tp + c.fn);
  return m;
}

std::string format_rate(const std::optional<double>& rate) {
  if (!rate) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *rate);
  return buf;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

namespace {

struct Ranked {
  std::vector<double> ranks;  // midranks of |d|
  std::vector<bool> positive;
};

Ranked rank_nonzero(std::span<const double> d) {
  std::vector<double> nz;
  for (double v : d) {
    if (!std::isfinite(v)) throw std::invalid_argument("wilcoxon: non-finite difference");
    if (v != 0.0) nz.push_back(v);
  }
  std::vector<std::size_t> order(nz.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(nz[a]) < std::abs(nz[b]); });
  Ranked r;
  r.ranks.assign(nz.size(), 0.0);
  r.positive.assign(nz.size(), false);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::abs(nz[order[j + 1]]) == std::abs(nz[order[i]])) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r.ranks[order[k]] = mid;
    i = j + 1;
  }
  for (std::size_t k = 0; k < nz.size(); ++k) r.positive[k] = nz[k] > 0;
  return r;
}

double w_plus(const Ranked& r) {
  double w = 0;
  for (std::size_t k = 0; k < r.ranks.size(); ++k)
    if (r.positive[k]) w += r.ranks[k];
  return w;
}

WilcoxonResult exact_from_ranks(const Ranked& r) {
  WilcoxonResult out;
  out.n_used = r.ranks.size();
  out.exact = true;
  out.statistic = w_plus(r);
  // Midranks are multiples of 1/2, so doubled ranks are integers and the
  // null distribution of 2 W+ over all 2^n sign patterns is a subset-sum count.
  std::vector<long> doubled;
  long total = 0;
  for (double rank : r.ranks) {
    doubled.push_back(std::lround(2.0 * rank));
    total += doubled.back();
  }
  std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
  ways[0] = 1.0;
  long reach = 0;
  for (long v : doubled) {
    for (long s = reach; s >= 0; --s) ways[static_cast<std::size_t>(s + v)] += ways[static_cast<std::size_t>(s)];
    reach += v;
  }
  const double all = std::ldexp(1.0, static_cast<int>(doubled.size()));
  const long observed = std::lround(2.0 * out.statistic);
  double lower = 0, upper = 0;
  for (long s = 0; s <= total; ++s) {
    if (s <= observed) lower += ways[static_cast<std::size_t>(s)];
    if (s >= observed) upper += ways[static_cast<std::size_t>(s)];
  }
  out.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
  return out;
}

WilcoxonResult normal_from_ranks(const Ranked& r) {
  WilcoxonResult out;
  const auto n = static_cast<double>(r.ranks.size());
  out.n_used = r.ranks.size();
  out.statistic = w_plus(r);
  const double mean = n * (n + 1.0) / 4.0;
  double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
  std::vector<double> sorted = r.ranks;
  std::sort(sorted.begin(), sorted.end());
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    var -= (t * t * t - t) / 48.0;
    i = j + 1;
  }
  if (var <= 0) {
    out.p_value = 1.0;
    return out;
  }
  const double z = std::max(0.0, std::abs(out.statistic - mean) - 0.5) / std::sqrt(var);
  out.p_value = std::min(1.0, 2.0 * (1.0 - normal_cdf(z)));
  return out;
}

WilcoxonResult degenerate_result() {
  WilcoxonResult out;
  out.degenerate = true;
  out.p_value = 1.0;
  return out;
}

}  // namespace

WilcoxonResult wilcoxon_exact(std::span<const double> differences) {
  const Ranked r = rank_nonzero(differences);
  if (r.ranks.empty()) return degenerate_result();
  return exact_from_ranks(r);
}

WilcoxonResult wilcoxon_normal(std::span<const double> differences) {
  const Ranked r = rank_nonzero(differences);
  if (r.ranks.empty()) return degenerate_result();
  return normal_from_ranks(r);
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, double mu) {
  std::vector<double> d(x.begin(), x.end());
  for (double& v : d) v -= mu;
  const Ranked r = rank_nonzero(d);
  if (r.ranks.empty()) return degenerate_result();
  return r.ranks.size() <= kWilcoxonExactLimit ? exact_from_ranks(r) : normal_from_ranks(r);
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("wilcoxon: paired samples differ in length");
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
  return wilcoxon_signed_rank(d, 0.0);
}

std::vector<double> benjamini_yekutieli(std::span<const double> p_values) {
  const std::size_t m = p_values.size();
  std::vector<double> adjusted(m);
  if (m == 0) return adjusted;
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("benjamini_yekutieli: p-values must lie in [0, 1]");
  }
  double harmonic = 0;
  for (std::size_t k = 1; k <= m; ++k) harmonic += 1.0 / static_cast<double>(k);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  double running = 1.0;
  for (std::size_t pos = m; pos-- > 0;) {
    const double rank = static_cast<double>(pos + 1);
    const double candidate = static_cast<double>(m) * harmonic * p_values[order[pos]] / rank;
    running = std::min(running, candidate);
    adjusted[order[pos]] = std::min(1.0, running);
  }
  return adjusted;
}

}  // namespace casebench
