#include "irgs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace irgs {

namespace {

double pairs_of(long long n) { return 0.5 * static_cast<double>(n) * static_cast<double>(n - 1); }

double entropy(const std::vector<long long>& sums, long long total) {
  double h = 0.0;
  for (long long s : sums) {
    if (s > 0) {
      const double p = static_cast<double>(s) / static_cast<double>(total);
      h -= p * std::log(p);
    }
  }
  return h;
}

double mutual_information(const ContingencyTable& t) {
  const double n = static_cast<double>(t.total);
  double mi = 0.0;
  for (std::size_t u = 0; u < t.counts.size(); ++u) {
    for (std::size_t v = 0; v < t.counts[u].size(); ++v) {
      const long long c = t.counts[u][v];
      if (c > 0) {
        mi += (c / n) * std::log(n * static_cast<double>(c) /
                                 (static_cast<double>(t.pred_sums[u]) *
                                  static_cast<double>(t.true_sums[v])));
      }
    }
  }
  return mi;
}

// Exact permutation-model E[MI] (hypergeometric over each cell).
double expected_mutual_information(const ContingencyTable& t) {
  const long long total = t.total;
  const double n = static_cast<double>(total);
  std::vector<double> log_fact(static_cast<std::size_t>(total) + 1, 0.0);
  for (std::size_t i = 2; i < log_fact.size(); ++i) {
    log_fact[i] = log_fact[i - 1] + std::log(static_cast<double>(i));
  }
  auto lf = [&](long long k) { return log_fact[static_cast<std::size_t>(k)]; };

  double emi = 0.0;
  for (long long a : t.pred_sums) {
    for (long long b : t.true_sums) {
      const long long lo = std::max<long long>(1, a + b - total);
      const long long hi = std::min(a, b);
      for (long long nij = lo; nij <= hi; ++nij) {
        const double term = (static_cast<double>(nij) / n) *
                            std::log(n * static_cast<double>(nij) /
                                     (static_cast<double>(a) * static_cast<double>(b)));
        const double log_prob = lf(a) + lf(b) + lf(total - a) + lf(total - b) - lf(total) -
                                lf(nij) - lf(a - nij) - lf(b - nij) - lf(total - a - b + nij);
        emi += term * std::exp(log_prob);
      }
    }
  }
  return emi;
}

}  // namespace

ContingencyTable ContingencyTable::build(const LabelPlane& pred, const LabelPlane& truth,
                                         bool foreground_only) {
  if (pred.height != truth.height || pred.width != truth.width) {
    throw std::invalid_argument("label planes must share dimensions");
  }
  std::map<int, std::size_t> pred_index;
  std::map<int, std::size_t> true_index;
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  cells.reserve(pred.labels.size());
  for (std::size_t p = 0; p < pred.labels.size(); ++p) {
    if (foreground_only && truth.labels[p] == 0) continue;
    const auto [pu, added_u] = pred_index.try_emplace(pred.labels[p], pred_index.size());
    const auto [tv, added_v] = true_index.try_emplace(truth.labels[p], true_index.size());
    cells.emplace_back(pu->second, tv->second);
  }
  if (cells.empty()) {
    throw std::domain_error("no pixels to score after background exclusion");
  }
  ContingencyTable t;
  t.counts.assign(pred_index.size(), std::vector<long long>(true_index.size(), 0));
  t.pred_sums.assign(pred_index.size(), 0);
  t.true_sums.assign(true_index.size(), 0);
  for (const auto& [u, v] : cells) {
    ++t.counts[u][v];
    ++t.pred_sums[u];
    ++t.true_sums[v];
    ++t.total;
  }
  return t;
}

double ari(const LabelPlane& pred, const LabelPlane& truth, bool foreground_only) {
  const ContingencyTable t = ContingencyTable::build(pred, truth, foreground_only);

  double index = 0.0;
  for (const auto& row : t.counts) {
    for (long long c : row) index += pairs_of(c);
  }
  double sum_pred = 0.0;
  for (long long a : t.pred_sums) sum_pred += pairs_of(a);
  double sum_true = 0.0;
  for (long long b : t.true_sums) sum_true += pairs_of(b);
  const double total_pairs = pairs_of(t.total);

  // The denominator vanishes only when both labelings are single-cluster or
  // both are all-singletons; both count as perfect agreement.
  if ((sum_pred == 0.0 && sum_true == 0.0) ||
      (sum_pred == total_pairs && sum_true == total_pairs)) {
    return 1.0;
  }
  const double expected = sum_pred * sum_true / total_pairs;
  const double max_index = 0.5 * (sum_pred + sum_true);
  return (index - expected) / (max_index - expected);
}

double ami(const LabelPlane& pred, const LabelPlane& truth, bool foreground_only) {
  const ContingencyTable t = ContingencyTable::build(pred, truth, foreground_only);
  if (t.pred_sums.size() == 1 && t.true_sums.size() == 1) {
    return 1.0;
  }
  const double mi = mutual_information(t);
  const double emi = expected_mutual_information(t);
  const double normalizer = 0.5 * (entropy(t.pred_sums, t.total) + entropy(t.true_sums, t.total));
  double denom = normalizer - emi;
  // Match the conventional guard against a vanishing denominator.
  const double eps = std::numeric_limits<double>::epsilon();
  denom = denom < 0.0 ? std::min(denom, -eps) : std::max(denom, eps);
  return (mi - emi) / denom;
}

}  // namespace irgs
