#pragma once

#include <vector>

#include "irgs/image.hpp"

namespace irgs {

// Co-occurrence counts between predicted and true labels over the scored
// pixels. foreground_only drops pixels whose TRUE label is 0.
struct ContingencyTable {
  std::vector<std::vector<long long>> counts;  // [pred cluster][true cluster]
  std::vector<long long> pred_sums;
  std::vector<long long> true_sums;
  long long total = 0;

  // Throws std::domain_error when no pixel survives the exclusion.
  static ContingencyTable build(const LabelPlane& pred, const LabelPlane& truth,
                                bool foreground_only);
};

// Permutation-model adjusted Rand index. Degenerate denominators (both
// labelings single-cluster, or both all-singletons) evaluate to 1.
double ari(const LabelPlane& pred, const LabelPlane& truth, bool foreground_only = true);

// Adjusted mutual information with the exact hypergeometric expected-MI and
// arithmetic-mean normalization.
double ami(const LabelPlane& pred, const LabelPlane& truth, bool foreground_only = false);

}  // namespace irgs
