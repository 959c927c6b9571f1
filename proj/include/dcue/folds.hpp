#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace dcue {

/// K disjoint index sets covering 0..n-1; sizes differ by at most one.
struct FoldPartition {
  std::vector<std::vector<Eigen::Index>> folds;  // each sorted ascending

  int k() const { return static_cast<int>(folds.size()); }
  Eigen::Index n() const;

  /// fold_of()[i] is the fold holding observation i.
  std::vector<int> fold_of() const;

  /// All indices outside fold `k`, sorted ascending.
  std::vector<Eigen::Index> complement(int k) const;

  /// Throws ConfigError unless the folds form a partition of 0..n-1 with K >= 2.
  void validate(Eigen::Index n) const;
};

/// Random K-fold partition, deterministic in `seed`.
FoldPartition make_folds(Eigen::Index n, int k, std::uint64_t seed);

/// Unshuffled partition (i mod K), for tests and reproducible toy runs.
FoldPartition make_round_robin_folds(Eigen::Index n, int k);

}  // namespace dcue
