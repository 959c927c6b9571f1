#include "dcue/folds.hpp"

#include "dcue/error.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

namespace dcue {

Eigen::Index FoldPartition::n() const {
  Eigen::Index total = 0;
  for (const auto& f : folds) total += static_cast<Eigen::Index>(f.size());
  return total;
}

std::vector<int> FoldPartition::fold_of() const {
  std::vector<int> out(static_cast<std::size_t>(n()), -1);
  for (int k = 0; k < this->k(); ++k) {
    for (auto i : folds[static_cast<std::size_t>(k)]) out[static_cast<std::size_t>(i)] = k;
  }
  return out;
}

std::vector<Eigen::Index> FoldPartition::complement(int k) const {
  std::vector<Eigen::Index> out;
  out.reserve(static_cast<std::size_t>(n()));
  for (int j = 0; j < this->k(); ++j) {
    if (j == k) continue;
    const auto& f = folds[static_cast<std::size_t>(j)];
    out.insert(out.end(), f.begin(), f.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void FoldPartition::validate(Eigen::Index expected_n) const {
  if (k() < 2) throw ConfigError("fold partition needs K >= 2");
  std::vector<char> seen(static_cast<std::size_t>(expected_n), 0);
  Eigen::Index count = 0;
  std::size_t smallest = folds.front().size(), largest = smallest;
  for (const auto& f : folds) {
    smallest = std::min(smallest, f.size());
    largest = std::max(largest, f.size());
    for (auto i : f) {
      if (i < 0 || i >= expected_n) throw ConfigError("fold index out of range");
      if (seen[static_cast<std::size_t>(i)]) throw ConfigError("folds are not disjoint");
      seen[static_cast<std::size_t>(i)] = 1;
      ++count;
    }
  }
  if (count != expected_n) throw ConfigError("folds do not cover all observations");
  if (largest - smallest > 1) throw ConfigError("fold sizes differ by more than one");
}

FoldPartition make_folds(Eigen::Index n, int k, std::uint64_t seed) {
  if (k < 2 || k > n) {
    throw ConfigError("make_folds: need 2 <= K <= n (K=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  }
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  FoldPartition out;
  out.folds.resize(static_cast<std::size_t>(k));
  for (std::size_t pos = 0; pos < perm.size(); ++pos) {
    out.folds[pos % static_cast<std::size_t>(k)].push_back(perm[pos]);
  }
  for (auto& f : out.folds) std::sort(f.begin(), f.end());
  return out;
}

FoldPartition make_round_robin_folds(Eigen::Index n, int k) {
  if (k < 2 || k > n) throw ConfigError("make_round_robin_folds: need 2 <= K <= n");
  FoldPartition out;
  out.folds.resize(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < n; ++i) out.folds[static_cast<std::size_t>(i % k)].push_back(i);
  return out;
}

}  // namespace dcue
