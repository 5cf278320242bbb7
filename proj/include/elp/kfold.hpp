#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace elp::eval {

struct FoldSplit {
  std::vector<std::size_t> train;  // sorted, disjoint from test
  std::vector<std::size_t> test;   // sorted
};

// Partitions indices 0..labels.size()-1 into k folds. Stratified mode shuffles
// each class with a child rng and deals its members round-robin across folds,
// so per-fold class proportions track the full set. Every index lands in
// exactly one test fold; train is the complement.
std::vector<FoldSplit> kfold_split(const std::vector<int>& labels,
                                   std::size_t k, std::uint64_t seed,
                                   bool stratified = true);

}  // namespace elp::eval
