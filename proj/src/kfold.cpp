#include "elp/kfold.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "elp/common.hpp"

namespace elp::eval {

std::vector<FoldSplit> kfold_split(const std::vector<int>& labels,
                                   std::size_t k, std::uint64_t seed,
                                   bool stratified) {
  if (k < 2) throw Error("kfold_split: k must be at least 2");
  if (labels.size() < k)
    throw Error("kfold_split: fewer examples than folds (" +
                std::to_string(labels.size()) + " < " + std::to_string(k) +
                ")");

  Rng base = make_rng(seed);
  std::vector<std::vector<std::size_t>> fold_test(k);

  if (stratified) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i)
      by_class[labels[i]].push_back(i);

    std::uint64_t class_tag = 1;
    for (auto& [label, members] : by_class) {
      if (members.size() < k)
        throw Error("kfold_split: class " + std::to_string(label) +
                    " has only " + std::to_string(members.size()) +
                    " examples for " + std::to_string(k) +
                    " folds; reduce --folds or merge rare classes");
      Rng rng = base.child(class_tag++);
      rng.shuffle(members);
      for (std::size_t i = 0; i < members.size(); ++i)
        fold_test[i % k].push_back(members[i]);
    }
  } else {
    std::vector<std::size_t> order(labels.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = base.child(1);
    rng.shuffle(order);
    for (std::size_t i = 0; i < order.size(); ++i)
      fold_test[i % k].push_back(order[i]);
  }

  std::vector<FoldSplit> out(k);
  std::vector<std::size_t> owner(labels.size());
  for (std::size_t f = 0; f < k; ++f) {
    std::sort(fold_test[f].begin(), fold_test[f].end());
    for (std::size_t i : fold_test[f]) owner[i] = f;
    out[f].test = std::move(fold_test[f]);
  }
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t f = 0; f < k; ++f)
      if (owner[i] != f) out[f].train.push_back(i);
  return out;
}

}  // namespace elp::eval
