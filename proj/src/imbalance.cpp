#include "bugloc/imbalance.hpp"

#include <algorithm>

#include "bugloc/rng.hpp"

namespace bugloc::imbalance {

std::vector<std::size_t> resample_indices(const std::vector<int>& labels,
                                          const ResampleStrategy& strategy) {
  std::vector<std::size_t> identity(labels.size());
  for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = i;
  if (strategy.kind == ResampleKind::Original) return identity;

  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i)
    (labels[i] == 1 ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty())
    throw SingleClass("resampling requires both classes to be present (" +
                      std::to_string(pos.size()) + " positive, " +
                      std::to_string(neg.size()) + " negative)");

  const auto& minority = pos.size() <= neg.size() ? pos : neg;
  const auto& majority = pos.size() <= neg.size() ? neg : pos;
  Rng rng(strategy.rng_seed);

  if (strategy.kind == ResampleKind::Ros) {
    // everything, plus seeded duplicates of the minority appended
    for (std::size_t need = majority.size() - minority.size(); need > 0; --need)
      identity.push_back(minority[rng.below(minority.size())]);
    return identity;
  }

  // Rus: minority intact, seeded subset of the majority, original order.
  const auto chosen = rng.sample_without_replacement(majority.size(), minority.size());
  std::vector<bool> keep(labels.size(), false);
  for (std::size_t i : minority) keep[i] = true;
  for (std::size_t c : chosen) keep[majority[c]] = true;

  std::vector<std::size_t> out;
  out.reserve(2 * minority.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (keep[i]) out.push_back(i);
  return out;
}

std::vector<Instance> resample(const std::vector<Instance>& instances,
                               const ResampleStrategy& strategy) {
  if (strategy.kind == ResampleKind::Original) return instances;
  std::vector<int> labels(instances.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = instances[i].label;
  const auto indices = resample_indices(labels, strategy);
  std::vector<Instance> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(instances[i]);
  return out;
}

std::pair<double, double> class_weights_auto(const std::vector<Instance>& instances) {
  std::size_t pos = 0, neg = 0;
  for (const auto& inst : instances) (inst.label == 1 ? pos : neg) += 1;
  if (pos == 0 || neg == 0)
    throw SingleClass("class weights require both classes to be present");
  const double total = static_cast<double>(pos + neg);
  return {total / (2.0 * static_cast<double>(neg)), total / (2.0 * static_cast<double>(pos))};
}

}  // namespace bugloc::imbalance
