#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bugloc/errors.hpp"
#include "bugloc/linalg.hpp"

namespace bugloc::imbalance {

// One (bug report, candidate method) pair.
struct Instance {
  Vector report_vec;
  Vector method_vec;
  int label = 0;  // 1: method is buggy for this report
  std::string bug_id;
  std::string method_id;
  std::int64_t report_time = 0;  // epoch seconds
};

enum class ResampleKind { Original, Ros, Rus };

struct ResampleStrategy {
  ResampleKind kind = ResampleKind::Original;
  std::uint64_t rng_seed = 0;
};

// Ros duplicates seeded minority draws (appended, original order intact)
// until the classes are exactly equal; Rus keeps a seeded subset of the
// majority, preserving relative order.
std::vector<Instance> resample(const std::vector<Instance>& instances,
                               const ResampleStrategy& strategy);

// The index form of the same selection, for callers that keep side data
// aligned with the instances.
std::vector<std::size_t> resample_indices(const std::vector<int>& labels,
                                          const ResampleStrategy& strategy);

// w_c = N_total / (2 * N_c); throws SingleClass when a class is absent.
std::pair<double, double> class_weights_auto(const std::vector<Instance>& instances);

}  // namespace bugloc::imbalance
