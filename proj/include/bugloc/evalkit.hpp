#pragma once

#include <set>
#include <string>
#include <vector>

#include "bugloc/errors.hpp"
#include "bugloc/imbalance.hpp"
#include "bugloc/linalg.hpp"
#include "bugloc/neural.hpp"

namespace bugloc::evalkit {

struct RankedEntry {
  std::string method_id;
  double score = 0.0;
  bool relevant = false;
};

struct QueryResult {
  std::string bug_id;
  std::vector<RankedEntry> ranking;  // scores nonincreasing, ties by method_id
  std::size_t num_relevant = 0;
};

struct PerQuery {
  std::string bug_id;
  double average_precision = 0.0;
  double reciprocal_rank = 0.0;
  std::size_t first_relevant_rank = 0;  // 0 when nothing relevant was retrieved
};

struct MetricsReport {
  double map_value = 0.0;
  double mrr_value = 0.0;
  std::vector<std::pair<std::size_t, double>> accuracy_at;  // (K, value), K ascending
  std::vector<PerQuery> per_query;
};

enum class MapVariant {
  Standard,      // sum of precisions at relevant ranks / num_relevant
  PaperLiteral,  // mean of Precision@k over every k up to the ranking length
};

struct Candidate {
  std::string method_id;
  const Vector* method_vec = nullptr;
};

QueryResult rank_methods(const neural::Network& net, const Vector& report_vec,
                         const std::vector<Candidate>& candidates,
                         const std::set<std::string>& truth,
                         ExecMode mode = ExecMode::Parallel);

double accuracy_at_k(const std::vector<QueryResult>& results, std::size_t k);

double average_precision(const QueryResult& result, MapVariant variant);

double map_metric(const std::vector<QueryResult>& results, MapVariant variant);

double mrr(const std::vector<QueryResult>& results);

std::size_t first_relevant_rank(const QueryResult& result);  // 0 if none

MetricsReport compute_metrics(const std::vector<QueryResult>& results, MapVariant variant,
                              const std::vector<std::size_t>& ks = {1, 5, 10});

enum class SplitMode {
  BugDisjoint,    // decile cuts shifted to bug boundaries
  InstanceLevel,  // plain instance deciles; leaks bugs across splits
};

struct Split {
  std::vector<imbalance::Instance> train;  // deciles 1-8
  std::vector<imbalance::Instance> valid;  // decile 9
  std::vector<imbalance::Instance> test;   // decile 10
};

// Sorts by (report_time, bug_id) and cuts at instance deciles. Requires at
// least 10 distinct bugs.
Split chronological_split(const std::vector<imbalance::Instance>& instances,
                          SplitMode mode = SplitMode::BugDisjoint,
                          Diagnostics* diag = nullptr);

}  // namespace bugloc::evalkit
