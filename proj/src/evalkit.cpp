#include "bugloc/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bugloc::evalkit {

QueryResult rank_methods(const neural::Network& net, const Vector& report_vec,
                         const std::vector<Candidate>& candidates,
                         const std::set<std::string>& truth, ExecMode mode) {
  if (candidates.empty()) throw InvariantViolation("rank_methods needs candidates");

  std::vector<const Vector*> vecs;
  vecs.reserve(candidates.size());
  for (const auto& c : candidates) vecs.push_back(c.method_vec);
  const auto scores = neural::score_batch(net, report_vec, vecs, mode);

  QueryResult result;
  result.ranking.resize(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    result.ranking[i].method_id = candidates[i].method_id;
    result.ranking[i].score = scores[i];
    result.ranking[i].relevant = truth.count(candidates[i].method_id) > 0;
    if (result.ranking[i].relevant) ++result.num_relevant;
  }
  std::sort(result.ranking.begin(), result.ranking.end(),
            [](const RankedEntry& a, const RankedEntry& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.method_id < b.method_id;
            });
  return result;
}

double accuracy_at_k(const std::vector<QueryResult>& results, std::size_t k) {
  if (results.empty()) throw InvariantViolation("accuracy_at_k over no queries");
  std::size_t hits = 0;
  for (const auto& q : results) {
    const std::size_t limit = std::min(k, q.ranking.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (q.ranking[i].relevant) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

double average_precision(const QueryResult& result, MapVariant variant) {
  if (result.ranking.empty()) throw InvariantViolation("average_precision of empty ranking");

  if (variant == MapVariant::PaperLiteral) {
    // Mean of Precision@k over all k = 1..K, K the full ranking length.
    double sum = 0.0;
    std::size_t seen_relevant = 0;
    for (std::size_t k = 1; k <= result.ranking.size(); ++k) {
      if (result.ranking[k - 1].relevant) ++seen_relevant;
      sum += static_cast<double>(seen_relevant) / static_cast<double>(k);
    }
    return sum / static_cast<double>(result.ranking.size());
  }

  std::size_t relevant_total = 0;
  for (const auto& e : result.ranking) relevant_total += e.relevant ? 1 : 0;
  if (relevant_total == 0) return 0.0;

  double sum = 0.0;
  std::size_t seen_relevant = 0;
  for (std::size_t k = 1; k <= result.ranking.size(); ++k) {
    if (result.ranking[k - 1].relevant) {
      ++seen_relevant;
      sum += static_cast<double>(seen_relevant) / static_cast<double>(k);
    }
  }
  return sum / static_cast<double>(relevant_total);
}

double map_metric(const std::vector<QueryResult>& results, MapVariant variant) {
  if (results.empty()) throw InvariantViolation("map over no queries");
  double total = 0.0;
  for (const auto& q : results) total += average_precision(q, variant);
  return total / static_cast<double>(results.size());
}

std::size_t first_relevant_rank(const QueryResult& result) {
  for (std::size_t i = 0; i < result.ranking.size(); ++i)
    if (result.ranking[i].relevant) return i + 1;
  return 0;
}

double mrr(const std::vector<QueryResult>& results) {
  if (results.empty()) throw InvariantViolation("mrr over no queries");
  double total = 0.0;
  for (const auto& q : results) {
    const std::size_t rank = first_relevant_rank(q);
    if (rank > 0) total += 1.0 / static_cast<double>(rank);
  }
  return total / static_cast<double>(results.size());
}

MetricsReport compute_metrics(const std::vector<QueryResult>& results, MapVariant variant,
                              const std::vector<std::size_t>& ks) {
  MetricsReport report;
  report.map_value = map_metric(results, variant);
  report.mrr_value = mrr(results);
  for (std::size_t k : ks) report.accuracy_at.emplace_back(k, accuracy_at_k(results, k));
  for (const auto& q : results) {
    PerQuery pq;
    pq.bug_id = q.bug_id;
    pq.average_precision = average_precision(q, variant);
    pq.first_relevant_rank = first_relevant_rank(q);
    pq.reciprocal_rank =
        pq.first_relevant_rank > 0 ? 1.0 / static_cast<double>(pq.first_relevant_rank) : 0.0;
    report.per_query.push_back(std::move(pq));
  }
  return report;
}

Split chronological_split(const std::vector<imbalance::Instance>& instances, SplitMode mode,
                          Diagnostics* diag) {
  std::set<std::string> bug_ids;
  for (const auto& inst : instances) bug_ids.insert(inst.bug_id);
  if (bug_ids.size() < 10)
    throw TooFewBugs("chronological split needs at least 10 distinct bugs, got " +
                     std::to_string(bug_ids.size()));

  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (instances[a].report_time != instances[b].report_time)
      return instances[a].report_time < instances[b].report_time;
    return instances[a].bug_id < instances[b].bug_id;
  });

  const std::size_t n = instances.size();
  std::vector<std::size_t> cuts(11, 0);  // cuts[i] = first index of part i (cuts[10] = n)
  cuts[10] = n;

  if (mode == SplitMode::InstanceLevel) {
    warn_into(diag, "instance-level split: instances of one bug may leak across splits");
    for (std::size_t i = 1; i <= 9; ++i) cuts[i] = i * n / 10;
  } else {
    // Positions where a new bug starts in the sorted order.
    std::vector<std::size_t> boundaries{0};
    for (std::size_t i = 1; i < n; ++i)
      if (instances[order[i]].bug_id != instances[order[i - 1]].bug_id) boundaries.push_back(i);
    boundaries.push_back(n);

    for (std::size_t i = 1; i <= 9; ++i) {
      const double ideal = static_cast<double>(i) * static_cast<double>(n) / 10.0;
      std::size_t best = boundaries.front();
      double best_dist = std::abs(static_cast<double>(best) - ideal);
      for (std::size_t b : boundaries) {
        const double d = std::abs(static_cast<double>(b) - ideal);
        if (d < best_dist) {
          best = b;
          best_dist = d;
        }
      }
      cuts[i] = best;
    }
    // Nearest-boundary picks can collide when one bug spans several deciles;
    // push later cuts forward to keep the parts disjoint.
    for (std::size_t i = 1; i <= 9; ++i) {
      if (cuts[i] <= cuts[i - 1]) {
        auto it = std::upper_bound(boundaries.begin(), boundaries.end(), cuts[i - 1]);
        cuts[i] = it == boundaries.end() ? n : *it;
      }
    }
    // If the tail ran out of boundaries, fall back from the end.
    for (std::size_t i = 9; i >= 1; --i)
      if (cuts[i] >= cuts[i + 1] && cuts[i] > 0) {
        auto it = std::lower_bound(boundaries.begin(), boundaries.end(), cuts[i + 1]);
        cuts[i] = it == boundaries.begin() ? 0 : *(--it);
      }
  }

  Split split;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& inst = instances[order[i]];
    if (i < cuts[8]) {
      split.train.push_back(inst);
    } else if (i < cuts[9]) {
      split.valid.push_back(inst);
    } else {
      split.test.push_back(inst);
    }
  }
  return split;
}

}  // namespace bugloc::evalkit
