#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <map>

#include "bugloc/imbalance.hpp"
#include "bugloc/rng.hpp"

using namespace bugloc;
using namespace bugloc::imbalance;

namespace {

std::vector<Instance> make_instances(std::size_t positives, std::size_t negatives) {
  std::vector<Instance> out;
  for (std::size_t i = 0; i < positives + negatives; ++i) {
    Instance inst;
    inst.label = i < positives ? 1 : 0;
    inst.bug_id = "b" + std::to_string(i / 4);
    inst.method_id = "m" + std::to_string(i);
    inst.report_time = static_cast<std::int64_t>(i);
    inst.report_vec = {static_cast<double>(i)};
    inst.method_vec = {static_cast<double>(i) * 2};
    out.push_back(std::move(inst));
  }
  return out;
}

std::pair<std::size_t, std::size_t> class_counts(const std::vector<Instance>& instances) {
  std::size_t pos = 0, neg = 0;
  for (const auto& inst : instances) (inst.label == 1 ? pos : neg) += 1;
  return {pos, neg};
}

std::multiset<std::string> id_multiset(const std::vector<Instance>& instances) {
  std::multiset<std::string> out;
  for (const auto& inst : instances) out.insert(inst.method_id);
  return out;
}

}  // namespace

TEST_SUITE("imbalance") {

TEST_CASE("ros balances by duplicating the minority") {
  const auto input = make_instances(2, 6);
  const auto out = resample(input, {ResampleKind::Ros, 42});
  const auto [pos, neg] = class_counts(out);
  CHECK(pos == 6);
  CHECK(neg == 6);
  // first 8 records are the input, untouched and in order
  for (std::size_t i = 0; i < input.size(); ++i) CHECK(out[i].method_id == input[i].method_id);
  // the 4 added records are copies of the two positives
  for (std::size_t i = input.size(); i < out.size(); ++i) {
    CHECK(out[i].label == 1);
    CHECK((out[i].method_id == "m0" || out[i].method_id == "m1"));
  }
}

TEST_CASE("rus balances by subsampling the majority") {
  const auto input = make_instances(2, 6);
  const auto out = resample(input, {ResampleKind::Rus, 42});
  const auto [pos, neg] = class_counts(out);
  CHECK(pos == 2);
  CHECK(neg == 2);
  // output is a subsequence of the input
  std::size_t cursor = 0;
  for (const auto& inst : out) {
    while (cursor < input.size() && input[cursor].method_id != inst.method_id) ++cursor;
    REQUIRE(cursor < input.size());
    ++cursor;
  }
}

TEST_CASE("already balanced input is unchanged as a multiset under ros") {
  const auto input = make_instances(3, 3);
  const auto out = resample(input, {ResampleKind::Ros, 9});
  CHECK(id_multiset(out) == id_multiset(input));
}

TEST_CASE("original passes through") {
  const auto input = make_instances(1, 5);
  const auto out = resample(input, {ResampleKind::Original, 0});
  REQUIRE(out.size() == input.size());
  for (std::size_t i = 0; i < input.size(); ++i) CHECK(out[i].method_id == input[i].method_id);
}

TEST_CASE("single class errors for ros and rus") {
  const auto all_neg = make_instances(0, 4);
  CHECK_THROWS_AS(resample(all_neg, {ResampleKind::Ros, 1}), SingleClass);
  CHECK_THROWS_AS(resample(all_neg, {ResampleKind::Rus, 1}), SingleClass);
  CHECK_NOTHROW(resample(all_neg, {ResampleKind::Original, 1}));
}

TEST_CASE("resample properties over 500 random datasets") {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(314);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t pos = 1 + rng.below(30);
    const std::size_t neg = 1 + rng.below(120);
    const auto input = make_instances(pos, neg);
    const std::uint64_t seed = rng.next_u64();

    for (const auto kind : {ResampleKind::Ros, ResampleKind::Rus}) {
      const auto out = resample(input, {kind, seed});
      const auto [out_pos, out_neg] = class_counts(out);
      CHECK(out_pos == out_neg);

      const auto in_ids = id_multiset(input);
      const auto out_ids = id_multiset(out);
      if (kind == ResampleKind::Ros) {
        CHECK(out.size() == 2 * std::max(pos, neg));
        // input is a sub-multiset of the output
        for (const auto& id : in_ids) CHECK(out_ids.count(id) >= in_ids.count(id));
      } else {
        CHECK(out.size() == 2 * std::min(pos, neg));
        for (const auto& id : out_ids) CHECK(out_ids.count(id) <= in_ids.count(id));
      }

      // determinism: same seed, same sequence
      const auto again = resample(input, {kind, seed});
      REQUIRE(again.size() == out.size());
      for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(again[i].method_id == out[i].method_id);

      // no instance field was altered
      for (const auto& inst : out) {
        const auto orig = std::find_if(input.begin(), input.end(), [&](const Instance& x) {
          return x.method_id == inst.method_id;
        });
        REQUIRE(orig != input.end());
        CHECK(inst.label == orig->label);
        CHECK(inst.bug_id == orig->bug_id);
        CHECK(inst.report_time == orig->report_time);
        CHECK(inst.report_vec == orig->report_vec);
        CHECK(inst.method_vec == orig->method_vec);
      }
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(secs < 5.0);
}

TEST_CASE("class_weights_auto follows N/(2*Nc)") {
  const auto w = class_weights_auto(make_instances(2, 6));
  CHECK(w.first == doctest::Approx(8.0 / 12.0).epsilon(1e-12));   // w_neg = 0.6667
  CHECK(w.second == doctest::Approx(2.0).epsilon(1e-12));         // w_pos

  const auto balanced = class_weights_auto(make_instances(5, 5));
  CHECK(balanced.first == 1.0);
  CHECK(balanced.second == 1.0);

  CHECK_THROWS_AS(class_weights_auto(make_instances(0, 4)), SingleClass);
}

}  // TEST_SUITE
