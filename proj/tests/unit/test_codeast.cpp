#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "bugloc/codeast.hpp"
#include "bugloc/rng.hpp"
#include "support/generators.hpp"

using namespace bugloc;
using namespace bugloc::codeast;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = std::string(TEST_DATA_DIR) + "/tmp_" + name;
  std::ofstream out(path);
  out << content;
  return path;
}

// Brute-force oracle: enumerates every leaf pair through root-to-leaf paths
// and applies the limits directly. Independent of the production extractor.
struct OracleContext {
  std::string start, path, end;
  std::size_t length, width;
  bool operator<(const OracleContext& o) const {
    return std::tie(start, path, end, length, width) <
           std::tie(o.start, o.path, o.end, o.length, o.width);
  }
};

void oracle_chains(const AstNode& node, std::vector<const AstNode*>& stack,
                   std::vector<std::pair<const AstNode*, std::vector<const AstNode*>>>& out) {
  if (node.is_leaf) {
    out.emplace_back(&node, stack);
    return;
  }
  stack.push_back(&node);
  for (const auto& child : node.children) oracle_chains(child, stack, out);
  stack.pop_back();
}

std::multiset<OracleContext> oracle_extract(const AstNode& ast, std::size_t max_len,
                                            std::size_t max_width) {
  std::vector<const AstNode*> stack;
  std::vector<std::pair<const AstNode*, std::vector<const AstNode*>>> leaves;
  oracle_chains(ast, stack, leaves);

  std::multiset<OracleContext> out;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    for (std::size_t j = i + 1; j < leaves.size(); ++j) {
      if (j - i > max_width) continue;
      const auto& ci = leaves[i].second;
      const auto& cj = leaves[j].second;
      std::size_t common = 0;
      while (common < ci.size() && common < cj.size() && ci[common] == cj[common]) ++common;
      const std::size_t interior = (ci.size() - common + 1) + (cj.size() - common);
      if (interior > max_len) continue;
      std::string path;
      for (std::size_t u = ci.size(); u-- > common - 1;) {
        if (!path.empty()) path += "↑";
        path += ci[u]->kind;
      }
      for (std::size_t d = common; d < cj.size(); ++d) {
        path += "↓";
        path += cj[d]->kind;
      }
      out.insert(OracleContext{leaves[i].first->value, path, leaves[j].first->value, interior,
                               j - i});
    }
  }
  return out;
}

std::multiset<OracleContext> to_oracle_set(const std::vector<PathContext>& contexts) {
  std::multiset<OracleContext> out;
  for (const auto& c : contexts) out.insert(OracleContext{c.start_token, c.path, c.end_token, 0, 0});
  return out;
}

std::multiset<OracleContext> strip_meta(const std::multiset<OracleContext>& in) {
  std::multiset<OracleContext> out;
  for (auto c : in) {
    c.length = 0;
    c.width = 0;
    out.insert(c);
  }
  return out;
}

constexpr std::size_t kNoLimit = 1000000;

ExtractionLimits unlimited() {
  ExtractionLimits limits;
  limits.max_path_length = kNoLimit;
  limits.max_path_width = kNoLimit;
  limits.max_contexts = kNoLimit;
  return limits;
}

}  // namespace

TEST_SUITE("codeast") {

TEST_CASE("parse_ast_document basic and errors") {
  const auto good = write_temp("ast_good.json", R"([
    {"method_id":"m1","root":{"kind":"assign","children":[
      {"kind":"name","value":"x"},
      {"kind":"plus","children":[{"kind":"name","value":"y"},{"kind":"lit","value":"1"}]}
    ]}}
  ])");
  const auto doc = parse_ast_document(good);
  REQUIRE(doc.size() == 1);
  CHECK(collect_leaves(doc.at("m1")).size() == 3);

  const auto empty = write_temp("ast_empty.json", "[]");
  CHECK(parse_ast_document(empty).empty());

  const auto bad_leaf = write_temp("ast_bad1.json",
                                   R"([{"method_id":"m","root":{"kind":"k","children":[]}}])");
  CHECK_THROWS_AS(parse_ast_document(bad_leaf), InvariantViolation);

  const auto bad_inner = write_temp("ast_bad2.json", R"([
    {"method_id":"m","root":{"kind":"k","value":"v","children":[{"kind":"l","value":"x"}]}}
  ])");
  CHECK_THROWS_WITH_AS(parse_ast_document(bad_inner), doctest::Contains("m.root"),
                       InvariantViolation);

  const auto dup = write_temp("ast_dup.json", R"([
    {"method_id":"m","root":{"kind":"l","value":"x"}},
    {"method_id":"m","root":{"kind":"l","value":"y"}}
  ])");
  CHECK_THROWS_AS(parse_ast_document(dup), DuplicateId);

  const auto not_json = write_temp("ast_notjson.json", "{{{{");
  CHECK_THROWS_AS(parse_ast_document(not_json), ParseError);
}

TEST_CASE("extraction on the three-leaf expression") {
  // x = y + 1 as assign(name(x), plus(name(y), lit(1)))
  AstNode root;
  root.kind = "assign";
  AstNode x{"name", "x", true, {}};
  AstNode plus;
  plus.kind = "plus";
  plus.children = {AstNode{"name", "y", true, {}}, AstNode{"lit", "1", true, {}}};
  root.children = {x, plus};

  const auto contexts = extract_path_contexts(root, unlimited());
  REQUIRE(contexts.size() == 3);  // C(3,2)
  CHECK(contexts[0].start_token == "x");
  CHECK(contexts[0].end_token == "y");
  CHECK(contexts[0].path == "assign↓plus");
  CHECK(contexts[1].start_token == "x");
  CHECK(contexts[1].end_token == "1");
  CHECK(contexts[2].start_token == "y");
  CHECK(contexts[2].end_token == "1");
  CHECK(contexts[2].path == "plus");  // siblings share the LCA only

  AstNode single{"lit", "z", true, {}};
  CHECK(extract_path_contexts(single, unlimited()).empty());
}

TEST_CASE("width filter keeps adjacent pairs only") {
  Rng rng(17);
  // five leaves in a random tree; width 1 allows exactly 4 pairs
  const auto ast = testsupport::make_random_ast(rng, 5);
  ExtractionLimits limits = unlimited();
  limits.max_path_width = 1;
  CHECK(extract_path_contexts(ast, limits).size() == 4);
}

TEST_CASE("unfiltered context count is L(L-1)/2 and filters match the oracle") {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t leaves = 2 + rng.below(11);  // <= 12
    const auto ast = testsupport::make_random_ast(rng, leaves);

    const auto all = extract_path_contexts(ast, unlimited());
    CHECK(all.size() == leaves * (leaves - 1) / 2);
    CHECK(strip_meta(oracle_extract(ast, kNoLimit, kNoLimit)) == to_oracle_set(all));

    ExtractionLimits limits = unlimited();
    limits.max_path_width = 1 + rng.below(4);
    limits.max_path_length = 2 + rng.below(5);
    const auto filtered = extract_path_contexts(ast, limits);
    CHECK(strip_meta(oracle_extract(ast, limits.max_path_length, limits.max_path_width)) ==
          to_oracle_set(filtered));
  }
}

TEST_CASE("sampling caps the context count deterministically") {
  Rng rng(5);
  const auto ast = testsupport::make_random_ast(rng, 30);  // 435 pairs
  ExtractionLimits limits = unlimited();
  limits.max_contexts = 50;
  limits.rng_seed = 77;

  const auto a = extract_path_contexts(ast, limits);
  const auto b = extract_path_contexts(ast, limits);
  REQUIRE(a.size() == 50);
  REQUIRE(b.size() == 50);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].start_token == b[i].start_token);
    CHECK(a[i].path == b[i].path);
    CHECK(a[i].end_token == b[i].end_token);
  }

  // the sample is a subset of the full set
  const auto full = to_oracle_set(extract_path_contexts(ast, unlimited()));
  for (const auto& c : a)
    CHECK(full.count(OracleContext{c.start_token, c.path, c.end_token, 0, 0}) > 0);

  limits.rng_seed = 78;
  const auto c = extract_path_contexts(ast, limits);
  bool any_difference = c.size() != a.size();
  for (std::size_t i = 0; !any_difference && i < a.size(); ++i)
    any_difference = !(a[i].start_token == c[i].start_token && a[i].path == c[i].path &&
                       a[i].end_token == c[i].end_token);
  CHECK(any_difference);  // different seed, different sample
}

TEST_CASE("extraction determinism across calls") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto ast = testsupport::make_random_ast(rng, 4 + rng.below(20));
    ExtractionLimits limits;
    limits.rng_seed = trial;
    const auto a = extract_path_contexts(ast, limits);
    const auto b = extract_path_contexts(ast, limits);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].path == b[i].path);
  }
}

TEST_CASE("attention: single context equals tanh(Wx), duplicates collapse") {
  const std::vector<std::string> tokens = {"s0", "e0"};
  const std::vector<std::string> paths = {"K0"};
  auto params = make_attention_params(tokens, paths, 4, 3, 11);

  const PathContext ctx{"s0", "K0", "e0"};
  const auto single = embed_method(params, {ctx});
  CHECK_FALSE(single.degenerate);

  // direct tanh(W x) computation
  Vector x;
  const auto& s = params.token_vocab.at("s0");
  const auto& p = params.path_vocab.at("K0");
  const auto& e = params.token_vocab.at("e0");
  x.insert(x.end(), s.begin(), s.end());
  x.insert(x.end(), p.begin(), p.end());
  x.insert(x.end(), e.begin(), e.end());
  Vector expected;
  matvec(params.combine_weights, x, expected);
  for (auto& v : expected) v = std::tanh(v);
  for (std::size_t i = 0; i < kMethodVectorDim; ++i)
    CHECK(single.vec[i] == doctest::Approx(expected[i]).epsilon(1e-12));

  const auto twice = embed_method(params, {ctx, ctx});
  for (std::size_t i = 0; i < kMethodVectorDim; ++i)
    CHECK(twice.vec[i] == doctest::Approx(single.vec[i]).epsilon(1e-12));
}

TEST_CASE("attention weights sum to one and output is permutation invariant") {
  Rng rng(3);
  std::vector<std::string> tokens, paths;
  for (int i = 0; i < 50; ++i) {
    tokens.push_back("s" + std::to_string(i));
    tokens.push_back("e" + std::to_string(i));
  }
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b)
      for (int c = 0; c < 8; ++c)
        paths.push_back("K" + std::to_string(a) + "↑K" + std::to_string(b) + "↓K" +
                        std::to_string(c));
  const auto params = make_attention_params(tokens, paths, 8, 8, 2);

  for (int trial = 0; trial < 30; ++trial) {
    auto contexts = testsupport::make_random_contexts(rng, 1 + rng.below(30));
    const auto base = embed_method(params, contexts);
    rng.shuffle(contexts);
    const auto shuffled = embed_method(params, contexts);
    for (std::size_t i = 0; i < kMethodVectorDim; ++i)
      CHECK(shuffled.vec[i] == doctest::Approx(base.vec[i]).epsilon(1e-10));
  }
}

TEST_CASE("unknown tokens fall back to the UNK vectors") {
  const auto params = make_attention_params({"known"}, {"P"}, 4, 4, 1);
  const PathContext unknown{"neverseen", "neverseen_path", "neverseen2"};
  const auto a = embed_method(params, {unknown});
  const PathContext unknown2{"other", "other_path", "other2"};
  const auto b = embed_method(params, {unknown2});
  CHECK(a.vec == b.vec);  // same UNK lookups, same result
}

TEST_CASE("hashed embedding is unit norm, deterministic, and pinned") {
  const auto params = make_hashed_params();

  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto contexts = testsupport::make_random_contexts(rng, 8 + rng.below(40));
    const auto embedded = embed_method(params, contexts);
    REQUIRE_FALSE(embedded.degenerate);
    CHECK(std::abs(std::sqrt(dot(embedded.vec, embedded.vec)) - 1.0) < 1e-9);
  }

  // golden vector: three fixed contexts, frozen digest and spot values
  const std::vector<PathContext> fixture = {
      {"x", "assign↓plus", "y"},
      {"x", "assign↓plus", "1"},
      {"y", "plus", "1"},
  };
  const auto embedded = embed_method(params, fixture);
  CHECK_FALSE(embedded.degenerate);
  const std::uint64_t digest =
      fnv1a64(embedded.vec.data(), embedded.vec.size() * sizeof(double));
  CHECK(digest == 0x2e8e06868e4a8a57ULL);

  const auto empty = embed_method(params, {});
  CHECK(empty.degenerate);
  CHECK(empty.vec == Vector(kMethodVectorDim, 0.0));
}

TEST_CASE("embed_method_backward matches finite differences") {
  // small dims keep the FD sweep fast; tolerances follow the gradient gate
  const std::vector<std::string> tokens = {"s0", "s1", "e0"};
  const std::vector<std::string> paths = {"P0", "P1"};
  auto params = make_attention_params(tokens, paths, 3, 2, 21);

  const std::vector<PathContext> contexts = {
      {"s0", "P0", "e0"}, {"s1", "P1", "e0"}, {"s0", "P1", "unknown"}};

  Rng rng(6);
  Vector upstream(kMethodVectorDim);
  for (auto& v : upstream) v = rng.uniform(-1.0, 1.0);

  const auto loss_of = [&](const CodeVectorizerParams& p) {
    const auto out = embed_method(p, contexts);
    return dot(upstream, out.vec);
  };

  const auto grads = embed_method_backward(params, contexts, upstream);
  const double h = 1e-6;
  const auto check_param = [&](double* slot, double analytic) {
    const double saved = *slot;
    *slot = saved + h;
    const double up = loss_of(params);
    *slot = saved - h;
    const double down = loss_of(params);
    *slot = saved;
    const double fd = (up - down) / (2 * h);
    CHECK(std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-6}) < 1e-4);
  };

  for (std::size_t i = 0; i < params.combine_weights.a.size(); i += 97)
    check_param(&params.combine_weights.a[i], grads.d_combine.a[i]);
  for (std::size_t i = 0; i < params.attention_vector.size(); i += 41)
    check_param(&params.attention_vector[i], grads.d_attention[i]);
  for (const auto& [key, grad] : grads.d_tokens) {
    auto& target = key.empty() ? params.unk_token : params.token_vocab.at(key);
    for (std::size_t i = 0; i < grad.size(); ++i) check_param(&target[i], grad[i]);
  }
  for (const auto& [key, grad] : grads.d_paths) {
    auto& target = key.empty() ? params.unk_path : params.path_vocab.at(key);
    for (std::size_t i = 0; i < grad.size(); ++i) check_param(&target[i], grad[i]);
  }
}

}  // TEST_SUITE
