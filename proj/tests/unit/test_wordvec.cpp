#include <doctest.h>

#include <cmath>
#include <fstream>

#include "bugloc/rng.hpp"
#include "bugloc/textprep.hpp"
#include "bugloc/wordvec.hpp"

using namespace bugloc;
using namespace bugloc::wordvec;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = std::string(TEST_DATA_DIR) + "/tmp_" + name;
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_SUITE("wordvec") {

TEST_CASE("headered file parses with declared dimensions") {
  const auto path = write_temp("headered.txt", "2 3\ncat 1 0 0\ndog 0 1 0\n");
  const auto store = load_embeddings(path, VectorFileFormat::Headered);
  CHECK(store.dim == 3);
  CHECK(store.vocab.size() == 2);
  CHECK(store.vocab.at("cat") == Vector{1, 0, 0});
}

TEST_CASE("headerless file infers the dimension") {
  const auto path = write_temp("headerless.txt", "cat 1.0 2.0\n");
  const auto store = load_embeddings(path, VectorFileFormat::Headerless);
  CHECK(store.dim == 2);
  CHECK(store.vocab.size() == 1);
}

TEST_CASE("dimension mismatch names the line") {
  const auto path = write_temp("mismatch.txt", "cat 1 0\ndog 1\n");
  CHECK_THROWS_WITH_AS(load_embeddings(path, VectorFileFormat::Headerless),
                       doctest::Contains("line 2"), DimensionMismatch);
}

TEST_CASE("parse and empty errors") {
  const auto bad = write_temp("bad.txt", "cat 1 zebra\n");
  CHECK_THROWS_AS(load_embeddings(bad, VectorFileFormat::Headerless), ParseError);

  const auto nan_path = write_temp("nan.txt", "cat 1 nan\n");
  CHECK_THROWS_AS(load_embeddings(nan_path, VectorFileFormat::Headerless), ParseError);

  const auto empty = write_temp("empty.txt", "");
  CHECK_THROWS_AS(load_embeddings(empty, VectorFileFormat::Headerless), EmptyFile);
  CHECK_THROWS_AS(load_embeddings(empty, VectorFileFormat::Headered), EmptyFile);
}

TEST_CASE("duplicate words keep the first occurrence and warn") {
  const auto path = write_temp("dup.txt", "cat 1 2\ncat 3 4\n");
  Diagnostics diag;
  const auto store = load_embeddings(path, VectorFileFormat::Headerless, &diag);
  CHECK(store.vocab.at("cat") == Vector{1, 2});
  REQUIRE(diag.warnings.size() == 1);
  CHECK(diag.warnings[0].find("duplicate word 'cat'") != std::string::npos);
}

TEST_CASE("save then reload headered yields an identical store") {
  Rng rng(5);
  EmbeddingStore store;
  store.dim = 7;
  store.name = "roundtrip";
  for (int w = 0; w < 40; ++w) {
    Vector v(store.dim);
    for (auto& x : v) x = rng.uniform(-10.0, 10.0) * std::pow(10.0, rng.uniform(-12.0, 12.0));
    store.vocab.emplace("w" + std::to_string(w), std::move(v));
  }
  const std::string path = std::string(TEST_DATA_DIR) + "/tmp_roundtrip.txt";
  save_embeddings(store, path);
  const auto reloaded = load_embeddings(path, VectorFileFormat::Headered);
  REQUIRE(reloaded.dim == store.dim);
  REQUIRE(reloaded.vocab.size() == store.vocab.size());
  for (const auto& [word, vec] : store.vocab) {
    REQUIRE(reloaded.vocab.count(word) == 1);
    CHECK(reloaded.vocab.at(word) == vec);  // bit-exact
  }
}

TEST_CASE("embed_tokens keeps order, skips OOV, counts them") {
  EmbeddingStore store;
  store.dim = 2;
  store.vocab = {{"cat", {1, 2}}, {"dog", {3, 4}}};

  auto r = embed_tokens(store, {"cat", "dog"});
  REQUIRE(r.matrix.rows.size() == 2);
  CHECK(r.matrix.rows[0] == Vector{1, 2});
  CHECK(r.matrix.rows[1] == Vector{3, 4});
  CHECK(r.oov_count == 0);

  r = embed_tokens(store, {"bird"});
  CHECK(r.matrix.rows.empty());
  CHECK(r.oov_count == 1);

  r = embed_tokens(store, {"cat", "cat"});
  REQUIRE(r.matrix.rows.size() == 2);
  CHECK(r.matrix.rows[0] == r.matrix.rows[1]);
}

TEST_CASE("max_pool column maxima") {
  ReportMatrix m;
  m.dim = 2;
  m.rows = {{1, 5}, {3, 2}};
  CHECK(max_pool(m).vec == Vector{3, 5});

  m.rows = {{-1, -2}, {-3, -4}};
  CHECK(max_pool(m).vec == Vector{-1, -2});  // not clamped at zero

  m.dim = 3;
  m.rows = {{7, 8, 9}};
  CHECK(max_pool(m).vec == Vector{7, 8, 9});

  m.rows.clear();
  const auto empty = max_pool(m);
  CHECK(empty.vec == Vector{0, 0, 0});
  CHECK(empty.degenerate);
}

TEST_CASE("max_pool permutation invariance and dominance") {
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    ReportMatrix m;
    m.dim = 1 + rng.below(8);
    const std::size_t rows = 1 + rng.below(10);
    for (std::size_t r = 0; r < rows; ++r) {
      Vector row(m.dim);
      for (auto& x : row) x = rng.uniform(-5.0, 5.0);
      m.rows.push_back(std::move(row));
    }
    const auto pooled = max_pool(m).vec;

    ReportMatrix shuffled = m;
    rng.shuffle(shuffled.rows);
    CHECK(max_pool(shuffled).vec == pooled);

    for (std::size_t j = 0; j < m.dim; ++j) {
      bool achieved = false;
      for (const auto& row : m.rows) {
        CHECK(pooled[j] >= row[j]);
        achieved = achieved || row[j] == pooled[j];
      }
      CHECK(achieved);
    }

    // appending a duplicate row never changes the output
    ReportMatrix extended = m;
    extended.rows.push_back(m.rows[rng.below(m.rows.size())]);
    CHECK(max_pool(extended).vec == pooled);
  }
}

TEST_CASE("embed_report composes the pipeline") {
  EmbeddingStore store;
  store.dim = 2;
  store.vocab = {{"crash", {1, 0}}, {"window", {0, 2}}};

  textprep::PreprocessConfig config;
  config.stopword_set = {"the"};

  const std::string text = "The crash window";
  const auto embedded = wordvec::embed_report(store, text, config);
  const auto direct =
      max_pool(embed_tokens(store, textprep::preprocess_report(text, config)).matrix);
  CHECK(embedded.vec == direct.vec);
  CHECK(embedded.vec == Vector{1, 2});
}

TEST_CASE("embed_report identity and degenerate cases") {
  EmbeddingStore store;
  store.dim = 2;
  store.vocab = {{"crash", {1.5, -2.0}}};
  textprep::PreprocessConfig config;
  config.stopword_set = {"the"};

  const auto single = wordvec::embed_report(store, "crash", config);
  CHECK(single.vec == Vector{1.5, -2.0});
  CHECK_FALSE(single.degenerate);

  const auto all_oov = wordvec::embed_report(store, "nothing matches here", config);
  CHECK(all_oov.vec == Vector{0, 0});
  CHECK(all_oov.degenerate);
  CHECK(all_oov.oov_count == 3);

  const auto all_stop = wordvec::embed_report(store, "the the", config);
  CHECK(all_stop.vec == Vector{0, 0});
  CHECK(all_stop.degenerate);
}

TEST_CASE("precomputed report matrix loads and validates") {
  const auto path = write_temp("matrix.json",
                               R"({"report_id":"b1","dim":3,"rows":[[1,2,3],[4,5,6]]})");
  const auto pm = load_report_matrix(path);
  CHECK(pm.report_id == "b1");
  CHECK(pm.matrix.dim == 3);
  REQUIRE(pm.matrix.rows.size() == 2);
  CHECK(max_pool(pm.matrix).vec == Vector{4, 5, 6});

  const auto bad = write_temp("matrix_bad.json",
                              R"({"report_id":"b1","dim":3,"rows":[[1,2]]})");
  CHECK_THROWS_AS(load_report_matrix(bad), DimensionMismatch);
}

}  // TEST_SUITE
