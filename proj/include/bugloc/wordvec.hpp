#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "bugloc/errors.hpp"
#include "bugloc/linalg.hpp"
#include "bugloc/textprep.hpp"

namespace bugloc::wordvec {

enum class VectorFileFormat { Headered, Headerless };

// Immutable after load; safe to share across ranking threads.
struct EmbeddingStore {
  std::size_t dim = 0;
  std::unordered_map<std::string, Vector> vocab;
  std::string name;
};

// One row per in-vocabulary token, in token order.
struct ReportMatrix {
  std::size_t dim = 0;
  std::vector<Vector> rows;
};

struct EmbedResult {
  ReportMatrix matrix;
  std::size_t oov_count = 0;
};

struct PoolResult {
  Vector vec;
  bool degenerate = false;  // true when the matrix had no rows
};

struct ReportEmbedding {
  Vector vec;
  std::size_t oov_count = 0;
  bool degenerate = false;
};

EmbeddingStore load_embeddings(const std::string& path, VectorFileFormat format,
                               Diagnostics* diag = nullptr, std::string name = "");

// Headered format, decimal floats with round-trip precision. Loading the
// result back yields an identical store.
void save_embeddings(const EmbeddingStore& store, const std::string& path);

EmbedResult embed_tokens(const EmbeddingStore& store,
                         const std::vector<std::string>& tokens);

// Column-wise maxima; the all-zero vector (flagged degenerate) for an empty
// matrix.
PoolResult max_pool(const ReportMatrix& matrix);

ReportEmbedding embed_report(const EmbeddingStore& store, const std::string& raw_text,
                             const textprep::PreprocessConfig& config);

// Precomputed per-report matrix: {"report_id":, "dim":, "rows": [[..],..]}
struct PrecomputedMatrix {
  std::string report_id;
  ReportMatrix matrix;
};

PrecomputedMatrix load_report_matrix(const std::string& path);

}  // namespace bugloc::wordvec
