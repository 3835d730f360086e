#include "bugloc/wordvec.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace bugloc::wordvec {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) parts.push_back(line.substr(start, i - start));
  }
  return parts;
}

double parse_value(const std::string& field, std::size_t line_no) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw ParseError("non-numeric value '" + field + "' at line " + std::to_string(line_no));
  if (!std::isfinite(value))
    throw ParseError("non-finite value '" + field + "' at line " + std::to_string(line_no));
  return value;
}

}  // namespace

EmbeddingStore load_embeddings(const std::string& path, VectorFileFormat format,
                               Diagnostics* diag, std::string name) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open vector file: " + path);

  EmbeddingStore store;
  store.name = name.empty() ? path : std::move(name);

  std::string line;
  std::size_t line_no = 0;
  std::size_t declared_count = 0;

  if (format == VectorFileFormat::Headered) {
    if (!std::getline(in, line)) throw EmptyFile("vector file is empty: " + path);
    ++line_no;
    const auto header = split_ws(line);
    if (header.size() != 2)
      throw ParseError("headered vector file must start with 'V D': " + path);
    declared_count = static_cast<std::size_t>(parse_value(header[0], line_no));
    store.dim = static_cast<std::size_t>(parse_value(header[1], line_no));
    if (store.dim == 0) throw ParseError("vector dimension must be positive: " + path);
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() < 2)
      throw ParseError("line " + std::to_string(line_no) + " has no vector values");

    if (store.dim == 0) store.dim = fields.size() - 1;  // headerless: infer
    if (fields.size() - 1 != store.dim)
      throw DimensionMismatch("line " + std::to_string(line_no) + " has " +
                              std::to_string(fields.size() - 1) + " values, expected " +
                              std::to_string(store.dim));

    Vector vec(store.dim);
    for (std::size_t i = 0; i < store.dim; ++i) vec[i] = parse_value(fields[i + 1], line_no);

    const auto [it, inserted] = store.vocab.emplace(fields[0], std::move(vec));
    if (!inserted)
      warn_into(diag, "duplicate word '" + fields[0] + "' at line " +
                          std::to_string(line_no) + "; keeping first occurrence");
  }

  if (store.vocab.empty()) throw EmptyFile("vector file has no entries: " + path);
  if (format == VectorFileFormat::Headered && store.vocab.size() != declared_count)
    warn_into(diag, "header declares " + std::to_string(declared_count) + " entries but " +
                        std::to_string(store.vocab.size()) + " were loaded");
  return store;
}

void save_embeddings(const EmbeddingStore& store, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path);
  out << store.vocab.size() << ' ' << store.dim << '\n';
  // sorted for reproducible files
  std::vector<const std::string*> words;
  words.reserve(store.vocab.size());
  for (const auto& [word, _] : store.vocab) words.push_back(&word);
  std::sort(words.begin(), words.end(),
            [](const std::string* a, const std::string* b) { return *a < *b; });
  char buf[64];
  for (const auto* word : words) {
    out << *word;
    for (double v : store.vocab.at(*word)) {
      std::snprintf(buf, sizeof buf, " %.17g", v);
      out << buf;
    }
    out << '\n';
  }
}

EmbedResult embed_tokens(const EmbeddingStore& store,
                         const std::vector<std::string>& tokens) {
  EmbedResult result;
  result.matrix.dim = store.dim;
  for (const auto& token : tokens) {
    const auto it = store.vocab.find(token);
    if (it == store.vocab.end()) {
      ++result.oov_count;
    } else {
      result.matrix.rows.push_back(it->second);
    }
  }
  return result;
}

PoolResult max_pool(const ReportMatrix& matrix) {
  PoolResult result;
  result.vec.assign(matrix.dim, 0.0);
  if (matrix.rows.empty()) {
    result.degenerate = true;
    return result;
  }
  result.vec = matrix.rows.front();
  for (std::size_t r = 1; r < matrix.rows.size(); ++r) {
    const Vector& row = matrix.rows[r];
    for (std::size_t j = 0; j < matrix.dim; ++j)
      if (row[j] > result.vec[j]) result.vec[j] = row[j];
  }
  return result;
}

ReportEmbedding embed_report(const EmbeddingStore& store, const std::string& raw_text,
                             const textprep::PreprocessConfig& config) {
  const auto tokens = textprep::preprocess_report(raw_text, config);
  const auto embedded = embed_tokens(store, tokens);
  auto pooled = max_pool(embedded.matrix);
  return ReportEmbedding{std::move(pooled.vec), embedded.oov_count, pooled.degenerate};
}

PrecomputedMatrix load_report_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open report matrix file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("invalid JSON in " + path + ": " + e.what());
  }
  PrecomputedMatrix pm;
  try {
    pm.report_id = doc.at("report_id").get<std::string>();
    const auto dim = doc.at("dim").get<long long>();
    if (dim <= 0) throw ParseError("dim must be positive in " + path);
    pm.matrix.dim = static_cast<std::size_t>(dim);
    for (const auto& row : doc.at("rows")) {
      Vector vec = row.get<Vector>();
      if (vec.size() != pm.matrix.dim)
        throw DimensionMismatch("row of size " + std::to_string(vec.size()) +
                                " does not match dim " + std::to_string(pm.matrix.dim) +
                                " in " + path);
      for (double v : vec)
        if (!std::isfinite(v)) throw ParseError("non-finite value in " + path);
      pm.matrix.rows.push_back(std::move(vec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad report matrix schema in " + path + ": " + e.what());
  }
  return pm;
}

}  // namespace bugloc::wordvec
