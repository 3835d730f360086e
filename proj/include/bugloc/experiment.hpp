#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bugloc/codeast.hpp"
#include "bugloc/dataset.hpp"
#include "bugloc/errors.hpp"
#include "bugloc/evalkit.hpp"
#include "bugloc/neural.hpp"
#include "bugloc/textprep.hpp"
#include "bugloc/wordvec.hpp"

namespace bugloc::experiment {

enum class Strategy { Original, Ros, Rus, Wbe, Focal };

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct EmbeddingSpec {
  std::string name;
  enum class Kind { Vectors, Precomputed } kind = Kind::Vectors;
  std::string path;  // vector file, or directory of per-report matrices
  wordvec::VectorFileFormat format = wordvec::VectorFileFormat::Headerless;
  std::size_t dim = 0;  // 0: infer from the vector file
};

struct DatasetSpec {
  std::string name;
  std::string manifest_path;
};

struct CodeEmbeddingConfig {
  codeast::VectorizerMode mode = codeast::VectorizerMode::Attention;
  bool joint_training = false;  // train attention parameters with the classifier
  std::size_t token_dim = 64;
  std::size_t path_dim = 64;
  codeast::ExtractionLimits limits;
};

struct ExperimentConfig {
  std::uint64_t seed = 42;
  std::string output_dir = "out";
  evalkit::MapVariant map_variant = evalkit::MapVariant::Standard;
  bool strict_dataset = false;
  std::size_t workers = 1;
  std::vector<DatasetSpec> datasets;
  std::vector<EmbeddingSpec> embeddings;
  std::vector<Strategy> strategies;
  textprep::PreprocessConfig preprocess;
  CodeEmbeddingConfig code_embedding;
  neural::Activation activation = neural::Activation::Relu;
  neural::TrainConfig train;
  double loss_alpha = 0.25;
  double loss_gamma = 2.0;

  void validate() const;
};

// Paths inside the config resolve relative to the config file's directory.
ExperimentConfig load_config(const std::string& path);

struct MatrixResult {
  std::vector<std::string> embeddings;
  std::vector<std::string> strategies;
  std::map<std::pair<std::string, std::string>, evalkit::MetricsReport> cells;
  std::map<std::pair<std::string, std::string>, std::string> failures;
};

// Joint-training side data, aligned index-for-index with the split.
struct JointData {
  codeast::CodeVectorizerParams initial_params;
  std::vector<neural::JointInstance> train;
  std::vector<neural::JointInstance> valid;
  std::vector<neural::JointInstance> test;
};

// A dataset prepared for one embedding: materialized instances, the
// chronological split, and everything needed to rank the test decile.
struct PreparedData {
  std::string dataset_name;
  std::string embedding_name;
  evalkit::Split split;
  std::size_t report_dim = 0;
  std::optional<JointData> joint;
};

struct CombinationOutcome {
  neural::Network net;
  std::vector<neural::EpochRecord> history;
  evalkit::MetricsReport metrics;
  std::vector<evalkit::QueryResult> queries;
};

PreparedData prepare_data(const ExperimentConfig& config, const DatasetSpec& dataset,
                          const EmbeddingSpec& embedding, Diagnostics* diag);

CombinationOutcome run_combination(const ExperimentConfig& config, const PreparedData& data,
                                   Strategy strategy);

// Ranks every test-decile bug against its candidate roster.
std::vector<evalkit::QueryResult> rank_split(const neural::Network& net,
                                             const std::vector<imbalance::Instance>& test,
                                             ExecMode mode = ExecMode::Parallel);

// Runs every (embedding x strategy) cell per dataset, writing one JSON per
// combination as it finishes plus a matrix.json per dataset.
std::map<std::string, MatrixResult> run_experiment_matrix(const ExperimentConfig& config,
                                                          Diagnostics* diag);

struct CountTable {
  std::string metric;    // MAP, MRR, Accuracy@1, Accuracy@5, Accuracy@10
  std::string row_axis;  // "embedding" or "strategy"
  std::vector<std::string> row_names;
  std::vector<std::string> dataset_names;
  std::vector<std::vector<std::size_t>> counts;  // row x dataset
  std::vector<std::size_t> totals;
};

// For each metric: per dataset and strategy, the best embedding(s) get a
// count (ties all count); and symmetrically with strategies as rows.
std::vector<CountTable> best_count_tables(const std::map<std::string, MatrixResult>& matrices);

std::string render_table_text(const CountTable& table);
std::string render_table_csv(const CountTable& table);

nlohmann::json metrics_to_json(const evalkit::MetricsReport& metrics);
evalkit::MetricsReport metrics_from_json(const nlohmann::json& j);
std::string per_query_csv(const evalkit::MetricsReport& metrics);

// Reads the matrix.json files written by run_experiment_matrix.
std::map<std::string, MatrixResult> load_matrix_results(const std::string& out_dir,
                                                        const std::vector<std::string>& datasets);

}  // namespace bugloc::experiment
