#include "bugloc/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "bugloc/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bugloc::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Original: return "original";
    case Strategy::Ros: return "ros";
    case Strategy::Rus: return "rus";
    case Strategy::Wbe: return "wbe";
    case Strategy::Focal: return "focal";
  }
  return "original";
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "original") return Strategy::Original;
  if (name == "ros") return Strategy::Ros;
  if (name == "rus") return Strategy::Rus;
  if (name == "wbe") return Strategy::Wbe;
  if (name == "focal") return Strategy::Focal;
  throw ConfigError("unknown strategy '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (datasets.empty()) throw ConfigError("config needs at least one dataset");
  if (embeddings.empty()) throw ConfigError("config needs at least one embedding");
  if (strategies.empty()) throw ConfigError("config needs at least one strategy");
  std::set<std::string> names;
  for (const auto& d : datasets)
    if (!names.insert("d:" + d.name).second)
      throw ConfigError("duplicate dataset name '" + d.name + "'");
  for (const auto& e : embeddings)
    if (!names.insert("e:" + e.name).second)
      throw ConfigError("duplicate embedding name '" + e.name + "'");
  if (!(loss_alpha > 0.0 && loss_alpha < 1.0)) throw ConfigError("loss alpha must be in (0,1)");
  if (loss_gamma < 0.0) throw ConfigError("loss gamma must be >= 0");
  if (train.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (train.learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  preprocess.validate();
}

namespace {

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  fs::path candidate(p);
  if (candidate.is_absolute()) return candidate.string();
  return (base / candidate).lexically_normal().string();
}

std::uint64_t combo_seed(std::uint64_t global, const std::string& dataset,
                         const std::string& embedding, const std::string& strategy) {
  const std::string key = dataset + '\x1f' + embedding + '\x1f' + strategy;
  return fnv1a64(key) ^ (global * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
}

std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in config " + path + ": " + e.what());
  }

  const fs::path base = fs::path(path).parent_path();
  ExperimentConfig cfg;
  try {
    cfg.seed = doc.value("seed", 42ULL);
    cfg.output_dir = resolve(base, doc.value("output_dir", std::string("out")));
    const std::string variant = doc.value("map_variant", std::string("standard"));
    if (variant == "standard") {
      cfg.map_variant = evalkit::MapVariant::Standard;
    } else if (variant == "paper-literal" || variant == "paper_literal") {
      cfg.map_variant = evalkit::MapVariant::PaperLiteral;
    } else {
      throw ConfigError("unknown map_variant '" + variant + "'");
    }
    cfg.strict_dataset = doc.value("strict_dataset", false);
    cfg.workers = doc.value("workers", 1ULL);

    for (const auto& j : doc.at("datasets")) {
      DatasetSpec d;
      d.name = j.at("name").get<std::string>();
      d.manifest_path = resolve(base, j.at("manifest").get<std::string>());
      cfg.datasets.push_back(std::move(d));
    }

    for (const auto& j : doc.at("embeddings")) {
      EmbeddingSpec e;
      e.name = j.at("name").get<std::string>();
      const std::string kind = j.value("kind", std::string("vectors"));
      if (kind == "vectors") {
        e.kind = EmbeddingSpec::Kind::Vectors;
        e.path = resolve(base, j.at("path").get<std::string>());
        const std::string format = j.value("format", std::string("headerless"));
        if (format == "headered") {
          e.format = wordvec::VectorFileFormat::Headered;
        } else if (format == "headerless") {
          e.format = wordvec::VectorFileFormat::Headerless;
        } else {
          throw ConfigError("unknown vector file format '" + format + "'");
        }
      } else if (kind == "precomputed") {
        e.kind = EmbeddingSpec::Kind::Precomputed;
        e.path = resolve(base, j.at("dir").get<std::string>());
      } else {
        throw ConfigError("unknown embedding kind '" + kind + "'");
      }
      e.dim = j.value("dim", 0ULL);
      cfg.embeddings.push_back(std::move(e));
    }

    for (const auto& j : doc.at("strategies"))
      cfg.strategies.push_back(strategy_from_name(j.get<std::string>()));

    if (doc.contains("preprocess")) {
      const auto& p = doc.at("preprocess");
      const std::string stopword_file = p.value("stopword_file", std::string());
      cfg.preprocess.stopword_set = stopword_file.empty()
                                        ? textprep::default_stopwords()
                                        : textprep::load_stopwords(resolve(base, stopword_file));
      cfg.preprocess.keep_compound_original = p.value("keep_compound_original", true);
      cfg.preprocess.min_token_len = p.value("min_token_len", 1ULL);
    } else {
      cfg.preprocess = textprep::default_config();
    }

    if (doc.contains("code_embedding")) {
      const auto& c = doc.at("code_embedding");
      const std::string mode = c.value("mode", std::string("attention"));
      if (mode == "attention") {
        cfg.code_embedding.mode = codeast::VectorizerMode::Attention;
      } else if (mode == "hashed") {
        cfg.code_embedding.mode = codeast::VectorizerMode::Hashed;
      } else {
        throw ConfigError("unknown code embedding mode '" + mode + "'");
      }
      cfg.code_embedding.joint_training = c.value("joint", false);
      cfg.code_embedding.token_dim = c.value("token_dim", 64ULL);
      cfg.code_embedding.path_dim = c.value("path_dim", 64ULL);
      cfg.code_embedding.limits.max_path_length = c.value("max_path_length", 8ULL);
      cfg.code_embedding.limits.max_path_width = c.value("max_path_width", 2ULL);
      cfg.code_embedding.limits.max_contexts = c.value("max_contexts", 200ULL);
      cfg.code_embedding.limits.rng_seed = c.value("seed", cfg.seed);
    } else {
      cfg.code_embedding.limits.rng_seed = cfg.seed;
    }

    if (doc.contains("network"))
      cfg.activation =
          neural::activation_from_name(doc.at("network").value("activation", std::string("relu")));

    if (doc.contains("train")) {
      const auto& t = doc.at("train");
      const std::string opt = t.value("optimizer", std::string("adam"));
      if (opt == "adam") {
        cfg.train.optimizer = neural::Optimizer::Adam;
      } else if (opt == "sgd") {
        cfg.train.optimizer = neural::Optimizer::Sgd;
      } else {
        throw ConfigError("unknown optimizer '" + opt + "'");
      }
      cfg.train.learning_rate = t.value("learning_rate", 1e-3);
      cfg.train.batch_size = t.value("batch_size", 32ULL);
      cfg.train.epochs = t.value("epochs", 20ULL);
      cfg.train.early_stop_patience = t.value("early_stop_patience", 5ULL);
    }

    if (doc.contains("loss")) {
      cfg.loss_alpha = doc.at("loss").value("alpha", 0.25);
      cfg.loss_gamma = doc.at("loss").value("gamma", 2.0);
    }
  } catch (const json::exception& e) {
    throw ConfigError("bad config schema in " + path + ": " + e.what());
  }

  cfg.validate();
  return cfg;
}

namespace {

dataset::ReportEmbedder make_report_embedder(const ExperimentConfig& config,
                                             const EmbeddingSpec& spec, Diagnostics* diag,
                                             std::size_t* out_dim) {
  if (spec.kind == EmbeddingSpec::Kind::Vectors) {
    auto store = std::make_shared<wordvec::EmbeddingStore>(
        wordvec::load_embeddings(spec.path, spec.format, diag, spec.name));
    if (spec.dim != 0 && store->dim != spec.dim)
      throw DimensionMismatch("embedding '" + spec.name + "' declares dim " +
                              std::to_string(spec.dim) + " but file has " +
                              std::to_string(store->dim));
    *out_dim = store->dim;
    const auto preprocess = config.preprocess;
    return [store, preprocess](const dataset::BugRecord& bug) {
      const std::string text = bug.title + " " + bug.description;
      return wordvec::embed_report(*store, text, preprocess).vec;
    };
  }

  // Precomputed per-report matrices: <dir>/<bug_id>.json
  if (spec.dim == 0)
    throw ConfigError("precomputed embedding '" + spec.name + "' must declare its dim");
  *out_dim = spec.dim;
  const std::string dir = spec.path;
  const std::size_t dim = spec.dim;
  const std::string name = spec.name;
  return [dir, dim, name](const dataset::BugRecord& bug) {
    const std::string file = (fs::path(dir) / (bug.bug_id + ".json")).string();
    if (!fs::exists(file))
      throw DanglingReference("no precomputed matrix for bug '" + bug.bug_id + "' under " + dir);
    const auto pm = wordvec::load_report_matrix(file);
    if (pm.matrix.dim != dim)
      throw DimensionMismatch("matrix for bug '" + bug.bug_id + "' has dim " +
                              std::to_string(pm.matrix.dim) + ", embedding '" + name +
                              "' expects " + std::to_string(dim));
    return wordvec::max_pool(pm.matrix).vec;
  };
}

struct CodeSide {
  codeast::CodeVectorizerParams params;
  // contexts per ast_ref, shared across bugs
  std::map<std::string, std::vector<codeast::PathContext>> contexts;
};

CodeSide build_code_side(const ExperimentConfig& config, const dataset::DatasetManifest& manifest,
                         const std::string& manifest_path) {
  if (manifest.ast_document.empty())
    throw DataError("manifest has no ast_document; method embeddings need ASTs");
  const std::string ast_path =
      resolve(fs::path(manifest_path).parent_path(), manifest.ast_document);
  const auto ast_doc = codeast::parse_ast_document(ast_path);
  dataset::cross_check_ast_refs(manifest, ast_doc);

  // Unique ast_refs in deterministic order.
  std::set<std::string> refs;
  for (const auto& [bug_id, methods] : manifest.methods_per_bug)
    for (const auto& m : methods) refs.insert(m.ast_ref);

  CodeSide side;
  std::vector<std::string> ref_list(refs.begin(), refs.end());
  std::vector<std::vector<codeast::PathContext>> extracted(ref_list.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < static_cast<long long>(ref_list.size()); ++i) {
    const auto& ref = ref_list[static_cast<std::size_t>(i)];
    codeast::ExtractionLimits limits = config.code_embedding.limits;
    limits.rng_seed = config.code_embedding.limits.rng_seed ^ fnv1a64(ref);
    extracted[static_cast<std::size_t>(i)] =
        codeast::extract_path_contexts(ast_doc.at(ref), limits);
  }
  for (std::size_t i = 0; i < ref_list.size(); ++i)
    side.contexts.emplace(ref_list[i], std::move(extracted[i]));

  if (config.code_embedding.mode == codeast::VectorizerMode::Hashed) {
    side.params = codeast::make_hashed_params();
  } else {
    std::set<std::string> tokens, paths;
    for (const auto& [ref, ctxs] : side.contexts) {
      for (const auto& c : ctxs) {
        tokens.insert(c.start_token);
        tokens.insert(c.end_token);
        paths.insert(c.path);
      }
    }
    side.params = codeast::make_attention_params(
        std::vector<std::string>(tokens.begin(), tokens.end()),
        std::vector<std::string>(paths.begin(), paths.end()), config.code_embedding.token_dim,
        config.code_embedding.path_dim, config.code_embedding.limits.rng_seed);
  }
  return side;
}

neural::LossSpec loss_for_strategy(const ExperimentConfig& config, Strategy strategy,
                                   const std::vector<imbalance::Instance>& train_set) {
  neural::LossSpec spec;
  spec.alpha = config.loss_alpha;
  spec.gamma = config.loss_gamma;
  switch (strategy) {
    case Strategy::Original:
    case Strategy::Ros:
    case Strategy::Rus:
      spec.kind = neural::LossKind::Bce;
      break;
    case Strategy::Wbe: {
      spec.kind = neural::LossKind::Wbce;
      const auto [w_neg, w_pos] = imbalance::class_weights_auto(train_set);
      spec.weight_neg = w_neg;
      spec.weight_pos = w_pos;
      break;
    }
    case Strategy::Focal:
      spec.kind = neural::LossKind::Focal;
      break;
  }
  return spec;
}

std::vector<neural::TrainInstance> to_train_instances(
    const std::vector<imbalance::Instance>& instances) {
  std::vector<neural::TrainInstance> out(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    out[i].report_vec = instances[i].report_vec;
    out[i].method_vec = instances[i].method_vec;
    out[i].label = instances[i].label;
  }
  return out;
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& config, const DatasetSpec& dataset_spec,
                          const EmbeddingSpec& embedding, Diagnostics* diag) {
  auto manifest = dataset::load_manifest(dataset_spec.manifest_path);
  manifest = dataset::apply_exclusion_rules(manifest, config.strict_dataset, diag);

  CodeSide code = build_code_side(config, manifest, dataset_spec.manifest_path);

  std::size_t report_dim = 0;
  const auto report_embedder = make_report_embedder(config, embedding, diag, &report_dim);

  std::map<std::string, Vector> method_vecs;  // by ast_ref
  {
    std::vector<const std::vector<codeast::PathContext>*> ordered;
    std::vector<std::string> refs;
    for (const auto& [ref, ctxs] : code.contexts) {
      refs.push_back(ref);
      ordered.push_back(&ctxs);
    }
    std::vector<std::vector<codeast::PathContext>> ctx_copies;
    ctx_copies.reserve(ordered.size());
    for (const auto* p : ordered) ctx_copies.push_back(*p);
    const auto embedded = codeast::embed_methods(code.params, ctx_copies, ExecMode::Parallel);
    for (std::size_t i = 0; i < refs.size(); ++i) {
      if (embedded[i].degenerate)
        warn_into(diag, "method AST '" + refs[i] + "' produced no path contexts");
      method_vecs.emplace(refs[i], embedded[i].vec);
    }
  }

  const auto method_embedder = [&method_vecs](const dataset::MethodRecord& m) {
    return method_vecs.at(m.ast_ref.empty() ? m.method_id : m.ast_ref);
  };

  const auto instances = dataset::build_instances(manifest, report_embedder, method_embedder, diag);

  PreparedData data;
  data.dataset_name = dataset_spec.name;
  data.embedding_name = embedding.name;
  data.report_dim = report_dim;
  data.split = evalkit::chronological_split(instances, evalkit::SplitMode::BugDisjoint, diag);

  if (config.code_embedding.joint_training &&
      config.code_embedding.mode == codeast::VectorizerMode::Attention) {
    JointData joint;
    joint.initial_params = code.params;
    // Rebuild per-instance context lists aligned with the split.
    std::map<std::pair<std::string, std::string>, const std::vector<codeast::PathContext>*>
        by_bug_method;
    for (const auto& [bug_id, methods] : manifest.methods_per_bug)
      for (const auto& m : methods)
        by_bug_method[{bug_id, m.method_id}] =
            &code.contexts.at(m.ast_ref.empty() ? m.method_id : m.ast_ref);
    const auto to_joint = [&](const std::vector<imbalance::Instance>& part) {
      std::vector<neural::JointInstance> out(part.size());
      for (std::size_t i = 0; i < part.size(); ++i) {
        out[i].report_vec = part[i].report_vec;
        out[i].contexts = *by_bug_method.at({part[i].bug_id, part[i].method_id});
        out[i].label = part[i].label;
      }
      return out;
    };
    joint.train = to_joint(data.split.train);
    joint.valid = to_joint(data.split.valid);
    joint.test = to_joint(data.split.test);
    data.joint = std::move(joint);
  }
  return data;
}

std::vector<evalkit::QueryResult> rank_split(const neural::Network& net,
                                             const std::vector<imbalance::Instance>& test,
                                             ExecMode mode) {
  std::map<std::string, std::vector<const imbalance::Instance*>> by_bug;
  for (const auto& inst : test) by_bug[inst.bug_id].push_back(&inst);

  std::vector<evalkit::QueryResult> results;
  for (const auto& [bug_id, insts] : by_bug) {
    std::vector<evalkit::Candidate> candidates;
    std::set<std::string> truth;
    candidates.reserve(insts.size());
    for (const auto* inst : insts) {
      candidates.push_back(evalkit::Candidate{inst->method_id, &inst->method_vec});
      if (inst->label == 1) truth.insert(inst->method_id);
    }
    auto qr = evalkit::rank_methods(net, insts.front()->report_vec, candidates, truth, mode);
    qr.bug_id = bug_id;
    results.push_back(std::move(qr));
  }
  return results;
}

CombinationOutcome run_combination(const ExperimentConfig& config, const PreparedData& data,
                                   Strategy strategy) {
  const std::uint64_t seed =
      combo_seed(config.seed, data.dataset_name, data.embedding_name, strategy_name(strategy));

  neural::TowerConfig report_cfg{neural::report_tower_dims(data.report_dim), config.activation};
  neural::TowerConfig method_cfg{neural::method_tower_dims(), config.activation};
  neural::Network initial = neural::make_network(report_cfg, method_cfg, seed ^ 0x97);

  neural::TrainConfig train_cfg = config.train;
  train_cfg.rng_seed = seed ^ 0x3c6e;

  imbalance::ResampleStrategy resample_strategy;
  resample_strategy.rng_seed = seed ^ 0x517c;
  resample_strategy.kind = strategy == Strategy::Ros   ? imbalance::ResampleKind::Ros
                           : strategy == Strategy::Rus ? imbalance::ResampleKind::Rus
                                                       : imbalance::ResampleKind::Original;

  const neural::LossSpec loss_spec = loss_for_strategy(config, strategy, data.split.train);

  CombinationOutcome outcome;

  if (data.joint.has_value()) {
    std::vector<int> labels(data.joint->train.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = data.joint->train[i].label;
    const auto indices = imbalance::resample_indices(labels, resample_strategy);
    std::vector<neural::JointInstance> train_set;
    train_set.reserve(indices.size());
    for (std::size_t i : indices) train_set.push_back(data.joint->train[i]);

    neural::JointModel model{std::move(initial), data.joint->initial_params};
    auto trained = neural::train_joint(model, train_set, data.joint->valid, loss_spec, train_cfg);
    outcome.history = std::move(trained.history);

    // Re-embed the test decile with the trained attention parameters.
    std::vector<imbalance::Instance> test = data.split.test;
    for (std::size_t i = 0; i < test.size(); ++i)
      test[i].method_vec =
          codeast::embed_method(trained.model.code_params, data.joint->test[i].contexts).vec;
    outcome.queries = rank_split(trained.model.net, test);
    outcome.net = std::move(trained.model.net);
  } else {
    const auto train_set = imbalance::resample(data.split.train, resample_strategy);
    auto trained = neural::train(initial, to_train_instances(train_set),
                                 to_train_instances(data.split.valid), loss_spec, train_cfg);
    outcome.history = std::move(trained.history);
    outcome.queries = rank_split(trained.net, data.split.test);
    outcome.net = std::move(trained.net);
  }

  outcome.metrics = evalkit::compute_metrics(outcome.queries, config.map_variant);
  return outcome;
}

nlohmann::json metrics_to_json(const evalkit::MetricsReport& metrics) {
  json accuracy;
  for (const auto& [k, v] : metrics.accuracy_at) accuracy[std::to_string(k)] = v;
  json per_query = json::array();
  for (const auto& q : metrics.per_query) {
    per_query.push_back(json{{"bug_id", q.bug_id},
                             {"ap", q.average_precision},
                             {"rr", q.reciprocal_rank},
                             {"first_rank", q.first_relevant_rank}});
  }
  return json{{"map", metrics.map_value},
              {"mrr", metrics.mrr_value},
              {"accuracy_at", std::move(accuracy)},
              {"per_query", std::move(per_query)}};
}

evalkit::MetricsReport metrics_from_json(const nlohmann::json& j) {
  evalkit::MetricsReport metrics;
  metrics.map_value = j.at("map").get<double>();
  metrics.mrr_value = j.at("mrr").get<double>();
  std::vector<std::pair<std::size_t, double>> acc;
  for (const auto& [k, v] : j.at("accuracy_at").items())
    acc.emplace_back(std::stoul(k), v.get<double>());
  std::sort(acc.begin(), acc.end());
  metrics.accuracy_at = std::move(acc);
  if (j.contains("per_query")) {
    for (const auto& q : j.at("per_query")) {
      evalkit::PerQuery pq;
      pq.bug_id = q.at("bug_id").get<std::string>();
      pq.average_precision = q.at("ap").get<double>();
      pq.reciprocal_rank = q.at("rr").get<double>();
      pq.first_relevant_rank = q.at("first_rank").get<std::size_t>();
      metrics.per_query.push_back(std::move(pq));
    }
  }
  return metrics;
}

std::string per_query_csv(const evalkit::MetricsReport& metrics) {
  std::string out = "bug_id,ap,rr,first_rank\n";
  char buf[96];
  for (const auto& q : metrics.per_query) {
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%zu\n", q.average_precision,
                  q.reciprocal_rank, q.first_relevant_rank);
    out += q.bug_id;
    out += buf;
  }
  return out;
}

std::map<std::string, MatrixResult> run_experiment_matrix(const ExperimentConfig& config,
                                                          Diagnostics* diag) {
  config.validate();
  fs::create_directories(config.output_dir);

  std::map<std::string, MatrixResult> results;

  for (const auto& dataset_spec : config.datasets) {
    const fs::path dataset_dir = fs::path(config.output_dir) / sanitize(dataset_spec.name);
    fs::create_directories(dataset_dir);

    MatrixResult matrix;
    for (const auto& e : config.embeddings) matrix.embeddings.push_back(e.name);
    for (const auto& s : config.strategies) matrix.strategies.push_back(strategy_name(s));

    // Prepare each embedding once; combinations share the split.
    std::vector<PreparedData> prepared;
    std::vector<std::string> prepare_errors(config.embeddings.size());
    prepared.reserve(config.embeddings.size());
    for (const auto& embedding : config.embeddings) {
      try {
        prepared.push_back(prepare_data(config, dataset_spec, embedding, diag));
      } catch (const Error& e) {
        prepared.push_back(PreparedData{});
        prepare_errors[prepared.size() - 1] = e.what();
      }
    }

    struct Cell {
      std::size_t embedding_index;
      Strategy strategy;
      evalkit::MetricsReport metrics;
      std::string error;
      bool ok = false;
    };
    std::vector<Cell> cells;
    for (std::size_t ei = 0; ei < config.embeddings.size(); ++ei)
      for (const auto strategy : config.strategies)
        cells.push_back(Cell{ei, strategy, {}, "", false});

    const int workers = static_cast<int>(std::max<std::size_t>(1, config.workers));
#pragma omp parallel for schedule(dynamic) num_threads(workers) if (workers > 1)
    for (long long ci = 0; ci < static_cast<long long>(cells.size()); ++ci) {
      Cell& cell = cells[static_cast<std::size_t>(ci)];
      const auto& embedding = config.embeddings[cell.embedding_index];
      if (!prepare_errors[cell.embedding_index].empty()) {
        cell.error = prepare_errors[cell.embedding_index];
      } else {
        try {
          const auto outcome =
              run_combination(config, prepared[cell.embedding_index], cell.strategy);
          cell.metrics = outcome.metrics;
          cell.ok = true;
        } catch (const std::exception& e) {
          cell.error = e.what();
        }
      }

      // Incremental write: a crash loses at most the in-flight combinations.
      json cell_doc;
      cell_doc["dataset"] = dataset_spec.name;
      cell_doc["embedding"] = embedding.name;
      cell_doc["strategy"] = strategy_name(cell.strategy);
      if (cell.ok) {
        cell_doc["metrics"] = metrics_to_json(cell.metrics);
      } else {
        cell_doc["error"] = cell.error;
      }
      const fs::path cell_path =
          dataset_dir / (sanitize(embedding.name) + "__" + strategy_name(cell.strategy) + ".json");
#pragma omp critical(bugloc_matrix_write)
      {
        std::ofstream out(cell_path);
        out << cell_doc.dump(2) << '\n';
      }
    }

    for (const auto& cell : cells) {
      const auto key = std::make_pair(config.embeddings[cell.embedding_index].name,
                                      std::string(strategy_name(cell.strategy)));
      if (cell.ok) {
        matrix.cells[key] = cell.metrics;
      } else {
        matrix.failures[key] = cell.error;
        warn_into(diag, "combination (" + dataset_spec.name + ", " + key.first + ", " +
                            key.second + ") failed: " + cell.error);
      }
    }

    json matrix_doc;
    matrix_doc["dataset"] = dataset_spec.name;
    matrix_doc["embeddings"] = matrix.embeddings;
    matrix_doc["strategies"] = matrix.strategies;
    json cells_doc = json::object();
    for (const auto& [key, metrics] : matrix.cells)
      cells_doc[key.first + "__" + key.second] = metrics_to_json(metrics);
    matrix_doc["cells"] = std::move(cells_doc);
    json failures_doc = json::object();
    for (const auto& [key, message] : matrix.failures)
      failures_doc[key.first + "__" + key.second] = message;
    matrix_doc["failures"] = std::move(failures_doc);
    {
      std::ofstream out(dataset_dir / "matrix.json");
      out << matrix_doc.dump(2) << '\n';
    }

    results.emplace(dataset_spec.name, std::move(matrix));
  }
  return results;
}

namespace {

double metric_value(const evalkit::MetricsReport& metrics, const std::string& name) {
  if (name == "MAP") return metrics.map_value;
  if (name == "MRR") return metrics.mrr_value;
  for (const auto& [k, v] : metrics.accuracy_at)
    if (name == "Accuracy@" + std::to_string(k)) return v;
  throw GridMismatch("metric '" + name + "' missing from a metrics report");
}

const std::vector<std::string>& table_metrics() {
  static const std::vector<std::string> names = {"MAP", "MRR", "Accuracy@1", "Accuracy@5",
                                                 "Accuracy@10"};
  return names;
}

}  // namespace

std::vector<CountTable> best_count_tables(const std::map<std::string, MatrixResult>& matrices) {
  if (matrices.empty()) throw GridMismatch("no matrix results to tabulate");

  const MatrixResult& first = matrices.begin()->second;
  for (const auto& [name, m] : matrices) {
    if (m.embeddings != first.embeddings || m.strategies != first.strategies)
      throw GridMismatch("matrix for dataset '" + name + "' has a different combination grid");
    for (const auto& e : m.embeddings)
      for (const auto& s : m.strategies)
        if (m.cells.find({e, s}) == m.cells.end())
          throw GridMismatch("dataset '" + name + "' is missing combination (" + e + ", " + s +
                             ")");
  }

  std::vector<std::string> dataset_names;
  for (const auto& [name, _] : matrices) dataset_names.push_back(name);

  std::vector<CountTable> tables;
  for (const auto& metric : table_metrics()) {
    CountTable embeddings_table;
    embeddings_table.metric = metric;
    embeddings_table.row_axis = "embedding";
    embeddings_table.row_names = first.embeddings;
    embeddings_table.dataset_names = dataset_names;
    embeddings_table.counts.assign(first.embeddings.size(),
                                   std::vector<std::size_t>(dataset_names.size(), 0));

    CountTable strategies_table;
    strategies_table.metric = metric;
    strategies_table.row_axis = "strategy";
    strategies_table.row_names = first.strategies;
    strategies_table.dataset_names = dataset_names;
    strategies_table.counts.assign(first.strategies.size(),
                                   std::vector<std::size_t>(dataset_names.size(), 0));

    std::size_t di = 0;
    for (const auto& [dataset_name, matrix] : matrices) {
      // Best embedding(s) per strategy; ties all count.
      for (const auto& strategy : first.strategies) {
        double best = -1.0;
        for (const auto& embedding : first.embeddings)
          best = std::max(best, metric_value(matrix.cells.at({embedding, strategy}), metric));
        for (std::size_t ei = 0; ei < first.embeddings.size(); ++ei)
          if (metric_value(matrix.cells.at({first.embeddings[ei], strategy}), metric) == best)
            ++embeddings_table.counts[ei][di];
      }
      // Best strategy(ies) per embedding.
      for (const auto& embedding : first.embeddings) {
        double best = -1.0;
        for (const auto& strategy : first.strategies)
          best = std::max(best, metric_value(matrix.cells.at({embedding, strategy}), metric));
        for (std::size_t si = 0; si < first.strategies.size(); ++si)
          if (metric_value(matrix.cells.at({embedding, first.strategies[si]}), metric) == best)
            ++strategies_table.counts[si][di];
      }
      ++di;
    }

    for (auto* table : {&embeddings_table, &strategies_table}) {
      table->totals.assign(table->row_names.size(), 0);
      for (std::size_t r = 0; r < table->row_names.size(); ++r)
        for (std::size_t c = 0; c < table->dataset_names.size(); ++c)
          table->totals[r] += table->counts[r][c];
    }

    tables.push_back(std::move(embeddings_table));
    tables.push_back(std::move(strategies_table));
  }
  return tables;
}

std::string render_table_text(const CountTable& table) {
  std::vector<std::string> header{table.row_axis};
  for (const auto& d : table.dataset_names) header.push_back(d);
  header.push_back("Total");

  std::vector<std::vector<std::string>> rows;
  for (std::size_t r = 0; r < table.row_names.size(); ++r) {
    std::vector<std::string> row{table.row_names[r]};
    for (std::size_t c = 0; c < table.dataset_names.size(); ++c)
      row.push_back(std::to_string(table.counts[r][c]));
    row.push_back(std::to_string(table.totals[r]));
    rows.push_back(std::move(row));
  }

  std::vector<std::size_t> widths(header.size(), 0);
  for (std::size_t c = 0; c < header.size(); ++c) {
    widths[c] = header[c].size();
    for (const auto& row : rows) widths[c] = std::max(widths[c], row[c].size());
  }

  std::ostringstream out;
  out << "Count of best " << table.metric << " per " << table.row_axis << "\n";
  const auto emit_row = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << (c == 0 ? "" : "  ");
      out << row[c];
      out << std::string(widths[c] - row[c].size(), ' ');
    }
    out << "\n";
  };
  emit_row(header);
  std::size_t total_width = 0;
  for (std::size_t c = 0; c < widths.size(); ++c) total_width += widths[c] + (c == 0 ? 0 : 2);
  out << std::string(total_width, '-') << "\n";
  for (const auto& row : rows) emit_row(row);
  return out.str();
}

std::string render_table_csv(const CountTable& table) {
  std::ostringstream out;
  out << "metric," << table.row_axis;
  for (const auto& d : table.dataset_names) out << ',' << d;
  out << ",total\n";
  for (std::size_t r = 0; r < table.row_names.size(); ++r) {
    out << table.metric << ',' << table.row_names[r];
    for (std::size_t c = 0; c < table.dataset_names.size(); ++c) out << ',' << table.counts[r][c];
    out << ',' << table.totals[r] << "\n";
  }
  return out.str();
}

std::map<std::string, MatrixResult> load_matrix_results(const std::string& out_dir,
                                                        const std::vector<std::string>& datasets) {
  std::map<std::string, MatrixResult> results;
  for (const auto& name : datasets) {
    const fs::path path = fs::path(out_dir) / sanitize(name) / "matrix.json";
    std::ifstream in(path);
    if (!in) throw DataError("cannot open matrix results: " + path.string());
    json doc;
    try {
      in >> doc;
    } catch (const json::exception& e) {
      throw ParseError("invalid JSON in " + path.string() + ": " + e.what());
    }
    MatrixResult matrix;
    try {
      matrix.embeddings = doc.at("embeddings").get<std::vector<std::string>>();
      matrix.strategies = doc.at("strategies").get<std::vector<std::string>>();
      for (const auto& e : matrix.embeddings) {
        for (const auto& s : matrix.strategies) {
          const std::string key = e + "__" + s;
          if (doc.at("cells").contains(key))
            matrix.cells[{e, s}] = metrics_from_json(doc.at("cells").at(key));
          else if (doc.at("failures").contains(key))
            matrix.failures[{e, s}] = doc.at("failures").at(key).get<std::string>();
        }
      }
    } catch (const json::exception& e) {
      throw ParseError("bad matrix schema in " + path.string() + ": " + e.what());
    }
    results.emplace(name, std::move(matrix));
  }
  return results;
}

}  // namespace bugloc::experiment
