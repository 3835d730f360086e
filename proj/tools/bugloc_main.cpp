#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bugloc/codeast.hpp"
#include "bugloc/dataset.hpp"
#include "bugloc/errors.hpp"
#include "bugloc/evalkit.hpp"
#include "bugloc/experiment.hpp"
#include "bugloc/neural.hpp"
#include "bugloc/rng.hpp"
#include "bugloc/textprep.hpp"
#include "bugloc/wordvec.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

struct GlobalArgs {
  std::string config_path;
  std::string out_dir;
  bool has_seed = false;
  std::uint64_t seed = 0;
  bool strict_dataset = false;
  std::string map_variant;
};

std::string read_text_source(const std::string& text, const std::string& file) {
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw bugloc::DataError("cannot open input file: " + file);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  if (!text.empty()) return text;
  std::ostringstream ss;
  ss << std::cin.rdbuf();
  return ss.str();
}

void print_warnings(const bugloc::Diagnostics& diag) {
  for (const auto& w : diag.warnings) std::cerr << "warning: " << w << "\n";
}

bugloc::experiment::ExperimentConfig load_config_with_overrides(const GlobalArgs& args) {
  if (args.config_path.empty()) throw bugloc::ConfigError("--config is required");
  auto cfg = bugloc::experiment::load_config(args.config_path);
  if (args.has_seed) cfg.seed = args.seed;
  if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
  if (args.strict_dataset) cfg.strict_dataset = true;
  if (!args.map_variant.empty()) {
    if (args.map_variant == "standard") {
      cfg.map_variant = bugloc::evalkit::MapVariant::Standard;
    } else if (args.map_variant == "paper-literal") {
      cfg.map_variant = bugloc::evalkit::MapVariant::PaperLiteral;
    } else {
      throw bugloc::ConfigError("unknown map variant '" + args.map_variant + "'");
    }
  }
  return cfg;
}

const bugloc::experiment::DatasetSpec& pick_dataset(
    const bugloc::experiment::ExperimentConfig& cfg, const std::string& name) {
  if (name.empty()) return cfg.datasets.front();
  for (const auto& d : cfg.datasets)
    if (d.name == name) return d;
  throw bugloc::ConfigError("dataset '" + name + "' not found in config");
}

const bugloc::experiment::EmbeddingSpec& pick_embedding(
    const bugloc::experiment::ExperimentConfig& cfg, const std::string& name) {
  if (name.empty()) return cfg.embeddings.front();
  for (const auto& e : cfg.embeddings)
    if (e.name == name) return e;
  throw bugloc::ConfigError("embedding '" + name + "' not found in config");
}

json vector_to_json(const bugloc::Vector& v) {
  return json(v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Method-level bug localization engine"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs globals;
  app.add_option("--config", globals.config_path, "Experiment config file (JSON)");
  app.add_option("--out", globals.out_dir, "Override the config output directory");
  app.add_option("--seed", globals.seed, "Override the config seed")
      ->each([&](const std::string&) { globals.has_seed = true; });
  app.add_flag("--strict-dataset", globals.strict_dataset,
               "Drop bugs flagged by the exclusion rules");
  app.add_option("--map-variant", globals.map_variant, "standard | paper-literal");

  // ---- preprocess ----
  auto* preprocess_cmd = app.add_subcommand("preprocess", "Bug-report text to token list");
  std::string pp_text, pp_file, pp_stopwords;
  bool pp_no_keep = false;
  std::size_t pp_min_len = 1;
  preprocess_cmd->add_option("--text", pp_text, "Literal text (default: stdin)");
  preprocess_cmd->add_option("--file", pp_file, "Read text from a file");
  preprocess_cmd->add_option("--stopwords", pp_stopwords, "Stopword file (one word per line)");
  preprocess_cmd->add_flag("--no-keep-original", pp_no_keep,
                           "Drop the unsplit form of compound words");
  preprocess_cmd->add_option("--min-token-len", pp_min_len, "Minimum surviving token length");

  // ---- embed-report ----
  auto* embed_report_cmd = app.add_subcommand("embed-report", "Report text to pooled vector");
  std::string er_text, er_file, er_vectors, er_format = "headerless", er_matrix;
  embed_report_cmd->add_option("--text", er_text, "Literal text (default: stdin)");
  embed_report_cmd->add_option("--file", er_file, "Read text from a file");
  embed_report_cmd->add_option("--vectors", er_vectors, "Word-vector file");
  embed_report_cmd->add_option("--format", er_format, "headered | headerless");
  embed_report_cmd->add_option("--matrix", er_matrix, "Precomputed report-matrix JSON");

  // ---- embed-method ----
  auto* embed_method_cmd = app.add_subcommand("embed-method", "Method AST to 384-d vector");
  std::string em_ast, em_method, em_mode = "hashed";
  std::size_t em_token_dim = 64, em_path_dim = 64;
  std::size_t em_max_len = 8, em_max_width = 2, em_max_contexts = 200;
  std::uint64_t em_seed = 0;
  embed_method_cmd->add_option("--ast", em_ast, "AST document (JSON)")->required();
  embed_method_cmd->add_option("--method", em_method, "method_id inside the document")->required();
  embed_method_cmd->add_option("--mode", em_mode, "attention | hashed");
  embed_method_cmd->add_option("--token-dim", em_token_dim, "Attention token embedding width");
  embed_method_cmd->add_option("--path-dim", em_path_dim, "Attention path embedding width");
  embed_method_cmd->add_option("--max-path-length", em_max_len, "Interior nodes per path");
  embed_method_cmd->add_option("--max-path-width", em_max_width, "Leaf-index distance");
  embed_method_cmd->add_option("--max-contexts", em_max_contexts, "Context cap per method");
  embed_method_cmd->add_option("--extraction-seed", em_seed, "Seed for context sampling");

  // ---- label ----
  auto* label_cmd = app.add_subcommand("label", "Derive buggy-method labels from diff hunks");
  std::string label_manifest;
  label_cmd->add_option("--manifest", label_manifest, "Dataset manifest (JSON)")->required();

  // ---- split ----
  auto* split_cmd = app.add_subcommand("split", "Chronological 8/1/1 split of a manifest");
  std::string split_manifest;
  bool split_instance_level = false;
  split_cmd->add_option("--manifest", split_manifest, "Dataset manifest (JSON)")->required();
  split_cmd->add_flag("--instance-level", split_instance_level,
                      "Cut at raw instance deciles (leaks bugs across splits)");

  // ---- train / rank / evaluate ----
  auto* train_cmd = app.add_subcommand("train", "Train one (dataset, embedding, strategy) cell");
  std::string tr_dataset, tr_embedding, tr_strategy = "original";
  train_cmd->add_option("--dataset", tr_dataset, "Dataset name (default: first in config)");
  train_cmd->add_option("--embedding", tr_embedding, "Embedding name (default: first)");
  train_cmd->add_option("--strategy", tr_strategy, "original|ros|rus|wbe|focal");

  auto* rank_cmd = app.add_subcommand("rank", "Rank candidate methods for test-decile bugs");
  std::string rk_dataset, rk_embedding, rk_checkpoint, rk_bug;
  rank_cmd->add_option("--dataset", rk_dataset, "Dataset name");
  rank_cmd->add_option("--embedding", rk_embedding, "Embedding name");
  rank_cmd->add_option("--checkpoint", rk_checkpoint, "Model checkpoint")->required();
  rank_cmd->add_option("--bug", rk_bug, "Only this bug_id");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Metrics over the test decile");
  std::string ev_dataset, ev_embedding, ev_checkpoint;
  evaluate_cmd->add_option("--dataset", ev_dataset, "Dataset name");
  evaluate_cmd->add_option("--embedding", ev_embedding, "Embedding name");
  evaluate_cmd->add_option("--checkpoint", ev_checkpoint, "Model checkpoint")->required();

  // ---- matrix / tables ----
  auto* matrix_cmd = app.add_subcommand("matrix", "Run the embedding x strategy experiment grid");
  auto* tables_cmd = app.add_subcommand("tables", "Best-count tables from matrix results");
  std::string tb_from;
  tables_cmd->add_option("--from", tb_from, "Directory of matrix results (default: output dir)");

  CLI11_PARSE(app, argc, argv);

  try {
    bugloc::Diagnostics diag;

    if (preprocess_cmd->parsed()) {
      bugloc::textprep::PreprocessConfig config = bugloc::textprep::default_config();
      if (!pp_stopwords.empty())
        config.stopword_set = bugloc::textprep::load_stopwords(pp_stopwords);
      config.keep_compound_original = !pp_no_keep;
      config.min_token_len = pp_min_len;
      const auto tokens =
          bugloc::textprep::preprocess_report(read_text_source(pp_text, pp_file), config);
      for (std::size_t i = 0; i < tokens.size(); ++i)
        std::cout << (i == 0 ? "" : " ") << tokens[i];
      std::cout << "\n";
      return kExitOk;
    }

    if (embed_report_cmd->parsed()) {
      json out;
      if (!er_matrix.empty()) {
        const auto pm = bugloc::wordvec::load_report_matrix(er_matrix);
        const auto pooled = bugloc::wordvec::max_pool(pm.matrix);
        out = {{"report_id", pm.report_id},
               {"dim", pm.matrix.dim},
               {"vector", vector_to_json(pooled.vec)},
               {"degenerate", pooled.degenerate}};
      } else {
        if (er_vectors.empty())
          throw bugloc::ConfigError("embed-report needs --vectors or --matrix");
        const auto format = er_format == "headered"
                                ? bugloc::wordvec::VectorFileFormat::Headered
                                : bugloc::wordvec::VectorFileFormat::Headerless;
        const auto store = bugloc::wordvec::load_embeddings(er_vectors, format, &diag);
        const auto embedded = bugloc::wordvec::embed_report(
            store, read_text_source(er_text, er_file), bugloc::textprep::default_config());
        out = {{"dim", store.dim},
               {"vector", vector_to_json(embedded.vec)},
               {"oov_count", embedded.oov_count},
               {"degenerate", embedded.degenerate}};
      }
      print_warnings(diag);
      std::cout << out.dump(2) << "\n";
      return kExitOk;
    }

    if (embed_method_cmd->parsed()) {
      const auto ast_doc = bugloc::codeast::parse_ast_document(em_ast);
      const auto it = ast_doc.find(em_method);
      if (it == ast_doc.end())
        throw bugloc::DanglingReference("method '" + em_method + "' not in " + em_ast);

      bugloc::codeast::ExtractionLimits limits;
      limits.max_path_length = em_max_len;
      limits.max_path_width = em_max_width;
      limits.max_contexts = em_max_contexts;
      limits.rng_seed = em_seed;

      bugloc::codeast::CodeVectorizerParams params;
      if (em_mode == "hashed") {
        params = bugloc::codeast::make_hashed_params();
      } else if (em_mode == "attention") {
        std::set<std::string> tokens, paths;
        for (const auto& [id, root] : ast_doc) {
          bugloc::codeast::ExtractionLimits l = limits;
          l.rng_seed = limits.rng_seed ^ bugloc::fnv1a64(id);
          for (const auto& c : bugloc::codeast::extract_path_contexts(root, l)) {
            tokens.insert(c.start_token);
            tokens.insert(c.end_token);
            paths.insert(c.path);
          }
        }
        params = bugloc::codeast::make_attention_params(
            std::vector<std::string>(tokens.begin(), tokens.end()),
            std::vector<std::string>(paths.begin(), paths.end()), em_token_dim, em_path_dim,
            globals.has_seed ? globals.seed : 42);
      } else {
        throw bugloc::ConfigError("unknown mode '" + em_mode + "'");
      }

      bugloc::codeast::ExtractionLimits l = limits;
      l.rng_seed = limits.rng_seed ^ bugloc::fnv1a64(em_method);
      const auto contexts = bugloc::codeast::extract_path_contexts(it->second, l);
      const auto embedded = bugloc::codeast::embed_method(params, contexts);
      const json out = {{"method_id", em_method},
                        {"dim", bugloc::codeast::kMethodVectorDim},
                        {"context_count", contexts.size()},
                        {"vector", vector_to_json(embedded.vec)},
                        {"degenerate", embedded.degenerate}};
      std::cout << out.dump(2) << "\n";
      return kExitOk;
    }

    if (label_cmd->parsed()) {
      auto manifest = bugloc::dataset::load_manifest(label_manifest);
      manifest = bugloc::dataset::apply_exclusion_rules(manifest, globals.strict_dataset, &diag);
      json bugs = json::array();
      for (const auto& bug : manifest.bugs) {
        const auto methods_it = manifest.methods_per_bug.find(bug.bug_id);
        const auto hunks_it = manifest.hunks_per_bug.find(bug.bug_id);
        const auto labels = bugloc::dataset::label_buggy_methods(
            methods_it != manifest.methods_per_bug.end() ? methods_it->second
                                                         : std::vector<bugloc::dataset::MethodRecord>{},
            hunks_it != manifest.hunks_per_bug.end() ? hunks_it->second
                                                     : std::vector<bugloc::dataset::DiffHunk>{});
        json orphans = json::array();
        for (const auto& [file, line] : labels.orphan_lines)
          orphans.push_back({{"file", file}, {"line", line}});
        bugs.push_back({{"bug_id", bug.bug_id},
                        {"buggy", std::vector<std::string>(labels.buggy.begin(), labels.buggy.end())},
                        {"orphan_lines", std::move(orphans)}});
      }
      const auto stats = bugloc::dataset::summarize_manifest(manifest);
      const json out = {{"bugs", std::move(bugs)},
                        {"stats",
                         {{"bug_count", stats.bug_count},
                          {"mean_methods", stats.mean_methods},
                          {"mean_buggy_methods", stats.mean_buggy_methods}}}};
      print_warnings(diag);
      std::cout << out.dump(2) << "\n";
      return kExitOk;
    }

    if (split_cmd->parsed()) {
      const auto manifest = bugloc::dataset::load_manifest(split_manifest);
      // Labels suffice for splitting; embedding vectors are not needed.
      const auto instances = bugloc::dataset::build_instances(
          manifest, [](const bugloc::dataset::BugRecord&) { return bugloc::Vector{}; },
          [](const bugloc::dataset::MethodRecord&) { return bugloc::Vector{}; }, &diag);
      const auto split = bugloc::evalkit::chronological_split(
          instances,
          split_instance_level ? bugloc::evalkit::SplitMode::InstanceLevel
                               : bugloc::evalkit::SplitMode::BugDisjoint,
          &diag);
      const auto bug_list = [](const std::vector<bugloc::imbalance::Instance>& part) {
        std::vector<std::string> bugs;
        for (const auto& inst : part)
          if (bugs.empty() || bugs.back() != inst.bug_id) bugs.push_back(inst.bug_id);
        return bugs;
      };
      const json out = {{"train", bug_list(split.train)},
                        {"valid", bug_list(split.valid)},
                        {"test", bug_list(split.test)},
                        {"instance_counts",
                         {{"train", split.train.size()},
                          {"valid", split.valid.size()},
                          {"test", split.test.size()}}}};
      print_warnings(diag);
      std::cout << out.dump(2) << "\n";
      return kExitOk;
    }

    if (train_cmd->parsed()) {
      const auto cfg = load_config_with_overrides(globals);
      const auto& dataset_spec = pick_dataset(cfg, tr_dataset);
      const auto& embedding = pick_embedding(cfg, tr_embedding);
      const auto strategy = bugloc::experiment::strategy_from_name(tr_strategy);

      const auto data = bugloc::experiment::prepare_data(cfg, dataset_spec, embedding, &diag);
      const auto outcome = bugloc::experiment::run_combination(cfg, data, strategy);

      fs::create_directories(cfg.output_dir);
      const std::string checkpoint_path =
          (fs::path(cfg.output_dir) / ("checkpoint_" + dataset_spec.name + "_" + embedding.name +
                                       "_" + tr_strategy + ".json"))
              .string();
      bugloc::neural::save_checkpoint(outcome.net, checkpoint_path);

      json history = json::array();
      for (const auto& epoch : outcome.history)
        history.push_back({{"epoch", epoch.epoch},
                           {"train_loss", epoch.train_loss},
                           {"valid_loss", epoch.valid_loss}});
      std::ofstream hist_out(fs::path(cfg.output_dir) / ("history_" + dataset_spec.name + "_" +
                                                         embedding.name + "_" + tr_strategy +
                                                         ".json"));
      hist_out << history.dump(2) << "\n";

      print_warnings(diag);
      std::cout << "checkpoint: " << checkpoint_path << "\n";
      std::cout << "test metrics: " << bugloc::experiment::metrics_to_json(outcome.metrics).dump()
                << "\n";
      return kExitOk;
    }

    if (rank_cmd->parsed()) {
      const auto cfg = load_config_with_overrides(globals);
      const auto& dataset_spec = pick_dataset(cfg, rk_dataset);
      const auto& embedding = pick_embedding(cfg, rk_embedding);
      const auto net = bugloc::neural::load_checkpoint(rk_checkpoint);
      const auto data = bugloc::experiment::prepare_data(cfg, dataset_spec, embedding, &diag);

      auto queries = bugloc::experiment::rank_split(net, data.split.test);
      if (!rk_bug.empty()) {
        std::vector<bugloc::evalkit::QueryResult> filtered;
        for (auto& q : queries)
          if (q.bug_id == rk_bug) filtered.push_back(std::move(q));
        if (filtered.empty())
          throw bugloc::DataError("bug '" + rk_bug + "' is not in the test decile");
        queries = std::move(filtered);
      }

      print_warnings(diag);
      std::cout << "bug_id,rank,method_id,score,relevant\n";
      char buf[64];
      for (const auto& q : queries) {
        for (std::size_t i = 0; i < q.ranking.size(); ++i) {
          std::snprintf(buf, sizeof buf, "%.17g", q.ranking[i].score);
          std::cout << q.bug_id << ',' << (i + 1) << ',' << q.ranking[i].method_id << ',' << buf
                    << ',' << (q.ranking[i].relevant ? 1 : 0) << "\n";
        }
      }
      return kExitOk;
    }

    if (evaluate_cmd->parsed()) {
      const auto cfg = load_config_with_overrides(globals);
      const auto& dataset_spec = pick_dataset(cfg, ev_dataset);
      const auto& embedding = pick_embedding(cfg, ev_embedding);
      const auto net = bugloc::neural::load_checkpoint(ev_checkpoint);
      const auto data = bugloc::experiment::prepare_data(cfg, dataset_spec, embedding, &diag);

      const auto queries = bugloc::experiment::rank_split(net, data.split.test);
      const auto metrics = bugloc::evalkit::compute_metrics(queries, cfg.map_variant);

      fs::create_directories(cfg.output_dir);
      const json out = bugloc::experiment::metrics_to_json(metrics);
      {
        std::ofstream f(fs::path(cfg.output_dir) / ("metrics_" + dataset_spec.name + "_" +
                                                    embedding.name + ".json"));
        f << out.dump(2) << "\n";
      }
      {
        std::ofstream f(fs::path(cfg.output_dir) / ("per_query_" + dataset_spec.name + "_" +
                                                    embedding.name + ".csv"));
        f << bugloc::experiment::per_query_csv(metrics);
      }
      print_warnings(diag);
      std::cout << out.dump(2) << "\n";
      return kExitOk;
    }

    if (matrix_cmd->parsed()) {
      const auto cfg = load_config_with_overrides(globals);
      const auto results = bugloc::experiment::run_experiment_matrix(cfg, &diag);
      print_warnings(diag);
      for (const auto& [dataset_name, matrix] : results) {
        std::cout << dataset_name << ": " << matrix.cells.size() << " combinations ok, "
                  << matrix.failures.size() << " failed\n";
      }
      std::cout << "results under " << cfg.output_dir << "\n";
      return kExitOk;
    }

    if (tables_cmd->parsed()) {
      const auto cfg = load_config_with_overrides(globals);
      std::vector<std::string> dataset_names;
      for (const auto& d : cfg.datasets) dataset_names.push_back(d.name);
      const std::string from = tb_from.empty() ? cfg.output_dir : tb_from;
      const auto matrices = bugloc::experiment::load_matrix_results(from, dataset_names);
      const auto tables = bugloc::experiment::best_count_tables(matrices);

      std::string text, csv;
      for (const auto& table : tables) {
        text += bugloc::experiment::render_table_text(table) + "\n";
        csv += bugloc::experiment::render_table_csv(table);
      }
      fs::create_directories(cfg.output_dir);
      {
        std::ofstream f(fs::path(cfg.output_dir) / "best_count_tables.txt");
        f << text;
      }
      {
        std::ofstream f(fs::path(cfg.output_dir) / "best_count_tables.csv");
        f << csv;
      }
      print_warnings(diag);
      std::cout << text;
      return kExitOk;
    }

    throw bugloc::ConfigError("no subcommand given");
  } catch (const bugloc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const bugloc::DataError& e) {
    std::cerr << "dataset error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
