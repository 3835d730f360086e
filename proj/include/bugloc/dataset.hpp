#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bugloc/codeast.hpp"
#include "bugloc/errors.hpp"
#include "bugloc/imbalance.hpp"
#include "bugloc/linalg.hpp"

namespace bugloc::dataset {

struct BugRecord {
  std::string bug_id;
  std::string title;
  std::string description;
  std::int64_t report_time = 0;
  std::vector<std::string> fix_commits;  // optional; >1 flags a multi-commit fix
};

struct MethodRecord {
  std::string method_id;
  std::string file;
  std::string name;
  std::size_t start_line = 0;
  std::size_t end_line = 0;
  std::string ast_ref;  // key into the AST document
};

struct DiffHunk {
  std::string file;
  std::set<std::size_t> changed_lines;  // 1-based lines in the buggy version
};

struct DatasetManifest {
  std::vector<BugRecord> bugs;
  std::map<std::string, std::vector<MethodRecord>> methods_per_bug;
  std::map<std::string, std::vector<DiffHunk>> hunks_per_bug;
  std::string ast_document;  // relative to the manifest's directory
};

struct LabelResult {
  std::set<std::string> buggy;  // method_ids overlapping a changed line
  std::set<std::pair<std::string, std::size_t>> orphan_lines;  // (file, line) hit no method
};

DatasetManifest load_manifest(const std::string& path);

// Every ast_ref must resolve in the AST document.
void cross_check_ast_refs(const DatasetManifest& manifest,
                          const std::map<std::string, codeast::AstNode>& ast_doc);

LabelResult label_buggy_methods(const std::vector<MethodRecord>& methods,
                                const std::vector<DiffHunk>& hunks);

// Flags bugs the study-style exclusion rules would drop (no buggy method,
// constructor-only fix, multi-commit fix). In strict mode those bugs are
// removed from the returned manifest; otherwise warnings only.
DatasetManifest apply_exclusion_rules(const DatasetManifest& manifest, bool strict,
                                      Diagnostics* diag);

using ReportEmbedder = std::function<Vector(const BugRecord&)>;
using MethodEmbedder = std::function<Vector(const MethodRecord&)>;

// One instance per (bug, roster method); method embeddings cached by ast_ref
// (falling back to method_id) so each method is embedded once.
std::vector<imbalance::Instance> build_instances(const DatasetManifest& manifest,
                                                 const ReportEmbedder& report_embedder,
                                                 const MethodEmbedder& method_embedder,
                                                 Diagnostics* diag = nullptr);

struct ManifestStats {
  std::size_t bug_count = 0;
  double mean_methods = 0.0;      // rounded to 2 decimals
  double mean_buggy_methods = 0.0;
};

ManifestStats summarize_manifest(const DatasetManifest& manifest);

}  // namespace bugloc::dataset
