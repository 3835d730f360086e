#include "bugloc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

namespace bugloc::dataset {

namespace {

using nlohmann::json;

MethodRecord parse_method(const json& j, const std::string& bug_id) {
  MethodRecord m;
  try {
    m.method_id = j.at("method_id").get<std::string>();
    m.file = j.at("file").get<std::string>();
    m.name = j.at("name").get<std::string>();
    const auto start = j.at("start_line").get<long long>();
    const auto end = j.at("end_line").get<long long>();
    if (start < 1 || end < 1)
      throw ParseError("line numbers must be positive for method '" + m.method_id + "'");
    m.start_line = static_cast<std::size_t>(start);
    m.end_line = static_cast<std::size_t>(end);
    if (m.start_line > m.end_line)
      throw InvariantViolation("start_line > end_line for method '" + m.method_id + "'");
    m.ast_ref = j.value("ast_ref", m.method_id);
  } catch (const json::exception& e) {
    throw ParseError("bad method record under bug '" + bug_id + "': " + e.what());
  }
  return m;
}

DiffHunk parse_hunk(const json& j, const std::string& bug_id) {
  DiffHunk h;
  try {
    h.file = j.at("file").get<std::string>();
    for (const auto& line : j.at("changed_lines")) {
      const auto v = line.get<long long>();
      if (v < 1) throw ParseError("changed line must be positive under bug '" + bug_id + "'");
      h.changed_lines.insert(static_cast<std::size_t>(v));
    }
  } catch (const json::exception& e) {
    throw ParseError("bad hunk under bug '" + bug_id + "': " + e.what());
  }
  if (h.changed_lines.empty())
    throw InvariantViolation("hunk with empty changed_lines under bug '" + bug_id + "'");
  return h;
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open manifest: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("invalid JSON in " + path + ": " + e.what());
  }

  DatasetManifest manifest;
  std::set<std::string> seen;
  try {
    for (const auto& j : doc.at("bugs")) {
      BugRecord bug;
      bug.bug_id = j.at("bug_id").get<std::string>();
      bug.title = j.value("title", "");
      bug.description = j.value("description", "");
      bug.report_time = j.at("report_time_epoch").get<std::int64_t>();
      if (j.contains("fix_commits"))
        bug.fix_commits = j.at("fix_commits").get<std::vector<std::string>>();
      if (!seen.insert(bug.bug_id).second)
        throw DuplicateId("duplicate bug_id '" + bug.bug_id + "' in " + path);
      manifest.bugs.push_back(std::move(bug));
    }

    if (doc.contains("methods")) {
      for (const auto& [bug_id, list] : doc.at("methods").items()) {
        if (seen.count(bug_id) == 0)
          throw ParseError("methods entry for unknown bug_id '" + bug_id + "' in " + path);
        std::set<std::string> method_ids;
        for (const auto& j : list) {
          MethodRecord m = parse_method(j, bug_id);
          if (!method_ids.insert(m.method_id).second)
            throw DuplicateId("duplicate method_id '" + m.method_id + "' under bug '" +
                              bug_id + "'");
          manifest.methods_per_bug[bug_id].push_back(std::move(m));
        }
      }
    }

    if (doc.contains("hunks")) {
      for (const auto& [bug_id, list] : doc.at("hunks").items()) {
        if (seen.count(bug_id) == 0)
          throw ParseError("hunks entry for unknown bug_id '" + bug_id + "' in " + path);
        for (const auto& j : list)
          manifest.hunks_per_bug[bug_id].push_back(parse_hunk(j, bug_id));
      }
    }

    manifest.ast_document = doc.value("ast_document", "");
  } catch (const json::exception& e) {
    throw ParseError("bad manifest schema in " + path + ": " + e.what());
  }
  return manifest;
}

void cross_check_ast_refs(const DatasetManifest& manifest,
                          const std::map<std::string, codeast::AstNode>& ast_doc) {
  for (const auto& [bug_id, methods] : manifest.methods_per_bug) {
    for (const auto& m : methods) {
      if (ast_doc.count(m.ast_ref) == 0)
        throw DanglingReference("method '" + m.method_id + "' of bug '" + bug_id +
                                "' references missing AST '" + m.ast_ref + "'");
    }
  }
}

LabelResult label_buggy_methods(const std::vector<MethodRecord>& methods,
                                const std::vector<DiffHunk>& hunks) {
  LabelResult result;
  for (const auto& hunk : hunks) {
    for (std::size_t line : hunk.changed_lines) {
      bool matched = false;
      for (const auto& m : methods) {
        if (m.file == hunk.file && line >= m.start_line && line <= m.end_line) {
          result.buggy.insert(m.method_id);
          matched = true;
        }
      }
      if (!matched) result.orphan_lines.emplace(hunk.file, line);
    }
  }
  return result;
}

DatasetManifest apply_exclusion_rules(const DatasetManifest& manifest, bool strict,
                                      Diagnostics* diag) {
  DatasetManifest out;
  out.ast_document = manifest.ast_document;

  for (const auto& bug : manifest.bugs) {
    const auto methods_it = manifest.methods_per_bug.find(bug.bug_id);
    const auto hunks_it = manifest.hunks_per_bug.find(bug.bug_id);
    const auto& methods = methods_it != manifest.methods_per_bug.end()
                              ? methods_it->second
                              : std::vector<MethodRecord>{};
    const auto& hunks = hunks_it != manifest.hunks_per_bug.end() ? hunks_it->second
                                                                 : std::vector<DiffHunk>{};

    std::vector<std::string> flags;
    if (bug.fix_commits.size() > 1)
      flags.push_back("fix spans " + std::to_string(bug.fix_commits.size()) + " commits");

    const LabelResult labels = label_buggy_methods(methods, hunks);
    for (const auto& [file, line] : labels.orphan_lines)
      warn_into(diag, "bug '" + bug.bug_id + "': changed line " + file + ":" +
                          std::to_string(line) + " falls outside every method");

    if (hunks.empty()) {
      flags.push_back("no diff hunks");
    } else if (labels.buggy.empty()) {
      flags.push_back("no buggy method (fix is add-only or outside methods)");
    } else {
      const bool all_ctor = std::all_of(
          labels.buggy.begin(), labels.buggy.end(), [&](const std::string& id) {
            for (const auto& m : methods)
              if (m.method_id == id) return m.name == "<init>";
            return false;
          });
      if (all_ctor) flags.push_back("all buggy methods are constructors");
    }

    if (!flags.empty()) {
      std::string joined;
      for (const auto& f : flags) {
        if (!joined.empty()) joined += "; ";
        joined += f;
      }
      warn_into(diag, "bug '" + bug.bug_id + "': " + joined +
                          (strict ? " -- dropped (strict mode)" : ""));
      if (strict) continue;
    }

    out.bugs.push_back(bug);
    if (methods_it != manifest.methods_per_bug.end())
      out.methods_per_bug[bug.bug_id] = methods_it->second;
    if (hunks_it != manifest.hunks_per_bug.end())
      out.hunks_per_bug[bug.bug_id] = hunks_it->second;
  }
  return out;
}

std::vector<imbalance::Instance> build_instances(const DatasetManifest& manifest,
                                                 const ReportEmbedder& report_embedder,
                                                 const MethodEmbedder& method_embedder,
                                                 Diagnostics* diag) {
  std::vector<imbalance::Instance> instances;
  std::unordered_map<std::string, Vector> method_cache;

  for (const auto& bug : manifest.bugs) {
    const auto methods_it = manifest.methods_per_bug.find(bug.bug_id);
    if (methods_it == manifest.methods_per_bug.end() || methods_it->second.empty()) {
      warn_into(diag, "bug '" + bug.bug_id + "' has no candidate methods");
      continue;
    }
    const auto hunks_it = manifest.hunks_per_bug.find(bug.bug_id);
    const LabelResult labels = label_buggy_methods(
        methods_it->second,
        hunks_it != manifest.hunks_per_bug.end() ? hunks_it->second : std::vector<DiffHunk>{});
    for (const auto& [file, line] : labels.orphan_lines)
      warn_into(diag, "bug '" + bug.bug_id + "': changed line " + file + ":" +
                          std::to_string(line) + " falls outside every method");

    Vector report_vec;
    try {
      report_vec = report_embedder(bug);
    } catch (const Error& e) {
      throw DataError("embedding report for bug '" + bug.bug_id + "': " + e.what());
    }

    for (const auto& m : methods_it->second) {
      const std::string& cache_key = m.ast_ref.empty() ? m.method_id : m.ast_ref;
      auto cached = method_cache.find(cache_key);
      if (cached == method_cache.end()) {
        try {
          cached = method_cache.emplace(cache_key, method_embedder(m)).first;
        } catch (const Error& e) {
          throw DataError("embedding method '" + m.method_id + "' of bug '" + bug.bug_id +
                          "': " + e.what());
        }
      }
      imbalance::Instance inst;
      inst.report_vec = report_vec;
      inst.method_vec = cached->second;
      inst.label = labels.buggy.count(m.method_id) > 0 ? 1 : 0;
      inst.bug_id = bug.bug_id;
      inst.method_id = m.method_id;
      inst.report_time = bug.report_time;
      instances.push_back(std::move(inst));
    }
  }
  return instances;
}

ManifestStats summarize_manifest(const DatasetManifest& manifest) {
  ManifestStats stats;
  stats.bug_count = manifest.bugs.size();
  if (stats.bug_count == 0) return stats;

  std::size_t total_methods = 0;
  std::size_t total_buggy = 0;
  for (const auto& bug : manifest.bugs) {
    const auto methods_it = manifest.methods_per_bug.find(bug.bug_id);
    const auto hunks_it = manifest.hunks_per_bug.find(bug.bug_id);
    const auto& methods = methods_it != manifest.methods_per_bug.end()
                              ? methods_it->second
                              : std::vector<MethodRecord>{};
    total_methods += methods.size();
    if (hunks_it != manifest.hunks_per_bug.end())
      total_buggy += label_buggy_methods(methods, hunks_it->second).buggy.size();
  }

  const auto round2 = [](std::size_t numerator, std::size_t denominator) {
    return static_cast<double>(std::llround(100.0L * static_cast<long double>(numerator) /
                                            static_cast<long double>(denominator))) /
           100.0;
  };
  stats.mean_methods = round2(total_methods, stats.bug_count);
  stats.mean_buggy_methods = round2(total_buggy, stats.bug_count);
  return stats;
}

}  // namespace bugloc::dataset
