#include "bugloc/codeast.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "bugloc/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bugloc::codeast {

namespace {

AstNode parse_node(const nlohmann::json& j, const std::string& node_path) {
  if (!j.is_object()) throw ParseError("AST node is not an object at " + node_path);
  AstNode node;
  try {
    node.kind = j.at("kind").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError("AST node missing 'kind' at " + node_path);
  }
  if (node.kind.empty()) throw InvariantViolation("empty node kind at " + node_path);

  const bool has_value = j.contains("value") && !j.at("value").is_null();
  if (has_value) node.value = j.at("value").get<std::string>();

  if (j.contains("children")) {
    const auto& kids = j.at("children");
    if (!kids.is_array()) throw ParseError("'children' is not an array at " + node_path);
    std::size_t i = 0;
    for (const auto& kid : kids) {
      node.children.push_back(parse_node(kid, node_path + ".children[" + std::to_string(i) + "]"));
      ++i;
    }
  }

  node.is_leaf = node.children.empty();
  if (node.is_leaf && !has_value)
    throw InvariantViolation("leaf node without a value at " + node_path);
  if (!node.is_leaf && has_value)
    throw InvariantViolation("node with children carries a value at " + node_path);
  return node;
}

void collect_leaves_rec(const AstNode& node, std::vector<const AstNode*>& out) {
  if (node.is_leaf) {
    out.push_back(&node);
    return;
  }
  for (const auto& child : node.children) collect_leaves_rec(child, out);
}

// Ancestor chains (root..parent) per leaf, in leaf order.
void collect_chains(const AstNode& node, std::vector<const AstNode*>& stack,
                    std::vector<const AstNode*>& leaves,
                    std::vector<std::vector<const AstNode*>>& chains) {
  if (node.is_leaf) {
    leaves.push_back(&node);
    chains.push_back(stack);
    return;
  }
  stack.push_back(&node);
  for (const auto& child : node.children) collect_chains(child, stack, leaves, chains);
  stack.pop_back();
}

Vector random_vector(Rng& rng, std::size_t dim, double scale) {
  Vector v(dim);
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return v;
}

const Vector& lookup(const std::unordered_map<std::string, Vector>& vocab,
                     const std::string& key, const Vector& unk) {
  const auto it = vocab.find(key);
  return it == vocab.end() ? unk : it->second;
}

struct AttentionForward {
  std::vector<Vector> inputs;      // concatenated [start; path; end] per context
  std::vector<Vector> encoded;     // tanh(W x) per context
  Vector weights;                  // softmax attention weights
  Vector output;
};

AttentionForward attention_forward(const CodeVectorizerParams& params,
                                   const std::vector<PathContext>& contexts) {
  AttentionForward fwd;
  const std::size_t n = contexts.size();
  fwd.inputs.reserve(n);
  fwd.encoded.reserve(n);

  Vector scores(n);
  for (std::size_t c = 0; c < n; ++c) {
    const auto& ctx = contexts[c];
    const Vector& start = lookup(params.token_vocab, ctx.start_token, params.unk_token);
    const Vector& path = lookup(params.path_vocab, ctx.path, params.unk_path);
    const Vector& end = lookup(params.token_vocab, ctx.end_token, params.unk_token);

    Vector x;
    x.reserve(2 * params.token_dim + params.path_dim);
    x.insert(x.end(), start.begin(), start.end());
    x.insert(x.end(), path.begin(), path.end());
    x.insert(x.end(), end.begin(), end.end());

    Vector e;
    matvec(params.combine_weights, x, e);
    for (auto& v : e) v = std::tanh(v);
    scores[c] = dot(params.attention_vector, e);

    fwd.inputs.push_back(std::move(x));
    fwd.encoded.push_back(std::move(e));
  }

  const double max_score = *std::max_element(scores.begin(), scores.end());
  double denom = 0.0;
  fwd.weights.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    fwd.weights[c] = std::exp(scores[c] - max_score);
    denom += fwd.weights[c];
  }
  for (auto& w : fwd.weights) w /= denom;

  fwd.output.assign(kMethodVectorDim, 0.0);
  for (std::size_t c = 0; c < n; ++c) axpy(fwd.weights[c], fwd.encoded[c], fwd.output);
  return fwd;
}

}  // namespace

std::map<std::string, AstNode> parse_ast_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open AST document: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("invalid JSON in " + path + ": " + e.what());
  }
  if (!doc.is_array()) throw ParseError("AST document must be a JSON array: " + path);

  std::map<std::string, AstNode> methods;
  std::size_t i = 0;
  for (const auto& entry : doc) {
    std::string method_id;
    try {
      method_id = entry.at("method_id").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw ParseError("entry " + std::to_string(i) + " missing 'method_id' in " + path);
    }
    if (!entry.contains("root"))
      throw ParseError("method '" + method_id + "' missing 'root' in " + path);
    AstNode root = parse_node(entry.at("root"), method_id + ".root");
    if (!methods.emplace(std::move(method_id), std::move(root)).second)
      throw DuplicateId("duplicate method_id '" + entry.at("method_id").get<std::string>() +
                        "' in " + path);
    ++i;
  }
  return methods;
}

std::vector<const AstNode*> collect_leaves(const AstNode& ast) {
  std::vector<const AstNode*> leaves;
  collect_leaves_rec(ast, leaves);
  return leaves;
}

std::vector<PathContext> extract_path_contexts(const AstNode& ast,
                                               const ExtractionLimits& limits) {
  std::vector<const AstNode*> stack, leaves;
  std::vector<std::vector<const AstNode*>> chains;
  collect_chains(ast, stack, leaves, chains);

  std::vector<PathContext> contexts;
  const std::size_t n = leaves.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j_max = std::min(n, i + limits.max_path_width + 1);
    for (std::size_t j = i + 1; j < j_max; ++j) {
      const auto& ci = chains[i];
      const auto& cj = chains[j];
      std::size_t common = 0;
      while (common < ci.size() && common < cj.size() && ci[common] == cj[common]) ++common;
      // common >= 1 always: the root is shared. LCA is chains[...][common-1].
      const std::size_t ups = ci.size() - (common - 1);    // parent(i)..LCA
      const std::size_t downs = cj.size() - common;        // below LCA..parent(j)
      if (ups + downs > limits.max_path_length) continue;

      std::string path;
      for (std::size_t u = ci.size(); u-- > common - 1;) {
        if (!path.empty()) path += "↑";
        path += ci[u]->kind;
      }
      for (std::size_t d = common; d < cj.size(); ++d) {
        path += "↓";
        path += cj[d]->kind;
      }
      contexts.push_back(PathContext{leaves[i]->value, std::move(path), leaves[j]->value});
    }
  }

  if (contexts.size() > limits.max_contexts) {
    Rng rng(limits.rng_seed);
    const auto keep = rng.sample_without_replacement(contexts.size(), limits.max_contexts);
    std::vector<PathContext> sampled;
    sampled.reserve(keep.size());
    for (std::size_t idx : keep) sampled.push_back(std::move(contexts[idx]));
    contexts = std::move(sampled);
  }
  return contexts;
}

CodeVectorizerParams make_hashed_params() {
  CodeVectorizerParams params;
  params.mode = VectorizerMode::Hashed;
  return params;
}

CodeVectorizerParams make_attention_params(const std::vector<std::string>& tokens,
                                           const std::vector<std::string>& paths,
                                           std::size_t token_dim, std::size_t path_dim,
                                           std::uint64_t seed) {
  CodeVectorizerParams params;
  params.mode = VectorizerMode::Attention;
  params.token_dim = token_dim;
  params.path_dim = path_dim;
  params.rng_seed = seed;

  Rng rng(seed);
  const double token_scale = 1.0 / std::sqrt(static_cast<double>(token_dim));
  const double path_scale = 1.0 / std::sqrt(static_cast<double>(path_dim));
  for (const auto& t : tokens) params.token_vocab.emplace(t, random_vector(rng, token_dim, token_scale));
  for (const auto& p : paths) params.path_vocab.emplace(p, random_vector(rng, path_dim, path_scale));
  params.unk_token = random_vector(rng, token_dim, token_scale);
  params.unk_path = random_vector(rng, path_dim, path_scale);

  const std::size_t in_dim = 2 * token_dim + path_dim;
  const double w_scale = std::sqrt(6.0 / static_cast<double>(in_dim + kMethodVectorDim));
  params.combine_weights = Matrix(kMethodVectorDim, in_dim);
  for (auto& w : params.combine_weights.a) w = rng.uniform(-w_scale, w_scale);
  params.attention_vector = random_vector(rng, kMethodVectorDim,
                                          1.0 / std::sqrt(static_cast<double>(kMethodVectorDim)));
  return params;
}

MethodEmbedding embed_method(const CodeVectorizerParams& params,
                             const std::vector<PathContext>& contexts) {
  MethodEmbedding out;
  out.vec.assign(kMethodVectorDim, 0.0);
  if (contexts.empty()) {
    out.degenerate = true;
    return out;
  }

  if (params.mode == VectorizerMode::Hashed) {
    for (const auto& ctx : contexts) {
      std::string key;
      key.reserve(ctx.start_token.size() + ctx.path.size() + ctx.end_token.size() + 2);
      key += ctx.start_token;
      key += '\x1f';
      key += ctx.path;
      key += '\x1f';
      key += ctx.end_token;
      const std::uint64_t h = fnv1a64(key);
      const std::size_t idx = static_cast<std::size_t>(h % kMethodVectorDim);
      out.vec[idx] += (h & 0x8000000000000000ULL) ? -1.0 : 1.0;
    }
    double norm = std::sqrt(dot(out.vec, out.vec));
    if (norm == 0.0) {
      out.degenerate = true;  // exact sign cancellation
      return out;
    }
    for (auto& v : out.vec) v /= norm;
    return out;
  }

  out.vec = attention_forward(params, contexts).output;
  return out;
}

AttentionGradients embed_method_backward(const CodeVectorizerParams& params,
                                         const std::vector<PathContext>& contexts,
                                         const Vector& upstream) {
  if (params.mode != VectorizerMode::Attention)
    throw InvariantViolation("embed_method_backward requires attention mode");
  if (upstream.size() != kMethodVectorDim)
    throw DimensionMismatch("upstream gradient must have method-vector dimension");

  AttentionGradients grads;
  grads.d_combine = Matrix(kMethodVectorDim, 2 * params.token_dim + params.path_dim);
  grads.d_attention.assign(kMethodVectorDim, 0.0);
  if (contexts.empty()) return grads;

  const AttentionForward fwd = attention_forward(params, contexts);
  const std::size_t n = contexts.size();

  // through the softmax-weighted sum
  Vector d_weight(n);
  for (std::size_t c = 0; c < n; ++c) d_weight[c] = dot(upstream, fwd.encoded[c]);
  double weighted_sum = 0.0;
  for (std::size_t c = 0; c < n; ++c) weighted_sum += fwd.weights[c] * d_weight[c];

  for (std::size_t c = 0; c < n; ++c) {
    const double d_score = fwd.weights[c] * (d_weight[c] - weighted_sum);

    Vector d_encoded(kMethodVectorDim);
    for (std::size_t k = 0; k < kMethodVectorDim; ++k)
      d_encoded[k] = fwd.weights[c] * upstream[k] + d_score * params.attention_vector[k];

    axpy(d_score, fwd.encoded[c], grads.d_attention);

    // through tanh
    Vector d_pre(kMethodVectorDim);
    for (std::size_t k = 0; k < kMethodVectorDim; ++k)
      d_pre[k] = d_encoded[k] * (1.0 - fwd.encoded[c][k] * fwd.encoded[c][k]);

    const Vector& x = fwd.inputs[c];
    for (std::size_t r = 0; r < kMethodVectorDim; ++r) {
      double* row = grads.d_combine.a.data() + r * grads.d_combine.cols;
      const double dr = d_pre[r];
      for (std::size_t col = 0; col < grads.d_combine.cols; ++col) row[col] += dr * x[col];
    }

    Vector d_input;
    matvec_transposed(params.combine_weights, d_pre, d_input);

    const auto& ctx = contexts[c];
    const auto token_key = [&](const std::string& tok) {
      return params.token_vocab.count(tok) ? tok : std::string();
    };
    const auto path_key = [&](const std::string& p) {
      return params.path_vocab.count(p) ? p : std::string();
    };

    auto accumulate = [](std::unordered_map<std::string, Vector>& sink, const std::string& key,
                         const double* begin, std::size_t len) {
      auto& slot = sink[key];
      if (slot.empty()) slot.assign(len, 0.0);
      for (std::size_t i = 0; i < len; ++i) slot[i] += begin[i];
    };

    accumulate(grads.d_tokens, token_key(ctx.start_token), d_input.data(), params.token_dim);
    accumulate(grads.d_paths, path_key(ctx.path), d_input.data() + params.token_dim,
               params.path_dim);
    accumulate(grads.d_tokens, token_key(ctx.end_token),
               d_input.data() + params.token_dim + params.path_dim, params.token_dim);
  }
  return grads;
}

std::vector<MethodEmbedding> embed_methods(const CodeVectorizerParams& params,
                                           const std::vector<std::vector<PathContext>>& contexts,
                                           ExecMode mode) {
  std::vector<MethodEmbedding> out(contexts.size());
  if (mode == ExecMode::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(contexts.size()); ++i)
      out[static_cast<std::size_t>(i)] = embed_method(params, contexts[static_cast<std::size_t>(i)]);
  } else {
    for (std::size_t i = 0; i < contexts.size(); ++i) out[i] = embed_method(params, contexts[i]);
  }
  return out;
}

}  // namespace bugloc::codeast
