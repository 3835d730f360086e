#pragma once

#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "bugloc/errors.hpp"
#include "bugloc/linalg.hpp"

namespace bugloc::codeast {

// Interior nodes carry a kind; leaves carry a kind plus the token text.
struct AstNode {
  std::string kind;
  std::string value;  // meaningful iff is_leaf
  bool is_leaf = false;
  std::vector<AstNode> children;
};

// (start token, syntactic path through the lowest common ancestor, end token)
struct PathContext {
  std::string start_token;
  std::string path;
  std::string end_token;
};

struct ExtractionLimits {
  std::size_t max_path_length = 8;  // interior nodes on the path, LCA included
  std::size_t max_path_width = 2;   // leaf-index distance
  std::size_t max_contexts = 200;
  std::uint64_t rng_seed = 0;
};

constexpr std::size_t kMethodVectorDim = 384;

enum class VectorizerMode { Attention, Hashed };

// Parameters of the attention aggregator. Immutable during ranking; the
// joint-training path updates them on a single thread.
struct CodeVectorizerParams {
  VectorizerMode mode = VectorizerMode::Attention;
  std::size_t token_dim = 0;
  std::size_t path_dim = 0;
  std::unordered_map<std::string, Vector> token_vocab;
  std::unordered_map<std::string, Vector> path_vocab;
  Vector unk_token;                  // fallback for out-of-vocabulary tokens
  Vector unk_path;
  Matrix combine_weights;            // kMethodVectorDim x (2*token_dim + path_dim)
  Vector attention_vector;           // kMethodVectorDim
  std::uint64_t rng_seed = 0;
};

struct MethodEmbedding {
  Vector vec;              // kMethodVectorDim components
  bool degenerate = false; // no contexts
};

// AST file: JSON array of {"method_id": ..., "root": node}. Validates the
// leaf/value invariant and reports the offending node path on failure.
std::map<std::string, AstNode> parse_ast_document(const std::string& path);

std::vector<const AstNode*> collect_leaves(const AstNode& ast);

std::vector<PathContext> extract_path_contexts(const AstNode& ast,
                                               const ExtractionLimits& limits);

CodeVectorizerParams make_hashed_params();

// Random-initialized attention parameters over the given vocabularies.
CodeVectorizerParams make_attention_params(const std::vector<std::string>& tokens,
                                           const std::vector<std::string>& paths,
                                           std::size_t token_dim, std::size_t path_dim,
                                           std::uint64_t seed);

MethodEmbedding embed_method(const CodeVectorizerParams& params,
                             const std::vector<PathContext>& contexts);

// Gradients of a scalar loss with respect to the attention parameters, given
// the gradient with respect to the method vector. Token/path gradients are
// sparse (keyed like the vocabularies, with "" standing for the UNK entry).
struct AttentionGradients {
  Matrix d_combine;
  Vector d_attention;
  std::unordered_map<std::string, Vector> d_tokens;
  std::unordered_map<std::string, Vector> d_paths;
};

AttentionGradients embed_method_backward(const CodeVectorizerParams& params,
                                         const std::vector<PathContext>& contexts,
                                         const Vector& upstream);

// Batch embedding; the parallel path fans methods out over OpenMP threads
// and produces results identical to the serial one.
std::vector<MethodEmbedding> embed_methods(const CodeVectorizerParams& params,
                                           const std::vector<std::vector<PathContext>>& contexts,
                                           ExecMode mode);

}  // namespace bugloc::codeast
