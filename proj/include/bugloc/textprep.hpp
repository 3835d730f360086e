#pragma once

#include <set>
#include <string>
#include <vector>

#include "bugloc/errors.hpp"

namespace bugloc::textprep {

struct PreprocessConfig {
  std::set<std::string> stopword_set;
  bool keep_compound_original = true;
  std::size_t min_token_len = 1;

  // Throws InvariantViolation on malformed stopwords or min_token_len == 0.
  void validate() const;
};

// The pinned default English stopword list (also shipped as data/stopwords.txt).
const std::set<std::string>& default_stopwords();

PreprocessConfig default_config();

// Parses a stopword file: UTF-8, one word per line, '#' starts a comment line.
std::set<std::string> load_stopwords(const std::string& path);

// Maximal runs of alphabetic characters; everything else separates and is
// dropped. Case is preserved.
std::vector<std::string> tokenize(const std::string& raw_text);

// Splits camelCase and ACRONYMTail boundaries. If a split happened and
// keep_original is set, the unsplit token is emitted first.
std::vector<std::string> split_compound(const std::string& token, bool keep_original);

// Porter (1980) stem of the lowercased token. Words of length <= 2 are
// returned lowercased but otherwise unchanged.
std::string stem(const std::string& token);

// tokenize -> split_compound -> stem -> lowercase -> stopword/length filter.
// Stemming is applied to a fixed point so the whole pipeline is idempotent.
std::vector<std::string> preprocess_report(const std::string& raw_text,
                                           const PreprocessConfig& config);

}  // namespace bugloc::textprep
