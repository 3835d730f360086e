#include "bugloc/textprep.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace bugloc::textprep {

namespace {

bool is_ascii_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }

char to_lower_ascii(char c) { return is_upper(c) ? static_cast<char>(c + 32) : c; }

std::string lowercase(const std::string& s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](char c) { return to_lower_ascii(c); });
  return out;
}

// --- Porter (1980) stemmer -------------------------------------------------
//
// Follows Martin Porter's reference algorithm including its two published
// departures from the paper (bli -> ble, logi -> log). Operates on a
// lowercase word in place.

bool porter_vowel_at(const std::string& w, std::size_t i) {
  switch (w[i]) {
    case 'a': case 'e': case 'i': case 'o': case 'u':
      return true;
    case 'y':
      // y counts as a vowel when it follows a consonant
      return i > 0 && !porter_vowel_at(w, i - 1);
    default:
      return false;
  }
}

// Number of vowel->consonant transitions in w[0, n): the Porter measure.
std::size_t porter_measure(const std::string& w, std::size_t n) {
  std::size_t m = 0;
  bool prev_vowel = false;
  for (std::size_t i = 0; i < n; ++i) {
    const bool v = porter_vowel_at(w, i);
    if (!v && prev_vowel) ++m;
    prev_vowel = v;
  }
  return m;
}

bool porter_has_vowel(const std::string& w, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (porter_vowel_at(w, i)) return true;
  return false;
}

// w[0, n) ends with a double consonant.
bool porter_double_consonant(const std::string& w, std::size_t n) {
  return n >= 2 && w[n - 1] == w[n - 2] && !porter_vowel_at(w, n - 1);
}

// w[0, n) ends consonant-vowel-consonant where the last consonant is not
// w, x or y (the *o condition).
bool porter_cvc(const std::string& w, std::size_t n) {
  if (n < 3) return false;
  if (porter_vowel_at(w, n - 3) || !porter_vowel_at(w, n - 2) || porter_vowel_at(w, n - 1))
    return false;
  const char c = w[n - 1];
  return c != 'w' && c != 'x' && c != 'y';
}

// Suffix may be as long as the word itself (empty stem).
bool porter_ends(const std::string& w, const char* suffix, std::size_t* stem_len) {
  const std::size_t sl = std::char_traits<char>::length(suffix);
  if (sl > w.size()) return false;
  if (w.compare(w.size() - sl, sl, suffix) != 0) return false;
  *stem_len = w.size() - sl;
  return true;
}

struct SuffixRule {
  const char* suffix;
  const char* replacement;
};

// Rules are ordered longest suffix first; the first textual match is the
// only candidate (a failed measure condition does not fall through).
const SuffixRule kStep2Rules[] = {
    {"ization", "ize"}, {"ational", "ate"}, {"iveness", "ive"},
    {"fulness", "ful"}, {"ousness", "ous"}, {"tional", "tion"},
    {"biliti", "ble"},  {"alism", "al"},    {"aliti", "al"},
    {"ation", "ate"},   {"entli", "ent"},   {"ousli", "ous"},
    {"iviti", "ive"},   {"anci", "ance"},   {"enci", "ence"},
    {"izer", "ize"},    {"alli", "al"},     {"ator", "ate"},
    {"logi", "log"},    {"eli", "e"},       {"bli", "ble"},
};

const SuffixRule kStep3Rules[] = {
    {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
    {"ical", "ic"},  {"ness", ""},  {"ful", ""},
};

const char* const kStep4Suffixes[] = {
    "ement", "ance", "ence", "able", "ible", "ment", "ant", "ent", "ism",
    "ate",   "iti",  "ous",  "ive",  "ize",  "ion",  "er",  "ic",  "ou",
    "al",
};

void porter_step1a(std::string& w) {
  std::size_t stem;
  if (w.back() != 's') return;
  if (porter_ends(w, "sses", &stem)) {
    w.erase(w.size() - 2);
  } else if (porter_ends(w, "ies", &stem)) {
    w.erase(w.size() - 2);
  } else if (w.size() >= 2 && w[w.size() - 2] != 's') {
    w.pop_back();
  }
}

void porter_step1b(std::string& w) {
  std::size_t stem;
  if (porter_ends(w, "eed", &stem)) {
    if (porter_measure(w, stem) > 0) w.pop_back();
    return;
  }
  bool stripped = false;
  if (porter_ends(w, "ed", &stem) && porter_has_vowel(w, stem)) {
    w.erase(stem);
    stripped = true;
  } else if (porter_ends(w, "ing", &stem) && porter_has_vowel(w, stem)) {
    w.erase(stem);
    stripped = true;
  }
  if (!stripped) return;

  if (porter_ends(w, "at", &stem) || porter_ends(w, "bl", &stem) ||
      porter_ends(w, "iz", &stem)) {
    w += 'e';
  } else if (porter_double_consonant(w, w.size())) {
    const char c = w.back();
    if (c != 'l' && c != 's' && c != 'z') w.pop_back();
  } else if (porter_measure(w, w.size()) == 1 && porter_cvc(w, w.size())) {
    w += 'e';
  }
}

void porter_step1c(std::string& w) {
  if (w.back() == 'y' && porter_has_vowel(w, w.size() - 1)) w.back() = 'i';
}

void porter_apply_rules(std::string& w, const SuffixRule* rules, std::size_t count,
                        std::size_t min_measure) {
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t stem;
    if (porter_ends(w, rules[i].suffix, &stem)) {
      if (porter_measure(w, stem) >= min_measure) {
        w.erase(stem);
        w += rules[i].replacement;
      }
      return;
    }
  }
}

void porter_step4(std::string& w) {
  for (const char* suffix : kStep4Suffixes) {
    std::size_t stem;
    if (!porter_ends(w, suffix, &stem)) continue;
    if (suffix[0] == 'i' && suffix[1] == 'o' && suffix[2] == 'n') {
      // -ion only counts when the stem ends in s or t
      if (stem == 0 || (w[stem - 1] != 's' && w[stem - 1] != 't')) continue;
    }
    if (porter_measure(w, stem) > 1) w.erase(stem);
    return;
  }
}

void porter_step5(std::string& w) {
  if (w.back() == 'e') {
    const std::size_t m = porter_measure(w, w.size() - 1);
    if (m > 1 || (m == 1 && !porter_cvc(w, w.size() - 1))) w.pop_back();
  }
  if (w.back() == 'l' && porter_double_consonant(w, w.size()) &&
      porter_measure(w, w.size()) > 1) {
    w.pop_back();
  }
}

std::string porter_stem(std::string w) {
  if (w.size() <= 2) return w;
  porter_step1a(w);
  porter_step1b(w);
  porter_step1c(w);
  porter_apply_rules(w, kStep2Rules, std::size(kStep2Rules), 1);
  porter_apply_rules(w, kStep3Rules, std::size(kStep3Rules), 1);
  porter_step4(w);
  porter_step5(w);
  return w;
}

// ---------------------------------------------------------------------------

// 174 common English stopwords. Mirrored in data/stopwords.txt; keep the two
// in sync when editing.
const char* const kDefaultStopwords[] = {
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you",
    "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself",
    "she", "her", "hers", "herself", "it", "its", "itself", "they", "them",
    "their", "theirs", "themselves", "what", "which", "who", "whom", "this",
    "that", "these", "those", "am", "is", "are", "was", "were", "be", "been",
    "being", "have", "has", "had", "having", "do", "does", "did", "doing",
    "a", "an", "the", "and", "but", "if", "or", "because", "as", "until",
    "while", "of", "at", "by", "for", "with", "about", "against", "between",
    "into", "through", "during", "before", "after", "above", "below", "to",
    "from", "up", "down", "in", "out", "on", "off", "over", "under", "again",
    "further", "then", "once", "here", "there", "when", "where", "why",
    "how", "all", "any", "both", "each", "few", "more", "most", "other",
    "some", "such", "no", "nor", "not", "only", "own", "same", "so", "than",
    "too", "very", "s", "t", "can", "will", "just", "don", "should", "now",
    "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "couldn", "didn",
    "doesn", "hadn", "hasn", "haven", "isn", "ma", "mightn", "mustn",
    "needn", "shan", "shouldn", "wasn", "weren", "won", "wouldn", "would",
    "could", "might", "must", "shall", "ought", "cannot", "onto", "upon",
    "via", "whether", "within", "without", "across", "behind", "beside",
    "besides", "beyond", "near", "toward", "towards",
};

}  // namespace

void PreprocessConfig::validate() const {
  if (min_token_len < 1) throw InvariantViolation("min_token_len must be >= 1");
  for (const auto& word : stopword_set) {
    if (word.empty()) throw InvariantViolation("stopword entries must be nonempty");
    for (char c : word) {
      if (std::isspace(static_cast<unsigned char>(c)))
        throw InvariantViolation("stopword contains whitespace: '" + word + "'");
      if (is_upper(c))
        throw InvariantViolation("stopword must be lowercase: '" + word + "'");
    }
  }
}

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words(std::begin(kDefaultStopwords),
                                           std::end(kDefaultStopwords));
  return words;
}

PreprocessConfig default_config() {
  PreprocessConfig config;
  config.stopword_set = default_stopwords();
  return config;
}

std::set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open stopword file: " + path);
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto begin = line.find_first_not_of(" \t");
    if (begin == std::string::npos || line[begin] == '#') continue;
    const auto end = line.find_last_not_of(" \t");
    words.insert(lowercase(line.substr(begin, end - begin + 1)));
  }
  return words;
}

std::vector<std::string> tokenize(const std::string& raw_text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : raw_text) {
    if (is_ascii_alpha(c)) {
      current += c;
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::string> split_compound(const std::string& token, bool keep_original) {
  // A fragment starts at 0, after a lower->upper boundary, or at the last
  // upper letter of an uppercase run followed by a lowercase letter
  // ("toHTMLString" -> to | HTML | String).
  std::vector<std::size_t> starts{0};
  for (std::size_t i = 1; i < token.size(); ++i) {
    if (is_lower(token[i - 1]) && is_upper(token[i])) {
      starts.push_back(i);
    } else if (i + 1 < token.size() && is_upper(token[i - 1]) && is_upper(token[i]) &&
               is_lower(token[i + 1])) {
      starts.push_back(i);
    }
  }
  if (starts.size() == 1) return {token};

  std::vector<std::string> out;
  if (keep_original) out.push_back(token);
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const std::size_t end = (i + 1 < starts.size()) ? starts[i + 1] : token.size();
    out.push_back(token.substr(starts[i], end - starts[i]));
  }
  return out;
}

std::string stem(const std::string& token) { return porter_stem(lowercase(token)); }

std::vector<std::string> preprocess_report(const std::string& raw_text,
                                           const PreprocessConfig& config) {
  config.validate();
  std::vector<std::string> out;
  for (const auto& raw_token : tokenize(raw_text)) {
    for (const auto& fragment : split_compound(raw_token, config.keep_compound_original)) {
      // Porter is not idempotent on every word (e.g. promise -> promis ->
      // promi), so iterate to a fixed point; the pipeline as a whole is then
      // idempotent. Converges in one or two rounds.
      std::string stemmed = stem(fragment);
      for (int round = 0; round < 8; ++round) {
        std::string again = porter_stem(stemmed);
        if (again == stemmed) break;
        stemmed = std::move(again);
      }
      if (stemmed.size() < config.min_token_len) continue;
      if (config.stopword_set.count(stemmed) > 0) continue;
      out.push_back(std::move(stemmed));
    }
  }
  return out;
}

}  // namespace bugloc::textprep
