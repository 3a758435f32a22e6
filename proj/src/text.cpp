#include "snprex/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <span>

#include "snprex/errors.hpp"

namespace snprex::text {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_space(c)) {
      if (!current.empty()) tokens.push_back(std::move(current)), current.clear();
    } else if (is_punct(c)) {
      if (!current.empty()) tokens.push_back(std::move(current)), current.clear();
      tokens.emplace_back(1, ch);
    } else {
      current.push_back(ch);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

bool is_punctuation(std::string_view token) {
  return token.size() == 1 && is_punct(static_cast<unsigned char>(token[0]));
}

// ---------------------------------------------------------------------------
// Porter stemmer

namespace {

bool is_consonant(const std::string& w, std::size_t i) {
  switch (w[i]) {
    case 'a': case 'e': case 'i': case 'o': case 'u': return false;
    case 'y': return i == 0 ? true : !is_consonant(w, i - 1);
    default: return true;
  }
}

// m in [C](VC)^m[V]
int measure(const std::string& stem) {
  int m = 0;
  bool prev_vowel = false;
  for (std::size_t i = 0; i < stem.size(); ++i) {
    const bool cons = is_consonant(stem, i);
    if (cons && prev_vowel) ++m;
    prev_vowel = !cons;
  }
  return m;
}

bool contains_vowel(const std::string& stem) {
  for (std::size_t i = 0; i < stem.size(); ++i) {
    if (!is_consonant(stem, i)) return true;
  }
  return false;
}

bool ends_double_consonant(const std::string& w) {
  const std::size_t n = w.size();
  return n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1);
}

// *o: stem ends consonant-vowel-consonant, final consonant not w, x or y.
bool ends_cvc(const std::string& w) {
  const std::size_t n = w.size();
  return n >= 3 && is_consonant(w, n - 3) && !is_consonant(w, n - 2) && is_consonant(w, n - 1) &&
         w[n - 1] != 'w' && w[n - 1] != 'x' && w[n - 1] != 'y';
}

bool ends_with(const std::string& w, std::string_view suffix) {
  return w.size() >= suffix.size() && std::equal(suffix.rbegin(), suffix.rend(), w.rbegin());
}

struct Rule {
  std::string_view suffix;
  std::string_view replacement;
};

// Within one step only the first rule whose suffix matches is considered; if
// its condition fails the word is left unchanged.
std::string apply_first(const std::string& word, std::span<const Rule> rules,
                        const std::function<bool(const std::string&)>& condition) {
  for (const auto& r : rules) {
    if (!ends_with(word, r.suffix)) continue;
    const std::string stem = word.substr(0, word.size() - r.suffix.size());
    if (condition && !condition(stem)) return word;
    return stem + std::string(r.replacement);
  }
  return word;
}

std::string step1a(const std::string& w) {
  static constexpr std::array<Rule, 4> rules{{{"sses", "ss"}, {"ies", "i"}, {"ss", "ss"}, {"s", ""}}};
  return apply_first(w, rules, nullptr);
}

std::string step1b(const std::string& w) {
  if (ends_with(w, "eed")) {
    const std::string stem = w.substr(0, w.size() - 3);
    return measure(stem) > 0 ? stem + "ee" : w;
  }
  std::string stem;
  bool stripped = false;
  for (std::string_view suffix : {std::string_view("ed"), std::string_view("ing")}) {
    if (ends_with(w, suffix)) {
      stem = w.substr(0, w.size() - suffix.size());
      if (contains_vowel(stem)) {
        stripped = true;
        break;
      }
    }
  }
  if (!stripped) return w;

  if (ends_with(stem, "at") || ends_with(stem, "bl") || ends_with(stem, "iz")) return stem + "e";
  if (ends_double_consonant(stem)) {
    const char last = stem.back();
    if (last != 'l' && last != 's' && last != 'z') stem.pop_back();
    return stem;
  }
  if (measure(stem) == 1 && ends_cvc(stem)) return stem + "e";
  return stem;
}

std::string step1c(const std::string& w) {
  if (ends_with(w, "y")) {
    const std::string stem = w.substr(0, w.size() - 1);
    if (contains_vowel(stem)) return stem + "i";
  }
  return w;
}

std::string step2(const std::string& w) {
  static constexpr std::array<Rule, 20> rules{{
      {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"},   {"anci", "ance"},  {"izer", "ize"},
      {"abli", "able"},   {"alli", "al"},     {"entli", "ent"},   {"eli", "e"},      {"ousli", "ous"},
      {"ization", "ize"}, {"ation", "ate"},   {"ator", "ate"},    {"alism", "al"},   {"iveness", "ive"},
      {"fulness", "ful"}, {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},  {"biliti", "ble"},
  }};
  return apply_first(w, rules, [](const std::string& s) { return measure(s) > 0; });
}

std::string step3(const std::string& w) {
  static constexpr std::array<Rule, 7> rules{{
      {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"}, {"ical", "ic"}, {"ful", ""}, {"ness", ""},
  }};
  return apply_first(w, rules, [](const std::string& s) { return measure(s) > 0; });
}

std::string step4(const std::string& w) {
  static constexpr std::array<Rule, 19> rules{{
      {"al", ""},    {"ance", ""}, {"ence", ""}, {"er", ""},  {"ic", ""},  {"able", ""}, {"ible", ""},
      {"ant", ""},   {"ement", ""}, {"ment", ""}, {"ent", ""}, {"ion", ""}, {"ou", ""},   {"ism", ""},
      {"ate", ""},   {"iti", ""},  {"ous", ""},  {"ive", ""}, {"ize", ""},
  }};
  for (const auto& r : rules) {
    if (!ends_with(w, r.suffix)) continue;
    const std::string stem = w.substr(0, w.size() - r.suffix.size());
    bool ok = measure(stem) > 1;
    if (r.suffix == "ion") ok = ok && !stem.empty() && (stem.back() == 's' || stem.back() == 't');
    return ok ? stem : w;
  }
  return w;
}

std::string step5(std::string w) {
  if (ends_with(w, "e")) {
    const std::string stem = w.substr(0, w.size() - 1);
    const int m = measure(stem);
    if (m > 1 || (m == 1 && !ends_cvc(stem))) w = stem;
  }
  if (ends_with(w, "ll") && measure(w.substr(0, w.size() - 1)) > 1) w.pop_back();
  return w;
}

}  // namespace

std::string porter_stem(std::string_view word) {
  std::string w = ascii_lower(word);
  if (w.empty()) return w;
  w = step1a(w);
  w = step1b(w);
  w = step1c(w);
  w = step2(w);
  w = step3(w);
  w = step4(w);
  return step5(std::move(w));
}

// ---------------------------------------------------------------------------
// Lemmatizer

std::string lemmatize(std::string_view word) {
  static const std::map<std::string, std::string, std::less<>> irregular = {
      {"children", "child"},     {"men", "man"},           {"women", "woman"},       {"mice", "mouse"},
      {"feet", "foot"},          {"teeth", "tooth"},       {"geese", "goose"},       {"analyses", "analysis"},
      {"diagnoses", "diagnosis"}, {"hypotheses", "hypothesis"}, {"theses", "thesis"}, {"syntheses", "synthesis"},
      {"criteria", "criterion"}, {"phenomena", "phenomenon"}, {"loci", "locus"},     {"genera", "genus"},
      {"nuclei", "nucleus"},     {"foci", "focus"},        {"indices", "index"},     {"matrices", "matrix"},
      {"vertices", "vertex"},    {"appendices", "appendix"}, {"stimuli", "stimulus"}, {"bacteria", "bacterium"},
      {"data", "data"},          {"mitochondria", "mitochondrion"},
  };
  // Words that end like plurals but are not.
  static const std::set<std::string, std::less<>> invariant = {
      "species", "series", "means", "news", "diabetes", "herpes", "rabies", "measles", "mumps", "scabies",
      "rickets", "lens", "always", "perhaps", "whereas", "thus", "this", "has", "was", "does", "its",
      "gas", "bus", "yes", "sometimes", "various", "previous", "plus", "minus",
  };

  std::string w = ascii_lower(word);
  if (const auto it = irregular.find(w); it != irregular.end()) return it->second;
  if (invariant.contains(w) || w.size() < 4) return w;
  if (ends_with(w, "ies") && w.size() > 4) return w.substr(0, w.size() - 3) + "y";
  for (std::string_view s : {"sses", "shes", "ches", "xes", "zes"}) {
    if (ends_with(w, s)) return w.substr(0, w.size() - 2);
  }
  if (ends_with(w, "ss") || ends_with(w, "us") || ends_with(w, "is")) return w;
  if (ends_with(w, "s")) return w.substr(0, w.size() - 1);
  return w;
}

// ---------------------------------------------------------------------------
// Stopwords

const std::set<std::string, std::less<>>& default_stopwords() {
  static const std::set<std::string, std::less<>> words = {
      "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've", "you'll", "you'd",
      "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself", "she", "she's", "her", "hers",
      "herself", "it", "it's", "its", "itself", "they", "them", "their", "theirs", "themselves", "what", "which",
      "who", "whom", "this", "that", "that'll", "these", "those", "am", "is", "are", "was", "were", "be", "been",
      "being", "have", "has", "had", "having", "do", "does", "did", "doing", "a", "an", "the", "and", "but", "if",
      "or", "because", "as", "until", "while", "of", "at", "by", "for", "with", "about", "against", "between",
      "into", "through", "during", "before", "after", "above", "below", "to", "from", "up", "down", "in", "out",
      "on", "off", "over", "under", "again", "further", "then", "once", "here", "there", "when", "where", "why",
      "how", "all", "any", "both", "each", "few", "more", "most", "other", "some", "such", "no", "nor", "not",
      "only", "own", "same", "so", "than", "too", "very", "s", "t", "can", "will", "just", "don", "don't",
      "should", "should've", "now", "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "aren't", "couldn",
      "couldn't", "didn", "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn", "hasn't", "haven", "haven't",
      "isn", "isn't", "ma", "mightn", "mightn't", "mustn", "mustn't", "needn", "needn't", "shan", "shan't",
      "shouldn", "shouldn't", "wasn", "wasn't", "weren", "weren't", "won", "won't", "wouldn", "wouldn't",
  };
  return words;
}

std::set<std::string, std::less<>> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingPath("cannot open stopword list " + path);
  std::set<std::string, std::less<>> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    words.insert(line.substr(start));
  }
  return words;
}

}  // namespace snprex::text
