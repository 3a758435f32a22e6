#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace snprex::text {

/// Splits on ASCII whitespace; every ASCII punctuation character becomes its own
/// token. Bytes >= 0x80 are word characters.
std::vector<std::string> tokenize(std::string_view text);

bool is_punctuation(std::string_view token);

/// Porter (1980) suffix-stripping stemmer, original rule set. Input is
/// lowercased first.
std::string porter_stem(std::string_view word);

/// Rule-based noun lemmatizer: irregular-form table plus the regular plural
/// detachment rules. No lexicon lookup.
std::string lemmatize(std::string_view word);

/// The 179-word English stopword list distributed with NLTK.
const std::set<std::string, std::less<>>& default_stopwords();

/// One token per line; blank lines and lines starting with '#' are skipped.
std::set<std::string, std::less<>> load_stopwords(const std::string& path);

std::string ascii_lower(std::string_view s);

}  // namespace snprex::text
