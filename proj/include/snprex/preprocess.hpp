#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "snprex/corpus.hpp"
#include "snprex/text.hpp"

namespace snprex {

enum class MarkerScheme { WrapMarkers, None };
enum class Level { Sentence, Abstract };
/// Unit in which max_len is counted. Token ids are always padded to max_len.
enum class LengthUnit { Tokens, Characters };

std::string_view to_string(MarkerScheme s);
std::string_view to_string(Level l);
std::string_view to_string(LengthUnit u);
std::optional<MarkerScheme> parse_marker_scheme(std::string_view s);
std::optional<Level> parse_level(std::string_view s);
std::optional<LengthUnit> parse_length_unit(std::string_view s);

inline constexpr std::string_view kSnpOpen = "[S1]";
inline constexpr std::string_view kSnpClose = "[/S1]";
inline constexpr std::string_view kPhenoOpen = "[P1]";
inline constexpr std::string_view kPhenoClose = "[/P1]";
bool is_marker(std::string_view token);

struct TextSegment {
  std::string text;
  bool is_marker = false;
};
/// Splits text around occurrences of the four marker strings.
std::vector<TextSegment> split_on_markers(std::string_view text);

struct PreprocessConfig {
  bool lowercase = true;
  bool remove_stopwords = true;
  bool stem = true;
  bool lemmatize = false;
  std::set<std::string, std::less<>> stopword_list = text::default_stopwords();
  MarkerScheme marker_scheme = MarkerScheme::WrapMarkers;
  LengthUnit length_unit = LengthUnit::Tokens;
  /// Subword tokenizers ignore the normalization steps above unless this is set.
  bool normalize_before_subword = false;

  /// Defaults with the built-in stopword list.
  static PreprocessConfig standard();
  /// Every normalization step off; tokenization only.
  static PreprocessConfig raw();
  /// Throws ConfigMismatch when stem and lemmatize are both set.
  void validate() const;
};

struct TokenizedInstance {
  std::string candidate_ref;
  Level level = Level::Sentence;
  std::vector<std::string> tokens;
  std::vector<std::int32_t> token_ids;  // length max_len
  std::size_t true_length = 0;
  int class_id = 0;
  std::string document_ref;

  std::size_t max_len() const { return token_ids.size(); }
  bool operator==(const TokenizedInstance&) const = default;
};

/// Tokenization, lowercasing, stopword removal, then Porter stemming or
/// lemmatization, each step only when enabled.
std::vector<std::string> normalize_text(std::string_view text, const PreprocessConfig& cfg);

/// Inserts the reserved marker tokens around the pair's mentions. Throws
/// OverlappingMentions when the spans overlap and UnknownPair when the pair's
/// mentions are not in `sentence`.
std::string mark_entities(const Sentence& sentence, const CandidatePair& pair, MarkerScheme scheme);
std::string mark_entities(std::string_view sentence_text, const EntityMention& snp, const EntityMention& pheno,
                          MarkerScheme scheme);

/// POSITIVE -> 1, NEGATIVE / NEUTRAL -> 0.
int encode_labels(Label label);

/// Maps a marked text to tokens and tokens to ids. Word-level and subword
/// tokenizers implement this; markers always stay single tokens.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::string> tokenize(std::string_view marked_text, const PreprocessConfig& cfg) const = 0;
  virtual std::int32_t id_of(std::string_view token) const = 0;
  virtual std::int32_t pad_id() const = 0;
  /// Tokens wrapped around every instance ([CLS] / [SEP] for BERT-style models).
  virtual std::vector<std::string> prefix() const { return {}; }
  virtual std::vector<std::string> suffix() const { return {}; }
};

/// Word-level vocabulary: [PAD]=0, [UNK]=1, then the four markers, then corpus
/// tokens by descending frequency (ties lexicographic).
class Vocabulary : public Tokenizer {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;

  Vocabulary();

  /// Counts normalized tokens over every sentence of `corpus`.
  static Vocabulary build(const Corpus& corpus, const PreprocessConfig& cfg, std::size_t min_count = 1);
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::vector<std::string> tokenize(std::string_view marked_text, const PreprocessConfig& cfg) const override;
  std::int32_t id_of(std::string_view token) const override;
  std::int32_t pad_id() const override { return kPad; }

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::int32_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  void add(const std::string& token);

  std::vector<std::string> tokens_;
  std::map<std::string, std::int32_t, std::less<>> ids_;
};

/// Builds the model input for one candidate. `max_len` must be at least 8.
/// Throws UnknownPair when the candidate is not in the corpus.
TokenizedInstance build_instance(const CandidatePair& pair, const Corpus& corpus, Level level, std::size_t max_len,
                                 const PreprocessConfig& cfg, const Tokenizer& tokenizer);

TokenizedInstance build_instance(const Corpus& corpus, const CandidateLocation& where, Level level,
                                 std::size_t max_len, const PreprocessConfig& cfg, const Tokenizer& tokenizer);

/// One instance per candidate, in corpus order. Parallel over candidates.
std::vector<TokenizedInstance> build_instances(const Corpus& corpus, Level level, std::size_t max_len,
                                               const PreprocessConfig& cfg, const Tokenizer& tokenizer);

/// Keeps at most `budget` tokens. When marker tokens are present they are
/// always kept: the window is the leftmost prefix if it contains them all,
/// otherwise it is re-centred on the marked span; if even the marked span is
/// wider than the budget, markers are kept plus the tokens closest to a marker.
std::vector<std::string> truncate_tokens(const std::vector<std::string>& tokens, std::size_t budget);

}  // namespace snprex
