#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace snprex {

enum class EntityKind { Snp, Phenotype };
/// `Invalid` only appears in corpora loaded without validation; it marks a
/// label string outside the three corpus values.
enum class Label { Positive, Negative, Neutral, Invalid };
enum class SplitHint { Train, Test, None };
enum class CorpusFormat { SnpphenaNative, CanonicalJsonl };

inline constexpr std::string_view kCorpusSchema = "snprex-corpus/1";

std::string_view to_string(EntityKind kind);
std::string_view to_string(Label label);
std::string_view to_string(SplitHint hint);
std::string_view to_string(CorpusFormat format);
std::optional<EntityKind> parse_entity_kind(std::string_view s);
/// Case-insensitive; unknown strings map to Label::Invalid.
Label parse_label(std::string_view s);
std::optional<SplitHint> parse_split_hint(std::string_view s);
std::optional<CorpusFormat> parse_corpus_format(std::string_view s);

struct EntityMention {
  std::string id;
  EntityKind kind = EntityKind::Snp;
  std::string surface;
  // Code point offsets into the owning sentence text, end exclusive.
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  std::optional<std::string> normalized;

  bool operator==(const EntityMention&) const = default;
};

struct CandidatePair {
  std::string id;
  std::string snp_ref;
  std::string pheno_ref;
  Label label = Label::Invalid;
  std::string sentence_ref;
  /// Annotation attributes carried through untouched (negation, modality,
  /// confidence, ...).
  std::map<std::string, std::string> extras;

  bool operator==(const CandidatePair&) const = default;
};

struct Sentence {
  std::string id;
  std::string text;
  std::vector<EntityMention> mentions;
  std::vector<CandidatePair> candidates;

  const EntityMention* find_mention(std::string_view mention_id) const;
  bool operator==(const Sentence&) const = default;
};

struct Document {
  std::string id;
  std::optional<std::string> title;
  std::vector<Sentence> sentences;
  std::optional<SplitHint> split_hint;

  bool operator==(const Document&) const = default;
};

struct Provenance {
  std::string source;
  std::string format;
  std::string schema_version{kCorpusSchema};
};

struct Corpus {
  std::vector<Document> documents;
  Provenance provenance;

  /// Structural equality over the documents; provenance is metadata.
  bool operator==(const Corpus& other) const { return documents == other.documents; }
};

struct CorpusStats {
  std::size_t n_documents = 0;
  std::size_t n_sentences = 0;
  std::size_t n_candidates = 0;
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
  std::size_t n_neutral = 0;

  CorpusStats& operator+=(const CorpusStats& o);
  friend CorpusStats operator+(CorpusStats a, const CorpusStats& b) { return a += b; }
  bool operator==(const CorpusStats&) const = default;
};

enum class IssueKind { OffsetMismatch, LabelDomain, DuplicateId, DanglingReference, KindMismatch, Structure };

struct ValidationIssue {
  std::string document_id;
  IssueKind kind = IssueKind::Structure;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> errors;
  std::vector<ValidationIssue> warnings;

  bool ok() const { return errors.empty(); }
};

enum class SplitMode { Official, Stratified };

struct SplitSpec {
  SplitMode mode = SplitMode::Official;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

/// Location of a candidate inside a corpus.
struct CandidateLocation {
  std::size_t document = 0;
  std::size_t sentence = 0;
  std::size_t candidate = 0;
};

/// Reads a corpus from `path` and validates it. Throws MissingPath,
/// MalformedRecord or OffsetMismatch.
Corpus parse_corpus(const std::filesystem::path& path, CorpusFormat format);

/// Reads canonical JSONL without running validate_corpus. Schema-level
/// problems (bad JSON, missing keys, wrong types) still throw.
Corpus read_canonical_jsonl(std::istream& in, const std::string& source_name);
Corpus read_canonical_jsonl(const std::filesystem::path& path);

/// Reads the native SNPPhenA distribution (a directory tree of per-abstract XML
/// files) without validation. See README for the accepted layout.
Corpus read_snpphena_native(const std::filesystem::path& root);

/// Parses one native XML document; `split` is taken from the directory name.
Document read_snpphena_document(std::string_view xml, const std::string& source_name,
                                std::optional<SplitHint> split);

ValidationReport validate_corpus(const Corpus& corpus);

CorpusStats corpus_stats(const Corpus& corpus);

std::pair<Corpus, Corpus> split_dataset(const Corpus& corpus, const SplitSpec& spec);

/// Canonical JSONL: a schema header line followed by one document per line.
std::string serialize_corpus(const Corpus& corpus);
void write_corpus(const Corpus& corpus, std::ostream& out);

/// Candidate id -> location. Duplicate ids keep the first occurrence.
std::map<std::string, CandidateLocation, std::less<>> index_candidates(const Corpus& corpus);

}  // namespace snprex
