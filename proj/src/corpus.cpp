#include "snprex/corpus.hpp"

#include <algorithm>
#include <array>
#include <span>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "snprex/errors.hpp"
#include "snprex/rng.hpp"
#include "snprex/utf8.hpp"

namespace snprex {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view to_string(EntityKind kind) {
  return kind == EntityKind::Snp ? "snp" : "phenotype";
}

std::string_view to_string(Label label) {
  switch (label) {
    case Label::Positive: return "positive";
    case Label::Negative: return "negative";
    case Label::Neutral: return "neutral";
    case Label::Invalid: break;
  }
  return "invalid";
}

std::string_view to_string(SplitHint hint) {
  switch (hint) {
    case SplitHint::Train: return "train";
    case SplitHint::Test: return "test";
    case SplitHint::None: break;
  }
  return "none";
}

std::string_view to_string(CorpusFormat format) {
  return format == CorpusFormat::SnpphenaNative ? "snpphena" : "jsonl";
}

std::optional<EntityKind> parse_entity_kind(std::string_view s) {
  const std::string l = lower(s);
  if (l == "snp") return EntityKind::Snp;
  if (l == "phenotype" || l == "pheno" || l == "trait") return EntityKind::Phenotype;
  return std::nullopt;
}

Label parse_label(std::string_view s) {
  const std::string l = lower(s);
  if (l == "positive") return Label::Positive;
  if (l == "negative") return Label::Negative;
  if (l == "neutral") return Label::Neutral;
  return Label::Invalid;
}

std::optional<SplitHint> parse_split_hint(std::string_view s) {
  const std::string l = lower(s);
  if (l == "train") return SplitHint::Train;
  if (l == "test") return SplitHint::Test;
  if (l == "none") return SplitHint::None;
  return std::nullopt;
}

std::optional<CorpusFormat> parse_corpus_format(std::string_view s) {
  const std::string l = lower(s);
  if (l == "snpphena" || l == "snpphena_native" || l == "native") return CorpusFormat::SnpphenaNative;
  if (l == "jsonl" || l == "canonical" || l == "canonical_jsonl") return CorpusFormat::CanonicalJsonl;
  return std::nullopt;
}

const EntityMention* Sentence::find_mention(std::string_view mention_id) const {
  for (const auto& m : mentions) {
    if (m.id == mention_id) return &m;
  }
  return nullptr;
}

CorpusStats& CorpusStats::operator+=(const CorpusStats& o) {
  n_documents += o.n_documents;
  n_sentences += o.n_sentences;
  n_candidates += o.n_candidates;
  n_positive += o.n_positive;
  n_negative += o.n_negative;
  n_neutral += o.n_neutral;
  return *this;
}

// ---------------------------------------------------------------------------
// Validation

ValidationReport validate_corpus(const Corpus& corpus) {
  ValidationReport report;
  auto error = [&](const std::string& doc, IssueKind kind, std::string msg) {
    report.errors.push_back({doc, kind, std::move(msg)});
  };

  std::set<std::string, std::less<>> doc_ids;
  std::set<std::string, std::less<>> candidate_ids;
  for (const auto& doc : corpus.documents) {
    if (doc.id.empty()) error(doc.id, IssueKind::Structure, "empty document id");
    if (!doc_ids.insert(doc.id).second) {
      error(doc.id, IssueKind::DuplicateId, "duplicate document id '" + doc.id + "'");
    }
    if (doc.sentences.empty()) {
      report.warnings.push_back({doc.id, IssueKind::Structure, "document has no sentences"});
    }

    std::set<std::string, std::less<>> sentence_ids;
    for (const auto& sent : doc.sentences) {
      if (!sentence_ids.insert(sent.id).second) {
        error(doc.id, IssueKind::DuplicateId, "duplicate sentence id '" + sent.id + "'");
      }
      if (!utf8::is_valid(sent.text)) {
        error(doc.id, IssueKind::Structure, "sentence '" + sent.id + "' is not valid UTF-8");
        continue;
      }
      const std::size_t len = utf8::length(sent.text);

      std::set<std::string, std::less<>> mention_ids;
      for (const auto& m : sent.mentions) {
        if (!mention_ids.insert(m.id).second) {
          error(doc.id, IssueKind::DuplicateId, "duplicate mention id '" + m.id + "' in sentence '" + sent.id + "'");
        }
        if (!(m.char_start < m.char_end && m.char_end <= len)) {
          std::ostringstream os;
          os << "mention '" << m.id << "' offsets [" << m.char_start << ", " << m.char_end
             << ") outside sentence of length " << len;
          error(doc.id, IssueKind::OffsetMismatch, os.str());
          continue;
        }
        const auto slice = utf8::substr(sent.text, m.char_start, m.char_end);
        if (!slice || *slice != m.surface) {
          error(doc.id, IssueKind::OffsetMismatch,
                "mention '" + m.id + "' surface '" + m.surface + "' does not match text '" + slice.value_or("") + "'");
        }
      }

      for (const auto& c : sent.candidates) {
        if (!candidate_ids.insert(c.id).second) {
          error(doc.id, IssueKind::DuplicateId, "duplicate candidate id '" + c.id + "'");
        }
        if (c.sentence_ref != sent.id) {
          error(doc.id, IssueKind::DanglingReference,
                "candidate '" + c.id + "' refers to sentence '" + c.sentence_ref + "' but is stored in '" + sent.id + "'");
        }
        const EntityMention* snp = sent.find_mention(c.snp_ref);
        const EntityMention* pheno = sent.find_mention(c.pheno_ref);
        if (snp == nullptr) {
          error(doc.id, IssueKind::DanglingReference, "candidate '" + c.id + "' snp_ref '" + c.snp_ref + "' not in sentence");
        } else if (snp->kind != EntityKind::Snp) {
          error(doc.id, IssueKind::KindMismatch, "candidate '" + c.id + "' snp_ref '" + c.snp_ref + "' is not an SNP mention");
        }
        if (pheno == nullptr) {
          error(doc.id, IssueKind::DanglingReference,
                "candidate '" + c.id + "' pheno_ref '" + c.pheno_ref + "' not in sentence");
        } else if (pheno->kind != EntityKind::Phenotype) {
          error(doc.id, IssueKind::KindMismatch,
                "candidate '" + c.id + "' pheno_ref '" + c.pheno_ref + "' is not a phenotype mention");
        }
        if (c.label == Label::Invalid) {
          error(doc.id, IssueKind::LabelDomain, "candidate '" + c.id + "' label outside {positive, negative, neutral}");
        }
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Stats and split

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats s;
  s.n_documents = corpus.documents.size();
  for (const auto& doc : corpus.documents) {
    s.n_sentences += doc.sentences.size();
    for (const auto& sent : doc.sentences) {
      for (const auto& c : sent.candidates) {
        ++s.n_candidates;
        switch (c.label) {
          case Label::Positive: ++s.n_positive; break;
          case Label::Negative: ++s.n_negative; break;
          case Label::Neutral: ++s.n_neutral; break;
          case Label::Invalid: break;
        }
      }
    }
  }
  return s;
}

namespace {

std::array<long, 3> label_counts(const Document& doc) {
  std::array<long, 3> n{0, 0, 0};
  for (const auto& sent : doc.sentences) {
    for (const auto& c : sent.candidates) {
      if (c.label != Label::Invalid) ++n[static_cast<std::size_t>(c.label)];
    }
  }
  return n;
}

}  // namespace

std::pair<Corpus, Corpus> split_dataset(const Corpus& corpus, const SplitSpec& spec) {
  Corpus train;
  Corpus test;
  train.provenance = corpus.provenance;
  test.provenance = corpus.provenance;

  const std::size_t n = corpus.documents.size();
  std::vector<bool> to_test(n, false);

  if (spec.mode == SplitMode::Official) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& hint = corpus.documents[i].split_hint;
      if (!hint || *hint == SplitHint::None) {
        throw MissingSplitHint("document '" + corpus.documents[i].id + "' has no train/test split hint");
      }
      to_test[i] = *hint == SplitHint::Test;
    }
  } else {
    if (!(spec.test_fraction >= 0.0 && spec.test_fraction <= 1.0)) {
      throw ConfigMismatch("test_fraction must lie in [0, 1]");
    }
    // Greedy document assignment in seeded random order: a document goes to the
    // test side when it moves the test label counts closer to their targets, or
    // when it is neutral for the counts and the test side is short of documents.
    std::array<long, 3> total{0, 0, 0};
    std::vector<std::array<long, 3>> per_doc(n);
    for (std::size_t i = 0; i < n; ++i) {
      per_doc[i] = label_counts(corpus.documents[i]);
      for (int k = 0; k < 3; ++k) total[k] += per_doc[i][k];
    }
    std::array<double, 3> target{};
    for (int k = 0; k < 3; ++k) target[k] = spec.test_fraction * static_cast<double>(total[k]);
    const double target_docs = spec.test_fraction * static_cast<double>(n);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(spec.seed);
    rng.shuffle(std::span<std::size_t>(order));

    std::array<long, 3> have{0, 0, 0};
    std::size_t have_docs = 0;
    auto distance = [&](const std::array<long, 3>& h) {
      double d = 0.0;
      for (int k = 0; k < 3; ++k) d += std::abs(static_cast<double>(h[k]) - target[k]);
      return d;
    };
    for (std::size_t i : order) {
      std::array<long, 3> next = have;
      for (int k = 0; k < 3; ++k) next[k] += per_doc[i][k];
      const double before = distance(have);
      const double after = distance(next);
      const bool docs_short = static_cast<double>(have_docs) + 0.5 < target_docs;
      if (after < before || (after == before && docs_short)) {
        to_test[i] = true;
        have = next;
        ++have_docs;
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    (to_test[i] ? test : train).documents.push_back(corpus.documents[i]);
  }
  return {std::move(train), std::move(test)};
}

std::map<std::string, CandidateLocation, std::less<>> index_candidates(const Corpus& corpus) {
  std::map<std::string, CandidateLocation, std::less<>> index;
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    const auto& doc = corpus.documents[d];
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
      const auto& sent = doc.sentences[s];
      for (std::size_t c = 0; c < sent.candidates.size(); ++c) {
        index.emplace(sent.candidates[c].id, CandidateLocation{d, s, c});
      }
    }
  }
  return index;
}

// ---------------------------------------------------------------------------
// Canonical JSONL

namespace {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

ordered_json document_to_json(const Document& doc) {
  ordered_json j;
  j["id"] = doc.id;
  j["title"] = doc.title ? ordered_json(*doc.title) : ordered_json(nullptr);
  j["split_hint"] = doc.split_hint ? ordered_json(std::string(to_string(*doc.split_hint))) : ordered_json(nullptr);
  ordered_json sentences = ordered_json::array();
  for (const auto& sent : doc.sentences) {
    ordered_json s;
    s["id"] = sent.id;
    s["text"] = sent.text;
    ordered_json mentions = ordered_json::array();
    for (const auto& m : sent.mentions) {
      ordered_json jm;
      jm["id"] = m.id;
      jm["kind"] = std::string(to_string(m.kind));
      jm["surface"] = m.surface;
      jm["char_start"] = m.char_start;
      jm["char_end"] = m.char_end;
      jm["normalized"] = m.normalized ? ordered_json(*m.normalized) : ordered_json(nullptr);
      mentions.push_back(std::move(jm));
    }
    s["mentions"] = std::move(mentions);
    ordered_json candidates = ordered_json::array();
    for (const auto& c : sent.candidates) {
      ordered_json jc;
      jc["id"] = c.id;
      jc["snp_ref"] = c.snp_ref;
      jc["pheno_ref"] = c.pheno_ref;
      jc["label"] = std::string(to_string(c.label));
      ordered_json extras = ordered_json::object();
      for (const auto& [k, v] : c.extras) extras[k] = v;
      jc["extras"] = std::move(extras);
      candidates.push_back(std::move(jc));
    }
    s["candidates"] = std::move(candidates);
    sentences.push_back(std::move(s));
  }
  j["sentences"] = std::move(sentences);
  return j;
}

class RecordReader {
 public:
  RecordReader(const std::string& source, std::size_t line) : source_(source), line_(line) {}

  [[noreturn]] void fail(const std::string& reason) const {
    std::ostringstream os;
    os << source_ << ":" << line_ << ": " << reason;
    throw MalformedRecord(os.str());
  }

  const json& field(const json& obj, const char* key, const char* where) const {
    if (!obj.is_object()) fail(std::string(where) + " is not an object");
    const auto it = obj.find(key);
    if (it == obj.end()) fail(std::string(where) + " is missing key '" + key + "'");
    return *it;
  }

  std::string string_field(const json& obj, const char* key, const char* where) const {
    const json& v = field(obj, key, where);
    if (!v.is_string()) fail(std::string(where) + "." + key + " must be a string");
    return v.get<std::string>();
  }

  std::optional<std::string> optional_string(const json& obj, const char* key, const char* where) const {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) fail(std::string(where) + "." + key + " must be a string or null");
    return it->get<std::string>();
  }

  std::size_t offset_field(const json& obj, const char* key, const char* where) const {
    const json& v = field(obj, key, where);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      fail(std::string(where) + "." + key + " must be a non-negative integer");
    }
    return v.get<std::size_t>();
  }

  const json& array_field(const json& obj, const char* key, const char* where) const {
    const json& v = field(obj, key, where);
    if (!v.is_array()) fail(std::string(where) + "." + key + " must be an array");
    return v;
  }

 private:
  const std::string& source_;
  std::size_t line_;
};

Document document_from_json(const json& j, const RecordReader& r) {
  Document doc;
  doc.id = r.string_field(j, "id", "document");
  doc.title = r.optional_string(j, "title", "document");
  if (auto hint = r.optional_string(j, "split_hint", "document")) {
    doc.split_hint = parse_split_hint(*hint);
    if (!doc.split_hint) r.fail("unknown split_hint '" + *hint + "'");
  }
  for (const json& js : r.array_field(j, "sentences", "document")) {
    Sentence sent;
    sent.id = r.string_field(js, "id", "sentence");
    sent.text = r.string_field(js, "text", "sentence");
    for (const json& jm : r.array_field(js, "mentions", "sentence")) {
      EntityMention m;
      m.id = r.string_field(jm, "id", "mention");
      const std::string kind = r.string_field(jm, "kind", "mention");
      const auto k = parse_entity_kind(kind);
      if (!k) r.fail("mention '" + m.id + "' has unknown kind '" + kind + "'");
      m.kind = *k;
      m.surface = r.string_field(jm, "surface", "mention");
      m.char_start = r.offset_field(jm, "char_start", "mention");
      m.char_end = r.offset_field(jm, "char_end", "mention");
      m.normalized = r.optional_string(jm, "normalized", "mention");
      sent.mentions.push_back(std::move(m));
    }
    for (const json& jc : r.array_field(js, "candidates", "sentence")) {
      CandidatePair c;
      c.id = r.string_field(jc, "id", "candidate");
      c.snp_ref = r.string_field(jc, "snp_ref", "candidate");
      c.pheno_ref = r.string_field(jc, "pheno_ref", "candidate");
      c.label = parse_label(r.string_field(jc, "label", "candidate"));
      c.sentence_ref = sent.id;
      if (const auto it = jc.find("extras"); it != jc.end() && !it->is_null()) {
        if (!it->is_object()) r.fail("candidate '" + c.id + "' extras must be an object");
        for (const auto& [k, v] : it->items()) {
          if (!v.is_string()) r.fail("candidate '" + c.id + "' extras." + k + " must be a string");
          c.extras.emplace(k, v.get<std::string>());
        }
      }
      sent.candidates.push_back(std::move(c));
    }
    doc.sentences.push_back(std::move(sent));
  }
  return doc;
}

[[noreturn]] void throw_validation_failure(const ValidationReport& report, const std::string& source) {
  for (const auto& e : report.errors) {
    if (e.kind == IssueKind::OffsetMismatch) {
      throw OffsetMismatch(source + ": document '" + e.document_id + "': " + e.message);
    }
  }
  const auto& e = report.errors.front();
  std::ostringstream os;
  os << source << ": document '" << e.document_id << "': " << e.message;
  if (report.errors.size() > 1) os << " (+" << report.errors.size() - 1 << " more)";
  throw MalformedRecord(os.str());
}

}  // namespace

std::string serialize_corpus(const Corpus& corpus) {
  std::ostringstream os;
  write_corpus(corpus, os);
  return os.str();
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  ordered_json header;
  header["schema"] = std::string(kCorpusSchema);
  out << header.dump() << '\n';
  for (const auto& doc : corpus.documents) {
    out << document_to_json(doc).dump() << '\n';
  }
}

Corpus read_canonical_jsonl(std::istream& in, const std::string& source_name) {
  Corpus corpus;
  corpus.provenance = {source_name, std::string(to_string(CorpusFormat::CanonicalJsonl)), std::string(kCorpusSchema)};

  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const RecordReader reader(source_name, lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      reader.fail(std::string("invalid JSON: ") + e.what());
    }
    if (!saw_header) {
      if (!j.is_object() || !j.contains("schema")) reader.fail("missing schema header line");
      const std::string schema = reader.string_field(j, "schema", "header");
      if (schema != kCorpusSchema) reader.fail("unsupported schema '" + schema + "'");
      saw_header = true;
      continue;
    }
    corpus.documents.push_back(document_from_json(j, reader));
  }
  if (!saw_header) throw MalformedRecord(source_name + ": empty corpus file (no schema header)");
  return corpus;
}

Corpus read_canonical_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingPath("cannot open corpus file " + path.string());
  return read_canonical_jsonl(in, path.string());
}

Corpus parse_corpus(const std::filesystem::path& path, CorpusFormat format) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) throw MissingPath("corpus path does not exist: " + path.string());

  Corpus corpus;
  if (format == CorpusFormat::CanonicalJsonl) {
    if (std::filesystem::is_directory(path, ec)) {
      throw MalformedRecord(path.string() + ": canonical JSONL corpus must be a file, got a directory");
    }
    corpus = read_canonical_jsonl(path);
  } else {
    corpus = read_snpphena_native(path);
  }
  const ValidationReport report = validate_corpus(corpus);
  if (!report.ok()) throw_validation_failure(report, path.string());
  return corpus;
}

}  // namespace snprex
