#include "snprex/preprocess.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "snprex/errors.hpp"
#include "snprex/utf8.hpp"

namespace snprex {

std::string_view to_string(MarkerScheme s) { return s == MarkerScheme::WrapMarkers ? "wrap_markers" : "none"; }
std::string_view to_string(Level l) { return l == Level::Sentence ? "sentence" : "abstract"; }
std::string_view to_string(LengthUnit u) { return u == LengthUnit::Tokens ? "tokens" : "characters"; }

std::optional<MarkerScheme> parse_marker_scheme(std::string_view s) {
  const std::string l = text::ascii_lower(s);
  if (l == "wrap_markers" || l == "wrap") return MarkerScheme::WrapMarkers;
  if (l == "none") return MarkerScheme::None;
  return std::nullopt;
}

std::optional<Level> parse_level(std::string_view s) {
  const std::string l = text::ascii_lower(s);
  if (l == "sentence") return Level::Sentence;
  if (l == "abstract") return Level::Abstract;
  return std::nullopt;
}

std::optional<LengthUnit> parse_length_unit(std::string_view s) {
  const std::string l = text::ascii_lower(s);
  if (l == "tokens") return LengthUnit::Tokens;
  if (l == "characters" || l == "chars") return LengthUnit::Characters;
  return std::nullopt;
}

bool is_marker(std::string_view token) {
  return token == kSnpOpen || token == kSnpClose || token == kPhenoOpen || token == kPhenoClose;
}

std::vector<TextSegment> split_on_markers(std::string_view text) {
  static constexpr std::array<std::string_view, 4> markers{kSnpOpen, kSnpClose, kPhenoOpen, kPhenoClose};
  std::vector<TextSegment> out;
  std::size_t pos = 0;
  std::size_t seg_start = 0;
  while (pos < text.size()) {
    bool matched = false;
    if (text[pos] == '[') {
      for (auto m : markers) {
        if (text.substr(pos, m.size()) == m) {
          if (pos > seg_start) out.push_back({std::string(text.substr(seg_start, pos - seg_start)), false});
          out.push_back({std::string(m), true});
          pos += m.size();
          seg_start = pos;
          matched = true;
          break;
        }
      }
    }
    if (!matched) ++pos;
  }
  if (seg_start < text.size()) out.push_back({std::string(text.substr(seg_start)), false});
  return out;
}

PreprocessConfig PreprocessConfig::standard() { return PreprocessConfig{}; }

PreprocessConfig PreprocessConfig::raw() {
  PreprocessConfig cfg;
  cfg.lowercase = false;
  cfg.remove_stopwords = false;
  cfg.stem = false;
  cfg.lemmatize = false;
  return cfg;
}

void PreprocessConfig::validate() const {
  if (stem && lemmatize) throw ConfigMismatch("stem and lemmatize cannot both be enabled");
}

std::vector<std::string> normalize_text(std::string_view input, const PreprocessConfig& cfg) {
  cfg.validate();
  std::vector<std::string> tokens = text::tokenize(input);
  if (cfg.lowercase) {
    for (auto& t : tokens) t = text::ascii_lower(t);
  }
  if (cfg.remove_stopwords) {
    // Stopword lists are lowercase; match case-insensitively.
    std::erase_if(tokens, [&](const std::string& t) { return cfg.stopword_list.contains(text::ascii_lower(t)); });
  }
  if (cfg.stem) {
    for (auto& t : tokens) t = text::porter_stem(t);
  } else if (cfg.lemmatize) {
    for (auto& t : tokens) t = text::lemmatize(t);
  }
  return tokens;
}

// ---------------------------------------------------------------------------

std::string mark_entities(std::string_view sentence_text, const EntityMention& snp, const EntityMention& pheno,
                          MarkerScheme scheme) {
  if (scheme == MarkerScheme::None) return std::string(sentence_text);
  if (snp.char_start < pheno.char_end && pheno.char_start < snp.char_end) {
    throw OverlappingMentions("mentions '" + snp.id + "' and '" + pheno.id + "' overlap");
  }
  const auto b = utf8::boundaries(sentence_text);
  const std::size_t n_cp = b.size() - 1;
  if (snp.char_end > n_cp || pheno.char_end > n_cp || snp.char_start >= snp.char_end ||
      pheno.char_start >= pheno.char_end) {
    throw OffsetMismatch("mention offsets outside sentence text");
  }

  struct Insert {
    std::size_t byte;
    std::string_view text;
  };
  std::vector<Insert> inserts{
      {b[snp.char_start], "[S1] "}, {b[snp.char_end], " [/S1]"},
      {b[pheno.char_start], "[P1] "}, {b[pheno.char_end], " [/P1]"},
  };
  // Spans do not overlap, so ordering by position (closing before opening on
  // ties) yields a well-nested result.
  std::stable_sort(inserts.begin(), inserts.end(), [](const Insert& x, const Insert& y) {
    if (x.byte != y.byte) return x.byte < y.byte;
    return x.text.front() == ' ' && y.text.front() != ' ';
  });
  std::string out;
  out.reserve(sentence_text.size() + 24);
  std::size_t pos = 0;
  for (const auto& ins : inserts) {
    out.append(sentence_text.substr(pos, ins.byte - pos));
    out.append(ins.text);
    pos = ins.byte;
  }
  out.append(sentence_text.substr(pos));
  return out;
}

std::string mark_entities(const Sentence& sentence, const CandidatePair& pair, MarkerScheme scheme) {
  const EntityMention* snp = sentence.find_mention(pair.snp_ref);
  const EntityMention* pheno = sentence.find_mention(pair.pheno_ref);
  if (snp == nullptr || pheno == nullptr) {
    throw UnknownPair("candidate '" + pair.id + "' mentions not found in sentence '" + sentence.id + "'");
  }
  return mark_entities(sentence.text, *snp, *pheno, scheme);
}

int encode_labels(Label label) {
  switch (label) {
    case Label::Positive: return 1;
    case Label::Negative:
    case Label::Neutral: return 0;
    case Label::Invalid: break;
  }
  throw MalformedRecord("label outside {positive, negative, neutral}");
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  add("[PAD]");
  add("[UNK]");
  for (auto m : {kSnpOpen, kSnpClose, kPhenoOpen, kPhenoClose}) add(std::string(m));
}

void Vocabulary::add(const std::string& token) {
  if (ids_.contains(token)) return;
  ids_.emplace(token, static_cast<std::int32_t>(tokens_.size()));
  tokens_.push_back(token);
}

std::vector<std::string> Vocabulary::tokenize(std::string_view marked_text, const PreprocessConfig& cfg) const {
  std::vector<std::string> out;
  for (auto& seg : split_on_markers(marked_text)) {
    if (seg.is_marker) {
      out.push_back(std::move(seg.text));
    } else {
      for (auto& t : normalize_text(seg.text, cfg)) out.push_back(std::move(t));
    }
  }
  return out;
}

std::int32_t Vocabulary::id_of(std::string_view token) const {
  const auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

Vocabulary Vocabulary::build(const Corpus& corpus, const PreprocessConfig& cfg, std::size_t min_count) {
  std::map<std::string, std::size_t, std::less<>> counts;
  for (const auto& doc : corpus.documents) {
    for (const auto& sent : doc.sentences) {
      for (auto& t : normalize_text(sent.text, cfg)) ++counts[t];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [tok, n] : ranked) {
    if (n >= min_count) v.add(tok);
  }
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingPath("cannot open vocabulary " + path.string());
  Vocabulary v;
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  if (tokens.size() < v.tokens_.size() || !std::equal(v.tokens_.begin(), v.tokens_.end(), tokens.begin())) {
    throw MalformedRecord(path.string() + ": vocabulary must start with the reserved tokens");
  }
  for (std::size_t i = v.tokens_.size(); i < tokens.size(); ++i) {
    if (v.ids_.contains(tokens[i])) throw MalformedRecord(path.string() + ": duplicate token '" + tokens[i] + "'");
    v.add(tokens[i]);
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingPath("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

// ---------------------------------------------------------------------------
// Instances

namespace {

// Start of a window of `budget` items over [0, n) that contains [lo, hi].
// Prefers the leftmost window; otherwise centres on the span. Requires
// hi - lo + 1 <= budget <= n.
std::size_t choose_window(std::size_t n, std::size_t lo, std::size_t hi, std::size_t budget) {
  if (hi < budget) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  const std::size_t min_start = hi + 1 - budget;
  const std::size_t max_start = std::min(lo, n - budget);
  const std::size_t centred = mid >= budget / 2 ? mid - budget / 2 : 0;
  return std::clamp(centred, min_start, max_start);
}

}  // namespace

std::vector<std::string> truncate_tokens(const std::vector<std::string>& tokens, std::size_t budget) {
  const std::size_t n = tokens.size();
  if (n <= budget) return tokens;

  std::vector<std::size_t> markers;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_marker(tokens[i])) markers.push_back(i);
  }
  if (markers.empty()) return {tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(budget)};

  const std::size_t lo = markers.front();
  const std::size_t hi = markers.back();
  if (hi - lo + 1 <= budget) {
    const std::size_t start = choose_window(n, lo, hi, budget);
    return {tokens.begin() + static_cast<std::ptrdiff_t>(start),
            tokens.begin() + static_cast<std::ptrdiff_t>(start + budget)};
  }

  // Marked span alone exceeds the budget: keep markers first, then the tokens
  // nearest to any marker (earlier index wins ties), in original order.
  std::vector<std::size_t> dist(n, n);
  for (std::size_t m : markers) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t d = i > m ? i - m : m - i;
      dist[i] = std::min(dist[i], d);
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  order.resize(std::max(budget, markers.size()));
  std::sort(order.begin(), order.end());
  std::vector<std::string> out;
  out.reserve(order.size());
  for (std::size_t i : order) out.push_back(tokens[i]);
  return out;
}

namespace {

// Code point window over the marked text, keeping the marked span when it fits.
std::string character_window(const std::string& marked, std::size_t max_chars) {
  const auto b = utf8::boundaries(marked);
  const std::size_t n = b.size() - 1;
  if (n <= max_chars) return marked;

  // Marker positions in code points.
  std::size_t lo = n;
  std::size_t hi = 0;
  for (auto m : {kSnpOpen, kSnpClose, kPhenoOpen, kPhenoClose}) {
    const auto byte = marked.find(m);
    if (byte == std::string::npos) continue;
    const std::size_t start = static_cast<std::size_t>(std::lower_bound(b.begin(), b.end(), byte) - b.begin());
    lo = std::min(lo, start);
    hi = std::max(hi, start + m.size() - 1);
  }
  std::size_t start = 0;
  std::size_t len = max_chars;
  if (lo <= hi) {
    if (hi - lo + 1 <= max_chars) {
      start = choose_window(n, lo, hi, max_chars);
    } else {
      start = lo;
      len = hi - lo + 1;
    }
  }
  return marked.substr(b[start], b[start + len] - b[start]);
}

}  // namespace

TokenizedInstance build_instance(const Corpus& corpus, const CandidateLocation& where, Level level,
                                 std::size_t max_len, const PreprocessConfig& cfg, const Tokenizer& tokenizer) {
  if (max_len < 8) throw ConfigMismatch("max_len must be at least 8");
  const Document& doc = corpus.documents.at(where.document);
  const Sentence& sent = doc.sentences.at(where.sentence);
  const CandidatePair& pair = sent.candidates.at(where.candidate);

  std::string marked = mark_entities(sent, pair, cfg.marker_scheme);
  if (level == Level::Abstract) {
    std::string joined;
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
      if (s > 0) joined.push_back(' ');
      joined += s == where.sentence ? marked : doc.sentences[s].text;
    }
    marked = std::move(joined);
  }
  if (cfg.length_unit == LengthUnit::Characters) marked = character_window(marked, max_len);

  const auto prefix = tokenizer.prefix();
  const auto suffix = tokenizer.suffix();
  const std::size_t budget = max_len - prefix.size() - suffix.size();

  TokenizedInstance inst;
  inst.candidate_ref = pair.id;
  inst.level = level;
  inst.document_ref = doc.id;
  inst.class_id = encode_labels(pair.label);
  inst.tokens = prefix;
  for (auto& t : truncate_tokens(tokenizer.tokenize(marked, cfg), budget)) inst.tokens.push_back(std::move(t));
  inst.tokens.insert(inst.tokens.end(), suffix.begin(), suffix.end());
  inst.true_length = inst.tokens.size();
  inst.token_ids.assign(max_len, tokenizer.pad_id());
  for (std::size_t i = 0; i < inst.true_length; ++i) inst.token_ids[i] = tokenizer.id_of(inst.tokens[i]);
  return inst;
}

TokenizedInstance build_instance(const CandidatePair& pair, const Corpus& corpus, Level level, std::size_t max_len,
                                 const PreprocessConfig& cfg, const Tokenizer& tokenizer) {
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    const auto& doc = corpus.documents[d];
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
      const auto& cands = doc.sentences[s].candidates;
      for (std::size_t c = 0; c < cands.size(); ++c) {
        if (cands[c].id == pair.id) return build_instance(corpus, {d, s, c}, level, max_len, cfg, tokenizer);
      }
    }
  }
  throw UnknownPair("candidate '" + pair.id + "' is not in the corpus");
}

std::vector<TokenizedInstance> build_instances(const Corpus& corpus, Level level, std::size_t max_len,
                                               const PreprocessConfig& cfg, const Tokenizer& tokenizer) {
  cfg.validate();
  std::vector<CandidateLocation> where;
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    const auto& doc = corpus.documents[d];
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
      for (std::size_t c = 0; c < doc.sentences[s].candidates.size(); ++c) where.push_back({d, s, c});
    }
  }
  std::vector<TokenizedInstance> out(where.size());
  std::vector<std::exception_ptr> failures(where.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(where.size()); ++i) {
    try {
      out[i] = build_instance(corpus, where[i], level, max_len, cfg, tokenizer);
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return out;
}

}  // namespace snprex
