#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "oracle/fixtures.hpp"
#include "snprex/errors.hpp"
#include "snprex/preprocess.hpp"

using namespace snprex;
using snprex::testing::data_path;

namespace {

std::size_t count_markers(const std::vector<std::string>& tokens) {
  return static_cast<std::size_t>(std::count_if(tokens.begin(), tokens.end(), [](const auto& t) { return is_marker(t); }));
}

// One document, one sentence, one candidate.
Corpus single(const std::string& text, std::size_t snp_start, std::size_t snp_end, std::size_t ph_start,
              std::size_t ph_end, Label label = Label::Positive) {
  Corpus c;
  Document d;
  d.id = "D";
  Sentence s;
  s.id = "D.s0";
  s.text = text;
  s.mentions.push_back({"e0", EntityKind::Snp, text.substr(snp_start, snp_end - snp_start), snp_start, snp_end, {}});
  s.mentions.push_back({"e1", EntityKind::Phenotype, text.substr(ph_start, ph_end - ph_start), ph_start, ph_end, {}});
  s.candidates.push_back({"p0", "e0", "e1", label, "D.s0", {}});
  d.sentences.push_back(s);
  c.documents.push_back(d);
  return c;
}

}  // namespace

TEST_CASE("normalize_text with every step on") {
  // Expected stems from the reference Porter table; "the", "is", "with" are stopwords.
  const auto cfg = PreprocessConfig::standard();
  CHECK(normalize_text("The SNP is associated with disease", cfg) == std::vector<std::string>{"snp", "associ", "diseas"});
  CHECK(normalize_text("", cfg).empty());
}

TEST_CASE("normalize_text with every step off is tokenization and idempotent") {
  const auto cfg = PreprocessConfig::raw();
  const std::string input = "The rs123 variant, in Crohn's disease (p < 0.01).";
  const auto once = normalize_text(input, cfg);
  CHECK(once == text::tokenize(input));
  std::string joined;
  for (const auto& t : once) joined += t + " ";
  CHECK(normalize_text(joined, cfg) == once);
}

TEST_CASE("lemmatize path and conflicting reducers") {
  auto cfg = PreprocessConfig::standard();
  cfg.stem = false;
  cfg.lemmatize = true;
  CHECK(normalize_text("The polymorphisms in these studies", cfg) == std::vector<std::string>{"polymorphism", "study"});
  cfg.stem = true;
  CHECK_THROWS_AS(normalize_text("x", cfg), ConfigMismatch);
}

TEST_CASE("mark_entities wraps both mentions") {
  const Corpus c = single("rs123 raises asthma risk", 0, 5, 13, 19);
  const auto& s = c.documents[0].sentences[0];
  CHECK(mark_entities(s, s.candidates[0], MarkerScheme::WrapMarkers) == "[S1] rs123 [/S1] raises [P1] asthma [/P1] risk");
  CHECK(mark_entities(s, s.candidates[0], MarkerScheme::None) == "rs123 raises asthma risk");
}

TEST_CASE("two pairs over one sentence differ only in marker placement") {
  const Corpus c = parse_corpus(data_path("two_docs.jsonl"), CorpusFormat::CanonicalJsonl);
  const auto& s = c.documents[0].sentences[0];
  const std::string a = mark_entities(s, s.candidates[0], MarkerScheme::WrapMarkers);
  const std::string b = mark_entities(s, s.candidates[1], MarkerScheme::WrapMarkers);
  CHECK(a == "[S1] rs1 [/S1] and rs2 were associated with [P1] obesity [/P1].");
  CHECK(b == "rs1 and [S1] rs2 [/S1] were associated with [P1] obesity [/P1].");
  auto strip = [](std::string x) {
    for (auto m : {"[S1] ", " [/S1]", "[P1] ", " [/P1]"}) x.erase(x.find(m), std::string_view(m).size());
    return x;
  };
  CHECK(strip(a) == s.text);
  CHECK(strip(b) == s.text);
}

TEST_CASE("phenotype before SNP and non-ASCII text") {
  const std::string text = "Ménière’s disease and rs42";
  // Code point offsets: "Ménière’s disease" = [0, 17), "rs42" = [22, 26)
  EntityMention snp{"s", EntityKind::Snp, "rs42", 22, 26, {}};
  EntityMention ph{"p", EntityKind::Phenotype, "Ménière’s disease", 0, 17, {}};
  CHECK(mark_entities(text, snp, ph, MarkerScheme::WrapMarkers) == "[P1] Ménière’s disease [/P1] and [S1] rs42 [/S1]");
}

TEST_CASE("overlapping mentions are rejected") {
  EntityMention snp{"s", EntityKind::Snp, "rs1 asthma", 0, 10, {}};
  EntityMention ph{"p", EntityKind::Phenotype, "asthma", 4, 10, {}};
  CHECK_THROWS_AS(mark_entities("rs1 asthma", snp, ph, MarkerScheme::WrapMarkers), OverlappingMentions);
}

TEST_CASE("label encoding merges negative and neutral") {
  CHECK(encode_labels(Label::Positive) == 1);
  CHECK(encode_labels(Label::Negative) == 0);
  CHECK(encode_labels(Label::Neutral) == 0);
}

TEST_CASE("sentence of 12 tokens at max_len 70 pads 58") {
  const std::string text = "rs123 raises asthma risk in adult patients today";
  const Corpus c = single(text, 0, 5, 13, 19);
  const auto cfg = PreprocessConfig::raw();
  const Vocabulary vocab = Vocabulary::build(c, cfg);
  const auto inst = build_instance(c.documents[0].sentences[0].candidates[0], c, Level::Sentence, 70, cfg, vocab);
  CHECK(inst.true_length == 12);
  CHECK(inst.token_ids.size() == 70);
  CHECK(std::count(inst.token_ids.begin(), inst.token_ids.end(), Vocabulary::kPad) == 58);
  CHECK(inst.class_id == 1);
  CHECK(inst.document_ref == "D");
  CHECK(inst.token_ids[0] == vocab.id_of("[S1]"));
  CHECK(inst.tokens[1] == "rs123");

  // Boundary: max_len equal to the token count.
  const auto exact = build_instance(c.documents[0].sentences[0].candidates[0], c, Level::Sentence, 12, cfg, vocab);
  CHECK(exact.true_length == 12);
  CHECK(std::count(exact.token_ids.begin(), exact.token_ids.end(), Vocabulary::kPad) == 0);
  CHECK(exact.tokens == inst.tokens);
}

TEST_CASE("abstract longer than 300 tokens keeps all markers") {
  Corpus c;
  Document d;
  d.id = "D";
  for (int s = 0; s < 40; ++s) {
    Sentence sent;
    sent.id = "D.s" + std::to_string(s);
    sent.text = "filler words number " + std::to_string(s) + " describe the cohort and the study design here";
    if (s == 30) {
      sent.text = "rs99 increases obesity risk";
      sent.mentions.push_back({"e0", EntityKind::Snp, "rs99", 0, 4, {}});
      sent.mentions.push_back({"e1", EntityKind::Phenotype, "obesity", 15, 22, {}});
      sent.candidates.push_back({"p0", "e0", "e1", Label::Neutral, sent.id, {}});
    }
    d.sentences.push_back(sent);
  }
  c.documents.push_back(d);
  REQUIRE(validate_corpus(c).ok());
  const auto cfg = PreprocessConfig::raw();
  const Vocabulary vocab = Vocabulary::build(c, cfg);
  const auto inst = build_instance(c.documents[0].sentences[30].candidates[0], c, Level::Abstract, 300, cfg, vocab);
  CHECK(inst.true_length == 300);
  CHECK(count_markers(inst.tokens) == 4);
  CHECK(inst.class_id == 0);
  CHECK(inst.level == Level::Abstract);

  const auto sentence_level =
      build_instance(c.documents[0].sentences[30].candidates[0], c, Level::Sentence, 70, cfg, vocab);
  CHECK(sentence_level.true_length == 8);
}

TEST_CASE("unknown pair and short max_len are rejected") {
  const Corpus c = single("rs123 raises asthma risk", 0, 5, 13, 19);
  const auto cfg = PreprocessConfig::raw();
  const Vocabulary vocab;
  CandidatePair ghost{"ghost", "e0", "e1", Label::Positive, "D.s0", {}};
  CHECK_THROWS_AS(build_instance(ghost, c, Level::Sentence, 70, cfg, vocab), UnknownPair);
  CHECK_THROWS_AS(build_instance(c.documents[0].sentences[0].candidates[0], c, Level::Sentence, 7, cfg, vocab),
                  ConfigMismatch);
}

TEST_CASE("truncation re-centres on the marked span") {
  std::vector<std::string> tokens;
  for (int i = 0; i < 50; ++i) tokens.push_back("w" + std::to_string(i));
  tokens[30] = "[S1]";
  tokens[32] = "[/S1]";
  tokens[35] = "[P1]";
  tokens[37] = "[/P1]";
  const auto kept = truncate_tokens(tokens, 10);
  CHECK(kept.size() == 10);
  CHECK(count_markers(kept) == 4);
  // Prefix window when it already contains the markers.
  const auto prefix = truncate_tokens(tokens, 40);
  CHECK(prefix.front() == "w0");
  // Span wider than the budget: markers survive plus nearest neighbours.
  const auto tight = truncate_tokens(tokens, 6);
  CHECK(tight.size() == 6);
  CHECK(count_markers(tight) == 4);
  // No markers: plain right truncation.
  std::vector<std::string> plain(tokens.begin(), tokens.begin() + 20);
  CHECK(truncate_tokens(plain, 5) == std::vector<std::string>{"w0", "w1", "w2", "w3", "w4"});
}

TEST_CASE("character length unit windows the text before tokenizing") {
  std::string text = "intro ";
  for (int i = 0; i < 30; ++i) text += "word" + std::to_string(i) + " ";
  const std::size_t snp = text.size();
  text += "rs5 alters asthma";
  const std::size_t ph = text.find("asthma");
  const Corpus c = single(text, snp, snp + 3, ph, ph + 6);
  auto cfg = PreprocessConfig::raw();
  cfg.length_unit = LengthUnit::Characters;
  const Vocabulary vocab;
  const auto inst = build_instance(c.documents[0].sentences[0].candidates[0], c, Level::Sentence, 70, cfg, vocab);
  CHECK(count_markers(inst.tokens) == 4);
  CHECK(inst.token_ids.size() == 70);
  std::size_t chars = 0;
  for (const auto& t : inst.tokens) chars += t.size();
  CHECK(chars + inst.true_length - 1 <= 70);
}

TEST_CASE("vocabulary layout and persistence") {
  const Corpus c = parse_corpus(data_path("two_docs.jsonl"), CorpusFormat::CanonicalJsonl);
  const Vocabulary v = Vocabulary::build(c, PreprocessConfig::standard());
  CHECK(v.id_of("[PAD]") == 0);
  CHECK(v.id_of("[UNK]") == 1);
  CHECK(v.id_of("[S1]") == 2);
  CHECK(v.id_of("[/P1]") == 5);
  // "." and "obes" both occur three times; ties go lexicographic.
  CHECK(v.id_of(".") == 6);
  CHECK(v.id_of("obes") == 7);
  CHECK(v.id_of("never-seen") == Vocabulary::kUnk);
  const auto path = std::filesystem::temp_directory_path() / "snprex_vocab.txt";
  v.save(path);
  CHECK(Vocabulary::load(path) == v);
}

TEST_CASE("instance properties over random corpora") {
  Rng rng(21);
  const auto cfg = PreprocessConfig::standard();
  for (int trial = 0; trial < 30; ++trial) {
    const Corpus c = testing::random_corpus(rng, 1 + rng.below(5), 5, trial % 3 == 0);
    const Vocabulary vocab = Vocabulary::build(c, cfg);
    const CorpusStats stats = corpus_stats(c);
    for (Level level : {Level::Sentence, Level::Abstract}) {
      const std::size_t max_len = 8 + rng.below(30);
      const auto instances = build_instances(c, level, max_len, cfg, vocab);
      CHECK(instances.size() == stats.n_candidates);
      std::size_t ones = 0;
      for (const auto& inst : instances) {
        CHECK(inst.true_length <= max_len);
        CHECK(inst.token_ids.size() == max_len);
        for (std::size_t i = inst.true_length; i < max_len; ++i) CHECK(inst.token_ids[i] == Vocabulary::kPad);
        CHECK(count_markers(inst.tokens) == 4);
        ones += inst.class_id == 1;
      }
      CHECK(ones == stats.n_positive);
      CHECK(instances.size() - ones == stats.n_negative + stats.n_neutral);

      // Deterministic, and truncation never changes identity or class.
      const auto again = build_instances(c, level, max_len, cfg, vocab);
      CHECK(again == instances);
      const auto wide = build_instances(c, level, 400, cfg, vocab);
      for (std::size_t i = 0; i < instances.size(); ++i) {
        CHECK(wide[i].candidate_ref == instances[i].candidate_ref);
        CHECK(wide[i].class_id == instances[i].class_id);
      }
    }
  }
}
