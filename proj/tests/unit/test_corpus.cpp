#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracle/fixtures.hpp"
#include "snprex/corpus.hpp"
#include "snprex/errors.hpp"

using namespace snprex;
using snprex::testing::data_path;

namespace {

Corpus read_string(const std::string& text) {
  std::istringstream in(text);
  return read_canonical_jsonl(in, "inline");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("snprex_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("minimal canonical fixture parses to the expected stats") {
  const Corpus c = parse_corpus(data_path("minimal.jsonl"), CorpusFormat::CanonicalJsonl);
  CHECK(corpus_stats(c) == CorpusStats{1, 1, 1, 1, 0, 0});
  const auto& pair = c.documents[0].sentences[0].candidates[0];
  CHECK(pair.extras.at("confidence") == "high");
  CHECK(pair.sentence_ref == "D1.s0");
  CHECK(validate_corpus(c).ok());
}

TEST_CASE("two-document fixture counts match a hand tally") {
  // A: 2 positive; B: 1 positive, 1 neutral.
  const Corpus c = parse_corpus(data_path("two_docs.jsonl"), CorpusFormat::CanonicalJsonl);
  const CorpusStats s = corpus_stats(c);
  CHECK(s.n_documents == 2);
  CHECK(s.n_sentences == 3);
  CHECK(s.n_candidates == 4);
  CHECK(s.n_positive == 3);
  CHECK(s.n_negative == 0);
  CHECK(s.n_neutral == 1);
}

TEST_CASE("empty corpus has zero stats") {
  CHECK(corpus_stats(Corpus{}) == CorpusStats{});
}

TEST_CASE("missing path and empty inputs are errors") {
  CHECK_THROWS_AS(parse_corpus("/nonexistent/snpphena", CorpusFormat::SnpphenaNative), MissingPath);
  CHECK_THROWS_AS(parse_corpus("/nonexistent/x.jsonl", CorpusFormat::CanonicalJsonl), MissingPath);
  const auto dir = temp_dir("empty");
  CHECK_THROWS_AS(parse_corpus(dir, CorpusFormat::SnpphenaNative), MalformedRecord);
  std::ofstream(dir / "empty.jsonl").close();
  CHECK_THROWS_AS(parse_corpus(dir / "empty.jsonl", CorpusFormat::CanonicalJsonl), MalformedRecord);
}

TEST_CASE("malformed canonical records name file and line") {
  const std::string header = "{\"schema\":\"snprex-corpus/1\"}\n";
  try {
    read_string(header + "{\"id\":\"x\",\"sentences\":[{\"id\":\"s\"}]}\n");
    FAIL("expected MalformedRecord");
  } catch (const MalformedRecord& e) {
    CHECK(std::string(e.what()).find("inline:2") != std::string::npos);
    CHECK(std::string(e.what()).find("text") != std::string::npos);
  }
  CHECK_THROWS_AS(read_string(header + "not json\n"), MalformedRecord);
  CHECK_THROWS_AS(read_string("{\"schema\":\"other/9\"}\n"), MalformedRecord);
  CHECK_THROWS_AS(read_string("{\"id\":\"x\",\"sentences\":[]}\n"), MalformedRecord);
}

TEST_CASE("validation reports offsets past the sentence end") {
  Corpus c = parse_corpus(data_path("minimal.jsonl"), CorpusFormat::CanonicalJsonl);
  auto& m = c.documents[0].sentences[0].mentions[1];
  m.char_end = 100;
  const auto report = validate_corpus(c);
  CHECK_FALSE(report.ok());
  REQUIRE(report.errors.size() == 1);
  CHECK(report.errors[0].kind == IssueKind::OffsetMismatch);
  CHECK(report.errors[0].document_id == "D1");
}

TEST_CASE("validation reports labels outside the domain") {
  std::string text = slurp(data_path("minimal.jsonl"));
  text.replace(text.find("\"positive\""), 10, "\"maybe\"");
  const Corpus c = read_string(text);
  const auto report = validate_corpus(c);
  CHECK_FALSE(report.ok());
  REQUIRE(report.errors.size() == 1);
  CHECK(report.errors[0].kind == IssueKind::LabelDomain);

  const auto dir = temp_dir("label");
  std::ofstream(dir / "bad.jsonl") << text;
  CHECK_THROWS_AS(parse_corpus(dir / "bad.jsonl", CorpusFormat::CanonicalJsonl), MalformedRecord);
}

TEST_CASE("surface disagreeing with offsets raises OffsetMismatch on parse") {
  std::string text = slurp(data_path("minimal.jsonl"));
  text.replace(text.find("\"surface\":\"asthma\""), 18, "\"surface\":\"asthmo\"");
  const auto dir = temp_dir("offset");
  std::ofstream(dir / "bad.jsonl") << text;
  CHECK_THROWS_AS(parse_corpus(dir / "bad.jsonl", CorpusFormat::CanonicalJsonl), OffsetMismatch);
}

TEST_CASE("validation catches dangling references and kind mismatches") {
  Corpus c = parse_corpus(data_path("minimal.jsonl"), CorpusFormat::CanonicalJsonl);
  auto& pair = c.documents[0].sentences[0].candidates[0];
  std::swap(pair.snp_ref, pair.pheno_ref);
  auto report = validate_corpus(c);
  CHECK(report.errors.size() == 2);
  CHECK(report.errors[0].kind == IssueKind::KindMismatch);
  pair.snp_ref = "nope";
  report = validate_corpus(c);
  CHECK(report.errors[0].kind == IssueKind::DanglingReference);
}

TEST_CASE("duplicate ids are errors") {
  Corpus c = parse_corpus(data_path("two_docs.jsonl"), CorpusFormat::CanonicalJsonl);
  c.documents[1].id = "A";
  CHECK(validate_corpus(c).errors.size() == 1);
  c.documents[1].id = "B";
  c.documents[1].sentences[1].candidates[1].id = "B.s1.p0";
  CHECK(validate_corpus(c).errors.size() == 1);
}

TEST_CASE("native SNPPhenA layout: offsets, labels, extras, split hints") {
  const Corpus c = parse_corpus(data_path("snpphena_native"), CorpusFormat::SnpphenaNative);
  CHECK(corpus_stats(c) == CorpusStats{2, 3, 4, 2, 1, 1});
  REQUIRE(c.documents.size() == 2);
  const Document& d1 = c.documents[0];
  CHECK(d1.id == "10001");
  CHECK(d1.title.value() == "GWAS of asthma & obesity");
  CHECK(d1.split_hint == SplitHint::Train);
  CHECK(c.documents[1].split_hint == SplitHint::Test);
  CHECK_FALSE(c.documents[1].title.has_value());

  const Sentence& s1 = d1.sentences[1];
  CHECK(s1.text.find("(p > 0.05)") != std::string::npos);
  const auto& crohn = s1.mentions[1];
  CHECK(crohn.surface == "Crohn’s disease");
  CHECK(crohn.char_start == 37);
  CHECK(crohn.char_end == 52);
  CHECK(s1.mentions[0].normalized.value() == "rs9939609");

  const auto& p0 = d1.sentences[0].candidates[0];
  CHECK(p0.label == Label::Positive);
  CHECK(p0.extras == std::map<std::string, std::string>{{"confidence", "high"}, {"modality", "certain"}, {"negation", "no"}});

  // e1/e2 given phenotype-first are reordered by kind.
  const auto& swapped = c.documents[1].sentences[0].candidates[0];
  CHECK(swapped.snp_ref == "10002.s0.e0");
  CHECK(swapped.pheno_ref == "10002.s0.e1");
  CHECK(swapped.label == Label::Neutral);
}

TEST_CASE("native adapter rejects malformed XML") {
  CHECK_THROWS_AS(read_snpphena_document("<document id='x'><sentence", "x.xml", std::nullopt), MalformedRecord);
  CHECK_THROWS_AS(read_snpphena_document("<document id='x'><sentence id='s' text='ab'>"
                                         "<entity id='e' charOffset='0-0;1-1' type='SNP' text='a'/></sentence></document>",
                                         "x.xml", std::nullopt),
                  MalformedRecord);
  CHECK_THROWS_AS(read_snpphena_document("<document id='x'><sentence id='s' text='ab'>"
                                         "<entity id='e' charOffset='0-0' type='Gene' text='a'/></sentence></document>",
                                         "x.xml", std::nullopt),
                  MalformedRecord);
}

TEST_CASE("serialization is byte-stable and round-trips") {
  const Corpus c = parse_corpus(data_path("minimal.jsonl"), CorpusFormat::CanonicalJsonl);
  const std::string a = serialize_corpus(c);
  const std::string b = serialize_corpus(c);
  CHECK(a == b);
  CHECK(a == slurp(data_path("minimal.jsonl")));
  CHECK(read_string(a) == c);

  const Corpus native = parse_corpus(data_path("snpphena_native"), CorpusFormat::SnpphenaNative);
  const Corpus back = read_string(serialize_corpus(native));
  CHECK(back == native);
  CHECK(corpus_stats(back) == corpus_stats(native));
}

TEST_CASE("round-trip identity over random corpora, including non-ASCII surfaces") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Corpus c = testing::random_corpus(rng, 1 + rng.below(6), 4, trial % 2 == 0);
    REQUIRE(validate_corpus(c).ok());
    const Corpus back = read_string(serialize_corpus(c));
    CHECK(back == c);
    CHECK(serialize_corpus(back) == serialize_corpus(c));
  }
}

TEST_CASE("official split follows the split hints") {
  const Corpus c = parse_corpus(data_path("two_docs.jsonl"), CorpusFormat::CanonicalJsonl);
  auto [train, test] = split_dataset(c, {SplitMode::Official, 0.0, 0});
  REQUIRE(train.documents.size() == 1);
  REQUIRE(test.documents.size() == 1);
  CHECK(train.documents[0].id == "A");
  CHECK(test.documents[0].id == "B");

  Corpus no_hints = c;
  no_hints.documents[0].split_hint.reset();
  CHECK_THROWS_AS(split_dataset(no_hints, {SplitMode::Official, 0.0, 0}), MissingSplitHint);
}

TEST_CASE("stratified split: fraction zero, determinism, additivity, proportions") {
  Rng rng(3);
  const Corpus c = testing::random_corpus(rng, 120);

  auto [all, none] = split_dataset(c, {SplitMode::Stratified, 0.0, 7});
  CHECK(all == c);
  CHECK(none.documents.empty());

  const auto a = split_dataset(c, {SplitMode::Stratified, 0.25, 7});
  const auto b = split_dataset(c, {SplitMode::Stratified, 0.25, 7});
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(corpus_stats(a.first) + corpus_stats(a.second) == corpus_stats(c));

  const CorpusStats total = corpus_stats(c);
  const CorpusStats test = corpus_stats(a.second);
  auto share = [](std::size_t part, std::size_t whole) { return whole == 0 ? 0.0 : double(part) / double(whole); };
  CHECK(share(test.n_positive, total.n_positive) == doctest::Approx(0.25).epsilon(0.2));
  CHECK(share(test.n_negative, total.n_negative) == doctest::Approx(0.25).epsilon(0.2));
  CHECK(share(test.n_neutral, total.n_neutral) == doctest::Approx(0.25).epsilon(0.2));

  // No document on both sides.
  for (const auto& d : a.second.documents) {
    for (const auto& t : a.first.documents) CHECK(d.id != t.id);
  }
  CHECK_THROWS_AS(split_dataset(c, {SplitMode::Stratified, 1.5, 7}), ConfigMismatch);
}

TEST_CASE("stats additivity holds for every split seed") {
  Rng rng(5);
  const Corpus c = testing::random_corpus(rng, 40);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const double fraction = 0.05 * static_cast<double>(seed);
    const auto [train, test] = split_dataset(c, {SplitMode::Stratified, fraction, seed});
    CHECK(corpus_stats(train) + corpus_stats(test) == corpus_stats(c));
  }
}
