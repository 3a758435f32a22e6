#include "oracle/fixtures.hpp"

#include <array>

#include "snprex/utf8.hpp"

namespace snprex::testing {

std::string data_path(const std::string& name) { return std::string(SNPREX_TEST_DATA_DIR) + "/" + name; }

namespace {

constexpr std::array<const char*, 16> kFiller = {
    "the", "variant", "was", "strongly", "associated", "with", "increased", "risk", "of", "in",
    "patients", "no", "significant", "effect", "on", "cohort"};
constexpr std::array<const char*, 6> kPhenotypes = {"asthma", "obesity", "type 2 diabetes", "Crohn's disease",
                                                    "breast cancer", "hypertension"};
constexpr std::array<const char*, 3> kNonAscii = {"Ménière’s disease", "Sjögren syndrome", "β-thalassemia"};

}  // namespace

Corpus random_corpus(Rng& rng, std::size_t n_documents, std::size_t max_sentences, bool non_ascii) {
  Corpus corpus;
  corpus.provenance.source = "random";
  for (std::size_t d = 0; d < n_documents; ++d) {
    Document doc;
    doc.id = "doc" + std::to_string(d);
    if (rng.below(2) == 0) doc.title = "Title " + std::to_string(d);
    doc.split_hint = rng.below(4) == 0 ? SplitHint::Test : SplitHint::Train;
    const std::size_t n_sent = 1 + rng.below(max_sentences);
    for (std::size_t s = 0; s < n_sent; ++s) {
      Sentence sent;
      sent.id = doc.id + ".s" + std::to_string(s);
      std::size_t cp = 0;
      auto append = [&](const std::string& piece) {
        if (!sent.text.empty()) {
          sent.text += ' ';
          ++cp;
        }
        sent.text += piece;
        cp += utf8::length(piece);
      };
      std::vector<std::string> snps;
      std::vector<std::string> phenos;
      const std::size_t n_items = 3 + rng.below(12);
      for (std::size_t i = 0; i < n_items; ++i) {
        const auto roll = rng.below(6);
        if (roll == 0 || roll == 1) {
          EntityMention m;
          const bool snp = roll == 0;
          m.kind = snp ? EntityKind::Snp : EntityKind::Phenotype;
          if (snp) {
            m.surface = "rs" + std::to_string(100 + rng.below(900));
            m.normalized = m.surface;
          } else if (non_ascii && rng.below(2) == 0) {
            m.surface = kNonAscii[rng.below(kNonAscii.size())];
          } else {
            m.surface = kPhenotypes[rng.below(kPhenotypes.size())];
          }
          m.id = sent.id + ".e" + std::to_string(sent.mentions.size());
          append("");
          // append("") added a separator only; mention starts here.
          m.char_start = cp;
          sent.text += m.surface;
          cp += utf8::length(m.surface);
          m.char_end = cp;
          (snp ? snps : phenos).push_back(m.id);
          sent.mentions.push_back(std::move(m));
        } else {
          append(kFiller[rng.below(kFiller.size())]);
        }
      }
      for (const auto& a : snps) {
        for (const auto& b : phenos) {
          if (rng.below(3) == 0) continue;
          CandidatePair c;
          c.id = sent.id + ".p" + std::to_string(sent.candidates.size());
          c.snp_ref = a;
          c.pheno_ref = b;
          c.sentence_ref = sent.id;
          c.label = static_cast<Label>(rng.below(3));
          if (rng.below(2) == 0) c.extras["confidence"] = std::to_string(rng.below(5));
          sent.candidates.push_back(std::move(c));
        }
      }
      doc.sentences.push_back(std::move(sent));
    }
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

}  // namespace snprex::testing

namespace snprex::testing {

std::vector<TokenizedInstance> random_instances(Rng& rng, std::size_t n, std::size_t max_len, Vocabulary* vocab) {
  std::vector<TokenizedInstance> out;
  for (std::size_t i = 0; i < n; ++i) {
    TokenizedInstance inst;
    inst.candidate_ref = "c" + std::to_string(i);
    inst.document_ref = "d" + std::to_string(i / 3);
    inst.class_id = static_cast<int>(i % 2);
    const std::size_t len = 6 + rng.below(max_len - 6 + 1);
    std::vector<std::string> words;
    for (std::size_t w = 0; w + 4 < len; ++w) words.push_back("w" + std::to_string(rng.below(200)));
    std::size_t a = rng.below(words.size() + 1);
    words.insert(words.begin() + static_cast<long>(a), "[S1]");
    words.insert(words.begin() + static_cast<long>(a) + 1 + static_cast<long>(rng.below(words.size() - a)), "[/S1]");
    std::size_t b = rng.below(words.size() + 1);
    words.insert(words.begin() + static_cast<long>(b), "[P1]");
    words.insert(words.begin() + static_cast<long>(b) + 1 + static_cast<long>(rng.below(words.size() - b)), "[/P1]");
    inst.tokens = words;
    inst.true_length = words.size();
    inst.token_ids.assign(max_len, Vocabulary::kPad);
    for (std::size_t t = 0; t < words.size(); ++t) {
      inst.token_ids[t] = vocab ? vocab->id_of(words[t]) : 2 + static_cast<std::int32_t>(t);
    }
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace snprex::testing
