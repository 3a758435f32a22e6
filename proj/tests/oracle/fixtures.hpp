#pragma once

#include <string>

#include "snprex/corpus.hpp"
#include "snprex/rng.hpp"

namespace snprex::testing {

std::string data_path(const std::string& name);

/// Random valid corpus: each sentence is filler words with SNP and phenotype
/// mentions spliced in, and candidates over random SNP x phenotype pairs.
Corpus random_corpus(Rng& rng, std::size_t n_documents, std::size_t max_sentences = 4,
                     bool non_ascii = false);

}  // namespace snprex::testing

#include "snprex/preprocess.hpp"

namespace snprex::testing {

/// Sentence-level instances over a pool of synthetic words with the four
/// markers placed at random; labels alternate 0/1 so the set is balanced.
std::vector<TokenizedInstance> random_instances(Rng& rng, std::size_t n, std::size_t max_len, Vocabulary* vocab = nullptr);

}  // namespace snprex::testing
