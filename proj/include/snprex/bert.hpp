#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "snprex/encoder.hpp"

namespace snprex {

/// Reads every tensor of a .safetensors file (F64, F32, F16 and BF16 are
/// converted to double). Throws ModelUnavailable when the file is missing and
/// MalformedRecord when it is corrupt.
std::map<std::string, Tensor> read_safetensors(const std::filesystem::path& path);
/// Writes F64 tensors, keys in lexicographic order.
void write_safetensors(const std::filesystem::path& path, const std::map<std::string, Tensor>& tensors);

struct BertConfig {
  std::size_t vocab_size = 0;
  std::size_t hidden = 0;
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::size_t intermediate = 0;
  std::size_t max_positions = 0;
  std::size_t type_vocab = 2;
  double layer_norm_eps = 1e-12;
  double initializer_range = 0.02;

  /// Reads a transformers-style config.json.
  static BertConfig load(const std::filesystem::path& path);
};

/// BERT basic tokenization (cleanup, optional lowercasing with accent
/// stripping, punctuation splitting) followed by greedy longest-match
/// WordPiece. The four entity markers are never split.
class WordPieceTokenizer : public Tokenizer {
 public:
  WordPieceTokenizer(std::vector<std::string> vocab, bool lowercase);
  static WordPieceTokenizer load(const std::filesystem::path& vocab_txt, bool lowercase);

  /// Appends `token` when absent; returns its id.
  std::int32_t add_token(const std::string& token);

  /// Normalization flags of `cfg` are ignored: subword models see the text
  /// as written apart from their own lowercasing.
  std::vector<std::string> tokenize(std::string_view marked_text, const PreprocessConfig& cfg) const override;
  std::vector<std::string> tokenize(std::string_view text) const;
  std::int32_t id_of(std::string_view token) const override;
  std::int32_t pad_id() const override;
  std::vector<std::string> prefix() const override { return {"[CLS]"}; }
  std::vector<std::string> suffix() const override { return {"[SEP]"}; }

  std::size_t size() const { return vocab_.size(); }
  bool lowercase() const { return lowercase_; }

 private:
  std::vector<std::string> basic_tokenize(std::string_view text) const;
  void wordpiece(const std::string& word, std::vector<std::string>& out) const;

  std::vector<std::string> vocab_;
  std::map<std::string, std::int32_t, std::less<>> ids_;
  bool lowercase_;
};

struct BertLayerWeights {
  Tensor query_w, query_b, key_w, key_b, value_w, value_b;
  Tensor attn_out_w, attn_out_b, attn_ln_g, attn_ln_b;
  Tensor inter_w, inter_b, out_w, out_b, out_ln_g, out_ln_b;
};

struct BertWeights {
  Tensor word, position, token_type, emb_ln_g, emb_ln_b;
  std::vector<BertLayerWeights> layers;

  /// transformers parameter names ("embeddings.word_embeddings.weight", ...).
  std::vector<std::pair<std::string, Tensor*>> named();
};

/// Contextual encoder: BERT forward pass over the first true_length tokens,
/// last-layer hidden states as the embedding. Training mode keeps a tape and
/// backward() yields exact gradients for fine-tuning. No dropout runs inside
/// the encoder.
class BertEncoder : public Encoder {
 public:
  /// Loads config.json, vocab.txt, and model.safetensors from spec.model_id_or_path.
  explicit BertEncoder(EncoderSpec spec);
  BertEncoder(EncoderSpec spec, BertConfig config, BertWeights weights, WordPieceTokenizer tokenizer);

  EmbeddingMatrix embed(const TokenizedInstance& instance) const override;
  EmbeddingMatrix embed(const TokenizedInstance& instance, std::unique_ptr<EncoderTape>& tape) const override;
  std::vector<std::pair<std::string, Tensor*>> parameters() override;
  void backward(const TokenizedInstance& instance, const EncoderTape* tape, const Tensor& d_embedding,
                std::vector<Tensor>& grads) const override;
  const Tokenizer* tokenizer() const override { return &tokenizer_; }

  const BertConfig& config() const { return config_; }
  BertWeights& weights() { return weights_; }

 private:
  EmbeddingMatrix run(const TokenizedInstance& instance, std::unique_ptr<EncoderTape>* tape) const;
  void finish_setup();

  BertConfig config_;
  BertWeights weights_;
  WordPieceTokenizer tokenizer_;
};

}  // namespace snprex
