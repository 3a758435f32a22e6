#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "snprex/preprocess.hpp"
#include "snprex/tensor.hpp"

namespace snprex {

enum class EncoderKind { ContextualPretrained, StaticLookup, Hashing };

std::string_view to_string(EncoderKind k);
std::optional<EncoderKind> parse_encoder_kind(std::string_view s);

struct EncoderSpec {
  EncoderKind kind = EncoderKind::Hashing;
  std::size_t d = 64;             // 0 for contextual means "take it from the model config"
  std::string model_id_or_path;   // contextual only
  std::size_t vocab_size = 0;     // static lookup only
  std::uint64_t seed = 0;
  bool trainable = false;

  /// Throws ConfigMismatch on inconsistent fields.
  void validate() const;
  bool operator==(const EncoderSpec&) const = default;
};

/// Stable content hash of kind, d, model identity, vocabulary size and seed.
std::string encoder_signature(const EncoderSpec& spec);

/// Whatever a trainable encoder records during a training-mode forward pass.
struct EncoderTape {
  virtual ~EncoderTape() = default;
};

class Encoder {
 public:
  explicit Encoder(EncoderSpec spec) : spec_(std::move(spec)) {}
  virtual ~Encoder() = default;

  const EncoderSpec& spec() const { return spec_; }
  std::size_t width() const { return spec_.d; }
  std::string signature() const { return encoder_signature(spec_); }

  /// Evaluation-mode embedding: L x d with L = instance max_len. Rows at
  /// positions >= true_length are zero.
  virtual EmbeddingMatrix embed(const TokenizedInstance& instance) const = 0;

  /// Training-mode embedding; `tape` receives what backward() needs (null for
  /// encoders without trainable state).
  virtual EmbeddingMatrix embed(const TokenizedInstance& instance, std::unique_ptr<EncoderTape>& tape) const {
    tape.reset();
    return embed(instance);
  }

  bool trainable() const { return spec_.trainable && !parameters().empty(); }
  /// Named trainable tensors in a fixed order (empty when there are none).
  virtual std::vector<std::pair<std::string, Tensor*>> parameters() { return {}; }
  std::vector<std::pair<std::string, const Tensor*>> parameters() const;

  /// Adds d(loss)/d(parameters) to `grads` (same order and shapes as
  /// parameters()) given the gradient at the embedding matrix.
  virtual void backward(const TokenizedInstance& instance, const EncoderTape* tape, const Tensor& d_embedding,
                        std::vector<Tensor>& grads) const;

  /// The tokenizer instances must be built with, when the encoder owns one
  /// (subword models). Word-level encoders return null and use a Vocabulary.
  virtual const Tokenizer* tokenizer() const { return nullptr; }

  /// Zero tensors shaped like parameters().
  std::vector<Tensor> zero_gradients() const;

 protected:
  EncoderSpec spec_;
};

/// Deterministic feature hashing: each token maps to a unit-norm Gaussian
/// direction seeded by hash(token, seed).
class HashingEncoder : public Encoder {
 public:
  explicit HashingEncoder(EncoderSpec spec);
  EmbeddingMatrix embed(const TokenizedInstance& instance) const override;
  std::vector<double> token_vector(std::string_view token) const;
};

/// Lookup table of vocab_size x d rows drawn N(0, 0.1^2) from the seed.
class StaticLookupEncoder : public Encoder {
 public:
  explicit StaticLookupEncoder(EncoderSpec spec);
  EmbeddingMatrix embed(const TokenizedInstance& instance) const override;
  std::vector<std::pair<std::string, Tensor*>> parameters() override;
  void backward(const TokenizedInstance& instance, const EncoderTape* tape, const Tensor& d_embedding,
                std::vector<Tensor>& grads) const override;
  const Tensor& table() const { return table_; }

 private:
  Tensor table_;
};

/// Builds the encoder for `spec`. The contextual kind loads weights from
/// spec.model_id_or_path and throws ModelUnavailable when they are missing.
std::unique_ptr<Encoder> make_encoder(const EncoderSpec& spec);

/// Embeds every instance, in parallel.
std::vector<EmbeddingMatrix> embed_all(const Encoder& encoder, const std::vector<TokenizedInstance>& instances);

}  // namespace snprex
