#include "snprex/encoder.hpp"

#include <cmath>
#include <cstdio>
#include <exception>

#include "snprex/bert.hpp"
#include "snprex/errors.hpp"
#include "snprex/rng.hpp"

namespace snprex {

std::string_view to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::ContextualPretrained: return "contextual_pretrained";
    case EncoderKind::StaticLookup: return "static_lookup";
    case EncoderKind::Hashing: return "hashing";
  }
  return "?";
}

std::optional<EncoderKind> parse_encoder_kind(std::string_view s) {
  for (auto k : {EncoderKind::ContextualPretrained, EncoderKind::StaticLookup, EncoderKind::Hashing}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

void EncoderSpec::validate() const {
  switch (kind) {
    case EncoderKind::Hashing:
      if (d == 0) throw ConfigMismatch("hashing encoder needs d > 0");
      break;
    case EncoderKind::StaticLookup:
      if (d == 0 || vocab_size == 0) throw ConfigMismatch("static lookup encoder needs d > 0 and vocab_size > 0");
      break;
    case EncoderKind::ContextualPretrained:
      if (model_id_or_path.empty()) throw ConfigMismatch("contextual encoder needs model_id_or_path");
      break;
  }
}

std::string encoder_signature(const EncoderSpec& spec) {
  std::string canon = "snprex-encoder/1;kind=" + std::string(to_string(spec.kind)) + ";d=" + std::to_string(spec.d);
  switch (spec.kind) {
    case EncoderKind::Hashing: canon += ";seed=" + std::to_string(spec.seed); break;
    case EncoderKind::StaticLookup:
      canon += ";vocab=" + std::to_string(spec.vocab_size) + ";seed=" + std::to_string(spec.seed);
      break;
    case EncoderKind::ContextualPretrained:
      canon += ";model=" + spec.model_id_or_path + ";seed=" + std::to_string(spec.seed);
      break;
  }
  const auto h = fnv1a64({reinterpret_cast<const unsigned char*>(canon.data()), canon.size()});
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return std::string(to_string(spec.kind)) + "-d" + std::to_string(spec.d) + "-" + hex;
}

std::vector<std::pair<std::string, const Tensor*>> Encoder::parameters() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [n, t] : const_cast<Encoder*>(this)->parameters()) out.emplace_back(n, t);
  return out;
}

void Encoder::backward(const TokenizedInstance&, const EncoderTape*, const Tensor&, std::vector<Tensor>&) const {}

std::vector<Tensor> Encoder::zero_gradients() const {
  std::vector<Tensor> g;
  for (const auto& [n, t] : parameters()) g.emplace_back(t->shape());
  return g;
}

namespace {

void check_instance(const TokenizedInstance& inst) {
  if (inst.true_length > inst.max_len()) {
    throw DimensionMismatch("instance " + inst.candidate_ref + " has true_length > max_len");
  }
}

}  // namespace

// ---------------------------------------------------------------------------

HashingEncoder::HashingEncoder(EncoderSpec spec) : Encoder(std::move(spec)) {
  spec_.validate();
  if (spec_.kind != EncoderKind::Hashing) throw ConfigMismatch("HashingEncoder needs kind hashing");
  spec_.trainable = false;
}

std::vector<double> HashingEncoder::token_vector(std::string_view token) const {
  const auto h = fnv1a64({reinterpret_cast<const unsigned char*>(token.data()), token.size()}, mix_seed(spec_.seed, 0xA5));
  Rng rng(h);
  std::vector<double> v(spec_.d);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

EmbeddingMatrix HashingEncoder::embed(const TokenizedInstance& inst) const {
  check_instance(inst);
  EmbeddingMatrix E{Tensor({inst.max_len(), spec_.d}), inst.true_length};
  for (std::size_t t = 0; t < inst.true_length && t < inst.tokens.size(); ++t) {
    if (inst.tokens[t] == "[PAD]") continue;
    const auto v = token_vector(inst.tokens[t]);
    std::copy(v.begin(), v.end(), E.values.row(t).begin());
  }
  return E;
}

// ---------------------------------------------------------------------------

StaticLookupEncoder::StaticLookupEncoder(EncoderSpec spec) : Encoder(std::move(spec)) {
  spec_.validate();
  if (spec_.kind != EncoderKind::StaticLookup) throw ConfigMismatch("StaticLookupEncoder needs kind static_lookup");
  table_ = Tensor({spec_.vocab_size, spec_.d});
  Rng rng(mix_seed(spec_.seed, 0x57A7));
  for (auto& v : table_.values()) v = 0.1 * rng.normal();
  // The padding row stays zero.
  for (auto& v : table_.row(Vocabulary::kPad)) v = 0.0;
}

EmbeddingMatrix StaticLookupEncoder::embed(const TokenizedInstance& inst) const {
  check_instance(inst);
  EmbeddingMatrix E{Tensor({inst.max_len(), spec_.d}), inst.true_length};
  for (std::size_t t = 0; t < inst.true_length; ++t) {
    const auto id = static_cast<std::size_t>(inst.token_ids[t]);
    if (id >= spec_.vocab_size) {
      throw DimensionMismatch("token id " + std::to_string(id) + " outside the lookup table of " +
                              std::to_string(spec_.vocab_size) + " rows");
    }
    const auto src = table_.row(id);
    std::copy(src.begin(), src.end(), E.values.row(t).begin());
  }
  return E;
}

std::vector<std::pair<std::string, Tensor*>> StaticLookupEncoder::parameters() {
  if (!spec_.trainable) return {};
  return {{"encoder.table", &table_}};
}

void StaticLookupEncoder::backward(const TokenizedInstance& inst, const EncoderTape*, const Tensor& dE,
                                   std::vector<Tensor>& grads) const {
  if (!spec_.trainable) return;
  if (grads.size() != 1 || !grads[0].same_shape(table_)) throw ShapeMismatch("lookup gradient has the wrong shape");
  for (std::size_t t = 0; t < inst.true_length; ++t) {
    const auto id = static_cast<std::size_t>(inst.token_ids[t]);
    if (id == static_cast<std::size_t>(Vocabulary::kPad)) continue;
    auto dst = grads[0].row(id);
    const auto src = dE.row(t);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
  }
}

// ---------------------------------------------------------------------------

std::unique_ptr<Encoder> make_encoder(const EncoderSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case EncoderKind::Hashing: return std::make_unique<HashingEncoder>(spec);
    case EncoderKind::StaticLookup: return std::make_unique<StaticLookupEncoder>(spec);
    case EncoderKind::ContextualPretrained: return std::make_unique<BertEncoder>(spec);
  }
  throw ConfigMismatch("unknown encoder kind");
}

std::vector<EmbeddingMatrix> embed_all(const Encoder& encoder, const std::vector<TokenizedInstance>& instances) {
  std::vector<EmbeddingMatrix> out(instances.size());
  std::vector<std::exception_ptr> failures(instances.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(instances.size()); ++i) {
    try {
      out[i] = encoder.embed(instances[i]);
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
