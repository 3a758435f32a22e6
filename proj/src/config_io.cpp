#include "snprex/config_io.hpp"

#include "snprex/errors.hpp"

namespace snprex {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

template <typename T>
void take(const json& j, const char* key, T& out, const char* where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigMismatch(std::string(where) + "." + key + ": " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
  if (!j.is_object()) throw ConfigMismatch(std::string(where) + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* n : known) ok = ok || k == n;
    if (!ok) throw ConfigMismatch(std::string("unknown key ") + where + "." + k);
  }
}

template <typename E, typename Parse>
void take_enum(const json& j, const char* key, E& out, Parse parse, const char* where) {
  if (!j.contains(key)) return;
  const auto parsed = j.at(key).is_string() ? parse(j.at(key).get<std::string>()) : std::nullopt;
  if (!parsed) throw ConfigMismatch(std::string(where) + "." + key + ": unrecognized value " + j.at(key).dump());
  out = *parsed;
}

std::optional<kernels::Backend> parse_backend(std::string_view s) {
  if (s == "serial") return kernels::Backend::Serial;
  if (s == "openmp") return kernels::Backend::OpenMP;
  return std::nullopt;
}

}  // namespace

ordered_json to_json(const HeadConfig& c) {
  return {{"kernel_width", c.kernel_width}, {"filters", c.filters},         {"hidden", c.hidden},
          {"dense", c.dense},               {"pool_window", c.pool_window}, {"pool_stride", c.pool_stride},
          {"dropout_p", c.dropout_p},       {"use_bias", c.use_bias}};
}

ordered_json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"adam_epsilon", c.adam_epsilon},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"max_len_sentence", c.max_len_sentence},
          {"max_len_abstract", c.max_len_abstract},
          {"seed", c.seed},
          {"level", to_string(c.level)},
          {"shuffle", c.shuffle},
          {"backend", c.backend == kernels::Backend::Serial ? "serial" : "openmp"}};
}

ordered_json to_json(const EncoderSpec& s) {
  return {{"kind", to_string(s.kind)},           {"d", s.d},       {"model_id_or_path", s.model_id_or_path},
          {"vocab_size", s.vocab_size},          {"seed", s.seed}, {"trainable", s.trainable}};
}

ordered_json to_json(const PreprocessConfig& c) {
  return {{"lowercase", c.lowercase},
          {"remove_stopwords", c.remove_stopwords},
          {"stem", c.stem},
          {"lemmatize", c.lemmatize},
          {"marker_scheme", to_string(c.marker_scheme)},
          {"length_unit", to_string(c.length_unit)},
          {"normalize_before_subword", c.normalize_before_subword},
          {"stopword_count", c.stopword_list.size()}};
}

void update_from_json(const json& j, HeadConfig& c) {
  reject_unknown(j, {"kernel_width", "filters", "hidden", "dense", "pool_window", "pool_stride", "dropout_p", "use_bias"},
                 "head");
  take(j, "kernel_width", c.kernel_width, "head");
  take(j, "filters", c.filters, "head");
  take(j, "hidden", c.hidden, "head");
  take(j, "dense", c.dense, "head");
  take(j, "pool_window", c.pool_window, "head");
  take(j, "pool_stride", c.pool_stride, "head");
  take(j, "dropout_p", c.dropout_p, "head");
  take(j, "use_bias", c.use_bias, "head");
}

void update_from_json(const json& j, TrainConfig& c) {
  reject_unknown(j,
                 {"batch_size", "epochs", "learning_rate", "adam_epsilon", "adam_beta1", "adam_beta2",
                  "max_len_sentence", "max_len_abstract", "seed", "level", "shuffle", "backend"},
                 "train");
  take(j, "batch_size", c.batch_size, "train");
  take(j, "epochs", c.epochs, "train");
  take(j, "learning_rate", c.learning_rate, "train");
  take(j, "adam_epsilon", c.adam_epsilon, "train");
  take(j, "adam_beta1", c.adam_beta1, "train");
  take(j, "adam_beta2", c.adam_beta2, "train");
  take(j, "max_len_sentence", c.max_len_sentence, "train");
  take(j, "max_len_abstract", c.max_len_abstract, "train");
  take(j, "seed", c.seed, "train");
  take_enum(j, "level", c.level, parse_level, "train");
  take(j, "shuffle", c.shuffle, "train");
  take_enum(j, "backend", c.backend, parse_backend, "train");
}

void update_from_json(const json& j, EncoderSpec& s) {
  reject_unknown(j, {"kind", "d", "model_id_or_path", "vocab_size", "seed", "trainable"}, "encoder");
  take_enum(j, "kind", s.kind, parse_encoder_kind, "encoder");
  take(j, "d", s.d, "encoder");
  take(j, "model_id_or_path", s.model_id_or_path, "encoder");
  take(j, "vocab_size", s.vocab_size, "encoder");
  take(j, "seed", s.seed, "encoder");
  take(j, "trainable", s.trainable, "encoder");
}

void update_from_json(const json& j, PreprocessConfig& c) {
  reject_unknown(j,
                 {"lowercase", "remove_stopwords", "stem", "lemmatize", "marker_scheme", "length_unit",
                  "normalize_before_subword", "stopwords_file", "stopword_count"},
                 "preprocess");
  take(j, "lowercase", c.lowercase, "preprocess");
  take(j, "remove_stopwords", c.remove_stopwords, "preprocess");
  take(j, "stem", c.stem, "preprocess");
  take(j, "lemmatize", c.lemmatize, "preprocess");
  take_enum(j, "marker_scheme", c.marker_scheme, parse_marker_scheme, "preprocess");
  take_enum(j, "length_unit", c.length_unit, parse_length_unit, "preprocess");
  take(j, "normalize_before_subword", c.normalize_before_subword, "preprocess");
  if (j.contains("stopwords_file")) c.stopword_list = text::load_stopwords(j.at("stopwords_file").get<std::string>());
}

}  // namespace snprex
