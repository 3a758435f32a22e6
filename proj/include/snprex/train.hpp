#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "snprex/encoder.hpp"
#include "snprex/head.hpp"
#include "snprex/preprocess.hpp"

namespace snprex {

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t epochs = 30;
  double learning_rate = 1e-4;
  double adam_epsilon = 1e-7;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  std::size_t max_len_sentence = 70;
  std::size_t max_len_abstract = 300;
  std::uint64_t seed = 0;
  Level level = Level::Sentence;
  bool shuffle = true;
  /// Instances of a batch run in parallel; gradients are still reduced in
  /// instance order, so both backends give identical results.
  kernels::Backend backend = kernels::Backend::OpenMP;

  std::size_t max_len() const { return level == Level::Sentence ? max_len_sentence : max_len_abstract; }
  /// Throws ConfigMismatch unless every size and rate is positive and betas lie in [0, 1).
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct AdamState {
  std::vector<Tensor> m, v;
  std::uint64_t t = 0;

  static AdamState zeros_like(const std::vector<Tensor*>& params);
};

/// One Adam update with bias correction. Throws ShapeMismatch when grads or
/// state disagree with params.
void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps);

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;       // mean training-mode cross-entropy over the epoch
  double train_accuracy = 0.0;  // Eval-mode accuracy on the training set after the epoch
  bool operator==(const EpochRecord&) const = default;
};

struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  HeadParameters head;
  std::map<std::string, Tensor> encoder_parameters;  // trainable encoders only
  TrainConfig train_config;
  HeadConfig head_config;
  EncoderSpec encoder;
  std::string encoder_signature;
  std::size_t epoch = 0;
  std::vector<EpochRecord> history;
  int format_version = kFormatVersion;

  /// Directory with `manifest` (JSON), one binary file per tensor under
  /// tensors/, and history.csv. Output is byte-canonical.
  void save(const std::filesystem::path& dir) const;
  static Checkpoint load(const std::filesystem::path& dir);
};

/// "epoch,mean_loss,train_accuracy" plus one line per epoch.
std::string history_csv(const std::vector<EpochRecord>& history);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam over shuffled minibatches for cfg.epochs epochs; the head starts from
/// Glorot weights drawn from cfg.seed. Throws EmptyDataset on an empty set and
/// ConfigMismatch when an instance's level or max_len disagrees with cfg.
Checkpoint train(const std::vector<TokenizedInstance>& train_set, Encoder& encoder, const HeadConfig& head_config,
                 const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct PredictionRecord {
  std::string candidate_ref;
  int class_id = 0;
  std::array<double, 2> probs{};
  bool operator==(const PredictionRecord&) const = default;
};

/// argmax with ties going to class 0.
int argmax_class(const std::array<double, 2>& probs);

/// Eval-mode predictions in input order. Loads fine-tuned encoder weights
/// from the checkpoint into `encoder` first. Throws SignatureMismatch when
/// the encoder is not the one the checkpoint was trained with.
std::vector<PredictionRecord> predict(const Checkpoint& ckpt, Encoder& encoder,
                                      const std::vector<TokenizedInstance>& instances);

}  // namespace snprex
