#include "snprex/train.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>

#include "snprex/config_io.hpp"
#include "snprex/errors.hpp"
#include "snprex/rng.hpp"

namespace snprex {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

void TrainConfig::validate() const {
  if (batch_size == 0 || epochs == 0 || max_len_sentence == 0 || max_len_abstract == 0) {
    throw ConfigMismatch("batch_size, epochs and max lengths must be positive");
  }
  if (!(learning_rate > 0) || !(adam_epsilon > 0)) throw ConfigMismatch("learning_rate and adam_epsilon must be positive");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1)) {
    throw ConfigMismatch("Adam betas must lie in [0, 1)");
  }
}

// ---------------------------------------------------------------------------
// Adam

AdamState AdamState::zeros_like(const std::vector<Tensor*>& params) {
  AdamState s;
  for (const Tensor* p : params) {
    s.m.emplace_back(p->shape());
    s.v.emplace_back(p->shape());
  }
  return s;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeMismatch("adam_step: " + std::to_string(params.size()) + " parameters, " +
                        std::to_string(grads.size()) + " gradients, " + std::to_string(state.m.size()) +
                        " moment tensors");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads[i]) || !params[i]->same_shape(state.m[i]) || !params[i]->same_shape(state.v[i])) {
      throw ShapeMismatch("adam_step: shape mismatch at tensor " + std::to_string(i) + " " +
                          shape_string(params[i]->shape()) + " vs " + shape_string(grads[i].shape()));
    }
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
      v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Training

int argmax_class(const std::array<double, 2>& probs) { return probs[1] > probs[0] ? 1 : 0; }

namespace {

void check_instances(const std::vector<TokenizedInstance>& set, const TrainConfig& cfg) {
  for (const auto& inst : set) {
    if (inst.level != cfg.level || inst.max_len() != cfg.max_len()) {
      throw ConfigMismatch("instance " + inst.candidate_ref + " is " + std::string(to_string(inst.level)) +
                           " with max_len " + std::to_string(inst.max_len()) + "; the train config expects " +
                           std::string(to_string(cfg.level)) + " with max_len " + std::to_string(cfg.max_len()));
    }
    if (inst.class_id != 0 && inst.class_id != 1) throw ConfigMismatch("instance class_id must be 0 or 1");
  }
}

struct InstanceResult {
  HeadGradients head;
  std::vector<Tensor> encoder;
  double loss = 0.0;
};

}  // namespace

Checkpoint train(const std::vector<TokenizedInstance>& train_set, Encoder& encoder, const HeadConfig& head_config,
                 const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  head_config.validate();
  if (train_set.empty()) throw EmptyDataset("training set is empty");
  check_instances(train_set, cfg);

  Checkpoint ck;
  ck.train_config = cfg;
  ck.head_config = head_config;
  ck.encoder = encoder.spec();
  ck.encoder_signature = encoder.signature();
  ck.head = HeadParameters::initialize(head_config, encoder.width(), cfg.seed);

  const bool tune_encoder = encoder.trainable();
  std::vector<Tensor*> params;
  for (auto& [n, t] : ck.head.named()) params.push_back(t);
  for (auto& [n, t] : encoder.parameters()) params.push_back(t);
  AdamState adam = AdamState::zeros_like(params);

  // Frozen encoders are evaluated once.
  std::vector<EmbeddingMatrix> cached;
  if (!tune_encoder) cached = embed_all(encoder, train_set);

  const std::size_t N = train_set.size();
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(mix_seed(cfg.seed, 0x5A0F));
  std::uint64_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) shuffle_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < N; start += cfg.batch_size) {
      const std::size_t end = std::min(N, start + cfg.batch_size);
      const std::size_t B = end - start;
      std::vector<InstanceResult> results(B);
      std::vector<std::exception_ptr> failures(B);

      auto run_one = [&](std::size_t b) {
        const std::size_t idx = order[start + b];
        const TokenizedInstance& inst = train_set[idx];
        std::unique_ptr<EncoderTape> tape;
        const EmbeddingMatrix E = tune_encoder ? encoder.embed(inst, tape) : cached[idx];
        const std::uint64_t drop_seed = mix_seed(mix_seed(cfg.seed, step), idx);
        const HeadOutput out = head_forward(E, ck.head, head_config, Mode::Train, drop_seed);
        results[b].loss = cross_entropy(out.probs, inst.class_id);
        results[b].head = head_backward(out.cache, ck.head, inst.class_id);
        if (tune_encoder) {
          results[b].encoder = encoder.zero_gradients();
          encoder.backward(inst, tape.get(), results[b].head.embedding, results[b].encoder);
        }
      };
      // The contextual encoder's gradients are large; its instances run one at
      // a time so only one gradient set is alive.
      if (cfg.backend == kernels::Backend::OpenMP && !tune_encoder) {
#pragma omp parallel for schedule(dynamic, 1)
        for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(B); ++b) {
          try {
            run_one(static_cast<std::size_t>(b));
          } catch (...) {
            failures[static_cast<std::size_t>(b)] = std::current_exception();
          }
        }
        for (const auto& f : failures) {
          if (f) std::rethrow_exception(f);
        }
      } else {
        for (std::size_t b = 0; b < B; ++b) run_one(b);
      }

      // Mean gradient over the batch, reduced in batch order.
      HeadParameters head_grad = HeadParameters::zeros(head_config, encoder.width());
      std::vector<Tensor> enc_grad = tune_encoder ? encoder.zero_gradients() : std::vector<Tensor>{};
      const double inv = 1.0 / static_cast<double>(B);
      for (std::size_t b = 0; b < B; ++b) {
        accumulate(head_grad, results[b].head.params, inv);
        for (std::size_t i = 0; i < enc_grad.size(); ++i) {
          for (std::size_t j = 0; j < enc_grad[i].size(); ++j) enc_grad[i][j] += inv * results[b].encoder[i][j];
        }
        loss_sum += results[b].loss;
      }
      std::vector<Tensor> grads;
      grads.reserve(params.size());
      for (auto& [n, t] : head_grad.named()) grads.push_back(std::move(*t));
      for (auto& g : enc_grad) grads.push_back(std::move(g));
      adam_step(params, grads, adam, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
      ck.head.touch();
      ++step;
    }

    // Eval-mode accuracy on the training set.
    std::size_t correct = 0;
    std::vector<int> hits(N, 0);
    auto score = [&](std::size_t i) {
      const EmbeddingMatrix E = tune_encoder ? encoder.embed(train_set[i]) : cached[i];
      hits[i] = argmax_class(head_forward(E, ck.head, head_config, Mode::Eval, 0).probs) == train_set[i].class_id;
    };
    if (cfg.backend == kernels::Backend::OpenMP) {
#pragma omp parallel for schedule(dynamic, 4)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(N); ++i) score(static_cast<std::size_t>(i));
    } else {
      for (std::size_t i = 0; i < N; ++i) score(i);
    }
    for (int h : hits) correct += static_cast<std::size_t>(h);

    EpochRecord rec{epoch, loss_sum / static_cast<double>(N), static_cast<double>(correct) / static_cast<double>(N)};
    ck.history.push_back(rec);
    ck.epoch = epoch;
    if (on_epoch) on_epoch(rec);
  }

  for (const auto& [n, t] : encoder.parameters()) ck.encoder_parameters.emplace(n, *t);
  return ck;
}

std::vector<PredictionRecord> predict(const Checkpoint& ckpt, Encoder& encoder,
                                      const std::vector<TokenizedInstance>& instances) {
  if (encoder.signature() != ckpt.encoder_signature) {
    throw SignatureMismatch("checkpoint was trained with encoder " + ckpt.encoder_signature + ", active encoder is " +
                            encoder.signature());
  }
  if (!ckpt.encoder_parameters.empty()) {
    for (auto& [n, t] : encoder.parameters()) {
      const auto it = ckpt.encoder_parameters.find(n);
      if (it == ckpt.encoder_parameters.end() || !it->second.same_shape(*t)) {
        throw SignatureMismatch("checkpoint lacks a matching encoder tensor " + n);
      }
      *t = it->second;
    }
  }
  std::vector<PredictionRecord> out(instances.size());
  std::vector<std::exception_ptr> failures(instances.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(instances.size()); ++i) {
    try {
      const auto& inst = instances[static_cast<std::size_t>(i)];
      const auto probs = head_forward(encoder.embed(inst), ckpt.head, ckpt.head_config, Mode::Eval, 0).probs;
      out[static_cast<std::size_t>(i)] = {inst.candidate_ref, argmax_class(probs), probs};
    } catch (...) {
      failures[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint container

namespace {

constexpr char kTensorMagic[8] = {'S', 'N', 'P', 'X', 'T', 'N', 'S', '1'};

template <typename T>
void put_le(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get_le(std::istream& in, const fs::path& path) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw MalformedRecord(path.string() + ": truncated tensor file");
  return v;
}

void write_tensor(const fs::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw MissingPath("cannot write " + path.string());
  out.write(kTensorMagic, sizeof kTensorMagic);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) put_le<std::uint64_t>(out, d);
  out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
}

Tensor read_tensor(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingPath("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kTensorMagic, 8) != 0) {
    throw MalformedRecord(path.string() + ": not a snprex tensor file");
  }
  const auto rank = get_le<std::uint32_t>(in, path);
  if (rank == 0 || rank > 3) throw MalformedRecord(path.string() + ": unsupported rank " + std::to_string(rank));
  std::vector<std::size_t> shape;
  for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(get_le<std::uint64_t>(in, path));
  Tensor t(shape);
  if (!in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)))) {
    throw MalformedRecord(path.string() + ": truncated tensor data");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw MalformedRecord(path.string() + ": trailing bytes");
  return t;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string s = "epoch,mean_loss,train_accuracy\n";
  for (const auto& r : history) {
    s += std::to_string(r.epoch) + "," + format_double(r.mean_loss) + "," + format_double(r.train_accuracy) + "\n";
  }
  return s;
}

void Checkpoint::save(const fs::path& dir) const {
  fs::create_directories(dir / "tensors");
  ordered_json manifest;
  manifest["format"] = "snprex-checkpoint/" + std::to_string(format_version);
  manifest["epoch"] = epoch;
  manifest["encoder"] = to_json(encoder);
  manifest["encoder_signature"] = encoder_signature;
  manifest["head_config"] = to_json(head_config);
  manifest["train_config"] = to_json(train_config);
  manifest["input_dim"] = head.input_dim();
  ordered_json hist = ordered_json::array();
  for (const auto& r : history) {
    hist.push_back({{"epoch", r.epoch}, {"mean_loss", r.mean_loss}, {"train_accuracy", r.train_accuracy}});
  }
  manifest["history"] = hist;
  ordered_json tensors = ordered_json::array();
  auto add = [&](const std::string& name, const Tensor& t) {
    const std::string file = "tensors/" + name + ".bin";
    write_tensor(dir / file, t);
    tensors.push_back({{"name", name}, {"file", file}, {"shape", t.shape()}});
  };
  for (const auto& [name, t] : head.named()) add(name, *t);
  for (const auto& [name, t] : encoder_parameters) add(name, t);
  manifest["tensors"] = tensors;

  std::ofstream m(dir / "manifest", std::ios::trunc);
  if (!m) throw MissingPath("cannot write " + (dir / "manifest").string());
  m << manifest.dump(2) << "\n";
  std::ofstream h(dir / "history.csv", std::ios::trunc);
  h << history_csv(history);
}

Checkpoint Checkpoint::load(const fs::path& dir) {
  const fs::path mpath = dir / "manifest";
  std::ifstream in(mpath);
  if (!in) throw MissingPath("no checkpoint manifest at " + mpath.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw MalformedRecord(mpath.string() + ": " + e.what());
  }
  Checkpoint ck;
  try {
    const std::string format = m.at("format");
    if (format != "snprex-checkpoint/" + std::to_string(kFormatVersion)) {
      throw MalformedRecord(mpath.string() + ": unsupported format " + format);
    }
    ck.epoch = m.at("epoch");
    update_from_json(m.at("encoder"), ck.encoder);
    ck.encoder_signature = m.at("encoder_signature");
    update_from_json(m.at("head_config"), ck.head_config);
    update_from_json(m.at("train_config"), ck.train_config);
    const std::size_t input_dim = m.at("input_dim");
    for (const auto& r : m.at("history")) {
      ck.history.push_back({r.at("epoch").get<std::size_t>(), r.at("mean_loss").get<double>(),
                            r.at("train_accuracy").get<double>()});
    }
    ck.head = HeadParameters::zeros(ck.head_config, input_dim);
    auto slots = ck.head.named();
    std::size_t filled = 0;
    for (const auto& entry : m.at("tensors")) {
      const std::string name = entry.at("name");
      Tensor t = read_tensor(dir / entry.at("file").get<std::string>());
      if (t.shape() != entry.at("shape").get<std::vector<std::size_t>>()) {
        throw MalformedRecord(mpath.string() + ": shape of " + name + " disagrees with its file");
      }
      bool placed = false;
      for (auto& [n, slot] : slots) {
        if (n != name) continue;
        if (!slot->same_shape(t)) throw DimensionMismatch("checkpoint tensor " + name + " has the wrong shape");
        *slot = std::move(t);
        placed = true;
        ++filled;
        break;
      }
      if (!placed) ck.encoder_parameters.emplace(name, std::move(t));
    }
    if (filled != slots.size()) throw MalformedRecord(mpath.string() + ": missing head tensors");
  } catch (const json::exception& e) {
    throw MalformedRecord(mpath.string() + ": " + e.what());
  }
  ck.head.touch();
  return ck;
}

}  // namespace snprex
