#include "snprex/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "snprex/config_io.hpp"
#include "snprex/corpus.hpp"
#include "snprex/encoder.hpp"
#include "snprex/errors.hpp"
#include "snprex/eval.hpp"
#include "snprex/head.hpp"
#include "snprex/preprocess.hpp"
#include "snprex/rng.hpp"
#include "snprex/train.hpp"

namespace snprex {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Log {
 public:
  explicit Log(std::ostream& err) : err_(err) {}

  void info(std::string_view event, const ordered_json& fields = ordered_json::object()) const {
    ordered_json line = {{"level", "info"}, {"event", event}};
    for (const auto& [k, v] : fields.items()) line[k] = v;
    err_ << line.dump() << '\n';
  }

  void error(std::string_view code, std::string_view message, int exit_code) const {
    ordered_json line = {{"level", "error"}, {"code", code}, {"exit", exit_code}, {"message", message}};
    err_ << line.dump() << '\n';
  }

 private:
  std::ostream& err_;
};

// A `--section.key` flag overriding one configuration key.
struct KeyFlag {
  std::string section;
  std::string key;
  json::value_t type;
  std::string value;
  CLI::Option* option = nullptr;
};

struct RunConfig {
  std::string corpus_path;
  CorpusFormat corpus_format = CorpusFormat::CanonicalJsonl;
  PreprocessConfig preprocess = PreprocessConfig::standard();
  EncoderSpec encoder;
  HeadConfig head;
  TrainConfig train;
  SplitSpec split;
  std::string output_dir;
};

CorpusFormat format_from(const std::string& s) {
  const auto f = parse_corpus_format(s);
  if (!f) throw UsageError("unknown corpus format '" + s + "' (expected jsonl or snpphena)");
  return *f;
}

json parse_flag_value(const KeyFlag& f) {
  const std::string name = "--" + f.section + "." + f.key;
  try {
    switch (f.type) {
      case json::value_t::boolean: {
        std::string v = f.value;
        std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        break;
      }
      case json::value_t::number_unsigned:
      case json::value_t::number_integer: {
        std::size_t used = 0;
        const unsigned long long n = std::stoull(f.value, &used);
        if (used == f.value.size() && f.value.find('-') == std::string::npos) return n;
        break;
      }
      case json::value_t::number_float: {
        std::size_t used = 0;
        const double x = std::stod(f.value, &used);
        if (used == f.value.size()) return x;
        break;
      }
      default:
        return f.value;
    }
  } catch (const std::logic_error&) {
  }
  throw UsageError("bad value '" + f.value + "' for " + name);
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingPath("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw MalformedRecord(path.string() + ": " + e.what());
  }
}

void apply_seed(std::uint64_t seed, RunConfig& rc) {
  rc.train.seed = seed;
  rc.encoder.seed = seed;
  rc.split.seed = seed;
}

void apply_config_file(const json& j, RunConfig& rc) {
  if (!j.is_object()) throw ConfigMismatch("config file must hold a JSON object");
  static const std::set<std::string> known = {"corpus", "preprocess", "encoder", "head", "train",
                                              "split", "output_dir", "seed"};
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw ConfigMismatch("unknown config key '" + k + "'");
  }
  try {
    if (j.contains("corpus")) {
      const auto& c = j.at("corpus");
      if (c.contains("path")) rc.corpus_path = c.at("path").get<std::string>();
      if (c.contains("format")) {
        const auto f = parse_corpus_format(c.at("format").get<std::string>());
        if (!f) throw ConfigMismatch("unknown corpus format in config");
        rc.corpus_format = *f;
      }
    }
    if (j.contains("preprocess")) update_from_json(j.at("preprocess"), rc.preprocess);
    if (j.contains("encoder")) update_from_json(j.at("encoder"), rc.encoder);
    if (j.contains("head")) update_from_json(j.at("head"), rc.head);
    if (j.contains("train")) update_from_json(j.at("train"), rc.train);
    if (j.contains("split")) {
      const auto& s = j.at("split");
      if (s.contains("mode")) {
        const auto m = s.at("mode").get<std::string>();
        if (m != "official" && m != "stratified") throw ConfigMismatch("split.mode must be official or stratified");
        rc.split.mode = m == "official" ? SplitMode::Official : SplitMode::Stratified;
      }
      if (s.contains("test_fraction")) rc.split.test_fraction = s.at("test_fraction").get<double>();
    }
    if (j.contains("output_dir")) rc.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("seed")) apply_seed(j.at("seed").get<std::uint64_t>(), rc);
  } catch (const json::exception& e) {
    throw ConfigMismatch(std::string("config file: ") + e.what());
  }
}

void write_file(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << content)) throw IoFailure("cannot write " + path.string());
}

ordered_json stats_json(const CorpusStats& s) {
  return {{"documents", s.n_documents}, {"sentences", s.n_sentences}, {"candidates", s.n_candidates},
          {"positive", s.n_positive},   {"negative", s.n_negative},   {"neutral", s.n_neutral}};
}

std::vector<PredictionRecord> read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingPath("cannot open predictions " + path.string());
  std::vector<PredictionRecord> preds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    try {
      const json j = json::parse(line);
      PredictionRecord p;
      p.candidate_ref = j.at("candidate_ref").get<std::string>();
      p.class_id = j.at("class_id").get<int>();
      p.probs = {j.at("prob_0").get<double>(), j.at("prob_1").get<double>()};
      if (p.class_id != 0 && p.class_id != 1) throw MalformedRecord(where + ": class_id must be 0 or 1");
      preds.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw MalformedRecord(where + ": " + e.what());
    }
  }
  return preds;
}

std::string predictions_jsonl(const std::vector<PredictionRecord>& preds) {
  std::string s;
  for (const auto& p : preds) {
    ordered_json j = {{"candidate_ref", p.candidate_ref},
                      {"class_id", p.class_id},
                      {"prob_0", p.probs[0]},
                      {"prob_1", p.probs[1]}};
    s += j.dump() + '\n';
  }
  return s;
}

std::string stopwords_text(const PreprocessConfig& cfg) {
  std::string s;
  for (const auto& w : cfg.stopword_list) s += w + '\n';
  return s;
}

// Preprocessing settings stored next to a checkpoint so prediction tokenizes
// exactly as training did.
void save_preprocess(const fs::path& dir, const PreprocessConfig& cfg) {
  ordered_json j = to_json(cfg);
  j.erase("stopword_count");
  write_file(dir / "preprocess.json", j.dump(2) + '\n');
  write_file(dir / "stopwords.txt", stopwords_text(cfg));
}

PreprocessConfig load_preprocess(const fs::path& dir) {
  json j = read_json_file(dir / "preprocess.json");
  j["stopwords_file"] = (dir / "stopwords.txt").string();
  PreprocessConfig cfg = PreprocessConfig::standard();
  update_from_json(j, cfg);
  return cfg;
}

class Runner {
 public:
  Runner(std::ostream& out, std::ostream& err) : out_(out), log_(err) {}

  int run(std::vector<std::string> args);

 private:
  void setup(CLI::App& app);
  RunConfig resolve() const;
  fs::path output_dir(const RunConfig& rc) const;
  Corpus load_corpus(const RunConfig& rc) const;

  void cmd_ingest();
  void cmd_stats();
  void cmd_split();
  void cmd_train();
  void cmd_predict();
  void cmd_evaluate();
  void cmd_gradcheck();
  void cmd_report();

  std::ostream& out_;
  Log log_;

  // global
  std::string config_path_;
  std::string out_dir_;
  std::uint64_t seed_ = 0;
  CLI::Option* seed_opt_ = nullptr;
  std::deque<KeyFlag> key_flags_;
  std::string corpus_path_;
  std::string corpus_format_;

  // split
  std::string split_mode_;
  double test_fraction_ = -1.0;
  // predict / evaluate
  std::string checkpoint_dir_;
  std::string predictions_path_;
  std::string gold_path_;
  std::string level_ = "sentence";
  std::string averaging_ = "macro";
  std::size_t bootstrap_ = 0;
  // gradcheck
  bool tiny_ = false;
  std::size_t n_seeds_ = 1;
  double eps_ = 1e-5;
  double tolerance_ = 1e-4;
  std::size_t max_coordinates_ = 4000;
  // report
  std::vector<std::string> metrics_files_;

  CLI::App* sub_ingest_ = nullptr;
  CLI::App* sub_stats_ = nullptr;
  CLI::App* sub_split_ = nullptr;
  CLI::App* sub_train_ = nullptr;
  CLI::App* sub_predict_ = nullptr;
  CLI::App* sub_evaluate_ = nullptr;
  CLI::App* sub_gradcheck_ = nullptr;
  CLI::App* sub_report_ = nullptr;
};

void Runner::setup(CLI::App& app) {
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", config_path_, "JSON run configuration");
  app.add_option("--out", out_dir_, "Output directory (default: $SNPREX_OUT, else ./snprex_out)");
  seed_opt_ = app.add_option("--seed", seed_, "Seed for every stochastic component");
  app.add_option("--corpus", corpus_path_, "Corpus path");
  app.add_option("--format", corpus_format_, "Corpus format: jsonl or snpphena");

  const std::vector<std::pair<std::string, ordered_json>> sections = {
      {"preprocess", to_json(PreprocessConfig::standard())},
      {"encoder", to_json(EncoderSpec{})},
      {"head", to_json(HeadConfig{})},
      {"train", to_json(TrainConfig{})},
  };
  for (const auto& [section, defaults] : sections) {
    for (const auto& [key, value] : defaults.items()) {
      if (key == "stopword_count") continue;
      auto& f = key_flags_.emplace_back(KeyFlag{section, key, value.type(), {}, nullptr});
      f.option = app.add_option("--" + section + "." + key, f.value)->group("Configuration keys");
    }
  }
  auto& sw = key_flags_.emplace_back(KeyFlag{"preprocess", "stopwords_file", json::value_t::string, {}, nullptr});
  sw.option = app.add_option("--preprocess.stopwords_file", sw.value, "One stopword per line")
                  ->group("Configuration keys");

  sub_ingest_ = app.add_subcommand("ingest", "Parse and validate a corpus, write canonical JSONL");
  sub_stats_ = app.add_subcommand("stats", "Print document, sentence and label counts");
  sub_split_ = app.add_subcommand("split", "Write train.jsonl and test.jsonl");
  sub_split_->add_option("--mode", split_mode_, "official or stratified");
  sub_split_->add_option("--test-fraction", test_fraction_, "Test share for the stratified mode");
  sub_train_ = app.add_subcommand("train", "Train a model, write a checkpoint directory");
  sub_predict_ = app.add_subcommand("predict", "Write predictions.jsonl for a corpus");
  sub_predict_->add_option("--checkpoint", checkpoint_dir_, "Checkpoint directory (default: <out>/checkpoint)");
  sub_evaluate_ = app.add_subcommand("evaluate", "Score predictions against gold labels");
  sub_evaluate_->add_option("--predictions", predictions_path_, "Predictions JSONL (default: <out>/predictions.jsonl)");
  sub_evaluate_->add_option("--gold", gold_path_, "Gold corpus")->required();
  sub_evaluate_->add_option("--level", level_, "sentence or abstract")->check(CLI::IsMember({"sentence", "abstract"}));
  sub_evaluate_->add_option("--averaging", averaging_, "Reported averaging mode")
      ->check(CLI::IsMember({"positive_class", "macro", "micro"}));
  sub_evaluate_->add_option("--bootstrap", bootstrap_, "Bootstrap resamples for a 95% interval (0: off)");
  sub_evaluate_->add_option("--checkpoint", checkpoint_dir_, "Checkpoint to record in the report");
  sub_gradcheck_ = app.add_subcommand("gradcheck", "Finite-difference check of the head gradients");
  sub_gradcheck_->add_flag("--tiny", tiny_, "Tiny dimensions (F=2, H=2, D1=3)");
  sub_gradcheck_->add_option("--seeds", n_seeds_, "Number of consecutive seeds")->check(CLI::PositiveNumber);
  sub_gradcheck_->add_option("--eps", eps_, "Central difference step");
  sub_gradcheck_->add_option("--tolerance", tolerance_, "Maximum accepted relative error");
  sub_gradcheck_->add_option("--max-coordinates", max_coordinates_, "Coordinate sample size for full dimensions");
  sub_report_ = app.add_subcommand("report", "Tabulate metric reports as CSV");
  sub_report_->add_option("--metrics", metrics_files_, "Metric report JSON files")->required();
}

RunConfig Runner::resolve() const {
  RunConfig rc;
  if (!config_path_.empty()) apply_config_file(read_json_file(config_path_), rc);
  if (seed_opt_->count() > 0) apply_seed(seed_, rc);

  std::map<std::string, json> patches;
  for (const auto& f : key_flags_) {
    if (f.option->count() > 0) patches[f.section][f.key] = parse_flag_value(f);
  }
  for (const auto& [section, patch] : patches) {
    if (section == "preprocess") update_from_json(patch, rc.preprocess);
    if (section == "encoder") update_from_json(patch, rc.encoder);
    if (section == "head") update_from_json(patch, rc.head);
    if (section == "train") update_from_json(patch, rc.train);
  }
  if (!corpus_path_.empty()) rc.corpus_path = corpus_path_;
  if (!corpus_format_.empty()) rc.corpus_format = format_from(corpus_format_);
  return rc;
}

fs::path Runner::output_dir(const RunConfig& rc) const {
  if (!out_dir_.empty()) return out_dir_;
  if (!rc.output_dir.empty()) return rc.output_dir;
  if (const char* env = std::getenv("SNPREX_OUT"); env && *env) return env;
  return "snprex_out";
}

Corpus Runner::load_corpus(const RunConfig& rc) const {
  if (rc.corpus_path.empty()) throw UsageError("no corpus given (--corpus or corpus.path in --config)");
  log_.info("load_corpus", {{"path", rc.corpus_path}, {"format", to_string(rc.corpus_format)}});
  return parse_corpus(rc.corpus_path, rc.corpus_format);
}

void Runner::cmd_ingest() {
  const RunConfig rc = resolve();
  const Corpus corpus = load_corpus(rc);
  const fs::path dst = output_dir(rc) / "corpus.jsonl";
  write_file(dst, serialize_corpus(corpus));
  log_.info("wrote", {{"path", dst.string()}});
  out_ << stats_json(corpus_stats(corpus)).dump() << '\n';
}

void Runner::cmd_stats() {
  const RunConfig rc = resolve();
  out_ << stats_json(corpus_stats(load_corpus(rc))).dump() << '\n';
}

void Runner::cmd_split() {
  RunConfig rc = resolve();
  if (!split_mode_.empty()) {
    if (split_mode_ != "official" && split_mode_ != "stratified") throw UsageError("--mode must be official or stratified");
    rc.split.mode = split_mode_ == "official" ? SplitMode::Official : SplitMode::Stratified;
  }
  if (test_fraction_ >= 0.0) rc.split.test_fraction = test_fraction_;
  const Corpus corpus = load_corpus(rc);
  const auto [train_part, test_part] = split_dataset(corpus, rc.split);
  const fs::path dir = output_dir(rc);
  write_file(dir / "train.jsonl", serialize_corpus(train_part));
  write_file(dir / "test.jsonl", serialize_corpus(test_part));
  out_ << ordered_json{{"train", stats_json(corpus_stats(train_part))}, {"test", stats_json(corpus_stats(test_part))}}.dump()
       << '\n';
}

void Runner::cmd_train() {
  RunConfig rc = resolve();
  rc.preprocess.validate();
  rc.head.validate();
  rc.train.validate();
  const Corpus corpus = load_corpus(rc);

  std::optional<Vocabulary> vocab;
  if (rc.encoder.kind != EncoderKind::ContextualPretrained) {
    vocab = Vocabulary::build(corpus, rc.preprocess);
    if (rc.encoder.kind == EncoderKind::StaticLookup) {
      if (rc.encoder.vocab_size == 0) rc.encoder.vocab_size = vocab->size();
      if (rc.encoder.vocab_size != vocab->size()) {
        throw ConfigMismatch("encoder.vocab_size " + std::to_string(rc.encoder.vocab_size) +
                             " differs from the corpus vocabulary size " + std::to_string(vocab->size()));
      }
    }
  }
  auto encoder = make_encoder(rc.encoder);
  const Tokenizer& tokenizer = encoder->tokenizer() ? *encoder->tokenizer() : *vocab;
  const auto instances = build_instances(corpus, rc.train.level, rc.train.max_len(), rc.preprocess, tokenizer);
  log_.info("train_start", {{"instances", instances.size()},
                            {"encoder", encoder->signature()},
                            {"trainable_encoder", encoder->trainable()}});

  const Checkpoint ckpt = train(instances, *encoder, rc.head, rc.train, [&](const EpochRecord& r) {
    log_.info("epoch", {{"epoch", r.epoch}, {"mean_loss", r.mean_loss}, {"train_accuracy", r.train_accuracy}});
  });

  const fs::path dir = output_dir(rc) / "checkpoint";
  ckpt.save(dir);
  save_preprocess(dir, rc.preprocess);
  if (vocab) vocab->save(dir / "vocab.txt");
  log_.info("wrote", {{"path", dir.string()}});
  const auto& last = ckpt.history.back();
  out_ << ordered_json{{"checkpoint", dir.string()},
                       {"epochs", ckpt.epoch},
                       {"mean_loss", last.mean_loss},
                       {"train_accuracy", last.train_accuracy}}
              .dump()
       << '\n';
}

void Runner::cmd_predict() {
  const RunConfig rc = resolve();
  const fs::path dir = checkpoint_dir_.empty() ? output_dir(rc) / "checkpoint" : fs::path(checkpoint_dir_);
  const Checkpoint ckpt = Checkpoint::load(dir);
  const PreprocessConfig pre = load_preprocess(dir);
  auto encoder = make_encoder(ckpt.encoder);
  std::optional<Vocabulary> vocab;
  if (!encoder->tokenizer()) vocab = Vocabulary::load(dir / "vocab.txt");
  const Tokenizer& tokenizer = encoder->tokenizer() ? *encoder->tokenizer() : *vocab;

  const Corpus corpus = load_corpus(rc);
  const auto instances =
      build_instances(corpus, ckpt.train_config.level, ckpt.train_config.max_len(), pre, tokenizer);
  const auto preds = predict(ckpt, *encoder, instances);
  const fs::path dst = output_dir(rc) / "predictions.jsonl";
  write_file(dst, predictions_jsonl(preds));
  log_.info("wrote", {{"path", dst.string()}});
  out_ << ordered_json{{"predictions", preds.size()}, {"path", dst.string()}}.dump() << '\n';
}

void Runner::cmd_evaluate() {
  RunConfig rc = resolve();
  const fs::path preds_path =
      predictions_path_.empty() ? output_dir(rc) / "predictions.jsonl" : fs::path(predictions_path_);
  const Level level = *parse_level(level_);
  const Averaging averaging = *parse_averaging(averaging_);

  rc.corpus_path = gold_path_;
  const Corpus gold = load_corpus(rc);
  auto preds = read_predictions(preds_path);
  GoldLabels golds;
  if (level == Level::Abstract) {
    auto agg = aggregate_to_abstract(preds, gold);
    preds = std::move(agg.predictions);
    golds = std::move(agg.golds);
  } else {
    golds = gold_labels(gold);
  }
  const MetricsReport report = evaluate(preds, golds, level, averaging);

  ReportContext ctx;
  ctx.config = {{"predictions", preds_path.string()},
                {"gold", gold_path_},
                {"level", level_},
                {"averaging", averaging_},
                {"bootstrap", bootstrap_},
                {"seed", seed_}};
  if (!checkpoint_dir_.empty()) {
    const Checkpoint ckpt = Checkpoint::load(checkpoint_dir_);
    ctx.checkpoint = {{"path", checkpoint_dir_},
                      {"encoder_signature", ckpt.encoder_signature},
                      {"epoch", ckpt.epoch},
                      {"train_config", to_json(ckpt.train_config)},
                      {"head_config", to_json(ckpt.head_config)}};
  }
  if (bootstrap_ > 0) ctx.ci = bootstrap_ci(preds, golds, Metric::F1, averaging, bootstrap_, seed_);

  const std::string body = to_json(report, ctx).dump(2) + '\n';
  const fs::path dir = output_dir(rc);
  const std::string stem = "metrics_" + std::string(to_string(level));
  write_file(dir / (stem + ".json"), body);
  write_file(dir / (stem + ".csv"), csv_header() + '\n' + csv_line(report) + '\n');
  log_.info("wrote", {{"path", (dir / (stem + ".json")).string()}});
  out_ << body;
}

void Runner::cmd_gradcheck() {
  double worst = 0.0;
  for (std::size_t i = 0; i < n_seeds_; ++i) {
    const std::uint64_t seed = seed_ + i;
    GradientCheckResult r;
    if (tiny_) {
      const TinyProblem p = tiny_problem(seed);
      r = gradient_check(p.params, p.input, p.label, p.config, eps_, seed);
    } else {
      const HeadConfig cfg;
      const std::size_t L = 6, d = 4;
      HeadParameters params = HeadParameters::initialize(cfg, d, seed);
      Rng rng(mix_seed(seed, 0x6C));
      EmbeddingMatrix E{Tensor({L, d}), L};
      for (auto& x : E.values.values()) x = rng.uniform(-1.0, 1.0);
      r = gradient_check(params, E, static_cast<int>(seed % 2), cfg, eps_, seed, max_coordinates_);
    }
    worst = std::max(worst, r.max_relative_error);
    out_ << ordered_json{{"seed", seed},
                         {"max_relative_error", r.max_relative_error},
                         {"worst_coordinate", r.worst_coordinate},
                         {"coordinates", r.coordinates}}
                .dump()
         << '\n';
  }
  const bool pass = worst <= tolerance_;
  out_ << ordered_json{{"max_relative_error", worst}, {"tolerance", tolerance_}, {"pass", pass}}.dump() << '\n';
  if (!pass) throw GradientCheckFailed("max relative error " + std::to_string(worst) + " exceeds tolerance");
}

void Runner::cmd_report() {
  const RunConfig rc = resolve();
  std::string csv = "source,level,averaging,precision,recall,f1,n_instances\n";
  for (const auto& file : metrics_files_) {
    const json j = read_json_file(file);
    try {
      for (const auto& [mode, m] : j.at("modes").items()) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%zu", m.at("precision").get<double>(),
                      m.at("recall").get<double>(), m.at("f1").get<double>(), j.at("n_instances").get<std::size_t>());
        csv += file + "," + j.at("level").get<std::string>() + "," + mode + "," + buf + "\n";
      }
    } catch (const json::exception& e) {
      throw MalformedRecord(file + ": " + e.what());
    }
  }
  write_file(output_dir(rc) / "report.csv", csv);
  out_ << csv;
}

int Runner::run(std::vector<std::string> args) {
  CLI::App app("snprex: SNP-phenotype relation extraction", "snprex");
  setup(app);
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out_ << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out_ << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    log_.error("Usage", e.what(), 1);
    return 1;
  }

  try {
    if (sub_ingest_->parsed()) cmd_ingest();
    else if (sub_stats_->parsed()) cmd_stats();
    else if (sub_split_->parsed()) cmd_split();
    else if (sub_train_->parsed()) cmd_train();
    else if (sub_predict_->parsed()) cmd_predict();
    else if (sub_evaluate_->parsed()) cmd_evaluate();
    else if (sub_gradcheck_->parsed()) cmd_gradcheck();
    else if (sub_report_->parsed()) cmd_report();
    out_.flush();
    return 0;
  } catch (const UsageError& e) {
    log_.error("Usage", e.what(), 1);
    return 1;
  } catch (const Error& e) {
    const int code = e.category() == ErrorCategory::Data ? 2 : 3;
    log_.error(e.code(), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    log_.error("Runtime", e.what(), 3);
    return 3;
  }
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Runner runner(out, err);
  return runner.run(args);
}

int run_command(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_command(args, std::cout, std::cerr);
}

}  // namespace snprex
