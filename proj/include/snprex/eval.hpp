#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "snprex/corpus.hpp"
#include "snprex/preprocess.hpp"
#include "snprex/train.hpp"

namespace snprex {

enum class Averaging { PositiveClass, Macro, Micro };
enum class Metric { Precision, Recall, F1 };

std::string_view to_string(Averaging a);
std::string_view to_string(Metric m);
std::optional<Averaging> parse_averaging(std::string_view s);
std::optional<Metric> parse_metric(std::string_view s);

/// One-vs-rest counts for a single class.
struct ClassCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ClassCounts&) const = default;
};

/// Index 1 is the positive class, index 0 negative/neutral.
struct ConfusionCounts {
  std::array<ClassCounts, 2> per_class{};
  std::size_t n_instances = 0;

  const ClassCounts& positive() const { return per_class[1]; }
  bool operator==(const ConfusionCounts&) const = default;
};

using GoldLabels = std::map<std::string, int, std::less<>>;

/// Throws MissingGold and DuplicatePrediction.
ConfusionCounts confusion(const std::vector<PredictionRecord>& preds, const GoldLabels& golds);

/// A ratio whose 0/0 case is reported as 0.0 with `undefined` set.
struct Score {
  double value = 0.0;
  bool undefined = false;
};

Score precision(const ClassCounts& c);
Score recall(const ClassCounts& c);
Score f1(const ClassCounts& c);
/// 2PR/(P+R), or 0 flagged undefined when P+R = 0.
Score f1(double p, double r);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool operator==(const Prf&) const = default;
};

struct MetricsReport {
  Level level = Level::Sentence;
  Averaging averaging = Averaging::Macro;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  ConfusionCounts counts;
  std::size_t n_instances = 0;
  /// Entries such as "class_1.precision" or "micro.recall".
  std::set<std::string> undefined_flags;
  std::map<Averaging, Prf> modes;
};

/// All three averaging modes from one set of counts. Macro averages P and R
/// over both classes and takes F1 as their harmonic mean; micro pools the
/// counts.
MetricsReport metrics_from_counts(const ConfusionCounts& counts, Level level, Averaging averaging);

MetricsReport evaluate(const std::vector<PredictionRecord>& preds, const GoldLabels& golds, Level level,
                       Averaging averaging = Averaging::Macro);

/// Gold class ids of every candidate in the corpus.
GoldLabels gold_labels(const Corpus& corpus);

struct AbstractAggregation {
  std::vector<PredictionRecord> predictions;  // sorted by key
  GoldLabels golds;
};

/// Key for a document-level pair: "<document>|<snp>|<phenotype>", using the
/// mentions' normalized forms, or lowercased surface text when absent.
std::string abstract_pair_key(const Document& doc, const Sentence& sentence, const CandidatePair& pair);

/// ANY-POSITIVE: a document-level pair is class 1 iff one of its sentence
/// candidates is. Gold labels follow the same rule over the corpus labels.
/// Probabilities of a pair are those of its member with the highest prob_1.
/// Throws MissingGold for predictions naming no corpus candidate.
AbstractAggregation aggregate_to_abstract(const std::vector<PredictionRecord>& sentence_preds, const Corpus& corpus);

/// Percentile bootstrap (2.5 / 97.5, linear interpolation) over instances.
/// Requires n_resamples >= 100; deterministic given the seed.
std::pair<double, double> bootstrap_ci(const std::vector<PredictionRecord>& preds, const GoldLabels& golds,
                                       Metric metric, Averaging averaging, std::size_t n_resamples,
                                       std::uint64_t seed);

struct ReportContext {
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  nlohmann::ordered_json checkpoint = nlohmann::ordered_json::object();
  std::optional<std::pair<double, double>> ci;
};

nlohmann::ordered_json to_json(const MetricsReport& r, const ReportContext& ctx = {});
std::string csv_header();
/// level,averaging,precision,recall,f1,n_instances with %.6f metrics.
std::string csv_line(const MetricsReport& r);

}  // namespace snprex
