#include "snprex/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "snprex/errors.hpp"
#include "snprex/rng.hpp"
#include "snprex/text.hpp"

namespace snprex {

std::string_view to_string(Averaging a) {
  switch (a) {
    case Averaging::PositiveClass: return "positive_class";
    case Averaging::Macro: return "macro";
    case Averaging::Micro: return "micro";
  }
  return "macro";
}

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::Precision: return "precision";
    case Metric::Recall: return "recall";
    case Metric::F1: return "f1";
  }
  return "f1";
}

std::optional<Averaging> parse_averaging(std::string_view s) {
  for (auto a : {Averaging::PositiveClass, Averaging::Macro, Averaging::Micro}) {
    if (to_string(a) == s) return a;
  }
  return std::nullopt;
}

std::optional<Metric> parse_metric(std::string_view s) {
  for (auto m : {Metric::Precision, Metric::Recall, Metric::F1}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

namespace {

void tally(ConfusionCounts& c, int gold, int pred) {
  for (int k = 0; k < 2; ++k) {
    auto& cc = c.per_class[static_cast<std::size_t>(k)];
    const bool g = gold == k, p = pred == k;
    if (g && p) ++cc.tp;
    else if (p) ++cc.fp;
    else if (g) ++cc.fn;
    else ++cc.tn;
  }
  ++c.n_instances;
}

void check_class(int id, const std::string& what) {
  if (id != 0 && id != 1) throw MalformedRecord(what + " has class id " + std::to_string(id) + ", expected 0 or 1");
}

Score ratio(std::size_t num, std::size_t den) {
  if (den == 0) return {0.0, true};
  return {static_cast<double>(num) / static_cast<double>(den), false};
}

}  // namespace

ConfusionCounts confusion(const std::vector<PredictionRecord>& preds, const GoldLabels& golds) {
  ConfusionCounts c;
  std::set<std::string_view> seen;
  for (const auto& p : preds) {
    if (!seen.insert(p.candidate_ref).second) throw DuplicatePrediction("duplicate prediction for " + p.candidate_ref);
    const auto it = golds.find(p.candidate_ref);
    if (it == golds.end()) throw MissingGold("no gold label for " + p.candidate_ref);
    check_class(p.class_id, "prediction " + p.candidate_ref);
    check_class(it->second, "gold label " + p.candidate_ref);
    tally(c, it->second, p.class_id);
  }
  return c;
}

Score precision(const ClassCounts& c) { return ratio(c.tp, c.tp + c.fp); }
Score recall(const ClassCounts& c) { return ratio(c.tp, c.tp + c.fn); }

Score f1(double p, double r) {
  if (p + r == 0.0) return {0.0, true};
  return {2.0 * p * r / (p + r), false};
}

Score f1(const ClassCounts& c) { return f1(precision(c).value, recall(c).value); }

MetricsReport metrics_from_counts(const ConfusionCounts& counts, Level level, Averaging averaging) {
  MetricsReport r;
  r.level = level;
  r.averaging = averaging;
  r.counts = counts;
  r.n_instances = counts.n_instances;

  auto flag = [&](const Score& s, const std::string& name) {
    if (s.undefined) r.undefined_flags.insert(name);
    return s.value;
  };

  std::array<Prf, 2> per_class;
  for (std::size_t k = 0; k < 2; ++k) {
    const std::string prefix = "class_" + std::to_string(k) + ".";
    const auto& cc = counts.per_class[k];
    per_class[k].precision = flag(precision(cc), prefix + "precision");
    per_class[k].recall = flag(recall(cc), prefix + "recall");
    per_class[k].f1 = flag(f1(per_class[k].precision, per_class[k].recall), prefix + "f1");
  }
  r.modes[Averaging::PositiveClass] = per_class[1];
  Prf macro;
  macro.precision = (per_class[0].precision + per_class[1].precision) / 2.0;
  macro.recall = (per_class[0].recall + per_class[1].recall) / 2.0;
  macro.f1 = flag(f1(macro.precision, macro.recall), "macro.f1");
  r.modes[Averaging::Macro] = macro;

  ClassCounts pooled;
  for (const auto& cc : counts.per_class) {
    pooled.tp += cc.tp;
    pooled.fp += cc.fp;
    pooled.fn += cc.fn;
  }
  Prf micro;
  micro.precision = flag(precision(pooled), "micro.precision");
  micro.recall = flag(recall(pooled), "micro.recall");
  micro.f1 = flag(f1(micro.precision, micro.recall), "micro.f1");
  r.modes[Averaging::Micro] = micro;

  const Prf& chosen = r.modes[averaging];
  r.precision = chosen.precision;
  r.recall = chosen.recall;
  r.f1 = chosen.f1;
  return r;
}

MetricsReport evaluate(const std::vector<PredictionRecord>& preds, const GoldLabels& golds, Level level,
                       Averaging averaging) {
  return metrics_from_counts(confusion(preds, golds), level, averaging);
}

GoldLabels gold_labels(const Corpus& corpus) {
  GoldLabels golds;
  for (const auto& doc : corpus.documents) {
    for (const auto& s : doc.sentences) {
      for (const auto& c : s.candidates) golds.emplace(c.id, encode_labels(c.label));
    }
  }
  return golds;
}

namespace {

std::string mention_key(const Sentence& sentence, const std::string& ref) {
  const EntityMention* m = sentence.find_mention(ref);
  if (!m) return ref;
  if (m->normalized && !m->normalized->empty()) return *m->normalized;
  std::string s = text::ascii_lower(m->surface);
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

}  // namespace

std::string abstract_pair_key(const Document& doc, const Sentence& sentence, const CandidatePair& pair) {
  return doc.id + "|" + mention_key(sentence, pair.snp_ref) + "|" + mention_key(sentence, pair.pheno_ref);
}

AbstractAggregation aggregate_to_abstract(const std::vector<PredictionRecord>& sentence_preds, const Corpus& corpus) {
  std::map<std::string, std::string, std::less<>> key_of;  // candidate id -> pair key
  AbstractAggregation out;
  for (const auto& doc : corpus.documents) {
    for (const auto& s : doc.sentences) {
      for (const auto& c : s.candidates) {
        const std::string key = abstract_pair_key(doc, s, c);
        key_of.emplace(c.id, key);
        int& gold = out.golds.try_emplace(key, 0).first->second;
        gold = std::max(gold, encode_labels(c.label));
      }
    }
  }

  std::map<std::string, PredictionRecord> grouped;
  for (const auto& p : sentence_preds) {
    const auto it = key_of.find(p.candidate_ref);
    if (it == key_of.end()) throw MissingGold("prediction " + p.candidate_ref + " names no corpus candidate");
    auto [g, inserted] = grouped.try_emplace(it->second);
    PredictionRecord& agg = g->second;
    if (inserted) {
      agg = p;
      agg.candidate_ref = it->second;
      continue;
    }
    agg.class_id = std::max(agg.class_id, p.class_id);
    if (p.probs[1] > agg.probs[1]) agg.probs = p.probs;
  }
  out.predictions.reserve(grouped.size());
  for (auto& [key, rec] : grouped) out.predictions.push_back(std::move(rec));
  return out;
}

namespace {

double pick(const MetricsReport& r, Metric m) {
  switch (m) {
    case Metric::Precision: return r.precision;
    case Metric::Recall: return r.recall;
    case Metric::F1: return r.f1;
  }
  return r.f1;
}

double percentile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::pair<double, double> bootstrap_ci(const std::vector<PredictionRecord>& preds, const GoldLabels& golds,
                                       Metric metric, Averaging averaging, std::size_t n_resamples,
                                       std::uint64_t seed) {
  if (n_resamples < 100) throw ConfigMismatch("bootstrap needs at least 100 resamples");
  confusion(preds, golds);  // validates refs and duplicates
  if (preds.empty()) throw EmptyDataset("bootstrap over an empty prediction set");

  std::vector<std::pair<int, int>> pairs;  // (gold, pred)
  pairs.reserve(preds.size());
  for (const auto& p : preds) pairs.emplace_back(golds.find(p.candidate_ref)->second, p.class_id);

  std::vector<double> values(n_resamples);
  const auto n = static_cast<std::int64_t>(n_resamples);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < n; ++r) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
    ConfusionCounts c;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& [g, p] = pairs[rng.below(pairs.size())];
      tally(c, g, p);
    }
    values[static_cast<std::size_t>(r)] = pick(metrics_from_counts(c, Level::Sentence, averaging), metric);
  }
  std::sort(values.begin(), values.end());
  return {percentile(values, 0.025), percentile(values, 0.975)};
}

nlohmann::ordered_json to_json(const MetricsReport& r, const ReportContext& ctx) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["level"] = std::string(to_string(r.level));
  j["averaging"] = std::string(to_string(r.averaging));
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["n_instances"] = r.n_instances;
  ordered_json modes = ordered_json::object();
  for (auto a : {Averaging::PositiveClass, Averaging::Macro, Averaging::Micro}) {
    const Prf& m = r.modes.at(a);
    modes[std::string(to_string(a))] = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
  }
  j["modes"] = modes;
  ordered_json counts = ordered_json::object();
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& c = r.counts.per_class[k];
    counts["class_" + std::to_string(k)] = {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
  }
  j["counts"] = counts;
  j["undefined_flags"] = r.undefined_flags;
  if (ctx.ci) j["ci95"] = {ctx.ci->first, ctx.ci->second};
  j["config"] = ctx.config;
  j["checkpoint"] = ctx.checkpoint;
  return j;
}

std::string csv_header() { return "level,averaging,precision,recall,f1,n_instances"; }

std::string csv_line(const MetricsReport& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%zu", r.precision, r.recall, r.f1, r.n_instances);
  return std::string(to_string(r.level)) + "," + std::string(to_string(r.averaging)) + buf;
}

}  // namespace snprex
