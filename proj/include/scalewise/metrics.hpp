#pragma once

#include <cctype>
#include <cmath>
#include <set>
#include <cstdlib>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "scalewise/error.hpp"

namespace scalewise {

struct LabeledOutcome {
  std::string uid;
  int pred_total = 0;
  std::string pred_label;
  std::vector<int> pred_item_scores;
  int gold_total = 0;
  std::string gold_label;
  std::optional<std::vector<int>> gold_item_scores;
  friend bool operator==(const LabeledOutcome&, const LabeledOutcome&) = default;
};

struct F1Scores {
  std::map<std::string, double> per_class;
  double macro = 0.0;
};

struct MetricsReport {
  double mae = 0.0;
  double kappa = 0.0;
  std::map<std::string, double> f1_per_class;
  double macro_f1 = 0.0;
  std::optional<std::map<int, double>> item_f1;
  int n = 0;
  int excluded = 0;
};

namespace detail {

template <typename A, typename B>
void check_arity(const A& a, const B& b, bool allow_empty = false) {
  if (a.size() != b.size())
    throw ArityError("length mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  if (!allow_empty && a.empty()) throw ArityError("empty input");
}

inline double f1_from_counts(long tp, long fp, long fn) {
  const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

}  // namespace detail

inline double mae(const std::vector<int>& pred, const std::vector<int>& gold) {
  detail::check_arity(pred, gold);
  long sum = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) sum += std::abs(pred[k] - gold[k]);
  return static_cast<double>(sum) / static_cast<double>(pred.size());
}

// Unweighted Cohen's kappa with marginal-product chance agreement.
inline double cohen_kappa(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  detail::check_arity(pred, gold);
  const double n = static_cast<double>(pred.size());
  std::map<std::string, long> pred_count, gold_count;
  long agree = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    ++pred_count[pred[k]];
    ++gold_count[gold[k]];
    agree += pred[k] == gold[k];
  }
  const double p_o = static_cast<double>(agree) / n;
  double p_e = 0.0;
  for (const auto& [label, c] : pred_count) {
    auto it = gold_count.find(label);
    if (it != gold_count.end()) p_e += (static_cast<double>(c) / n) * (static_cast<double>(it->second) / n);
  }
  if (p_e == 1.0) return p_o == 1.0 ? 1.0 : 0.0;
  return (p_o - p_e) / (1.0 - p_e);
}

// Per-class F1 over `labels` (F1 = 0 when precision + recall = 0) and their
// unweighted mean.
inline F1Scores f1_per_class(const std::vector<std::string>& pred, const std::vector<std::string>& gold,
                             const std::vector<std::string>& labels) {
  detail::check_arity(pred, gold, true);
  F1Scores out;
  for (const auto& label : labels) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
      const bool p = pred[k] == label;
      const bool g = gold[k] == label;
      tp += p && g;
      fp += p && !g;
      fn += !p && g;
    }
    out.per_class[label] = detail::f1_from_counts(tp, fp, fn);
  }
  double sum = 0.0;
  for (const auto& label : labels) sum += out.per_class[label];
  out.macro = labels.empty() ? 0.0 : sum / static_cast<double>(labels.size());
  return out;
}

// F1 of the positive class after binarizing item scores at >= threshold.
inline double item_f1(const std::vector<LabeledOutcome>& outcomes, int topic_index, int positive_threshold) {
  const auto k = static_cast<std::size_t>(topic_index - 1);
  long tp = 0, fp = 0, fn = 0;
  for (const auto& o : outcomes) {
    if (!o.gold_item_scores || topic_index < 1 || k >= o.gold_item_scores->size() || k >= o.pred_item_scores.size())
      throw MissingItemScores("outcome '" + o.uid + "' lacks item " + std::to_string(topic_index));
    const bool p = o.pred_item_scores[k] >= positive_threshold;
    const bool g = (*o.gold_item_scores)[k] >= positive_threshold;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
  }
  return detail::f1_from_counts(tp, fp, fn);
}

inline MetricsReport compute_metrics(const std::vector<LabeledOutcome>& outcomes,
                                     const std::vector<std::string>& labels, int item_count, int item_threshold) {
  MetricsReport r;
  r.n = static_cast<int>(outcomes.size());
  if (outcomes.empty()) return r;
  std::vector<int> pred_total, gold_total;
  std::vector<std::string> pred_label, gold_label;
  bool have_items = true;
  for (const auto& o : outcomes) {
    pred_total.push_back(o.pred_total);
    gold_total.push_back(o.gold_total);
    pred_label.push_back(o.pred_label);
    gold_label.push_back(o.gold_label);
    have_items = have_items && o.gold_item_scores && static_cast<int>(o.gold_item_scores->size()) == item_count &&
                 static_cast<int>(o.pred_item_scores.size()) == item_count;
  }
  r.mae = mae(pred_total, gold_total);
  r.kappa = cohen_kappa(pred_label, gold_label);
  auto f1 = f1_per_class(pred_label, gold_label, labels);
  r.f1_per_class = std::move(f1.per_class);
  r.macro_f1 = f1.macro;
  if (have_items && item_count > 0) {
    r.item_f1.emplace();
    for (int t = 1; t <= item_count; ++t) (*r.item_f1)[t] = item_f1(outcomes, t, item_threshold);
  }
  return r;
}

inline nlohmann::json outcome_to_json(const LabeledOutcome& o) {
  return {{"uid", o.uid},
          {"pred_total", o.pred_total},
          {"pred_label", o.pred_label},
          {"pred_item_scores", o.pred_item_scores},
          {"gold_total", o.gold_total},
          {"gold_label", o.gold_label},
          {"gold_item_scores", o.gold_item_scores ? nlohmann::json(*o.gold_item_scores) : nlohmann::json(nullptr)}};
}

inline LabeledOutcome outcome_from_json(const nlohmann::json& j) {
  LabeledOutcome o;
  o.uid = j.at("uid").get<std::string>();
  o.pred_total = j.at("pred_total").get<int>();
  o.pred_label = j.at("pred_label").get<std::string>();
  o.pred_item_scores = j.at("pred_item_scores").get<std::vector<int>>();
  o.gold_total = j.at("gold_total").get<int>();
  o.gold_label = j.at("gold_label").get<std::string>();
  if (!j.at("gold_item_scores").is_null()) o.gold_item_scores = j.at("gold_item_scores").get<std::vector<int>>();
  return o;
}

inline nlohmann::json metrics_to_json(const MetricsReport& r) {
  nlohmann::json f1 = nlohmann::json::object();
  nlohmann::json f1_pct = nlohmann::json::object();
  for (const auto& [label, v] : r.f1_per_class) {
    f1[label] = v;
    f1_pct[label] = v * 100.0;
  }
  nlohmann::json j = {{"n", r.n},
                      {"excluded", r.excluded},
                      {"mae", r.mae},
                      {"kappa", r.kappa},
                      {"f1_per_class", f1},
                      {"macro_f1", r.macro_f1},
                      {"display_percent", {{"kappa", r.kappa * 100.0}, {"f1_per_class", f1_pct}, {"macro_f1", r.macro_f1 * 100.0}}}};
  if (r.item_f1) {
    nlohmann::json items = nlohmann::json::object();
    for (const auto& [t, v] : *r.item_f1) items[std::to_string(t)] = v;
    j["item_f1"] = items;
  } else {
    j["item_f1"] = nullptr;
  }
  return j;
}

// Aligned plain-text table: MAE, Kappa, one F1 column per class, Macro F1.
// Rates appear as raw [0,1] values and as percentages.
inline std::string render_metrics_table(const MetricsReport& r) {
  std::vector<std::pair<std::string, double>> cols{{"MAE", r.mae}, {"Kappa", r.kappa}};
  auto initial = [](const std::string& label) {
    return label.empty() ? std::string("?")
                         : std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(label[0]))));
  };
  std::set<std::string> initials;
  for (const auto& [label, _] : r.f1_per_class) initials.insert(initial(label));
  const bool short_tags = initials.size() == r.f1_per_class.size();
  for (const auto& [label, v] : r.f1_per_class)
    cols.emplace_back("F1[" + (short_tags ? initial(label) : label) + "]", v);
  cols.emplace_back("Macro F1", r.macro_f1);

  auto fmt = [](double v, int prec) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(prec) << v;
    return ss.str();
  };
  const int w = 10;
  std::ostringstream out;
  out << std::left << std::setw(w) << "";
  for (const auto& [name, _] : cols) out << std::right << std::setw(w) << name;
  out << "\n" << std::left << std::setw(w) << "raw";
  for (const auto& [_, v] : cols) out << std::right << std::setw(w) << fmt(v, 4);
  out << "\n" << std::left << std::setw(w) << "display";
  for (std::size_t k = 0; k < cols.size(); ++k)
    out << std::right << std::setw(w) << (k == 0 ? fmt(cols[k].second, 3) : fmt(cols[k].second * 100.0, 1));
  out << "\n";
  out << "n = " << r.n << ", excluded = " << r.excluded << "\n";
  if (r.item_f1) {
    out << "item F1:";
    for (const auto& [t, v] : *r.item_f1) out << " [" << t << "] " << fmt(v, 4);
    out << "\n";
  }
  return out.str();
}

}  // namespace scalewise
