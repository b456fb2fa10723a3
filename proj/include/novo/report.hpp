#pragma once

// Report exports. Report numbers are rounded to 6 significant digits so that
// reruns produce byte-identical files; capture norms are never rounded.

#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "novo/ablation.hpp"
#include "novo/analysis.hpp"
#include "novo/selection.hpp"
#include "novo/stats.hpp"
#include "novo/voting.hpp"

namespace novo {

inline std::string format_float(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

inline std::string format_float(const std::optional<double>& x) { return x ? format_float(*x) : ""; }

// Same value, rounded to 6 significant digits, as a JSON number.
inline nlohmann::json report_number(double x) { return std::stod(format_float(x)); }

inline nlohmann::json to_json(const EvaluationReport& r, bool by_category = true,
                              bool with_predictions = true) {
  nlohmann::json j;
  j["format"] = "novo-report";
  j["version"] = 1;
  j["accuracy"] = report_number(r.accuracy);
  j["n_samples"] = r.n_samples;
  j["n_correct"] = r.n_correct;
  if (by_category && !r.per_category.empty()) {
    nlohmann::json cats = nlohmann::json::object();
    for (const auto& [name, c] : r.per_category)
      cats[name] = {{"accuracy", report_number(c.accuracy())},
                    {"n_samples", c.n_samples},
                    {"n_correct", c.n_correct}};
    j["per_category"] = std::move(cats);
  }
  if (with_predictions) {
    auto preds = nlohmann::json::array();
    for (const auto& p : r.predictions) {
      nlohmann::json pj = {{"sample_id", p.sample_id},
                           {"gold", p.gold_index},
                           {"predicted", p.predicted_index}};
      auto counts = nlohmann::json::array();
      for (double c : p.vote_counts) counts.push_back(report_number(c));
      pj["vote_counts"] = std::move(counts);
      if (p.voter_votes) pj["voter_votes"] = *p.voter_votes;
      if (p.category) pj["category"] = *p.category;
      preds.push_back(std::move(pj));
    }
    j["predictions"] = std::move(preds);
  }
  return j;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_predictions_csv(const EvaluationReport& r, std::ostream& out) {
  out << "sample_id,gold,predicted,correct,category\n";
  for (const auto& p : r.predictions)
    out << csv_field(p.sample_id) << ',' << p.gold_index << ',' << p.predicted_index << ','
        << (p.correct() ? 1 : 0) << ',' << csv_field(p.category.value_or("")) << '\n';
}

inline void write_category_csv(const EvaluationReport& r, std::ostream& out) {
  out << "category,n_samples,n_correct,accuracy\n";
  for (const auto& [name, c] : r.per_category)
    out << csv_field(name) << ',' << c.n_samples << ',' << c.n_correct << ','
        << format_float(c.accuracy()) << '\n';
}

inline void write_grid_csv(const GridResult& g, std::ostream& out) {
  out << "n_samples";
  for (double p : g.percentiles) out << ",p" << format_float(p);
  out << '\n';
  for (std::size_t i = 0; i < g.sample_counts.size(); ++i) {
    out << g.sample_counts[i];
    for (double a : g.mean_accuracy[i]) out << ',' << format_float(a);
    out << '\n';
  }
}

inline void write_stats_csv(const SummaryStats& s, std::ostream& out) {
  out << "mean,std,min,q25,q50,q75,max\n"
      << format_float(s.mean) << ',' << format_float(s.stddev) << ',' << format_float(s.min) << ','
      << format_float(s.q25) << ',' << format_float(s.q50) << ',' << format_float(s.q75) << ','
      << format_float(s.max) << '\n';
}

inline void write_runs_csv(const RepeatedSelectionStats& r, std::uint64_t base_seed, std::ostream& out) {
  out << "run,seed,voters,accuracy\n";
  for (std::size_t i = 0; i < r.accuracies.size(); ++i)
    out << i << ',' << base_seed + i << ',' << r.voter_counts[i] << ',' << format_float(r.accuracies[i])
        << '\n';
}

inline void write_ranked_csv(std::span<const RankedVoter> ranked, const ModelGeometry& g,
                             std::ostream& out) {
  out << "rank,head,layer,head_in_layer,direction,accuracy\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& r = ranked[i];
    out << i + 1 << ',' << r.voter.head << ',' << g.layer_of(r.voter.head) << ','
        << g.head_of(r.voter.head) << ',' << to_string(r.voter.direction) << ','
        << format_float(r.accuracy) << '\n';
  }
}

inline void write_accuracy_vs_k_csv(std::span<const AccuracyPoint> series, std::ostream& out) {
  out << "k,accuracy,correlation,smoothed_correlation\n";
  for (const auto& p : series)
    out << p.k << ',' << format_float(p.accuracy) << ',' << format_float(p.correlation) << ','
        << format_float(p.smoothed_correlation) << '\n';
}

inline void write_hamming_csv(const std::vector<std::vector<std::size_t>>& d,
                              std::span<const std::string> names, std::ostream& out) {
  out << "voter";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << names[i];
    for (auto x : d[i]) out << ',' << x;
    out << '\n';
  }
}

inline void write_clusters_csv(const ErrorClustering& c, std::span<const std::string> names,
                               std::ostream& out) {
  out << "voter,cluster\n";
  for (std::size_t i = 0; i < c.labels.size(); ++i) out << names[i] << ',' << c.labels[i] << '\n';
}

struct TypeSummaryRow {
  std::string label;
  SummaryStats stats;
};

// Count, mean, std, min, quartiles and max of individual accuracies.
inline void write_type_summary_csv(std::span<const TypeSummaryRow> rows, std::ostream& out) {
  out << "voter,count,mean,std,min,q25,q50,q75,max\n";
  for (const auto& r : rows) {
    const auto& s = r.stats;
    out << r.label << ',' << s.count << ',' << format_float(s.mean) << ',' << format_float(s.stddev)
        << ',' << format_float(s.min) << ',' << format_float(s.q25) << ',' << format_float(s.q50)
        << ',' << format_float(s.q75) << ',' << format_float(s.max) << '\n';
  }
}

inline void write_ablation_csv(const AblationSeries& even, const AblationSeries& exhaust,
                               std::ostream& out) {
  out << "removed,even_across_clusters,exhaust_cluster\n";
  for (std::size_t i = 0; i < even.points.size(); ++i)
    out << even.points[i].removed << ',' << format_float(even.points[i].accuracy) << ','
        << format_float(exhaust.points[i].accuracy) << '\n';
}

}  // namespace novo
