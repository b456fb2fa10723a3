#pragma once

// Norm selection. Every head predicts each sample twice, once through argmax
// and once through argmin of its norm across options. The more accurate of
// the two gives the head's direction and score; heads scoring at or above a
// percentile of all scores become voters.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "novo/capture.hpp"
#include "novo/error.hpp"
#include "novo/parallel.hpp"
#include "novo/random.hpp"
#include "novo/stats.hpp"
#include "novo/voter_set.hpp"
#include "novo/voting.hpp"

namespace novo {

enum class DrawMode { random, first_n, all };
enum class PercentileOver { head_max, both_rows };

inline std::string to_string(DrawMode d) {
  switch (d) {
    case DrawMode::random: return "random";
    case DrawMode::first_n: return "first-n";
    case DrawMode::all: return "all";
  }
  return "?";
}

inline std::string to_string(PercentileOver p) {
  return p == PercentileOver::head_max ? "head-max" : "both-rows";
}

struct SelectionConfig {
  std::size_t n_samples = 30;
  double percentile = 85.0;
  std::uint64_t seed = 0;
  DrawMode draw = DrawMode::random;
  PercentileOver over = PercentileOver::head_max;
  // Set for the fixed-direction variants (argmax-only / argmin-only).
  std::optional<Direction> fixed_direction;
};

// Per-head option picks for one sample.
struct DirectionalPredictions {
  std::vector<std::uint32_t> by_max;
  std::vector<std::uint32_t> by_min;

  const std::vector<std::uint32_t>& row(Direction d) const {
    return d == Direction::max ? by_max : by_min;
  }
};

// Integer hit counts per head and direction over the scored samples.
struct HeadAccuracyTable {
  std::size_t n_scored = 0;
  std::vector<std::uint32_t> max_hits;
  std::vector<std::uint32_t> min_hits;

  std::size_t num_heads() const noexcept { return max_hits.size(); }
  std::uint32_t hits(Direction d, HeadIndex i) const {
    return d == Direction::max ? max_hits[i] : min_hits[i];
  }
  double accuracy(Direction d, HeadIndex i) const {
    return static_cast<double>(hits(d, i)) / static_cast<double>(n_scored);
  }
  // Direction with more hits; MAX on ties.
  Direction best_direction(HeadIndex i) const {
    return min_hits[i] > max_hits[i] ? Direction::min : Direction::max;
  }
  std::uint32_t best_hits(HeadIndex i) const { return std::max(max_hits[i], min_hits[i]); }
};

struct SelectionResult {
  VoterSet voters;
  HeadAccuracyTable table;
  std::vector<std::size_t> drawn_rows;
  std::uint32_t threshold_hits = 0;
};

inline DirectionalPredictions head_predictions(const SampleRecord& sample) {
  if (sample.options.empty()) throw DataError("sample '" + sample.sample_id + "' has no options");
  const std::size_t n = sample.options.front().norms.size();
  DirectionalPredictions p;
  p.by_max.assign(n, 0);
  p.by_min.assign(n, 0);
  std::vector<float> hi(sample.options.front().norms.values);
  std::vector<float> lo(hi);
  for (std::size_t k = 1; k < sample.options.size(); ++k) {
    const auto& v = sample.options[k].norms.values;
    for (std::size_t i = 0; i < n; ++i) {
      if (v[i] > hi[i]) {
        hi[i] = v[i];
        p.by_max[i] = static_cast<std::uint32_t>(k);
      }
      if (v[i] < lo[i]) {
        lo[i] = v[i];
        p.by_min[i] = static_cast<std::uint32_t>(k);
      }
    }
  }
  return p;
}

namespace detail {

inline void score_sample(const SampleRecord& s, HeadAccuracyTable& t) {
  const auto p = head_predictions(s);
  if (p.by_max.size() != t.num_heads()) throw DataError("sample '" + s.sample_id + "' has wrong head count");
  const auto gold = static_cast<std::uint32_t>(s.correct_index);
  for (std::size_t i = 0; i < t.num_heads(); ++i) {
    t.max_hits[i] += p.by_max[i] == gold ? 1u : 0u;
    t.min_hits[i] += p.by_min[i] == gold ? 1u : 0u;
  }
  ++t.n_scored;
}

}  // namespace detail

inline HeadAccuracyTable head_accuracy_table(std::span<const SampleRecord> samples) {
  if (samples.empty()) throw DataError("head accuracy table needs at least one sample");
  HeadAccuracyTable t;
  t.max_hits.assign(samples.front().options.front().norms.size(), 0);
  t.min_hits = t.max_hits;
  for (const auto& s : samples) detail::score_sample(s, t);
  return t;
}

inline HeadAccuracyTable head_accuracy_table(const CaptureSet& capture,
                                             std::span<const std::size_t> rows) {
  if (rows.empty()) throw DataError("head accuracy table needs at least one sample");
  HeadAccuracyTable t;
  t.max_hits.assign(capture.geometry.num_heads(), 0);
  t.min_hits = t.max_hits;
  for (std::size_t r : rows) detail::score_sample(capture.records.at(r), t);
  return t;
}

// Record rows scored for selection, in draw order.
inline std::vector<std::size_t> draw_rows(const CaptureSet& capture, const SelectionConfig& cfg) {
  const std::size_t total = capture.records.size();
  if (total == 0) throw DataError("capture has no records");
  if (cfg.draw == DrawMode::all) {
    std::vector<std::size_t> rows(total);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
  }
  if (cfg.n_samples == 0) throw ConfigError("n_samples must be positive");
  if (cfg.n_samples > total)
    throw ConfigError("n_samples " + std::to_string(cfg.n_samples) + " exceeds the " +
                      std::to_string(total) + " records in the capture");
  if (cfg.draw == DrawMode::first_n) {
    std::vector<std::size_t> rows(cfg.n_samples);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
  }
  Rng rng(cfg.seed);
  return sample_without_replacement(total, cfg.n_samples, rng);
}

// Nearest-rank percentile: the ceil(p/100 * N)-th smallest value. p * N is
// formed first so integer percentiles give an exact rank.
inline std::uint32_t nearest_rank(std::vector<std::uint32_t> values, double percentile) {
  if (values.empty()) throw DataError("percentile of empty sequence");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(percentile * n / 100.0));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

inline SelectionResult run_selection(const CaptureSet& capture, const SelectionConfig& cfg) {
  if (!(cfg.percentile > 0.0 && cfg.percentile <= 100.0))
    throw ConfigError("percentile must lie in (0, 100]");
  SelectionResult out;
  out.drawn_rows = draw_rows(capture, cfg);
  out.table = head_accuracy_table(capture, out.drawn_rows);
  const auto& t = out.table;
  const std::size_t n = t.num_heads();

  std::vector<std::uint32_t> score(n);
  std::vector<Direction> dir(n);
  for (HeadIndex i = 0; i < n; ++i) {
    dir[i] = cfg.fixed_direction ? *cfg.fixed_direction : t.best_direction(i);
    score[i] = t.hits(dir[i], i);
  }

  std::vector<std::uint32_t> pool = score;
  if (!cfg.fixed_direction && cfg.over == PercentileOver::both_rows) {
    pool = t.max_hits;
    pool.insert(pool.end(), t.min_hits.begin(), t.min_hits.end());
  }
  out.threshold_hits = nearest_rank(std::move(pool), cfg.percentile);

  VoterSet& v = out.voters;
  v.geometry = capture.geometry;
  for (HeadIndex i = 0; i < n; ++i) {
    if (score[i] >= out.threshold_hits) {
      v.indices.push_back(i);
      v.indicators.push_back(dir[i]);
    }
  }
  auto& p = v.provenance;
  p.variant = !cfg.fixed_direction ? "novo" : (*cfg.fixed_direction == Direction::max ? "novo-a" : "novo-b");
  p.dataset_id = capture.dataset_id;
  p.draw = to_string(cfg.draw);
  p.n_samples = out.drawn_rows.size();
  p.percentile = cfg.percentile;
  p.percentile_over = to_string(cfg.over);
  p.seed = cfg.seed;
  p.threshold = static_cast<double>(out.threshold_hits) / static_cast<double>(t.n_scored);
  for (std::size_t r : out.drawn_rows) p.sample_ids.push_back(capture.records[r].sample_id);
  return out;
}

inline VoterSet select_voters(const CaptureSet& capture, SelectionConfig cfg) {
  cfg.fixed_direction.reset();
  return run_selection(capture, cfg).voters;
}

inline VoterSet select_voters_fixed(const CaptureSet& capture, SelectionConfig cfg, Direction d) {
  cfg.fixed_direction = d;
  return run_selection(capture, cfg).voters;
}

// Hyper-parameter-free selection: scores every head on all records, drops
// heads at or below the random-guess baseline (mean of 1/K), and weights the
// survivors by min-max normalized accuracy.
inline VoterSet select_voters_weighted(const CaptureSet& capture) {
  const auto t = head_accuracy_table(capture.records);
  double baseline_hits = 0;
  for (const auto& s : capture.records) baseline_hits += 1.0 / static_cast<double>(s.num_options());

  VoterSet v;
  v.geometry = capture.geometry;
  std::vector<double> scores;
  for (HeadIndex i = 0; i < t.num_heads(); ++i) {
    const std::uint32_t hits = t.best_hits(i);
    // Integer hits against a float sum; 1e-9 absorbs rounding in the sum.
    if (static_cast<double>(hits) <= baseline_hits + 1e-9) continue;
    v.indices.push_back(i);
    v.indicators.push_back(t.best_direction(i));
    scores.push_back(static_cast<double>(hits) / static_cast<double>(t.n_scored));
  }
  if (v.indices.empty()) throw DataError("no voters survive baseline");

  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  std::vector<double> weights(scores.size(), 1.0);
  if (*hi > *lo)
    for (std::size_t i = 0; i < scores.size(); ++i) weights[i] = (scores[i] - *lo) / (*hi - *lo);
  v.weights = std::move(weights);

  auto& p = v.provenance;
  p.variant = "novo-f";
  p.dataset_id = capture.dataset_id;
  p.draw = "all";
  p.n_samples = t.n_scored;
  p.percentile = 0;
  p.percentile_over = "none";
  p.seed = 0;
  p.threshold = baseline_hits / static_cast<double>(t.n_scored);
  for (const auto& s : capture.records) p.sample_ids.push_back(s.sample_id);
  return v;
}

inline void require_disjoint(const CaptureSet& selection, const CaptureSet& heldout) {
  const auto ids = selection.sample_ids();
  for (const auto& r : heldout.records)
    if (ids.count(r.sample_id))
      throw ConfigError("sample '" + r.sample_id + "' appears in both selection and held-out data");
}

struct GridResult {
  std::vector<std::size_t> sample_counts;
  std::vector<double> percentiles;
  std::vector<std::vector<double>> mean_accuracy;  // [count][percentile]
};

// Mean held-out accuracy per (sample count, percentile) cell. Repeat r of
// every cell uses seed base.seed + r, so cells are compared on the same draws.
inline GridResult grid_search(const CaptureSet& selection, const CaptureSet& heldout,
                              const std::vector<std::size_t>& sample_counts,
                              const std::vector<double>& percentiles, std::size_t repeats,
                              const SelectionConfig& base, unsigned threads = 1) {
  require_disjoint(selection, heldout);
  if (repeats == 0) throw ConfigError("repeats must be positive");
  if (sample_counts.empty() || percentiles.empty()) throw ConfigError("grid axes must be non-empty");
  const std::size_t cols = percentiles.size();
  const std::size_t cells = sample_counts.size() * cols;
  std::vector<double> acc(cells * repeats);
  parallel_for(cells * repeats, threads, [&](std::size_t job) {
    const std::size_t cell = job / repeats;
    const std::size_t r = job % repeats;
    SelectionConfig cfg = base;
    cfg.n_samples = sample_counts[cell / cols];
    cfg.percentile = percentiles[cell % cols];
    cfg.seed = base.seed + r;
    acc[job] = evaluate(run_selection(selection, cfg).voters, heldout).accuracy;
  });
  GridResult g{sample_counts, percentiles, {}};
  g.mean_accuracy.assign(sample_counts.size(), std::vector<double>(cols, 0.0));
  for (std::size_t cell = 0; cell < cells; ++cell) {
    double sum = 0;
    for (std::size_t r = 0; r < repeats; ++r) sum += acc[cell * repeats + r];
    g.mean_accuracy[cell / cols][cell % cols] = sum / static_cast<double>(repeats);
  }
  return g;
}

// Fraction of voters whose own prediction misses the gold answer, per record.
inline std::vector<double> sample_difficulty(const VoterSet& voters, const CaptureSet& capture) {
  if (voters.empty()) throw ConfigError("sample difficulty needs at least one voter");
  require_same_shape(voters, capture.geometry);
  std::vector<double> out;
  out.reserve(capture.records.size());
  for (const auto& s : capture.records) {
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < voters.size(); ++i)
      wrong += pick_option(s, voters.voter(i)) != s.correct_index ? 1 : 0;
    out.push_back(static_cast<double>(wrong) / static_cast<double>(voters.size()));
  }
  return out;
}

struct RepeatedSelectionStats {
  SummaryStats stats;
  std::vector<double> accuracies;  // run order, seeds cfg.seed + run
  std::vector<std::size_t> voter_counts;
};

inline RepeatedSelectionStats repeated_selection_stats(const CaptureSet& selection,
                                                       const CaptureSet& heldout,
                                                       const SelectionConfig& cfg,
                                                       std::size_t runs = 200,
                                                       unsigned threads = 1) {
  if (runs < 2) throw ConfigError("repeated selection needs at least 2 runs");
  require_disjoint(selection, heldout);
  RepeatedSelectionStats out;
  out.accuracies.resize(runs);
  out.voter_counts.resize(runs);
  parallel_for(runs, threads, [&](std::size_t r) {
    SelectionConfig c = cfg;
    c.seed = cfg.seed + r;
    auto v = run_selection(selection, c).voters;
    out.voter_counts[r] = v.size();
    out.accuracies[r] = evaluate(v, heldout).accuracy;
  });
  out.stats = summarize(out.accuracies);
  return out;
}

}  // namespace novo
