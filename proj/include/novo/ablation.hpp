#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "novo/analysis.hpp"
#include "novo/capture.hpp"
#include "novo/error.hpp"
#include "novo/random.hpp"
#include "novo/stats.hpp"
#include "novo/voter_set.hpp"
#include "novo/voting.hpp"

namespace novo {

enum class RemovalStrategy {
  even_across_clusters,  // low variability: one voter per cluster per round
  exhaust_cluster,       // high variability: empty one cluster at a time
};

struct AblationPoint {
  std::size_t removed = 0;
  double accuracy = 0;
};

struct AblationSeries {
  std::vector<AblationPoint> points;      // removed = 0 .. |voters| - 1
  std::vector<HeadIndex> removal_order;   // every voter once; the last entry survives
};

namespace detail {

// Votes of every voter on every record: votes[v][s].
inline std::vector<std::vector<std::uint32_t>> vote_matrix(std::span<const Voter> voters,
                                                           const CaptureSet& capture) {
  std::vector<std::vector<std::uint32_t>> out(voters.size());
  for (std::size_t v = 0; v < voters.size(); ++v) {
    out[v].reserve(capture.records.size());
    for (const auto& s : capture.records) out[v].push_back(static_cast<std::uint32_t>(pick_option(s, voters[v])));
  }
  return out;
}

// Position (in voters order) removed at each step.
inline std::vector<std::size_t> removal_schedule(const ErrorClustering& clustering,
                                                 RemovalStrategy strategy, std::uint64_t seed) {
  const std::size_t k = clustering.k;
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < clustering.labels.size(); ++i) members[clustering.labels[i]].push_back(i);

  // Seeded removal order inside every cluster.
  Rng rng(seed);
  for (auto& m : members) {
    auto perm = sample_without_replacement(m.size(), m.size(), rng);
    std::vector<std::size_t> shuffled;
    for (auto p : perm) shuffled.push_back(m[p]);
    m = std::move(shuffled);
  }

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const bool even = strategy == RemovalStrategy::even_across_clusters;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return even ? members[a].size() > members[b].size() : members[a].size() < members[b].size();
  });

  std::vector<std::size_t> schedule;
  if (even) {
    std::vector<std::size_t> next(k, 0);
    while (schedule.size() < clustering.labels.size())
      for (std::size_t c : order)
        if (next[c] < members[c].size()) schedule.push_back(members[c][next[c]++]);
  } else {
    for (std::size_t c : order) schedule.insert(schedule.end(), members[c].begin(), members[c].end());
  }
  return schedule;
}

}  // namespace detail

// Removes voters one at a time following `strategy` and re-evaluates the
// remaining mix after each removal, down to a single voter.
inline AblationSeries ablate_voters(const VoterSet& voters, const ErrorClustering& clustering,
                                    RemovalStrategy strategy, std::uint64_t seed,
                                    const CaptureSet& capture) {
  if (voters.empty()) throw ConfigError("ablation needs a non-empty voter set");
  if (clustering.labels.size() != voters.size())
    throw ConfigError("clustering does not cover the voter set");
  require_same_shape(voters, capture.geometry);

  const auto vs = voters.voters();
  const auto votes = detail::vote_matrix(vs, capture);
  const std::size_t n = capture.records.size();
  std::vector<std::vector<double>> counts(n);
  for (std::size_t s = 0; s < n; ++s) {
    counts[s].assign(capture.records[s].num_options(), 0.0);
    for (const auto& row : votes) counts[s][row[s]] += 1.0;
  }
  auto accuracy = [&] {
    std::size_t ok = 0;
    for (std::size_t s = 0; s < n; ++s)
      ok += argmax_lowest(counts[s]) == capture.records[s].correct_index ? 1 : 0;
    return static_cast<double>(ok) / static_cast<double>(n);
  };

  AblationSeries out;
  const auto schedule = detail::removal_schedule(clustering, strategy, seed);
  for (auto v : schedule) out.removal_order.push_back(vs[v].head);
  out.points.push_back({0, accuracy()});
  for (std::size_t step = 0; step + 1 < schedule.size(); ++step) {
    const auto& row = votes[schedule[step]];
    for (std::size_t s = 0; s < n; ++s) counts[s][row[s]] -= 1.0;
    out.points.push_back({step + 1, accuracy()});
  }
  return out;
}

struct LengthFilter {
  double min_pct = 5.0;
  double max_pct = 95.0;
};

struct PositionalResult {
  double accuracy = 0;
  std::size_t n_evaluated = 0;
  std::size_t n_excluded = 0;
};

// Votes with norms read `offset` positions before the final token. Options
// shorter than offset + 1 positions read their earliest captured position.
inline PositionalResult positional_evaluate(const VoterSet& voters, const CaptureSet& capture,
                                            std::size_t offset,
                                            std::optional<LengthFilter> filter = std::nullopt,
                                            VoteMode mode = VoteMode::majority) {
  require_same_shape(voters, capture.geometry);
  const std::size_t nh = capture.geometry.num_heads();
  std::vector<double> lengths;
  for (const auto& s : capture.records) {
    std::size_t len = 0;
    for (const auto& o : s.options) {
      if (!o.positional) throw DataError("sample '" + s.sample_id + "' lacks positional norms");
      len = std::max(len, o.positional->positions);
    }
    lengths.push_back(static_cast<double>(len));
  }
  double lo = 0, hi = std::numeric_limits<double>::infinity();
  if (filter) {
    std::vector<double> sorted = lengths;
    std::sort(sorted.begin(), sorted.end());
    lo = quantile_sorted(sorted, filter->min_pct / 100.0);
    hi = quantile_sorted(sorted, filter->max_pct / 100.0);
  }

  PositionalResult out;
  std::size_t correct = 0;
  for (std::size_t r = 0; r < capture.records.size(); ++r) {
    if (lengths[r] < lo || lengths[r] > hi) {
      ++out.n_excluded;
      continue;
    }
    const auto& s = capture.records[r];
    const auto p = detail::tally(voters, s, mode, false, [&](std::size_t k, HeadIndex h) {
      const auto& pos = *s.options[k].positional;
      return pos.at(std::min(offset, pos.positions - 1), h, nh);
    });
    correct += p.correct() ? 1 : 0;
    ++out.n_evaluated;
  }
  if (out.n_evaluated == 0) throw DataError("no samples survive the length filter");
  out.accuracy = static_cast<double>(correct) / static_cast<double>(out.n_evaluated);
  return out;
}

struct CaptureComparison {
  double acc_a = 0;
  double acc_b = 0;
  double delta = 0;  // acc_b - acc_a
};

// Same voters on two paired captures (e.g. original vs. transformed text).
inline CaptureComparison compare_captures(const VoterSet& voters, const CaptureSet& a,
                                          const CaptureSet& b, VoteMode mode = VoteMode::majority) {
  if (!a.geometry.same_shape(b.geometry)) throw DataError("compared captures differ in geometry");
  if (a.sample_ids() != b.sample_ids() || a.records.size() != b.records.size())
    throw DataError("compared captures are not paired by sample_id");
  CaptureComparison c;
  c.acc_a = evaluate(voters, a, mode).accuracy;
  c.acc_b = evaluate(voters, b, mode).accuracy;
  c.delta = c.acc_b - c.acc_a;
  return c;
}

}  // namespace novo
