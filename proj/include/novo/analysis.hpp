#pragma once

// Ensemble diagnostics over voters: per-predictor error vectors, their
// correlation and Hamming geometry, k-means error clusters, accuracy as
// voters are accumulated, and the Type-1/Type-2 voter heuristic.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "novo/capture.hpp"
#include "novo/error.hpp"
#include "novo/random.hpp"
#include "novo/stats.hpp"
#include "novo/voter_set.hpp"
#include "novo/voting.hpp"

namespace novo {

// 1 marks a miss on that record, 0 a hit; aligned to capture record order.
struct ErrorVector {
  std::vector<std::uint8_t> bits;
  std::string owner;

  std::size_t size() const noexcept { return bits.size(); }
  double accuracy() const {
    std::size_t errors = 0;
    for (auto b : bits) errors += b;
    return static_cast<double>(bits.size() - errors) / static_cast<double>(bits.size());
  }
};

inline std::string voter_name(Voter v) {
  return "head" + std::to_string(v.head) + ":" + std::string(to_string(v.direction));
}

inline ErrorVector error_vector(Voter v, const CaptureSet& capture) {
  ErrorVector e;
  e.owner = voter_name(v);
  e.bits.reserve(capture.records.size());
  for (const auto& s : capture.records) e.bits.push_back(pick_option(s, v) != s.correct_index ? 1 : 0);
  return e;
}

inline ErrorVector error_vector(const VoterSet& voters, const CaptureSet& capture,
                                VoteMode mode = VoteMode::majority) {
  const auto rep = evaluate(voters, capture, mode);
  ErrorVector e;
  e.owner = "ensemble";
  for (const auto& p : rep.predictions) e.bits.push_back(p.correct() ? 0 : 1);
  return e;
}

// Pearson correlation of two 0/1 vectors; nullopt when either is constant.
inline std::optional<double> pearson(const ErrorVector& a, const ErrorVector& b) {
  if (a.size() != b.size()) throw DataError("pearson: error vectors differ in length");
  std::int64_t n = static_cast<std::int64_t>(a.size());
  std::int64_t sa = 0, sb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a.bits[i];
    sb += b.bits[i];
    sab += a.bits[i] & b.bits[i];
  }
  // Exact integer moments, scaled by n^2.
  const std::int64_t cov = n * sab - sa * sb;
  const std::int64_t va = n * sa - sa * sa;
  const std::int64_t vb = n * sb - sb * sb;
  if (va == 0 || vb == 0) return std::nullopt;
  if (va == vb) return static_cast<double>(cov) / static_cast<double>(va);
  return static_cast<double>(cov) / std::sqrt(static_cast<double>(va) * static_cast<double>(vb));
}

inline std::size_t hamming(const ErrorVector& a, const ErrorVector& b) {
  if (a.size() != b.size()) throw DataError("hamming: error vectors differ in length");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a.bits[i] != b.bits[i] ? 1 : 0;
  return d;
}

inline std::vector<std::vector<std::size_t>> hamming_matrix(std::span<const ErrorVector> errors) {
  const std::size_t n = errors.size();
  std::vector<std::vector<std::size_t>> d(n, std::vector<std::size_t>(n, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d[i][j] = d[j][i] = hamming(errors[i], errors[j]);
  return d;
}

struct ErrorClustering {
  std::size_t k = 0;
  std::vector<std::size_t> labels;  // per error vector
  std::vector<std::vector<double>> centroids;
  double inertia = 0;
  std::size_t iterations = 0;

  std::vector<std::size_t> cluster_sizes() const {
    std::vector<std::size_t> sizes(k, 0);
    for (auto l : labels) ++sizes[l];
    return sizes;
  }
};

struct KMeansOptions {
  std::size_t max_iterations = 300;
  double tolerance = 1e-6;  // max centroid shift (Euclidean) to stop
  std::size_t restarts = 10;  // seedings drawn in turn from one stream; lowest inertia wins
};

namespace detail {

inline double squared_distance(const std::vector<std::uint8_t>& x, const std::vector<double>& c) {
  double d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = static_cast<double>(x[i]) - c[i];
    d += t * t;
  }
  return d;
}

// k-means++ seeding: first centre uniform, then proportional to the squared
// distance to the nearest chosen centre. If every remaining point coincides
// with a centre, the lowest-index unchosen point is taken.
inline std::vector<std::size_t> kmeanspp_seeds(std::span<const ErrorVector> pts, std::size_t k,
                                               Rng& rng) {
  const std::size_t n = pts.size();
  std::vector<std::size_t> chosen{static_cast<std::size_t>(rng.uniform_index(n))};
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<bool> used(n, false);
  used[chosen[0]] = true;
  while (chosen.size() < k) {
    std::vector<double> centre(pts[chosen.back()].bits.begin(), pts[chosen.back()].bits.end());
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(pts[i].bits, centre));
      total += d2[i];
    }
    std::size_t pick = n;
    if (total > 0) {
      const double u = rng.uniform_real() * total;
      double cum = 0;
      for (std::size_t i = 0; i < n; ++i) {
        cum += d2[i];
        if (d2[i] > 0 && cum > u) {
          pick = i;
          break;
        }
      }
      if (pick == n)  // rounding left u at the very top; take the last positive point
        for (std::size_t i = n; i-- > 0;)
          if (d2[i] > 0) {
            pick = i;
            break;
          }
    } else {
      for (std::size_t i = 0; i < n; ++i)
        if (!used[i]) {
          pick = i;
          break;
        }
    }
    used[pick] = true;
    chosen.push_back(pick);
  }
  return chosen;
}

}  // namespace detail

namespace detail {

inline ErrorClustering lloyd(std::span<const ErrorVector> errors, std::size_t k,
                             const std::vector<std::size_t>& seeds, const KMeansOptions& opts) {
  const std::size_t n = errors.size();
  const std::size_t dim = errors.front().size();
  ErrorClustering out;
  out.k = k;
  for (std::size_t s : seeds) out.centroids.emplace_back(errors[s].bits.begin(), errors[s].bits.end());
  out.labels.assign(n, 0);

  std::vector<double> dist(n, 0.0);
  for (std::size_t iter = 1; iter <= opts.max_iterations; ++iter) {
    out.iterations = iter;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = squared_distance(errors[i].bits, out.centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = squared_distance(errors[i].bits, out.centroids[c]);
        if (d < best_d) {
          best = c;
          best_d = d;
        }
      }
      out.labels[i] = best;
      dist[i] = best_d;
    }
    // An empty cluster takes the point farthest from its own centroid among
    // clusters that can spare one.
    auto sizes = out.cluster_sizes();
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i)
        if (sizes[out.labels[i]] > 1 && (far == n || dist[i] > dist[far])) far = i;
      --sizes[out.labels[far]];
      out.labels[far] = c;
      dist[far] = 0;
      ++sizes[c];
    }

    std::vector<std::vector<double>> next(k, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < dim; ++j) next[out.labels[i]][j] += errors[i].bits[j];
    double shift = 0;
    for (std::size_t c = 0; c < k; ++c) {
      double moved = 0;
      for (std::size_t j = 0; j < dim; ++j) {
        next[c][j] /= static_cast<double>(sizes[c]);
        moved += (next[c][j] - out.centroids[c][j]) * (next[c][j] - out.centroids[c][j]);
      }
      shift = std::max(shift, std::sqrt(moved));
    }
    out.centroids = std::move(next);
    if (shift < opts.tolerance) break;
  }
  out.inertia = 0;
  for (std::size_t i = 0; i < n; ++i) out.inertia += squared_distance(errors[i].bits, out.centroids[out.labels[i]]);
  return out;
}

}  // namespace detail

// Lloyd's k-means on raw 0/1 error vectors (squared Euclidean, which equals
// Hamming distance on binary data), seeded with k-means++. The first
// restart with the lowest inertia is kept.
inline ErrorClustering cluster_errors(std::span<const ErrorVector> errors, std::size_t k = 6,
                                      std::uint64_t seed = 0, KMeansOptions opts = {}) {
  const std::size_t n = errors.size();
  if (k == 0) throw ConfigError("k must be positive");
  if (opts.restarts == 0) throw ConfigError("k-means needs at least one restart");
  if (n < k)
    throw ConfigError("cannot form " + std::to_string(k) + " clusters from " + std::to_string(n) +
                      " voters");
  const std::size_t dim = errors.front().size();
  for (const auto& e : errors)
    if (e.size() != dim) throw DataError("cluster_errors: error vectors differ in length");

  Rng rng(seed);
  ErrorClustering best;
  for (std::size_t r = 0; r < opts.restarts; ++r) {
    auto c = detail::lloyd(errors, k, detail::kmeanspp_seeds(errors, k, rng), opts);
    if (r == 0 || c.inertia < best.inertia) best = std::move(c);
  }
  return best;
}

struct RankedVoter {
  Voter voter;
  double accuracy = 0;
};

// Voters sorted by individual accuracy on `capture`, best first; ties keep
// ascending head order.
inline std::vector<RankedVoter> rank_voters(const VoterSet& voters, const CaptureSet& capture) {
  require_same_shape(voters, capture.geometry);
  std::vector<RankedVoter> out;
  for (std::size_t i = 0; i < voters.size(); ++i)
    out.push_back({voters.voter(i), error_vector(voters.voter(i), capture).accuracy()});
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedVoter& a, const RankedVoter& b) { return a.accuracy > b.accuracy; });
  return out;
}

struct AccuracyPoint {
  std::size_t k = 0;
  double accuracy = 0;
  std::optional<double> correlation;           // vs. the k-1 mix
  std::optional<double> smoothed_correlation;  // trailing mean
};

// Mode-vote accuracy of the top-k mix for k = 1..|ranked|, plus the Pearson
// correlation between consecutive mixes' error vectors.
inline std::vector<AccuracyPoint> accuracy_vs_k(const CaptureSet& capture,
                                                std::span<const Voter> ranked,
                                                std::size_t smoothing_window = 8) {
  if (smoothing_window == 0) throw ConfigError("smoothing window must be positive");
  const std::size_t n = capture.records.size();
  std::vector<std::vector<double>> counts(n);
  for (std::size_t s = 0; s < n; ++s) counts[s].assign(capture.records[s].num_options(), 0.0);

  std::vector<AccuracyPoint> out;
  ErrorVector prev, cur;
  cur.bits.assign(n, 0);
  for (std::size_t k = 1; k <= ranked.size(); ++k) {
    std::size_t correct = 0;
    for (std::size_t s = 0; s < n; ++s) {
      const auto& rec = capture.records[s];
      counts[s][pick_option(rec, ranked[k - 1])] += 1.0;
      const bool ok = argmax_lowest(counts[s]) == rec.correct_index;
      correct += ok ? 1 : 0;
      cur.bits[s] = ok ? 0 : 1;
    }
    AccuracyPoint p;
    p.k = k;
    p.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    if (k > 1) p.correlation = pearson(cur, prev);
    out.push_back(p);
    prev = cur;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    double sum = 0;
    std::size_t m = 0;
    for (std::size_t j = i + 1 >= smoothing_window ? i + 1 - smoothing_window : 0; j <= i; ++j)
      if (out[j].correlation) {
        sum += *out[j].correlation;
        ++m;
      }
    if (m > 0) out[i].smoothed_correlation = sum / static_cast<double>(m);
  }
  return out;
}

// Relative norm gain of the correct option over the strongest wrong option,
// per position (0 = final token). Positions run to the shortest option.
inline std::vector<std::optional<double>> norm_gain_series(HeadIndex head, const SampleRecord& s,
                                                           std::size_t num_heads) {
  if (s.num_options() < 2) throw DataError("norm gain needs at least two options");
  std::size_t len = std::numeric_limits<std::size_t>::max();
  for (const auto& o : s.options) {
    if (!o.positional) throw DataError("sample '" + s.sample_id + "' lacks positional norms");
    len = std::min(len, o.positional->positions);
  }
  std::vector<std::optional<double>> gain(len);
  for (std::size_t p = 0; p < len; ++p) {
    const double correct = s.options[s.correct_index].positional->at(p, head, num_heads);
    double wrong = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < s.num_options(); ++k)
      if (k != s.correct_index) wrong = std::max(wrong, double(s.options[k].positional->at(p, head, num_heads)));
    if (wrong != 0.0) gain[p] = (correct - wrong) / wrong;
  }
  return gain;
}

// Mean gain per position over all records that reach that position.
inline std::vector<std::optional<double>> mean_norm_gain(HeadIndex head, const CaptureSet& capture) {
  std::vector<double> sum;
  std::vector<std::size_t> cnt;
  for (const auto& s : capture.records) {
    const auto g = norm_gain_series(head, s, capture.geometry.num_heads());
    if (g.size() > sum.size()) {
      sum.resize(g.size(), 0.0);
      cnt.resize(g.size(), 0);
    }
    for (std::size_t p = 0; p < g.size(); ++p)
      if (g[p]) {
        sum[p] += *g[p];
        ++cnt[p];
      }
  }
  std::vector<std::optional<double>> out(sum.size());
  for (std::size_t p = 0; p < sum.size(); ++p)
    if (cnt[p] > 0) out[p] = sum[p] / static_cast<double>(cnt[p]);
  return out;
}

// Heuristic voter typing. T1: heads whose final-position attention sits on
// end tokens and punctuation. T2: heads whose norm gain peaks earlier in the
// sequence, before the final `tail_positions` tokens.
enum class VoterType { t1, t2, untyped };

inline std::string_view to_string(VoterType t) noexcept {
  switch (t) {
    case VoterType::t1: return "T1";
    case VoterType::t2: return "T2";
    default: return "untyped";
  }
}

struct TypeRule {
  double tau_end = 0.5;
  std::size_t tail_positions = 3;
};

inline VoterType classify_voter_type(Voter v, const CaptureSet& capture, TypeRule rule = {}) {
  double mass = 0;
  std::size_t cnt = 0;
  for (const auto& s : capture.records)
    for (const auto& o : s.options) {
      if (!o.attention) throw DataError("sample '" + s.sample_id + "' lacks attention summaries");
      mass += static_cast<double>(o.attention->end_token_mass[v.head]) +
              static_cast<double>(o.attention->punct_mass[v.head]);
      ++cnt;
    }
  if (cnt > 0 && mass / static_cast<double>(cnt) >= rule.tau_end) return VoterType::t1;

  if (!capture.has_positions()) return VoterType::untyped;
  const auto gain = mean_norm_gain(v.head, capture);
  std::optional<std::size_t> peak;
  for (std::size_t p = 0; p < gain.size(); ++p)
    if (gain[p] && (!peak || *gain[p] > *gain[*peak])) peak = p;
  return peak && *peak >= rule.tail_positions ? VoterType::t2 : VoterType::untyped;
}

}  // namespace novo
