#pragma once

// Voting inference: every voter picks an option through its own direction
// (argmax or argmin of its head norm across options) and the ensemble answer
// is the mode of those picks, or the weighted sum of them.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "novo/capture.hpp"
#include "novo/error.hpp"
#include "novo/voter_set.hpp"

namespace novo {

enum class VoteMode { majority, weighted };

struct PredictionResult {
  std::string sample_id;
  std::optional<std::string> category;
  std::size_t gold_index = 0;
  std::size_t predicted_index = 0;
  std::vector<double> vote_counts;  // per option: counts or weight totals
  std::optional<std::vector<std::size_t>> voter_votes;

  bool correct() const noexcept { return predicted_index == gold_index; }
};

struct CategoryAccuracy {
  std::size_t n_samples = 0;
  std::size_t n_correct = 0;
  double accuracy() const noexcept {
    return n_samples == 0 ? 0.0 : static_cast<double>(n_correct) / static_cast<double>(n_samples);
  }
};

struct EvaluationReport {
  double accuracy = 0;
  std::size_t n_samples = 0;
  std::size_t n_correct = 0;
  std::map<std::string, CategoryAccuracy> per_category;
  std::vector<PredictionResult> predictions;
};

struct EvaluateOptions {
  bool keep_votes = false;
};

// Option picked by one head under a direction; ties resolve to the lowest
// option index. `read(k)` returns the head's norm on option k.
template <class Read>
std::size_t pick_option(std::size_t num_options, Direction d, Read&& read) {
  std::size_t best = 0;
  float best_value = read(std::size_t{0});
  for (std::size_t k = 1; k < num_options; ++k) {
    const float v = read(k);
    if (d == Direction::max ? v > best_value : v < best_value) {
      best = k;
      best_value = v;
    }
  }
  return best;
}

inline std::size_t pick_option(const SampleRecord& s, Voter v) {
  return pick_option(s.num_options(), v.direction,
                     [&](std::size_t k) { return s.options[k].norms[v.head]; });
}

// Index of the largest count, lowest index on ties.
inline std::size_t argmax_lowest(const std::vector<double>& counts) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < counts.size(); ++k)
    if (counts[k] > counts[best]) best = k;
  return best;
}

inline void require_same_shape(const VoterSet& voters, const ModelGeometry& g) {
  if (!voters.geometry.same_shape(g))
    throw DataError("geometry mismatch: voters are " + std::to_string(voters.geometry.layers) + "x" +
                    std::to_string(voters.geometry.heads_per_layer) + ", capture is " +
                    std::to_string(g.layers) + "x" + std::to_string(g.heads_per_layer));
}

namespace detail {

// Shared tally. `read(k, head)` is the norm a voter sees on option k.
template <class Read>
PredictionResult tally(const VoterSet& voters, const SampleRecord& sample, VoteMode mode,
                       bool keep_votes, Read&& read) {
  if (voters.empty()) throw ConfigError("cannot vote with an empty voter set");
  if (mode == VoteMode::weighted && !voters.weights)
    throw ConfigError("weighted voting needs a voter set with weights");
  PredictionResult r;
  r.sample_id = sample.sample_id;
  r.category = sample.category;
  r.gold_index = sample.correct_index;
  r.vote_counts.assign(sample.num_options(), 0.0);
  if (keep_votes) r.voter_votes.emplace().reserve(voters.size());
  for (std::size_t i = 0; i < voters.size(); ++i) {
    const Voter v = voters.voter(i);
    const std::size_t k = pick_option(sample.num_options(), v.direction,
                                      [&](std::size_t opt) { return read(opt, v.head); });
    r.vote_counts[k] += mode == VoteMode::weighted ? (*voters.weights)[i] : 1.0;
    if (keep_votes) r.voter_votes->push_back(k);
  }
  r.predicted_index = argmax_lowest(r.vote_counts);
  return r;
}

inline void accumulate(EvaluationReport& rep, PredictionResult p) {
  const bool ok = p.correct();
  rep.n_correct += ok ? 1 : 0;
  ++rep.n_samples;
  if (p.category) {
    auto& c = rep.per_category[*p.category];
    ++c.n_samples;
    c.n_correct += ok ? 1 : 0;
  }
  rep.predictions.push_back(std::move(p));
}

inline void finish(EvaluationReport& rep) {
  rep.accuracy = rep.n_samples == 0
                     ? 0.0
                     : static_cast<double>(rep.n_correct) / static_cast<double>(rep.n_samples);
}

}  // namespace detail

inline PredictionResult vote(const VoterSet& voters, const SampleRecord& sample,
                             bool keep_votes = false) {
  return detail::tally(voters, sample, VoteMode::majority, keep_votes,
                       [&](std::size_t k, HeadIndex h) { return sample.options[k].norms[h]; });
}

inline PredictionResult vote_weighted(const VoterSet& voters, const SampleRecord& sample,
                                      bool keep_votes = false) {
  return detail::tally(voters, sample, VoteMode::weighted, keep_votes,
                       [&](std::size_t k, HeadIndex h) { return sample.options[k].norms[h]; });
}

inline EvaluationReport evaluate(const VoterSet& voters, const CaptureSet& capture,
                                 VoteMode mode = VoteMode::majority, EvaluateOptions opts = {}) {
  require_same_shape(voters, capture.geometry);
  EvaluationReport rep;
  rep.predictions.reserve(capture.records.size());
  for (const auto& s : capture.records) {
    detail::accumulate(rep, mode == VoteMode::weighted ? vote_weighted(voters, s, opts.keep_votes)
                                                       : vote(voters, s, opts.keep_votes));
  }
  detail::finish(rep);
  return rep;
}

// Log-likelihood baseline: answer with the option of highest lm_score.
inline EvaluationReport lm_baseline_evaluate(const CaptureSet& capture) {
  EvaluationReport rep;
  for (const auto& s : capture.records) {
    PredictionResult p;
    p.sample_id = s.sample_id;
    p.category = s.category;
    p.gold_index = s.correct_index;
    for (const auto& o : s.options) {
      if (!o.lm_score) throw DataError("sample '" + s.sample_id + "' has an option without lm_score");
      p.vote_counts.push_back(*o.lm_score);
    }
    p.predicted_index = argmax_lowest(p.vote_counts);
    detail::accumulate(rep, std::move(p));
  }
  detail::finish(rep);
  return rep;
}

// Fraction of voter norms (all samples, all options) inside [lo, hi].
// Informational only.
inline double norm_band_fraction(const VoterSet& voters, const CaptureSet& capture, double lo = 0.5,
                                 double hi = 3.0) {
  std::size_t inside = 0;
  std::size_t total = 0;
  for (const auto& s : capture.records)
    for (const auto& o : s.options)
      for (HeadIndex h : voters.indices) {
        const double v = o.norms[h];
        inside += (v >= lo && v <= hi) ? 1 : 0;
        ++total;
      }
  return total == 0 ? 0.0 : static_cast<double>(inside) / static_cast<double>(total);
}

}  // namespace novo
