#pragma once

// Data model for attention-head norm captures.
//
// A capture holds, for every multiple-choice sample, one L x H matrix of
// per-head L2 norms per answer option, taken at the final token of the
// "question + option" forward pass. Heads are addressed by a flat index
// i = layer * H + head.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace novo {

using HeadIndex = std::uint32_t;

struct ModelGeometry {
  std::size_t layers = 0;
  std::size_t heads_per_layer = 0;
  std::string model_id;

  std::size_t num_heads() const noexcept { return layers * heads_per_layer; }
  HeadIndex flat_index(std::size_t layer, std::size_t head) const noexcept {
    return static_cast<HeadIndex>(layer * heads_per_layer + head);
  }
  std::size_t layer_of(HeadIndex i) const noexcept { return i / heads_per_layer; }
  std::size_t head_of(HeadIndex i) const noexcept { return i % heads_per_layer; }

  // Shape equality; model_id is free text and not compared.
  bool same_shape(const ModelGeometry& o) const noexcept {
    return layers == o.layers && heads_per_layer == o.heads_per_layer;
  }
  bool operator==(const ModelGeometry&) const = default;
};

// Last-position head norms of one option, row-major (layer-major).
struct NormMatrix {
  std::vector<float> values;

  float operator[](HeadIndex i) const { return values[i]; }
  std::size_t size() const noexcept { return values.size(); }
  bool operator==(const NormMatrix&) const = default;
};

// Head norms at every captured position, last token first: position 0 is
// the final token and must equal the option's NormMatrix.
struct PositionalNorms {
  std::size_t positions = 0;
  std::vector<float> values;  // positions x num_heads

  float at(std::size_t position, HeadIndex head, std::size_t num_heads) const {
    return values[position * num_heads + head];
  }
  bool operator==(const PositionalNorms&) const = default;
};

// Attention mass from the final query position, per head.
struct AttentionSummary {
  std::vector<float> end_token_mass;
  std::vector<float> punct_mass;

  bool operator==(const AttentionSummary&) const = default;
};

struct OptionRecord {
  std::optional<std::string> text;
  NormMatrix norms;
  std::optional<PositionalNorms> positional;
  std::optional<AttentionSummary> attention;
  std::optional<float> lm_score;

  bool operator==(const OptionRecord&) const = default;
};

struct SampleRecord {
  std::string sample_id;
  std::optional<std::string> category;
  std::size_t correct_index = 0;
  std::vector<OptionRecord> options;

  std::size_t num_options() const noexcept { return options.size(); }
  bool operator==(const SampleRecord&) const = default;
};

struct CaptureSet {
  ModelGeometry geometry;
  std::string dataset_id;
  // Free-form header annotations (hook point, lm score kind, ...).
  std::map<std::string, std::string> metadata;
  std::vector<SampleRecord> records;

  bool has_positions() const {
    for (const auto& r : records)
      for (const auto& o : r.options)
        if (o.positional) return true;
    return false;
  }
  bool has_attention() const {
    for (const auto& r : records)
      for (const auto& o : r.options)
        if (o.attention) return true;
    return false;
  }
  std::set<std::string> sample_ids() const {
    std::set<std::string> ids;
    for (const auto& r : records) ids.insert(r.sample_id);
    return ids;
  }
  bool operator==(const CaptureSet&) const = default;
};

struct Violation {
  std::string sample_id;             // empty for capture-level rules
  std::optional<std::size_t> option;
  std::string rule;
  std::string detail;

  std::string to_string() const {
    std::string s;
    if (!sample_id.empty()) s += "sample '" + sample_id + "'";
    if (option) s += (s.empty() ? "" : " ") + std::string("option ") + std::to_string(*option);
    if (!s.empty()) s += ": ";
    s += rule;
    if (!detail.empty()) s += " (" + detail + ")";
    return s;
  }
};

inline constexpr double kAttentionMassEpsilon = 1e-6;

namespace detail {

inline bool valid_norm(float v) { return std::isfinite(v) && v >= 0.0f; }

inline void check_norm_array(const std::vector<float>& values, const std::string& what,
                             const SampleRecord& r, std::size_t option,
                             std::vector<Violation>& out) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!valid_norm(values[i])) {
      out.push_back({r.sample_id, option, what + " must be finite and non-negative",
                     "cell " + std::to_string(i) + " = " + std::to_string(values[i])});
      return;  // one report per array
    }
  }
}

inline void check_option(const OptionRecord& o, std::size_t k, const SampleRecord& r,
                         std::size_t n, std::vector<Violation>& out) {
  if (o.norms.size() != n) {
    out.push_back({r.sample_id, k, "norm matrix shape mismatch",
                   "expected " + std::to_string(n) + " values, got " +
                       std::to_string(o.norms.size())});
  } else {
    check_norm_array(o.norms.values, "norm", r, k, out);
  }

  if (o.positional) {
    const auto& p = *o.positional;
    if (p.positions == 0) {
      out.push_back({r.sample_id, k, "positional norms need at least one position", ""});
    } else if (p.values.size() != p.positions * n) {
      out.push_back({r.sample_id, k, "positional norms shape mismatch",
                     "expected " + std::to_string(p.positions * n) + " values, got " +
                         std::to_string(p.values.size())});
    } else {
      check_norm_array(p.values, "positional norm", r, k, out);
      if (o.norms.size() == n) {
        for (std::size_t i = 0; i < n; ++i) {
          // Bitwise-equal floats; NaNs were reported above.
          if (!(p.values[i] == o.norms.values[i])) {
            out.push_back({r.sample_id, k, "positional slice 0 differs from norm matrix",
                           "cell " + std::to_string(i)});
            break;
          }
        }
      }
    }
  }

  if (o.attention) {
    const auto& a = *o.attention;
    if (a.end_token_mass.size() != n || a.punct_mass.size() != n) {
      out.push_back({r.sample_id, k, "attention summary shape mismatch", ""});
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const float e = a.end_token_mass[i];
        const float p = a.punct_mass[i];
        const bool in_range = std::isfinite(e) && std::isfinite(p) && e >= 0.0f && e <= 1.0f &&
                              p >= 0.0f && p <= 1.0f;
        if (!in_range) {
          out.push_back({r.sample_id, k, "attention mass outside [0,1]",
                         "head " + std::to_string(i)});
          break;
        }
        if (static_cast<double>(e) + static_cast<double>(p) > 1.0 + kAttentionMassEpsilon) {
          out.push_back({r.sample_id, k, "attention masses sum above 1",
                         "head " + std::to_string(i)});
          break;
        }
      }
    }
  }

  if (o.lm_score && !std::isfinite(*o.lm_score))
    out.push_back({r.sample_id, k, "lm_score must be finite", ""});
}

}  // namespace detail

// Returns every invariant violation found; empty means the capture is valid.
inline std::vector<Violation> validate(const CaptureSet& capture) {
  std::vector<Violation> out;
  const auto& g = capture.geometry;
  if (g.layers < 1 || g.heads_per_layer < 1) {
    out.push_back({"", std::nullopt, "geometry needs L >= 1 and H >= 1",
                   "L=" + std::to_string(g.layers) + " H=" + std::to_string(g.heads_per_layer)});
    return out;
  }
  if (capture.records.empty()) out.push_back({"", std::nullopt, "capture has no records", ""});

  const std::size_t n = g.num_heads();
  std::set<std::string> seen;
  for (const auto& r : capture.records) {
    if (r.sample_id.empty()) out.push_back({"", std::nullopt, "empty sample_id", ""});
    if (!seen.insert(r.sample_id).second)
      out.push_back({r.sample_id, std::nullopt, "duplicate sample_id", ""});
    if (r.options.size() < 2)
      out.push_back({r.sample_id, std::nullopt, "sample needs at least 2 options",
                     "K=" + std::to_string(r.options.size())});
    if (r.correct_index >= r.options.size())
      out.push_back({r.sample_id, std::nullopt, "gold index out of range",
                     "correct_index=" + std::to_string(r.correct_index) +
                         " K=" + std::to_string(r.options.size())});
    for (std::size_t k = 0; k < r.options.size(); ++k)
      detail::check_option(r.options[k], k, r, n, out);
  }
  return out;
}

}  // namespace novo
