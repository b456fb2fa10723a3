#pragma once

// novo-capture JSON Lines reader/writer.
//
// Line 1 is a header object, every further line one sample record. Norms are
// written as 32-bit floats in shortest round-trip decimal form, so a
// write/read cycle reproduces every value bit for bit.

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "novo/capture.hpp"
#include "novo/error.hpp"

namespace novo {

inline constexpr const char* kCaptureFormat = "novo-capture";
inline constexpr int kCaptureVersion = 1;

// JSON flavour whose floating-point type is `float`: numbers are parsed with
// float precision and dumped as the shortest decimal that round-trips.
using CaptureJson = nlohmann::basic_json<std::map, std::vector, std::string, bool, std::int64_t,
                                         std::uint64_t, float>;

namespace detail {

inline CaptureJson float_array(const std::vector<float>& v) {
  CaptureJson a = CaptureJson::array();
  for (float x : v) a.push_back(x);
  return a;
}

inline CaptureJson header_to_json(const CaptureSet& c) {
  CaptureJson h;
  h["format"] = kCaptureFormat;
  h["version"] = kCaptureVersion;
  h["model_id"] = c.geometry.model_id;
  h["dataset_id"] = c.dataset_id;
  h["L"] = c.geometry.layers;
  h["H"] = c.geometry.heads_per_layer;
  h["has_positions"] = c.has_positions();
  h["has_attention"] = c.has_attention();
  if (!c.metadata.empty()) h["metadata"] = c.metadata;
  return h;
}

inline CaptureJson record_to_json(const SampleRecord& r, std::size_t num_heads) {
  CaptureJson j;
  j["sample_id"] = r.sample_id;
  if (r.category) j["category"] = *r.category;
  j["correct_index"] = r.correct_index;
  CaptureJson opts = CaptureJson::array();
  for (const auto& o : r.options) {
    CaptureJson oj;
    if (o.text) oj["text"] = *o.text;
    oj["norms"] = float_array(o.norms.values);
    if (o.positional) {
      CaptureJson rows = CaptureJson::array();
      for (std::size_t p = 0; p < o.positional->positions; ++p) {
        auto first = o.positional->values.begin() + static_cast<std::ptrdiff_t>(p * num_heads);
        rows.push_back(float_array(
            std::vector<float>(first, first + static_cast<std::ptrdiff_t>(num_heads))));
      }
      oj["positions"] = std::move(rows);
    }
    if (o.attention) {
      oj["attention"] = {{"end_token_mass", float_array(o.attention->end_token_mass)},
                         {"punct_mass", float_array(o.attention->punct_mass)}};
    }
    if (o.lm_score) oj["lm_score"] = *o.lm_score;
    opts.push_back(std::move(oj));
  }
  j["options"] = std::move(opts);
  return j;
}

class LineReader {
 public:
  LineReader(std::size_t line, std::size_t offset) : line_(line), offset_(offset) {}

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(line_, offset_, what); }

  const CaptureJson& field(const CaptureJson& obj, const char* key) const {
    auto it = obj.find(key);
    if (it == obj.end()) fail(std::string("missing field '") + key + "'");
    return *it;
  }

  std::string string_field(const CaptureJson& obj, const char* key) const {
    const auto& v = field(obj, key);
    if (!v.is_string()) fail(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
  }

  std::size_t count_field(const CaptureJson& obj, const char* key) const {
    const auto& v = field(obj, key);
    if (!v.is_number_unsigned()) fail(std::string("field '") + key + "' must be a non-negative integer");
    return v.get<std::size_t>();
  }

  bool bool_field(const CaptureJson& obj, const char* key) const {
    const auto& v = field(obj, key);
    if (!v.is_boolean()) fail(std::string("field '") + key + "' must be a boolean");
    return v.get<bool>();
  }

  std::vector<float> floats(const CaptureJson& v, const std::string& what,
                            std::size_t expected) const {
    if (!v.is_array()) fail(what + " must be an array");
    if (v.size() != expected)
      fail(what + " has " + std::to_string(v.size()) + " values, expected " +
           std::to_string(expected));
    std::vector<float> out;
    out.reserve(v.size());
    for (const auto& x : v) {
      if (!x.is_number()) fail(what + " must contain only numbers");
      out.push_back(x.get<float>());
    }
    return out;
  }

 private:
  std::size_t line_;
  std::size_t offset_;
};

inline CaptureJson parse_line(const std::string& text, const LineReader& at) {
  try {
    auto j = CaptureJson::parse(text);
    if (!j.is_object()) at.fail("expected a JSON object");
    return j;
  } catch (const CaptureJson::parse_error& e) {
    at.fail(std::string("malformed JSON: ") + e.what());
  }
}

struct HeaderFlags {
  bool has_positions = false;
  bool has_attention = false;
};

inline SampleRecord record_from_json(const CaptureJson& j, const ModelGeometry& g,
                                     const HeaderFlags& flags, const LineReader& at) {
  const std::size_t n = g.num_heads();
  SampleRecord r;
  r.sample_id = at.string_field(j, "sample_id");
  if (auto it = j.find("category"); it != j.end()) {
    if (!it->is_string()) at.fail("field 'category' must be a string");
    r.category = it->get<std::string>();
  }
  r.correct_index = at.count_field(j, "correct_index");
  const auto& opts = at.field(j, "options");
  if (!opts.is_array()) at.fail("field 'options' must be an array");
  for (std::size_t k = 0; k < opts.size(); ++k) {
    const auto& oj = opts[k];
    const std::string where = "option " + std::to_string(k);
    if (!oj.is_object()) at.fail(where + " must be an object");
    OptionRecord o;
    if (auto it = oj.find("text"); it != oj.end()) {
      if (!it->is_string()) at.fail(where + " text must be a string");
      o.text = it->get<std::string>();
    }
    o.norms.values = at.floats(at.field(oj, "norms"), where + " norms", n);
    if (auto it = oj.find("positions"); it != oj.end()) {
      if (!flags.has_positions) at.fail(where + " has positions but header has_positions=false");
      if (!it->is_array()) at.fail(where + " positions must be an array of arrays");
      PositionalNorms p;
      p.positions = it->size();
      p.values.reserve(p.positions * n);
      for (std::size_t pos = 0; pos < p.positions; ++pos) {
        auto row = at.floats((*it)[pos], where + " position " + std::to_string(pos), n);
        p.values.insert(p.values.end(), row.begin(), row.end());
      }
      o.positional = std::move(p);
    }
    if (auto it = oj.find("attention"); it != oj.end()) {
      if (!flags.has_attention) at.fail(where + " has attention but header has_attention=false");
      if (!it->is_object()) at.fail(where + " attention must be an object");
      AttentionSummary a;
      a.end_token_mass = at.floats(at.field(*it, "end_token_mass"), where + " end_token_mass", n);
      a.punct_mass = at.floats(at.field(*it, "punct_mass"), where + " punct_mass", n);
      o.attention = std::move(a);
    }
    if (auto it = oj.find("lm_score"); it != oj.end()) {
      if (!it->is_number()) at.fail(where + " lm_score must be a number");
      o.lm_score = it->get<float>();
    }
    r.options.push_back(std::move(o));
  }
  return r;
}

}  // namespace detail

inline void write_capture(const CaptureSet& capture, std::ostream& out) {
  if (auto v = validate(capture); !v.empty())
    throw DataError("refusing to write invalid capture: " + v.front().to_string());
  out << detail::header_to_json(capture).dump() << '\n';
  for (const auto& r : capture.records)
    out << detail::record_to_json(r, capture.geometry.num_heads()).dump() << '\n';
  if (!out) throw Error("failed writing capture stream");
}

inline void write_capture(const CaptureSet& capture, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_capture(capture, out);
}

inline CaptureSet read_capture(std::istream& in) {
  CaptureSet c;
  std::string text;
  std::size_t line = 0;
  std::size_t offset = 0;
  detail::HeaderFlags flags;
  bool have_header = false;

  while (std::getline(in, text)) {
    ++line;
    const std::size_t line_offset = offset;
    offset += text.size() + 1;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    detail::LineReader at(line, line_offset);

    if (!have_header) {
      auto h = detail::parse_line(text, at);
      if (at.string_field(h, "format") != kCaptureFormat) at.fail("not a novo-capture file");
      const auto& version = at.field(h, "version");
      if (!version.is_number_integer()) at.fail("field 'version' must be an integer");
      if (version.get<std::int64_t>() != kCaptureVersion)
        at.fail("unsupported version " + std::to_string(version.get<std::int64_t>()));
      c.geometry.model_id = at.string_field(h, "model_id");
      c.dataset_id = at.string_field(h, "dataset_id");
      c.geometry.layers = at.count_field(h, "L");
      c.geometry.heads_per_layer = at.count_field(h, "H");
      if (c.geometry.layers == 0 || c.geometry.heads_per_layer == 0)
        at.fail("header needs L >= 1 and H >= 1");
      flags.has_positions = at.bool_field(h, "has_positions");
      flags.has_attention = at.bool_field(h, "has_attention");
      if (auto it = h.find("metadata"); it != h.end()) {
        if (!it->is_object()) at.fail("field 'metadata' must be an object");
        for (const auto& [k, v] : it->items()) {
          if (!v.is_string()) at.fail("metadata values must be strings");
          c.metadata[k] = v.get<std::string>();
        }
      }
      have_header = true;
      continue;
    }
    if (text.empty()) continue;
    auto j = detail::parse_line(text, at);
    c.records.push_back(detail::record_from_json(j, c.geometry, flags, at));
  }
  if (!have_header) throw ParseError(1, 0, "missing header line");
  return c;
}

inline CaptureSet read_capture(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open capture '" + path + "'");
  return read_capture(in);
}

}  // namespace novo
