#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "novo/capture.hpp"
#include "novo/error.hpp"

namespace novo {

// Which operator a voter applies across options: the option with the
// highest norm, or the lowest.
enum class Direction : std::uint8_t { max, min };

inline Direction opposite(Direction d) noexcept {
  return d == Direction::max ? Direction::min : Direction::max;
}

inline std::string_view to_string(Direction d) noexcept { return d == Direction::max ? "max" : "min"; }

inline Direction parse_direction(std::string_view s) {
  if (s == "max") return Direction::max;
  if (s == "min") return Direction::min;
  throw DataError("unknown direction '" + std::string(s) + "'");
}

struct Voter {
  HeadIndex head = 0;
  Direction direction = Direction::max;
  bool operator==(const Voter&) const = default;
};

// How a VoterSet was produced.
struct SelectionProvenance {
  std::string variant = "novo";  // novo | novo-f | novo-a | novo-b | manual
  std::string dataset_id;
  std::string draw;              // random | first-n | all
  std::size_t n_samples = 0;     // samples actually scored
  double percentile = 0;
  std::string percentile_over;   // head-max | both-rows
  std::uint64_t seed = 0;
  double threshold = 0;          // accuracy cut (novo*) or baseline (novo-f)
  std::vector<std::string> sample_ids;

  bool operator==(const SelectionProvenance&) const = default;
};

// Selected heads ("Index Vector") with their directions ("Indicators") and
// optional weights.
struct VoterSet {
  ModelGeometry geometry;
  std::vector<HeadIndex> indices;  // strictly increasing
  std::vector<Direction> indicators;
  std::optional<std::vector<double>> weights;
  SelectionProvenance provenance;

  std::size_t size() const noexcept { return indices.size(); }
  bool empty() const noexcept { return indices.empty(); }
  Voter voter(std::size_t i) const { return {indices[i], indicators[i]}; }

  std::vector<Voter> voters() const {
    std::vector<Voter> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(voter(i));
    return out;
  }

  bool operator==(const VoterSet&) const = default;
};

// Throws DataError when the set breaks its invariants.
inline void check(const VoterSet& v) {
  const std::size_t n = v.geometry.num_heads();
  if (v.indicators.size() != v.indices.size())
    throw DataError("voter set: indicators and indices differ in length");
  for (std::size_t i = 0; i < v.indices.size(); ++i) {
    if (v.indices[i] >= n) throw DataError("voter set: head index out of range");
    if (i > 0 && v.indices[i] <= v.indices[i - 1])
      throw DataError("voter set: indices must be strictly increasing");
  }
  if (v.weights) {
    if (v.weights->size() != v.indices.size())
      throw DataError("voter set: weights and indices differ in length");
    for (double w : *v.weights)
      if (!(w >= 0.0 && w <= 1.0)) throw DataError("voter set: weight outside [0,1]");
  }
}

// Builds a set from arbitrary voters, sorting by head index.
inline VoterSet make_voter_set(const ModelGeometry& g, std::vector<Voter> voters) {
  std::sort(voters.begin(), voters.end(),
            [](const Voter& a, const Voter& b) { return a.head < b.head; });
  VoterSet v;
  v.geometry = g;
  v.provenance.variant = "manual";
  for (const auto& x : voters) {
    v.indices.push_back(x.head);
    v.indicators.push_back(x.direction);
  }
  check(v);
  return v;
}

inline nlohmann::json to_json(const VoterSet& v) {
  nlohmann::json j;
  j["format"] = "novo-voters";
  j["version"] = 1;
  j["geometry"] = {{"L", v.geometry.layers},
                   {"H", v.geometry.heads_per_layer},
                   {"model_id", v.geometry.model_id}};
  j["indices"] = v.indices;
  auto ind = nlohmann::json::array();
  for (auto d : v.indicators) ind.push_back(std::string(to_string(d)));
  j["indicators"] = std::move(ind);
  if (v.weights) j["weights"] = *v.weights;
  const auto& p = v.provenance;
  j["provenance"] = {{"variant", p.variant},         {"dataset_id", p.dataset_id},
                     {"draw", p.draw},               {"n_samples", p.n_samples},
                     {"percentile", p.percentile},   {"percentile_over", p.percentile_over},
                     {"seed", p.seed},               {"threshold", p.threshold},
                     {"sample_ids", p.sample_ids}};
  return j;
}

inline VoterSet voter_set_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "novo-voters") throw DataError("not a novo-voters file");
    if (j.at("version").get<int>() != 1) throw DataError("unsupported voters version");
    VoterSet v;
    const auto& g = j.at("geometry");
    v.geometry.layers = g.at("L").get<std::size_t>();
    v.geometry.heads_per_layer = g.at("H").get<std::size_t>();
    v.geometry.model_id = g.at("model_id").get<std::string>();
    v.indices = j.at("indices").get<std::vector<HeadIndex>>();
    for (const auto& d : j.at("indicators")) v.indicators.push_back(parse_direction(d.get<std::string>()));
    if (j.contains("weights")) v.weights = j.at("weights").get<std::vector<double>>();
    const auto& p = j.at("provenance");
    v.provenance.variant = p.at("variant").get<std::string>();
    v.provenance.dataset_id = p.at("dataset_id").get<std::string>();
    v.provenance.draw = p.at("draw").get<std::string>();
    v.provenance.n_samples = p.at("n_samples").get<std::size_t>();
    v.provenance.percentile = p.at("percentile").get<double>();
    v.provenance.percentile_over = p.at("percentile_over").get<std::string>();
    v.provenance.seed = p.at("seed").get<std::uint64_t>();
    v.provenance.threshold = p.at("threshold").get<double>();
    v.provenance.sample_ids = p.at("sample_ids").get<std::vector<std::string>>();
    check(v);
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed voter set: ") + e.what());
  }
}

inline void write_voter_set(const VoterSet& v, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << to_json(v).dump(2) << '\n';
}

inline VoterSet read_voter_set(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open voter set '" + path + "'");
  try {
    return voter_set_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("malformed voter set: ") + e.what());
  }
}

}  // namespace novo
