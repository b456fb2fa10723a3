#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "novo/selection.hpp"
#include "support/reference.hpp"
#include "support/synthetic.hpp"

using namespace novo;

namespace {

// norms[k] = the L*H norm row of option k.
SampleRecord sample(const std::string& id, std::size_t gold, std::vector<std::vector<float>> norms) {
  SampleRecord s;
  s.sample_id = id;
  s.correct_index = gold;
  for (auto& row : norms) s.options.push_back({{}, {std::move(row)}, {}, {}, {}});
  return s;
}

// Two heads, two samples; head 0 is right through argmax, head 1 through argmin.
CaptureSet two_head_capture() {
  CaptureSet c;
  c.geometry = {1, 2, "toy"};
  c.dataset_id = "toy";
  c.records.push_back(sample("s1", 0, {{3, 1}, {1, 3}}));
  c.records.push_back(sample("s2", 1, {{1, 5}, {4, 2}}));
  return c;
}

SelectionConfig all_rows(double percentile) {
  SelectionConfig cfg;
  cfg.draw = DrawMode::all;
  cfg.percentile = percentile;
  return cfg;
}

// Head 0 always right via argmax; 99 other heads random.
CaptureSet one_perfect_head(std::uint64_t seed) {
  Rng rng(seed);
  CaptureSet c;
  c.geometry = {10, 10, "toy"};
  c.dataset_id = "perfect";
  for (int r = 0; r < 40; ++r) {
    const std::size_t gold = rng.uniform_index(3);
    std::vector<std::vector<float>> rows(3, std::vector<float>(100));
    for (std::size_t k = 0; k < 3; ++k) {
      for (auto& v : rows[k]) v = static_cast<float>(rng.uniform_real() * 4.0);
      rows[k][0] = k == gold ? 5.0f : 1.0f;
    }
    c.records.push_back(sample("r" + std::to_string(r), gold, rows));
  }
  return c;
}

}  // namespace

TEST(HeadPredictions, SingleHeadArgmaxArgmin) {
  const auto p = head_predictions(sample("x", 0, {{2.0f}, {1.0f}, {3.0f}}));
  EXPECT_EQ(p.by_max, std::vector<std::uint32_t>{2});
  EXPECT_EQ(p.by_min, std::vector<std::uint32_t>{1});
}

TEST(HeadPredictions, TiesBreakToLowestOption) {
  const auto p = head_predictions(sample("x", 0, {{1.0f}, {1.0f}}));
  EXPECT_EQ(p.by_max, std::vector<std::uint32_t>{0});
  EXPECT_EQ(p.by_min, std::vector<std::uint32_t>{0});
}

TEST(HeadPredictions, TwoHeadsOppositeOrder) {
  const auto p = head_predictions(sample("x", 0, {{3, 1}, {1, 3}}));
  EXPECT_EQ(p.by_max, (std::vector<std::uint32_t>{0, 1}));
  EXPECT_EQ(p.by_min, (std::vector<std::uint32_t>{1, 0}));
}

TEST(HeadAccuracyTable, HandEnumeratedTwoHeadsTwoSamples) {
  const auto c = two_head_capture();
  const auto t = head_accuracy_table(c.records);
  EXPECT_EQ(t.n_scored, 2u);
  EXPECT_DOUBLE_EQ(t.accuracy(Direction::max, 0), 1.0);
  EXPECT_DOUBLE_EQ(t.accuracy(Direction::max, 1), 0.0);
  EXPECT_DOUBLE_EQ(t.accuracy(Direction::min, 0), 0.0);
  EXPECT_DOUBLE_EQ(t.accuracy(Direction::min, 1), 1.0);
}

TEST(HeadAccuracyTable, SingleSampleIsZeroOrOne) {
  Rng rng(3);
  const auto c = synth::random_capture(rng);
  const auto t = head_accuracy_table(std::span(c.records).first(1));
  for (HeadIndex i = 0; i < t.num_heads(); ++i)
    for (auto d : {Direction::max, Direction::min}) {
      const double a = t.accuracy(d, i);
      EXPECT_TRUE(a == 0.0 || a == 1.0);
    }
}

TEST(HeadAccuracyTable, IdenticalNormsWithGoldZeroScoreOneOnMaxRow) {
  CaptureSet c;
  c.geometry = {1, 3, "toy"};
  for (int r = 0; r < 4; ++r) c.records.push_back(sample("r" + std::to_string(r), 0, {{1, 2, 3}, {1, 2, 3}}));
  const auto t = head_accuracy_table(c.records);
  for (HeadIndex i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(t.accuracy(Direction::max, i), 1.0);
}

TEST(HeadAccuracyTable, EmptySampleListThrows) {
  EXPECT_THROW(head_accuracy_table(std::span<const SampleRecord>{}), DataError);
}

TEST(SelectVoters, TwoHeadExampleKeepsBothWithOppositeIndicators) {
  const auto v = select_voters(two_head_capture(), all_rows(85));
  EXPECT_EQ(v.indices, (std::vector<HeadIndex>{0, 1}));
  EXPECT_EQ(v.indicators, (std::vector<Direction>{Direction::max, Direction::min}));
  EXPECT_DOUBLE_EQ(v.provenance.threshold, 1.0);
}

TEST(SelectVoters, SinglePerfectHeadAtHighPercentile) {
  auto cfg = all_rows(99.5);
  const auto v = select_voters(one_perfect_head(5), cfg);
  EXPECT_EQ(v.indices, std::vector<HeadIndex>{0});
  EXPECT_EQ(v.indicators, std::vector<Direction>{Direction::max});
}

TEST(SelectVoters, DeterministicForSameSeed) {
  SelectionConfig cfg;
  cfg.n_samples = 20;
  cfg.seed = 42;
  const auto c = one_perfect_head(8);
  EXPECT_EQ(select_voters(c, cfg), select_voters(c, cfg));
  auto other = cfg;
  other.seed = 43;
  EXPECT_NE(select_voters(c, cfg).provenance.sample_ids, select_voters(c, other).provenance.sample_ids);
}

TEST(SelectVoters, TooManySamplesIsConfigError) {
  SelectionConfig cfg;
  cfg.n_samples = 3;
  EXPECT_THROW(select_voters(two_head_capture(), cfg), ConfigError);
  cfg.draw = DrawMode::all;  // n_samples ignored
  EXPECT_NO_THROW(select_voters(two_head_capture(), cfg));
}

TEST(SelectVoters, PercentileOutOfRangeIsConfigError) {
  EXPECT_THROW(select_voters(two_head_capture(), all_rows(0.0)), ConfigError);
  EXPECT_THROW(select_voters(two_head_capture(), all_rows(100.5)), ConfigError);
}

TEST(SelectVoters, FirstNDrawTakesLeadingRecords) {
  SelectionConfig cfg;
  cfg.draw = DrawMode::first_n;
  cfg.n_samples = 1;
  const auto v = select_voters(two_head_capture(), cfg);
  EXPECT_EQ(v.provenance.sample_ids, std::vector<std::string>{"s1"});
}

TEST(SelectVoters, BothRowsPoolChangesThreshold) {
  // Pooling both rows doubles the population; for the two-head example the
  // 50th percentile of {0,0,1,1} is 0, of the per-head maxima {1,1} it is 1.
  auto cfg = all_rows(50);
  EXPECT_DOUBLE_EQ(run_selection(two_head_capture(), cfg).voters.provenance.threshold, 1.0);
  cfg.over = PercentileOver::both_rows;
  const auto r = run_selection(two_head_capture(), cfg);
  EXPECT_EQ(r.threshold_hits, 0u);
  EXPECT_EQ(r.voters.size(), 2u);
}

TEST(SelectVotersFixed, MaxDirectionAtMedianKeepsBoth) {
  const auto v = select_voters_fixed(two_head_capture(), all_rows(50), Direction::max);
  EXPECT_EQ(v.indices, (std::vector<HeadIndex>{0, 1}));
  EXPECT_EQ(v.indicators, (std::vector<Direction>{Direction::max, Direction::max}));
  EXPECT_DOUBLE_EQ(v.provenance.threshold, 0.0);
  EXPECT_EQ(v.provenance.variant, "novo-a");
}

TEST(SelectVotersFixed, RelativeThresholdAlwaysKeepsSomeone) {
  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    const auto c = synth::random_capture(rng);
    EXPECT_FALSE(select_voters_fixed(c, all_rows(85), Direction::min).empty());
  }
}

TEST(SelectVotersFixed, VariantsDifferOnlyInScoredRow) {
  Rng rng(12);
  for (int t = 0; t < 50; ++t) {
    const auto c = synth::random_capture(rng);
    std::vector<std::size_t> rows(c.records.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    for (int d = 0; d < 2; ++d) {
      const auto ref = reference::select(c, rows, 85, d, false);
      const auto got = select_voters_fixed(c, all_rows(85), d == 0 ? Direction::max : Direction::min);
      EXPECT_EQ(got.indices, ref.indices);
      EXPECT_DOUBLE_EQ(got.provenance.threshold, ref.threshold);
    }
  }
}

TEST(SelectVotersWeighted, BaselineForFourOptionsIsQuarter) {
  Rng rng(1);
  CaptureSet c;
  c.geometry = {1, 4, "toy"};
  for (int r = 0; r < 8; ++r) {
    std::vector<std::vector<float>> rows(4, std::vector<float>(4, 1.0f));
    const std::size_t gold = r % 4;
    rows[gold][0] = 2.0f;                          // head 0 always right
    rows[gold][1] = r < 6 ? 2.0f : 1.0f;           // head 1: 6/8 (plus tie luck)
    rows[(gold + 1) % 4][2] = 2.0f;                // head 2: always wrong via max
    c.records.push_back(sample("r" + std::to_string(r), gold, rows));
  }
  const auto v = select_voters_weighted(c);
  EXPECT_DOUBLE_EQ(v.provenance.threshold, 0.25);
  ASSERT_TRUE(v.weights.has_value());
  for (double w : *v.weights) EXPECT_TRUE(w >= 0.0 && w <= 1.0);
  EXPECT_EQ(v.provenance.variant, "novo-f");
}

TEST(SelectVotersWeighted, MinMaxWeightsOverSurvivors) {
  // Three heads with best-direction accuracies 4/10, 6/10, 8/10 on
  // two-option samples (baseline 0.5 drops the first): survivors 0.6, 0.8.
  // A fourth head at exactly 5/10 sits on the baseline and is dropped too.
  CaptureSet c;
  c.geometry = {1, 4, "toy"};
  const std::vector<int> right = {4, 6, 8, 5};
  for (int r = 0; r < 10; ++r) {
    std::vector<bool> ok;
    for (int h : right) ok.push_back(r < h);
    c.records.push_back(synth::binary_sample("r" + std::to_string(r), 0, ok));
  }
  const auto v = select_voters_weighted(c);
  // Head 0 is right 4/10 via max, so 6/10 via min: survives with 0.6.
  EXPECT_EQ(v.indices, (std::vector<HeadIndex>{0, 1, 2}));
  EXPECT_EQ(v.indicators, (std::vector<Direction>{Direction::min, Direction::max, Direction::max}));
  EXPECT_EQ(*v.weights, (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(SelectVotersWeighted, SpreadScoresNormalizeToUnitInterval) {
  // Best-direction accuracies 0.7, 0.8, 0.9 -> weights 0, 0.5, 1.
  CaptureSet c;
  c.geometry = {1, 3, "toy"};
  const std::vector<int> right = {7, 8, 9};
  for (int r = 0; r < 10; ++r) {
    std::vector<bool> ok;
    for (int h : right) ok.push_back(r < h);
    c.records.push_back(synth::binary_sample("r" + std::to_string(r), r % 2, ok));
  }
  const auto v = select_voters_weighted(c);
  ASSERT_EQ(v.weights->size(), 3u);
  EXPECT_DOUBLE_EQ((*v.weights)[0], 0.0);
  EXPECT_NEAR((*v.weights)[1], 0.5, 1e-12);
  EXPECT_DOUBLE_EQ((*v.weights)[2], 1.0);
}

TEST(SelectVotersWeighted, SingleSurvivorGetsWeightOne) {
  CaptureSet c;
  c.geometry = {1, 2, "toy"};
  for (int r = 0; r < 4; ++r) c.records.push_back(synth::binary_sample("r" + std::to_string(r), 0, {true, r < 2}));
  const auto v = select_voters_weighted(c);
  EXPECT_EQ(v.indices, std::vector<HeadIndex>{0});
  EXPECT_EQ(*v.weights, std::vector<double>{1.0});
}

TEST(SelectVotersWeighted, NobodyAboveBaselineThrows) {
  CaptureSet c;
  c.geometry = {1, 1, "toy"};
  for (int r = 0; r < 4; ++r) c.records.push_back(synth::binary_sample("r" + std::to_string(r), 0, {r < 2}));
  EXPECT_THROW(select_voters_weighted(c), DataError);
}

// Every retained indicator points at the better accuracy row.
TEST(SelectionProperties, DirectionCoherence) {
  Rng rng(21);
  for (int t = 0; t < 100; ++t) {
    const auto c = synth::random_capture(rng);
    const auto r = run_selection(c, all_rows(85));
    for (std::size_t i = 0; i < r.voters.size(); ++i) {
      const auto v = r.voters.voter(i);
      EXPECT_GE(r.table.hits(v.direction, v.head), r.table.hits(opposite(v.direction), v.head));
    }
  }
}

TEST(SelectionProperties, PercentileMonotonicity) {
  Rng rng(22);
  for (int t = 0; t < 100; ++t) {
    const auto c = synth::random_capture(rng);
    std::size_t prev = c.geometry.num_heads() + 1;
    for (double p : {10.0, 25.0, 50.0, 75.0, 85.0, 95.0, 100.0}) {
      const auto n = select_voters(c, all_rows(p)).size();
      EXPECT_LE(n, prev);
      prev = n;
    }
  }
}

TEST(SelectionProperties, ScaleInvariantPredictions) {
  Rng rng(23);
  for (int t = 0; t < 100; ++t) {
    auto c = synth::random_capture(rng);
    for (auto& s : c.records) {
      const auto before = head_predictions(s);
      const float scale = std::exp2(static_cast<float>(rng.uniform_index(7)) - 3.0f);
      for (auto& o : s.options)
        for (auto& v : o.norms.values) v *= scale;
      const auto after = head_predictions(s);
      EXPECT_EQ(before.by_max, after.by_max);
      EXPECT_EQ(before.by_min, after.by_min);
    }
  }
}

TEST(SelectionProperties, OracleEquivalenceOnRandomCaptures) {
  Rng rng(24);
  const double percentiles[] = {10, 50, 75, 85, 90, 95, 99.5, 100};
  for (int t = 0; t < 300; ++t) {
    const auto c = synth::random_capture(rng);
    SelectionConfig cfg;
    cfg.n_samples = 1 + rng.uniform_index(c.records.size());
    cfg.percentile = percentiles[rng.uniform_index(8)];
    cfg.seed = rng.next();
    cfg.over = rng.uniform_index(2) ? PercentileOver::both_rows : PercentileOver::head_max;
    const auto rows = reference::draw(c.records.size(), cfg.n_samples, cfg.seed);
    const auto ref = reference::select(c, rows, cfg.percentile, -1, cfg.over == PercentileOver::both_rows);
    const auto got = select_voters(c, cfg);
    ASSERT_EQ(got.indices, ref.indices) << "trial " << t;
    for (std::size_t i = 0; i < got.size(); ++i)
      EXPECT_EQ(got.indicators[i] == Direction::max ? 0 : 1, ref.directions[i]);
    EXPECT_DOUBLE_EQ(got.provenance.threshold, ref.threshold);
  }
}

TEST(GridSearch, OneByOneGridEqualsSelectThenEvaluate) {
  const auto planted = synth::planted_capture(3);
  CaptureSet sel = planted.capture, held = planted.capture;
  sel.records.resize(100);
  held.records.erase(held.records.begin(), held.records.begin() + 100);
  SelectionConfig cfg;
  cfg.seed = 9;
  const auto g = grid_search(sel, held, {30}, {85}, 1, cfg);
  cfg.n_samples = 30;
  cfg.percentile = 85;
  EXPECT_DOUBLE_EQ(g.mean_accuracy[0][0], evaluate(select_voters(sel, cfg), held).accuracy);
}

TEST(GridSearch, CellOrderingFollowsAxes) {
  const auto planted = synth::planted_capture(4);
  CaptureSet sel = planted.capture, held = planted.capture;
  sel.records.resize(100);
  held.records.erase(held.records.begin(), held.records.begin() + 100);
  SelectionConfig cfg;
  const auto g = grid_search(sel, held, {5, 30}, {50, 96}, 2, cfg, 4);
  ASSERT_EQ(g.mean_accuracy.size(), 2u);
  ASSERT_EQ(g.mean_accuracy[0].size(), 2u);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      const auto cell = grid_search(sel, held, {g.sample_counts[i]}, {g.percentiles[j]}, 2, cfg);
      EXPECT_DOUBLE_EQ(g.mean_accuracy[i][j], cell.mean_accuracy[0][0]);
    }
}

TEST(GridSearch, MoreSamplesHelpOnPlantedVoters) {
  synth::PlantedSpec spec;
  spec.records = 300;
  const auto planted = synth::planted_capture(5, spec);
  CaptureSet sel = planted.capture, held = planted.capture;
  sel.records.resize(100);
  held.records.erase(held.records.begin(), held.records.begin() + 100);
  SelectionConfig cfg;
  const auto g = grid_search(sel, held, {5, 30}, {96}, 20, cfg, 4);
  EXPECT_GE(g.mean_accuracy[1][0], g.mean_accuracy[0][0]);
}

TEST(GridSearch, OverlappingSplitsRejected) {
  const auto c = two_head_capture();
  EXPECT_THROW(grid_search(c, c, {1}, {85}, 1, SelectionConfig{}), ConfigError);
}

TEST(SampleDifficulty, FractionOfWrongVoters) {
  CaptureSet c;
  c.geometry = {1, 3, "toy"};
  c.records.push_back(synth::binary_sample("all-wrong", 0, {false, false, false}));
  c.records.push_back(synth::binary_sample("all-right", 1, {true, true, true}));
  c.records.push_back(synth::binary_sample("one-wrong", 0, {true, false, true}));
  const auto d = sample_difficulty(synth::all_heads(c.geometry), c);
  EXPECT_DOUBLE_EQ(d[0], 1.0);
  EXPECT_DOUBLE_EQ(d[1], 0.0);
  EXPECT_DOUBLE_EQ(d[2], 1.0 / 3.0);
}

TEST(RepeatedSelectionStats, DrawAllHasZeroSpread) {
  const auto planted = synth::planted_capture(6);
  CaptureSet sel = planted.capture, held = planted.capture;
  sel.records.resize(60);
  held.records.erase(held.records.begin(), held.records.begin() + 60);
  SelectionConfig cfg;
  cfg.draw = DrawMode::all;
  const auto r = repeated_selection_stats(sel, held, cfg, 5, 2);
  EXPECT_EQ(r.stats.stddev, 0.0);
  EXPECT_EQ(r.stats.min, r.stats.max);
}

TEST(RepeatedSelectionStats, SeedsAreBasePlusRun) {
  const auto planted = synth::planted_capture(7);
  CaptureSet sel = planted.capture, held = planted.capture;
  sel.records.resize(100);
  held.records.erase(held.records.begin(), held.records.begin() + 100);
  SelectionConfig cfg;
  cfg.seed = 100;
  cfg.n_samples = 10;
  const auto r = repeated_selection_stats(sel, held, cfg, 4, 3);
  for (std::size_t i = 0; i < 4; ++i) {
    auto c = cfg;
    c.seed = 100 + i;
    EXPECT_DOUBLE_EQ(r.accuracies[i], evaluate(select_voters(sel, c), held).accuracy);
  }
  EXPECT_THROW(repeated_selection_stats(sel, held, cfg, 1), ConfigError);
}

TEST(SelectionProperties, MirroredNormsSwapRowsAndFlipIndicators) {
  Rng rng(25);
  for (int t = 0; t < 100; ++t) {
    auto c = synth::random_capture(rng);
    synth::snap_norms(c);
    const auto m = synth::mirror_norms(c);
    const auto a = run_selection(c, all_rows(85));
    const auto b = run_selection(m, all_rows(85));
    EXPECT_EQ(a.table.max_hits, b.table.min_hits);
    EXPECT_EQ(a.table.min_hits, b.table.max_hits);
    ASSERT_EQ(a.voters.indices, b.voters.indices);
    EXPECT_EQ(a.threshold_hits, b.threshold_hits);
    for (std::size_t i = 0; i < a.voters.size(); ++i) {
      const HeadIndex h = a.voters.indices[i];
      // Heads with equal rows keep MAX under both orientations.
      if (a.table.max_hits[h] == a.table.min_hits[h])
        EXPECT_EQ(b.voters.indicators[i], Direction::max);
      else
        EXPECT_EQ(b.voters.indicators[i], opposite(a.voters.indicators[i]));
    }
  }
}
