// novo: norm-voting command line.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "novo/novo.hpp"

namespace {

using namespace novo;

constexpr const char* kFooter =
    "Report numbers (accuracies, statistics) are printed with 6 significant digits.\n"
    "Capture norms are never rounded: files written by the library read back bit-exactly.\n"
    "Exit codes: 0 ok, 1 usage or configuration error, 2 data error.";

struct Options {
  unsigned threads = 1;

  std::string capture, voters, out, csv;
  std::string selection, heldout;
  std::string capture_a, capture_b;

  std::string variant = "novo";
  std::size_t n_samples = 30;
  double percentile = 85;
  std::uint64_t seed = 0;
  std::string percentile_over = "head-max";
  std::string draw = "random";

  std::string mode = "vote";
  bool by_category = false;
  bool allow_overlap = false;

  std::vector<std::size_t> sample_counts{5, 10, 20, 30, 50, 100};
  std::vector<double> percentiles{50, 75, 85, 90, 95};
  std::size_t repeats = 20;
  std::size_t runs = 200;
  std::string runs_out;

  std::size_t k = 6;
  std::size_t window = 8;
  double tau_end = 0.5;
  std::size_t tail = 3;
  std::size_t max_offset = 10;
  bool length_filter = false;
};

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  return f;
}

// Writes `body` to `path` when set. Seeded outputs get a "# seed=N" first line.
void emit(const std::string& path, const std::string& body, std::optional<std::uint64_t> seed = {}) {
  if (path.empty()) return;
  auto f = open_out(path);
  if (seed) f << "# seed=" << *seed << '\n';
  f << body;
}

void emit_json(const std::string& path, const nlohmann::json& j) {
  if (path.empty()) return;
  open_out(path) << j.dump(2) << '\n';
}

CaptureSet load(const std::string& path) {
  auto c = read_capture(path);
  const auto v = validate(c);
  if (!v.empty()) throw DataError("'" + path + "' failed validation: " + v.front().to_string());
  return c;
}

void check_overlap(const VoterSet& voters, const CaptureSet& c, bool allow) {
  if (allow) return;
  const auto ids = c.sample_ids();
  for (const auto& s : voters.provenance.sample_ids)
    if (ids.count(s))
      throw ConfigError("sample '" + s + "' was used for selection; pass --allow-overlap to evaluate on it");
}

SelectionConfig selection_config(const Options& o) {
  SelectionConfig cfg;
  cfg.n_samples = o.n_samples;
  cfg.percentile = o.percentile;
  cfg.seed = o.seed;
  cfg.over = o.percentile_over == "both-rows" ? PercentileOver::both_rows : PercentileOver::head_max;
  if (o.draw == "all") cfg.draw = DrawMode::all;
  else if (o.draw == "first-n") cfg.draw = DrawMode::first_n;
  return cfg;
}

VoteMode vote_mode(const std::string& m) { return m == "weighted" ? VoteMode::weighted : VoteMode::majority; }

int cmd_validate(const Options& o) {
  const auto c = read_capture(o.capture);
  const auto v = validate(c);
  for (const auto& x : v) std::cout << x.to_string() << '\n';
  if (!v.empty()) {
    std::cout << "invalid: " << v.size() << " violation(s)\n";
    return 2;
  }
  std::cout << "ok records=" << c.records.size() << " L=" << c.geometry.layers
            << " H=" << c.geometry.heads_per_layer << " positions=" << (c.has_positions() ? 1 : 0)
            << " attention=" << (c.has_attention() ? 1 : 0) << '\n';
  return 0;
}

int cmd_select(const Options& o) {
  const auto c = load(o.capture);
  const auto t0 = std::chrono::steady_clock::now();
  VoterSet v;
  if (o.variant == "novo-f") {
    std::cerr << "warning: novo-f scores every record; --n-samples and --percentile are ignored\n";
    v = select_voters_weighted(c);
  } else if (o.variant == "novo-a") {
    v = select_voters_fixed(c, selection_config(o), Direction::max);
  } else if (o.variant == "novo-b") {
    v = select_voters_fixed(c, selection_config(o), Direction::min);
  } else {
    v = select_voters(c, selection_config(o));
  }
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (!o.out.empty()) write_voter_set(v, o.out);
  std::cout << "voters=" << v.size() << " variant=" << v.provenance.variant << " seed=" << v.provenance.seed
            << " threshold=" << format_float(v.provenance.threshold) << " time_ms=" << format_float(ms) << '\n';
  return 0;
}

int cmd_eval(const Options& o) {
  const auto c = load(o.capture);
  EvaluationReport rep;
  if (o.mode == "lm") {
    rep = lm_baseline_evaluate(c);
  } else {
    if (o.voters.empty()) throw ConfigError("--voters is required unless --mode lm");
    const auto v = read_voter_set(o.voters);
    check_overlap(v, c, o.allow_overlap);
    rep = evaluate(v, c, vote_mode(o.mode));
  }
  emit_json(o.out, to_json(rep, o.by_category));
  if (!o.csv.empty()) {
    auto f = open_out(o.csv);
    write_predictions_csv(rep, f);
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", rep.accuracy);
  std::cout << "accuracy=" << buf << " n=" << rep.n_samples << '\n';
  if (o.by_category)
    for (const auto& [name, cat] : rep.per_category)
      std::cout << "  " << name << " accuracy=" << format_float(cat.accuracy()) << " n=" << cat.n_samples << '\n';
  return 0;
}

int cmd_grid(const Options& o) {
  const auto sel = load(o.selection);
  const auto held = load(o.heldout);
  const auto g = grid_search(sel, held, o.sample_counts, o.percentiles, o.repeats, selection_config(o), o.threads);
  std::ostringstream body;
  write_grid_csv(g, body);
  emit(o.out, body.str(), o.seed);
  std::size_t bi = 0, bj = 0;
  for (std::size_t i = 0; i < g.sample_counts.size(); ++i)
    for (std::size_t j = 0; j < g.percentiles.size(); ++j)
      if (g.mean_accuracy[i][j] > g.mean_accuracy[bi][bj]) bi = i, bj = j;
  std::cout << "best n_samples=" << g.sample_counts[bi] << " percentile=" << format_float(g.percentiles[bj])
            << " accuracy=" << format_float(g.mean_accuracy[bi][bj]) << " seed=" << o.seed << '\n';
  return 0;
}

int cmd_stats(const Options& o) {
  const auto sel = load(o.selection);
  const auto held = load(o.heldout);
  const auto r = repeated_selection_stats(sel, held, selection_config(o), o.runs, o.threads);
  std::ostringstream body;
  write_stats_csv(r.stats, body);
  emit(o.out, body.str(), o.seed);
  if (!o.runs_out.empty()) {
    std::ostringstream runs;
    write_runs_csv(r, o.seed, runs);
    emit(o.runs_out, runs.str(), o.seed);
  }
  std::cout << "runs=" << o.runs << " mean=" << format_float(r.stats.mean) << " std=" << format_float(r.stats.stddev)
            << " seed=" << o.seed << '\n';
  return 0;
}

std::vector<ErrorVector> voter_errors(const VoterSet& v, const CaptureSet& c) {
  std::vector<ErrorVector> e;
  for (const auto& x : v.voters()) e.push_back(error_vector(x, c));
  return e;
}

std::vector<std::string> names_of(const std::vector<ErrorVector>& e) {
  std::vector<std::string> n;
  for (const auto& x : e) n.push_back(x.owner);
  return n;
}

int cmd_analyze(const std::string& what, const Options& o) {
  const auto c = load(o.capture);
  const auto v = read_voter_set(o.voters);
  require_same_shape(v, c.geometry);
  std::ostringstream body;
  if (what == "ranked") {
    const auto r = rank_voters(v, c);
    write_ranked_csv(r, c.geometry, body);
    emit(o.out, body.str());
    std::cout << "voters=" << r.size() << " best=" << voter_name(r.front().voter)
              << " accuracy=" << format_float(r.front().accuracy) << '\n';
  } else if (what == "accuracy-vs-k") {
    std::vector<Voter> order;
    for (const auto& r : rank_voters(v, c)) order.push_back(r.voter);
    const auto s = accuracy_vs_k(c, order, o.window);
    write_accuracy_vs_k_csv(s, body);
    emit(o.out, body.str());
    std::cout << "k=1 accuracy=" << format_float(s.front().accuracy) << " k=" << s.size()
              << " accuracy=" << format_float(s.back().accuracy) << '\n';
  } else if (what == "hamming") {
    const auto e = voter_errors(v, c);
    const auto names = names_of(e);
    write_hamming_csv(hamming_matrix(e), names, body);
    emit(o.out, body.str());
    std::cout << "voters=" << e.size() << " samples=" << c.records.size() << '\n';
  } else if (what == "clusters") {
    const auto e = voter_errors(v, c);
    const auto names = names_of(e);
    const auto cl = cluster_errors(e, o.k, o.seed);
    write_clusters_csv(cl, names, body);
    emit(o.out, body.str(), o.seed);
    std::cout << "k=" << cl.k << " sizes=";
    const auto sizes = cl.cluster_sizes();
    for (std::size_t i = 0; i < sizes.size(); ++i) std::cout << (i ? "," : "") << sizes[i];
    std::cout << " inertia=" << format_float(cl.inertia) << " seed=" << o.seed << '\n';
  } else if (what == "types") {
    std::vector<double> acc[3];
    for (const auto& x : v.voters())
      acc[static_cast<int>(classify_voter_type(x, c, {o.tau_end, o.tail}))].push_back(error_vector(x, c).accuracy());
    std::vector<TypeSummaryRow> rows;
    std::vector<double> all;
    for (const auto& a : acc) all.insert(all.end(), a.begin(), a.end());
    rows.push_back({"all", summarize(all)});
    for (auto t : {VoterType::t1, VoterType::t2, VoterType::untyped}) {
      const auto& a = acc[static_cast<int>(t)];
      if (!a.empty()) rows.push_back({std::string(to_string(t)), summarize(a)});
    }
    write_type_summary_csv(rows, body);
    emit(o.out, body.str());
    std::cout << "T1=" << acc[0].size() << " T2=" << acc[1].size() << " untyped=" << acc[2].size() << '\n';
  } else if (what == "difficulty") {
    const auto d = sample_difficulty(v, c);
    body << "sample_id,wrong_fraction\n";
    for (std::size_t i = 0; i < d.size(); ++i)
      body << csv_field(c.records[i].sample_id) << ',' << format_float(d[i]) << '\n';
    emit(o.out, body.str());
    std::cout << "samples=" << d.size() << " mean=" << format_float(summarize(d).mean) << '\n';
  }
  return 0;
}

int cmd_ablate(const std::string& what, const Options& o) {
  const auto v = read_voter_set(o.voters);
  if (what == "compare") {
    const auto a = load(o.capture_a);
    const auto b = load(o.capture_b);
    const auto r = compare_captures(v, a, b, vote_mode(o.mode));
    emit_json(o.out, {{"format", "novo-compare"},
                      {"version", 1},
                      {"acc_a", report_number(r.acc_a)},
                      {"acc_b", report_number(r.acc_b)},
                      {"delta", report_number(r.delta)}});
    std::cout << "acc_a=" << format_float(r.acc_a) << " acc_b=" << format_float(r.acc_b)
              << " delta=" << format_float(r.delta) << '\n';
    return 0;
  }
  const auto c = load(o.capture);
  std::ostringstream body;
  if (what == "clusters") {
    const auto e = voter_errors(v, c);
    const auto cl = cluster_errors(e, o.k, o.seed);
    const auto even = ablate_voters(v, cl, RemovalStrategy::even_across_clusters, o.seed, c);
    const auto exhaust = ablate_voters(v, cl, RemovalStrategy::exhaust_cluster, o.seed, c);
    write_ablation_csv(even, exhaust, body);
    emit(o.out, body.str(), o.seed);
    const std::size_t half = v.size() / 2;
    std::cout << "voters=" << v.size() << " at_half even=" << format_float(even.points[half].accuracy)
              << " exhaust=" << format_float(exhaust.points[half].accuracy) << " seed=" << o.seed << '\n';
  } else if (what == "position") {
    body << "offset,accuracy,n_evaluated,n_excluded\n";
    std::optional<LengthFilter> filter;
    if (o.length_filter) filter = LengthFilter{};
    double first = 0, last = 0;
    for (std::size_t off = 0; off <= o.max_offset; ++off) {
      const auto r = positional_evaluate(v, c, off, filter, vote_mode(o.mode));
      body << off << ',' << format_float(r.accuracy) << ',' << r.n_evaluated << ',' << r.n_excluded << '\n';
      if (off == 0) first = r.accuracy;
      last = r.accuracy;
    }
    emit(o.out, body.str());
    std::cout << "offset0=" << format_float(first) << " offset" << o.max_offset << '=' << format_float(last) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Norm voting: select truth-correlated attention heads and vote with their norms"};
  app.footer(kFooter);
  app.require_subcommand(1);
  app.add_option("--threads", o.threads, "Worker threads; results do not depend on this")->check(CLI::Range(1u, 1024u));

  auto add_selection_flags = [&](CLI::App* s) {
    s->add_option("--n-samples", o.n_samples, "Records drawn for selection")->check(CLI::PositiveNumber);
    s->add_option("--percentile", o.percentile, "Keep heads at or above this accuracy percentile");
    s->add_option("--seed", o.seed, "Draw seed");
    s->add_option("--percentile-over", o.percentile_over, "Percentile population")
        ->check(CLI::IsMember({"head-max", "both-rows"}));
    s->add_option("--draw", o.draw, "How selection records are drawn")->check(CLI::IsMember({"random", "first-n", "all"}));
  };

  auto* validate_cmd = app.add_subcommand("validate", "Check a capture file");
  validate_cmd->add_option("--capture", o.capture)->required();

  auto* select_cmd = app.add_subcommand("select", "Select voters from a capture");
  select_cmd->add_option("--capture", o.capture)->required();
  select_cmd->add_option("--variant", o.variant)->check(CLI::IsMember({"novo", "novo-f", "novo-a", "novo-b"}));
  select_cmd->add_option("--out", o.out, "Voter set JSON");
  add_selection_flags(select_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "Answer a capture with a voter set");
  eval_cmd->add_option("--capture", o.capture)->required();
  eval_cmd->add_option("--voters", o.voters);
  eval_cmd->add_option("--mode", o.mode)->check(CLI::IsMember({"vote", "weighted", "lm"}));
  eval_cmd->add_flag("--by-category", o.by_category);
  eval_cmd->add_flag("--allow-overlap", o.allow_overlap, "Allow evaluating on records used for selection");
  eval_cmd->add_option("--out", o.out, "Report JSON");
  eval_cmd->add_option("--csv", o.csv, "Per-sample predictions CSV");

  auto* grid_cmd = app.add_subcommand("grid", "Mean held-out accuracy over sample count x percentile");
  grid_cmd->add_option("--selection", o.selection)->required();
  grid_cmd->add_option("--heldout", o.heldout)->required();
  grid_cmd->add_option("--sample-counts", o.sample_counts)->delimiter(',');
  grid_cmd->add_option("--percentiles", o.percentiles)->delimiter(',');
  grid_cmd->add_option("--repeats", o.repeats)->check(CLI::PositiveNumber);
  grid_cmd->add_option("--out", o.out, "Grid CSV");
  add_selection_flags(grid_cmd);

  auto* stats_cmd = app.add_subcommand("stats", "Accuracy statistics over repeated selections");
  stats_cmd->add_option("--selection", o.selection)->required();
  stats_cmd->add_option("--heldout", o.heldout)->required();
  stats_cmd->add_option("--runs", o.runs);
  stats_cmd->add_option("--out", o.out, "Statistics CSV");
  stats_cmd->add_option("--runs-out", o.runs_out, "Per-run CSV");
  add_selection_flags(stats_cmd);

  auto* analyze_cmd = app.add_subcommand("analyze", "Voter analyses");
  analyze_cmd->require_subcommand(1);
  for (const char* name : {"ranked", "accuracy-vs-k", "hamming", "clusters", "types", "difficulty"}) {
    auto* s = analyze_cmd->add_subcommand(name);
    s->add_option("--capture", o.capture)->required();
    s->add_option("--voters", o.voters)->required();
    s->add_option("--out", o.out, "CSV output");
    if (std::string(name) == "accuracy-vs-k") s->add_option("--window", o.window, "Correlation smoothing window");
    if (std::string(name) == "clusters") {
      s->add_option("--k", o.k)->check(CLI::PositiveNumber);
      s->add_option("--seed", o.seed);
    }
    if (std::string(name) == "types") {
      s->add_option("--tau-end", o.tau_end, "End-token plus punctuation mass for T1");
      s->add_option("--tail", o.tail, "Gain peaks at or beyond this position make T2");
    }
  }

  auto* ablate_cmd = app.add_subcommand("ablate", "Voter and input ablations");
  ablate_cmd->require_subcommand(1);
  auto* ab_clusters = ablate_cmd->add_subcommand("clusters", "Remove voters across or within error clusters");
  ab_clusters->add_option("--capture", o.capture)->required();
  ab_clusters->add_option("--voters", o.voters)->required();
  ab_clusters->add_option("--k", o.k)->check(CLI::PositiveNumber);
  ab_clusters->add_option("--seed", o.seed);
  ab_clusters->add_option("--out", o.out, "CSV output");
  auto* ab_position = ablate_cmd->add_subcommand("position", "Vote with norms read before the final token");
  ab_position->add_option("--capture", o.capture)->required();
  ab_position->add_option("--voters", o.voters)->required();
  ab_position->add_option("--max-offset", o.max_offset);
  ab_position->add_flag("--length-filter", o.length_filter, "Drop samples outside the 5th-95th length percentiles");
  ab_position->add_option("--mode", o.mode)->check(CLI::IsMember({"vote", "weighted"}));
  ab_position->add_option("--out", o.out, "CSV output");
  auto* ab_compare = ablate_cmd->add_subcommand("compare", "Same voters on two paired captures");
  ab_compare->add_option("--a", o.capture_a)->required();
  ab_compare->add_option("--b", o.capture_b)->required();
  ab_compare->add_option("--voters", o.voters)->required();
  ab_compare->add_option("--mode", o.mode)->check(CLI::IsMember({"vote", "weighted"}));
  ab_compare->add_option("--out", o.out, "JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*validate_cmd) return cmd_validate(o);
    if (*select_cmd) return cmd_select(o);
    if (*eval_cmd) return cmd_eval(o);
    if (*grid_cmd) return cmd_grid(o);
    if (*stats_cmd) return cmd_stats(o);
    if (*analyze_cmd) return cmd_analyze(analyze_cmd->get_subcommands().front()->get_name(), o);
    if (*ablate_cmd) return cmd_ablate(ablate_cmd->get_subcommands().front()->get_name(), o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
