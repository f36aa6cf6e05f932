#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "claimnav/report.hpp"

using namespace claimnav;

namespace {

using Table = std::vector<std::vector<std::string>>;

Table parse_csv(const std::string& text) {
  Table rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) row.push_back(cell);
    if (!line.empty() && line.back() == ',') row.push_back("");
    rows.push_back(row);
  }
  return rows;
}

double cell(const std::string& s) { return s.empty() ? std::nan("") : std::stod(s); }

BatchSpec small_batch(std::size_t runs, unsigned parallel = 1) {
  BatchSpec b;
  b.map = make_tjunction();
  b.map_name = "tjunction";
  b.agents = 2;
  b.runs = runs;
  b.seed = 7;
  b.parallel = parallel;
  return b;
}

std::string trace_of(const Scenario& sc, Mode mode) {
  SimOptions o;
  o.mode = mode;
  const auto [rec, m] = run(sc, o);
  std::ostringstream out;
  write_trace(out, sc, mode, rec, m);
  return out.str();
}

Scenario two_agents() { return generate_scenario(make_tjunction(), 2, 3, {}, {}, "tjunction"); }

}  // namespace

TEST(Seeds, DistinctAndStable) {
  std::set<std::uint64_t> seen;
  for (std::size_t i = 0; i < 1000; ++i) seen.insert(run_seed(42, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(run_seed(42, 5), run_seed(42, 5));
  EXPECT_NE(run_seed(42, 5), run_seed(43, 5));
}

TEST(RunsCsv, AggregateRowMatchesRows) {
  const auto results = run_batch(small_batch(4));
  const Table t = parse_csv(runs_csv(results));
  ASSERT_EQ(t.size(), 6u);
  const auto& head = t.front();
  ASSERT_EQ(head, runs_csv_columns());
  auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(head.begin(), head.end(), name) - head.begin());
  };
  for (const auto& row : t) ASSERT_EQ(row.size(), head.size());

  const auto& all = t.back();
  EXPECT_EQ(all[col("run")], "all");
  EXPECT_EQ(all[col("seed")], "");
  const double n = 4.0;
  for (const char* flag : {"succ", "inf", "coll", "stall", "timeout"}) {
    double sum = 0.0;
    for (std::size_t r = 1; r <= 4; ++r) sum += cell(t[r][col(flag)]);
    EXPECT_NEAR(cell(all[col(flag)]), 100.0 * sum / n, 1e-9) << flag;
  }
  for (const char* c : {"inf_solves", "agent_collisions", "wall_collisions", "crossings", "coordinations"}) {
    double sum = 0.0;
    for (std::size_t r = 1; r <= 4; ++r) sum += cell(t[r][col(c)]);
    EXPECT_EQ(cell(all[col(c)]), sum) << c;
  }
  double lo = INFINITY, hi = -INFINITY, sum = 0.0, sim = 0.0;
  int done = 0;
  for (std::size_t r = 1; r <= 4; ++r) {
    sim += cell(t[r][col("sim_time")]);
    EXPECT_EQ(t[r][col("seed")], std::to_string(run_seed(7, r - 1)));
    if (t[r][col("succ")] != "1") {
      EXPECT_EQ(t[r][col("T_1")], "");
      continue;
    }
    const double v = cell(t[r][col("T_1")]);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
    ++done;
  }
  ASSERT_GT(done, 0);
  EXPECT_NEAR(cell(all[col("T_1")]), sum / done, 1e-9);
  EXPECT_EQ(cell(all[col("T_1_min")]), lo);
  EXPECT_EQ(cell(all[col("T_1_max")]), hi);
  EXPECT_NEAR(cell(all[col("sim_time")]), sim / n, 1e-9);
}

TEST(RunsCsv, SingleRunAggregateEqualsRun) {
  const auto results = run_batch(small_batch(1));
  const Table t = parse_csv(runs_csv(results));
  ASSERT_EQ(t.size(), 3u);
  const auto& head = t.front();
  for (std::size_t c = 0; c < head.size(); ++c) {
    if (head[c] == "run" || head[c] == "seed") continue;
    const double row = cell(t[1][c]);
    const double all = cell(t[2][c]);
    const bool pct = head[c] == "succ" || head[c] == "inf" || head[c] == "coll" || head[c] == "stall" ||
                     head[c] == "timeout";
    if (std::isnan(row)) {
      EXPECT_TRUE(std::isnan(all)) << head[c];
    } else {
      EXPECT_DOUBLE_EQ(all, pct ? 100.0 * row : row) << head[c];
    }
  }
}

TEST(RunsCsv, EmptyBatchHasOnlyAggregate) {
  const Table t = parse_csv(runs_csv({}));
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[1][0], "all");
}

TEST(Batch, DeterministicAcrossThreadCounts) {
  const auto a = run_batch(small_batch(4, 1));
  const auto b = run_batch(small_batch(4, 2));
  EXPECT_EQ(runs_csv(a), runs_csv(b));
  EXPECT_EQ(runs_csv(a), runs_csv(run_batch(small_batch(4, 1))));
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(b[i].index, i);
}

TEST(Batch, GenerationErrorsPropagate) {
  auto spec = small_batch(3, 2);
  spec.agents = 50;
  EXPECT_THROW(run_batch(spec), ScenarioError);
}

TEST(TimingCsv, CountsSolves) {
  const auto results = run_batch(small_batch(2));
  const Table t = parse_csv(timing_csv(results));
  ASSERT_EQ(t.size(), 4u);
  EXPECT_EQ(t[3][0], "all");
  EXPECT_EQ(cell(t[3][1]), cell(t[1][1]) + cell(t[2][1]));
  EXPECT_GT(cell(t[1][1]), 0.0);
  EXPECT_LE(cell(t[3][2]), cell(t[3][3]));
  EXPECT_LE(cell(t[3][3]), cell(t[3][4]));
}

TEST(Summary, LineFormat) {
  Summary s;
  s.runs = 50;
  s.succ_pct = 96;
  s.inf_pct = 4;
  s.avg_group = 1.5;
  s.t_mpc.add(1.0);
  s.t_mpc.add(3.0);
  const std::string line = summary_line("warehouse/6", s);
  EXPECT_EQ(line.rfind("warehouse/6", 0), 0u);
  EXPECT_NE(line.find("[ 96,   4,   0]"), std::string::npos) << line;
  EXPECT_NE(line.find("[1.00, 2.00, 3.00]"), std::string::npos) << line;
  EXPECT_NE(line.find("[-, -, -]"), std::string::npos) << line;
  EXPECT_NE(line.find("1.50"), std::string::npos);
}

TEST(Trace, RoundTrip) {
  const Scenario sc = two_agents();
  const std::string text = trace_of(sc, Mode::kClaims);
  std::istringstream in(text);
  const Trace tr = read_trace(in);
  EXPECT_EQ(tr.map_name, "tjunction");
  EXPECT_EQ(tr.mode, "claims");
  EXPECT_EQ(tr.seed, sc.seed);
  EXPECT_EQ(map_to_json(tr.map), map_to_json(sc.map));
  ASSERT_EQ(tr.agents.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(tr.agents[i].route, sc.agents[i].route);
    ASSERT_FALSE(tr.agents[i].states.empty());
    EXPECT_DOUBLE_EQ(tr.agents[i].states.front().position.x, sc.agents[i].start.position.x);
    EXPECT_DOUBLE_EQ(tr.agents[i].states.front().position.y, sc.agents[i].start.position.y);
    EXPECT_TRUE(std::is_sorted(tr.agents[i].t.begin(), tr.agents[i].t.end()));
  }
  ASSERT_TRUE(tr.metrics);
  EXPECT_TRUE(tr.metrics->value("succ", false));
  EXPECT_FALSE(tr.claims.empty());
  ASSERT_NE(tr.agent(sc.agents[1].id.value), nullptr);
  EXPECT_EQ(tr.agent(99), nullptr);
}

TEST(Trace, Malformed) {
  std::istringstream empty("");
  EXPECT_THROW(read_trace(empty), TraceError);
  std::istringstream junk("{not json\n");
  EXPECT_THROW(read_trace(junk), TraceError);
  std::istringstream headless(R"({"type":"state","t":0,"agent":0,"x":0,"y":0})" "\n");
  EXPECT_THROW(read_trace(headless), TraceError);

  const std::string text = trace_of(two_agents(), Mode::kClaims);
  std::istringstream bad_kind(text.substr(0, text.find('\n') + 1) +
                              R"({"type":"event","t":1,"kind":"explosion","agent":0,"other":-1})" "\n");
  EXPECT_THROW(read_trace(bad_kind), TraceError);
  EXPECT_THROW(load_trace("/no/such/trace.jsonl"), IoError);
}

TEST(Plot, HeaderOnlyTraceDrawsMap) {
  const std::string text = trace_of(two_agents(), Mode::kClaims);
  std::istringstream in(text.substr(0, text.find('\n') + 1));
  Trace tr = read_trace(in);
  for (auto& a : tr.agents) {
    a.t.clear();
    a.states.clear();
  }
  const std::string svg = plot_svg(tr);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("id=\"walls\""), std::string::npos);
  EXPECT_EQ(svg.find("<polyline"), std::string::npos);
}

TEST(Plot, OnePolylinePerAgent) {
  std::istringstream in(trace_of(two_agents(), Mode::kClaims));
  const std::string svg = plot_svg(read_trace(in));
  std::size_t lines = 0;
  for (auto p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++lines;
  EXPECT_EQ(lines, 2u);
  EXPECT_NE(svg.find("id=\"agent0\""), std::string::npos);
  EXPECT_NE(svg.find("class=\"claim\""), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Postmortem, NamesTheCollision) {
  const Scenario sc = load_scenario(std::filesystem::path(CLAIMNAV_MAPS_DIR) / "corridor_scenario.json");
  std::istringstream in(trace_of(sc, Mode::kNever));
  const std::string text = postmortem(read_trace(in));
  EXPECT_NE(text.find("outcome: failure"), std::string::npos) << text;
  EXPECT_TRUE(text.find("agent_collision") != std::string::npos || text.find("stall") != std::string::npos) << text;
  EXPECT_NE(text.find("agent 1:"), std::string::npos);
}

TEST(Postmortem, SuccessHasNoFailureEvents) {
  std::istringstream in(trace_of(two_agents(), Mode::kClaims));
  const std::string text = postmortem(read_trace(in));
  EXPECT_NE(text.find("outcome: success"), std::string::npos) << text;
  EXPECT_NE(text.find("no failure events"), std::string::npos);
}
