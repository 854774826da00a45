#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "support.hpp"
#include "vdet/io/csv.hpp"
#include "vdet/io/formats.hpp"
#include "vdet/pipeline.hpp"

using namespace vdet;
namespace fs = std::filesystem;

namespace {

ScenarioConfig small_scenario(std::uint64_t seed) {
  ScenarioConfig c = paper_preset(seed);
  c.n_vehicles = 1500;
  c.days = 1.0;
  c.n_incidents = 80;
  return c;
}

RunConfig quick_config() {
  RunConfig cfg;
  cfg.set("algorithms", "random_forest");
  cfg.set("grid.random_forest.trees", "20");
  cfg.set("grid.random_forest.max_depth", "6");
  cfg.set("smote.ratios", "none,1");
  cfg.set("folds", "3");
  cfg.set("threads", "1");
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// One shared corpus and run for the heavier checks.
struct SmallRun {
  test::TempDir dir{"pipeline"};
  ScenarioBundle bundle;
  RunReport report;
  SmallRun() : bundle(generate_scenario(small_scenario(4))) {
    write_bundle(bundle, dir.path / "in");
    report = run_pipeline(quick_config(), dir.path / "in", dir.path / "run");
  }
};

const SmallRun& small_run() {
  static SmallRun r;
  return r;
}

}  // namespace

TEST(Config, DefaultsMatchMethod) {
  const RunConfig cfg;
  EXPECT_EQ(cfg.spacing, 110.0);
  EXPECT_EQ(cfg.gap, 900.0);
  EXPECT_EQ(cfg.labels.pre_window, 7200.0);
  EXPECT_EQ(cfg.labels.post_window, 900.0);
  EXPECT_EQ(cfg.labels.upstream_required, 16);
  EXPECT_EQ(cfg.features.downstream_gap, 4);
  EXPECT_EQ(cfg.folds, 5);
  EXPECT_EQ(cfg.smote_k, 5);
  ASSERT_EQ(cfg.balancing.size(), 4u);
  EXPECT_FALSE(cfg.balancing[0].has_value());
  EXPECT_EQ(*cfg.balancing[1], 0.25);
  EXPECT_EQ(*cfg.balancing[2], 0.5);
  EXPECT_EQ(*cfg.balancing[3], 1.0);
  EXPECT_EQ(cfg.algorithms.size(), 4u);
  EXPECT_EQ(cfg.grid(learn::Algorithm::logistic).size(), 8u);
  EXPECT_EQ(cfg.grid(learn::Algorithm::random_forest).size(), 6u);
  EXPECT_EQ(cfg.grid(learn::Algorithm::gradient_boost).size(), 16u);
  EXPECT_EQ(cfg.grid(learn::Algorithm::mlp).size(), 16u);
}

TEST(Config, AxesExpandLikeDefaultGrid) {
  for (auto a : learn::kAllAlgorithms) {
    const auto axes = grid_from_axes(a, default_axes(a));
    const auto ref = learn::default_grid(a);
    ASSERT_EQ(axes.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_EQ(learn::describe(axes[i]), learn::describe(ref[i]));
  }
}

TEST(Config, SetterValidates) {
  RunConfig cfg;
  EXPECT_THROW(cfg.set("nope", "1"), ConfigError);
  EXPECT_THROW(cfg.set("spacing", "-3"), ConfigError);
  EXPECT_THROW(cfg.set("spacing", "abc"), ConfigError);
  EXPECT_THROW(cfg.set("smote.ratios", "1.5"), ConfigError);
  EXPECT_THROW(cfg.set("algorithms", "svm"), ConfigError);
  EXPECT_THROW(cfg.set("grid.random_forest.depth", "3"), ConfigError);
  cfg.set("upstream_req", "10");
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Config, FileOverridesWithComments) {
  test::TempDir dir("config");
  {
    std::ofstream out(dir.path / "run.cfg");
    out << "# comment\nspacing = 100  # trailing\n\nsmote.ratios = none, 0.5\nalgorithms = rf, lr\n";
  }
  RunConfig cfg;
  apply_config_file(cfg, (dir.path / "run.cfg").string());
  EXPECT_EQ(cfg.spacing, 100.0);
  ASSERT_EQ(cfg.balancing.size(), 2u);
  EXPECT_EQ(cfg.algorithms.front(), learn::Algorithm::random_forest);
  {
    std::ofstream out(dir.path / "bad.cfg");
    out << "spacing 100\n";
  }
  EXPECT_THROW(apply_config_file(cfg, (dir.path / "bad.cfg").string()), ConfigError);
}

TEST(Pipeline, LabelsEqualGeneratorGroundTruth) {
  const auto& r = small_run();
  const auto samples = io::read_samples((r.dir.path / "run" / "samples.csv").string());
  std::map<std::pair<std::string, std::string>, Label> got, want;
  for (const auto& s : samples) got[{s.event_id, s.trip_id}] = s.label;
  for (const auto& g : r.bundle.ground_truth) want[{g.event_id, g.trip_id}] = g.label;
  EXPECT_GT(want.size(), 50u);
  EXPECT_EQ(got, want);
}

TEST(Pipeline, ImportanceSumsToOne) {
  const auto& r = small_run();
  io::CsvReader in((r.dir.path / "run" / "importance.csv").string());
  const auto cf = in.column("feature"), ci = in.column("importance");
  double total = 0.0;
  std::size_t n = 0;
  while (in.next()) {
    EXPECT_GE(in.number(ci), 0.0);
    total += in.number(ci);
    ++n;
    (void)cf;
  }
  EXPECT_EQ(n, 14u);
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(Pipeline, ManifestHashesMatchFiles) {
  const auto& r = small_run();
  const auto m = json::parse(slurp(r.dir.path / "run" / "manifest.json"));
  ASSERT_GT(m.size(), 8u);
  for (const auto& e : m) EXPECT_EQ(sha256_file(r.dir.path / "run" / e["file"].get<std::string>()), e["sha256"].get<std::string>());
  EXPECT_FALSE(fs::exists(r.dir.path / "run" / ".lock"));
}

TEST(Pipeline, DatasetRoundTripsThroughCsv) {
  const auto& r = small_run();
  const auto d = io::read_dataset((r.dir.path / "run" / "dataset.csv").string());
  ASSERT_EQ(d.rows(), r.report.dataset.rows());
  EXPECT_EQ(d.feature_names(), feature_names());
  EXPECT_EQ(d.values(), r.report.dataset.values());
  EXPECT_EQ(d.targets(), r.report.dataset.targets());
}

TEST(Pipeline, SpeedProfileShowsQueueDip) {
  const auto& r = small_run();
  test::TempDir plots("plots");
  const auto files = emit_plots(r.dir.path / "run", plots.path);
  EXPECT_EQ(files.size(), 6u);
  io::CsvReader in((plots.path / "speed_profile.csv").string());
  const auto ck = in.column("relative_detector"), cl = in.column("label"), cs = in.column("mean_speed");
  std::map<long long, std::map<std::string, double>> prof;
  while (in.next()) prof[in.integer(ck)][in.str(cl)] = in.number(cs);
  double worst = 1.0;
  for (long long k = -8; k <= 0; ++k) worst = std::min(worst, prof[k]["affected"] / prof[k]["normal"]);
  EXPECT_LE(worst, 0.7);
  // Far upstream the classes travel alike.
  EXPECT_NEAR(prof[-20]["affected"] / prof[-20]["normal"], 1.0, 0.1);
}

TEST(Pipeline, RerunIsByteIdenticalAcrossThreads) {
  const auto& r = small_run();
  auto cfg = quick_config();
  cfg.set("threads", "3");
  test::TempDir out("rerun");
  const auto again = run_pipeline(cfg, r.dir.path / "in", out.path / "run");
  ASSERT_EQ(again.manifest, r.report.manifest);
  EXPECT_EQ(slurp(out.path / "run" / "report.json"), slurp(r.dir.path / "run" / "report.json"));
}

TEST(Pipeline, EmptyTrajectoryFileFailsIngestStage) {
  test::TempDir dir("empty");
  write_bundle(generate_scenario(small_scenario(5)), dir.path / "in");
  {
    std::ofstream out(dir.path / "in" / "trajectories.csv");
    out << "vehicle_id,timestamp,lat,lon,speed_mph,heading_deg\n";
  }
  try {
    run_pipeline(quick_config(), dir.path / "in", dir.path / "run");
    FAIL() << "expected a stage error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage, "ingest");
  }
  const auto m = json::parse(slurp(dir.path / "run" / "manifest.json"));
  EXPECT_EQ(m["failed_stage"], "ingest");
  EXPECT_FALSE(fs::exists(dir.path / "run" / ".lock"));
}

TEST(Pipeline, MalformedRowReportsFileAndLine) {
  test::TempDir dir("malformed");
  write_bundle(generate_scenario(small_scenario(5)), dir.path / "in");
  {
    std::ofstream out(dir.path / "in" / "trajectories.csv");
    out << "vehicle_id,timestamp,lat,lon,speed_mph,heading_deg\nv1,1630080000,30.45,-91.15,55,90\nv1,oops,30.45,-91.15,55,90\n";
  }
  try {
    run_pipeline(quick_config(), dir.path / "in", dir.path / "run");
    FAIL() << "expected a stage error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage, "ingest");
    EXPECT_NE(std::string(e.what()).find("trajectories.csv:3"), std::string::npos) << e.what();
  }
}

TEST(Pipeline, ConcurrentRunIntoSameDirectoryRefused) {
  test::TempDir dir("lock");
  fs::create_directories(dir.path / "run");
  const DirectoryLock held(dir.path / "run");
  EXPECT_ANY_THROW(DirectoryLock(dir.path / "run"));
}
