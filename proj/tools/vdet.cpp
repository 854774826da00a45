// vdet: command line front end.
//
//   vdet synth      --out-dir data [--seed N] [--speed-drop 0.5] [--planar]
//   vdet ingest     --config run.cfg --out-dir planar
//   vdet pipeline   --config run.cfg --input-dir data --out-dir run
//   vdet train      --dataset run/dataset.csv --out-dir eval
//   vdet report     --run-dir run
//   vdet plot-data  --run-dir run --out-dir plots

#include <CLI11.hpp>

#include <chrono>
#include <iostream>

#include "vdet/pipeline.hpp"

namespace {

using namespace vdet;

struct Common {
  std::string config;
  std::vector<std::string> set;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string out_dir;
};

void add_common(CLI::App* app, Common& c, bool out_required = true) {
  app->add_option("--config", c.config, "key=value configuration file")->check(CLI::ExistingFile);
  app->add_option("--set", c.set, "configuration override key=value (repeatable)");
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--threads", c.threads, "worker threads (0 = all cores)");
  auto* o = app->add_option("--out-dir", c.out_dir, "output directory");
  if (out_required) o->required();
}

RunConfig make_config(const Common& c) {
  RunConfig cfg;
  if (!c.config.empty()) apply_config_file(cfg, c.config);
  for (const auto& kv : c.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) cfg.seed = *c.seed;
  cfg.threads = c.threads;
  cfg.validate();
  return cfg;
}

void print_results(const json& rep, std::ostream& os) {
  const auto& st = rep["stages"];
  os << "points in/kept/filtered : " << st["ingest"]["points_in"] << " / " << st["filter"]["points_kept"] << " / "
     << st["filter"]["points_filtered"] << '\n';
  os << "trips                   : " << st["segment"]["trips"] << '\n';
  os << "detector trajectories   : " << st["interpolate"]["detector_trajectories"] << '\n';
  os << "samples affected/normal : " << st["matching"]["affected"] << " / " << st["matching"]["normal"] << '\n';
  os << "dataset rows            : " << st["features"]["rows"] << "\n\n";
  os << std::left << std::setw(16) << "algorithm" << std::setw(8) << "smote" << std::setw(16) << "recall" << std::setw(16) << "far"
     << "auc\n";
  auto cell = [](const json& m) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << m["mean"].get<double>() << "+-" << m["std"].get<double>();
    return s.str();
  };
  for (const auto& r : rep["evaluation"]["results"])
    os << std::setw(16) << r["algorithm"].get<std::string>() << std::setw(8) << r["balancing"].get<std::string>() << std::setw(16)
       << cell(r["recall"]) << std::setw(16) << cell(r["far"]) << cell(r["auc"]) << '\n';
  if (!rep["evaluation"]["importance"].empty()) {
    os << "\nimportance:";
    for (const auto& i : rep["evaluation"]["importance"])
      os << ' ' << i["feature"].get<std::string>() << '=' << std::fixed << std::setprecision(3) << i["importance"].get<double>();
    os << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incident detection from probe-vehicle trajectories via virtual detectors"};
  app.require_subcommand(1);

  // synth
  Common sc;
  double speed_drop = 0.5;
  std::optional<int> vehicles, incidents;
  bool planar = false;
  auto* synth = app.add_subcommand("synth", "generate a seeded synthetic corpus");
  add_common(synth, sc);
  synth->add_option("--speed-drop", speed_drop, "fractional speed loss inside incident queues")->check(CLI::Range(0.0, 0.95));
  synth->add_option("--vehicles", vehicles, "number of vehicles");
  synth->add_option("--incidents", incidents, "number of incidents");
  synth->add_flag("--planar", planar, "write planar yard coordinates instead of lat/lon");

  // ingest
  Common ic;
  std::string ingest_in = ".";
  auto* ingest = app.add_subcommand("ingest", "convert lat/lon inputs to the local planar frame");
  add_common(ingest, ic);
  ingest->add_option("--input-dir", ingest_in, "directory holding the configured input files");

  // pipeline
  Common pc;
  std::string pipe_in = ".";
  auto* pipeline = app.add_subcommand("pipeline", "run every stage and evaluate all models");
  add_common(pipeline, pc);
  pipeline->add_option("--input-dir", pipe_in, "directory holding the configured input files");

  // train
  Common tc;
  std::string dataset_path;
  auto* train = app.add_subcommand("train", "cross-validate models on a feature dataset");
  add_common(train, tc);
  train->add_option("--dataset", dataset_path, "feature dataset CSV")->required()->check(CLI::ExistingFile);

  // report
  std::string report_dir;
  auto* report = app.add_subcommand("report", "print a run summary");
  report->add_option("--run-dir", report_dir, "pipeline output directory")->required();

  // plot-data
  std::string plot_run, plot_out;
  auto* plot = app.add_subcommand("plot-data", "write plot-ready CSVs from a finished run");
  plot->add_option("--run-dir", plot_run, "pipeline output directory")->required();
  plot->add_option("--out-dir", plot_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      auto cfg = paper_preset(sc.seed.value_or(1));
      cfg.speed_drop = speed_drop;
      if (vehicles) cfg.n_vehicles = *vehicles;
      if (incidents) cfg.n_incidents = *incidents;
      const auto t0 = std::chrono::steady_clock::now();
      const auto bundle = generate_scenario(cfg, resolve_threads(sc.threads));
      write_bundle(bundle, sc.out_dir, !planar);
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cout << "synth: " << bundle.points.size() << " points, " << bundle.trips << " trips, " << bundle.incidents.size()
                << " incidents, " << bundle.ground_truth.size() << " labelled samples (" << std::fixed << std::setprecision(1) << s
                << " s)\n";
    } else if (*ingest) {
      const auto cfg = make_config(ic);
      DirectoryLock lock(ic.out_dir);
      const auto in = run_stage("ingest", [&] { return load_inputs(cfg, ingest_in); });
      const fs::path out(ic.out_dir);
      io::write_corridor((out / "corridor.csv").string(), in.corridors, nullptr);
      io::write_trajectories((out / "trajectories.csv").string(), in.points, nullptr);
      io::write_incidents((out / "incidents.csv").string(), in.incidents, nullptr);
      io::write_weather((out / "weather.csv").string(), in.weather);
      json m;
      m["projection"] = in.projection ? in.projection->to_json() : json(nullptr);
      m["points"] = in.points.size();
      m["incidents"] = in.incidents.size();
      write_json(out / "ingest.json", m);
      std::cout << "ingest: " << in.points.size() << " points, " << in.incidents.size() << " incidents -> " << ic.out_dir << '\n';
    } else if (*pipeline) {
      const auto cfg = make_config(pc);
      const auto t0 = std::chrono::steady_clock::now();
      const auto rr = run_pipeline(cfg, pipe_in, pc.out_dir, &std::cerr);
      print_results(rr.report, std::cout);
      std::cerr << "done in " << std::fixed << std::setprecision(1)
                << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
    } else if (*train) {
      const auto cfg = make_config(tc);
      DirectoryLock lock(tc.out_dir);
      const auto data = run_stage("ingest", [&] { return io::read_dataset(dataset_path); });
      const auto ev = run_stage("evaluation", [&] { return evaluate(data, cfg, &std::cerr); });
      json j;
      j["config"] = cfg.to_json();
      j["evaluation"] = to_json(ev);
      write_json(fs::path(tc.out_dir) / "evaluation.json", j);
      for (const auto& r : ev.results)
        std::cout << std::left << std::setw(16) << to_string(r.algorithm) << std::setw(8) << r.balancing << "auc " << std::fixed
                  << std::setprecision(3) << r.auc.mean << "  recall " << r.recall.mean << "  far " << r.far.mean << '\n';
    } else if (*report) {
      const fs::path p = fs::path(report_dir) / "report.json";
      std::ifstream in(p);
      if (!in) throw StageError("report", p.string() + ": cannot open");
      print_results(json::parse(in), std::cout);
    } else if (*plot) {
      const auto files = run_stage("plot-data", [&] { return emit_plots(plot_run, plot_out); });
      for (const auto& f : files) std::cout << fs::path(plot_out) / f << '\n';
    }
  } catch (const StageError& e) {
    std::cerr << "vdet: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "vdet: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
