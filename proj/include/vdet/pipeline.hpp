#pragma once

// End-to-end orchestration: configuration, the staged data funnel, model
// evaluation, run report with content-hashed manifest, and plot data.

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vdet/detector_db.hpp"
#include "vdet/features.hpp"
#include "vdet/geo.hpp"
#include "vdet/incident.hpp"
#include "vdet/ingest.hpp"
#include "vdet/io/csv.hpp"
#include "vdet/io/formats.hpp"
#include "vdet/learn/cv.hpp"
#include "vdet/learn/model.hpp"
#include "vdet/sampling.hpp"
#include "vdet/synth.hpp"
#include "vdet/trajectory.hpp"

namespace vdet {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Named hyperparameter axes; the grid is their Cartesian product with the
/// last axis varying fastest.
using GridAxes = std::vector<std::pair<std::string, std::vector<std::string>>>;

inline GridAxes default_axes(learn::Algorithm a) {
  switch (a) {
    case learn::Algorithm::logistic: return {{"strength", {"0.01", "0.1", "1", "10"}}, {"penalty", {"l1", "l2"}}};
    case learn::Algorithm::random_forest: return {{"trees", {"100", "300"}}, {"max_depth", {"4", "8", "none"}}};
    case learn::Algorithm::gradient_boost:
      return {{"learning_rate", {"0.05", "0.1"}}, {"max_depth", {"3", "5"}}, {"trees", {"100", "300"}}, {"subsample", {"0.8", "1.0"}}};
    case learn::Algorithm::mlp:
      return {{"activation", {"relu", "tanh"}},
              {"alpha", {"1e-4", "1e-2"}},
              {"batch_size", {"32", "128"}},
              {"learning_rate", {"1e-3", "1e-2"}},
              {"hidden", {"64"}},
              {"epochs", {"20"}}};
  }
  return {};
}

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty() || !std::isfinite(d)) throw ConfigError(key + ": '" + v + "' is not a number");
  return d;
}

inline long long to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long d = 0;
  try {
    d = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ConfigError(key + ": '" + v + "' is not an integer");
  return d;
}

inline std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

inline learn::Hyperparameters make_params(learn::Algorithm a, const std::map<std::string, std::string>& kv) {
  using namespace learn;
  auto num = [&](const char* k) { return vdet::detail::to_double(k, kv.at(k)); };
  auto integer = [&](const char* k) { return static_cast<int>(vdet::detail::to_int(k, kv.at(k))); };
  switch (a) {
    case Algorithm::logistic: return LogisticParams{num("strength"), parse_penalty(kv.at("penalty"))};
    case Algorithm::random_forest: {
      ForestParams p;
      p.trees = integer("trees");
      const auto& d = kv.at("max_depth");
      if (d != "none") p.max_depth = integer("max_depth");
      return p;
    }
    case Algorithm::gradient_boost: return BoostParams{num("learning_rate"), integer("max_depth"), integer("trees"), num("subsample")};
    case Algorithm::mlp: {
      MlpParams p;
      p.activation = parse_activation(kv.at("activation"));
      p.alpha = num("alpha");
      p.batch_size = integer("batch_size");
      p.learning_rate = num("learning_rate");
      p.hidden = integer("hidden");
      p.epochs = integer("epochs");
      return p;
    }
  }
  throw ConfigError("unknown algorithm");
}

inline learn::Grid grid_from_axes(learn::Algorithm a, const GridAxes& axes) {
  learn::Grid g;
  std::vector<std::size_t> idx(axes.size(), 0);
  for (const auto& [name, values] : axes)
    if (values.empty()) throw ConfigError("grid." + std::string(to_string(a)) + "." + name + " is empty");
  for (;;) {
    std::map<std::string, std::string> kv;
    for (std::size_t i = 0; i < axes.size(); ++i) kv[axes[i].first] = axes[i].second[idx[i]];
    try {
      g.push_back(make_params(a, kv));
    } catch (const std::out_of_range&) {
      throw ConfigError("grid for " + std::string(to_string(a)) + " is missing an axis");
    } catch (const std::invalid_argument& e) {
      throw ConfigError("grid." + std::string(to_string(a)) + ": " + e.what());
    }
    std::size_t k = axes.size();
    while (k > 0) {
      --k;
      if (++idx[k] < axes[k].second.size()) break;
      idx[k] = 0;
      if (k == 0) return g;
    }
    if (axes.empty()) return g;
  }
}

struct RunConfig {
  std::string corridor = "corridor.csv";
  std::string trajectories = "trajectories.csv";
  std::string incidents = "incidents.csv";
  std::string weather = "weather.csv";

  double spacing = kDefaultDetectorSpacing;
  double gap = kDefaultTripGap;
  double max_offset = kDefaultMaxOffset;
  double backward_tolerance = kDefaultBackwardTolerance;
  LabelConfig labels{};
  FeatureConfig features{};

  std::vector<std::optional<double>> balancing{std::nullopt, 0.25, 0.5, 1.0};
  int smote_k = 5;
  std::optional<std::uint64_t> smote_seed;  // defaults to a stream of `seed`
  int folds = 5;
  std::uint64_t seed = 1;
  std::vector<learn::Algorithm> algorithms{std::begin(learn::kAllAlgorithms), std::end(learn::kAllAlgorithms)};
  std::map<learn::Algorithm, GridAxes> axes{{learn::Algorithm::logistic, default_axes(learn::Algorithm::logistic)},
                                            {learn::Algorithm::random_forest, default_axes(learn::Algorithm::random_forest)},
                                            {learn::Algorithm::gradient_boost, default_axes(learn::Algorithm::gradient_boost)},
                                            {learn::Algorithm::mlp, default_axes(learn::Algorithm::mlp)}};
  bool importance = true;
  unsigned threads = 0;  // 0 = all cores; never affects results

  learn::Grid grid(learn::Algorithm a) const { return grid_from_axes(a, axes.at(a)); }
  std::uint64_t effective_smote_seed() const { return smote_seed.value_or(derive_seed(seed, 0x5307E)); }

  /// Applies one key=value setting.
  void set(const std::string& key, const std::string& value) {
    using detail::to_double;
    using detail::to_int;
    auto positive = [&](double v) {
      if (!(v > 0.0)) throw ConfigError(key + " must be positive");
      return v;
    };
    if (key == "corridor") corridor = value;
    else if (key == "trajectories") trajectories = value;
    else if (key == "incidents") incidents = value;
    else if (key == "weather") weather = value;
    else if (key == "spacing") spacing = positive(to_double(key, value));
    else if (key == "gap") gap = positive(to_double(key, value));
    else if (key == "max_offset") max_offset = positive(to_double(key, value));
    else if (key == "backward_tolerance") backward_tolerance = to_double(key, value);
    else if (key == "pre_window") labels.pre_window = positive(to_double(key, value));
    else if (key == "post_window") labels.post_window = to_double(key, value);
    else if (key == "upstream_req") labels.upstream_required = static_cast<int>(to_int(key, value));
    else if (key == "downstream_gap") features.downstream_gap = static_cast<int>(to_int(key, value));
    else if (key == "tz_offset") features.tz_offset_hours = to_double(key, value);
    else if (key == "folds") folds = static_cast<int>(to_int(key, value));
    else if (key == "seed") seed = static_cast<std::uint64_t>(to_int(key, value));
    else if (key == "threads") threads = static_cast<unsigned>(to_int(key, value));
    else if (key == "importance") importance = value == "1" || value == "true" || value == "yes";
    else if (key == "smote.k") smote_k = static_cast<int>(to_int(key, value));
    else if (key == "smote.seed") smote_seed = static_cast<std::uint64_t>(to_int(key, value));
    else if (key == "smote.ratios" || key == "smote.ratio") {
      balancing.clear();
      for (const auto& r : detail::split_list(value)) {
        if (r == "none") balancing.push_back(std::nullopt);
        else {
          const double v = to_double(key, r);
          if (!(v > 0.0 && v <= 1.0)) throw ConfigError(key + ": ratio " + r + " outside (0, 1]");
          balancing.push_back(v);
        }
      }
      if (balancing.empty()) throw ConfigError(key + " is empty");
    } else if (key == "algorithms") {
      algorithms.clear();
      for (const auto& a : detail::split_list(value)) {
        try {
          algorithms.push_back(learn::parse_algorithm(a));
        } catch (const std::invalid_argument& e) {
          throw ConfigError(key + ": " + e.what());
        }
      }
      if (algorithms.empty()) throw ConfigError("algorithms is empty");
    } else if (key.rfind("grid.", 0) == 0) {
      const auto dot = key.find('.', 5);
      if (dot == std::string::npos) throw ConfigError("grid keys look like grid.<algorithm>.<parameter>");
      learn::Algorithm a;
      try {
        a = learn::parse_algorithm(key.substr(5, dot - 5));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(key + ": " + e.what());
      }
      const std::string param = key.substr(dot + 1);
      auto& ax = axes[a];
      auto it = std::find_if(ax.begin(), ax.end(), [&](const auto& p) { return p.first == param; });
      if (it == ax.end()) throw ConfigError(key + ": unknown parameter '" + param + "'");
      it->second = detail::split_list(value);
      grid_from_axes(a, ax);  // validate now
    } else {
      throw ConfigError("unknown configuration key '" + key + "'");
    }
  }

  void validate() const {
    if (folds < 2) throw ConfigError("folds must be >= 2");
    if (smote_k < 1) throw ConfigError("smote.k must be >= 1");
    if (labels.upstream_required < features.downstream_gap + kDetectorSets * kDetectorsPerSet)
      throw ConfigError("upstream_req must cover downstream_gap plus the 12-detector feature window");
    if (features.downstream_gap < 0) throw ConfigError("downstream_gap must be >= 0");
    if (backward_tolerance < 0.0) throw ConfigError("backward_tolerance must be >= 0");
  }

  json to_json() const {
    json j;
    j["corridor"] = corridor;
    j["trajectories"] = trajectories;
    j["incidents"] = incidents;
    j["weather"] = weather;
    j["spacing"] = spacing;
    j["gap"] = gap;
    j["max_offset"] = max_offset;
    j["backward_tolerance"] = backward_tolerance;
    j["pre_window"] = labels.pre_window;
    j["post_window"] = labels.post_window;
    j["upstream_req"] = labels.upstream_required;
    j["downstream_gap"] = features.downstream_gap;
    j["tz_offset"] = features.tz_offset_hours;
    auto ratios = json::array();
    for (const auto& b : balancing) ratios.push_back(learn::balancing_label(b));
    j["smote.ratios"] = ratios;
    j["smote.k"] = smote_k;
    j["smote.seed"] = effective_smote_seed();
    j["folds"] = folds;
    j["seed"] = seed;
    auto algs = json::array();
    for (auto a : algorithms) algs.push_back(to_string(a));
    j["algorithms"] = algs;
    for (const auto& [a, ax] : axes)
      for (const auto& [name, values] : ax) j["grid"][std::string(to_string(a))][name] = values;
    j["importance"] = importance;
    return j;
  }
};

/// Parses key=value lines ('#' starts a comment) on top of the defaults.
inline void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(n) + ": expected key=value");
    try {
      cfg.set(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

// ---------------------------------------------------------------------------
// Hashing, locking

inline std::string sha256_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error(p.string() + ": cannot open for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

/// Exclusive lock on an output directory for the lifetime of the object.
class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw std::runtime_error("output directory " + dir.string() + " is locked by another run (" + path_.string() + ")");
    std::fclose(f);
  }
  ~DirectoryLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  fs::path path_;
};

struct StageError : std::runtime_error {
  StageError(std::string stage, const std::string& msg) : std::runtime_error("[" + stage + "] " + msg), stage(std::move(stage)) {}
  std::string stage;
};

template <class F>
auto run_stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

// ---------------------------------------------------------------------------
// Stages

struct Inputs {
  std::vector<Corridor> corridors;
  std::optional<LocalProjection> projection;
  std::vector<RawPoint> points;
  std::vector<Incident> incidents;
  WeatherFlags weather;
};

inline Inputs load_inputs(const RunConfig& cfg, const fs::path& base = {}) {
  auto resolve = [&](const std::string& p) { return (fs::path(p).is_absolute() || base.empty() ? fs::path(p) : base / p).string(); };
  Inputs in;
  const auto cf = io::read_corridor(resolve(cfg.corridor));
  in.projection = cf.projection();
  const LocalProjection* proj = in.projection ? &*in.projection : nullptr;
  in.corridors = cf.corridors(proj);
  in.points = io::read_trajectories(resolve(cfg.trajectories), proj);
  if (in.points.empty()) throw std::runtime_error(resolve(cfg.trajectories) + ": no trajectory points");
  in.incidents = io::read_incidents(resolve(cfg.incidents), proj);
  in.weather = io::read_weather(resolve(cfg.weather));
  return in;
}

struct TrajectoryStage {
  std::vector<DetectorGrid> grids;
  std::map<Direction, std::vector<DetectorTrajectory>> trajectories;
  std::size_t points_in = 0, points_kept = 0, points_filtered = 0;
  std::size_t vehicles = 0, trips = 0, duplicate_timestamps = 0, short_fragment_points = 0;
  std::size_t ambiguous = 0, no_grid = 0, noisy = 0, empty = 0;
  std::map<Direction, std::size_t> trips_by_direction;
};

inline const DetectorGrid* grid_for(std::span<const DetectorGrid> grids, Direction d) {
  for (const auto& g : grids)
    if (g.direction() == d) return &g;
  return nullptr;
}

inline TrajectoryStage process_trajectories(const Inputs& in, const RunConfig& cfg) {
  TrajectoryStage st;
  for (const auto& c : in.corridors) st.grids.emplace_back(c, cfg.spacing);
  st.points_in = in.points.size();
  const auto kept = filter_corridor(in.points, in.corridors, cfg.max_offset);
  st.points_kept = kept.size();
  st.points_filtered = st.points_in - st.points_kept;

  const auto by_vehicle = group_by_vehicle(kept);
  st.vehicles = by_vehicle.size();
  std::vector<Trip> trips;
  for (const auto& [vid, pts] : by_vehicle) {
    auto seg = segment_trips(pts, cfg.gap);
    st.duplicate_timestamps += seg.duplicate_timestamps;
    st.short_fragment_points += seg.dropped_short;
    for (auto& t : seg.trips) trips.push_back(std::move(t));
  }
  st.trips = trips.size();

  const unsigned threads = resolve_threads(cfg.threads);
  std::vector<std::optional<DetectorTrajectory>> out(trips.size());
  std::vector<int> outcome(trips.size(), 0);  // 0 ok, 1 ambiguous, 2 no grid, 3 noisy, 4 empty
  parallel_for(trips.size(), threads, [&](std::size_t i) {
    Trip& t = trips[i];
    try {
      t.direction = infer_direction(t.points);
    } catch (const AmbiguousDirection&) {
      outcome[i] = 1;
      return;
    }
    const DetectorGrid* g = grid_for(st.grids, *t.direction);
    if (!g) {
      outcome[i] = 2;
      return;
    }
    try {
      auto dt = interpolate_to_detectors(t, g->corridor, g->detectors, cfg.backward_tolerance);
      if (dt.empty()) outcome[i] = 4;
      else out[i] = std::move(dt);
    } catch (const NoisyTrip&) {
      outcome[i] = 3;
    }
  });
  for (std::size_t i = 0; i < trips.size(); ++i) {
    if (trips[i].direction) ++st.trips_by_direction[*trips[i].direction];
    switch (outcome[i]) {
      case 1: ++st.ambiguous; break;
      case 2: ++st.no_grid; break;
      case 3: ++st.noisy; break;
      case 4: ++st.empty; break;
      default: st.trajectories[out[i]->direction].push_back(std::move(*out[i]));
    }
  }
  return st;
}

inline std::map<Direction, DetectorDB> build_databases(const TrajectoryStage& st, const RunConfig& cfg) {
  std::map<Direction, DetectorDB> dbs;
  for (const auto& g : st.grids) {
    auto it = st.trajectories.find(g.direction());
    static const std::vector<DetectorTrajectory> none;
    const auto& trajs = it == st.trajectories.end() ? none : it->second;
    dbs.emplace(g.direction(), build_db(g.direction(), trajs, cfg.features.tz_offset_hours, resolve_threads(cfg.threads)));
  }
  return dbs;
}

struct MatchStage {
  EventMatchResult events;
  LabelResult labels;
};

inline MatchStage match_and_label(const Inputs& in, const TrajectoryStage& st, const RunConfig& cfg) {
  MatchStage m;
  m.events = match_event_detectors(in.incidents, st.grids, cfg.max_offset);
  std::vector<DetectorTrajectory> all;
  for (const auto& [d, v] : st.trajectories) all.insert(all.end(), v.begin(), v.end());
  m.labels = label_trajectories(m.events.matched, all, cfg.labels, resolve_threads(cfg.threads));
  return m;
}

inline std::map<std::string, const DetectorTrajectory*> index_trajectories(const TrajectoryStage& st) {
  std::map<std::string, const DetectorTrajectory*> idx;
  for (const auto& [d, v] : st.trajectories)
    for (const auto& t : v) idx[t.trip_id] = &t;
  return idx;
}

// ---------------------------------------------------------------------------
// Evaluation

struct Evaluation {
  std::vector<learn::CvResult> results;
  std::vector<learn::Importance> importance;
  std::optional<learn::Hyperparameters> importance_params;
};

/// Most frequently selected grid point across folds; ties to the lower index.
inline std::size_t modal_choice(const learn::CvResult& r) {
  std::map<std::size_t, int> votes;
  for (const auto& f : r.folds) ++votes[f.best_index];
  std::size_t best = 0;
  int n = -1;
  for (const auto& [i, c] : votes)
    if (c > n) {
      best = i;
      n = c;
    }
  return best;
}

inline Evaluation evaluate(const Dataset& data, const RunConfig& cfg, std::ostream* log = nullptr) {
  Evaluation ev;
  const unsigned threads = resolve_threads(cfg.threads);
  for (auto a : cfg.algorithms) {
    const auto grid = cfg.grid(a);
    for (const auto& b : cfg.balancing) {
      learn::CvConfig cv;
      cv.folds = cfg.folds;
      cv.smote_ratio = b;
      cv.smote_k = cfg.smote_k;
      cv.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(a) + 1);
      cv.threads = threads;
      if (log) *log << "  evaluating " << to_string(a) << " / smote " << learn::balancing_label(b) << '\n' << std::flush;
      auto r = learn::grid_search_cv(grid, data, cv);
      ev.results.push_back(std::move(r));
    }
  }

  if (cfg.importance) {
    const learn::CvResult* src = nullptr;
    for (const auto& r : ev.results)
      if (r.algorithm == learn::Algorithm::random_forest && (!src || r.balancing == "1")) src = &r;
    const auto grid = cfg.grid(learn::Algorithm::random_forest);
    const learn::Hyperparameters params = src ? src->folds[modal_choice(*src)].best : grid.front();
    const Dataset train = smote(data, SmoteConfig{1.0, cfg.smote_k, derive_seed(cfg.effective_smote_seed(), 0x1A9)}).data;
    const auto model = learn::fit(learn::ModelSpec{params, derive_seed(cfg.seed, 0x1A9)}, train, threads);
    ev.importance = learn::rf_importance(model);
    ev.importance_params = params;
  }
  return ev;
}

inline json to_json(const Evaluation& ev) {
  json j;
  auto& res = j["results"] = json::array();
  for (const auto& r : ev.results) res.push_back(learn::to_json(r));
  auto& imp = j["importance"] = json::array();
  for (const auto& i : ev.importance) imp.push_back({{"feature", i.feature}, {"importance", i.importance}});
  j["importance_model"] = ev.importance_params ? learn::to_json(*ev.importance_params) : json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// Full run

struct RunReport {
  json report;
  std::vector<std::pair<std::string, std::string>> manifest;  // relative path, sha256
  Evaluation evaluation;
  Dataset dataset;
};

inline void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p, std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error(p.string() + ": write failed");
}

inline json stage_counts(const TrajectoryStage& st) {
  json j;
  j["ingest"] = {{"points_in", st.points_in}, {"vehicles", st.vehicles}};
  j["filter"] = {{"points_kept", st.points_kept}, {"points_filtered", st.points_filtered}};
  j["segment"] = {{"trips", st.trips}, {"duplicate_timestamps", st.duplicate_timestamps}, {"short_fragment_points", st.short_fragment_points}};
  json dirs;
  for (const auto& [d, n] : st.trips_by_direction) dirs[std::string(to_string(d))] = n;
  j["direction"] = {{"by_direction", dirs}, {"ambiguous", st.ambiguous}, {"no_grid", st.no_grid}};
  std::size_t n = 0;
  json per;
  for (const auto& [d, v] : st.trajectories) {
    n += v.size();
    per[std::string(to_string(d))] = v.size();
  }
  j["interpolate"] = {{"detector_trajectories", n}, {"by_direction", per}, {"noisy", st.noisy}, {"outside_grid", st.empty}};
  return j;
}

/// Runs every stage, writing intermediates into out_dir. Inputs are resolved
/// relative to input_dir when their paths are relative.
inline RunReport run_pipeline(const RunConfig& cfg, const fs::path& input_dir, const fs::path& out_dir, std::ostream* log = nullptr) {
  cfg.validate();
  DirectoryLock lock(out_dir);
  RunReport rr;
  json& rep = rr.report;
  std::vector<std::string> files;
  auto manifest = [&] {
    rr.manifest.clear();
    for (const auto& f : files) rr.manifest.push_back({f, sha256_file(out_dir / f)});
    json m = json::array();
    for (const auto& [f, h] : rr.manifest) m.push_back({{"file", f}, {"sha256", h}});
    return m;
  };
  auto say = [&](const char* s) {
    if (log) *log << s << '\n' << std::flush;
  };

  try {
    rep["config"] = cfg.to_json();
    say("ingest");
    const Inputs in = run_stage("ingest", [&] { return load_inputs(cfg, input_dir); });
    rep["projection"] = in.projection ? in.projection->to_json() : json(nullptr);

    say("trajectories");
    const TrajectoryStage st = run_stage("trajectories", [&] { return process_trajectories(in, cfg); });
    rep["stages"] = stage_counts(st);
    run_stage("trajectories", [&] {
      io::write_detector_grid((out_dir / "detectors.csv").string(), st.grids);
      files.push_back("detectors.csv");
      for (const auto& g : st.grids) {
        const std::string name = "detector_trajectories_" + std::string(to_string(g.direction())) + ".csv";
        auto it = st.trajectories.find(g.direction());
        io::write_detector_trajectories((out_dir / name).string(), it == st.trajectories.end() ? std::span<const DetectorTrajectory>{}
                                                                                               : std::span<const DetectorTrajectory>(it->second));
        files.push_back(name);
      }
      return 0;
    });

    say("database");
    const auto dbs = run_stage("database", [&] {
      auto d = build_databases(st, cfg);
      std::vector<DetectorDB> v;
      for (const auto& [dir, db] : d) v.push_back(db);
      io::write_detector_db((out_dir / "detector_db.csv").string(), v);
      files.push_back("detector_db.csv");
      return d;
    });
    {
      json db;
      for (const auto& [d, x] : dbs) db[std::string(to_string(d))] = {{"cells", x.cells().size()}, {"passes", x.total_count()}};
      rep["stages"]["database"] = db;
    }

    say("matching");
    const MatchStage m = run_stage("matching", [&] {
      auto r = match_and_label(in, st, cfg);
      io::write_samples((out_dir / "samples.csv").string(), r.labels.samples);
      files.push_back("samples.csv");
      return r;
    });
    {
      std::map<std::string, std::size_t> reasons;
      for (const auto& d : m.labels.discarded) ++reasons[d.reason];
      for (const auto& d : m.events.discarded) ++reasons["incident_" + d.reason];
      json mult;
      for (const auto& [k, v] : m.labels.multiplicity) mult[std::to_string(k)] = v;
      rep["stages"]["matching"] = {{"incidents", in.incidents.size()},
                                   {"incidents_matched", m.events.matched.size()},
                                   {"pairs_examined", m.labels.pairs_examined},
                                   {"affected", m.labels.affected},
                                   {"normal", m.labels.normal},
                                   {"discarded", reasons},
                                   {"trajectories_with_samples", m.labels.trajectories_with_samples},
                                   {"trajectories_affected", m.labels.trajectories_affected},
                                   {"samples_per_trajectory", mult}};
      rep["incident_summary"] = to_json(incident_summary(in.incidents));
    }

    say("features");
    auto build = run_stage("features", [&] {
      const auto idx = index_trajectories(st);
      auto b = build_dataset(m.labels.samples, idx, dbs, in.weather, cfg.features);
      io::write_dataset((out_dir / "dataset.csv").string(), b.data);
      files.push_back("dataset.csv");
      return b;
    });
    {
      json cols = json::array();
      for (const auto& c : build.summary)
        cols.push_back({{"feature", c.name}, {"mean", c.mean}, {"std", c.std}, {"min", c.min}, {"max", c.max}});
      rep["stages"]["features"] = {{"rows", build.data.rows()},
                                   {"affected", build.data.count_positive()},
                                   {"normal", build.data.rows() - build.data.count_positive()},
                                   {"missing_weather", build.warnings.missing_weather},
                                   {"historical_fallbacks", build.warnings.historical_fallbacks},
                                   {"summary", cols}};
    }

    say("evaluation");
    rr.evaluation = run_stage("evaluation", [&] { return evaluate(build.data, cfg, log); });
    rep["evaluation"] = to_json(rr.evaluation);
    run_stage("evaluation", [&] {
      fs::create_directories(out_dir / "roc");
      for (const auto& r : rr.evaluation.results)
        for (const auto& f : r.folds) {
          const std::string name = "roc/" + std::string(to_string(r.algorithm)) + "_smote-" + r.balancing + "_fold" + std::to_string(f.fold) + ".csv";
          io::write_roc((out_dir / name).string(), f.roc);
          files.push_back(name);
        }
      if (!rr.evaluation.importance.empty()) {
        io::CsvWriter w((out_dir / "importance.csv").string(), {"feature", "importance"});
        for (const auto& i : rr.evaluation.importance) w.row(i.feature, i.importance);
        w.close();
        files.push_back("importance.csv");
      }
      return 0;
    });
    rr.dataset = std::move(build.data);

    rep["files"] = manifest();
    write_json(out_dir / "report.json", rep);
    files.push_back("report.json");
    write_json(out_dir / "manifest.json", manifest());
  } catch (const StageError& e) {
    json partial;
    partial["failed_stage"] = e.stage;
    partial["error"] = e.what();
    partial["files"] = manifest();
    write_json(out_dir / "manifest.json", partial);
    throw;
  }
  return rr;
}

// ---------------------------------------------------------------------------
// Synthetic bundle files

inline void write_bundle(const ScenarioBundle& b, const fs::path& dir, bool geographic = true) {
  fs::create_directories(dir);
  std::optional<LocalProjection> proj;
  if (geographic) proj.emplace(b.config.origin);
  const LocalProjection* p = proj ? &*proj : nullptr;
  io::write_corridor((dir / "corridor.csv").string(), b.corridors, p);
  io::write_trajectories((dir / "trajectories.csv").string(), b.points, p);
  io::write_incidents((dir / "incidents.csv").string(), b.incidents, p);
  io::write_weather((dir / "weather.csv").string(), b.weather);
  io::write_ground_truth((dir / "ground_truth.csv").string(), b.ground_truth);
  json j;
  j["config"] = to_json(b.config);
  j["points"] = b.points.size();
  j["trips"] = b.trips;
  j["ground_truth"] = b.ground_truth.size();
  std::size_t aff = 0;
  for (const auto& g : b.ground_truth) aff += g.label == Label::affected ? 1 : 0;
  j["ground_truth_affected"] = aff;
  write_json(dir / "scenario.json", j);
}

// ---------------------------------------------------------------------------
// Plot data

/// Writes plot-ready CSVs from a finished run directory.
inline std::vector<std::string> emit_plots(const fs::path& run_dir, const fs::path& out_dir, int profile_before = 20, int profile_after = 4) {
  auto need = [&](const char* f) {
    const auto p = run_dir / f;
    if (!fs::exists(p)) throw std::runtime_error("plot-data: missing intermediate " + p.string());
    return p;
  };
  json rep;
  {
    std::ifstream in(need("report.json"));
    rep = json::parse(in);
  }
  fs::create_directories(out_dir);
  std::vector<std::string> written;
  auto path = [&](const std::string& f) {
    written.push_back(f);
    return (out_dir / f).string();
  };

  // Incident attributes.
  {
    io::CsvWriter w(path("incident_durations.csv"), {"from_min", "to_min", "count"});
    for (const auto& b : rep["incident_summary"]["duration_minutes"]) w.row(b["from_min"].get<int>(), b["to_min"].get<int>(), b["count"].get<std::size_t>());
    w.close();
    io::CsvWriter a(path("incident_attributes.csv"), {"attribute", "value", "count"});
    for (const char* key : {"by_kind", "by_direction", "by_lanes_closed"})
      for (const auto& [k, v] : rep["incident_summary"][key].items()) a.row(std::string(key).substr(3), k, v.get<std::size_t>());
    a.close();
  }

  // Detector profile.
  const double spacing = rep["config"]["spacing"].get<double>();
  const auto dbs = io::read_detector_db(need("detector_db.csv").string());
  {
    io::CsvWriter w(path("detector_profile.csv"), {"direction", "detector_id", "chainage_yd", "period", "count", "mean_speed"});
    for (const auto& [d, db] : dbs)
      for (const auto& [k, s] : db.cells()) w.row(to_string(d), s.detector_id, s.detector_id * spacing, to_string(s.period), s.count, s.mean_speed);
    w.close();
  }

  // Speed profile around the event detector by label.
  {
    const auto samples = io::read_samples(need("samples.csv").string());
    std::map<std::string, std::vector<DetectorTrajectory>> trajs;
    for (const char* d : {"EB", "WB"}) {
      const auto p = run_dir / ("detector_trajectories_" + std::string(d) + ".csv");
      if (fs::exists(p))
        for (auto& t : io::read_detector_trajectories(p.string(), parse_direction(d))) trajs[t.trip_id].push_back(std::move(t));
    }
    std::map<std::pair<int, Label>, std::pair<double, std::size_t>> acc;
    for (const auto& s : samples) {
      auto it = trajs.find(s.trip_id);
      if (it == trajs.end()) throw std::runtime_error("plot-data: sample references unknown trajectory " + s.trip_id);
      const auto& t = it->second.front();
      for (int k = -profile_before; k <= profile_after; ++k)
        if (const auto* p = t.pass_at(s.event_detector_id + k)) {
          auto& a = acc[{k, s.label}];
          a.first += p->speed;
          ++a.second;
        }
    }
    io::CsvWriter w(path("speed_profile.csv"), {"relative_detector", "label", "mean_speed", "passes"});
    for (const auto& [key, a] : acc) w.row(key.first, to_string(key.second), a.first / static_cast<double>(a.second), a.second);
    w.close();
  }

  // Metrics and importance.
  {
    io::CsvWriter w(path("model_metrics.csv"), {"algorithm", "balancing", "recall_mean", "recall_std", "far_mean", "far_std", "auc_mean",
                                                "auc_std", "threshold_mean"});
    for (const auto& r : rep["evaluation"]["results"])
      w.row(r["algorithm"].get<std::string>(), r["balancing"].get<std::string>(), r["recall"]["mean"].get<double>(),
            r["recall"]["std"].get<double>(), r["far"]["mean"].get<double>(), r["far"]["std"].get<double>(), r["auc"]["mean"].get<double>(),
            r["auc"]["std"].get<double>(), r["threshold"]["mean"].get<double>());
    w.close();
    io::CsvWriter im(path("feature_importance.csv"), {"feature", "importance"});
    for (const auto& i : rep["evaluation"]["importance"]) im.row(i["feature"].get<std::string>(), i["importance"].get<double>());
    im.close();
  }
  return written;
}

}  // namespace vdet
