#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "interlace/capacity.hpp"
#include "interlace/connectivity.hpp"
#include "interlace/harness/config.hpp"
#include "interlace/harness/exploration.hpp"
#include "interlace/sample_io.hpp"
#include "interlace/sampler.hpp"
#include "interlace/scheme.hpp"
#include "interlace/stats.hpp"
#include "interlace/tree_sum.hpp"
#include "interlace/walk.hpp"

namespace interlace::harness {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Tables

inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}
inline std::string fmt(long long x) { return std::to_string(x); }
inline std::string fmt(int x) { return std::to_string(x); }
inline std::string fmt(std::size_t x) { return std::to_string(x); }
inline std::string fmt(bool x) { return x ? "1" : "0"; }
inline std::string fmt(const std::string& s) { return s; }
inline std::string fmt(const char* s) { return s; }

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  template <typename... Ts>
  void add(const Ts&... xs) {
    std::vector<std::string> r{fmt(xs)...};
    if (r.size() != columns.size())
      throw std::logic_error("table " + name + ": row of " + std::to_string(r.size()) + " cells, " +
                             std::to_string(columns.size()) + " columns");
    for (const auto& c : r)
      if (c.find_first_of(",\n") != std::string::npos) throw std::logic_error("table " + name + ": cell holds a separator");
    rows.push_back(std::move(r));
  }
  std::size_t column(const std::string& c) const {
    auto it = std::find(columns.begin(), columns.end(), c);
    if (it == columns.end()) throw std::out_of_range("no column " + c + " in " + name);
    return std::size_t(it - columns.begin());
  }
  double number(std::size_t row, const std::string& c) const { return std::stod(rows[row][column(c)]); }

  void write(std::ostream& os, const ExperimentConfig& cfg) const {
    os << "# interlace " << name << "\n# config_hash: " << config_hash(cfg) << "\n# config: " << to_json(cfg).dump()
       << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
    os << "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
      os << "\n";
    }
  }
};

/// Where tables and JSONL go: files under `dir`, or (tables only) a stream.
struct Output {
  std::optional<fs::path> dir;
  std::ostream* stream = nullptr;

  void emit(const Table& t, const ExperimentConfig& cfg) const {
    if (dir) {
      fs::create_directories(*dir);
      std::ofstream f(*dir / (t.name + ".csv"), std::ios::trunc);
      t.write(f, cfg);
      if (!f) throw std::runtime_error("cannot write " + (*dir / (t.name + ".csv")).string());
    } else if (stream) {
      t.write(*stream, cfg);
    }
  }
};

// ---------------------------------------------------------------------------
// Resumable per-replica records

struct ResultLog {
  fs::path path;
  std::string hash;
  std::map<std::uint64_t, nlohmann::json> done;

  /// Reads complete records with the same config hash; rewrites the file without a torn tail.
  static ResultLog open(const fs::path& p, const std::string& hash) {
    ResultLog log{p, hash, {}};
    if (!fs::exists(p)) return log;
    std::ifstream in(p);
    std::string line;
    std::vector<std::string> good;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error&) {
        break;
      }
      if (j.value("config_hash", "") != hash)
        throw ConfigError("--out", p.string() + " holds results of a different config (hash " +
                                       j.value("config_hash", "?") + ", now " + hash + ")");
      log.done[j.at("replica").get<std::uint64_t>()] = j;
      good.push_back(line);
    }
    in.close();
    std::ofstream out(p, std::ios::trunc);
    for (const auto& g : good) out << g << "\n";
    return log;
  }

  void append(const nlohmann::json& rec) {
    std::ofstream out(path, std::ios::app);
    out << rec.dump() << "\n";
    out.flush();
    done[rec.at("replica").get<std::uint64_t>()] = rec;
  }
};

/// Runs `work(replica)` for every replica not already logged, on `threads` workers.
/// `work` returns the record and an optional payload written (before the record) by `persist`.
template <typename Work, typename Persist>
void for_each_replica(int replicas, int threads, ResultLog* log, Work&& work, Persist&& persist,
                      std::map<std::uint64_t, nlohmann::json>& results) {
  std::vector<std::uint64_t> todo;
  for (int r = 0; r < replicas; ++r) {
    if (log && log->done.count(std::uint64_t(r))) {
      results[std::uint64_t(r)] = log->done[std::uint64_t(r)];
      continue;
    }
    todo.push_back(std::uint64_t(r));
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr failure;
  auto worker = [&]() {
    while (true) {
      std::uint64_t r;
      {
        std::lock_guard<std::mutex> g(mu);
        if (next >= todo.size() || failure) return;
        r = todo[next++];
      }
      try {
        auto [rec, payload] = work(r);
        std::lock_guard<std::mutex> g(mu);
        persist(r, payload);
        if (log) log->append(rec);
        results[r] = rec;
      } catch (...) {
        std::lock_guard<std::mutex> g(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

inline nlohmann::json record(const ExperimentConfig& cfg, std::uint64_t replica) {
  return {{"record", "result"}, {"config_hash", config_hash(cfg)}, {"replica", replica}};
}

// ---------------------------------------------------------------------------
// Sets and placements

/// "empty", "point", "ball:R" or "box:e1xe2x..." (centered at the origin).
inline FiniteSet make_set(const std::string& spec, int d) {
  if (spec == "empty") return FiniteSet(d);
  if (spec == "point") return FiniteSet(d, {Point::origin(d)});
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  try {
    if (kind == "ball") return FiniteSet::ball(Point::origin(d), std::stoi(arg));
    if (kind == "box") {
      std::vector<int> e;
      std::stringstream ss(arg);
      for (std::string tok; std::getline(ss, tok, 'x');) e.push_back(std::stoi(tok));
      if (int(e.size()) != d) throw ConfigError("config.capacity.sets", spec + " needs " + std::to_string(d) + " extents");
      FiniteSet s(d);
      Point p(d);
      std::function<void(int)> rec = [&](int a) {
        if (a == d) {
          s.insert(p);
          return;
        }
        for (int v = 0; v < e[a]; ++v) {
          p[a] = v - (e[a] - 1) / 2;
          rec(a + 1);
        }
      };
      rec(0);
      return s;
    }
  } catch (const std::invalid_argument&) {
  }
  throw ConfigError("config.capacity.sets", "cannot parse set " + spec);
}

inline FiniteSet window_of(const ExperimentConfig& c) {
  if (c.window.shape == "ball") return FiniteSet::ball(Point::origin(c.d), c.window.radius);
  std::string spec = "box:";
  for (std::size_t i = 0; i < c.window.extents.size(); ++i) spec += (i ? "x" : "") + std::to_string(c.window.extents[i]);
  return make_set(spec, c.d);
}

inline std::vector<Point> marked_points(const ExperimentConfig& c) {
  const auto& p = c.placement;
  if (!p.points.empty()) {
    std::vector<Point> out;
    for (const auto& q : p.points) out.push_back(Point(q));
    return out;
  }
  return antipodal_points(c.d, p.distance, p.k);
}

// ---------------------------------------------------------------------------
// capacity

inline Table run_capacity(const ExperimentConfig& cfg) {
  Table t{"capacity", {"set", "points", "backend", "value", "std_error", "truncation"}, {}};
  const Backend b = cfg.capacity.backend == "exact" ? Backend::exact : Backend::mc;
  for (std::size_t i = 0; i < cfg.capacity.sets.size(); ++i) {
    const auto& spec = cfg.capacity.sets[i];
    const FiniteSet K = make_set(spec, cfg.d);
    CapacityParams p;
    p.truncation = cfg.truncation;
    p.samples_per_point = cfg.capacity.samples;
    RngStream rng(cfg.seed, i);
    const auto c = capacity(K, b, p, rng);
    t.add(spec, K.size(), backend_name(b), c.value, c.std_error, c.truncation_radius);
  }
  return t;
}

/// Keeps only complete groups of finished replicas, in file order.
inline void prune_sample_file(const fs::path& p, const std::map<std::uint64_t, nlohmann::json>& done) {
  if (!fs::exists(p)) return;
  std::ifstream in(p);
  std::vector<std::string> keep;
  std::string line;
  std::vector<std::string> group;
  std::optional<std::uint64_t> current;
  std::size_t expected = 0;
  auto flush = [&]() {
    if (current && done.count(*current)) keep.insert(keep.end(), group.begin(), group.end());
    group.clear();
    current.reset();
  };
  // a group is the header plus everything up to the next header of the same record kind
  std::string kind;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      break;
    }
    const std::string rec = j.value("record", "");
    if (kind.empty() && (rec == "replica" || rec == "sample")) kind = rec;
    if (rec == kind) {
      flush();
      current = j.at("replica").get<std::uint64_t>();
    }
    group.push_back(line);
  }
  (void)expected;
  flush();  // a finished replica's payload was written before its result record, so it is whole
  in.close();
  std::ofstream outf(p, std::ios::trunc);
  for (const auto& l : keep) outf << l << "\n";
}

// ---------------------------------------------------------------------------
// sample

inline SamplerParams sampler_params(const ExperimentConfig& c) {
  SamplerParams p;
  p.mode = c.entry == "equilibrium" ? EntryMode::equilibrium : EntryMode::thinning;
  p.truncation = c.truncation;
  p.observation_radius = c.observation_radius;
  p.leg_length = c.leg_length;
  return p;
}

/// One process sample per replica; samples go to `<out>/sample_samples.jsonl`.
inline Table run_sample(const ExperimentConfig& cfg, const Output& out, std::ostream* jsonl = nullptr) {
  Table t{"sample", {"replica", "trajectories", "expected_count", "rejected_legs", "window_points"}, {}};
  HittingProcessSampler sampler(window_of(cfg), sampler_params(cfg));
  std::optional<ResultLog> log;
  fs::path samples;
  if (out.dir) {
    fs::create_directories(*out.dir);
    log = ResultLog::open(*out.dir / "sample_results.jsonl", config_hash(cfg));
    samples = *out.dir / "sample_samples.jsonl";
    prune_sample_file(samples, log->done);
  }
  std::map<std::uint64_t, nlohmann::json> results;
  for_each_replica(
      cfg.replicas, cfg.threads, log ? &*log : nullptr,
      [&](std::uint64_t r) {
        const auto t0 = std::chrono::steady_clock::now();
        auto s = sampler.sample(cfg.u, RngStream(cfg.seed, r));
        auto rec = record(cfg, r);
        rec["trajectories"] = s.trajectories.size();
        rec["expected_count"] = s.expected_count;
        rec["rejected_legs"] = s.rejected_legs;
        if (cfg.record_timing)
          rec["timing_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        std::ostringstream os;
        write_sample_jsonl(os, s, r);
        return std::pair{rec, os.str()};
      },
      [&](std::uint64_t, const std::string& payload) {
        if (out.dir) {
          std::ofstream f(samples, std::ios::app);
          f << payload;
          f.flush();
        } else if (jsonl) {
          *jsonl << payload;
        }
      },
      results);
  for (const auto& [r, rec] : results)
    t.add(r, rec.at("trajectories").get<std::size_t>(), rec.at("expected_count").is_null() ? std::nan("") : rec.at("expected_count").get<double>(),
          rec.at("rejected_legs").get<std::size_t>(), sampler.window().size());
  return t;
}

// ---------------------------------------------------------------------------
// connect

struct ReplicaSamples {
  std::uint64_t replica = 0;
  nlohmann::json header;
  std::vector<InterlacementSample> layers;
  TrajectorySet trajectories() const {
    TrajectorySet ts;
    for (const auto& s : layers)
      for (const auto& t : s.trajectories) ts.push_back(&t);
    return ts;
  }
  std::vector<Point> marked() const {
    std::vector<Point> out;
    for (const auto& p : header.at("marked")) out.push_back(Point(p.get<std::vector<int>>()));
    return out;
  }
};

/// Reads replica groups (a "replica" line followed by its layer samples); stops at a torn tail.
inline std::vector<ReplicaSamples> read_replica_samples(std::istream& in) {
  std::vector<ReplicaSamples> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ReplicaSamples g;
    try {
      g.header = nlohmann::json::parse(line);
      if (g.header.at("record") != "replica") break;
      g.replica = g.header.at("replica").get<std::uint64_t>();
      const auto n = g.header.at("layers").get<std::size_t>();
      for (std::size_t i = 0; i < n; ++i) {
        InterlacementSample s;
        if (!read_sample_jsonl(in, s)) throw ContractError("missing layer");
        g.layers.push_back(std::move(s));
      }
    } catch (const std::exception&) {
      break;
    }
    out.push_back(std::move(g));
  }
  return out;
}

inline std::string replica_samples_jsonl(std::uint64_t r, const Exploration& ex) {
  std::ostringstream os;
  nlohmann::json h{{"record", "replica"}, {"replica", r}, {"layers", ex.layers.size()}, {"attempts", ex.attempts}};
  auto& m = h["marked"] = nlohmann::json::array();
  for (const auto& x : ex.marked) m.push_back(x.coords());
  os << h.dump() << "\n";
  for (std::size_t i = 0; i < ex.layers.size(); ++i) {
    if (i == 0) {
      write_sample_jsonl(os, ex.layers[i], r);
    } else {
      // deeper windows are the previous layer's traces; not stored
      InterlacementSample s = ex.layers[i];
      s.window = FiniteSet(s.dim());
      write_sample_jsonl(os, s, r);
    }
  }
  return os.str();
}

struct ConnectOutcome {
  std::optional<int> shared, adjacent;
  std::vector<std::uint64_t> witness_shared, witness_adjacent;
};

inline ConnectOutcome evaluate_connect(const TrajectorySet& ts, const std::vector<Point>& x, int limit, bool shared,
                                       bool adjacent) {
  ConnectOutcome o;
  if (shared) {
    auto r = min_connect(ts, x, limit, Adjacency::shared_vertex);
    o.shared = r.value;
    if (r.witness) o.witness_shared = r.witness->ids;
  }
  if (adjacent) {
    auto r = min_connect(ts, x, limit, Adjacency::lattice_adjacent);
    o.adjacent = r.value;
    if (r.witness) o.witness_adjacent = r.witness->ids;
  }
  return o;
}

inline ExplorationParams exploration_params(const ExperimentConfig& cfg) {
  ExplorationParams p;
  p.u = cfg.u;
  const auto x = marked_points(cfg);
  int spread = 1;
  for (const auto& q : x) spread = std::max(spread, l1_norm(q));
  p.observation_radius = cfg.observation_radius > 0 ? cfg.observation_radius : 2 * spread;
  p.truncation = cfg.truncation;
  p.leg_length = cfg.leg_length;
  p.mode = cfg.both_modes || cfg.mode == Adjacency::lattice_adjacent ? Adjacency::lattice_adjacent
                                                                      : Adjacency::shared_vertex;
  p.layers = std::max(0, cfg.limit - 2);
  p.condition = cfg.placement.rule == "conditioned";
  p.retry_budget = cfg.retry_budget;
  return p;
}

struct ConnectTables {
  Table rows, summary;
};

inline ConnectTables connect_tables(const ExperimentConfig& cfg, const std::map<std::uint64_t, nlohmann::json>& results) {
  const auto x = marked_points(cfg);
  const int k = int(x.size());
  const int nk = k >= 2 ? n_kd(k, cfg.d) : 1;
  ConnectTables out{{"connect",
                     {"replica", "k", "observation_radius", "trajectories", "attempts", "min_shared", "min_adjacent",
                      "n_kd", "primary_below_nkd"},
                     {}},
                    {"connect_summary", {"mode", "threshold", "successes", "trials", "p", "wilson_low", "wilson_high"}, {}}};
  std::size_t below[2] = {0, 0}, within[2] = {0, 0}, trials = 0;
  auto cell = [](const nlohmann::json& v) { return v.is_null() ? std::string("exceeds") : std::to_string(v.get<int>()); };
  for (const auto& [r, rec] : results) {
    const auto& sh = rec.at("min_shared");
    const auto& ad = rec.at("min_adjacent");
    const auto& primary = cfg.mode == Adjacency::shared_vertex ? sh : ad;
    const bool is_below = !primary.is_null() && primary.get<int>() <= nk - 1;
    out.rows.add(r, k, rec.at("observation_radius").get<int>(), rec.at("trajectories").get<std::size_t>(),
                 rec.at("attempts").get<std::size_t>(), rec.contains("shared_skipped") ? std::string("skipped") : cell(sh),
                 rec.contains("adjacent_skipped") ? std::string("skipped") : cell(ad), nk, is_below);
    ++trials;
    for (int m = 0; m < 2; ++m) {
      const auto& v = m == 0 ? sh : ad;
      if (v.is_null()) continue;
      below[m] += v.get<int>() <= nk - 1;
      within[m] += v.get<int>() <= nk;
    }
  }
  for (int m = 0; m < 2; ++m) {
    if (!cfg.both_modes && (m == 0) != (cfg.mode == Adjacency::shared_vertex)) continue;
    const char* name = m == 0 ? "shared" : "adjacent";
    for (int which = 0; which < 2; ++which) {
      const std::size_t s = which == 0 ? below[m] : within[m];
      const auto [lo, hi] = stats::wilson(s, trials);
      out.summary.add(name, std::string(which == 0 ? "<=n_kd-1" : "<=n_kd"), s, trials,
                      trials ? double(s) / double(trials) : 0.0, lo, hi);
    }
  }
  return out;
}

/// Min-connect per replica over a layered exploration around the marked points.
inline ConnectTables run_connectivity(const ExperimentConfig& cfg, const Output& out) {
  if (cfg.d < 5) throw ConfigError("config.d", "connectivity experiments compare with n(k,d) and need d >= 5");
  const auto x = marked_points(cfg);
  const auto ep = exploration_params(cfg);
  const bool shared = cfg.both_modes || cfg.mode == Adjacency::shared_vertex;
  const bool adjacent = cfg.both_modes || cfg.mode == Adjacency::lattice_adjacent;
  std::optional<ResultLog> log;
  fs::path samples;
  if (out.dir) {
    fs::create_directories(*out.dir);
    log = ResultLog::open(*out.dir / "connect_results.jsonl", config_hash(cfg));
    samples = *out.dir / "connect_samples.jsonl";
    prune_sample_file(samples, log->done);
  }
  std::map<std::uint64_t, nlohmann::json> results;
  for_each_replica(
      cfg.replicas, cfg.threads, log ? &*log : nullptr,
      [&](std::uint64_t r) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto ex = explore(x, ep, RngStream(cfg.seed, r));
        const auto o = evaluate_connect(ex.trajectories(), x, cfg.limit, shared, adjacent);
        auto rec = record(cfg, r);
        rec["observation_radius"] = ep.observation_radius;
        rec["trajectories"] = ex.size();
        rec["attempts"] = ex.attempts;
        rec["acceptance_rate"] = 1.0 / double(ex.attempts);
        rec["layers"] = ex.layers.size();
        rec["min_shared"] = o.shared ? nlohmann::json(*o.shared) : nlohmann::json();
        rec["min_adjacent"] = o.adjacent ? nlohmann::json(*o.adjacent) : nlohmann::json();
        if (!shared) rec["shared_skipped"] = true;
        if (!adjacent) rec["adjacent_skipped"] = true;
        rec["witness_shared"] = o.witness_shared;
        rec["witness_adjacent"] = o.witness_adjacent;
        if (cfg.record_timing)
          rec["timing_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        return std::pair{rec, replica_samples_jsonl(r, ex)};
      },
      [&](std::uint64_t, const std::string& payload) {
        if (!out.dir) return;
        std::ofstream f(samples, std::ios::app);
        f << payload;
        f.flush();
      },
      results);
  auto tables = connect_tables(cfg, results);
  out.emit(tables.rows, cfg);
  out.emit(tables.summary, cfg);
  return tables;
}

/// Recomputes min-connect values from persisted samples.
inline Table replay_connectivity(const ExperimentConfig& cfg, std::istream& samples) {
  Table t{"connect_replay", {"replica", "min_shared", "min_adjacent"}, {}};
  auto cell = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string("exceeds"); };
  for (const auto& g : read_replica_samples(samples)) {
    const auto o = evaluate_connect(g.trajectories(), g.marked(), cfg.limit, true, true);
    t.add(g.replica, cell(o.shared), cell(o.adjacent));
  }
  return t;
}

// ---------------------------------------------------------------------------
// cascade

struct CascadeTables {
  Table rows, fit;
};

inline CascadeTables run_cascade(const ExperimentConfig& cfg, const Output& out) {
  if (cfg.d < 5) throw ConfigError("config.d", "cascade experiments need d >= 5");
  const auto& cs = cfg.cascade;
  CascadeTables t{{"cascade", {"R", "depth", "replica", "points", "cap", "std_error", "truncation"}, {}},
                  {"cascade_fit", {"depth", "slope", "slope_std_error", "expected_slope", "radii"}, {}}};
  std::map<int, std::vector<double>> means;
  for (int R : cs.radii) {
    double sum = 0;
    for (int r = 0; r < cfg.replicas; ++r) {
      RngStream rng = RngStream(cfg.seed, std::uint64_t(r)).split(std::uint64_t(R));
      const std::size_t need = std::size_t(R) * std::size_t(R) / 8;
      std::size_t steps = 2 * std::size_t(R) * std::size_t(R) + need + 16;
      FiniteSet A(cfg.d);
      Point y0(cfg.d);
      PathSegment X;
      while (true) {
        RngStream walk = rng.split(steps);
        X = srw_path(Point::origin(cfg.d), steps, walk);
        try {
          A = first_cascade_set(X, R, &y0);
          break;
        } catch (const ContractError&) {
          steps *= 2;
        }
      }
      if (cs.depth > 1) {
        SamplerParams base;
        A = cascade_sampled(X, R, cs.inner, cs.depth, cs.u_bar, base, rng.split(1));
        if (!A.empty()) y0 = A.center();
      }
      CapacityParams cp;
      cp.center = y0;
      cp.truncation = cs.truncation_factor * std::max(R, A.empty() ? 1 : A.radius_about(y0) + 1);
      RngStream mc = rng.split(2);
      const auto c = capacity_uniform_mc(A, cs.walks, cp, mc);
      t.rows.add(R, cs.depth, r, A.size(), c.value, c.std_error, cp.truncation);
      sum += c.value;
    }
    means[cs.depth].push_back(sum / cfg.replicas);
  }
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < cs.radii.size(); ++i)
    if (means[cs.depth][i] > 0) {
      xs.push_back(cs.radii[i]);
      ys.push_back(means[cs.depth][i]);
    }
  const double expected = std::min(cfg.d - 2, 2 * cs.depth);
  if (xs.size() >= 2) {
    const auto f = stats::loglog_fit(xs, ys);
    t.fit.add(cs.depth, f.slope, f.slope_std_error, expected, int(xs.size()));
  } else {
    t.fit.add(cs.depth, std::nan(""), std::nan(""), expected, int(xs.size()));
  }
  out.emit(t.rows, cfg);
  out.emit(t.fit, cfg);
  return t;
}

// ---------------------------------------------------------------------------
// tree-sum

inline LengthedTree fixture_tree(const TreeFixture& f) {
  if (f.scheme) {
    const auto& s = *f.scheme;
    auto cat = enumerate_schemes(s[0], s[1]);
    if (s[2] < 0 || std::size_t(s[2]) >= cat.count())
      throw ConfigError("config.tree_sum.fixtures.scheme", "index out of range for " + std::to_string(cat.count()) + " schemes");
    return lengthed_from_scheme(cat.schemes[std::size_t(s[2])], f.length);
  }
  LengthedTree t;
  t.k = f.k;
  t.m = f.m;
  for (const auto& e : f.edges) t.edges.push_back({int(e[0]), int(e[1]), e[2]});
  return t;
}

/// Anchor positions at separation r: two anchors at -floor(r/2) e1 and r e1 further;
/// otherwise anchor 1 at the origin and anchor i at r e_(i-2), wrapping around the axes.
inline std::vector<Point> fixture_leaves(int k, int d, int r) {
  std::vector<Point> x;
  if (k == 2) return antipodal_points(d, r, 2);
  x.push_back(Point::origin(d));
  for (int i = 2; i <= k; ++i) {
    Point p(d);
    p[(i - 2) % d] = r * (1 + (i - 2) / d);
    x.push_back(p);
  }
  return x;
}

inline std::vector<TreeFixture> default_fixtures() {
  TreeFixture edge{"single_edge", 2, 0, {{1, 2, 2}}, std::nullopt, 2, {4, 8, 16, 32}, 2};
  TreeFixture star{"one_internal", 2, 1, {{1, 3, 2}, {3, 2, 2}}, std::nullopt, 2, {2, 4, 8}, 8};
  return {edge, star};
}

inline Table run_tree_sum(const ExperimentConfig& cfg, const Output& out) {
  Table t{"tree_sum",
          {"fixture", "separation", "truncation", "value", "tail_estimate", "divergent", "growth_exponent",
           "bound_exponent"},
          {}};
  const auto fixtures = cfg.tree_sum.fixtures.empty() ? default_fixtures() : cfg.tree_sum.fixtures;
  for (const auto& f : fixtures) {
    const auto tree = fixture_tree(f);
    for (int r : f.separations) {
      const auto x = fixture_leaves(tree.k, cfg.d, r);
      int spread = 0;
      for (const auto& a : x)
        for (const auto& b : x) spread = std::max(spread, l1_distance(a, b));
      const int rho = std::max(f.truncation_factor, f.truncation_factor * spread);
      TreeSumOptions opt;
      opt.eps = cfg.tree_sum.eps;
      const auto rep = tree_sum(tree, x, rho, cfg.d, opt);
      t.add(f.name, r, rho, rep.value, rep.tail_estimate, rep.divergent, rep.growth_exponent, rep.bound_exponent);
    }
  }
  out.emit(t, cfg);
  return t;
}

// ---------------------------------------------------------------------------
// verify-nkd and schemes

inline Table run_verify_nkd(const ExperimentConfig& cfg, const Output& out) {
  Table t{"nkd", {"k", "d", "n_kd"}, {}};
  for (int d = cfg.nkd.d_min; d <= cfg.nkd.d_max; ++d)
    for (int k = cfg.nkd.k_min; k <= cfg.nkd.k_max; ++k) t.add(k, d, n_kd(k, d));
  out.emit(t, cfg);
  return t;
}

inline nlohmann::json run_schemes(const ExperimentConfig& cfg, const Output& out) {
  const auto cat = enumerate_schemes(cfg.schemes.k, cfg.schemes.n);
  nlohmann::json j;
  j["k"] = cat.k;
  j["n"] = cat.n;
  j["count"] = cat.count();
  j["oriented_count"] = cat.oriented_count();
  j["iso_classes"] = cat.iso_classes ? nlohmann::json(*cat.iso_classes) : nlohmann::json();
  std::size_t valid = 0;
  auto& arr = j["schemes"] = nlohmann::json::array();
  for (const auto& s : cat.schemes) {
    valid += bool(validate_scheme(s));
    arr.push_back(scheme_json(s));
  }
  j["valid"] = valid;
  j["config_hash"] = config_hash(cfg);
  Table t{"schemes", {"k", "n", "count", "oriented_count", "iso_classes", "valid"}, {}};
  t.add(cat.k, cat.n, cat.count(), std::uint64_t(cat.oriented_count()),
        cat.iso_classes ? std::to_string(*cat.iso_classes) : std::string("na"), valid);
  out.emit(t, cfg);
  if (out.dir) {
    std::ofstream f(*out.dir / "schemes.json", std::ios::trunc);
    f << j.dump(2) << "\n";
  }
  return j;
}

}  // namespace interlace::harness
