#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "interlace/connectivity.hpp"
#include "interlace/errors.hpp"
#include "interlace/lattice.hpp"

namespace interlace::harness {

using nlohmann::json;

/// Environment variable that overrides the master seed (and nothing else).
inline constexpr const char* kSeedEnv = "INTERLACE_SEED";

/// A config field failed validation; `field` is its dotted path.
class ConfigError : public ContractError {
public:
  ConfigError(std::string field, const std::string& what)
      : ContractError(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

private:
  std::string field_;
};

struct WindowSpec {
  std::string shape = "ball";  // ball | box
  int radius = 2;
  std::vector<int> extents;  // box side lengths, one per axis
};

struct PlacementSpec {
  std::string rule = "antipodal";  // explicit | antipodal | conditioned
  std::vector<std::vector<int>> points;
  int distance = 10;
  int k = 2;
};

struct CapacitySpec {
  std::vector<std::string> sets{"ball:1", "ball:2", "ball:3", "ball:4"};
  std::string backend = "exact";
  std::size_t samples = 4000;
};

struct CascadeSpec {
  std::vector<int> radii{16, 32, 64, 128};
  int depth = 1;
  int inner = 0;
  double u_bar = 1.0;
  std::size_t walks = 2000;
  int truncation_factor = 2;
};

struct TreeFixture {
  std::string name;
  int k = 2, m = 0;
  std::vector<std::vector<double>> edges;  // [u, v, length]
  std::optional<std::vector<int>> scheme;  // [k, n, index]: all-length tree of an enumerated scheme
  double length = 2;
  std::vector<int> separations{8, 16, 32};
  int truncation_factor = 2;
};

struct TreeSumSpec {
  std::vector<TreeFixture> fixtures;
  double eps = 0.1;
};

struct SchemesSpec {
  int k = 2, n = 2;
};

struct NkdSpec {
  int k_min = 2, k_max = 6, d_min = 3, d_max = 10;
};

struct ExperimentConfig {
  int d = 5;
  double u = 1.0;
  std::uint64_t seed = 1;
  int replicas = 1;
  Adjacency mode = Adjacency::shared_vertex;
  int limit = 3;
  int threads = 1;
  WindowSpec window;
  int truncation = 0;
  int observation_radius = 0;
  std::size_t leg_length = 0;
  std::string entry = "thinning";
  std::size_t retry_budget = 100000;
  bool both_modes = true;
  bool record_timing = false;
  PlacementSpec placement;
  CapacitySpec capacity;
  CascadeSpec cascade;
  TreeSumSpec tree_sum;
  SchemesSpec schemes;
  NkdSpec nkd;
};

namespace detail {

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "." + key, "has the wrong type (" + j.at(key).dump() + ")");
  }
}

inline void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ConfigError(path, "must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* s : known) ok |= k == s;
    if (!ok) throw ConfigError(path + "." + k, "unknown field");
  }
}

}  // namespace detail

/// Applies the fields present in `j` on top of `c`.
inline void merge_json(ExperimentConfig& c, const json& j) {
  using detail::read;
  detail::check_keys(j, "config",
                     {"d", "u", "seed", "replicas", "mode", "limit", "threads", "window", "truncation",
                      "observation_radius", "leg_length", "entry", "retry_budget", "both_modes", "record_timing",
                      "placement", "capacity", "cascade", "tree_sum", "schemes", "nkd"});
  read(j, "d", c.d, "config");
  read(j, "u", c.u, "config");
  read(j, "seed", c.seed, "config");
  read(j, "replicas", c.replicas, "config");
  if (j.contains("mode")) {
    std::string m;
    read(j, "mode", m, "config");
    try {
      c.mode = parse_adjacency(m);
    } catch (const ContractError&) {
      throw ConfigError("config.mode", "must be shared or adjacent, got " + m);
    }
  }
  read(j, "limit", c.limit, "config");
  read(j, "threads", c.threads, "config");
  read(j, "truncation", c.truncation, "config");
  read(j, "observation_radius", c.observation_radius, "config");
  read(j, "leg_length", c.leg_length, "config");
  read(j, "entry", c.entry, "config");
  read(j, "retry_budget", c.retry_budget, "config");
  read(j, "both_modes", c.both_modes, "config");
  read(j, "record_timing", c.record_timing, "config");
  if (j.contains("window")) {
    const auto& w = j["window"];
    detail::check_keys(w, "config.window", {"shape", "radius", "extents"});
    read(w, "shape", c.window.shape, "config.window");
    read(w, "radius", c.window.radius, "config.window");
    read(w, "extents", c.window.extents, "config.window");
  }
  if (j.contains("placement")) {
    const auto& p = j["placement"];
    detail::check_keys(p, "config.placement", {"rule", "points", "distance", "k"});
    read(p, "rule", c.placement.rule, "config.placement");
    read(p, "points", c.placement.points, "config.placement");
    read(p, "distance", c.placement.distance, "config.placement");
    read(p, "k", c.placement.k, "config.placement");
  }
  if (j.contains("capacity")) {
    const auto& p = j["capacity"];
    detail::check_keys(p, "config.capacity", {"sets", "backend", "samples"});
    read(p, "sets", c.capacity.sets, "config.capacity");
    read(p, "backend", c.capacity.backend, "config.capacity");
    read(p, "samples", c.capacity.samples, "config.capacity");
  }
  if (j.contains("cascade")) {
    const auto& p = j["cascade"];
    detail::check_keys(p, "config.cascade", {"radii", "depth", "inner", "u_bar", "walks", "truncation_factor"});
    read(p, "radii", c.cascade.radii, "config.cascade");
    read(p, "depth", c.cascade.depth, "config.cascade");
    read(p, "inner", c.cascade.inner, "config.cascade");
    read(p, "u_bar", c.cascade.u_bar, "config.cascade");
    read(p, "walks", c.cascade.walks, "config.cascade");
    read(p, "truncation_factor", c.cascade.truncation_factor, "config.cascade");
  }
  if (j.contains("tree_sum")) {
    const auto& p = j["tree_sum"];
    detail::check_keys(p, "config.tree_sum", {"fixtures", "eps"});
    read(p, "eps", c.tree_sum.eps, "config.tree_sum");
    if (p.contains("fixtures")) {
      c.tree_sum.fixtures.clear();
      if (!p["fixtures"].is_array()) throw ConfigError("config.tree_sum.fixtures", "must be an array");
      for (std::size_t i = 0; i < p["fixtures"].size(); ++i) {
        const auto& f = p["fixtures"][i];
        const std::string path = "config.tree_sum.fixtures[" + std::to_string(i) + "]";
        detail::check_keys(f, path, {"name", "k", "m", "edges", "scheme", "length", "separations", "truncation_factor"});
        TreeFixture t;
        read(f, "name", t.name, path);
        read(f, "k", t.k, path);
        read(f, "m", t.m, path);
        read(f, "edges", t.edges, path);
        if (f.contains("scheme")) {
          std::vector<int> s;
          read(f, "scheme", s, path);
          t.scheme = s;
        }
        read(f, "length", t.length, path);
        read(f, "separations", t.separations, path);
        read(f, "truncation_factor", t.truncation_factor, path);
        if (t.name.empty()) t.name = "fixture" + std::to_string(i);
        c.tree_sum.fixtures.push_back(std::move(t));
      }
    }
  }
  if (j.contains("schemes")) {
    const auto& p = j["schemes"];
    detail::check_keys(p, "config.schemes", {"k", "n"});
    read(p, "k", c.schemes.k, "config.schemes");
    read(p, "n", c.schemes.n, "config.schemes");
  }
  if (j.contains("nkd")) {
    const auto& p = j["nkd"];
    detail::check_keys(p, "config.nkd", {"k_min", "k_max", "d_min", "d_max"});
    read(p, "k_min", c.nkd.k_min, "config.nkd");
    read(p, "k_max", c.nkd.k_max, "config.nkd");
    read(p, "d_min", c.nkd.d_min, "config.nkd");
    read(p, "d_max", c.nkd.d_max, "config.nkd");
  }
}

inline void validate(const ExperimentConfig& c) {
  auto need = [](bool ok, const char* field, const std::string& what) {
    if (!ok) throw ConfigError(std::string("config.") + field, what);
  };
  need(c.d >= 3 && c.d <= kMaxDim, "d", "must be in [3, " + std::to_string(kMaxDim) + "]");
  need(c.u > 0, "u", "must be positive");
  need(c.replicas >= 1, "replicas", "must be at least 1");
  need(c.limit >= 1 && c.limit <= kMinConnectCap, "limit", "must be in [1, " + std::to_string(kMinConnectCap) + "]");
  need(c.threads >= 1, "threads", "must be at least 1");
  need(c.truncation >= 0, "truncation", "must be positive (or 0 for the default)");
  need(c.observation_radius >= 0, "observation_radius", "must be positive (or 0 for the default)");
  need(c.entry == "thinning" || c.entry == "equilibrium", "entry", "must be thinning or equilibrium");
  need(c.retry_budget >= 1, "retry_budget", "must be at least 1");
  need(c.window.shape == "ball" || c.window.shape == "box", "window.shape", "must be ball or box");
  if (c.window.shape == "ball") need(c.window.radius >= 0, "window.radius", "must be nonnegative");
  if (c.window.shape == "box") {
    need(int(c.window.extents.size()) == c.d, "window.extents", "needs one extent per axis");
    for (int e : c.window.extents) need(e >= 1, "window.extents", "extents must be positive");
  }
  const auto& p = c.placement;
  need(p.rule == "explicit" || p.rule == "antipodal" || p.rule == "conditioned", "placement.rule",
       "must be explicit, antipodal or conditioned");
  if (p.rule == "explicit" || (p.rule == "conditioned" && !p.points.empty())) {
    need(!p.points.empty(), "placement.points", "needs at least one point");
    for (const auto& q : p.points) need(int(q.size()) == c.d, "placement.points", "every point needs d coordinates");
  } else {
    need(p.distance >= 1, "placement.distance", "must be positive");
    need(p.k == 1 || p.k == 2, "placement.k", "antipodal placement supports k = 1 or 2");
  }
  need(c.capacity.backend == "exact" || c.capacity.backend == "mc", "capacity.backend", "must be exact or mc");
  need(c.capacity.samples >= 1, "capacity.samples", "must be at least 1");
  for (int R : c.cascade.radii) need(R >= 1, "cascade.radii", "radii must be positive");
  need(c.cascade.depth >= 1, "cascade.depth", "must be at least 1");
  need(c.cascade.u_bar > 0, "cascade.u_bar", "must be positive");
  need(c.cascade.walks >= 1, "cascade.walks", "must be at least 1");
  need(c.cascade.truncation_factor >= 1, "cascade.truncation_factor", "must be at least 1");
  need(c.tree_sum.eps >= 0, "tree_sum.eps", "must be nonnegative");
  for (const auto& f : c.tree_sum.fixtures) {
    for (int r : f.separations) need(r >= 0, "tree_sum.fixtures.separations", "must be nonnegative");
    need(f.truncation_factor >= 2, "tree_sum.fixtures.truncation_factor", "must be at least 2");
    if (f.scheme) need(f.scheme->size() == 3, "tree_sum.fixtures.scheme", "must be [k, n, index]");
    for (const auto& e : f.edges) need(e.size() == 3, "tree_sum.fixtures.edges", "each edge is [u, v, length]");
  }
  need(c.nkd.k_min >= 2 && c.nkd.k_min <= c.nkd.k_max, "nkd", "needs 2 <= k_min <= k_max");
  need(c.nkd.d_min >= 3 && c.nkd.d_min <= c.nkd.d_max, "nkd", "needs 3 <= d_min <= d_max");
}

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["d"] = c.d;
  j["u"] = c.u;
  j["seed"] = c.seed;
  j["replicas"] = c.replicas;
  j["mode"] = c.mode == Adjacency::shared_vertex ? "shared" : "adjacent";
  j["limit"] = c.limit;
  j["window"] = {{"shape", c.window.shape}, {"radius", c.window.radius}, {"extents", c.window.extents}};
  j["truncation"] = c.truncation;
  j["observation_radius"] = c.observation_radius;
  j["leg_length"] = c.leg_length;
  j["entry"] = c.entry;
  j["retry_budget"] = c.retry_budget;
  j["both_modes"] = c.both_modes;
  j["placement"] = {{"rule", c.placement.rule},
                    {"points", c.placement.points},
                    {"distance", c.placement.distance},
                    {"k", c.placement.k}};
  j["capacity"] = {{"sets", c.capacity.sets}, {"backend", c.capacity.backend}, {"samples", c.capacity.samples}};
  j["cascade"] = {{"radii", c.cascade.radii},   {"depth", c.cascade.depth}, {"inner", c.cascade.inner},
                  {"u_bar", c.cascade.u_bar},   {"walks", c.cascade.walks},
                  {"truncation_factor", c.cascade.truncation_factor}};
  auto& fx = j["tree_sum"]["fixtures"] = json::array();
  for (const auto& f : c.tree_sum.fixtures) {
    json o = {{"name", f.name},     {"k", f.k},
              {"m", f.m},           {"edges", f.edges},
              {"length", f.length}, {"separations", f.separations},
              {"truncation_factor", f.truncation_factor}};
    if (f.scheme) o["scheme"] = *f.scheme;
    fx.push_back(o);
  }
  j["tree_sum"]["eps"] = c.tree_sum.eps;
  j["schemes"] = {{"k", c.schemes.k}, {"n", c.schemes.n}};
  j["nkd"] = {{"k_min", c.nkd.k_min}, {"k_max", c.nkd.k_max}, {"d_min", c.nkd.d_min}, {"d_max", c.nkd.d_max}};
  return j;
}

/// FNV-1a over the canonical JSON of everything that affects results
/// (threads and timing switches excluded).
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string s = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Values given on the command line; unset fields leave the config alone.
struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> replicas, d, limit, threads;
  std::optional<double> u;
  std::optional<std::string> mode;
};

/// Defaults, then the file, then the seed variable, then the command line.
inline ExperimentConfig load_config(const std::optional<std::string>& path, const CliOverrides& cli,
                                    const char* env_seed = std::getenv(kSeedEnv)) {
  ExperimentConfig c;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("--config", "cannot open " + *path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("--config", std::string("not valid JSON: ") + e.what());
    }
    merge_json(c, j);
  }
  if (env_seed && *env_seed) {
    char* end = nullptr;
    const auto v = std::strtoull(env_seed, &end, 10);
    if (!end || *end) throw ConfigError(kSeedEnv, std::string("not an unsigned integer: ") + env_seed);
    c.seed = v;
  }
  if (cli.seed) c.seed = *cli.seed;
  if (cli.replicas) c.replicas = *cli.replicas;
  if (cli.d) c.d = *cli.d;
  if (cli.limit) c.limit = *cli.limit;
  if (cli.threads) c.threads = *cli.threads;
  if (cli.u) c.u = *cli.u;
  if (cli.mode) {
    try {
      c.mode = parse_adjacency(*cli.mode);
    } catch (const ContractError&) {
      throw ConfigError("--mode", "must be shared or adjacent, got " + *cli.mode);
    }
  }
  validate(c);
  return c;
}

}  // namespace interlace::harness
