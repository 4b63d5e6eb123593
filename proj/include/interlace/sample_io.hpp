#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "interlace/errors.hpp"
#include "interlace/sampler.hpp"

namespace interlace {

// Line-delimited JSON: one header record describing the sample, then one
// record per trajectory. Traces are rebuilt from the legs on load.

namespace detail {

inline nlohmann::json point_json(const Point& p) { return p.coords(); }

inline Point point_from(const nlohmann::json& j, int dim) {
  auto v = j.get<std::vector<int>>();
  require(int(v.size()) == dim, "record point has " + std::to_string(v.size()) + " coordinates, expected " +
                                    std::to_string(dim));
  return Point(v);
}

inline std::vector<int> codes_json(const PathSegment& s) { return {s.codes().begin(), s.codes().end()}; }

inline PathSegment leg_from(const Point& start, const nlohmann::json& j) {
  std::vector<std::uint8_t> codes;
  for (int c : j.get<std::vector<int>>()) {
    require(c >= 0 && c < 2 * start.dim(), "direction code " + std::to_string(c) + " out of range");
    codes.push_back(static_cast<std::uint8_t>(c));
  }
  return PathSegment(start, std::move(codes));
}

}  // namespace detail

/// Writes the sample; `replica` is copied into every record for provenance.
inline void write_sample_jsonl(std::ostream& os, const InterlacementSample& s, std::uint64_t replica = 0) {
  nlohmann::json h;
  h["record"] = "sample";
  h["dim"] = s.dim();
  h["intensity"] = s.intensity;
  h["leg_length"] = s.leg_length;
  h["observation_center"] = detail::point_json(s.observation_center);
  h["observation_radius"] = s.observation_radius;
  h["truncation_center"] = detail::point_json(s.truncation_center);
  h["truncation_radius"] = s.truncation_radius;
  h["mode"] = entry_mode_name(s.mode);
  h["seed"] = s.seed;
  h["stream"] = s.stream;
  h["replica"] = replica;
  h["trajectories"] = s.trajectories.size();
  auto& w = h["window"] = nlohmann::json::array();
  for (const auto& p : s.window.points()) w.push_back(detail::point_json(p));
  os << h.dump() << '\n';
  for (const auto& t : s.trajectories) {
    nlohmann::json r;
    r["record"] = "trajectory";
    r["id"] = t.id;
    r["label"] = t.label;
    r["entry"] = detail::point_json(t.entry);
    r["forward"] = detail::codes_json(t.forward);
    r["backward"] = detail::codes_json(t.backward);
    r["dim"] = t.dim();
    r["seed"] = s.seed;
    r["stream"] = s.stream;
    r["replica"] = replica;
    os << r.dump() << '\n';
  }
  os.flush();
}

/// Reads one sample (header plus its trajectory records). Returns false at end of input.
inline bool read_sample_jsonl(std::istream& is, InterlacementSample& s, std::uint64_t* replica = nullptr) {
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) break;
  if (line.empty()) return false;
  const auto h = nlohmann::json::parse(line);
  require(h.at("record") == "sample", "expected a sample header record");
  const int d = h.at("dim").get<int>();
  s = InterlacementSample{};
  s.window = FiniteSet(d);
  for (const auto& p : h.at("window")) s.window.insert(detail::point_from(p, d));
  s.intensity = h.at("intensity").get<double>();
  s.leg_length = h.at("leg_length").get<std::size_t>();
  s.observation_center = detail::point_from(h.at("observation_center"), d);
  s.observation_radius = h.at("observation_radius").get<int>();
  s.truncation_center = detail::point_from(h.at("truncation_center"), d);
  s.truncation_radius = h.at("truncation_radius").get<int>();
  s.mode = h.at("mode") == "thinning" ? EntryMode::thinning : EntryMode::equilibrium;
  s.seed = h.at("seed").get<std::uint64_t>();
  s.stream = h.at("stream").get<std::uint64_t>();
  if (replica) *replica = h.at("replica").get<std::uint64_t>();
  const auto n = h.at("trajectories").get<std::size_t>();
  for (std::size_t i = 0; i < n; ++i) {
    require(bool(std::getline(is, line)), "truncated sample: expected " + std::to_string(n) + " trajectories");
    const auto r = nlohmann::json::parse(line);
    require(r.at("record") == "trajectory", "expected a trajectory record");
    require(r.at("dim").get<int>() == d, "trajectory dimension differs from its sample");
    LabeledTrajectory t;
    t.id = r.at("id").get<std::uint64_t>();
    t.label = r.at("label").get<double>();
    t.entry = detail::point_from(r.at("entry"), d);
    t.forward = detail::leg_from(t.entry, r.at("forward"));
    t.backward = detail::leg_from(t.entry, r.at("backward"));
    t.trace = clip_trace(t.forward, t.backward, s.observation_center, s.observation_radius);
    s.trajectories.push_back(std::move(t));
  }
  return true;
}

}  // namespace interlace
