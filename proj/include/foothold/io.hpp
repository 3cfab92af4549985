#pragma once

// File formats: 16-bit terrain PGM and 8-bit mask PGM, each with a sidecar
// JSON; region and QP JSON; scenario configuration JSON.

#include "foothold/common.hpp"
#include "foothold/criteria.hpp"
#include "foothold/mpc.hpp"
#include "foothold/qp.hpp"
#include "foothold/regions.hpp"
#include "foothold/sim.hpp"
#include "foothold/terrain.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace foothold {

using nlohmann::json;

inline std::string sidecar_path(const std::string& pgm_path) {
  std::filesystem::path p(pgm_path);
  p.replace_extension(".json");
  return p.string();
}

inline json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw FormatError("invalid JSON in " + path + ": " + e.what());
  }
}

inline void write_json_file(const json& j, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os << j.dump(2) << "\n";
  if (!os) throw FormatError("write failed: " + path);
}

namespace detail {

struct Pgm {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<std::uint16_t> pixels;  // row-major
};

inline void write_pgm(const std::string& path, const Pgm& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os << "P5\n" << img.width << " " << img.height << "\n" << img.maxval << "\n";
  for (auto v : img.pixels) {
    if (img.maxval > 255) os.put(static_cast<char>(v >> 8));  // PGM stores 16-bit samples big-endian
    os.put(static_cast<char>(v & 0xff));
  }
  if (!os) throw FormatError("write failed: " + path);
}

inline Pgm read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  auto token = [&]() {
    std::string t;
    char c;
    while (is.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(is, skip);
      } else if (!std::isspace(static_cast<unsigned char>(c))) {
        t.push_back(c);
        break;
      }
    }
    while (is.get(c) && !std::isspace(static_cast<unsigned char>(c))) t.push_back(c);
    return t;
  };
  if (token() != "P5") throw FormatError(path + ": not a binary PGM (P5)");
  Pgm img;
  try {
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    img.maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw FormatError(path + ": malformed PGM header");
  }
  if (img.width <= 0 || img.height <= 0 || img.maxval <= 0 || img.maxval > 65535)
    throw FormatError(path + ": invalid PGM dimensions");
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  img.pixels.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    int hi = 0, lo = is.get();
    if (img.maxval > 255) {
      hi = lo;
      lo = is.get();
    }
    if (!is) throw FormatError(path + ": truncated PGM data");
    img.pixels[k] = static_cast<std::uint16_t>((hi << 8) | lo);
  }
  return img;
}

}  // namespace detail

/// Terrain as a 16-bit PGM; row r of the image is grid row r (increasing y).
/// Heights are z_min + value * z_scale.
inline void write_terrain_pgm(const TerrainGrid& grid, const std::string& path) {
  const auto& h = grid.heights();
  const auto [lo, hi] = std::minmax_element(h.begin(), h.end());
  const double z_min = *lo;
  const double z_scale = std::max((*hi - *lo) / 65535.0, 1e-9);
  detail::Pgm img;
  img.width = grid.cols();
  img.height = grid.rows();
  img.maxval = 65535;
  img.pixels.reserve(h.size());
  for (double v : h) img.pixels.push_back(static_cast<std::uint16_t>(std::lround((v - z_min) / z_scale)));
  detail::write_pgm(path, img);
  json side = {{"origin", {grid.origin().x(), grid.origin().y()}},
               {"resolution", grid.resolution()},
               {"z_min", z_min},
               {"z_scale", z_scale}};
  write_json_file(side, sidecar_path(path));
}

inline TerrainGrid read_terrain_pgm(const std::string& path) {
  const detail::Pgm img = detail::read_pgm(path);
  const json side = read_json_file(sidecar_path(path));
  try {
    GridSpec spec;
    spec.origin_xy = Vec2(side.at("origin").at(0).get<double>(), side.at("origin").at(1).get<double>());
    spec.resolution = side.at("resolution").get<double>();
    spec.n_rows = img.height;
    spec.n_cols = img.width;
    const double z_min = side.at("z_min").get<double>();
    const double z_scale = side.at("z_scale").get<double>();
    std::vector<double> heights;
    heights.reserve(img.pixels.size());
    for (auto v : img.pixels) heights.push_back(z_min + v * z_scale);
    return TerrainGrid(spec, std::move(heights));
  } catch (const json::exception& e) {
    throw FormatError(sidecar_path(path) + ": " + e.what());
  }
}

inline void write_mask_pgm(const SafetyMask& mask, const std::string& path) {
  detail::Pgm img;
  img.width = img.height = kWindowSize;
  img.maxval = 255;
  for (int q = 0; q < kWindowCells; ++q) img.pixels.push_back(mask.safe[q] ? 255 : 0);
  detail::write_pgm(path, img);
  auto false_count = [](const MaskLayer& l) { return kWindowCells - static_cast<int>(std::count(l.begin(), l.end(), true)); };
  json side = {{"center", {mask.center_xy.x(), mask.center_xy.y()}},
               {"resolution", mask.resolution},
               {"safe_cells", mask.safe_count()},
               {"false_counts",
                {{"kinematic", false_count(mask.kinematic)},
                 {"roughness", false_count(mask.roughness)},
                 {"frontal", false_count(mask.frontal)},
                 {"leg", false_count(mask.leg)}}},
               {"eval_time_us", mask.eval_time_us}};
  write_json_file(side, sidecar_path(path));
}

inline SafetyMask read_mask_pgm(const std::string& path) {
  const detail::Pgm img = detail::read_pgm(path);
  if (img.width != kWindowSize || img.height != kWindowSize) throw FormatError(path + ": mask must be 32x32");
  const json side = read_json_file(sidecar_path(path));
  try {
    MaskLayer safe{};
    for (int q = 0; q < kWindowCells; ++q) safe[q] = img.pixels[q] > img.maxval / 2;
    SafetyMask m = SafetyMask::uniform(Vec2(side.at("center").at(0).get<double>(), side.at("center").at(1).get<double>()),
                                       side.at("resolution").get<double>(), safe);
    m.eval_time_us = side.value("eval_time_us", 0.0);
    return m;
  } catch (const json::exception& e) {
    throw FormatError(sidecar_path(path) + ": " + e.what());
  }
}

inline json to_json(const ConvexRegion& r) {
  json verts = json::array(), hs = json::array();
  for (const auto& v : r.polygon.vertices) verts.push_back({v.x(), v.y()});
  for (const auto& h : r.halfspaces) hs.push_back({{"normal", {h.normal.x(), h.normal.y()}}, {"offset", h.offset}});
  return {{"vertices", verts}, {"halfspaces", hs}, {"area", r.area}, {"terrain_z_ref", r.terrain_z_ref}};
}

inline json to_json(const RegionResult& rr) {
  json regions = json::array();
  for (std::size_t k = 0; k < rr.candidates.size(); ++k) {
    json r = to_json(rr.candidates[k]);
    r["selected"] = rr.selected && *rr.selected == k;
    regions.push_back(r);
  }
  json out = {{"regions", regions}};
  if (rr.selected) {
    out["selected_index"] = *rr.selected;
    out["distance"] = rr.distance;
  } else {
    out["selected_index"] = nullptr;
  }
  return out;
}

namespace detail {

// Bounds beyond +-1e30 (or null) mean "unbounded".
inline double bound_from_json(const json& v, double inf) {
  if (v.is_null()) return inf;
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return kQpInfinity;
    if (s == "-inf") return -kQpInfinity;
    throw FormatError("bad bound string: " + s);
  }
  return std::clamp(v.get<double>(), -kQpInfinity, kQpInfinity);
}

inline Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
  Eigen::MatrixXd out(rows, cols);
  const bool nested = j.is_array() && !j.empty() && j.front().is_array();
  if (nested) {
    if (static_cast<Eigen::Index>(j.size()) != rows) throw FormatError(std::string(what) + ": wrong row count");
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (static_cast<Eigen::Index>(j[r].size()) != cols) throw FormatError(std::string(what) + ": wrong column count");
      for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = j[r][c].get<double>();
    }
  } else {
    if (static_cast<Eigen::Index>(j.size()) != rows * cols) throw FormatError(std::string(what) + ": wrong size");
    for (Eigen::Index k = 0; k < rows * cols; ++k) out(k / cols, k % cols) = j[k].get<double>();
  }
  return out;
}

}  // namespace detail

/// QP JSON: {"n", "m", "P" (row-major), "q", "A" (row-major), "l", "u"}.
inline QpProblem qp_from_json(const json& j) {
  try {
    const auto n = j.at("n").get<Eigen::Index>();
    const auto m = j.at("m").get<Eigen::Index>();
    QpProblem qp;
    qp.P = detail::matrix_from_json(j.at("P"), n, n, "P");
    qp.q = detail::matrix_from_json(j.at("q"), n, 1, "q");
    qp.A = m > 0 ? detail::matrix_from_json(j.at("A"), m, n, "A") : Eigen::MatrixXd(0, n);
    qp.l.resize(m);
    qp.u.resize(m);
    if (static_cast<Eigen::Index>(j.at("l").size()) != m || static_cast<Eigen::Index>(j.at("u").size()) != m)
      throw FormatError("l/u size must equal m");
    for (Eigen::Index i = 0; i < m; ++i) {
      qp.l[i] = detail::bound_from_json(j.at("l")[i], -kQpInfinity);
      qp.u[i] = detail::bound_from_json(j.at("u")[i], kQpInfinity);
    }
    return qp;
  } catch (const json::exception& e) {
    throw FormatError(std::string("QP JSON: ") + e.what());
  }
}

inline json to_json(const QpProblem& qp) {
  auto flat = [](const Eigen::MatrixXd& mtx) {
    json a = json::array();
    for (Eigen::Index r = 0; r < mtx.rows(); ++r)
      for (Eigen::Index c = 0; c < mtx.cols(); ++c) a.push_back(mtx(r, c));
    return a;
  };
  auto vec = [](const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); };
  return {{"n", qp.n()}, {"m", qp.m()}, {"P", flat(qp.P)}, {"q", vec(qp.q)},
          {"A", flat(qp.A)}, {"l", vec(qp.l)}, {"u", vec(qp.u)}};
}

inline json to_json(const QpSolution& s) {
  auto vec = [](const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); };
  return {{"status", to_string(s.status)}, {"iterations", s.iterations}, {"objective", s.objective},
          {"primal_residual", s.primal_res}, {"dual_residual", s.dual_res}, {"x", vec(s.x)}, {"y", vec(s.y)}};
}

// ---- scenario config ----

namespace detail {

inline Vec2 vec2(const json& j) { return Vec2(j.at(0).get<double>(), j.at(1).get<double>()); }
inline Vec3 vec3(const json& j) { return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()); }

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

/// Missing keys keep the SimConfig defaults.
inline SimConfig sim_config_from_json(const json& j) {
  SimConfig c;
  try {
    if (j.contains("terrain")) {
      const json& t = j.at("terrain");
      detail::read_opt(t, "kind", c.terrain.kind);
      if (t.contains("origin")) c.terrain.grid.origin_xy = detail::vec2(t.at("origin"));
      detail::read_opt(t, "resolution", c.terrain.grid.resolution);
      detail::read_opt(t, "rows", c.terrain.grid.n_rows);
      detail::read_opt(t, "cols", c.terrain.grid.n_cols);
      detail::read_opt(t, "step_rise", c.terrain.step_rise);
      detail::read_opt(t, "step_run", c.terrain.step_run);
      detail::read_opt(t, "n_steps", c.terrain.n_steps);
      detail::read_opt(t, "first_riser_x", c.terrain.first_riser_x);
      detail::read_opt(t, "amplitude", c.terrain.amplitude);
      detail::read_opt(t, "correlation_len", c.terrain.correlation_len);
      detail::read_opt(t, "seed", c.terrain.seed);
    }
    if (j.contains("gait")) {
      const json& g = j.at("gait");
      detail::read_opt(g, "cycle_time", c.gait.cycle_time);
      detail::read_opt(g, "duty_factor", c.gait.duty_factor);
      if (g.contains("phase_offsets")) c.gait.phase_offsets = g.at("phase_offsets").get<std::array<double, kNumLegs>>();
    }
    if (j.contains("mode")) {
      const auto m = j.at("mode").get<std::string>();
      if (m == "heuristic") c.mode = ControllerMode::heuristic;
      else if (m == "convex_region" || m == "convex") c.mode = ControllerMode::convex_region;
      else throw InvalidArgument("unknown mode: " + m);
    }
    detail::read_opt(j, "duration", c.duration);
    detail::read_opt(j, "control_rate", c.control_rate);
    detail::read_opt(j, "physics_dt", c.physics_dt);
    detail::read_opt(j, "body_height", c.body_height);
    detail::read_opt(j, "fall_angle", c.fall_angle);
    detail::read_opt(j, "seed", c.seed);
    if (j.contains("desired_velocity")) c.desired_velocity = detail::vec2(j.at("desired_velocity"));
    if (j.contains("start_xy")) c.start_xy = detail::vec2(j.at("start_xy"));
    if (j.contains("capture_gain")) c.heuristic.capture_gain = j.at("capture_gain").get<double>();
    if (j.contains("disturbance")) {
      const json& d = j.at("disturbance");
      if (d.is_null()) {
        c.disturbance.reset();
      } else {
        Disturbance dist;
        if (d.contains("force")) dist.force = detail::vec3(d.at("force"));
        detail::read_opt(d, "start", dist.start);
        detail::read_opt(d, "duration", dist.duration);
        c.disturbance = dist;
      }
    }
    if (j.contains("mpc")) {
      const json& m = j.at("mpc");
      detail::read_opt(m, "horizon", c.mpc.horizon);
      detail::read_opt(m, "dt", c.mpc.dt);
      detail::read_opt(m, "mass", c.mpc.mass);
      if (m.contains("inertia_diag")) c.mpc.inertia_body = detail::vec3(m.at("inertia_diag")).asDiagonal();
      detail::read_opt(m, "mu", c.mpc.mu);
      detail::read_opt(m, "fz_min", c.mpc.fz_min);
      detail::read_opt(m, "fz_max", c.mpc.fz_max);
      if (m.contains("q_weights")) {
        const auto w = m.at("q_weights").get<std::vector<double>>();
        if (w.size() != 12) throw InvalidArgument("mpc.q_weights needs 12 entries");
        for (int k = 0; k < 12; ++k) c.mpc.q_weights[k] = w[k];
      }
      detail::read_opt(m, "r_weight", c.mpc.r_weight);
      detail::read_opt(m, "foothold_weight", c.mpc.foothold_weight);
      detail::read_opt(m, "foothold_box", c.mpc.foothold_box);
      detail::read_opt(m, "qp_max_iters", c.mpc.qp.max_iters);
      detail::read_opt(m, "qp_rho", c.mpc.qp.rho);
    }
    if (j.contains("robot")) {
      const json& r = j.at("robot");
      if (r.contains("hip_offsets"))
        for (int leg = 0; leg < kNumLegs; ++leg) c.robot.hip_offsets[leg] = detail::vec3(r.at("hip_offsets").at(leg));
      detail::read_opt(r, "l_upper", c.robot.l_upper);
      detail::read_opt(r, "l_lower", c.robot.l_lower);
      detail::read_opt(r, "r_min", c.robot.r_min);
      detail::read_opt(r, "r_max", c.robot.r_max);
      detail::read_opt(r, "foot_radius", c.robot.foot_radius);
      detail::read_opt(r, "roughness_h", c.robot.roughness_h);
      detail::read_opt(r, "roughness_kmin", c.robot.roughness_kmin);
      detail::read_opt(r, "swing_apex", c.robot.swing_apex);
      detail::read_opt(r, "collision_margin", c.robot.collision_margin);
      detail::read_opt(r, "n_phase_samples", c.robot.n_phase_samples);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("scenario config: ") + e.what());
  }
  c.validate();
  return c;
}

inline json to_json(const SimSummary& s) {
  return {{"mode", to_string(s.mode)},
          {"fell", s.fell},
          {"fall_time", s.fell ? json(s.fall_time) : json(nullptr)},
          {"peak_roll", s.peak_roll},
          {"peak_pitch", s.peak_pitch},
          {"mean_solve_us", s.mean_solve_us},
          {"mean_criteria_us", s.mean_criteria_us},
          {"mean_pipeline_us", s.mean_pipeline_us},
          {"final_x", s.final_x},
          {"ticks", s.ticks},
          {"degraded_ticks", s.degraded_ticks}};
}

}  // namespace foothold
