// foothold: command-line front end.
// Exit codes: 0 ok, 1 domain failure (fall, no region, unsolved QP), 2 usage, 3 I/O or format error.

#include "foothold/foothold.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace foothold;

namespace {

enum Exit { kOk = 0, kDomain = 1, kUsage = 2, kIo = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& s, std::size_t n, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError(std::string(what) + ": cannot parse '" + s + "'");
    }
  }
  if (out.size() != n) throw UsageError(std::string(what) + ": expected " + std::to_string(n) + " comma-separated numbers");
  return out;
}

Vec2 parse_vec2(const std::string& s, const char* what) {
  const auto v = parse_list(s, 2, what);
  return {v[0], v[1]};
}

Vec3 parse_vec3(const std::string& s, const char* what) {
  const auto v = parse_list(s, 3, what);
  return {v[0], v[1], v[2]};
}

int parse_leg(const std::string& s) {
  for (int leg = 0; leg < kNumLegs; ++leg)
    if (s == leg_name(leg)) return leg;
  throw UsageError("--leg must be one of LF, RF, LH, RH");
}

fs::path out_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw FormatError("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os << text;
}

template <typename F>
void write_stream(const fs::path& path, F&& fn) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  fn(os);
  if (!os) throw FormatError("write failed: " + path.string());
}

std::shared_ptr<const NetWeights> load_surrogate(const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_shared<const NetWeights>(load_weights(path));
}

void print_summary(const SimSummary& s) {
  std::cout << std::fixed << std::setprecision(4) << "  mode=" << to_string(s.mode) << " fell=" << (s.fell ? "yes" : "no");
  if (s.fell) std::cout << " (t=" << s.fall_time << " s)";
  std::cout << " peak_roll=" << s.peak_roll << " rad peak_pitch=" << s.peak_pitch << " rad final_x=" << s.final_x
            << " m mean_solve=" << std::setprecision(0) << s.mean_solve_us << " us degraded=" << s.degraded_ticks << "/"
            << s.ticks << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Foothold planning toolkit: safety criteria, convex regions, MPC, simulation"};
  app.require_subcommand(1);
  int code = kOk;

  // terrain gen
  auto* terrain = app.add_subcommand("terrain", "Terrain generation");
  terrain->require_subcommand(1);
  auto* tgen = terrain->add_subcommand("gen", "Generate a terrain heightmap (16-bit PGM + sidecar JSON)");
  std::string t_kind, t_out, t_origin = "-1.5,-1.5";
  TerrainConfig tc;
  tgen->add_option("--kind", t_kind, "stairs | rough | flat")->required()->check(CLI::IsMember({"stairs", "rough", "flat"}));
  tgen->add_option("--out", t_out, "Output PGM path")->required();
  tgen->add_option("--rows", tc.grid.n_rows, "Rows (along y)")->capture_default_str();
  tgen->add_option("--cols", tc.grid.n_cols, "Columns (along x)")->capture_default_str();
  tgen->add_option("--resolution", tc.grid.resolution, "Cell size [m]")->capture_default_str();
  tgen->add_option("--origin", t_origin, "Center of cell (0,0): x,y")->capture_default_str();
  tgen->add_option("--rise", tc.step_rise, "Stair rise [m]")->capture_default_str();
  tgen->add_option("--run", tc.step_run, "Stair run [m]")->capture_default_str();
  tgen->add_option("--steps", tc.n_steps, "Number of stairs")->capture_default_str();
  tgen->add_option("--first-riser", tc.first_riser_x, "x of the first riser [m]")->capture_default_str();
  tgen->add_option("--amplitude", tc.amplitude, "Rough terrain amplitude [m]")->capture_default_str();
  tgen->add_option("--correlation", tc.correlation_len, "Rough terrain correlation length [m]")->capture_default_str();
  tgen->add_option("--seed", tc.seed, "Random seed")->capture_default_str();
  tgen->callback([&] {
    tc.kind = t_kind;
    tc.grid.origin_xy = parse_vec2(t_origin, "--origin");
    const TerrainGrid g = tc.build();
    fs::path p(t_out);
    if (p.has_parent_path()) out_dir(p.parent_path().string());
    write_terrain_pgm(g, t_out);
    std::cout << "terrain " << t_kind << ": " << g.rows() << "x" << g.cols() << " cells at " << g.resolution()
              << " m -> " << t_out << "\n";
  });

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate the foothold safety criteria on one window");
  std::string e_terrain, e_hip, e_liftoff, e_center, e_leg = "LF", e_out;
  double e_heading = 0.0;
  eval->add_option("--terrain", e_terrain, "Terrain PGM")->required();
  eval->add_option("--hip", e_hip, "Hip position at touchdown: x,y,z")->required();
  eval->add_option("--liftoff", e_liftoff, "Foot lift-off position: x,y,z")->required();
  eval->add_option("--center", e_center, "Window center x,y (default: hip x,y)");
  eval->add_option("--leg", e_leg, "LF | RF | LH | RH")->capture_default_str();
  eval->add_option("--heading", e_heading, "Base yaw [rad]")->capture_default_str();
  eval->add_option("--out", e_out, "Output directory for mask.pgm / mask.json");
  eval->callback([&] {
    FootQuery q;
    q.leg_id = parse_leg(e_leg);
    q.hip_touchdown = parse_vec3(e_hip, "--hip");
    q.foot_liftoff = parse_vec3(e_liftoff, "--liftoff");
    q.heading = e_heading;
    const Vec2 center = e_center.empty() ? Vec2(q.hip_touchdown.head<2>()) : parse_vec2(e_center, "--center");
    const TerrainGrid g = read_terrain_pgm(e_terrain);
    const SafetyMask m = evaluate(extract_window(g, center), q, RobotGeometry{});
    std::cout << "safe cells: " << m.safe_count() << "/" << kWindowCells << "  eval " << std::fixed
              << std::setprecision(1) << m.eval_time_us << " us\n";
    if (!e_out.empty()) write_mask_pgm(m, (out_dir(e_out) / "mask.pgm").string());
  });

  // decompose
  auto* dec = app.add_subcommand("decompose", "Extract convex safe regions from a mask");
  std::string d_mask, d_nominal, d_terrain, d_out;
  dec->add_option("--mask", d_mask, "Mask PGM (with sidecar JSON)")->required();
  dec->add_option("--nominal", d_nominal, "Nominal foothold x,y")->required();
  dec->add_option("--terrain", d_terrain, "Terrain PGM, for each region's reference height");
  dec->add_option("--out", d_out, "Output directory for regions.json");
  dec->callback([&] {
    const SafetyMask m = read_mask_pgm(d_mask);
    const Vec2 nominal = parse_vec2(d_nominal, "--nominal");
    std::optional<HeightmapWindow> window;
    if (!d_terrain.empty()) window = extract_window(read_terrain_pgm(d_terrain), m.center_xy);
    const RegionResult rr = decompose_and_select(m, nominal, RobotGeometry{}, window ? &*window : nullptr);
    std::cout << rr.candidates.size() << " region(s)";
    if (rr.has_region())
      std::cout << ", selected #" << *rr.selected << " at distance " << rr.distance << " m, area " << rr.region().area
                << " m^2";
    std::cout << "\n";
    if (!d_out.empty()) write_json_file(to_json(rr), (out_dir(d_out) / "regions.json").string());
    if (!rr.has_region()) code = kDomain;
  });

  // qp solve
  auto* qp = app.add_subcommand("qp", "Quadratic programming");
  qp->require_subcommand(1);
  auto* qsolve = qp->add_subcommand("solve", "Solve a QP given as JSON");
  std::string q_in, q_out;
  QpSettings q_settings;
  qsolve->add_option("--in", q_in, "Problem JSON {n,m,P,q,A,l,u}")->required();
  qsolve->add_option("--out", q_out, "Output directory for solution.json");
  qsolve->add_option("--max-iters", q_settings.max_iters)->capture_default_str();
  qsolve->add_option("--eps", q_settings.eps_pri, "Absolute residual tolerance")->capture_default_str();
  qsolve->callback([&] {
    q_settings.eps_dua = q_settings.eps_pri;
    const QpProblem problem = qp_from_json(read_json_file(q_in));
    AdmmSolver solver(q_settings);
    const QpSolution s = solver.solve(problem);
    std::cout << "status " << to_string(s.status) << " after " << s.iterations << " iterations, objective "
              << std::setprecision(10) << s.objective << "\n";
    if (!q_out.empty()) write_json_file(to_json(s), (out_dir(q_out) / "solution.json").string());
    if (s.status != QpStatus::solved) code = kDomain;
  });

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run one closed-loop scenario");
  std::string s_config, s_mode, s_out, s_weights;
  double s_duration = 0.0;
  sim->add_option("--config", s_config, "Scenario JSON")->required();
  sim->add_option("--mode", s_mode, "heuristic | convex")->check(CLI::IsMember({"heuristic", "convex", "convex_region"}));
  sim->add_option("--duration", s_duration, "Override duration [s]");
  sim->add_option("--weights", s_weights, "Surrogate network weights (SFNW); replaces the exact criteria");
  sim->add_option("--out", s_out, "Output directory for log.csv, ticks.csv, footholds.csv, summary.json");
  sim->callback([&] {
    SimConfig cfg = sim_config_from_json(read_json_file(s_config));
    if (!s_mode.empty()) cfg.mode = s_mode == "heuristic" ? ControllerMode::heuristic : ControllerMode::convex_region;
    if (s_duration > 0.0) cfg.duration = s_duration;
    cfg.surrogate = load_surrogate(s_weights);
    const SimLog log = run_scenario(cfg);
    const SimSummary sum = summarize(log);
    std::cout << "simulate:\n";
    print_summary(sum);
    if (log.fell) std::cout << "  fall reason: " << log.fall_reason << "\n";
    if (!s_out.empty()) {
      const fs::path dir = out_dir(s_out);
      write_stream(dir / "log.csv", [&](std::ostream& os) { write_log_csv(log, os); });
      write_stream(dir / "ticks.csv", [&](std::ostream& os) { write_ticks_csv(log, os); });
      write_stream(dir / "footholds.csv", [&](std::ostream& os) { write_footholds_csv(log, os); });
      json j = to_json(sum);
      j["fall_reason"] = log.fall_reason;
      write_json_file(j, (dir / "summary.json").string());
    }
    if (log.fell) code = kDomain;
  });

  // compare
  auto* cmp = app.add_subcommand("compare", "Run heuristic and convex-region modes on the same scenario");
  std::string c_config, c_out, c_weights;
  cmp->add_option("--config", c_config, "Scenario JSON")->required();
  cmp->add_option("--weights", c_weights, "Surrogate network weights (SFNW)");
  cmp->add_option("--out", c_out, "Output directory for traces.csv and summary.json");
  cmp->callback([&] {
    SimConfig cfg = sim_config_from_json(read_json_file(c_config));
    cfg.surrogate = load_surrogate(c_weights);
    const ModeComparison mc = compare_modes(cfg);
    std::cout << "compare:\n";
    print_summary(mc.heuristic_summary);
    print_summary(mc.convex_summary);
    std::cout << "  convex_region better: " << (mc.convex_better() ? "yes" : "no") << "\n";
    if (!c_out.empty()) {
      const fs::path dir = out_dir(c_out);
      write_stream(dir / "traces.csv", [&](std::ostream& os) {
        os << "t,roll_heuristic,pitch_heuristic,roll_convex,pitch_convex\n";
        os.precision(10);
        const std::size_t n = std::max(mc.heuristic.samples.size(), mc.convex.samples.size());
        for (std::size_t k = 0; k < n; ++k) {
          const SimSample* h = k < mc.heuristic.samples.size() ? &mc.heuristic.samples[k] : nullptr;
          const SimSample* c = k < mc.convex.samples.size() ? &mc.convex.samples[k] : nullptr;
          os << (h ? h->t : c->t) << ',';
          if (h) os << h->rpy.x() << ',' << h->rpy.y();
          else os << ',';
          os << ',';
          if (c) os << c->rpy.x() << ',' << c->rpy.y();
          else os << ',';
          os << "\n";
        }
      });
      json j = {{"heuristic", to_json(mc.heuristic_summary)},
                {"convex_region", to_json(mc.convex_summary)},
                {"convex_better", mc.convex_better()}};
      write_json_file(j, (dir / "summary.json").string());
    }
  });

  // dataset gen
  auto* ds = app.add_subcommand("dataset", "Training data export");
  ds->require_subcommand(1);
  auto* dgen = ds->add_subcommand("gen", "Generate labeled windows (SFDS)");
  std::size_t ds_count = 0;
  std::uint64_t ds_seed = 0;
  std::string ds_out;
  dgen->add_option("--count", ds_count, "Number of windows")->required()->check(CLI::PositiveNumber);
  dgen->add_option("--seed", ds_seed, "Random seed")->capture_default_str();
  dgen->add_option("--out", ds_out, "Output SFDS file")->required();
  dgen->callback([&] {
    const auto records = generate_dataset(ds_count, ds_seed, RobotGeometry{});
    fs::path p(ds_out);
    if (p.has_parent_path()) out_dir(p.parent_path().string());
    write_dataset(records, ds_out);
    std::size_t safe = 0;
    for (const auto& r : records) safe += static_cast<std::size_t>(std::count(r.labels.begin(), r.labels.end(), 1));
    std::cout << "dataset: " << records.size() << " windows, safe fraction " << std::fixed << std::setprecision(3)
              << static_cast<double>(safe) / static_cast<double>(records.size() * kWindowCells) << " -> " << ds_out
              << "\n";
  });

  // net predict / bench
  auto* net = app.add_subcommand("net", "Surrogate network inference");
  net->require_subcommand(1);
  auto* npred = net->add_subcommand("predict", "Predict a safety mask for one window");
  std::string n_weights, n_terrain, n_center, n_out;
  npred->add_option("--weights", n_weights, "SFNW weights")->required();
  npred->add_option("--terrain", n_terrain, "Terrain PGM")->required();
  npred->add_option("--center", n_center, "Window center x,y")->required();
  npred->add_option("--out", n_out, "Output directory for mask.pgm and logits.json");
  npred->callback([&] {
    const NetWeights w = load_weights(n_weights);
    const Vec2 center = parse_vec2(n_center, "--center");
    const HeightmapWindow window = extract_window(read_terrain_pgm(n_terrain), center);
    const Logits logits = forward(w, window);
    const SafetyMask m = predict_mask(w, window);
    std::cout << "predicted safe cells: " << m.safe_count() << "/" << kWindowCells << "\n";
    if (!n_out.empty()) {
      const fs::path dir = out_dir(n_out);
      write_mask_pgm(m, (dir / "mask.pgm").string());
      write_json_file(json{{"logits", std::vector<float>(logits.begin(), logits.end())}},
                      (dir / "logits.json").string());
    }
  });
  auto* nbench = net->add_subcommand("bench", "Time the network against the exact criteria");
  std::string nb_weights, nb_out;
  std::size_t nb_count = 200;
  std::uint64_t nb_seed = 0;
  nbench->add_option("--weights", nb_weights, "SFNW weights")->required();
  nbench->add_option("--count", nb_count, "Number of windows (>= 100)")->capture_default_str()->check(CLI::Range(100, 1000000));
  nbench->add_option("--seed", nb_seed)->capture_default_str();
  nbench->add_option("--out", nb_out, "Output directory for bench.json");
  nbench->callback([&] {
    const NetWeights w = load_weights(nb_weights);
    const BenchmarkReport r = benchmark(w, sample_queries(nb_count, nb_seed), RobotGeometry{});
    std::cout << std::fixed << std::setprecision(1) << "windows: " << r.windows << "\n"
              << "criteria: median " << r.criteria.median_us << " us, p95 " << r.criteria.p95_us << " us\n"
              << "network:  median " << r.network.median_us << " us, p95 " << r.network.p95_us << " us\n"
              << std::setprecision(4) << "agreement: accuracy " << r.agreement.accuracy << ", IoU " << r.agreement.iou
              << "\n";
    if (!nb_out.empty()) {
      json j = {{"windows", r.windows},
                {"criteria_us", {{"median", r.criteria.median_us}, {"p95", r.criteria.p95_us}}},
                {"network_us", {{"median", r.network.median_us}, {"p95", r.network.p95_us}}},
                {"accuracy", r.agreement.accuracy},
                {"iou", r.agreement.iou}};
      write_json_file(j, (out_dir(nb_out) / "bench.json").string());
    }
  });

  // bench
  auto* bench = app.add_subcommand("bench", "Per-tick pipeline time: 4-leg criteria + regions + MPC");
  std::string b_config, b_out;
  double b_duration = 3.0;
  bench->add_option("--config", b_config, "Scenario JSON (default: built-in stairs scenario)");
  bench->add_option("--duration", b_duration, "Simulated seconds to time")->capture_default_str();
  bench->add_option("--out", b_out, "Output directory for bench.json");
  bench->callback([&] {
    SimConfig cfg = b_config.empty() ? SimConfig{} : sim_config_from_json(read_json_file(b_config));
    cfg.mode = ControllerMode::convex_region;
    cfg.duration = b_duration;
    cfg.perceive_all_legs = true;
    const SimLog log = run_scenario(cfg);
    std::vector<double> tick;
    for (const auto& r : log.ticks) tick.push_back(r.pipeline_us);
    const TimingStats st = TimingStats::from(tick);
    const SimSummary sum = summarize(log);
    std::cout << std::fixed << std::setprecision(2) << "ticks: " << log.ticks.size() << "\n"
              << "pipeline per tick: mean " << st.mean_us / 1e3 << " ms, median " << st.median_us / 1e3 << " ms, p95 "
              << st.p95_us / 1e3 << " ms (150 Hz budget 6.67 ms)\n"
              << "  criteria " << sum.mean_criteria_us / 1e3 << " ms, MPC " << sum.mean_solve_us / 1e3 << " ms\n";
    if (!b_out.empty()) {
      json j = {{"ticks", log.ticks.size()},
                {"mean_ms", st.mean_us / 1e3},
                {"median_ms", st.median_us / 1e3},
                {"p95_ms", st.p95_us / 1e3},
                {"mean_criteria_ms", sum.mean_criteria_us / 1e3},
                {"mean_mpc_ms", sum.mean_solve_us / 1e3},
                {"budget_ms", 1e3 / 150.0}};
      write_json_file(j, (out_dir(b_out) / "bench.json").string());
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const FormatError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDomain;
  }
  return code;
}
