#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "safehood/cover.hpp"

namespace fs = std::filesystem;
using namespace safehood;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitModel = 2;
constexpr int kExitBlocked = 3;
constexpr int kExitFalsified = 4;
constexpr int kExitInconclusive = 5;

std::string resolve_model_path(std::string path) {
  if (fs::is_directory(path)) return (fs::path(path) / "model.json").string();
  return path;
}

Vec parse_csv_vec(const std::string& text, int n, const std::string& what) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
  if (static_cast<int>(vals.size()) != n)
    throw ModelError(what, "expected " + std::to_string(n) + " numbers");
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = vals[i];
  return v;
}

struct RunDir {
  fs::path dir;
  std::vector<std::string> artifacts;
  nlohmann::ordered_json manifest;

  explicit RunDir(const std::string& out) : dir(out) { fs::create_directories(dir); }

  void write(const std::string& name, const std::string& content) {
    std::ofstream f(dir / name, std::ios::binary);
    f << content;
    artifacts.push_back(name);
  }

  // the manifest is written last so its presence marks a completed run
  void finalize() {
    manifest["artifacts"] = artifacts;
    manifest["timestamp"] =
        static_cast<long>(std::chrono::duration_cast<std::chrono::seconds>(
                              std::chrono::system_clock::now().time_since_epoch())
                              .count());
    const fs::path tmp = dir / "manifest.json.tmp";
    {
      std::ofstream f(tmp, std::ios::binary);
      f << manifest.dump(2);
    }
    fs::rename(tmp, dir / "manifest.json");
  }
};

const char* status_name(TerminalStatus s) {
  switch (s) {
    case TerminalStatus::HorizonReached: return "horizon-reached";
    case TerminalStatus::Blocked: return "blocked";
    default: return "unsafe-hit";
  }
}

std::string radii_line(const std::vector<double>& radii) {
  std::ostringstream os;
  os << "d_min = [";
  for (size_t i = 0; i < radii.size(); ++i) {
    if (i) os << ", ";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", radii[i]);
    os << buf;
  }
  os << "]";
  return os.str();
}

int load_and_validate(const std::string& path, HybridAutomaton* H) {
  try {
    *H = load_model_file(resolve_model_path(path));
  } catch (const std::exception& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kExitModel;
  }
  auto diags = validate_assumptions(*H);
  if (!diags.empty()) {
    for (const auto& d : diags)
      std::cerr << "assumption violation [" << d.code << "]: " << d.message << "\n";
    return kExitModel;
  }
  return kExitOk;
}

// 2-D plot layers for a completed run directory
int emit_plotdata(const std::string& rundir) {
  const fs::path dir(rundir);
  if (!fs::exists(dir / "manifest.json")) {
    std::cerr << "plotdata: no manifest.json in " << rundir << "\n";
    return kExitModel;
  }
  nlohmann::json manifest;
  {
    std::ifstream f(dir / "manifest.json");
    f >> manifest;
  }
  HybridAutomaton H;
  if (int rc = load_and_validate(manifest.at("model").get<std::string>(), &H);
      rc != kExitOk)
    return rc;
  if (H.dim != 2) {
    std::cerr << "plotdata: only 2-dimensional models are supported\n";
    return kExitModel;
  }
  Metrics metrics = build_metrics(H);
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.15g", v);
    return std::string(buf);
  };

  // trajectory polylines straight from the stored CSV
  std::vector<int> visited;
  {
    std::ifstream f(dir / "trajectory.csv");
    if (!f) {
      std::cerr << "plotdata: trajectory.csv missing\n";
      return kExitModel;
    }
    std::ofstream out(dir / "plot_trajectories.csv", std::ios::binary);
    out << "polyline,location,t,x1,x2\n";
    std::string line;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
      std::stringstream ss(line);
      std::string seg, loc, t, x1, x2;
      std::getline(ss, seg, ',');
      std::getline(ss, loc, ',');
      std::getline(ss, t, ',');
      std::getline(ss, x1, ',');
      std::getline(ss, x2, ',');
      out << seg << "," << loc << "," << t << "," << x1 << "," << x2 << "\n";
      const int li = H.location_index(loc);
      if (li >= 0 && std::find(visited.begin(), visited.end(), li) == visited.end())
        visited.push_back(li);
    }
  }

  const double clip = 10.0;
  {
    std::ofstream out(dir / "plot_guards.csv", std::ios::binary);
    out << "guard,point,x1,x2\n";
    for (int li : visited)
      for (int ei : H.events_from(li)) {
        VertexSet vs = enumerate_vertices(H.events[ei].guard);
        std::vector<Vec> pts = vs.vertices;
        if (pts.size() == 1 && !vs.rays.empty())
          pts.push_back(pts[0] + clip * vs.rays[0]);
        for (size_t p = 0; p < pts.size() && p < 2; ++p)
          out << H.events[ei].id << "," << p << "," << num(pts[p](0)) << ","
              << num(pts[p](1)) << "\n";
      }
  }
  {
    std::ofstream out(dir / "plot_unsafe.csv", std::ios::binary);
    out << "unsafe,point,x1,x2\n";
    int uid = 0;
    for (size_t ui = 0; ui < H.unsafe.size(); ++ui) {
      if (std::find(visited.begin(), visited.end(), H.unsafe[ui].location) ==
          visited.end())
        continue;
      VertexSet vs = enumerate_vertices(H.unsafe[ui].set);
      Vec c = Vec::Zero(2);
      for (const auto& v : vs.vertices) c += v;
      if (!vs.vertices.empty()) c /= static_cast<double>(vs.vertices.size());
      std::sort(vs.vertices.begin(), vs.vertices.end(),
                [&](const Vec& a, const Vec& b) {
                  return std::atan2(a(1) - c(1), a(0) - c(0)) <
                         std::atan2(b(1) - c(1), b(0) - c(0));
                });
      for (size_t p = 0; p < vs.vertices.size(); ++p)
        out << uid << "," << p << "," << num(vs.vertices[p](0)) << ","
            << num(vs.vertices[p](1)) << "\n";
      ++uid;
    }
  }
  int balls = 0;
  if (fs::exists(dir / "report.json")) {
    nlohmann::json report;
    {
      std::ifstream f(dir / "report.json");
      f >> report;
    }
    std::ofstream out(dir / "plot_balls.csv", std::ios::binary);
    out << "ball,location,theta,x1,x2\n";
    for (const auto& s : report.at("samples")) {
      const double radius = s.at("radius").get<double>();
      if (radius <= 0.0) continue;
      const int li = H.location_index(s.at("location").get<std::string>());
      if (li < 0) continue;
      Vec c(2);
      c(0) = s.at("state")[0].get<double>();
      c(1) = s.at("state")[1].get<double>();
      Eigen::SelfAdjointEigenSolver<Mat> es(metrics.at(li).M);
      Mat Minvhalf = es.operatorInverseSqrt();
      for (int k = 0; k <= 128; ++k) {
        const double th = 2.0 * M_PI * k / 128.0;
        Vec u(2);
        u << std::cos(th), std::sin(th);
        Vec p = c + radius * (Minvhalf * u);
        out << balls << "," << H.locations[li].id << "," << num(th) << ","
            << num(p(0)) << "," << num(p(1)) << "\n";
      }
      ++balls;
    }
  }
  std::cout << "plot layers written to " << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_cap_from_env();
  CLI::App app{"simulation-based safety verification for affine hybrid automata"};
  app.require_subcommand(1);

  std::string model_path, out_dir = "safehood_run", initial_str, box_str, mode_str;
  double sim_time = -1.0, max_lead = -1.0, max_lag = -1.0, d_thr = -2.0,
         alpha = -1.0;
  unsigned long seed = 0;
  bool seed_set = false, serial = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("model", model_path, "model file or directory")->required();
    cmd->add_option("--out", out_dir, "run output directory");
    cmd->add_option("--sim-time", sim_time, "simulation horizon");
    cmd->add_flag("--serial", serial, "disable the parallel kernels");
  };

  CLI::App* sim = app.add_subcommand("simulate", "simulate one trajectory");
  add_common(sim);
  sim->add_option("--initial", initial_str, "initial state x1,..,xn");

  CLI::App* ver = app.add_subcommand("verify", "compute certified neighborhoods");
  add_common(ver);
  ver->add_option("--mode", mode_str, "robust|safe")->required();
  ver->add_option("--initial-state", initial_str, "single state x1,..,xn");
  ver->add_option("--initial-box", box_str, "box lo1,hi1,..,lon,hin");
  ver->add_option("--max-lead", max_lead, "maximum event time lead");
  ver->add_option("--max-lag", max_lag, "maximum event time lag");
  ver->add_option("--d-thr", d_thr, "guard proximity threshold");
  ver->add_option("--alpha", alpha, "window margin factor in (0,1)");
  ver->add_option("--seed", seed, "rng seed")->each([&](const std::string&) {
    seed_set = true;
  });

  CLI::App* plot = app.add_subcommand("plotdata", "emit plot CSV layers for a run");
  std::string rundir;
  plot->add_option("rundir", rundir, "completed run directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (plot->parsed()) return emit_plotdata(rundir);

  HybridAutomaton H;
  if (int rc = load_and_validate(model_path, &H); rc != kExitOk) return rc;
  if (sim_time >= 0.0) H.config.t_end = sim_time;
  if (max_lead >= 0.0) H.config.tau_maxlead = max_lead;
  if (max_lag >= 0.0) H.config.tau_maxlag = max_lag;
  if (d_thr > -1.5) H.config.d_thr = d_thr;
  if (alpha > 0.0) H.config.alpha = alpha;
  if (seed_set) H.config.seed = seed;
  if (serial) H.config.parallel = false;
  try {
    H.config.validate();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitModel;
  }

  RunDir run(out_dir);
  run.manifest["model"] = resolve_model_path(model_path);
  run.manifest["seed"] = H.config.seed;
  run.manifest["out_dir"] = out_dir;

  if (sim->parsed()) {
    run.manifest["command"] = "simulate";
    Vec x0 = H.initial.is_box ? Vec(0.5 * (H.initial.lo + H.initial.hi))
                              : H.initial.point;
    if (!initial_str.empty()) x0 = parse_csv_vec(initial_str, H.dim, "--initial");
    HybridTrajectory traj =
        simulate(H, H.initial.location, x0, 0.0, H.config.t_end, H.config);
    std::ostringstream csv;
    write_trajectory_csv(csv, H, traj);
    run.write("trajectory.csv", csv.str());
    std::cout << "segments: " << traj.segments.size() << "\n";
    std::cout << "events:";
    for (const auto& e : traj.events)
      std::cout << " " << H.events[e.event_index].id << "@t=" << e.time;
    std::cout << "\nstatus: " << status_name(traj.status) << "\n";
    for (const auto& d : traj.diagnostics)
      std::cout << "diagnostic [" << d.code << "]: " << d.message << "\n";
    run.finalize();
    if (traj.status == TerminalStatus::Blocked) return kExitBlocked;
    return kExitOk;
  }

  // verify
  run.manifest["command"] = "verify";
  run.manifest["mode"] = mode_str;
  VerifyMode mode;
  if (mode_str == "robust")
    mode = VerifyMode::Robust;
  else if (mode_str == "safe")
    mode = VerifyMode::Safe;
  else {
    std::cerr << "--mode must be robust or safe\n";
    return kExitModel;
  }
  Metrics metrics;
  try {
    metrics = build_metrics(H);
  } catch (const std::exception& e) {
    std::cerr << "metric error: " << e.what() << "\n";
    return kExitModel;
  }

  if (!box_str.empty()) {
    Vec lohi = parse_csv_vec(box_str, 2 * H.dim, "--initial-box");
    H.initial.is_box = true;
    H.initial.lo = Vec(H.dim);
    H.initial.hi = Vec(H.dim);
    for (int i = 0; i < H.dim; ++i) {
      H.initial.lo(i) = lohi(2 * i);
      H.initial.hi(i) = lohi(2 * i + 1);
    }
  } else if (!initial_str.empty()) {
    H.initial.is_box = false;
    H.initial.point = parse_csv_vec(initial_str, H.dim, "--initial-state");
  }

  VerificationConfig cfg = resolve_config(H, metrics);

  if (!H.initial.is_box) {
    // single state: per-location radii vector along the triggered chain
    const Vec x0 = H.initial.point;
    HybridTrajectory traj =
        simulate(H, H.initial.location, x0, 0.0, cfg.t_end, cfg);
    std::ostringstream csv;
    write_trajectory_csv(csv, H, traj);
    run.write("trajectory.csv", csv.str());
    if (traj.status == TerminalStatus::Blocked) {
      for (const auto& d : traj.diagnostics)
        std::cerr << "diagnostic [" << d.code << "]: " << d.message << "\n";
      run.finalize();
      return kExitBlocked;
    }
    if (traj.status == TerminalStatus::UnsafeHit) {
      std::cout << "falsified: trajectory enters the unsafe set at t="
                << *traj.unsafe_entry_time << "\n";
      run.finalize();
      return kExitFalsified;
    }
    std::vector<double> radii;
    CoverageReport report;
    report.mode = mode;
    if (mode == VerifyMode::Robust) {
      RobustResult rr = robust_neighborhood(H, traj, metrics, cfg);
      for (size_t i = 0; i < rr.neighborhoods.size(); ++i) {
        radii.push_back(rr.neighborhoods[i].radius);
        SampleRecord rec;
        rec.state = rr.neighborhoods[i].center;
        rec.box_lo = rec.box_hi = rec.state;
        rec.nbhd = rr.neighborhoods[i];
        rec.crit = classify_trajectory(traj, rr, cfg);
        rec.covered = rr.neighborhoods[i].radius > 0.0;
        report.samples.push_back(std::move(rec));
      }
    } else {
      SafeResult sr = safe_neighborhood(H, metrics, cfg, H.initial.location, x0,
                                        0.0, cfg.t_end);
      radii = sr.radii_chain_safe;
      RobustResult rr = robust_neighborhood(H, traj, metrics, cfg);
      int idx = 0;
      for (const SafeNode* n = sr.root.get(); n != nullptr;
           n = n->chain.get(), ++idx) {
        SampleRecord rec;
        rec.state = n->entry_state;
        rec.box_lo = rec.box_hi = rec.state;
        rec.nbhd = Neighborhood{n->location, n->entry_state, n->gamma_safe,
                                n->location, Neighborhood::Kind::Safe};
        rec.crit = classify_trajectory(traj, rr, cfg);
        rec.covered = n->gamma_safe > 0.0;
        report.samples.push_back(std::move(rec));
      }
    }
    report.covered_fraction = (!radii.empty() && radii.front() > 0.0) ? 1.0 : 0.0;
    report.verdict = report.covered_fraction > 0.0
                         ? CoverageReport::Verdict::VerifiedSafe
                         : CoverageReport::Verdict::Inconclusive;
    report.simulations = 1;
    run.write("report.json", report_to_json(H, report));
    std::ostringstream ncsv;
    write_neighborhood_csv(ncsv, H, report);
    run.write("neighborhoods.csv", ncsv.str());
    std::cout << radii_line(radii) << "\n";
    run.finalize();
    if (radii.empty() || radii.front() <= 0.0) return kExitInconclusive;
    return kExitOk;
  }

  CoverageReport report;
  try {
    report = cover_initial_set(H, metrics, cfg, mode);
  } catch (const std::exception& e) {
    std::cerr << "verify error: " << e.what() << "\n";
    return kExitModel;
  }
  run.write("report.json", report_to_json(H, report));
  std::ostringstream ncsv;
  write_neighborhood_csv(ncsv, H, report);
  run.write("neighborhoods.csv", ncsv.str());
  if (report.counterexample) {
    std::ostringstream csv;
    write_trajectory_csv(csv, H, *report.counterexample);
    run.write("counterexample.csv", csv.str());
  }
  run.manifest["wall_ms"] = report.wall_ms;
  std::cout << "verdict: "
            << (report.verdict == CoverageReport::Verdict::VerifiedSafe
                    ? "verified-safe"
                    : report.verdict == CoverageReport::Verdict::Falsified
                          ? "falsified"
                          : "inconclusive")
            << "\ncovered_fraction: " << report.covered_fraction
            << "\nsimulations: " << report.simulations << "\n";
  run.finalize();
  switch (report.verdict) {
    case CoverageReport::Verdict::VerifiedSafe: return kExitOk;
    case CoverageReport::Verdict::Falsified: return kExitFalsified;
    default: return kExitInconclusive;
  }
}
