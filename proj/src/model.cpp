#include "safehood/model.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace safehood {

using nlohmann::ordered_json;

void VerificationConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ModelError("config.alpha", "must lie in (0,1)");
  if (!(event_tol > 0.0 && dist_tol > 0.0 && time_grid_dt > 0.0))
    throw ModelError("config", "tolerances must be positive");
  if (tau_maxlead < 0.0 || tau_maxlag < 0.0)
    throw ModelError("config", "tau_maxlead and tau_maxlag must be >= 0");
  if (t_end < 0.0) throw ModelError("config.t_end", "must be >= 0");
  if (max_recursion_depth < 0 || coverage_max_depth < 0)
    throw ModelError("config", "depth limits must be >= 0");
}

int HybridAutomaton::location_index(const std::string& id) const {
  for (size_t i = 0; i < locations.size(); ++i)
    if (locations[i].id == id) return static_cast<int>(i);
  return -1;
}

std::vector<int> HybridAutomaton::events_from(int loc) const {
  std::vector<int> out;
  for (size_t i = 0; i < events.size(); ++i)
    if (events[i].source == loc) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> HybridAutomaton::unsafe_in(int loc) const {
  std::vector<int> out;
  for (size_t i = 0; i < unsafe.size(); ++i)
    if (unsafe[i].location == loc) out.push_back(static_cast<int>(i));
  return out;
}

namespace {

Vec parse_vec(const ordered_json& j, int n, const std::string& locus) {
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    throw ModelError(locus, "expected a list of " + std::to_string(n) + " numbers");
  Vec v(n);
  for (int i = 0; i < n; ++i) {
    if (!j[i].is_number()) throw ModelError(locus, "expected decimal literals");
    v(i) = j[i].get<double>();
  }
  return v;
}

Mat parse_square(const ordered_json& j, int n, const std::string& locus) {
  if (!j.is_array() || static_cast<int>(j.size()) != n * n)
    throw ModelError(locus, "expected a row-major list of " +
                                std::to_string(n * n) + " numbers");
  Mat m(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) m(r, c) = j[r * n + c].get<double>();
  return m;
}

Polytope parse_polytope(const ordered_json& j, int n, const std::string& locus) {
  if (!j.is_object() || !j.contains("H") || !j.contains("h"))
    throw ModelError(locus, "expected {H, h}");
  const auto& H = j["H"];
  const auto& h = j["h"];
  if (!H.is_array() || !h.is_array() || H.size() != h.size())
    throw ModelError(locus, "H and h must be lists of equal length");
  const int m = static_cast<int>(H.size());
  Polytope P{Mat::Zero(m, n), Vec::Zero(m)};
  for (int r = 0; r < m; ++r) {
    P.H.row(r) = parse_vec(H[r], n, locus + ".H[" + std::to_string(r) + "]").transpose();
    if (!h[r].is_number()) throw ModelError(locus + ".h", "expected decimal literals");
    P.h(r) = h[r].get<double>();
  }
  return P;
}

ordered_json dump_vec(const Eigen::Ref<const Vec>& v) {
  ordered_json a = ordered_json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

ordered_json dump_square(const Mat& m) {
  ordered_json a = ordered_json::array();
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  return a;
}

ordered_json dump_polytope(const Polytope& P) {
  ordered_json j;
  ordered_json H = ordered_json::array();
  for (int r = 0; r < P.rows(); ++r) H.push_back(dump_vec(P.H.row(r).transpose()));
  j["H"] = H;
  j["h"] = dump_vec(P.h);
  return j;
}

}  // namespace

HybridAutomaton load_model(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelError("document", e.what());
  }
  HybridAutomaton H;
  if (!j.contains("dimension") || !j["dimension"].is_number_integer())
    throw ModelError("dimension", "missing or not an integer");
  H.dim = j["dimension"].get<int>();
  if (H.dim <= 0) throw ModelError("dimension", "must be positive");
  const int n = H.dim;

  if (!j.contains("locations") || !j["locations"].is_array() || j["locations"].empty())
    throw ModelError("locations", "at least one location required");
  for (size_t li = 0; li < j["locations"].size(); ++li) {
    const auto& jl = j["locations"][li];
    const std::string locus = "locations[" + std::to_string(li) + "]";
    Location loc;
    loc.id = jl.value("id", std::string{});
    if (loc.id.empty()) throw ModelError(locus + ".id", "missing");
    loc.A = parse_square(jl.at("A"), n, locus + ".A");
    loc.b = jl.contains("b") ? parse_vec(jl["b"], n, locus + ".b") : Vec::Zero(n);
    loc.invariant = jl.contains("invariant")
                        ? parse_polytope(jl["invariant"], n, locus + ".invariant")
                        : Polytope::whole_space(n);
    if (jl.contains("M")) loc.metric_override = parse_square(jl["M"], n, locus + ".M");
    // full-dimensionality probe: shrinking every row kills thin sets
    if (loc.invariant.rows() > 0 &&
        polytope_is_empty(loc.invariant.shrunk(1e-7)))
      loc.invariant_degenerate = true;
    H.locations.push_back(std::move(loc));
  }

  if (j.contains("events")) {
    for (size_t ei = 0; ei < j["events"].size(); ++ei) {
      const auto& je = j["events"][ei];
      const std::string locus = "events[" + std::to_string(ei) + "]";
      EventDef e;
      e.id = je.value("id", "e" + std::to_string(ei + 1));
      e.source = H.location_index(je.value("source", std::string{}));
      e.target = H.location_index(je.value("target", std::string{}));
      if (e.source < 0) throw ModelError(locus + ".source", "unknown location id");
      if (e.target < 0) throw ModelError(locus + ".target", "unknown location id");
      e.guard = parse_polytope(je.at("guard"), n, locus + ".guard");
      e.facet = je.value("facet", -1);
      if (e.facet < 0 || e.facet >= H.locations[e.source].invariant.rows())
        throw ModelError(locus + ".facet", "not a row of the source invariant");
      e.reset.R = je.contains("reset") && je["reset"].contains("R")
                      ? parse_square(je["reset"]["R"], n, locus + ".reset.R")
                      : Mat::Identity(n, n);
      e.reset.s = je.contains("reset") && je["reset"].contains("s")
                      ? parse_vec(je["reset"]["s"], n, locus + ".reset.s")
                      : Vec::Zero(n);
      H.events.push_back(std::move(e));
    }
  }

  if (j.contains("unsafe")) {
    for (size_t ui = 0; ui < j["unsafe"].size(); ++ui) {
      const auto& ju = j["unsafe"][ui];
      const std::string locus = "unsafe[" + std::to_string(ui) + "]";
      UnsafeSet u;
      u.location = H.location_index(ju.value("location", std::string{}));
      if (u.location < 0) throw ModelError(locus + ".location", "unknown location id");
      u.set = parse_polytope(ju, n, locus);
      if (polytope_is_empty(u.set))
        throw ModelError(locus, "unsafe polytope is empty");
      H.unsafe.push_back(std::move(u));
    }
  }

  if (j.contains("initial")) {
    const auto& ji = j["initial"];
    H.initial.location = H.location_index(ji.value("location", std::string{}));
    if (H.initial.location < 0)
      throw ModelError("initial.location", "unknown location id");
    if (ji.contains("point")) {
      H.initial.point = parse_vec(ji["point"], n, "initial.point");
    } else if (ji.contains("box")) {
      H.initial.is_box = true;
      H.initial.lo = parse_vec(ji["box"].at("lo"), n, "initial.box.lo");
      H.initial.hi = parse_vec(ji["box"].at("hi"), n, "initial.box.hi");
      for (int i = 0; i < n; ++i)
        if (H.initial.lo(i) > H.initial.hi(i))
          throw ModelError("initial.box", "lo exceeds hi");
    } else {
      throw ModelError("initial", "needs point or box");
    }
  } else {
    H.initial.location = 0;
    H.initial.point = Vec::Zero(n);
  }

  if (j.contains("config")) {
    const auto& jc = j["config"];
    auto& c = H.config;
    c.d_thr = jc.value("d_thr", c.d_thr);
    c.tau_maxlead = jc.value("tau_maxlead", c.tau_maxlead);
    c.tau_maxlag = jc.value("tau_maxlag", c.tau_maxlag);
    c.alpha = jc.value("alpha", c.alpha);
    c.t_end = jc.value("t_end", c.t_end);
    c.event_tol = jc.value("event_tol", c.event_tol);
    c.dist_tol = jc.value("dist_tol", c.dist_tol);
    c.time_grid_dt = jc.value("time_grid_dt", c.time_grid_dt);
    c.max_recursion_depth = jc.value("max_recursion_depth", c.max_recursion_depth);
    c.coverage_max_depth = jc.value("coverage_max_depth", c.coverage_max_depth);
    c.radius_cap = jc.value("radius_cap", c.radius_cap);
    c.max_events = jc.value("max_events", c.max_events);
    c.seed = jc.value("seed", c.seed);
  }
  H.config.validate();
  return H;
}

HybridAutomaton load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError(path, "cannot open model file");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_model(ss.str());
}

std::string serialize(const HybridAutomaton& H) {
  ordered_json j;
  j["dimension"] = H.dim;
  ordered_json locs = ordered_json::array();
  for (const auto& loc : H.locations) {
    ordered_json jl;
    jl["id"] = loc.id;
    jl["A"] = dump_square(loc.A);
    jl["b"] = dump_vec(loc.b);
    jl["invariant"] = dump_polytope(loc.invariant);
    if (loc.metric_override) jl["M"] = dump_square(*loc.metric_override);
    locs.push_back(jl);
  }
  j["locations"] = locs;
  ordered_json evs = ordered_json::array();
  for (const auto& e : H.events) {
    ordered_json je;
    je["id"] = e.id;
    je["source"] = H.locations[e.source].id;
    je["target"] = H.locations[e.target].id;
    je["guard"] = dump_polytope(e.guard);
    je["facet"] = e.facet;
    je["reset"] = {{"R", dump_square(e.reset.R)}, {"s", dump_vec(e.reset.s)}};
    evs.push_back(je);
  }
  j["events"] = evs;
  ordered_json uns = ordered_json::array();
  for (const auto& u : H.unsafe) {
    ordered_json ju = dump_polytope(u.set);
    ju["location"] = H.locations[u.location].id;
    uns.push_back(ju);
  }
  j["unsafe"] = uns;
  ordered_json ji;
  ji["location"] = H.locations[H.initial.location].id;
  if (H.initial.is_box)
    ji["box"] = {{"lo", dump_vec(H.initial.lo)}, {"hi", dump_vec(H.initial.hi)}};
  else
    ji["point"] = dump_vec(H.initial.point);
  j["initial"] = ji;
  const auto& c = H.config;
  j["config"] = {{"d_thr", c.d_thr},
                 {"tau_maxlead", c.tau_maxlead},
                 {"tau_maxlag", c.tau_maxlag},
                 {"alpha", c.alpha},
                 {"t_end", c.t_end},
                 {"event_tol", c.event_tol},
                 {"dist_tol", c.dist_tol},
                 {"time_grid_dt", c.time_grid_dt},
                 {"max_recursion_depth", c.max_recursion_depth},
                 {"coverage_max_depth", c.coverage_max_depth},
                 {"radius_cap", c.radius_cap},
                 {"max_events", c.max_events},
                 {"seed", c.seed}};
  return j.dump(2);
}

namespace {

// A guard lies on its facet hyperplane iff every vertex is on it and no
// recession direction leaves it.
bool guard_on_facet(const EventDef& e, const Location& src, double tol,
                    std::string* why) {
  const Vec f = src.invariant.H.row(e.facet).transpose();
  const double c = src.invariant.h(e.facet);
  const double fs = 1.0 + f.norm() + std::abs(c);
  VertexSet vs = enumerate_vertices(e.guard);
  if (vs.vertices.empty() && vs.rays.empty()) {
    *why = "guard has no vertices (empty or ill-posed)";
    return false;
  }
  for (const auto& v : vs.vertices) {
    if (std::abs(f.dot(v) - c) > tol * fs * 1e3) {
      std::ostringstream os;
      os << "guard vertex off facet hyperplane by " << std::abs(f.dot(v) - c);
      *why = os.str();
      return false;
    }
  }
  for (const auto& d : vs.rays) {
    if (std::abs(f.dot(d)) > tol * fs * 1e3) {
      *why = "guard recession direction leaves the facet hyperplane";
      return false;
    }
  }
  return true;
}

// Pairwise disjointness within tolerance: guards on different facet
// hyperplanes can only meet in a set of codimension >= 2, which counts as
// disjoint; guards on the same facet must have no overlap of positive
// (n-1)-measure, probed by shrinking the intersection along the facet.
bool guards_overlap(const HybridAutomaton& H, const EventDef& a, const EventDef& b,
                    double tol) {
  const auto& inv = H.locations[a.source].invariant;
  const Vec fa = inv.H.row(a.facet).transpose();
  const Vec fb = inv.H.row(b.facet).transpose();
  const double ca = inv.h(a.facet), cb = inv.h(b.facet);
  const double cosang =
      std::abs(fa.dot(fb)) / (fa.norm() * fb.norm());
  const bool same_plane =
      cosang > 1.0 - 1e-9 &&
      std::abs(ca / fa.norm() - (fa.dot(fb) > 0 ? 1.0 : -1.0) * cb / fb.norm()) < 1e-9;
  if (!same_plane) return false;

  Polytope inter{Mat(a.guard.rows() + b.guard.rows(), H.dim),
                 Vec(a.guard.rows() + b.guard.rows())};
  inter.H << a.guard.H, b.guard.H;
  inter.h << a.guard.h, b.guard.h;
  Polytope probe = inter.shrunk(std::max(tol, 1e-7), &fa);
  return !polytope_is_empty(probe);
}

}  // namespace

std::vector<Diagnostic> validate_assumptions(const HybridAutomaton& H) {
  std::vector<Diagnostic> out;
  const double tol = H.config.event_tol;
  for (size_t ei = 0; ei < H.events.size(); ++ei) {
    const auto& e = H.events[ei];
    std::string why;
    if (polytope_is_empty(e.guard)) {
      out.push_back({"empty-guard", "event " + e.id + ": guard polytope is empty"});
      continue;
    }
    if (!guard_on_facet(e, H.locations[e.source], tol, &why))
      out.push_back({"guard-not-on-facet", "event " + e.id + ": " + why});
    // the guard must lie in the closure of the source invariant
    const auto& inv = H.locations[e.source].invariant;
    VertexSet vs = enumerate_vertices(e.guard);
    bool contained = true;
    for (const auto& v : vs.vertices)
      if (!inv.contains(v, tol * 1e3)) contained = false;
    for (const auto& d : vs.rays)
      for (int r = 0; r < inv.rows(); ++r)
        if (inv.H.row(r).dot(d) > tol) contained = false;
    if (!contained)
      out.push_back({"guard-outside-invariant",
                     "event " + e.id + ": guard leaves cl(Inv(" +
                         H.locations[e.source].id + "))"});
  }
  for (size_t li = 0; li < H.locations.size(); ++li) {
    auto evs = H.events_from(static_cast<int>(li));
    for (size_t i = 0; i < evs.size(); ++i)
      for (size_t j = i + 1; j < evs.size(); ++j)
        if (guards_overlap(H, H.events[evs[i]], H.events[evs[j]], tol))
          out.push_back({"assumption-1-violated",
                         "location " + H.locations[li].id + ": guards of " +
                             H.events[evs[i]].id + " and " + H.events[evs[j]].id +
                             " overlap"});
  }
  // Assumption 3 (unique global solutions) holds for affine dynamics;
  // Assumption 4 (continuous resets) holds for affine resets by construction.
  return out;
}

}  // namespace safehood
