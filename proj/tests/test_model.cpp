#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "models.hpp"
#include "safehood/model.hpp"

using namespace safehood;

TEST_CASE("worked example loads with three locations and two events") {
  auto H = testmodels::sec25();
  CHECK(H.dim == 2);
  CHECK(H.locations.size() == 3);
  CHECK(H.events.size() == 2);
  CHECK(H.unsafe.size() == 2);
  CHECK(H.location_index("l3") == 2);
  CHECK(H.events_from(2).size() == 2);
  CHECK(H.events_from(0).empty());
  CHECK(H.initial.point(0) == 1.25);
  CHECK(H.config.t_end == 0.5);
  CHECK(H.config.tau_maxlead == 0.1);
}

TEST_CASE("dimension mismatch is a load error with a locus") {
  const char* doc = R"({
    "dimension": 2,
    "locations": [{"id": "a", "A": [1,2,3,4,5,6,7,8,9],
                   "invariant": {"H": [], "h": []}}]
  })";
  CHECK_THROWS_WITH_AS(load_model(doc),
                       doctest::Contains("locations[0].A"), ModelError);
}

TEST_CASE("unknown location id in an event is rejected") {
  const char* doc = R"({
    "dimension": 1,
    "locations": [{"id": "a", "A": [-1.0], "invariant": {"H": [[1.0]], "h": [1.0]}}],
    "events": [{"source": "a", "target": "nowhere",
                "guard": {"H": [[1.0]], "h": [1.0]}, "facet": 0}]
  })";
  CHECK_THROWS_WITH_AS(load_model(doc), doctest::Contains("target"), ModelError);
}

TEST_CASE("single location, no events, no unsafe set is a valid automaton") {
  const char* doc = R"({
    "dimension": 2,
    "locations": [{"id": "only", "A": [-1.0, 0.0, 0.0, -1.0],
                   "invariant": {"H": [], "h": []}}],
    "initial": {"location": "only", "point": [0.0, 0.0]}
  })";
  auto H = load_model(doc);
  CHECK(H.locations.size() == 1);
  CHECK(H.events.empty());
  CHECK(validate_assumptions(H).empty());
}

TEST_CASE("serialize round-trips to identical matrices") {
  auto H = testmodels::sec25();
  auto H2 = load_model(serialize(H));
  REQUIRE(H2.locations.size() == H.locations.size());
  for (size_t i = 0; i < H.locations.size(); ++i) {
    CHECK(H2.locations[i].A == H.locations[i].A);
    CHECK(H2.locations[i].b == H.locations[i].b);
    CHECK(H2.locations[i].invariant.H == H.locations[i].invariant.H);
    CHECK(H2.locations[i].invariant.h == H.locations[i].invariant.h);
  }
  for (size_t i = 0; i < H.events.size(); ++i) {
    CHECK(H2.events[i].guard.H == H.events[i].guard.H);
    CHECK(H2.events[i].reset.R == H.events[i].reset.R);
    CHECK(H2.events[i].facet == H.events[i].facet);
  }
  CHECK(H2.config.d_thr == H.config.d_thr);
  // a second round trip is textually stable
  CHECK(serialize(H2) == serialize(H));
}

TEST_CASE("worked example passes every standing assumption") {
  auto H = testmodels::sec25();
  auto diags = validate_assumptions(H);
  for (const auto& d : diags) MESSAGE(d.code, ": ", d.message);
  CHECK(diags.empty());
}

TEST_CASE("validate_assumptions is deterministic and side-effect free") {
  auto H = testmodels::sec25();
  auto a = validate_assumptions(H);
  auto b = validate_assumptions(H);
  CHECK(a.size() == b.size());
  CHECK(serialize(H) == serialize(testmodels::sec25()));
}

TEST_CASE("overlapping guards on one facet violate assumption 1") {
  auto H = testmodels::sec25();
  // duplicate e1 with an overlapping guard on the same facet
  EventDef dup = H.events[0];
  dup.id = "e1b";
  dup.guard.h(2) = -1.5;  // {x2=1, x1 >= 1.5}: overlaps {x2=1, x1>=1}
  H.events.push_back(dup);
  auto diags = validate_assumptions(H);
  bool found = false;
  for (const auto& d : diags)
    if (d.code == "assumption-1-violated") found = true;
  CHECK(found);
}

TEST_CASE("guards meeting only at the corner stay disjoint within tolerance") {
  // the worked example's guards share the corner (1,1) in their closures
  auto H = testmodels::sec25();
  auto diags = validate_assumptions(H);
  for (const auto& d : diags) CHECK(d.code != "assumption-1-violated");
}

TEST_CASE("guard escaping the invariant closure is diagnosed") {
  auto H = testmodels::sec25();
  H.events[0].guard.h(2) = 0.5;  // x1 >= -0.5 extends beyond Inv(l3)
  auto diags = validate_assumptions(H);
  bool found = false;
  for (const auto& d : diags)
    if (d.code == "guard-outside-invariant") found = true;
  CHECK(found);
}

TEST_CASE("guard off its facet hyperplane is diagnosed") {
  auto H = testmodels::sec25();
  H.events[0].guard.h(0) = 1.1;  // x2 <= 1.1 while the equality pair wants 1
  H.events[0].guard.h(1) = -1.1;
  auto diags = validate_assumptions(H);
  bool found = false;
  for (const auto& d : diags)
    if (d.code == "guard-not-on-facet") found = true;
  CHECK(found);
}

TEST_CASE("disjointness check agrees with a vertex-enumeration oracle") {
  // pairs of segments on the same line: overlap iff the 1-D intervals overlap
  auto make_guard = [](double lo, double hi) {
    Polytope P{Mat(4, 2), Vec(4)};
    P.H << 0, 1, 0, -1, 1, 0, -1, 0;
    P.h << 1, -1, hi, -lo;
    return P;
  };
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 4.0);
  for (int it = 0; it < 50; ++it) {
    double a0 = unif(rng), a1 = a0 + 0.1 + unif(rng) * 0.5;
    double b0 = unif(rng), b1 = b0 + 0.1 + unif(rng) * 0.5;
    auto H = testmodels::sec25();
    H.events[0].guard = make_guard(a0, a1);
    H.events[1] = H.events[0];
    H.events[1].id = "e2";
    H.events[1].guard = make_guard(b0, b1);
    auto diags = validate_assumptions(H);
    bool flagged = false;
    for (const auto& d : diags)
      if (d.code == "assumption-1-violated") flagged = true;
    const double overlap = std::min(a1, b1) - std::max(a0, b0);
    if (overlap > 1e-6)
      CHECK(flagged);
    else if (overlap < -1e-6)
      CHECK_FALSE(flagged);
  }
}

TEST_CASE("config validation rejects out-of-range values") {
  auto H = testmodels::sec25();
  H.config.alpha = 1.5;
  CHECK_THROWS_AS(H.config.validate(), ModelError);
  H.config.alpha = 0.9;
  H.config.event_tol = 0.0;
  CHECK_THROWS_AS(H.config.validate(), ModelError);
}

TEST_CASE("degenerate invariant is flagged at load") {
  const char* doc = R"({
    "dimension": 2,
    "locations": [{"id": "thin", "A": [-1.0, 0.0, 0.0, -1.0],
                   "invariant": {"H": [[0.0, 1.0], [0.0, -1.0]], "h": [1.0, -1.0]}}],
    "initial": {"location": "thin", "point": [0.0, 1.0]}
  })";
  auto H = load_model(doc);
  CHECK(H.locations[0].invariant_degenerate);
}
