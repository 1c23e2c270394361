#pragma once

// Shared test fixtures: the bundled worked example plus small constructed
// models exercising grazing contact, the basic safe case, slow drift exits,
// and tangential (rotational) guard approach.

#include <string>

#include "safehood/model.hpp"

#ifndef SAFEHOOD_SOURCE_DIR
#define SAFEHOOD_SOURCE_DIR "."
#endif

namespace testmodels {

inline safehood::HybridAutomaton sec25() {
  return safehood::load_model_file(std::string(SAFEHOOD_SOURCE_DIR) +
                                   "/examples/paper_sec2_5/model.json");
}

// same system started exactly on the corner-hitting manifold x2 = x1^3
inline safehood::HybridAutomaton sec25_graze() {
  auto H = sec25();
  H.initial.point(0) = 1.2;
  H.initial.point(1) = 1.728;
  return H;
}

inline const char* kBasicJson = R"json({
  "dimension": 2,
  "locations": [
    {"id": "src", "A": [-1.0, 0.0, 0.0, -1.0], "b": [0.0, 0.0],
     "invariant": {"H": [[0.0, -1.0]], "h": [-1.0]}},
    {"id": "dst", "A": [-1.0, 0.0, 0.0, -1.0], "b": [0.0, 0.0],
     "invariant": {"H": [], "h": []}}
  ],
  "events": [
    {"id": "jump", "source": "src", "target": "dst",
     "guard": {"H": [[0.0, 1.0], [0.0, -1.0], [-1.0, 0.0]], "h": [1.0, -1.0, 0.0]},
     "facet": 0,
     "reset": {"R": [1.0, 0.0, 0.0, 1.0], "s": [0.0, 0.0]}}
  ],
  "unsafe": [
    {"location": "dst",
     "H": [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
     "h": [4.0, -3.0, 4.0, -3.0]}
  ],
  "initial": {"location": "src", "point": [2.0, 1.2]},
  "config": {"d_thr": 0.1, "tau_maxlead": 0.1, "tau_maxlag": 0.1, "alpha": 0.9,
             "t_end": 0.15, "event_tol": 1e-9, "dist_tol": 1e-9,
             "time_grid_dt": 0.001}
})json";

inline safehood::HybridAutomaton basic() {
  return safehood::load_model(kBasicJson);
}

// pure drift with a user-supplied metric: exits the invariant at speed 0.01
inline const char* kDriftJson = R"json({
  "dimension": 2,
  "locations": [
    {"id": "slab", "A": [0.0, 0.0, 0.0, 0.0], "b": [0.0, -0.01],
     "invariant": {"H": [[0.0, -1.0]], "h": [0.0]},
     "M": [1.0, 0.0, 0.0, 1.0]},
    {"id": "free", "A": [-1.0, 0.0, 0.0, -1.0], "b": [0.0, 0.0],
     "invariant": {"H": [], "h": []}}
  ],
  "events": [
    {"id": "drop", "source": "slab", "target": "free",
     "guard": {"H": [[0.0, 1.0], [0.0, -1.0], [1.0, 0.0], [-1.0, 0.0]],
               "h": [0.0, 0.0, 10.0, 10.0]},
     "facet": 0,
     "reset": {"R": [1.0, 0.0, 0.0, 1.0], "s": [0.0, 0.0]}}
  ],
  "unsafe": [],
  "initial": {"location": "slab", "point": [0.0, 0.0005]},
  "config": {"d_thr": 0.05, "tau_maxlead": 0.1, "tau_maxlag": 0.1, "alpha": 0.9,
             "t_end": 0.2, "event_tol": 1e-9, "dist_tol": 1e-9,
             "time_grid_dt": 0.001}
})json";

inline safehood::HybridAutomaton drift() {
  return safehood::load_model(kDriftJson);
}

// rotation grazing the facet x1 = 1 tangentially at (1, 0)
inline const char* kSpiralJson = R"json({
  "dimension": 2,
  "locations": [
    {"id": "orbit", "A": [0.0, 1.0, -1.0, 0.0], "b": [0.0, 0.0],
     "invariant": {"H": [[1.0, 0.0]], "h": [1.0]},
     "M": [1.0, 0.0, 0.0, 1.0]},
    {"id": "sink", "A": [-1.0, 0.0, 0.0, -1.0], "b": [0.0, 0.0],
     "invariant": {"H": [], "h": []}}
  ],
  "events": [
    {"id": "leave", "source": "orbit", "target": "sink",
     "guard": {"H": [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
               "h": [1.0, -1.0, 0.5, 0.5]},
     "facet": 0,
     "reset": {"R": [1.0, 0.0, 0.0, 1.0], "s": [0.0, 0.0]}}
  ],
  "unsafe": [
    {"location": "sink",
     "H": [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
     "h": [3.0, -2.0, 3.0, -2.0]}
  ],
  "initial": {"location": "orbit", "point": [0.0, 1.0]},
  "config": {"d_thr": 0.2, "tau_maxlead": 0.1, "tau_maxlag": 0.1, "alpha": 0.9,
             "t_end": 3.0, "event_tol": 1e-9, "dist_tol": 1e-9,
             "time_grid_dt": 0.001}
})json";

inline safehood::HybridAutomaton spiral() {
  return safehood::load_model(kSpiralJson);
}

}  // namespace testmodels
