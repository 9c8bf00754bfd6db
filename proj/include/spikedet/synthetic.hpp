#pragma once

#include <utility>
#include <vector>

#include "spikedet/events.hpp"

namespace spikedet {

// One simulated drone: a moving emitter of events inside its box dilated by
// emission_radius, optionally rate-modulated at the rotor frequency.
struct DroneSpec {
  double x0 = 0.0, y0 = 0.0;     // start center, px
  double vx = 0.0, vy = 0.0;     // px/s
  double box_w = 12.0, box_h = 10.0;
  double event_rate_hz = 4000.0;
  double rotor_freq_hz = 0.0;    // 0 disables modulation
  double rotor_depth = 0.8;      // modulation depth in [0, 1]
  double emission_radius = 1.0;  // px beyond the box edge
};

struct HotPixelSpec {
  int x = 0, y = 0;
  double rate_hz = 2000.0;
};

struct SyntheticSpec {
  SensorGeometry geometry{320, 240, "synthetic"};
  uint64_t duration_us = 2'000'000;
  uint64_t gt_window_us = 20'000;  // ground-truth cadence = frame accumulation
  double noise_rate_hz = 0.0;      // uniform background, whole sensor
  std::vector<DroneSpec> drones;
  std::vector<HotPixelSpec> hot_pixels;
};

// Deterministic for (spec, seed): identical calls yield byte-identical
// streams. Ground truth is one box per (frame window, drone), clipped to the
// sensor, evaluated at mid-window time.
std::pair<EventStream, std::vector<GroundTruthBox>> generate_synthetic_sequence(
    const SyntheticSpec& spec, uint64_t seed);

}  // namespace spikedet
