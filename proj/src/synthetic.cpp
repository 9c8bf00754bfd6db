#include "spikedet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spikedet/errors.hpp"
#include "spikedet/rng.hpp"

namespace spikedet {

namespace {

constexpr uint64_t kStepUs = 1000;  // 1 ms simulation step

constexpr uint64_t kTagDrone = 0xd0;
constexpr uint64_t kTagNoise = 0xd1;
constexpr uint64_t kTagHot = 0xd2;

void emit_drone_events(const DroneSpec& d, const SyntheticSpec& spec, uint64_t seed,
                       std::size_t drone_idx, std::vector<Event>& out) {
  StreamRng rng(StreamRng::derive({seed, kTagDrone, drone_idx}));
  const double w = spec.geometry.width;
  const double h = spec.geometry.height;
  const uint64_t n_steps = spec.duration_us / kStepUs;
  for (uint64_t s = 0; s < n_steps; ++s) {
    const double t_mid = (static_cast<double>(s) + 0.5) * 1e-3;  // seconds
    double rate = d.event_rate_hz;
    if (d.rotor_freq_hz > 0.0) {
      rate *= 1.0 + d.rotor_depth *
                        std::sin(2.0 * std::numbers::pi * d.rotor_freq_hz * t_mid);
    }
    const int n = rng.poisson(std::max(0.0, rate) * 1e-3);
    const double cx = d.x0 + d.vx * t_mid;
    const double cy = d.y0 + d.vy * t_mid;
    const double half_w = 0.5 * d.box_w + d.emission_radius;
    const double half_h = 0.5 * d.box_h + d.emission_radius;
    for (int i = 0; i < n; ++i) {
      uint64_t t = s * kStepUs + static_cast<uint64_t>(rng.uniform() * kStepUs);
      double ex = cx + rng.uniform(-half_w, half_w);
      double ey = cy + rng.uniform(-half_h, half_h);
      uint8_t p = rng.bernoulli(0.5) ? 1 : 0;
      int ix = static_cast<int>(std::floor(ex));
      int iy = static_cast<int>(std::floor(ey));
      if (ix < 0 || iy < 0 || ix >= w || iy >= h) continue;  // off-sensor, dropped
      out.push_back(Event{t, static_cast<uint16_t>(ix), static_cast<uint16_t>(iy), p});
    }
  }
}

void emit_noise_events(const SyntheticSpec& spec, uint64_t seed, std::vector<Event>& out) {
  if (spec.noise_rate_hz <= 0.0) return;
  StreamRng rng(StreamRng::derive({seed, kTagNoise}));
  const uint64_t n_steps = spec.duration_us / kStepUs;
  for (uint64_t s = 0; s < n_steps; ++s) {
    const int n = rng.poisson(spec.noise_rate_hz * 1e-3);
    for (int i = 0; i < n; ++i) {
      uint64_t t = s * kStepUs + static_cast<uint64_t>(rng.uniform() * kStepUs);
      auto x = static_cast<uint16_t>(rng.uniform_int(spec.geometry.width));
      auto y = static_cast<uint16_t>(rng.uniform_int(spec.geometry.height));
      out.push_back(Event{t, x, y, static_cast<uint8_t>(rng.bernoulli(0.5) ? 1 : 0)});
    }
  }
}

void emit_hot_pixel_events(const HotPixelSpec& hp, const SyntheticSpec& spec, uint64_t seed,
                           std::size_t idx, std::vector<Event>& out) {
  if (hp.x < 0 || hp.y < 0 || hp.x >= spec.geometry.width || hp.y >= spec.geometry.height)
    throw DataError("synthetic: hot pixel outside sensor geometry");
  StreamRng rng(StreamRng::derive({seed, kTagHot, idx}));
  const uint64_t n_steps = spec.duration_us / kStepUs;
  for (uint64_t s = 0; s < n_steps; ++s) {
    const int n = rng.poisson(hp.rate_hz * 1e-3);
    for (int i = 0; i < n; ++i) {
      uint64_t t = s * kStepUs + static_cast<uint64_t>(rng.uniform() * kStepUs);
      out.push_back(Event{t, static_cast<uint16_t>(hp.x), static_cast<uint16_t>(hp.y),
                          static_cast<uint8_t>(rng.bernoulli(0.5) ? 1 : 0)});
    }
  }
}

}  // namespace

std::pair<EventStream, std::vector<GroundTruthBox>> generate_synthetic_sequence(
    const SyntheticSpec& spec, uint64_t seed) {
  if (spec.duration_us == 0) throw DataError("synthetic: zero-duration spec rejected");
  if (spec.geometry.width <= 0 || spec.geometry.height <= 0)
    throw DataError("synthetic: geometry must be positive");

  EventStream stream;
  stream.geometry = spec.geometry;
  stream.duration_us = spec.duration_us;

  for (std::size_t i = 0; i < spec.drones.size(); ++i)
    emit_drone_events(spec.drones[i], spec, seed, i, stream.events);
  emit_noise_events(spec, seed, stream.events);
  for (std::size_t i = 0; i < spec.hot_pixels.size(); ++i)
    emit_hot_pixel_events(spec.hot_pixels[i], spec, seed, i, stream.events);

  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const Event& a, const Event& b) { return a.t_us < b.t_us; });

  std::vector<GroundTruthBox> gt;
  const uint64_t n_frames = (spec.duration_us + spec.gt_window_us - 1) / spec.gt_window_us;
  for (uint64_t k = 0; k < n_frames; ++k) {
    const double t_mid = (static_cast<double>(k) + 0.5) * spec.gt_window_us * 1e-6;
    for (std::size_t d = 0; d < spec.drones.size(); ++d) {
      const DroneSpec& dr = spec.drones[d];
      double cx = dr.x0 + dr.vx * t_mid;
      double cy = dr.y0 + dr.vy * t_mid;
      Box b = clip_to(Box{cx - 0.5 * dr.box_w, cy - 0.5 * dr.box_h, dr.box_w, dr.box_h},
                      spec.geometry);
      if (b.w <= 0.0 || b.h <= 0.0) continue;  // fully off-sensor
      gt.push_back(GroundTruthBox{static_cast<int>(k), b.x, b.y, b.w, b.h,
                                  static_cast<int>(d)});
    }
  }
  return {std::move(stream), std::move(gt)};
}

}  // namespace spikedet
