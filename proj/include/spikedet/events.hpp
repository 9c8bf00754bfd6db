#pragma once

#include <cstdint>
#include <vector>

#include "spikedet/geometry.hpp"

namespace spikedet {

// One brightness-change event. t is microseconds since sequence start;
// polarity 1 = ON (increase), 0 = OFF (decrease).
struct Event {
  uint64_t t_us = 0;
  uint16_t x = 0;
  uint16_t y = 0;
  uint8_t polarity = 0;
};

inline bool operator==(const Event& a, const Event& b) {
  return a.t_us == b.t_us && a.x == b.x && a.y == b.y && a.polarity == b.polarity;
}

// Events sorted non-decreasing in t, all within geometry.
struct EventStream {
  SensorGeometry geometry;
  uint64_t duration_us = 0;  // 0 means "up to the last event"
  std::vector<Event> events;
};

// Per-pixel ON/OFF tallies over one accumulation window [t_start, t_end).
struct EventFrame {
  int frame_index = 0;
  uint64_t t_start_us = 0;
  uint64_t t_end_us = 0;
  int width = 0;
  int height = 0;
  std::vector<uint16_t> on_counts;   // width*height, row-major
  std::vector<uint16_t> off_counts;

  uint32_t on_at(int x, int y) const { return on_counts[static_cast<size_t>(y) * width + x]; }
  uint32_t off_at(int x, int y) const { return off_counts[static_cast<size_t>(y) * width + x]; }
  uint32_t count_at(int x, int y) const { return on_at(x, y) + off_at(x, y); }
  uint64_t total_events() const;
};

struct GroundTruthBox {
  int frame_index = 0;
  double x = 0.0, y = 0.0, w = 0.0, h = 0.0;
  int target_id = 0;

  Box box() const { return Box{x, y, w, h}; }
};

struct HotPixelMask {
  int width = 0;
  int height = 0;
  double threshold_fraction = 0.0;
  std::vector<uint8_t> masked;  // width*height, 1 = masked

  bool is_masked(int x, int y) const {
    return masked[static_cast<size_t>(y) * width + x] != 0;
  }
  std::size_t masked_count() const;
};

// Bins events into half-open windows [k*w, (k+1)*w); a boundary event belongs
// to the later frame, so every event lands in exactly one frame and frame
// counts sum to the stream's event count. The frame sequence covers
// ceil(duration/window) windows (duration inferred from the last event when
// the stream does not carry one). Empty stream with no duration -> empty.
std::vector<EventFrame> accumulate_frames(const EventStream& stream, uint64_t window_us);

// Masks pixels firing (any polarity) in strictly more than `threshold`
// fraction of frames. threshold must be in (0, 1].
HotPixelMask hot_pixel_mask(const std::vector<EventFrame>& frames, double threshold);

// Drops events on masked pixels.
EventStream apply_mask(const EventStream& stream, const HotPixelMask& mask);

}  // namespace spikedet
