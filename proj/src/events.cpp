#include "spikedet/events.hpp"

#include <numeric>

#include "spikedet/errors.hpp"

namespace spikedet {

uint64_t EventFrame::total_events() const {
  uint64_t n = 0;
  for (auto c : on_counts) n += c;
  for (auto c : off_counts) n += c;
  return n;
}

std::size_t HotPixelMask::masked_count() const {
  std::size_t n = 0;
  for (auto m : masked) n += m != 0;
  return n;
}

std::vector<EventFrame> accumulate_frames(const EventStream& stream, uint64_t window_us) {
  if (window_us == 0) throw DataError("accumulate_frames: window must be positive");

  uint64_t duration = stream.duration_us;
  if (!stream.events.empty()) {
    uint64_t last = stream.events.back().t_us + 1;
    duration = std::max(duration, last);
  }
  if (duration == 0) return {};

  const uint64_t n_frames = (duration + window_us - 1) / window_us;
  const int w = stream.geometry.width;
  const int h = stream.geometry.height;
  const std::size_t plane = static_cast<std::size_t>(w) * h;

  std::vector<EventFrame> frames(n_frames);
  for (uint64_t k = 0; k < n_frames; ++k) {
    frames[k].frame_index = static_cast<int>(k);
    frames[k].t_start_us = k * window_us;
    frames[k].t_end_us = (k + 1) * window_us;
    frames[k].width = w;
    frames[k].height = h;
    frames[k].on_counts.assign(plane, 0);
    frames[k].off_counts.assign(plane, 0);
  }

  for (const Event& e : stream.events) {
    uint64_t k = e.t_us / window_us;
    EventFrame& f = frames[k];
    std::size_t idx = static_cast<std::size_t>(e.y) * w + e.x;
    if (e.polarity)
      ++f.on_counts[idx];
    else
      ++f.off_counts[idx];
  }
  return frames;
}

HotPixelMask hot_pixel_mask(const std::vector<EventFrame>& frames, double threshold) {
  if (frames.empty()) throw DataError("hot_pixel_mask: need at least one frame");
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw DataError("hot_pixel_mask: threshold must be in (0, 1]");

  const int w = frames.front().width;
  const int h = frames.front().height;
  const std::size_t plane = static_cast<std::size_t>(w) * h;

  std::vector<uint32_t> firing(plane, 0);
  for (const EventFrame& f : frames) {
    for (std::size_t i = 0; i < plane; ++i) {
      if (f.on_counts[i] + f.off_counts[i] > 0) ++firing[i];
    }
  }

  HotPixelMask mask;
  mask.width = w;
  mask.height = h;
  mask.threshold_fraction = threshold;
  mask.masked.assign(plane, 0);
  const double n = static_cast<double>(frames.size());
  for (std::size_t i = 0; i < plane; ++i) {
    mask.masked[i] = (static_cast<double>(firing[i]) / n > threshold) ? 1 : 0;
  }
  return mask;
}

EventStream apply_mask(const EventStream& stream, const HotPixelMask& mask) {
  EventStream out;
  out.geometry = stream.geometry;
  out.duration_us = stream.duration_us;
  out.events.reserve(stream.events.size());
  for (const Event& e : stream.events) {
    if (!mask.is_masked(e.x, e.y)) out.events.push_back(e);
  }
  return out;
}

}  // namespace spikedet
