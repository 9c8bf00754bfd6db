#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "spikedet/geometry.hpp"

namespace spikedet {

// Channel ordinals double as the deterministic tie-break order.
enum class Channel : uint8_t {
  density_watershed = 0,
  mh_kmeans = 1,
  temporal_diff = 2,
  rotor_freq = 3,
  polarity = 4,
  shadow = 5,
};

const char* channel_name(Channel c);
Channel channel_from_name(const std::string& name);

struct Detection {
  int frame_index = 0;
  Box box;
  double score = 0.0;
  Channel channel = Channel::density_watershed;
  int rank = 1;  // within-channel ordinal, 1-based
};

struct ChannelConfig {
  double watershed_sigma = 2.0;   // px
  double flood_stop = 0.20;       // flood down to this fraction of the peak
  int min_box = 4;                // px, minimum emitted box side
  int kmeans_topk = 5;
  int kmeans_max_iters = 25;
  int temporal_window = 2;        // +/- frames
  int rotor_fft_window = 32;      // frames
  int rotor_tile = 32;            // px
  double rotor_band_lo_hz = 80.0;
  double rotor_band_hi_hz = 200.0;
  double rotor_ratio_min = 0.05;  // peak share of non-DC power
  double polarity_floor = 0.1;
  std::array<double, 4> shadow_weights{0.0, 0.0, 0.0, 0.0};
  double union_tau = 0.3;
  double support_gain = 0.10;
  double support_iou = 0.30;
  uint64_t seed = 0;  // drives per-frame k-means init
};

}  // namespace spikedet
