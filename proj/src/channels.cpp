#include "spikedet/channels.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include <fftw3.h>

#include "spikedet/errors.hpp"
#include "spikedet/rng.hpp"

namespace spikedet {

const char* channel_name(Channel c) {
  switch (c) {
    case Channel::density_watershed: return "density_watershed";
    case Channel::mh_kmeans: return "mh_kmeans";
    case Channel::temporal_diff: return "temporal_diff";
    case Channel::rotor_freq: return "rotor_freq";
    case Channel::polarity: return "polarity";
    case Channel::shadow: return "shadow";
  }
  return "?";
}

Channel channel_from_name(const std::string& name) {
  for (int i = 0; i <= 5; ++i) {
    auto c = static_cast<Channel>(i);
    if (name == channel_name(c)) return c;
  }
  throw UsageError("unknown channel '" + name + "'");
}

namespace {

using FloatMap = std::vector<float>;  // width*height, row-major

FloatMap count_map(const EventFrame& f) {
  FloatMap m(f.on_counts.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    m[i] = static_cast<float>(f.on_counts[i] + f.off_counts[i]);
  return m;
}

// Separable Gaussian with per-pixel kernel renormalization at the borders.
FloatMap gaussian_blur(const FloatMap& src, int w, int h, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> kernel(radius + 1);
  for (int i = 0; i <= radius; ++i)
    kernel[i] = static_cast<float>(std::exp(-0.5 * i * i / (sigma * sigma)));

  FloatMap tmp(src.size()), dst(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f, norm = 0.0f;
      for (int i = -radius; i <= radius; ++i) {
        int xx = x + i;
        if (xx < 0 || xx >= w) continue;
        float k = kernel[std::abs(i)];
        acc += k * src[static_cast<std::size_t>(y) * w + xx];
        norm += k;
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc / norm;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f, norm = 0.0f;
      for (int i = -radius; i <= radius; ++i) {
        int yy = y + i;
        if (yy < 0 || yy >= h) continue;
        float k = kernel[std::abs(i)];
        acc += k * tmp[static_cast<std::size_t>(yy) * w + x];
        norm += k;
      }
      dst[static_cast<std::size_t>(y) * w + x] = acc / norm;
    }
  }
  return dst;
}

struct PixelRect {
  int x1, y1, x2, y2;  // inclusive pixel bounds
  Box to_box() const { return Box{double(x1), double(y1), double(x2 - x1 + 1), double(y2 - y1 + 1)}; }
};

// Global maximum (row-major scan, so ties resolve to the lowest (y, x)), then
// 4-connected flood over pixels >= stop * peak.
std::optional<PixelRect> peak_flood(const FloatMap& m, int w, int h, double stop) {
  int peak_idx = -1;
  float peak = 0.0f;
  for (int i = 0; i < w * h; ++i) {
    if (m[i] > peak) {
      peak = m[i];
      peak_idx = i;
    }
  }
  if (peak_idx < 0 || peak <= 0.0f) return std::nullopt;

  const float level = static_cast<float>(stop) * peak;
  std::vector<uint8_t> visited(m.size(), 0);
  std::deque<int> queue{peak_idx};
  visited[peak_idx] = 1;
  PixelRect r{peak_idx % w, peak_idx / w, peak_idx % w, peak_idx / w};
  while (!queue.empty()) {
    int idx = queue.front();
    queue.pop_front();
    int x = idx % w, y = idx / w;
    r.x1 = std::min(r.x1, x);
    r.x2 = std::max(r.x2, x);
    r.y1 = std::min(r.y1, y);
    r.y2 = std::max(r.y2, y);
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    for (int d = 0; d < 4; ++d) {
      int nx = x + dx[d], ny = y + dy[d];
      if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
      int nidx = ny * w + nx;
      if (visited[nidx] || m[nidx] < level) continue;
      visited[nidx] = 1;
      queue.push_back(nidx);
    }
  }
  return r;
}

double box_event_mass(const EventFrame& f, const Box& b) {
  int x1 = std::max(0, static_cast<int>(std::floor(b.x)));
  int y1 = std::max(0, static_cast<int>(std::floor(b.y)));
  int x2 = std::min(f.width - 1, static_cast<int>(std::ceil(b.x2())) - 1);
  int y2 = std::min(f.height - 1, static_cast<int>(std::ceil(b.y2())) - 1);
  double mass = 0.0;
  for (int y = y1; y <= y2; ++y)
    for (int x = x1; x <= x2; ++x) mass += f.count_at(x, y);
  return mass;
}

Box grow_to_min(Box b, int min_box, int w, int h) {
  if (b.w < min_box) {
    b.x -= 0.5 * (min_box - b.w);
    b.w = min_box;
  }
  if (b.h < min_box) {
    b.y -= 0.5 * (min_box - b.h);
    b.h = min_box;
  }
  b.x = std::clamp(b.x, 0.0, std::max(0.0, double(w) - b.w));
  b.y = std::clamp(b.y, 0.0, std::max(0.0, double(h) - b.h));
  return b;
}

bool box_order_before(const Box& a, const Box& b) {
  if (a.y != b.y) return a.y < b.y;
  return a.x < b.x;
}

}  // namespace

std::optional<Detection> density_watershed(const EventFrame& frame, const ChannelConfig& cfg) {
  if (cfg.watershed_sigma <= 0.0) throw DataError("density_watershed: sigma must be positive");
  FloatMap counts = count_map(frame);
  FloatMap smooth = gaussian_blur(counts, frame.width, frame.height, cfg.watershed_sigma);
  auto rect = peak_flood(smooth, frame.width, frame.height, cfg.flood_stop);
  if (!rect) return std::nullopt;
  Box b = rect->to_box();
  if (b.w < cfg.min_box || b.h < cfg.min_box) return std::nullopt;
  Detection det;
  det.frame_index = frame.frame_index;
  det.box = b;
  det.score = box_event_mass(frame, b);
  det.channel = Channel::density_watershed;
  det.rank = 1;
  return det;
}

std::vector<Detection> mh_kmeans(const EventFrame& frame, const ChannelConfig& cfg) {
  if (cfg.kmeans_topk < 1) throw DataError("mh_kmeans: kmeans_topk must be >= 1");

  struct Point {
    double x, y, weight;
  };
  std::vector<Point> points;
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      uint32_t c = frame.count_at(x, y);
      if (c > 0) points.push_back({double(x), double(y), double(c)});
    }
  }
  if (points.empty()) return {};

  const int k = std::min<int>(cfg.kmeans_topk, static_cast<int>(points.size()));
  StreamRng rng(StreamRng::derive({cfg.seed, 0x6b6d, static_cast<uint64_t>(frame.frame_index)}));

  // Weighted k-means++ seeding.
  std::vector<std::pair<double, double>> centers;
  auto weighted_pick = [&](const std::vector<double>& ws) {
    double total = 0.0;
    for (double v : ws) total += v;
    double r = rng.uniform() * total;
    for (std::size_t i = 0; i < ws.size(); ++i) {
      r -= ws[i];
      if (r <= 0.0) return i;
    }
    return ws.size() - 1;
  };
  {
    std::vector<double> ws(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) ws[i] = points[i].weight;
    auto first = weighted_pick(ws);
    centers.emplace_back(points[first].x, points[first].y);
  }
  while (static_cast<int>(centers.size()) < k) {
    std::vector<double> ws(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = std::numeric_limits<double>::max();
      for (const auto& [cx, cy] : centers) {
        double dx = points[i].x - cx, dy = points[i].y - cy;
        best = std::min(best, dx * dx + dy * dy);
      }
      ws[i] = points[i].weight * best;
    }
    auto idx = weighted_pick(ws);
    centers.emplace_back(points[idx].x, points[idx].y);
  }

  std::vector<int> assign(points.size(), -1);
  for (int iter = 0; iter < cfg.kmeans_max_iters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::max();
      for (int c = 0; c < k; ++c) {
        double dx = points[i].x - centers[c].first, dy = points[i].y - centers[c].second;
        double d = dx * dx + dy * dy;
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<double> sx(k, 0.0), sy(k, 0.0), sw(k, 0.0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      sx[assign[i]] += points[i].x * points[i].weight;
      sy[assign[i]] += points[i].y * points[i].weight;
      sw[assign[i]] += points[i].weight;
    }
    for (int c = 0; c < k; ++c) {
      if (sw[c] > 0.0) centers[c] = {sx[c] / sw[c], sy[c] / sw[c]};
    }
  }

  struct Cluster {
    PixelRect rect;
    double mass = 0.0;
    bool used = false;
  };
  std::vector<Cluster> clusters(k);
  for (std::size_t i = 0; i < points.size(); ++i) {
    Cluster& cl = clusters[assign[i]];
    int px = static_cast<int>(points[i].x), py = static_cast<int>(points[i].y);
    if (!cl.used) {
      cl.rect = {px, py, px, py};
      cl.used = true;
    } else {
      cl.rect.x1 = std::min(cl.rect.x1, px);
      cl.rect.x2 = std::max(cl.rect.x2, px);
      cl.rect.y1 = std::min(cl.rect.y1, py);
      cl.rect.y2 = std::max(cl.rect.y2, py);
    }
    cl.mass += points[i].weight;
  }

  std::vector<Detection> dets;
  for (const Cluster& cl : clusters) {
    if (!cl.used) continue;
    Detection d;
    d.frame_index = frame.frame_index;
    d.box = grow_to_min(cl.rect.to_box(), cfg.min_box, frame.width, frame.height);
    d.score = cl.mass;
    d.channel = Channel::mh_kmeans;
    dets.push_back(d);
  }
  std::sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    return box_order_before(a.box, b.box);
  });
  for (std::size_t i = 0; i < dets.size(); ++i) dets[i].rank = static_cast<int>(i) + 1;
  return dets;
}

std::optional<Detection> temporal_diff(const std::vector<EventFrame>& frames, int center,
                                       const ChannelConfig& cfg) {
  if (center < 0 || center >= static_cast<int>(frames.size()))
    throw DataError("temporal_diff: center frame out of range");
  const EventFrame& c = frames[center];
  const std::size_t plane = c.on_counts.size();

  FloatMap mean_neighbors(plane, 0.0f);
  const int n_neighbors = 2 * cfg.temporal_window;
  for (int d = -cfg.temporal_window; d <= cfg.temporal_window; ++d) {
    if (d == 0) continue;
    int idx = center + d;
    if (idx < 0 || idx >= static_cast<int>(frames.size())) continue;  // zero frame
    const EventFrame& f = frames[idx];
    for (std::size_t i = 0; i < plane; ++i)
      mean_neighbors[i] += f.on_counts[i] + f.off_counts[i];
  }
  FloatMap diff(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    float cv = static_cast<float>(c.on_counts[i] + c.off_counts[i]);
    diff[i] = std::abs(cv - mean_neighbors[i] / n_neighbors);
  }

  FloatMap smooth = gaussian_blur(diff, c.width, c.height, cfg.watershed_sigma);
  auto rect = peak_flood(smooth, c.width, c.height, cfg.flood_stop);
  if (!rect) return std::nullopt;
  Box b = rect->to_box();
  if (b.w < cfg.min_box || b.h < cfg.min_box) return std::nullopt;

  double diff_mass = 0.0;
  for (int y = rect->y1; y <= rect->y2; ++y)
    for (int x = rect->x1; x <= rect->x2; ++x)
      diff_mass += diff[static_cast<std::size_t>(y) * c.width + x];
  if (diff_mass <= 0.0) return std::nullopt;

  Detection det;
  det.frame_index = c.frame_index;
  det.box = b;
  det.score = diff_mass;
  det.channel = Channel::temporal_diff;
  det.rank = 1;
  return det;
}

std::vector<Detection> rotor_frequency(const EventStream& stream,
                                       const std::vector<EventFrame>& frames,
                                       const ChannelConfig& cfg) {
  if (cfg.rotor_fft_window < 8)
    throw DataError("rotor_frequency: rotor_fft_window must be >= 8 frames");
  if (frames.empty()) return {};

  const int w = stream.geometry.width;
  const int h = stream.geometry.height;
  const int tile = cfg.rotor_tile;
  const int tiles_x = (w + tile - 1) / tile;
  const int tiles_y = (h + tile - 1) / tile;
  const int n_tiles = tiles_x * tiles_y;

  const uint64_t span_us = frames.back().t_end_us;
  const std::size_t total_bins = static_cast<std::size_t>((span_us + 999) / 1000);

  // 1 ms event-rate series per tile, built once for the whole sequence.
  std::vector<std::vector<uint16_t>> rate(n_tiles);
  for (auto& r : rate) r.assign(total_bins, 0);
  for (const Event& e : stream.events) {
    if (e.t_us >= span_us) continue;
    int t_idx = (e.y / tile) * tiles_x + (e.x / tile);
    ++rate[t_idx][e.t_us / 1000];
  }

  const int win = cfg.rotor_fft_window;
  const uint64_t frame_us = frames.front().t_end_us - frames.front().t_start_us;
  const std::size_t window_bins = static_cast<std::size_t>(win) * frame_us / 1000;
  std::size_t n_fft = 1;
  while (n_fft < window_bins) n_fft <<= 1;

  std::vector<double> in(n_fft);
  std::vector<fftw_complex> out(n_fft / 2 + 1);
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n_fft), in.data(), out.data(),
                                        FFTW_ESTIMATE);
  const double fs = 1000.0;  // Hz, 1 ms bins

  std::vector<Detection> all;
  for (int fi = win - 1; fi < static_cast<int>(frames.size()); ++fi) {
    const EventFrame& frame = frames[fi];
    const std::size_t bin_end = std::min<std::size_t>(total_bins, frame.t_end_us / 1000);
    if (bin_end < window_bins) continue;
    const std::size_t bin_start = bin_end - window_bins;

    std::vector<Detection> frame_dets;
    for (int ty = 0; ty < tiles_y; ++ty) {
      for (int tx = 0; tx < tiles_x; ++tx) {
        const auto& series = rate[ty * tiles_x + tx];
        double mean = 0.0;
        for (std::size_t b = bin_start; b < bin_end; ++b) mean += series[b];
        if (mean == 0.0) continue;
        mean /= static_cast<double>(window_bins);

        // Mean-subtracted so residual DC leakage from zero padding is gone.
        for (std::size_t b = 0; b < n_fft; ++b)
          in[b] = (b < window_bins) ? series[bin_start + b] - mean : 0.0;
        fftw_execute(plan);

        double total_power = 0.0, peak_power = 0.0;
        std::size_t peak_bin = 0;
        for (std::size_t k = 1; k <= n_fft / 2; ++k) {
          double p = out[k][0] * out[k][0] + out[k][1] * out[k][1];
          total_power += p;
          if (p > peak_power) {
            peak_power = p;
            peak_bin = k;
          }
        }
        if (total_power <= 0.0 || peak_bin == 0) continue;
        const double freq = static_cast<double>(peak_bin) * fs / static_cast<double>(n_fft);
        const double ratio = peak_power / total_power;
        if (freq < cfg.rotor_band_lo_hz || freq > cfg.rotor_band_hi_hz) continue;
        if (ratio < cfg.rotor_ratio_min) continue;

        // Box = firing pixels of this tile in the current frame.
        int x1 = tx * tile, y1 = ty * tile;
        int x2 = std::min(w, x1 + tile), y2 = std::min(h, y1 + tile);
        PixelRect r{};
        bool any = false;
        for (int y = y1; y < y2; ++y) {
          for (int x = x1; x < x2; ++x) {
            if (frame.count_at(x, y) == 0) continue;
            if (!any) {
              r = {x, y, x, y};
              any = true;
            } else {
              r.x1 = std::min(r.x1, x);
              r.x2 = std::max(r.x2, x);
              r.y1 = std::min(r.y1, y);
              r.y2 = std::max(r.y2, y);
            }
          }
        }
        if (!any) continue;
        Detection d;
        d.frame_index = frame.frame_index;
        d.box = grow_to_min(r.to_box(), cfg.min_box, w, h);
        d.score = ratio;
        d.channel = Channel::rotor_freq;
        frame_dets.push_back(d);
      }
    }
    std::sort(frame_dets.begin(), frame_dets.end(), [](const Detection& a, const Detection& b) {
      if (a.score != b.score) return a.score > b.score;
      return box_order_before(a.box, b.box);
    });
    for (std::size_t i = 0; i < frame_dets.size(); ++i)
      frame_dets[i].rank = static_cast<int>(i) + 1;
    all.insert(all.end(), frame_dets.begin(), frame_dets.end());
  }
  fftw_destroy_plan(plan);
  return all;
}

void polarity_filter(std::vector<Detection>& dets, const EventFrame& frame,
                     const ChannelConfig& cfg) {
  for (Detection& d : dets) {
    int x1 = std::max(0, static_cast<int>(std::floor(d.box.x)));
    int y1 = std::max(0, static_cast<int>(std::floor(d.box.y)));
    int x2 = std::min(frame.width - 1, static_cast<int>(std::ceil(d.box.x2())) - 1);
    int y2 = std::min(frame.height - 1, static_cast<int>(std::ceil(d.box.y2())) - 1);
    double on = 0.0, off = 0.0;
    for (int y = y1; y <= y2; ++y) {
      for (int x = x1; x <= x2; ++x) {
        on += frame.on_at(x, y);
        off += frame.off_at(x, y);
      }
    }
    double factor;
    if (on + off <= 0.0) {
      factor = cfg.polarity_floor;
    } else {
      double balance = 1.0 - std::abs(on - off) / (on + off);
      factor = std::max(balance, cfg.polarity_floor);
    }
    d.score *= factor;
  }
}

std::array<double, 4> shadow_features(const Detection& det, const EventFrame& frame,
                                      const SensorGeometry& geometry) {
  const Box& b = det.box;
  double rel_y = geometry.height > 0 ? b.cy() / geometry.height : 0.0;
  double aspect = b.h > 0.0 ? b.w / b.h : 0.0;
  double mass = box_event_mass(frame, b);
  double density = b.area() > 0.0 ? mass / b.area() : 0.0;

  int x1 = std::max(0, static_cast<int>(std::floor(b.x)));
  int y1 = std::max(0, static_cast<int>(std::floor(b.y)));
  int x2 = std::min(frame.width - 1, static_cast<int>(std::ceil(b.x2())) - 1);
  int y2 = std::min(frame.height - 1, static_cast<int>(std::ceil(b.y2())) - 1);
  double on = 0.0, off = 0.0;
  for (int y = y1; y <= y2; ++y) {
    for (int x = x1; x <= x2; ++x) {
      on += frame.on_at(x, y);
      off += frame.off_at(x, y);
    }
  }
  double balance = (on + off) > 0.0 ? 1.0 - std::abs(on - off) / (on + off) : 0.0;
  return {rel_y, aspect, density, balance};
}

void shadow_rescore(std::vector<Detection>& dets, const EventFrame& frame,
                    const SensorGeometry& geometry, const std::array<double, 4>& weights) {
  for (Detection& d : dets) {
    auto f = shadow_features(d, frame, geometry);
    double z = 0.0;
    for (int i = 0; i < 4; ++i) z += weights[i] * f[i];
    d.score *= 1.0 / (1.0 + std::exp(-z));
  }
}

std::array<double, 4> fit_shadow_weights(const std::vector<std::array<double, 4>>& features,
                                         const std::vector<double>& overlap, double gain) {
  if (features.size() != overlap.size() || features.size() < 2)
    throw DataError("fit_shadow_weights: need matched feature/overlap vectors, n >= 2");
  std::array<double, 4> w{0.0, 0.0, 0.0, 0.0};
  const double n = static_cast<double>(features.size());
  double my = 0.0;
  for (double v : overlap) my += v;
  my /= n;
  for (int j = 0; j < 4; ++j) {
    double mf = 0.0;
    for (const auto& f : features) mf += f[j];
    mf /= n;
    double cov = 0.0, vf = 0.0, vy = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
      double df = features[i][j] - mf;
      double dy = overlap[i] - my;
      cov += df * dy;
      vf += df * df;
      vy += dy * dy;
    }
    // Relative floor so a constant feature (variance = rounding noise) maps
    // to weight 0 instead of a correlation of pure float noise.
    double floor_f = 1e-20 * n * (1.0 + mf * mf);
    w[j] = (vf > floor_f && vy > 0.0) ? gain * cov / std::sqrt(vf * vy) : 0.0;
  }
  return w;
}

std::vector<Detection> iou_union(const std::vector<Detection>& candidates, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw DataError("iou_union: tau must be in (0, 1)");

  std::vector<Detection> accepted;
  std::vector<const Detection*> aux;
  for (const Detection& d : candidates) {
    if (d.rank == 1)
      accepted.push_back(d);
    else
      aux.push_back(&d);
  }
  std::sort(accepted.begin(), accepted.end(), [](const Detection& a, const Detection& b) {
    return static_cast<int>(a.channel) < static_cast<int>(b.channel);
  });
  std::sort(aux.begin(), aux.end(), [](const Detection* a, const Detection* b) {
    if (a->score != b->score) return a->score > b->score;
    if (a->box.y != b->box.y) return a->box.y < b->box.y;
    if (a->box.x != b->box.x) return a->box.x < b->box.x;
    return static_cast<int>(a->channel) < static_cast<int>(b->channel);
  });
  for (const Detection* d : aux) {
    double max_iou = 0.0;
    for (const Detection& a : accepted) max_iou = std::max(max_iou, iou(d->box, a.box));
    if (max_iou < tau) accepted.push_back(*d);
  }
  return accepted;
}

void support_confidence(std::vector<Detection>& dets,
                        const std::vector<Detection>& frame_candidates,
                        double support_iou, double gain) {
  for (Detection& d : dets) {
    int s = 0;
    for (const Detection& c : frame_candidates) {
      if (c.frame_index != d.frame_index) continue;
      if (iou(d.box, c.box) >= support_iou) ++s;
    }
    d.score *= 1.0 + gain * std::max(0, s - 1);
  }
}

std::vector<Detection> SequenceResult::all_fused() const {
  std::vector<Detection> out;
  for (const FrameResult& fr : per_frame)
    out.insert(out.end(), fr.fused.begin(), fr.fused.end());
  return out;
}

std::vector<Detection> SequenceResult::all_candidates() const {
  std::vector<Detection> out;
  for (const FrameResult& fr : per_frame)
    out.insert(out.end(), fr.candidates.begin(), fr.candidates.end());
  return out;
}

SequenceResult run_pipeline(const EventStream& stream, const ChannelConfig& cfg,
                            const PipelineOptions& opts) {
  SequenceResult result;
  const EventStream* active = &stream;
  EventStream filtered;
  if (opts.enable_hot_pixel_filter) {
    auto raw_frames = accumulate_frames(stream, opts.window_us);
    if (!raw_frames.empty()) {
      HotPixelMask mask = hot_pixel_mask(raw_frames, opts.hot_pixel_threshold);
      filtered = apply_mask(stream, mask);
      active = &filtered;
    }
  }

  result.frames = accumulate_frames(*active, opts.window_us);
  result.per_frame.resize(result.frames.size());

  auto rotor_dets = rotor_frequency(*active, result.frames, cfg);

  for (std::size_t fi = 0; fi < result.frames.size(); ++fi) {
    const EventFrame& frame = result.frames[fi];
    std::vector<Detection>& cands = result.per_frame[fi].candidates;

    if (auto d = density_watershed(frame, cfg)) cands.push_back(*d);
    auto km = mh_kmeans(frame, cfg);
    cands.insert(cands.end(), km.begin(), km.end());
    if (auto d = temporal_diff(result.frames, static_cast<int>(fi), cfg)) cands.push_back(*d);
    for (const Detection& d : rotor_dets) {
      if (d.frame_index == frame.frame_index) cands.push_back(d);
    }

    polarity_filter(cands, frame, cfg);
    if (opts.enable_shadow)
      shadow_rescore(cands, frame, stream.geometry, cfg.shadow_weights);

    std::vector<Detection> fused = iou_union(cands, cfg.union_tau);
    if (opts.enable_support)
      support_confidence(fused, cands, cfg.support_iou, cfg.support_gain);
    result.per_frame[fi].fused = std::move(fused);
  }
  return result;
}

double candidate_coverage(const std::vector<Detection>& candidates,
                          const std::vector<GroundTruthBox>& gt, double iou_thr) {
  if (!(iou_thr > 0.0 && iou_thr < 1.0))
    throw DataError("candidate_coverage: iou_thr must be in (0, 1)");
  if (gt.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t covered = 0;
  for (const GroundTruthBox& g : gt) {
    for (const Detection& d : candidates) {
      if (d.frame_index == g.frame_index && iou(d.box, g.box()) >= iou_thr) {
        ++covered;
        break;
      }
    }
  }
  return static_cast<double>(covered) / static_cast<double>(gt.size());
}

double candidate_oracle(const std::vector<std::vector<Detection>>& per_seq_candidates,
                        const std::vector<std::vector<GroundTruthBox>>& per_seq_gt,
                        double iou_thr) {
  if (per_seq_candidates.size() != per_seq_gt.size())
    throw DataError("candidate_oracle: sequence count mismatch");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < per_seq_gt.size(); ++i) {
    if (per_seq_gt[i].empty()) continue;  // excluded from the mean
    sum += candidate_coverage(per_seq_candidates[i], per_seq_gt[i], iou_thr);
    ++n;
  }
  return n > 0 ? sum / static_cast<double>(n)
               : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace spikedet
