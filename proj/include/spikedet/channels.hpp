#pragma once

#include <array>
#include <optional>
#include <vector>

#include "spikedet/detection.hpp"
#include "spikedet/events.hpp"

namespace spikedet {

// -- individual channels ------------------------------------------------------

// Gaussian-smoothed event-density peak grown by flood filling down to
// flood_stop * peak. Emits nothing when the frame is empty or the grown box is
// smaller than min_box. Score = enclosed event mass. Peak ties break toward
// the lowest (y, x).
std::optional<Detection> density_watershed(const EventFrame& frame, const ChannelConfig& cfg);

// Seeded k-means over event coordinates (k = kmeans_topk, reduced to the
// number of distinct firing pixels when smaller), one tight box per cluster
// grown to min_box, ranked by event-cluster mass descending.
std::vector<Detection> mh_kmeans(const EventFrame& frame, const ChannelConfig& cfg);

// |center - mean(+/-2 neighbors)| map, then the watershed box-growing rule.
// Missing neighbors count as zero frames. `center` indexes into `frames`.
std::optional<Detection> temporal_diff(const std::vector<EventFrame>& frames, int center,
                                       const ChannelConfig& cfg);

// Per spatial tile, FFT of the tile's 1 ms event-rate series over the trailing
// rotor_fft_window frames. A tile detects when its dominant non-DC peak lies
// inside the rotor band and holds at least rotor_ratio_min of the non-DC
// power. Frames earlier than a full window produce no output.
std::vector<Detection> rotor_frequency(const EventStream& stream,
                                       const std::vector<EventFrame>& frames,
                                       const ChannelConfig& cfg);

// Score-only transforms: boxes and detection counts are preserved exactly.
void polarity_filter(std::vector<Detection>& dets, const EventFrame& frame,
                     const ChannelConfig& cfg);

// The four shadow-rescore features, in frozen order.
std::array<double, 4> shadow_features(const Detection& det, const EventFrame& frame,
                                      const SensorGeometry& geometry);

void shadow_rescore(std::vector<Detection>& dets, const EventFrame& frame,
                    const SensorGeometry& geometry, const std::array<double, 4>& weights);

// Per-feature correlation fit against an overlap target; scaled so the sign
// structure dominates the sigmoid.
std::array<double, 4> fit_shadow_weights(const std::vector<std::array<double, 4>>& features,
                                         const std::vector<double>& overlap, double gain = 4.0);

// -- fusion -------------------------------------------------------------------

// Accepts every channel's rank-1 candidate, then appends remaining candidates
// in score order while their max IoU against the running set stays below tau.
// Channel provenance is preserved.
std::vector<Detection> iou_union(const std::vector<Detection>& candidates, double tau);

// s = same-frame channel candidates overlapping the detection at
// IoU >= support_iou (itself included); score *= 1 + gain * max(0, s - 1).
void support_confidence(std::vector<Detection>& dets,
                        const std::vector<Detection>& frame_candidates,
                        double support_iou, double gain);

// -- per-sequence pipeline ----------------------------------------------------

struct FrameResult {
  std::vector<Detection> candidates;  // all channel candidates, polarity-reweighted
  std::vector<Detection> fused;       // IoU-distinctness union + support confidence
};

struct PipelineOptions {
  bool enable_shadow = false;    // sixth channel (train-calibrated rescore)
  bool enable_support = true;
  bool enable_hot_pixel_filter = false;
  double hot_pixel_threshold = 0.20;
  uint64_t window_us = 20'000;
};

struct SequenceResult {
  std::vector<EventFrame> frames;
  std::vector<FrameResult> per_frame;

  std::vector<Detection> all_fused() const;
  std::vector<Detection> all_candidates() const;
};

SequenceResult run_pipeline(const EventStream& stream, const ChannelConfig& cfg,
                            const PipelineOptions& opts);

// -- diagnostics --------------------------------------------------------------

// Fraction of GT targets covered by >= 1 candidate at the IoU threshold for a
// single sequence; "coverage, not AP".
double candidate_coverage(const std::vector<Detection>& candidates,
                          const std::vector<GroundTruthBox>& gt, double iou_thr);

// Unweighted mean of per-sequence coverage; sequences without GT are excluded.
double candidate_oracle(const std::vector<std::vector<Detection>>& per_seq_candidates,
                        const std::vector<std::vector<GroundTruthBox>>& per_seq_gt,
                        double iou_thr);

}  // namespace spikedet
