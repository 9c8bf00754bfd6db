#pragma once

#include <array>
#include <vector>

#include "spikedet/channels.hpp"

namespace spikedet {

inline constexpr int kFingerprintDim = 17;

using RawFingerprint = std::array<double, kFingerprintDim>;
using Fingerprint = std::array<double, kFingerprintDim>;  // z-scored, clipped

// Fixed feature order (indices are load-bearing; the z-scorer applies log1p
// to index 2 and every consumer assumes this layout):
//   0 event-rate median          per-frame total event count
//   1 event-rate p90
//   2 density variance           population variance of per-frame events/px
//   3 centroid x mean            per-frame top-scoring fused detection
//   4 centroid x std
//   5 centroid y mean
//   6 centroid y std
//   7 centroid x p10
//   8 centroid x p90
//   9 centroid y p10
//  10 centroid y p90
//  11 area median                top-1 box area
//  12 area p10
//  13 area p90
//  14 agreement mean             mean pairwise IoU of channel rank-1 boxes
//  15 agreement std
//  16 detection-count mean       fused detections per frame
// Detection-dependent features are NaN when the sequence has no detections
// (no frame with >= 2 channel top-1s for 14/15); the z-scorer maps NaN to 0.
RawFingerprint extract_fingerprint(const SequenceResult& result);

// Percentile with linear interpolation between order statistics
// (p in [0, 100]); exposed for the feature tests.
double percentile(std::vector<double> values, double p);

struct ZScoreParams {
  std::array<double, kFingerprintDim> mean{};
  std::array<double, kFingerprintDim> std{};
  std::array<bool, kFingerprintDim> constant{};  // std floored for these
};

// Fit on training fingerprints only. The density-variance feature is log1p
// compressed before standardization; NaN entries are excluded per feature.
// Constant features get a floored std and a flag.
ZScoreParams zscore_fit(const std::vector<RawFingerprint>& train);

// (x - mean)/std with the same log1p transform, clipped to [-5, 5];
// NaN maps to 0 after standardization.
Fingerprint zscore_apply(const RawFingerprint& fp, const ZScoreParams& params);

}  // namespace spikedet
