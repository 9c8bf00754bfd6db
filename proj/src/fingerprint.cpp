#include "spikedet/fingerprint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spikedet/errors.hpp"

namespace spikedet {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kStdFloor = 1e-9;

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return kNaN;
  if (p < 0.0 || p > 100.0) throw DataError("percentile: p out of [0, 100]");
  std::sort(values.begin(), values.end());
  double pos = p / 100.0 * static_cast<double>(values.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= values.size()) return values.back();
  double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[lo + 1] - values[lo]) * frac;
}

RawFingerprint extract_fingerprint(const SequenceResult& result) {
  RawFingerprint fp;
  fp.fill(kNaN);

  std::vector<double> rates, densities;
  for (const EventFrame& f : result.frames) {
    double total = static_cast<double>(f.total_events());
    rates.push_back(total);
    double px = static_cast<double>(f.width) * f.height;
    densities.push_back(px > 0.0 ? total / px : 0.0);
  }
  if (!rates.empty()) {
    fp[0] = percentile(rates, 50.0);
    fp[1] = percentile(rates, 90.0);
    double dm = mean_of(densities);
    double dv = 0.0;
    for (double d : densities) dv += (d - dm) * (d - dm);
    fp[2] = dv / static_cast<double>(densities.size());
  }

  std::vector<double> cx, cy, areas, agreements, counts;
  for (const FrameResult& fr : result.per_frame) {
    counts.push_back(static_cast<double>(fr.fused.size()));
    const Detection* top = nullptr;
    for (const Detection& d : fr.fused) {
      if (!top || d.score > top->score) top = &d;
    }
    if (top) {
      cx.push_back(top->box.cx());
      cy.push_back(top->box.cy());
      areas.push_back(top->box.area());
    }
    // Per-frame channel rank-1 boxes for the agreement statistic.
    std::vector<const Box*> tops;
    for (const Detection& d : fr.candidates)
      if (d.rank == 1) tops.push_back(&d.box);
    if (tops.size() >= 2) {
      double sum = 0.0;
      int pairs = 0;
      for (std::size_t i = 0; i < tops.size(); ++i)
        for (std::size_t j = i + 1; j < tops.size(); ++j) {
          sum += iou(*tops[i], *tops[j]);
          ++pairs;
        }
      agreements.push_back(sum / pairs);
    }
  }

  if (!cx.empty()) {
    fp[3] = mean_of(cx);
    fp[4] = std_of(cx);
    fp[5] = mean_of(cy);
    fp[6] = std_of(cy);
    fp[7] = percentile(cx, 10.0);
    fp[8] = percentile(cx, 90.0);
    fp[9] = percentile(cy, 10.0);
    fp[10] = percentile(cy, 90.0);
    fp[11] = percentile(areas, 50.0);
    fp[12] = percentile(areas, 10.0);
    fp[13] = percentile(areas, 90.0);
  }
  if (!agreements.empty()) {
    fp[14] = mean_of(agreements);
    fp[15] = std_of(agreements);
  }
  if (!counts.empty()) fp[16] = mean_of(counts);
  return fp;
}

ZScoreParams zscore_fit(const std::vector<RawFingerprint>& train) {
  if (train.size() < 2) throw DataError("zscore_fit: need at least 2 fingerprints");
  ZScoreParams params;
  for (int j = 0; j < kFingerprintDim; ++j) {
    std::vector<double> col;
    for (const RawFingerprint& fp : train) {
      double v = fp[static_cast<std::size_t>(j)];
      if (std::isnan(v)) continue;
      if (j == 2) v = std::log1p(v);
      col.push_back(v);
    }
    if (col.empty()) {
      params.mean[j] = 0.0;
      params.std[j] = 1.0;
      params.constant[j] = true;
      continue;
    }
    params.mean[j] = mean_of(col);
    double sd = std_of(col);
    if (sd < kStdFloor) {
      params.constant[j] = true;
      sd = kStdFloor;
    }
    params.std[j] = sd;
  }
  return params;
}

Fingerprint zscore_apply(const RawFingerprint& fp, const ZScoreParams& params) {
  Fingerprint out;
  for (int j = 0; j < kFingerprintDim; ++j) {
    double v = fp[static_cast<std::size_t>(j)];
    if (std::isnan(v)) {
      out[j] = 0.0;  // sentinel for undefined features
      continue;
    }
    if (j == 2) v = std::log1p(v);
    double z = (v - params.mean[j]) / params.std[j];
    out[j] = std::clamp(z, -5.0, 5.0);
  }
  return out;
}

}  // namespace spikedet
