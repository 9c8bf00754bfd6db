#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spikedet/gate.hpp"
#include "spikedet/geometry.hpp"
#include "spikedet/lever.hpp"
#include "spikedet/snn.hpp"

namespace spikedet {

// -- detection metrics --------------------------------------------------------

// One scored box pinned to a frame. Ground-truth entries ignore `score`.
struct EvalBox {
  int frame = 0;
  Box box;
  double score = 0.0;
};

using BoxList = std::vector<EvalBox>;

struct MapResult {
  double threshold = 0.0;
  std::vector<double> per_sequence;  // one AP per sequence that has ground truth
  double mean_ap = 0.0;              // NaN when no sequence qualifies
};

// Greedy matching in globally ranked score order: each detection takes the
// highest-IoU unmatched ground-truth box in its frame at IoU >= thr, each GT
// box matches at most once. AP integrates the precision-recall curve with
// 101-point interpolation.
double average_precision(const BoxList& dets, const BoxList& gt, double thr);

// Per-sequence AP, unweighted mean; zero-GT sequences are excluded.
MapResult map_at_iou(const std::vector<BoxList>& dets, const std::vector<BoxList>& gt,
                     double thr);

// Pixel-event mask comparison. Pd is absent (not zero) when gt is empty.
// fa_e4 = false-positive pixels per pixel-frame, scaled by 1e4.
struct EventMetrics {
  std::optional<double> pd;  // percent
  double fa_e4 = 0.0;
  double iou = 0.0;  // percent
};

// Masks are per-frame row-major width*height bytes (0/1), same frame count.
EventMetrics event_metrics(const std::vector<std::vector<uint8_t>>& pred,
                           const std::vector<std::vector<uint8_t>>& gt, int width,
                           int height);

// -- sequence-level statistics ------------------------------------------------

// Percentile bootstrap over sequence means, seeded. Requires >= 2 values.
std::pair<double, double> bootstrap_ci(const std::vector<double>& values,
                                       int resamples = 1000, double level = 0.95,
                                       uint64_t seed = 0);

struct TostResult {
  double p = 1.0;
  bool degenerate = false;   // zero-variance differences
  bool equivalent = false;   // p < 0.05, or |mean| < margin in the degenerate case
  double margin = 0.5;
};

// Two one-sided paired t-tests against +/-margin; p = max of the two.
TostResult tost_paired(const std::vector<double>& diffs, double margin = 0.5);

// Signed-rank test, two-sided. Exact enumeration when the exact branch
// applies (n <= 25, no zero differences, no tied |diff|), else normal
// approximation with Pratt zero handling and tie-corrected variance.
double wilcoxon_paired(const std::vector<double>& diffs);
bool wilcoxon_uses_exact(const std::vector<double>& diffs);

// Holm step-down adjustment; output order matches input order.
std::vector<double> holm_correct(const std::vector<double>& p_values);

// Two-sided exact sign test: binomial tail on the positive count among the
// nonzero differences. All-zero input returns p = 1.
double sign_test(const std::vector<double>& diffs);

// ceil((sigma_rand / sigma_stdp)^2), both strictly positive.
int n_star(double sigma_rand, double sigma_stdp);

// -- ensemble analysis --------------------------------------------------------

struct SigmaCurve {
  std::vector<int> n_grid;
  std::vector<double> sigma;     // realized-metric sd at each N
  std::vector<double> ratio;     // sigma[N] / (sigma1 / sqrt(N))
  double sigma1 = 0.0;           // exact per-seed sd (the N = 1 point)
};

// Bootstrap-samples N gates with replacement; each draw plurality-votes the
// per-sequence cohort, then plurality-votes the voted cohort's recipe across
// the sampled lever maps, and scores the stream with metrics[s][recipe].
// N = 1 is computed exactly (no resampling). Ties vote toward the lower
// cohort id / earlier recipe.
SigmaCurve ensemble_sigma_bootstrap(const std::vector<std::vector<int>>& assignments,
                                    const std::vector<LeverMap>& maps,
                                    const std::vector<std::map<Recipe, double>>& metrics,
                                    const std::vector<int>& n_grid, int draws = 10000,
                                    uint64_t seed = 0);

// -- attractor diagnostics ----------------------------------------------------

struct AttractorDiag {
  double column_entropy = 0.0;  // nats, mean over columns (zero columns count 0)
  double row_norm_cv = 0.0;     // sd / mean of row L2 norms
  int zero_columns = 0;
};

AttractorDiag attractor_diagnostics(const PlasticSynapses& w);

// -- energy proxy -------------------------------------------------------------

// Component costs in nJ; every component named here must be present.
// Defaults sit in the published per-component range for neuromorphic
// hardware, with the idle term dominating at this workload's sparsity.
std::map<std::string, double> default_energy_costs();

// Dot product of counts and per-component costs, reported in uJ.
double energy_proxy_uj(const SpikeCounts& counts,
                       const std::map<std::string, double>& costs_nj);

}  // namespace spikedet
