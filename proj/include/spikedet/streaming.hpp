#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spikedet/gate.hpp"
#include "spikedet/lever.hpp"
#include "spikedet/routers.hpp"

namespace spikedet {

// -- stream splitting ---------------------------------------------------------

struct StreamSplit {
  enum class Mode { by_id, random_5050 };

  Mode mode = Mode::by_id;
  std::vector<int> initial_ids;
  std::vector<int> shifted_ids;  // presentation order
  uint64_t split_seed = 42;
};

inline constexpr int kByIdThreshold = 113;  // ids <= 113 form the initial stream

// by_id keeps the input (acquisition) order and thresholds at id 113;
// random_5050 shuffles with the split seed, then the first ceil(n/2) ids
// form the initial stream and the rest stream in shuffled order.
StreamSplit split_stream(const std::vector<int>& ids, StreamSplit::Mode mode,
                         uint64_t split_seed = 42);

// -- protocol data ------------------------------------------------------------

// One resolved streaming-protocol instance. The per-recipe metric tables are
// the only place sequence quality enters: the initial table derives the
// label-free cohort->recipe map, the eval table scores assignments. Ground
// truth never reaches a router.
struct StreamData {
  std::vector<Fingerprint> initial;
  std::vector<std::map<Recipe, double>> initial_metrics;  // percent units
  std::vector<Fingerprint> shifted;                       // presentation order
  std::vector<Fingerprint> eval_fps;                      // fixed before any run
  std::vector<std::map<Recipe, double>> eval_metrics;
  LeverPool pool = LeverPool::l4;
};

struct StreamRunRecord {
  std::string method;
  uint64_t seed = 0;
  uint64_t config_digest = 0;
  std::vector<double> trace;       // one eval metric per shifted-stream step
  double final_score = 0.0;        // mean over the trace
  uint64_t state_digest_pre = 0;   // after fit + map derivation
  uint64_t state_digest_post = 0;  // after the last shifted step
};

// The streaming protocol: fit the router on the initial stream, derive the
// cohort->recipe map there, then present shifted fingerprints one at a time;
// after every step the fixed eval slice is reassigned read-only and its mean
// metric appended to the trace. The map is rebuilt only when the router
// reports a relabeling refit. Throws ProtocolViolation if an eval sweep
// mutates the router or a frozen router's state changes at all.
StreamRunRecord run_stream(Router& router, const StreamData& data);

// -- synthetic drift world ----------------------------------------------------

// Three well-separated binary fingerprint clusters, each tied to its own
// best recipe (shadow, mf3, raw; off-recipe costs a fixed margin). With
// drift enabled the cluster centers migrate toward the next cluster's
// initial region across the shifted stream, and the eval slice spans the
// migration path, so a router that tracks the shift routes more eval
// sequences to their matched recipe than a frozen one. Without drift the
// centers hold still and the pool is split 50/50 at the split seed: any
// adaptive-vs-frozen gap is noise. Deterministic for (seed, drifted).
StreamData make_drift_protocol(uint64_t seed, bool drifted,
                               int per_cluster_initial = 15, int shifted_steps = 60,
                               int eval_count = 30);

// -- mechanism-decomposition ablation -----------------------------------------

// scores[phase1][online][i] = final score of matched seed i for that cell:
// {random, phase1-STDP} x {frozen, online-STDP} gate deployments on one
// StreamData. Frozen cells verify weight byte-identity (via run_stream).
struct AblationScores {
  std::array<std::array<std::vector<double>, 2>, 2> scores;
  std::vector<uint64_t> seeds;

  const std::vector<double>& cell(bool phase1, bool online) const {
    return scores[phase1 ? 1 : 0][online ? 1 : 0];
  }
};

AblationScores ablation_grid(const StreamData& data, const RouterConfig& base,
                             const std::vector<uint64_t>& seeds);

// Paired a-minus-b differences and the count of strictly positive entries.
std::vector<double> paired_differences(const std::vector<double>& a,
                                       const std::vector<double>& b);
int positivity_count(const std::vector<double>& diffs);

double mean_of(const std::vector<double>& v);
double sample_sd(const std::vector<double>& v);  // n-1 denominator

// -- retention ----------------------------------------------------------------

struct RetentionResult {
  std::vector<double> delta;  // per eval sequence, post minus pre
  double retention = 0.0;     // fraction with |delta| <= margin
};

// Re-scores the eval slice under both gate states with the lever map held
// fixed; cross-seed averaging of the delta vectors is the caller's loop.
RetentionResult retention_check(const CohortGate& pre, const CohortGate& post,
                                const std::vector<Fingerprint>& eval_fps,
                                const std::vector<std::map<Recipe, double>>& eval_metrics,
                                const LeverMap& map, double margin = 0.5);

double retention_rate(const std::vector<double>& delta, double margin = 0.5);

// -- learning-rate matching ---------------------------------------------------

// Pair-STDP rate times the mean active-trace fraction: the reward-modulated
// rate with the same time-integrated update magnitude. Fraction in (0, 1].
double eta_matched_rate(double eta_pair, double active_trace_fraction);

}  // namespace spikedet
