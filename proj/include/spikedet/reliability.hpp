#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spikedet/channels.hpp"
#include "spikedet/detection.hpp"
#include "spikedet/events.hpp"
#include "spikedet/snn.hpp"

namespace spikedet {

// -- candidate reliability (R-STDP gate) --------------------------------------

enum class FredState : uint8_t {
  object_extent = 0,
  object_edge,
  duplicate,
  background_edge,
  hot_pixel,
  unknown,
};
inline constexpr int kFredStates = 6;

const char* fred_state_name(FredState s);

// Per-candidate descriptor, frozen order:
//   0 source channel ordinal      7 aspect ratio w/h
//   1 confidence (raw score)      8 frame candidate count
//   2 within-channel rank         9 cross-channel support at IoU 0.30
//   3 box x                      10 cross-channel support at IoU 0.50
//   4 box y                      11 distinct supporting channels
//   5 box w                      12 mean supporter IoU (geometry summary)
//   6 box h
inline constexpr int kCandidateFeatureDim = 13;
using CandidateFeatures = std::array<double, kCandidateFeatureDim>;

// Raw (unnormalized) features for one candidate against its frame's full
// candidate pool. Geometry coordinates are scaled to the sensor.
CandidateFeatures candidate_features(const Detection& det,
                                     const std::vector<Detection>& frame_candidates,
                                     const SensorGeometry& geometry);

// Median/MAD normalization fitted on the train split; applied values clip to
// +/-5 like the fingerprint z-scores. Features whose MAD vanishes fall back
// to unit scale.
struct RobustNorm {
  std::array<double, kCandidateFeatureDim> median{};
  std::array<double, kCandidateFeatureDim> scale{};  // 1.4826 * MAD
};

RobustNorm robust_fit(const std::vector<CandidateFeatures>& xs);
CandidateFeatures robust_apply(const RobustNorm& norm, const CandidateFeatures& x);

// Frame-local competitive reward. Winners are claimed greedily in score
// order: best unclaimed-GT IoU >= 0.50 earns the positive reward and claims
// its box, IoU in [0.30, 0.50) earns the weak positive as object_edge, a
// candidate overlapping an already-rewarded winner is a duplicate with
// negative reward, and everything else takes the background path (hot_pixel
// for near-point boxes, background_edge otherwise). Frames without ground
// truth route every candidate through the background path.
struct RewardConfig {
  double positive = 1.0;
  double weak = 0.5;
  double duplicate = -1.0;
  double background = -0.5;
  double win_iou = 0.50;
  double edge_iou = 0.30;
  double dup_iou = 0.30;       // overlap with a winner that marks a duplicate
  double point_area = 4.0;     // box area at or below this is hot_pixel-like
};

struct RewardedCandidate {
  FredState state = FredState::unknown;
  double reward = 0.0;
};

std::vector<RewardedCandidate> assign_reward(const std::vector<Detection>& candidates,
                                             const std::vector<GroundTruthBox>& gt,
                                             const RewardConfig& cfg = {});

// 13 -> 64 (fixed sparse, WTA) -> 6 reliability states, 384 plastic synapses.
struct RstdpConfig {
  int n_feature = kCandidateFeatureDim;
  int n_hidden = 64;
  int n_state = kFredStates;
  int steps = 150;
  int epochs = 3;
  int draws = 5;
  // Pair-STDP rate x mean active-trace fraction, equalizing the
  // time-integrated update magnitude against the sequence gate's 0.002.
  double eta = 0.001066;
  double w_fh_scale = 1.0;
  double sparsity = 0.5;
  uint64_t seed = 0;
};

struct RstdpGate {
  RstdpConfig cfg;
  std::vector<double> w_fh;      // n_feature * n_hidden, row-major, frozen
  std::vector<uint8_t> fh_mask;  // 1 = connection present, frozen
  PlasticSynapses w_hs;          // n_hidden x n_state, the 384 plastic weights
  LifLayer hidden;
  LifLayer state;
  RobustNorm norm;               // train-split feature statistics
};

RstdpGate make_rstdp_gate(const RstdpConfig& cfg);

// Three-factor reward-modulated training. Fits the robust normalizer on the
// raw features, then presents each candidate Poisson-encoded: hidden hard
// WTA, free-running state layer under homeostatic thresholds, and a pair-STDP
// eligibility trace that is converted to a weight change once per
// presentation by r * |reward|, where r is +1 when the spiking decision
// matches the assigned state and -1 otherwise. Zero-reward candidates leave
// the weights untouched. Deterministic per seed.
void train_rstdp_gate(RstdpGate& gate, const std::vector<CandidateFeatures>& raw,
                      const std::vector<RewardedCandidate>& labels);

// Frozen classification: `draws` Poisson presentations at baseline
// thresholds, per-draw argmax of state spikes, plurality across draws.
// A winner with zero total spikes maps to unknown. Confidence is the
// winner's share of all state spikes (0 when silent).
struct StateVote {
  FredState state = FredState::unknown;
  double confidence = 0.0;
};

StateVote rstdp_classify(const RstdpGate& gate, const CandidateFeatures& raw);

// Anchor-preserving inference over one processed sequence. Fused boxes pass
// through with geometry untouched and confidence scaled by the state factor;
// per frame at most one non-anchor candidate is admitted, and only when it
// has same-frame support from another channel and a neighbouring frame holds
// a candidate within the WTA radius. Among eligible rescues the highest
// classification confidence wins (object states only); the rescue's score is
// modulated like an anchor's.
struct RescuePolicy {
  std::array<double, kFredStates> factor{1.1, 1.0, 0.8, 0.7, 0.6, 1.0};
  double support_iou = 0.30;
  double wta_radius = 12.0;  // px, neighbour-frame persistence radius
};

std::vector<Detection> rstdp_gate_infer(const SequenceResult& seq, const RstdpGate& gate,
                                        const SensorGeometry& geometry,
                                        const RescuePolicy& policy = {});

void save_rstdp_gate(const std::filesystem::path& path, const RstdpGate& gate);
RstdpGate load_rstdp_gate(const std::filesystem::path& path);
uint64_t rstdp_gate_digest(const RstdpGate& gate);

// -- tube reliability (STDP-Tube) ---------------------------------------------

// Score-ordered IoU suppression, frame-local; ties keep the earlier channel,
// then the lower rank.
std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_thr = 0.5);

// A chain of linked detections, one per touched frame, frame-ascending.
// Support is counted against the (pre-NMS) candidate pool supplied at link
// time; isolation measures distance to same-frame pool evidence outside the
// tube's own support.
struct Tube {
  std::vector<Detection> dets;
  std::vector<int> support;            // per det: other-channel overlaps
  std::vector<uint8_t> support_mask;   // per det: channel bit set when supporting
  double isolation = 1.0;              // [0, 1], 1 = nothing else nearby

  int birth() const { return dets.front().frame_index; }
  int death() const { return dets.back().frame_index; }
  int span() const { return death() - birth() + 1; }
  int length() const { return static_cast<int>(dets.size()); }
  int gap_count() const { return span() - length(); }
};

struct LinkConfig {
  int max_gap = 2;             // tolerated missing frames between links
  double max_link_dist = 12.0; // px, consecutive centroid distance
  double support_iou = 0.30;
};

// Greedy linking of post-NMS detections: frames ascending, score-descending
// within a frame, each detection joining the nearest open tube whose last
// link is within the gap and distance bounds (ties to the older tube), else
// founding its own. Every detection lands in exactly one tube. `pool`
// provides the support/isolation context; empty means "use dets".
std::vector<Tube> link_tubes(const std::vector<Detection>& dets,
                             const std::vector<Detection>& pool = {},
                             const LinkConfig& cfg = {});

// Tube descriptor, frozen order, every entry in [0, 1]:
//   0 age                 5 support density      10 gap fraction
//   1 continuity          6 channel agreement    11 size prior
//   2 motion residual     7 isolation            12 mean score
//   3 area stability      8 speed
//   4 score stability     9 stationarity
inline constexpr int kTubeFeatureDim = 13;
using TubeFeatures = std::array<double, kTubeFeatureDim>;

TubeFeatures tube_features(const Tube& tube);

enum class TubeState : uint8_t {
  real_moving = 0,
  real_stationary,
  background_edge,
  hot_pixel_noise,
  ambiguous,
  unknown,
};
inline constexpr int kTubeStates = 6;

const char* tube_state_name(TubeState s);

// Single bounded WTA/STDP layer mapping the 13 tube features onto the six
// states. Weights start from per-state evidence templates (continuity,
// support and size for the real states; stationarity and isolation for the
// noise states) so the states carry their meaning before any training, and
// unsupervised STDP sharpens them on observed tubes.
struct TubeLayerConfig {
  int steps = 150;
  int epochs = 3;
  int draws = 5;
  double eta_plus = 0.002;
  double eta_minus = 0.002;
  int min_spikes = 1;  // winner below this total maps to unknown
  uint64_t seed = 0;
};

struct TubeLayer {
  TubeLayerConfig cfg;
  PlasticSynapses w;  // kTubeFeatureDim x kTubeStates
  LifLayer state;
};

TubeLayer make_tube_layer(const TubeLayerConfig& cfg);

// Unsupervised refinement: per presentation the WTA-winning state's weights
// move toward the active features (pair STDP, clipped, L1-renormalized once
// per presentation) under homeostatic thresholds. Deterministic per seed.
void train_tube_layer(TubeLayer& layer, const std::vector<TubeFeatures>& feats);

struct TubePolicy {
  bool emit_ambiguous = false;
  bool emit_unknown = false;
};

struct TubeDecision {
  TubeState state = TubeState::unknown;
  bool emit = false;
};

// Frozen classification plus the delayed-emission rule: tubes shorter than K
// withhold emission regardless of state; real_* states emit, noise states
// suppress, ambiguous/unknown follow the policy. K is one of the two
// validation-locked lengths {3, 5}.
TubeDecision tube_classify(const Tube& tube, const TubeLayer& layer, int K,
                           const TubePolicy& policy = {});

struct TubeRecord {
  Tube tube;
  TubeState state = TubeState::unknown;
  bool emitted = false;
};

// Link + classify in one pass (the `stdp` tube mode).
std::vector<TubeRecord> classify_tubes(const std::vector<Detection>& dets,
                                       const std::vector<Detection>& pool,
                                       const TubeLayer& layer, int K,
                                       const LinkConfig& link = {},
                                       const TubePolicy& policy = {});

// Detections of emitting tubes, input order preserved.
std::vector<Detection> stdp_tube_filter(const std::vector<Detection>& dets,
                                        const std::vector<Detection>& pool,
                                        const TubeLayer& layer, int K,
                                        const LinkConfig& link = {},
                                        const TubePolicy& policy = {});

// Non-learned baseline: keep detections whose tube reaches length K. K >= 1;
// K = 1 is the identity.
std::vector<Detection> fixed_tube_filter(const std::vector<Detection>& dets, int K,
                                         const LinkConfig& link = {});

void save_tube_layer(const std::filesystem::path& path, const TubeLayer& layer);
TubeLayer load_tube_layer(const std::filesystem::path& path);
uint64_t tube_layer_digest(const TubeLayer& layer);

}  // namespace spikedet
