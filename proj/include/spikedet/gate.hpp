#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "spikedet/fingerprint.hpp"
#include "spikedet/quant.hpp"
#include "spikedet/snn.hpp"

namespace spikedet {

struct GateConfig {
  int n_input = kFingerprintDim;  // 17
  int n_hidden = 32;
  int n_output = 12;
  int steps = 350;     // presentation length T
  int epochs = 30;
  int draws = 5;       // plurality-vote inference draws
  double eta_plus = 0.002;
  double eta_minus = 0.002;
  double w_ih_scale = 1.0;   // nonzero input weights uniform in (0, scale]
  double sparsity = 0.5;     // Bernoulli zero-mask probability
  uint64_t seed = 0;
};

// 17 -> 32 (fixed sparse, WTA) -> 12 (plastic, 384 synapses) cohort gate.
struct CohortGate {
  GateConfig cfg;
  std::vector<double> w_ih;    // n_input * n_hidden, row-major, frozen
  std::vector<uint8_t> ih_mask;  // 1 = connection present, frozen
  PlasticSynapses w_ho;        // n_hidden x n_output
  LifLayer hidden;
  LifLayer output;

  CohortGate() : hidden(0), output(0) {}
};

// Spike/step tallies for the energy proxy.
struct SpikeCounts {
  uint64_t steps = 0;
  uint64_t input_spikes = 0;
  uint64_t hidden_spikes = 0;
  uint64_t output_spikes = 0;
  uint64_t synaptic_ops = 0;     // weight accumulations triggered by spikes
  uint64_t neuron_updates = 0;   // leaky-integrate updates (neurons x steps)

  SpikeCounts& operator+=(const SpikeCounts& o) {
    steps += o.steps;
    input_spikes += o.input_spikes;
    hidden_spikes += o.hidden_spikes;
    output_spikes += o.output_spikes;
    synaptic_ops += o.synaptic_ops;
    neuron_updates += o.neuron_updates;
    return *this;
  }
};

// Seeded init: sparse positive w_ih (mask fixed for the gate's lifetime),
// dense uniform w_ho in [0, cap] then L1-normalized, thresholds at baseline.
CohortGate make_gate(const GateConfig& cfg);

// Unsupervised phase-1 training: every epoch presents each fingerprint for
// `steps` 1 ms ticks (Poisson-encoded), with hard WTA at the hidden layer,
// free-running cohort neurons under homeostatic threshold adaptation, pair
// STDP on the hidden->output synapses, and one L1 normalization per
// presentation. Only w_ho and the cohort thresholds change; hidden
// thresholds stay at baseline.
void train_phase1(CohortGate& gate, const std::vector<Fingerprint>& train);

// One training-style presentation with the dynamics above: Poisson draws
// from rng_key, STDP, homeostasis, one trailing L1 normalization. This is
// the unit train_phase1 loops over; the streaming harness calls it directly
// for per-step online updates.
void train_present(CohortGate& gate, const Fingerprint& fp, uint64_t rng_key);

// Plurality winner of per-draw votes; ties resolve to the lowest cohort id.
int plurality_vote(const std::vector<int>& votes);

// Frozen inference: `draws` independent Poisson presentations, each voting
// for the output neuron with the most spikes (tie -> lowest index, zero
// spikes -> cohort 0), then a plurality over draws. Mutates nothing and runs
// at baseline thresholds: the persistent gate is its weight tensors, the
// homeostatic thresholds are training scaffold (checkpoints omit them).
// A non-null quant spec runs the whole forward pass on the fixed-point grid
// (weights per-tensor, membrane registers on an anchor-range grid), with the
// identical random draw sequence as the float path.
int assign_cohort(const CohortGate& gate, const Fingerprint& fp,
                  const QuantSpec* quant = nullptr, SpikeCounts* counts = nullptr);

// Anchor range for quantizing dynamic registers (potentials, thresholds).
inline constexpr double kQuantDynamicRange = 4.0;

// Byte-stable checkpoint (fixed-width little-endian fields).
void save_gate(const std::filesystem::path& path, const CohortGate& gate);
CohortGate load_gate(const std::filesystem::path& path);

// FNV-1a over the serialized checkpoint bytes / over w_ho alone (the
// frozen-weights identity check used by the streaming protocol).
uint64_t gate_digest(const CohortGate& gate);
uint64_t w_ho_digest(const CohortGate& gate);

}  // namespace spikedet
