#pragma once

#include <cmath>
#include <vector>

namespace spikedet {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Firing probability per 1 ms step for an encoded feature value.
// r = sigmoid(z/2) * r_max, r_max = 0.08.
double poisson_rate(double z);

inline constexpr double kRateMax = 0.08;

// Leaky integrate-and-fire layer with homeostatic thresholds.
// v <- v*(1 - dv) + input; spike at v >= theta, reset to 0.
struct LifLayer {
  std::vector<double> v;
  std::vector<double> theta;
  double dv = 0.1;
  double baseline = 1.0;
  double homeo_bump = 0.01;
  double homeo_decay = 0.999;

  explicit LifLayer(int n)
      : v(static_cast<std::size_t>(n), 0.0),
        theta(static_cast<std::size_t>(n), 1.0) {}

  int size() const { return static_cast<int>(v.size()); }

  // Clears membrane potentials (thresholds persist across presentations).
  void rest() { std::fill(v.begin(), v.end(), 0.0); }
};

// One integration step. Spiking neurons reset to 0; their pre-reset
// potentials are recorded (parallel to the returned index list) so a WTA
// stage can arbitrate among them. No threshold changes happen here.
std::vector<int> lif_integrate(LifLayer& layer, const std::vector<double>& input,
                               std::vector<double>* pre_reset = nullptr);

// Hard winner-take-all: the spiker with maximal pre-reset potential wins,
// ties resolve to the lowest index, every other spike is cancelled.
// Returns -1 when no one spiked.
int wta_select(const std::vector<int>& spikers, const std::vector<double>& pre_reset);

// Threshold homeostasis for one step: decay toward baseline with the 0.999
// factor, then +0.01 for each neuron that (survived and) spiked. The decay
// runs every step regardless of activity.
void homeostasis_step(LifLayer& layer, const std::vector<int>& spikes);

// Pre/post spike traces: *0.95 per 1 ms step, +1 on a (surviving) spike.
struct StdpTraces {
  std::vector<double> pre;
  std::vector<double> post;
  double decay = 0.95;

  StdpTraces(int n_pre, int n_post)
      : pre(static_cast<std::size_t>(n_pre), 0.0),
        post(static_cast<std::size_t>(n_post), 0.0) {}

  void decay_step() {
    for (double& t : pre) t *= decay;
    for (double& t : post) t *= decay;
  }
  void on_pre(int i) { pre[static_cast<std::size_t>(i)] += 1.0; }
  void on_post(int j) { post[static_cast<std::size_t>(j)] += 1.0; }
  void clear() {
    std::fill(pre.begin(), pre.end(), 0.0);
    std::fill(post.begin(), post.end(), 0.0);
  }
};

// Dense pre x post weight matrix with the shared bounds used everywhere:
// weights live in [0, cap], columns are L1-normalized to l1_target.
struct PlasticSynapses {
  int n_pre = 0;
  int n_post = 0;
  std::vector<double> w;  // row-major [pre][post]
  double cap = 0.8;
  double l1_target = 3.0;

  PlasticSynapses() = default;
  PlasticSynapses(int pre, int post)
      : n_pre(pre), n_post(post),
        w(static_cast<std::size_t>(pre) * static_cast<std::size_t>(post), 0.0) {}

  double& at(int pre, int post) {
    return w[static_cast<std::size_t>(pre) * n_post + post];
  }
  double at(int pre, int post) const {
    return w[static_cast<std::size_t>(pre) * n_post + post];
  }
};

// Weighted input drive for one step: input_j = sum_i spike_i * w(i, j).
std::vector<double> synaptic_drive(const PlasticSynapses& syn,
                                   const std::vector<int>& pre_spikes);

// Pair-based STDP at spike time. Trace values must be the pre-increment
// ones for this step (decayed, before on_pre/on_post), so a simultaneous
// pre+post pair does not potentiate off its own spike.
//   post spike j: w(i, j) += eta_plus * pre_trace[i]   for all i
//   pre  spike i: w(i, j) -= eta_minus * post_trace[j] for all j
// Weights clip to [0, cap].
void stdp_pair_update(PlasticSynapses& syn, const StdpTraces& traces,
                      const std::vector<int>& pre_spikes,
                      const std::vector<int>& post_spikes,
                      double eta_plus, double eta_minus);

// Diehl-Cook normalization: scale each post column to l1_target, then cap.
// All-zero columns stay untouched. Run once per stimulus presentation.
void l1_normalize(PlasticSynapses& syn);

// Reward-modulated update: w += eta * reward * eligibility, clip, then
// column renormalization. Eligibility has the same layout as the weights.
void rstdp_update(PlasticSynapses& syn, const std::vector<double>& eligibility,
                  double reward, double eta);

}  // namespace spikedet
