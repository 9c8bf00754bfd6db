#include "spikedet/snn.hpp"

#include <algorithm>

#include "spikedet/errors.hpp"

namespace spikedet {

double poisson_rate(double z) { return sigmoid(z / 2.0) * kRateMax; }

std::vector<int> lif_integrate(LifLayer& layer, const std::vector<double>& input,
                               std::vector<double>* pre_reset) {
  if (input.size() != layer.v.size())
    throw DataError("lif_integrate: input size mismatch");
  std::vector<int> spikes;
  if (pre_reset) pre_reset->clear();
  for (std::size_t i = 0; i < layer.v.size(); ++i) {
    double v = layer.v[i] * (1.0 - layer.dv) + input[i];
    if (v >= layer.theta[i]) {
      spikes.push_back(static_cast<int>(i));
      if (pre_reset) pre_reset->push_back(v);
      layer.v[i] = 0.0;
    } else {
      layer.v[i] = v;
    }
  }
  return spikes;
}

int wta_select(const std::vector<int>& spikers, const std::vector<double>& pre_reset) {
  if (spikers.empty()) return -1;
  if (spikers.size() != pre_reset.size())
    throw DataError("wta_select: spiker/potential list mismatch");
  std::size_t best = 0;
  for (std::size_t i = 1; i < spikers.size(); ++i) {
    // Strict > keeps the lowest index on ties (lists are index-ascending).
    if (pre_reset[i] > pre_reset[best]) best = i;
  }
  return spikers[best];
}

void homeostasis_step(LifLayer& layer, const std::vector<int>& spikes) {
  for (double& t : layer.theta)
    t = layer.baseline + (t - layer.baseline) * layer.homeo_decay;
  for (int i : spikes) layer.theta[static_cast<std::size_t>(i)] += layer.homeo_bump;
}

std::vector<double> synaptic_drive(const PlasticSynapses& syn,
                                   const std::vector<int>& pre_spikes) {
  std::vector<double> drive(static_cast<std::size_t>(syn.n_post), 0.0);
  for (int i : pre_spikes) {
    const double* row = &syn.w[static_cast<std::size_t>(i) * syn.n_post];
    for (int j = 0; j < syn.n_post; ++j) drive[static_cast<std::size_t>(j)] += row[j];
  }
  return drive;
}

void stdp_pair_update(PlasticSynapses& syn, const StdpTraces& traces,
                      const std::vector<int>& pre_spikes,
                      const std::vector<int>& post_spikes,
                      double eta_plus, double eta_minus) {
  if (eta_plus <= 0.0 || eta_minus <= 0.0)
    throw DataError("stdp_pair_update: learning rates must be positive");
  for (int j : post_spikes) {
    for (int i = 0; i < syn.n_pre; ++i)
      syn.at(i, j) += eta_plus * traces.pre[static_cast<std::size_t>(i)];
  }
  for (int i : pre_spikes) {
    for (int j = 0; j < syn.n_post; ++j)
      syn.at(i, j) -= eta_minus * traces.post[static_cast<std::size_t>(j)];
  }
  for (double& w : syn.w) w = std::clamp(w, 0.0, syn.cap);
}

void l1_normalize(PlasticSynapses& syn) {
  for (int j = 0; j < syn.n_post; ++j) {
    double sum = 0.0;
    for (int i = 0; i < syn.n_pre; ++i) sum += syn.at(i, j);
    if (sum <= 0.0) continue;
    double scale = syn.l1_target / sum;
    for (int i = 0; i < syn.n_pre; ++i)
      syn.at(i, j) = std::min(syn.at(i, j) * scale, syn.cap);
  }
}

void rstdp_update(PlasticSynapses& syn, const std::vector<double>& eligibility,
                  double reward, double eta) {
  if (eligibility.size() != syn.w.size())
    throw DataError("rstdp_update: eligibility size mismatch");
  for (std::size_t k = 0; k < syn.w.size(); ++k)
    syn.w[k] = std::clamp(syn.w[k] + eta * reward * eligibility[k], 0.0, syn.cap);
  l1_normalize(syn);
}

}  // namespace spikedet
