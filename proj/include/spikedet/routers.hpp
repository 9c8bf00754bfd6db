#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "spikedet/fingerprint.hpp"
#include "spikedet/gate.hpp"

namespace spikedet {

// Seeded k-means: k-means++ init followed by Lloyd iterations until the
// assignment stabilizes (or max_iters). Empty clusters are re-seeded with
// the point farthest from its centroid. Nearest-centroid ties resolve to
// the lowest index, so every operation is deterministic for (data, seed).
struct KMeansModel {
  std::vector<std::vector<double>> centroids;

  int k() const { return static_cast<int>(centroids.size()); }
  int assign(const std::vector<double>& x) const;
};

KMeansModel kmeans_fit(const std::vector<std::vector<double>>& xs, int k,
                       uint64_t seed, int max_iters = 100);

// Single-sample streaming-Lloyd update: the nearest centroid moves alpha of
// the way toward x, every other centroid is untouched.
void streaming_kmeans_step(KMeansModel& model, const std::vector<double>& x,
                           double alpha);

// Router contract for the streaming protocol: fit once on the initial
// stream, optionally update per shifted-stream step, assign read-only.
// state_digest covers every byte an update may touch, so the harness can
// prove that evaluation sweeps leave the router untouched and that frozen
// routers never move at all.
class Router {
 public:
  virtual ~Router() = default;

  virtual void fit_initial(const std::vector<Fingerprint>& fps) = 0;
  virtual void update(const Fingerprint& fp) = 0;
  virtual int assign(const Fingerprint& fp) const = 0;

  virtual uint64_t state_digest() const = 0;
  // Frozen routers promise update() is a no-op; the harness verifies it.
  virtual bool frozen() const = 0;
  // True when the last update may have relabeled cohorts (a full refit),
  // telling the harness to rebuild its cohort->recipe map.
  virtual bool relabeled_on_last_update() const { return false; }

  virtual std::string name() const = 0;
  virtual uint64_t seed() const = 0;
  virtual uint64_t config_digest() const = 0;
};

struct RouterConfig {
  int k = 12;                  // cluster count for the k-means family
  uint64_t seed = 0;
  double alpha_stream = 0.10;  // streaming-Lloyd rate
  double alpha_rate = 0.05;    // rate-coded control's online k-means rate
  int refit_every = 10;        // periodic-refit cadence in stream steps
  GateConfig gate;             // snn/rate routers (seed is overwritten)
  bool gate_phase1 = true;     // snn: unsupervised pre-training vs random init
};

// Known router names:
//   snn-frozen, snn-online         LIF cohort gate, weights frozen / online STDP
//   kmeans-frozen, kmeans-periodic, kmeans-stream, kmeans-minibatch
//   rate-kmeans, rate-frozen       rate-coded control (deterministic sigmoid
//                                  drive, argmax hidden code, online k-means)
// Unknown names raise UsageError.
std::unique_ptr<Router> make_router(const std::string& name, const RouterConfig& cfg);

std::vector<std::string> router_names();

}  // namespace spikedet
