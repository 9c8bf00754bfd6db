#include "spikedet/routers.hpp"

#include <algorithm>
#include <cstring>
#include <limits>

#include "spikedet/errors.hpp"
#include "spikedet/rng.hpp"
#include "spikedet/snn.hpp"

namespace spikedet {

namespace {

constexpr uint64_t kTagKmeansInit = 0x6b6d;   // "km"
constexpr uint64_t kTagRefit = 0x7266;        // "rf"
constexpr uint64_t kTagOnlineStep = 0x6f73;   // "os"

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

uint64_t fnv1a(uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t fnv1a_doubles(uint64_t h, const std::vector<double>& v) {
  return v.empty() ? h : fnv1a(h, v.data(), v.size() * sizeof(double));
}

constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ull;

std::vector<double> to_vec(const Fingerprint& fp) {
  return std::vector<double>(fp.begin(), fp.end());
}

}  // namespace

int KMeansModel::assign(const std::vector<double>& x) const {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    double d = sq_dist(x, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

KMeansModel kmeans_fit(const std::vector<std::vector<double>>& xs, int k,
                       uint64_t seed, int max_iters) {
  if (xs.empty()) throw DataError("kmeans_fit: no data");
  if (k < 1) throw DataError("kmeans_fit: k must be positive");
  const std::size_t n = xs.size(), dim = xs[0].size();
  for (const auto& x : xs)
    if (x.size() != dim) throw DataError("kmeans_fit: inconsistent dimensions");

  StreamRng rng(StreamRng::derive({seed, kTagKmeansInit}));
  KMeansModel model;
  model.centroids.reserve(static_cast<std::size_t>(k));

  // k-means++ seeding: first uniform, then proportional to squared distance
  // from the nearest chosen centroid.
  model.centroids.push_back(xs[rng.uniform_int(n)]);
  std::vector<double> d2(n);
  while (model.centroids.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : model.centroids) best = std::min(best, sq_dist(xs[i], c));
      d2[i] = best;
      total += best;
    }
    std::size_t pick;
    if (total <= 0.0) {
      pick = rng.uniform_int(n);  // all mass covered (duplicates or k > distinct)
    } else {
      double target = rng.uniform() * total;
      pick = n - 1;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        cum += d2[i];
        if (cum >= target) {
          pick = i;
          break;
        }
      }
    }
    model.centroids.push_back(xs[pick]);
  }

  std::vector<int> label(n, -1);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int a = model.assign(xs[i]);
      if (a != label[i]) changed = true;
      label[i] = a;
    }
    if (!changed && iter > 0) break;

    std::vector<std::vector<double>> sum(static_cast<std::size_t>(k),
                                         std::vector<double>(dim, 0.0));
    std::vector<int> count(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto c = static_cast<std::size_t>(label[i]);
      ++count[c];
      for (std::size_t j = 0; j < dim; ++j) sum[c][j] += xs[i][j];
    }
    for (int c = 0; c < k; ++c) {
      if (count[static_cast<std::size_t>(c)] == 0) continue;
      for (std::size_t j = 0; j < dim; ++j)
        model.centroids[static_cast<std::size_t>(c)][j] =
            sum[static_cast<std::size_t>(c)][j] / count[static_cast<std::size_t>(c)];
    }

    // Re-seed each empty cluster with the farthest point of any cluster that
    // can spare one; deterministic scan, strictly-greater comparisons.
    for (int c = 0; c < k; ++c) {
      if (count[static_cast<std::size_t>(c)] != 0) continue;
      double far_d = -1.0;
      std::size_t far_i = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (count[static_cast<std::size_t>(label[i])] < 2) continue;
        double d = sq_dist(xs[i], model.centroids[static_cast<std::size_t>(label[i])]);
        if (d > far_d) {
          far_d = d;
          far_i = i;
        }
      }
      if (far_i == n) break;  // nothing to spare (k >= n)
      --count[static_cast<std::size_t>(label[far_i])];
      label[far_i] = c;
      count[static_cast<std::size_t>(c)] = 1;
      model.centroids[static_cast<std::size_t>(c)] = xs[far_i];
    }
  }
  return model;
}

void streaming_kmeans_step(KMeansModel& model, const std::vector<double>& x,
                           double alpha) {
  if (model.centroids.empty()) throw DataError("streaming_kmeans_step: unfitted model");
  auto& c = model.centroids[static_cast<std::size_t>(model.assign(x))];
  for (std::size_t j = 0; j < c.size(); ++j) c[j] += alpha * (x[j] - c[j]);
}

namespace {

// -- k-means family -----------------------------------------------------------

class KMeansRouter : public Router {
 public:
  enum class Variant { frozen, periodic, stream, minibatch };

  KMeansRouter(Variant v, const RouterConfig& cfg) : variant_(v), cfg_(cfg) {}

  void fit_initial(const std::vector<Fingerprint>& fps) override {
    xs_seen_.clear();
    for (const auto& fp : fps) xs_seen_.push_back(to_vec(fp));
    model_ = kmeans_fit(xs_seen_, cfg_.k, cfg_.seed);
    if (variant_ == Variant::minibatch) {
      counts_.assign(static_cast<std::size_t>(cfg_.k), 0);
      for (const auto& x : xs_seen_) ++counts_[static_cast<std::size_t>(model_.assign(x))];
    }
    if (variant_ != Variant::periodic) xs_seen_.clear();  // corpus only for refits
    steps_ = 0;
  }

  void update(const Fingerprint& fp) override {
    relabeled_ = false;
    if (variant_ == Variant::frozen) return;
    ++steps_;
    auto x = to_vec(fp);
    switch (variant_) {
      case Variant::stream:
        streaming_kmeans_step(model_, x, cfg_.alpha_stream);
        break;
      case Variant::minibatch: {
        // scikit-style per-sample update: per-centre count n_c gives the
        // 1/n_c learning-rate schedule.
        int c = model_.assign(x);
        auto n = ++counts_[static_cast<std::size_t>(c)];
        auto& cen = model_.centroids[static_cast<std::size_t>(c)];
        for (std::size_t j = 0; j < cen.size(); ++j) cen[j] += (x[j] - cen[j]) / n;
        break;
      }
      case Variant::periodic:
        xs_seen_.push_back(std::move(x));
        if (steps_ % cfg_.refit_every == 0) {
          // Full re-clustering on everything seen so far; cohort labels do
          // not survive a refit, so the harness must rebuild its map.
          model_ = kmeans_fit(xs_seen_, cfg_.k,
                              StreamRng::derive({cfg_.seed, kTagRefit,
                                                 static_cast<uint64_t>(steps_)}));
          relabeled_ = true;
        }
        break;
      default:
        break;
    }
  }

  int assign(const Fingerprint& fp) const override { return model_.assign(to_vec(fp)); }

  uint64_t state_digest() const override {
    uint64_t h = kFnvOffset;
    for (const auto& c : model_.centroids) h = fnv1a_doubles(h, c);
    if (!counts_.empty()) h = fnv1a(h, counts_.data(), counts_.size() * sizeof(counts_[0]));
    uint64_t corpus = xs_seen_.size();
    return fnv1a(h, &corpus, sizeof(corpus));
  }

  bool frozen() const override { return variant_ == Variant::frozen; }
  bool relabeled_on_last_update() const override { return relabeled_; }

  std::string name() const override {
    switch (variant_) {
      case Variant::frozen: return "kmeans-frozen";
      case Variant::periodic: return "kmeans-periodic";
      case Variant::stream: return "kmeans-stream";
      default: return "kmeans-minibatch";
    }
  }
  uint64_t seed() const override { return cfg_.seed; }
  uint64_t config_digest() const override {
    uint64_t h = kFnvOffset;
    auto nm = name();
    h = fnv1a(h, nm.data(), nm.size());
    h = fnv1a(h, &cfg_.seed, sizeof(cfg_.seed));
    h = fnv1a(h, &cfg_.k, sizeof(cfg_.k));
    h = fnv1a(h, &cfg_.alpha_stream, sizeof(cfg_.alpha_stream));
    h = fnv1a(h, &cfg_.refit_every, sizeof(cfg_.refit_every));
    return h;
  }

 private:
  Variant variant_;
  RouterConfig cfg_;
  KMeansModel model_;
  std::vector<std::vector<double>> xs_seen_;
  std::vector<long> counts_;
  int steps_ = 0;
  bool relabeled_ = false;
};

// -- spiking cohort gate ------------------------------------------------------

class GateRouter : public Router {
 public:
  GateRouter(bool online, const RouterConfig& cfg) : online_(online), cfg_(cfg) {
    cfg_.gate.seed = cfg.seed;
  }

  void fit_initial(const std::vector<Fingerprint>& fps) override {
    gate_ = make_gate(cfg_.gate);
    if (cfg_.gate_phase1) train_phase1(gate_, fps);
    steps_ = 0;
  }

  void update(const Fingerprint& fp) override {
    if (!online_) return;
    ++steps_;
    train_present(gate_, fp,
                  StreamRng::derive({cfg_.seed, kTagOnlineStep,
                                     static_cast<uint64_t>(steps_)}));
  }

  int assign(const Fingerprint& fp) const override { return assign_cohort(gate_, fp); }

  uint64_t state_digest() const override {
    uint64_t h = kFnvOffset;
    h = fnv1a_doubles(h, gate_.w_ho.w);
    h = fnv1a_doubles(h, gate_.hidden.theta);
    h = fnv1a_doubles(h, gate_.output.theta);
    return h;
  }

  bool frozen() const override { return !online_; }

  std::string name() const override { return online_ ? "snn-online" : "snn-frozen"; }
  uint64_t seed() const override { return cfg_.seed; }
  uint64_t config_digest() const override {
    uint64_t h = kFnvOffset;
    auto nm = name();
    h = fnv1a(h, nm.data(), nm.size());
    h = fnv1a(h, &cfg_.seed, sizeof(cfg_.seed));
    int phase1 = cfg_.gate_phase1 ? 1 : 0;
    h = fnv1a(h, &phase1, sizeof(phase1));
    h = fnv1a(h, &cfg_.gate.epochs, sizeof(cfg_.gate.epochs));
    h = fnv1a(h, &cfg_.gate.steps, sizeof(cfg_.gate.steps));
    h = fnv1a(h, &cfg_.gate.eta_plus, sizeof(cfg_.gate.eta_plus));
    return h;
  }

  const CohortGate& gate() const { return gate_; }

 private:
  bool online_;
  RouterConfig cfg_;
  CohortGate gate_;
  int steps_ = 0;
};

// -- rate-coded control -------------------------------------------------------

// Deterministic analog of the gate: sigmoid drive through the same frozen
// sparse projection, argmax in place of WTA (a one-hot hidden code), and
// k-means over the codes in place of STDP. The online variant applies a
// streaming-Lloyd step per stimulus at the rate-matched alpha.
class RateRouter : public Router {
 public:
  RateRouter(bool online, const RouterConfig& cfg) : online_(online), cfg_(cfg) {
    cfg_.gate.seed = cfg.seed;
  }

  void fit_initial(const std::vector<Fingerprint>& fps) override {
    proj_ = make_gate(cfg_.gate);  // reuses the gate's seeded sparse projection
    std::vector<std::vector<double>> codes;
    codes.reserve(fps.size());
    for (const auto& fp : fps) codes.push_back(code(fp));
    model_ = kmeans_fit(codes, cfg_.k, cfg_.seed);
  }

  void update(const Fingerprint& fp) override {
    if (online_) streaming_kmeans_step(model_, code(fp), cfg_.alpha_rate);
  }

  int assign(const Fingerprint& fp) const override { return model_.assign(code(fp)); }

  uint64_t state_digest() const override {
    uint64_t h = kFnvOffset;
    for (const auto& c : model_.centroids) h = fnv1a_doubles(h, c);
    return h;
  }

  bool frozen() const override { return !online_; }

  std::string name() const override { return online_ ? "rate-kmeans" : "rate-frozen"; }
  uint64_t seed() const override { return cfg_.seed; }
  uint64_t config_digest() const override {
    uint64_t h = kFnvOffset;
    auto nm = name();
    h = fnv1a(h, nm.data(), nm.size());
    h = fnv1a(h, &cfg_.seed, sizeof(cfg_.seed));
    h = fnv1a(h, &cfg_.k, sizeof(cfg_.k));
    h = fnv1a(h, &cfg_.alpha_rate, sizeof(cfg_.alpha_rate));
    return h;
  }

 private:
  std::vector<double> code(const Fingerprint& fp) const {
    const int n_in = proj_.cfg.n_input, n_hid = proj_.cfg.n_hidden;
    std::vector<double> h(static_cast<std::size_t>(n_hid), 0.0);
    for (int i = 0; i < n_in; ++i) {
      double r = poisson_rate(fp[static_cast<std::size_t>(i)]);
      const double* row = &proj_.w_ih[static_cast<std::size_t>(i) * n_hid];
      for (int j = 0; j < n_hid; ++j) h[static_cast<std::size_t>(j)] += r * row[j];
    }
    int best = 0;
    for (int j = 1; j < n_hid; ++j)
      if (h[static_cast<std::size_t>(j)] > h[static_cast<std::size_t>(best)]) best = j;
    std::vector<double> one_hot(static_cast<std::size_t>(n_hid), 0.0);
    one_hot[static_cast<std::size_t>(best)] = 1.0;
    return one_hot;
  }

  bool online_;
  RouterConfig cfg_;
  CohortGate proj_;  // only w_ih/ih_mask are used
  KMeansModel model_;
};

}  // namespace

std::unique_ptr<Router> make_router(const std::string& name, const RouterConfig& cfg) {
  using V = KMeansRouter::Variant;
  if (name == "kmeans-frozen") return std::make_unique<KMeansRouter>(V::frozen, cfg);
  if (name == "kmeans-periodic") return std::make_unique<KMeansRouter>(V::periodic, cfg);
  if (name == "kmeans-stream") return std::make_unique<KMeansRouter>(V::stream, cfg);
  if (name == "kmeans-minibatch") return std::make_unique<KMeansRouter>(V::minibatch, cfg);
  if (name == "snn-frozen") return std::make_unique<GateRouter>(false, cfg);
  if (name == "snn-online") return std::make_unique<GateRouter>(true, cfg);
  if (name == "rate-frozen") return std::make_unique<RateRouter>(false, cfg);
  if (name == "rate-kmeans") return std::make_unique<RateRouter>(true, cfg);
  throw UsageError("unknown router: " + name);
}

std::vector<std::string> router_names() {
  return {"snn-frozen",    "snn-online",     "kmeans-frozen", "kmeans-periodic",
          "kmeans-stream", "kmeans-minibatch", "rate-kmeans",   "rate-frozen"};
}

}  // namespace spikedet
