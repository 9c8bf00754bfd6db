#include "spikedet/streaming.hpp"

#include <algorithm>
#include <cmath>

#include "spikedet/errors.hpp"
#include "spikedet/rng.hpp"

namespace spikedet {

namespace {

constexpr uint64_t kTagSplit = 0x7370;   // "sp"
constexpr uint64_t kTagWorld = 0x7764;   // "wd"

double clip5(double v) { return std::clamp(v, -5.0, 5.0); }

void require_pool_coverage(const std::vector<std::map<Recipe, double>>& metrics,
                           LeverPool pool, const char* which) {
  auto recipes = pool_recipes(pool);
  for (const auto& m : metrics)
    for (Recipe r : recipes)
      if (!m.count(r))
        throw DataError(std::string("run_stream: ") + which +
                        " metric table missing a pool recipe");
}

}  // namespace

StreamSplit split_stream(const std::vector<int>& ids, StreamSplit::Mode mode,
                         uint64_t split_seed) {
  if (ids.empty()) throw DataError("split_stream: no ids");
  StreamSplit split;
  split.mode = mode;
  split.split_seed = split_seed;
  if (mode == StreamSplit::Mode::by_id) {
    for (int id : ids)
      (id <= kByIdThreshold ? split.initial_ids : split.shifted_ids).push_back(id);
  } else {
    std::vector<int> shuffled = ids;
    StreamRng rng(StreamRng::derive({split_seed, kTagSplit}));
    rng.shuffle(shuffled);
    std::size_t half = (shuffled.size() + 1) / 2;
    split.initial_ids.assign(shuffled.begin(), shuffled.begin() + half);
    split.shifted_ids.assign(shuffled.begin() + half, shuffled.end());
  }
  return split;
}

StreamRunRecord run_stream(Router& router, const StreamData& data) {
  if (data.initial.empty()) throw DataError("run_stream: empty initial stream");
  if (data.shifted.empty()) throw DataError("run_stream: empty shifted stream");
  if (data.initial_metrics.size() != data.initial.size())
    throw DataError("run_stream: initial metrics must align with the initial stream");
  if (data.eval_fps.empty() || data.eval_metrics.size() != data.eval_fps.size())
    throw DataError("run_stream: eval slice and metrics must align");
  require_pool_coverage(data.initial_metrics, data.pool, "initial");
  require_pool_coverage(data.eval_metrics, data.pool, "eval");

  router.fit_initial(data.initial);

  // Label-free map derivation: cohorts from the router, metrics from the
  // initial stream only. Assignment is read-only; a router that mutates on
  // it breaks the protocol, not just this run.
  auto derive_map = [&] {
    uint64_t before = router.state_digest();
    std::vector<int> cohorts;
    cohorts.reserve(data.initial.size());
    for (const auto& fp : data.initial) cohorts.push_back(router.assign(fp));
    if (router.state_digest() != before)
      throw ProtocolViolation("run_stream: router state changed while deriving the map");
    return build_lever_map(cohorts, data.initial_metrics, data.pool);
  };
  LeverMap map = derive_map();

  StreamRunRecord rec;
  rec.method = router.name();
  rec.seed = router.seed();
  rec.config_digest = router.config_digest();
  rec.state_digest_pre = router.state_digest();

  auto eval_once = [&] {
    uint64_t before = router.state_digest();
    double sum = 0.0;
    for (std::size_t s = 0; s < data.eval_fps.size(); ++s) {
      Recipe r = map.lookup(router.assign(data.eval_fps[s]));
      sum += data.eval_metrics[s].at(r);
    }
    if (router.state_digest() != before)
      throw ProtocolViolation("run_stream: router state changed during an eval sweep");
    return sum / static_cast<double>(data.eval_fps.size());
  };

  rec.trace.reserve(data.shifted.size());
  for (const auto& fp : data.shifted) {
    router.update(fp);
    if (router.relabeled_on_last_update()) map = derive_map();
    double m = eval_once();
    if (!std::isfinite(m)) throw DataError("run_stream: non-finite eval metric");
    rec.trace.push_back(m);
  }

  rec.state_digest_post = router.state_digest();
  if (router.frozen() && rec.state_digest_post != rec.state_digest_pre)
    throw ProtocolViolation("run_stream: frozen router state changed during streaming");
  rec.final_score = mean_of(rec.trace);
  return rec;
}

StreamData make_drift_protocol(uint64_t seed, bool drifted, int per_cluster_initial,
                               int shifted_steps, int eval_count) {
  if (per_cluster_initial < 1 || shifted_steps < 3 || eval_count < 3)
    throw DataError("make_drift_protocol: degenerate sizes");
  StreamRng rng(StreamRng::derive({seed, kTagWorld}));

  constexpr int kClusters = 3;
  const Recipe recipe_of[kClusters] = {Recipe::shadow, Recipe::mf3, Recipe::raw};
  constexpr double kMatched = 80.0, kOff = 55.0, kNoiseFp = 0.5, kNoiseMetric = 1.0;

  // Binary +/-4.5 centers, pairwise separated in >= 5 coordinates.
  std::array<Fingerprint, kClusters> center;
  auto draw_center = [&] {
    Fingerprint c;
    for (double& v : c) v = rng.bernoulli(0.5) ? 4.5 : -4.5;
    return c;
  };
  auto hamming = [](const Fingerprint& a, const Fingerprint& b) {
    int d = 0;
    for (int j = 0; j < kFingerprintDim; ++j) d += a[j] != b[j];
    return d;
  };
  center[0] = draw_center();
  do center[1] = draw_center(); while (hamming(center[0], center[1]) < 5);
  do center[2] = draw_center();
  while (hamming(center[0], center[2]) < 5 || hamming(center[1], center[2]) < 5);

  // Drift target: each center migrates 60% of the way (coordinate-wise)
  // toward the next cluster's initial position, ending closer to that
  // cluster's old region than to its own.
  std::array<Fingerprint, kClusters> target;
  for (int k = 0; k < kClusters; ++k) {
    const Fingerprint& next = center[(k + 1) % kClusters];
    int d = hamming(center[k], next);
    int flips = (3 * d + 4) / 5;  // ceil(0.6 d)
    target[k] = center[k];
    for (int j = 0; j < kFingerprintDim && flips > 0; ++j)
      if (target[k][j] != next[j]) {
        target[k][j] = next[j];
        --flips;
      }
  }

  auto sample_at = [&](const Fingerprint& pos) {
    Fingerprint fp;
    for (int j = 0; j < kFingerprintDim; ++j)
      fp[j] = clip5(pos[j] + kNoiseFp * rng.gaussian());
    return fp;
  };
  auto lerp = [&](int k, double u) {
    Fingerprint pos;
    for (int j = 0; j < kFingerprintDim; ++j)
      pos[j] = center[k][j] + u * (target[k][j] - center[k][j]);
    return pos;
  };
  auto metric_row = [&](int k) {
    std::map<Recipe, double> row;
    for (Recipe r : pool_recipes(LeverPool::l4))
      row[r] = (r == recipe_of[k] ? kMatched : kOff) + kNoiseMetric * rng.uniform(-1.0, 1.0);
    return row;
  };

  StreamData data;
  data.pool = LeverPool::l4;

  if (drifted) {
    for (int t = 0; t < kClusters * per_cluster_initial; ++t) {
      int k = t % kClusters;
      data.initial.push_back(sample_at(center[k]));
      data.initial_metrics.push_back(metric_row(k));
    }
    // Shifted stream: linear migration reaching the target at 70% depth,
    // then holding there, so online clusterers get settled-in steps.
    int per = shifted_steps / kClusters;
    int full_at = std::max(1, (7 * (per - 1)) / 10);
    for (int t = 0; t < shifted_steps; ++t) {
      int k = t % kClusters;
      double u = std::min(1.0, static_cast<double>(t / kClusters) / full_at);
      data.shifted.push_back(sample_at(lerp(k, u)));
    }
    // Eval slice spans the migration path in equal fractions, covering both
    // the pre-drift and fully shifted regimes.
    int per_eval = eval_count / kClusters;
    for (int e = 0; e < eval_count; ++e) {
      int k = e % kClusters;
      double u = per_eval > 1
                     ? static_cast<double>(e / kClusters) / (per_eval - 1)
                     : 1.0;
      data.eval_fps.push_back(sample_at(lerp(k, u)));
      data.eval_metrics.push_back(metric_row(k));
    }
  } else {
    // No-drift control: one static pool, random 50/50 split at the fixed
    // split seed, static eval slice.
    int total = kClusters * per_cluster_initial + shifted_steps;
    std::vector<Fingerprint> pool_fps;
    std::vector<std::map<Recipe, double>> pool_metrics;
    std::vector<int> ids(static_cast<std::size_t>(total));
    for (int t = 0; t < total; ++t) {
      int k = t % kClusters;
      pool_fps.push_back(sample_at(center[k]));
      pool_metrics.push_back(metric_row(k));
      ids[static_cast<std::size_t>(t)] = t;
    }
    StreamSplit split = split_stream(ids, StreamSplit::Mode::random_5050, 42);
    for (int id : split.initial_ids) {
      data.initial.push_back(pool_fps[static_cast<std::size_t>(id)]);
      data.initial_metrics.push_back(pool_metrics[static_cast<std::size_t>(id)]);
    }
    for (int id : split.shifted_ids)
      data.shifted.push_back(pool_fps[static_cast<std::size_t>(id)]);
    for (int e = 0; e < eval_count; ++e) {
      int k = e % kClusters;
      data.eval_fps.push_back(sample_at(center[k]));
      data.eval_metrics.push_back(metric_row(k));
    }
  }
  return data;
}

AblationScores ablation_grid(const StreamData& data, const RouterConfig& base,
                             const std::vector<uint64_t>& seeds) {
  if (seeds.empty()) throw DataError("ablation_grid: no seeds");
  AblationScores out;
  out.seeds = seeds;
  for (uint64_t seed : seeds)
    for (int p = 0; p < 2; ++p)
      for (int o = 0; o < 2; ++o) {
        RouterConfig cfg = base;
        cfg.seed = seed;
        cfg.gate_phase1 = p == 1;
        auto router = make_router(o == 1 ? "snn-online" : "snn-frozen", cfg);
        out.scores[p][o].push_back(run_stream(*router, data).final_score);
      }
  return out;
}

std::vector<double> paired_differences(const std::vector<double>& a,
                                       const std::vector<double>& b) {
  if (a.size() != b.size()) throw DataError("paired_differences: length mismatch");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

int positivity_count(const std::vector<double>& diffs) {
  int n = 0;
  for (double d : diffs) n += d > 0.0;
  return n;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) throw DataError("mean_of: empty");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) throw DataError("sample_sd: need at least 2 values");
  double m = mean_of(v), s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

RetentionResult retention_check(const CohortGate& pre, const CohortGate& post,
                                const std::vector<Fingerprint>& eval_fps,
                                const std::vector<std::map<Recipe, double>>& eval_metrics,
                                const LeverMap& map, double margin) {
  if (eval_fps.size() != eval_metrics.size())
    throw DataError("retention_check: eval slice and metrics must align");
  RetentionResult res;
  res.delta.reserve(eval_fps.size());
  for (std::size_t s = 0; s < eval_fps.size(); ++s) {
    double before = eval_metrics[s].at(map.lookup(assign_cohort(pre, eval_fps[s])));
    double after = eval_metrics[s].at(map.lookup(assign_cohort(post, eval_fps[s])));
    res.delta.push_back(after - before);
  }
  res.retention = retention_rate(res.delta, margin);
  return res;
}

double retention_rate(const std::vector<double>& delta, double margin) {
  if (delta.empty()) throw DataError("retention_rate: empty");
  int kept = 0;
  for (double d : delta) kept += std::abs(d) <= margin;
  return static_cast<double>(kept) / static_cast<double>(delta.size());
}

double eta_matched_rate(double eta_pair, double active_trace_fraction) {
  if (!(active_trace_fraction > 0.0) || active_trace_fraction > 1.0)
    throw DataError("eta_matched_rate: fraction must be in (0, 1]");
  if (eta_pair < 0.0) throw DataError("eta_matched_rate: negative rate");
  return eta_pair * active_trace_fraction;
}

}  // namespace spikedet
