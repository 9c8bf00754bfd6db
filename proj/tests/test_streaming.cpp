#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "spikedet/errors.hpp"
#include "spikedet/evalstats.hpp"
#include "spikedet/rng.hpp"
#include "spikedet/streaming.hpp"

using namespace spikedet;

namespace {

std::vector<int> iota_ids(int n, int start = 0) {
  std::vector<int> ids(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = start + i;
  return ids;
}

// A router that cheats: assignment bumps a counter that is part of its
// state, which the purity checks must catch.
class EvalMutator : public Router {
 public:
  void fit_initial(const std::vector<Fingerprint>&) override {}
  void update(const Fingerprint&) override {}
  int assign(const Fingerprint&) const override {
    ++assigns_;
    return 0;
  }
  uint64_t state_digest() const override { return 0x9000 + assigns_; }
  bool frozen() const override { return false; }
  std::string name() const override { return "eval-mutator"; }
  uint64_t seed() const override { return 0; }
  uint64_t config_digest() const override { return 0; }

 private:
  mutable uint64_t assigns_ = 0;
};

// Claims to be frozen but drifts its state on every update.
class FrozenLiar : public Router {
 public:
  void fit_initial(const std::vector<Fingerprint>&) override { state_ = 1; }
  void update(const Fingerprint&) override { ++state_; }
  int assign(const Fingerprint&) const override { return 0; }
  uint64_t state_digest() const override { return state_; }
  bool frozen() const override { return true; }
  std::string name() const override { return "frozen-liar"; }
  uint64_t seed() const override { return 0; }
  uint64_t config_digest() const override { return 0; }

 private:
  uint64_t state_ = 0;
};

}  // namespace

TEST_CASE("split_stream: id threshold and seeded 50/50") {
  auto by_id = split_stream({100, 120}, StreamSplit::Mode::by_id);
  CHECK(by_id.initial_ids == std::vector<int>{100});
  CHECK(by_id.shifted_ids == std::vector<int>{120});

  // 113 is the last initial id; input order is preserved on both sides.
  auto edge = split_stream({114, 113, 1, 200}, StreamSplit::Mode::by_id);
  CHECK(edge.initial_ids == std::vector<int>{113, 1});
  CHECK(edge.shifted_ids == std::vector<int>{114, 200});

  auto ids = iota_ids(184);
  auto r1 = split_stream(ids, StreamSplit::Mode::random_5050, 42);
  auto r2 = split_stream(ids, StreamSplit::Mode::random_5050, 42);
  CHECK(r1.initial_ids.size() == 92);
  CHECK(r1.shifted_ids.size() == 92);
  CHECK(r1.initial_ids == r2.initial_ids);
  CHECK(r1.shifted_ids == r2.shifted_ids);

  // Disjoint and jointly exhaustive.
  std::vector<int> all = r1.initial_ids;
  all.insert(all.end(), r1.shifted_ids.begin(), r1.shifted_ids.end());
  std::sort(all.begin(), all.end());
  CHECK(all == ids);
  CHECK(split_stream(ids, StreamSplit::Mode::random_5050, 7).initial_ids != r1.initial_ids);

  // Odd count: initial gets the extra id.
  auto odd = split_stream(iota_ids(5), StreamSplit::Mode::random_5050, 1);
  CHECK(odd.initial_ids.size() == 3);
  CHECK(odd.shifted_ids.size() == 2);

  CHECK_THROWS_AS(split_stream({}, StreamSplit::Mode::by_id), DataError);
}

TEST_CASE("kmeans_fit recovers separated clusters and is seed-deterministic") {
  std::vector<std::vector<double>> xs;
  const double centers[3][2] = {{0, 0}, {10, 0}, {0, 10}};
  StreamRng rng(StreamRng::derive({3, 0x6b}));
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 12; ++i)
      xs.push_back({centers[c][0] + 0.3 * rng.gaussian(),
                    centers[c][1] + 0.3 * rng.gaussian()});

  auto model = kmeans_fit(xs, 3, 5);
  REQUIRE(model.k() == 3);
  // Every centroid sits on one of the true centers, each cluster claimed once.
  std::vector<bool> claimed(3, false);
  for (const auto& c : model.centroids) {
    int nearest = -1;
    for (int t = 0; t < 3; ++t) {
      double d = std::hypot(c[0] - centers[t][0], c[1] - centers[t][1]);
      if (d < 1.0) nearest = t;
    }
    REQUIRE(nearest >= 0);
    CHECK(!claimed[static_cast<std::size_t>(nearest)]);
    claimed[static_cast<std::size_t>(nearest)] = true;
  }
  // Points of one cluster agree on their assignment.
  for (int c = 0; c < 3; ++c) {
    int a0 = model.assign(xs[static_cast<std::size_t>(12 * c)]);
    for (int i = 1; i < 12; ++i)
      CHECK(model.assign(xs[static_cast<std::size_t>(12 * c + i)]) == a0);
  }

  auto again = kmeans_fit(xs, 3, 5);
  CHECK(again.centroids == model.centroids);

  // k = 1 converges to the global mean.
  auto one = kmeans_fit(xs, 1, 9);
  double mx = 0, my = 0;
  for (const auto& x : xs) {
    mx += x[0];
    my += x[1];
  }
  CHECK(one.centroids[0][0] == doctest::Approx(mx / xs.size()).epsilon(1e-12));
  CHECK(one.centroids[0][1] == doctest::Approx(my / xs.size()).epsilon(1e-12));

  CHECK_THROWS_AS(kmeans_fit({}, 3, 0), DataError);
  CHECK_THROWS_AS(kmeans_fit(xs, 0, 0), DataError);
  std::vector<std::vector<double>> ragged = {{1.0, 2.0}, {1.0}};
  CHECK_THROWS_AS(kmeans_fit(ragged, 1, 0), DataError);
}

TEST_CASE("streaming_kmeans_step arithmetic") {
  KMeansModel m;
  m.centroids = {{0.0}, {5.0}};
  streaming_kmeans_step(m, {0.0}, 0.3);
  CHECK(m.centroids[0][0] == 0.0);  // x == c leaves it in place
  streaming_kmeans_step(m, {1.0}, 0.1);
  CHECK(m.centroids[0][0] == doctest::Approx(0.1).epsilon(1e-12));
  streaming_kmeans_step(m, {7.0}, 1.0);  // alpha = 1 jumps to x
  CHECK(m.centroids[1][0] == 7.0);
  CHECK(m.centroids[0][0] == doctest::Approx(0.1).epsilon(1e-12));  // untouched

  KMeansModel empty;
  CHECK_THROWS_AS(streaming_kmeans_step(empty, {1.0}, 0.1), DataError);
}

TEST_CASE("minibatch router follows the 1/n count schedule") {
  StreamData data = make_drift_protocol(3, true);
  RouterConfig cfg;
  cfg.seed = 8;

  auto router = make_router("kmeans-minibatch", cfg);
  router->fit_initial(data.initial);

  // Reference: same fit, explicit per-centre counts, c += (x - c)/n.
  std::vector<std::vector<double>> xs;
  for (const auto& fp : data.initial) xs.emplace_back(fp.begin(), fp.end());
  auto ref = kmeans_fit(xs, cfg.k, cfg.seed);
  std::vector<long> counts(static_cast<std::size_t>(cfg.k), 0);
  for (const auto& x : xs) ++counts[static_cast<std::size_t>(ref.assign(x))];

  for (const auto& fp : data.shifted) {
    router->update(fp);
    std::vector<double> x(fp.begin(), fp.end());
    int c = ref.assign(x);
    auto n = ++counts[static_cast<std::size_t>(c)];
    auto& cen = ref.centroids[static_cast<std::size_t>(c)];
    for (std::size_t j = 0; j < cen.size(); ++j) cen[j] += (x[j] - cen[j]) / n;
  }
  for (const auto& fp : data.eval_fps)
    CHECK(router->assign(fp) == ref.assign({fp.begin(), fp.end()}));

  // Identically driven routers end in identical states.
  auto twin = make_router("kmeans-minibatch", cfg);
  twin->fit_initial(data.initial);
  for (const auto& fp : data.shifted) twin->update(fp);
  CHECK(twin->state_digest() == router->state_digest());
}

TEST_CASE("run_stream: frozen trace is flat, record reproducible, inputs validated") {
  StreamData data = make_drift_protocol(11, true);
  RouterConfig cfg;
  cfg.seed = 4;
  auto frozen = make_router("kmeans-frozen", cfg);
  auto rec = run_stream(*frozen, data);

  REQUIRE(rec.trace.size() == data.shifted.size());
  for (double v : rec.trace) CHECK(v == rec.trace[0]);  // nothing ever updates
  CHECK(rec.final_score == doctest::Approx(rec.trace[0]).epsilon(1e-12));
  CHECK(rec.state_digest_pre == rec.state_digest_post);
  CHECK(rec.method == "kmeans-frozen");
  CHECK(rec.seed == 4);

  auto frozen2 = make_router("kmeans-frozen", cfg);
  auto rec2 = run_stream(*frozen2, data);
  CHECK(rec2.trace == rec.trace);
  CHECK(rec2.config_digest == rec.config_digest);
  CHECK(rec2.state_digest_post == rec.state_digest_post);

  StreamData bad = data;
  bad.initial.clear();
  bad.initial_metrics.clear();
  CHECK_THROWS_AS(run_stream(*frozen, bad), DataError);
  bad = data;
  bad.shifted.clear();
  CHECK_THROWS_AS(run_stream(*frozen, bad), DataError);
  bad = data;
  bad.eval_metrics.pop_back();
  CHECK_THROWS_AS(run_stream(*frozen, bad), DataError);
  bad = data;
  bad.eval_metrics[0].erase(Recipe::mf3);
  CHECK_THROWS_AS(run_stream(*frozen, bad), DataError);

  CHECK_THROWS_AS(make_router("kmeans-typo", cfg), UsageError);
}

TEST_CASE("run_stream rejects routers that mutate outside update()") {
  StreamData data = make_drift_protocol(11, true);
  EvalMutator mutator;
  CHECK_THROWS_AS(run_stream(mutator, data), ProtocolViolation);
  FrozenLiar liar;
  CHECK_THROWS_AS(run_stream(liar, data), ProtocolViolation);
}

TEST_CASE("drift world: structure, determinism, and the adaptation gap") {
  StreamData drift = make_drift_protocol(1000, true);
  CHECK(drift.initial.size() == 45);
  CHECK(drift.initial_metrics.size() == 45);
  CHECK(drift.shifted.size() == 60);
  CHECK(drift.eval_fps.size() == 30);
  for (const auto& row : drift.eval_metrics)
    for (Recipe r : pool_recipes(drift.pool)) CHECK(row.count(r) == 1);

  StreamData again = make_drift_protocol(1000, true);
  CHECK(again.initial == drift.initial);
  CHECK(again.eval_fps == drift.eval_fps);
  CHECK(make_drift_protocol(1001, true).initial != drift.initial);

  StreamData control = make_drift_protocol(1000, false);
  CHECK(control.initial.size() + control.shifted.size() == 45 + 60);
  CHECK_THROWS_AS(make_drift_protocol(0, true, 0, 60, 30), DataError);

  // Streaming-Lloyd beats frozen k-means on every seed under drift and
  // exactly ties it on the no-drift control (the falsification pair).
  std::vector<double> drift_diffs, control_diffs;
  for (int seed = 0; seed < 20; ++seed) {
    RouterConfig cfg;
    cfg.seed = seed;
    auto frz_d = make_router("kmeans-frozen", cfg);
    auto ada_d = make_router("kmeans-stream", cfg);
    drift_diffs.push_back(run_stream(*ada_d, drift).final_score -
                          run_stream(*frz_d, drift).final_score);
    auto frz_c = make_router("kmeans-frozen", cfg);
    auto ada_c = make_router("kmeans-stream", cfg);
    control_diffs.push_back(run_stream(*ada_c, control).final_score -
                            run_stream(*frz_c, control).final_score);
  }
  CHECK(positivity_count(drift_diffs) == 20);
  for (double d : drift_diffs) CHECK(d > 3.0);
  CHECK(sign_test(drift_diffs) < 0.05);
  for (double d : control_diffs) CHECK(d == 0.0);
  CHECK(sign_test(control_diffs) == 1.0);
}

TEST_CASE("periodic refit relabels and rebuilds the map without breaking the run") {
  StreamData data = make_drift_protocol(5, true);
  RouterConfig cfg;
  cfg.seed = 2;
  auto periodic = make_router("kmeans-periodic", cfg);
  auto rec = run_stream(*periodic, data);
  REQUIRE(rec.trace.size() == data.shifted.size());
  for (double v : rec.trace) CHECK(std::isfinite(v));
  CHECK(rec.state_digest_pre != rec.state_digest_post);  // refits moved it

  // Refit cadence: identical states before step 10, diverged at step 10.
  auto a = make_router("kmeans-periodic", cfg);
  auto b = make_router("kmeans-frozen", cfg);
  a->fit_initial(data.initial);
  b->fit_initial(data.initial);
  for (int step = 1; step <= 10; ++step) {
    a->update(data.shifted[static_cast<std::size_t>(step - 1)]);
    CHECK(a->relabeled_on_last_update() == (step == 10));
  }
}

TEST_CASE("spiking routers stream cleanly in both deployments") {
  StreamData data = make_drift_protocol(9, true, 4, 9, 6);  // small world
  RouterConfig cfg;
  cfg.seed = 3;

  auto frozen = make_router("snn-frozen", cfg);
  auto rec_f = run_stream(*frozen, data);
  REQUIRE(rec_f.trace.size() == 9);
  for (double v : rec_f.trace) CHECK(v == rec_f.trace[0]);
  CHECK(rec_f.state_digest_pre == rec_f.state_digest_post);

  auto online = make_router("snn-online", cfg);
  auto rec_o = run_stream(*online, data);
  REQUIRE(rec_o.trace.size() == 9);
  CHECK(rec_o.state_digest_pre != rec_o.state_digest_post);  // STDP moved weights
  for (double v : rec_o.trace) {
    CHECK(v >= 0.0);
    CHECK(v <= 100.0);
  }

  auto rate_frozen = make_router("rate-frozen", cfg);
  auto rec_rf = run_stream(*rate_frozen, data);
  CHECK(rec_rf.state_digest_pre == rec_rf.state_digest_post);
  auto rate_online = make_router("rate-kmeans", cfg);
  auto rec_ro = run_stream(*rate_online, data);
  REQUIRE(rec_ro.trace.size() == 9);
  for (double v : rec_ro.trace) CHECK(std::isfinite(v));
}

TEST_CASE("ablation grid shapes, determinism, and helper statistics") {
  StreamData data = make_drift_protocol(9, true, 4, 9, 6);
  RouterConfig base;
  auto grid = ablation_grid(data, base, {0, 1});
  for (int p = 0; p < 2; ++p)
    for (int o = 0; o < 2; ++o) REQUIRE(grid.scores[p][o].size() == 2);
  auto grid2 = ablation_grid(data, base, {0, 1});
  for (int p = 0; p < 2; ++p)
    for (int o = 0; o < 2; ++o) CHECK(grid2.scores[p][o] == grid.scores[p][o]);
  CHECK(grid.cell(true, false) == grid.scores[1][0]);
  CHECK_THROWS_AS(ablation_grid(data, base, {}), DataError);

  auto d = paired_differences({3.0, 1.0, 4.0}, {1.0, 1.5, 1.0});
  CHECK(d == std::vector<double>{2.0, -0.5, 3.0});
  CHECK(positivity_count(d) == 2);
  CHECK_THROWS_AS(paired_differences({1.0}, {}), DataError);

  CHECK(mean_of({1.0, 2.0, 6.0}) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(sample_sd({1.0, 2.0, 3.0}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(mean_of({}), DataError);
  CHECK_THROWS_AS(sample_sd({1.0}), DataError);
}

TEST_CASE("sign test: exact binomial two-sided tails") {
  CHECK(sign_test({}) == 1.0);
  CHECK(sign_test({0.0, 0.0}) == 1.0);  // zeros are dropped

  // 15 of 20 positive: 2 * P(X <= 5) = 2 * 21700 / 2^20.
  std::vector<double> d(20, 1.0);
  for (int i = 0; i < 5; ++i) d[static_cast<std::size_t>(i)] = -1.0;
  CHECK(sign_test(d) == doctest::Approx(2.0 * 21700.0 / 1048576.0).epsilon(1e-12));

  std::vector<double> all_pos(20, 0.5);
  CHECK(sign_test(all_pos) == doctest::Approx(2.0 / 1048576.0).epsilon(1e-12));

  std::vector<double> balanced(20, 1.0);
  for (int i = 0; i < 10; ++i) balanced[static_cast<std::size_t>(i)] = -1.0;
  CHECK(sign_test(balanced) == 1.0);

  // Zeros are excluded before the tail: {+,+,+,0,0} behaves as n = 3.
  CHECK(sign_test({1.0, 2.0, 0.5, 0.0, 0.0}) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("retention: fixed-map deltas and the rate helper") {
  StreamData data = make_drift_protocol(9, true, 4, 9, 6);
  GateConfig gc;
  gc.seed = 6;
  CohortGate pre = make_gate(gc);
  train_phase1(pre, data.initial);

  std::vector<int> cohorts;
  for (const auto& fp : data.initial) cohorts.push_back(assign_cohort(pre, fp));
  LeverMap map = build_lever_map(cohorts, data.initial_metrics, data.pool);

  auto same = retention_check(pre, pre, data.eval_fps, data.eval_metrics, map);
  CHECK(same.retention == 1.0);
  for (double d : same.delta) CHECK(d == 0.0);

  // A post-gate trained on disjoint data: deltas computable, bounded by the
  // metric range, retention well defined.
  CohortGate post = pre;
  uint64_t step = 0;
  for (const auto& fp : data.shifted)
    train_present(post, fp, StreamRng::derive({gc.seed, 0xdead, step++}));
  auto moved = retention_check(pre, post, data.eval_fps, data.eval_metrics, map);
  REQUIRE(moved.delta.size() == data.eval_fps.size());
  for (double d : moved.delta) CHECK(std::abs(d) <= 30.0);
  CHECK(moved.retention >= 0.0);
  CHECK(moved.retention <= 1.0);

  CHECK(retention_rate({0.4, -0.5, 0.6}, 0.5) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(retention_rate({}, 0.5), DataError);
  CHECK_THROWS_AS(
      retention_check(pre, pre, data.eval_fps, {}, map), DataError);
}

TEST_CASE("learning-rate matching") {
  CHECK(eta_matched_rate(0.002, 0.533) == doctest::Approx(0.001066).epsilon(1e-12));
  CHECK(eta_matched_rate(0.05, 1.0) == 0.05);
  CHECK_THROWS_AS(eta_matched_rate(0.002, 0.0), DataError);
  CHECK_THROWS_AS(eta_matched_rate(0.002, 1.5), DataError);
  CHECK_THROWS_AS(eta_matched_rate(-0.1, 0.5), DataError);
}
