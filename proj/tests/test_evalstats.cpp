#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "spikedet/errors.hpp"
#include "spikedet/evalstats.hpp"
#include "spikedet/gate.hpp"
#include "spikedet/rng.hpp"

using namespace spikedet;

namespace {

EvalBox eb(int frame, double x, double y, double w, double h, double score = 0.0) {
  return EvalBox{frame, Box{x, y, w, h}, score};
}

// Independent matcher: explicit max-score selection loop (no sort), its own
// overlap arithmetic, and AP as a direct scan for the best precision at each
// of the 101 recall thresholds (no envelope pass). Shares only the protocol
// definition with the library.
double oracle_ap(const BoxList& dets, const BoxList& gt, double thr) {
  if (gt.empty()) return std::nan("");
  std::vector<bool> det_done(dets.size(), false), gt_done(gt.size(), false);
  std::vector<double> rec, prec;
  int tp = 0, fp = 0;
  for (std::size_t round = 0; round < dets.size(); ++round) {
    int pick = -1;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (det_done[i]) continue;
      if (pick < 0) {
        pick = static_cast<int>(i);
        continue;
      }
      const EvalBox &a = dets[i], &b = dets[static_cast<std::size_t>(pick)];
      bool better = a.score > b.score ||
                    (a.score == b.score &&
                     (a.frame < b.frame ||
                      (a.frame == b.frame &&
                       (a.box.y < b.box.y || (a.box.y == b.box.y && a.box.x < b.box.x)))));
      if (better) pick = static_cast<int>(i);
    }
    const EvalBox& d = dets[static_cast<std::size_t>(pick)];
    det_done[static_cast<std::size_t>(pick)] = true;
    double best_v = -1.0;
    int best_g = -1;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (gt_done[g] || gt[g].frame != d.frame) continue;
      double x1 = std::max(d.box.x, gt[g].box.x);
      double y1 = std::max(d.box.y, gt[g].box.y);
      double x2 = std::min(d.box.x + d.box.w, gt[g].box.x + gt[g].box.w);
      double y2 = std::min(d.box.y + d.box.h, gt[g].box.y + gt[g].box.h);
      double inter = std::max(0.0, x2 - x1) * std::max(0.0, y2 - y1);
      double v = inter / (d.box.w * d.box.h + gt[g].box.w * gt[g].box.h - inter);
      if (v >= thr && v > best_v) {
        best_v = v;
        best_g = static_cast<int>(g);
      }
    }
    if (best_g >= 0) {
      gt_done[static_cast<std::size_t>(best_g)] = true;
      ++tp;
    } else {
      ++fp;
    }
    rec.push_back(double(tp) / double(gt.size()));
    prec.push_back(double(tp) / double(tp + fp));
  }
  double ap = 0.0;
  for (int k = 0; k <= 100; ++k) {
    double want = k / 100.0, best = 0.0;
    for (std::size_t i = 0; i < rec.size(); ++i)
      if (rec[i] >= want) best = std::max(best, prec[i]);
    ap += best;
  }
  return ap / 101.0;
}

}  // namespace

TEST_CASE("single exact detection gives AP 1 at both thresholds") {
  BoxList gt{eb(0, 10, 10, 8, 8)};
  BoxList det{eb(0, 10, 10, 8, 8, 0.9)};
  CHECK(average_precision(det, gt, 0.30) == doctest::Approx(1.0));
  CHECK(average_precision(det, gt, 0.50) == doctest::Approx(1.0));
  CHECK(average_precision({}, gt, 0.30) == doctest::Approx(0.0));
  CHECK(std::isnan(average_precision(det, {}, 0.30)));
}

TEST_CASE("mixed-overlap case matches the exhaustive matcher") {
  // 4 frames, 2 GT, 3 dets: one solid hit, one marginal, one miss.
  BoxList gt{eb(0, 10, 10, 10, 10), eb(2, 30, 30, 10, 10)};
  BoxList det{
      eb(0, 11, 11, 10, 10, 0.9),  // IoU 0.68 with gt0
      eb(2, 32, 32, 10, 10, 0.7),  // IoU 0.47 with gt1
      eb(3, 50, 50, 10, 10, 0.5),  // no GT in frame 3
  };
  for (double thr : {0.30, 0.50}) {
    double got = average_precision(det, gt, thr);
    CHECK(got == doctest::Approx(oracle_ap(det, gt, thr)).epsilon(1e-12));
  }
  // At 0.30 both true dets match (rank 1 and 2), the frame-3 det is a miss.
  CHECK(average_precision(det, gt, 0.30) == doctest::Approx(1.0));
  // At 0.50 the marginal det drops out: recall caps at 0.5.
  CHECK(average_precision(det, gt, 0.50) ==
        doctest::Approx(oracle_ap(det, gt, 0.50)).epsilon(1e-12));
  CHECK(average_precision(det, gt, 0.50) < 0.6);
}

TEST_CASE("matcher equals the exhaustive oracle over random small instances") {
  StreamRng rng(StreamRng::derive({99, 0x0acc}));
  int checked = 0;
  for (int inst = 0; inst < 1500; ++inst) {
    int frames = 1 + static_cast<int>(rng.uniform_int(5));
    BoxList gt, det;
    for (int f = 0; f < frames; ++f) {
      int n_gt = static_cast<int>(rng.uniform_int(4));
      for (int g = 0; g < n_gt; ++g)
        gt.push_back(eb(f, rng.uniform(0, 50), rng.uniform(0, 50),
                        rng.uniform(4, 20), rng.uniform(4, 20)));
      int n_det = static_cast<int>(rng.uniform_int(5));
      for (int d = 0; d < n_det; ++d) {
        EvalBox b;
        if (!gt.empty() && rng.bernoulli(0.6)) {
          b = gt[rng.uniform_int(gt.size())];  // jittered copy of some GT
          b.frame = f;
          b.box.x += rng.uniform(-4, 4);
          b.box.y += rng.uniform(-4, 4);
          b.box.w = std::max(2.0, b.box.w + rng.uniform(-3, 3));
          b.box.h = std::max(2.0, b.box.h + rng.uniform(-3, 3));
        } else {
          b = eb(f, rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(4, 20),
                 rng.uniform(4, 20));
        }
        b.score = rng.uniform();
        det.push_back(b);
      }
    }
    if (gt.empty()) continue;
    double a30 = average_precision(det, gt, 0.30);
    double a50 = average_precision(det, gt, 0.50);
    CHECK(a30 == doctest::Approx(oracle_ap(det, gt, 0.30)).epsilon(1e-12));
    CHECK(a50 == doctest::Approx(oracle_ap(det, gt, 0.50)).epsilon(1e-12));
    CHECK(a50 <= a30 + 1e-12);  // AP never rises with a stricter threshold
    ++checked;
  }
  CHECK(checked >= 1000);
}

TEST_CASE("zero-GT sequences are excluded from the mAP mean") {
  std::vector<BoxList> gt{{eb(0, 10, 10, 8, 8)}, {}, {eb(0, 5, 5, 6, 6)}};
  std::vector<BoxList> det{{eb(0, 10, 10, 8, 8, 1.0)}, {eb(0, 1, 1, 4, 4, 1.0)}, {}};
  MapResult r = map_at_iou(det, gt, 0.30);
  CHECK(r.per_sequence.size() == 2);
  CHECK(r.mean_ap == doctest::Approx(0.5));
  CHECK(std::isnan(map_at_iou({{}, {}}, {{}, {}}, 0.30).mean_ap));
  CHECK_THROWS_AS(map_at_iou(det, {{}}, 0.30), std::invalid_argument);
}

TEST_CASE("event metrics count pixels the obvious way") {
  int w = 4, h = 4;
  std::vector<uint8_t> empty(16, 0), full(16, 0);
  for (int i = 0; i < 16; ++i) full[static_cast<std::size_t>(i)] = 1;

  EventMetrics same = event_metrics({full, full}, {full, full}, w, h);
  CHECK(*same.pd == doctest::Approx(100.0));
  CHECK(same.fa_e4 == doctest::Approx(0.0));
  CHECK(same.iou == doctest::Approx(100.0));

  EventMetrics none = event_metrics({empty, empty}, {full, full}, w, h);
  CHECK(*none.pd == doctest::Approx(0.0));
  CHECK(none.fa_e4 == doctest::Approx(0.0));
  CHECK(none.iou == doctest::Approx(0.0));

  CHECK_FALSE(event_metrics({empty}, {empty}, w, h).pd.has_value());

  // GT = left half (8 px/frame), pred = checkerboard (8 px/frame, 4 in the
  // left half). Over 2 frames: inter 8, pred 16, gt 16, union 24.
  std::vector<uint8_t> left(16, 0), checker(16, 0);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      if (x < 2) left[static_cast<std::size_t>(y * 4 + x)] = 1;
      if ((x + y) % 2 == 0) checker[static_cast<std::size_t>(y * 4 + x)] = 1;
    }
  EventMetrics half = event_metrics({checker, checker}, {left, left}, w, h);
  CHECK(*half.pd == doctest::Approx(50.0));
  CHECK(half.fa_e4 == doctest::Approx(1e4 * 8.0 / 32.0));
  CHECK(half.iou == doctest::Approx(100.0 * 8.0 / 24.0));
}

TEST_CASE("bootstrap interval is seeded and degenerates on constants") {
  std::vector<double> c(10, 3.25);
  auto [lo, hi] = bootstrap_ci(c, 1000, 0.95, 7);
  CHECK(lo == doctest::Approx(3.25));
  CHECK(hi == doctest::Approx(3.25));

  std::vector<double> v{1.0, 2.0, 3.5, 2.2, 4.1, 0.5, 2.8};
  auto a = bootstrap_ci(v, 500, 0.95, 11);
  auto b = bootstrap_ci(v, 500, 0.95, 11);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.first < a.second);
  CHECK_THROWS_AS(bootstrap_ci({1.0}, 100, 0.95, 0), std::invalid_argument);
}

TEST_CASE("bootstrap coverage is near nominal at n = 47") {
  StreamRng rng(StreamRng::derive({5, 0xc077}));
  const double mu = 5.0;
  int covered = 0, reps = 300;
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<double> sample(47);
    for (double& x : sample) x = rng.gaussian(mu, 2.0);
    auto [lo, hi] = bootstrap_ci(sample, 1000, 0.95, static_cast<uint64_t>(rep));
    covered += (lo <= mu && mu <= hi);
  }
  double cover = double(covered) / reps;
  CHECK(cover > 0.89);
  CHECK(cover < 0.99);
}

TEST_CASE("TOST follows the reference math and flags degenerate vectors") {
  TostResult zero = tost_paired(std::vector<double>(8, 0.0), 0.5);
  CHECK(zero.degenerate);
  CHECK(zero.equivalent);

  TostResult one = tost_paired(std::vector<double>(8, 1.0), 0.5);
  CHECK(one.degenerate);
  CHECK_FALSE(one.equivalent);
  CHECK(one.p == doctest::Approx(1.0));

  CHECK_THROWS_AS(tost_paired({0.1, 0.2}, -1.0), std::invalid_argument);
}

TEST_CASE("wilcoxon and TOST agree with the frozen reference fixtures") {
  std::ifstream in(std::string(TESTS_DATA_DIR) + "/stats_reference.json");
  REQUIRE(in.good());
  nlohmann::json doc = nlohmann::json::parse(in);
  double margin = doc["margin"];
  int n_exact = 0, n_approx = 0;
  for (const auto& rec : doc["vectors"]) {
    std::vector<double> d = rec["diffs"].get<std::vector<double>>();
    bool exact = rec["exact"];
    CHECK(wilcoxon_uses_exact(d) == exact);
    (exact ? n_exact : n_approx)++;
    CHECK(wilcoxon_paired(d) == doctest::Approx(rec["p_wilcoxon"].get<double>()).epsilon(1e-6));
    CHECK(tost_paired(d, margin).p ==
          doctest::Approx(rec["p_tost"].get<double>()).epsilon(1e-6));
  }
  CHECK(n_exact >= 40);
  CHECK(n_approx >= 10);
}

TEST_CASE("holm adjustment is monotone and order-preserving") {
  std::vector<double> p{0.01, 0.04, 0.03};
  auto adj = holm_correct(p);
  CHECK(adj[0] == doctest::Approx(0.03));
  CHECK(adj[1] == doctest::Approx(0.06));
  CHECK(adj[2] == doctest::Approx(0.06));

  StreamRng rng(StreamRng::derive({3, 0x601d}));
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> raw(1 + rng.uniform_int(8));
    for (double& x : raw) x = rng.uniform();
    auto a = holm_correct(raw);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      CHECK(a[i] >= raw[i]);  // adjusted never below raw
      CHECK(a[i] <= 1.0);
      for (std::size_t j = 0; j < raw.size(); ++j)
        if (raw[i] < raw[j]) CHECK(a[i] <= a[j]);  // order preserved
    }
  }
}

TEST_CASE("n_star rounds the variance ratio up and ignores scale") {
  CHECK(n_star(0.607, 0.092) == 44);
  CHECK(n_star(1.0, 1.0) == 1);
  CHECK(n_star(0.6, 0.3) == 4);
  CHECK(n_star(0.607 * 3.0, 0.092 * 3.0) == 44);
  CHECK_THROWS_AS(n_star(0.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(n_star(0.1, -1.0), std::invalid_argument);
}

TEST_CASE("ensemble sigma curve: exact N=1, zero for identical gates") {
  // Three sequences, metric depends only on the recipe.
  std::vector<std::map<Recipe, double>> metrics(3);
  for (auto& m : metrics)
    m = {{Recipe::no_op, 70.0}, {Recipe::shadow, 72.0}, {Recipe::mf3, 74.0}};

  LeverMap m0, m1;
  m0.by_cohort = {{0, Recipe::no_op}, {1, Recipe::shadow}};
  m1.by_cohort = {{0, Recipe::shadow}, {1, Recipe::mf3}};

  // Seed 0 routes everything to no_op (70), seed 1 everything to mf3 (74).
  std::vector<std::vector<int>> assign{{0, 0, 0}, {1, 1, 1}};
  SigmaCurve c = ensemble_sigma_bootstrap(assign, {m0, m1}, metrics, {1, 2}, 2000, 0);
  CHECK(c.sigma1 == doctest::Approx(2.0));  // population sd of {70, 74}
  CHECK(c.sigma[0] == doctest::Approx(2.0));
  CHECK(c.ratio[0] == doctest::Approx(1.0));

  // Identical gates: no variance at any N.
  SigmaCurve z = ensemble_sigma_bootstrap({{0, 1, 0}, {0, 1, 0}}, {m0, m0}, metrics,
                                          {1, 2, 4}, 500, 0);
  for (double s : z.sigma) CHECK(s == doctest::Approx(0.0));

  CHECK_THROWS_AS(ensemble_sigma_bootstrap({{0}}, {m0}, metrics, {1}, 10, 0),
                  std::invalid_argument);
}

TEST_CASE("ensemble ratio starts near 1 and grows as votes stay split") {
  StreamRng rng(StreamRng::derive({17, 0xef}));
  const int n_seeds = 12, n_seq = 20;
  std::vector<std::map<Recipe, double>> metrics(n_seq);
  for (int s = 0; s < n_seq; ++s)
    metrics[static_cast<std::size_t>(s)] = {{Recipe::no_op, 70.0 + s * 0.1},
                                            {Recipe::shadow, 71.0 + s * 0.15},
                                            {Recipe::mf3, 72.5 - s * 0.05}};
  LeverMap map;
  map.by_cohort = {{0, Recipe::no_op}, {1, Recipe::shadow}, {2, Recipe::mf3}};
  std::vector<LeverMap> maps(n_seeds, map);

  // Disagreeing seed pool: assignments uniform over three cohorts, so many
  // sequences carry persistent near-ties. Bootstrap draws resample the same
  // pool, so plurality votes stay split and sigma(N) shrinks slower than the
  // independent-averaging bound: the ratio is near 1 at small N and grows.
  std::vector<std::vector<int>> assign(n_seeds, std::vector<int>(n_seq));
  for (auto& row : assign)
    for (int& c : row) c = static_cast<int>(rng.uniform_int(3));
  SigmaCurve c = ensemble_sigma_bootstrap(assign, maps, metrics, {2, 8}, 4000, 1);
  CHECK(c.ratio[0] > 0.6);
  CHECK(c.ratio[0] < 1.6);
  CHECK(c.ratio[1] > c.ratio[0] + 0.3);
}

TEST_CASE("attractor diagnostics on hand-built weight matrices") {
  PlasticSynapses uni(32, 12);
  for (double& w : uni.w) w = 0.25;
  AttractorDiag u = attractor_diagnostics(uni);
  CHECK(u.column_entropy == doctest::Approx(std::log(32.0)));
  CHECK(u.row_norm_cv == doctest::Approx(0.0));
  CHECK(u.zero_columns == 0);

  PlasticSynapses hot(32, 12);
  hot.w.assign(hot.w.size(), 0.0);
  for (int o = 0; o < 12; ++o) hot.w[static_cast<std::size_t>(o * 12 + o)] = 0.8;
  AttractorDiag h = attractor_diagnostics(hot);
  CHECK(h.column_entropy == doctest::Approx(0.0));
  CHECK(h.zero_columns == 0);

  PlasticSynapses zero(4, 3);
  zero.w.assign(zero.w.size(), 0.0);
  zero.w[0] = 0.5;  // only column 0 is alive
  AttractorDiag z = attractor_diagnostics(zero);
  CHECK(z.zero_columns == 2);

  PlasticSynapses bad(2, 2);
  bad.w = {0.1, -0.2, 0.3, 0.4};
  CHECK_THROWS_AS(attractor_diagnostics(bad), std::invalid_argument);
}

TEST_CASE("energy proxy is a linear counting rule") {
  SpikeCounts none;
  auto costs = default_energy_costs();
  CHECK(energy_proxy_uj(none, costs) == doctest::Approx(0.0));

  SpikeCounts c;
  c.steps = 100;
  c.input_spikes = 40;
  c.hidden_spikes = 30;
  c.output_spikes = 10;
  c.synaptic_ops = 500;
  c.neuron_updates = 4400;
  double e1 = energy_proxy_uj(c, costs);
  // Hand sum: 80*1.0 + 500*0.0236 + 4400*0.081 + 100*45.0 nJ.
  CHECK(e1 == doctest::Approx((80.0 + 11.8 + 356.4 + 4500.0) / 1000.0));
  SpikeCounts d = c;
  d += c;
  CHECK(energy_proxy_uj(d, costs) == doctest::Approx(2.0 * e1));

  costs.erase("synaptic_op");
  CHECK_THROWS_WITH_AS(energy_proxy_uj(c, costs),
                       "energy cost table missing component: synaptic_op", DataError);
}

TEST_CASE("full five-draw classification lands at the published energy scale") {
  GateConfig cfg;
  cfg.seed = 3;
  CohortGate g = make_gate(cfg);
  Fingerprint fp{};
  for (std::size_t i = 0; i < fp.size(); ++i) fp[i] = (i % 2 == 0) ? 0.8 : -0.4;
  SpikeCounts counts;
  assign_cohort(g, fp, nullptr, &counts);
  CHECK(counts.steps == 350u * 5u);
  double uj = energy_proxy_uj(counts, default_energy_costs());
  // Order of magnitude of the documented ~83 uJ per classification.
  CHECK(uj > 20.0);
  CHECK(uj < 300.0);
}
