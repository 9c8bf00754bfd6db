#include "spikedet/evalstats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "spikedet/errors.hpp"
#include "spikedet/fingerprint.hpp"
#include "spikedet/rng.hpp"

namespace spikedet {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Population standard deviation.
double pop_sd(const std::vector<double>& v) {
  double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace

// -- detection metrics --------------------------------------------------------

double average_precision(const BoxList& dets, const BoxList& gt, double thr) {
  if (gt.empty()) return kNan;

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    if (dets[a].frame != dets[b].frame) return dets[a].frame < dets[b].frame;
    if (dets[a].box.y != dets[b].box.y) return dets[a].box.y < dets[b].box.y;
    return dets[a].box.x < dets[b].box.x;
  });

  std::vector<bool> gt_taken(gt.size(), false);
  std::vector<double> recall, precision;
  int tp = 0, fp = 0;
  for (std::size_t di : order) {
    const EvalBox& d = dets[di];
    double best = 0.0;
    int best_g = -1;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (gt_taken[g] || gt[g].frame != d.frame) continue;
      double v = iou(d.box, gt[g].box);
      if (v >= thr && v > best) {
        best = v;
        best_g = static_cast<int>(g);
      }
    }
    if (best_g >= 0) {
      gt_taken[static_cast<std::size_t>(best_g)] = true;
      ++tp;
    } else {
      ++fp;
    }
    recall.push_back(static_cast<double>(tp) / static_cast<double>(gt.size()));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }

  // Precision envelope, then 101-point sampling.
  for (std::size_t i = precision.size(); i-- > 1;)
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  for (int k = 0; k <= 100; ++k) {
    double r = static_cast<double>(k) / 100.0;
    auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end())
      ap += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return ap / 101.0;
}

MapResult map_at_iou(const std::vector<BoxList>& dets, const std::vector<BoxList>& gt,
                     double thr) {
  if (dets.size() != gt.size())
    throw std::invalid_argument("map_at_iou: sequence count mismatch");
  MapResult out;
  out.threshold = thr;
  for (std::size_t s = 0; s < gt.size(); ++s) {
    if (gt[s].empty()) continue;  // zero-GT sequences are excluded from the mean
    out.per_sequence.push_back(average_precision(dets[s], gt[s], thr));
  }
  out.mean_ap = out.per_sequence.empty() ? kNan : mean_of(out.per_sequence);
  return out;
}

EventMetrics event_metrics(const std::vector<std::vector<uint8_t>>& pred,
                           const std::vector<std::vector<uint8_t>>& gt, int width,
                           int height) {
  if (pred.size() != gt.size())
    throw std::invalid_argument("event_metrics: frame count mismatch");
  const std::size_t px = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  uint64_t inter = 0, pred_pos = 0, gt_pos = 0;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    if (pred[f].size() != px || gt[f].size() != px)
      throw std::invalid_argument("event_metrics: mask size mismatch");
    for (std::size_t i = 0; i < px; ++i) {
      bool p = pred[f][i] != 0, g = gt[f][i] != 0;
      inter += p && g;
      pred_pos += p;
      gt_pos += g;
    }
  }
  EventMetrics m;
  if (gt_pos > 0)
    m.pd = 100.0 * static_cast<double>(inter) / static_cast<double>(gt_pos);
  uint64_t frames = pred.size();
  if (frames > 0 && px > 0)
    m.fa_e4 = 1e4 * static_cast<double>(pred_pos - inter) /
              (static_cast<double>(px) * static_cast<double>(frames));
  uint64_t uni = pred_pos + gt_pos - inter;
  m.iou = uni > 0 ? 100.0 * static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
  return m;
}

// -- sequence-level statistics ------------------------------------------------

std::pair<double, double> bootstrap_ci(const std::vector<double>& values, int resamples,
                                       double level, uint64_t seed) {
  if (values.size() < 2)
    throw std::invalid_argument("bootstrap_ci: need at least 2 values");
  if (resamples < 1 || level <= 0.0 || level >= 1.0)
    throw std::invalid_argument("bootstrap_ci: bad resamples/level");
  StreamRng rng(StreamRng::derive({seed, 0xb00ull}));
  const std::size_t n = values.size();
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (double& m : means) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += values[rng.uniform_int(n)];
    m = acc / static_cast<double>(n);
  }
  double tail = 100.0 * (1.0 - level) / 2.0;
  return {percentile(means, tail), percentile(means, 100.0 - tail)};
}

TostResult tost_paired(const std::vector<double>& diffs, double margin) {
  if (diffs.size() < 2) throw std::invalid_argument("tost_paired: need at least 2 diffs");
  if (margin <= 0.0) throw std::invalid_argument("tost_paired: margin must be positive");
  const double n = static_cast<double>(diffs.size());
  double m = mean_of(diffs);
  double ss = 0.0;
  for (double d : diffs) ss += (d - m) * (d - m);
  double sd = std::sqrt(ss / (n - 1.0));

  TostResult r;
  r.margin = margin;
  if (sd == 0.0) {
    r.degenerate = true;
    r.equivalent = std::abs(m) < margin;
    r.p = r.equivalent ? 0.0 : 1.0;
    return r;
  }
  double se = sd / std::sqrt(n);
  boost::math::students_t dist(n - 1.0);
  double p_lower = boost::math::cdf(boost::math::complement(dist, (m + margin) / se));
  double p_upper = boost::math::cdf(dist, (m - margin) / se);
  r.p = std::max(p_lower, p_upper);
  r.equivalent = r.p < 0.05;
  return r;
}

namespace {

// Average ranks of |d|; zeros participate (they hold the lowest ranks).
std::vector<double> abs_ranks(const std::vector<double>& d) {
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

bool has_tied_abs(const std::vector<double>& d) {
  std::vector<double> a(d.size());
  std::transform(d.begin(), d.end(), a.begin(), [](double x) { return std::abs(x); });
  std::sort(a.begin(), a.end());
  return std::adjacent_find(a.begin(), a.end()) != a.end();
}

}  // namespace

bool wilcoxon_uses_exact(const std::vector<double>& diffs) {
  if (diffs.size() > 25) return false;
  for (double d : diffs)
    if (d == 0.0) return false;
  return !has_tied_abs(diffs);
}

double wilcoxon_paired(const std::vector<double>& diffs) {
  const std::size_t n = diffs.size();
  if (n < 1) throw std::invalid_argument("wilcoxon_paired: empty input");
  for (double d : diffs)
    if (!std::isfinite(d)) throw std::invalid_argument("wilcoxon_paired: non-finite diff");

  std::vector<double> r = abs_ranks(diffs);
  double r_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (diffs[i] > 0.0) r_plus += r[i];

  if (wilcoxon_uses_exact(diffs)) {
    // Null distribution of W+ by subset-sum counting over ranks 1..n.
    const int max_w = static_cast<int>(n * (n + 1) / 2);
    std::vector<double> count(static_cast<std::size_t>(max_w) + 1, 0.0);
    count[0] = 1.0;
    for (int k = 1; k <= static_cast<int>(n); ++k)
      for (int w = max_w; w >= k; --w)
        count[static_cast<std::size_t>(w)] += count[static_cast<std::size_t>(w - k)];
    const double total = std::pow(2.0, static_cast<double>(n));
    const int w_lo = static_cast<int>(std::ceil(r_plus));
    const int w_hi = static_cast<int>(std::floor(r_plus));
    double cdf = 0.0, sf = 0.0;
    for (int w = 0; w <= w_lo; ++w) cdf += count[static_cast<std::size_t>(w)];
    for (int w = w_hi; w <= max_w; ++w) sf += count[static_cast<std::size_t>(w)];
    return std::clamp(2.0 * std::min(cdf, sf) / total, 0.0, 1.0);
  }

  // Normal approximation, Pratt zero handling, tie-corrected variance.
  const double cnt = static_cast<double>(n);
  double n_zero = 0.0;
  for (double d : diffs) n_zero += d == 0.0;
  double mn = cnt * (cnt + 1.0) * 0.25 - n_zero * (n_zero + 1.0) * 0.25;
  double var24 = cnt * (cnt + 1.0) * (2.0 * cnt + 1.0) -
                 n_zero * (n_zero + 1.0) * (2.0 * n_zero + 1.0);

  // Tie groups over nonzero |d|.
  std::vector<double> a;
  for (double d : diffs)
    if (d != 0.0) a.push_back(std::abs(d));
  std::sort(a.begin(), a.end());
  std::size_t i = 0;
  while (i < a.size()) {
    std::size_t j = i;
    while (j + 1 < a.size() && a[j + 1] == a[i]) ++j;
    double t = static_cast<double>(j - i + 1);
    var24 -= 0.5 * (t * t * t - t);
    i = j + 1;
  }
  double se = std::sqrt(var24 / 24.0);
  if (se == 0.0) return 1.0;  // no nonzero diffs left
  double z = (r_plus - mn) / se;
  boost::math::normal_distribution<double> norm;
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(norm, std::abs(z))),
                    0.0, 1.0);
}

std::vector<double> holm_correct(const std::vector<double>& p_values) {
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<double> out(m);
  double running = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    double adj = std::min(1.0, static_cast<double>(m - k) * p_values[order[k]]);
    running = std::max(running, adj);
    out[order[k]] = running;
  }
  return out;
}

double sign_test(const std::vector<double>& diffs) {
  int pos = 0, n = 0;
  for (double d : diffs) {
    if (d == 0.0) continue;
    ++n;
    pos += d > 0.0;
  }
  if (n == 0) return 1.0;
  // Exact binomial(n, 1/2) lower tail of min(pos, neg), doubled.
  int lo = std::min(pos, n - pos);
  double term = std::pow(0.5, n);  // C(n, 0) / 2^n
  double tail = 0.0;
  for (int k = 0; k <= lo; ++k) {
    tail += term;
    term *= static_cast<double>(n - k) / (k + 1);
  }
  return std::min(1.0, 2.0 * tail);
}

int n_star(double sigma_rand, double sigma_stdp) {
  if (sigma_rand <= 0.0 || sigma_stdp <= 0.0)
    throw std::invalid_argument("n_star: sigmas must be positive");
  double ratio = sigma_rand / sigma_stdp;
  return static_cast<int>(std::ceil(ratio * ratio - 1e-9));
}

// -- ensemble analysis --------------------------------------------------------

namespace {

double seq_metric(const std::map<Recipe, double>& table, Recipe r) {
  auto it = table.find(r);
  if (it == table.end())
    throw DataError(std::string("ensemble metric table missing recipe ") + recipe_name(r));
  return it->second;
}

}  // namespace

SigmaCurve ensemble_sigma_bootstrap(const std::vector<std::vector<int>>& assignments,
                                    const std::vector<LeverMap>& maps,
                                    const std::vector<std::map<Recipe, double>>& metrics,
                                    const std::vector<int>& n_grid, int draws,
                                    uint64_t seed) {
  const std::size_t n_seeds = assignments.size();
  if (n_seeds < 2) throw std::invalid_argument("ensemble_sigma_bootstrap: need >= 2 seeds");
  if (maps.size() != n_seeds)
    throw std::invalid_argument("ensemble_sigma_bootstrap: maps/assignments mismatch");
  const std::size_t n_seq = metrics.size();
  for (const auto& a : assignments)
    if (a.size() != n_seq)
      throw std::invalid_argument("ensemble_sigma_bootstrap: assignment length mismatch");

  std::vector<double> per_seed(n_seeds);
  for (std::size_t k = 0; k < n_seeds; ++k) {
    double acc = 0.0;
    for (std::size_t s = 0; s < n_seq; ++s)
      acc += seq_metric(metrics[s], maps[k].lookup(assignments[k][s]));
    per_seed[k] = n_seq > 0 ? acc / static_cast<double>(n_seq) : 0.0;
  }

  SigmaCurve curve;
  curve.sigma1 = pop_sd(per_seed);
  std::vector<int> sampled;
  std::map<int, int> cohort_votes;
  std::map<Recipe, int> recipe_votes;
  for (int n_val : n_grid) {
    if (n_val < 1) throw std::invalid_argument("ensemble_sigma_bootstrap: N must be >= 1");
    double sd;
    if (n_val == 1) {
      sd = curve.sigma1;  // exact: a single sampled gate is just a uniform seed pick
    } else {
      StreamRng rng(StreamRng::derive({seed, 0xe5e5ull, static_cast<uint64_t>(n_val)}));
      std::vector<double> realized(static_cast<std::size_t>(draws));
      for (double& out : realized) {
        sampled.resize(static_cast<std::size_t>(n_val));
        for (int& k : sampled) k = static_cast<int>(rng.uniform_int(n_seeds));
        double acc = 0.0;
        for (std::size_t s = 0; s < n_seq; ++s) {
          cohort_votes.clear();
          for (int k : sampled) ++cohort_votes[assignments[static_cast<std::size_t>(k)][s]];
          int cohort = 0, best = 0;
          for (auto [c, v] : cohort_votes)
            if (v > best) best = v, cohort = c;  // map order breaks ties low
          recipe_votes.clear();
          for (int k : sampled) ++recipe_votes[maps[static_cast<std::size_t>(k)].lookup(cohort)];
          Recipe recipe = Recipe::no_op;
          best = 0;
          for (auto [r, v] : recipe_votes)
            if (v > best) best = v, recipe = r;  // enum order breaks ties early
          acc += seq_metric(metrics[s], recipe);
        }
        out = n_seq > 0 ? acc / static_cast<double>(n_seq) : 0.0;
      }
      sd = pop_sd(realized);
    }
    curve.n_grid.push_back(n_val);
    curve.sigma.push_back(sd);
    double analytic = curve.sigma1 / std::sqrt(static_cast<double>(n_val));
    curve.ratio.push_back(analytic > 0.0 ? sd / analytic : 0.0);
  }
  return curve;
}

// -- attractor diagnostics ----------------------------------------------------

AttractorDiag attractor_diagnostics(const PlasticSynapses& w) {
  for (double v : w.w)
    if (v < 0.0) throw std::invalid_argument("attractor_diagnostics: negative weight");
  AttractorDiag d;
  double ent_sum = 0.0;
  for (int o = 0; o < w.n_post; ++o) {
    double col = 0.0;
    for (int h = 0; h < w.n_pre; ++h) col += w.at(h, o);
    if (col <= 0.0) {
      ++d.zero_columns;
      continue;  // contributes 0 to the mean
    }
    double ent = 0.0;
    for (int h = 0; h < w.n_pre; ++h) {
      double p = w.at(h, o) / col;
      if (p > 0.0) ent -= p * std::log(p);
    }
    ent_sum += ent;
  }
  d.column_entropy = w.n_post > 0 ? ent_sum / static_cast<double>(w.n_post) : 0.0;

  std::vector<double> norms(static_cast<std::size_t>(w.n_pre));
  for (int h = 0; h < w.n_pre; ++h) {
    double acc = 0.0;
    for (int o = 0; o < w.n_post; ++o) acc += w.at(h, o) * w.at(h, o);
    norms[static_cast<std::size_t>(h)] = std::sqrt(acc);
  }
  double m = norms.empty() ? 0.0 : mean_of(norms);
  d.row_norm_cv = m > 0.0 ? pop_sd(norms) / m : 0.0;
  return d;
}

// -- energy proxy -------------------------------------------------------------

std::map<std::string, double> default_energy_costs() {
  return {
      {"spike", 1.0},           // nJ per emitted spike
      {"synaptic_op", 0.0236},  // nJ per weight accumulation
      {"neuron_update", 0.081}, // nJ per neuron per step
      {"step_idle", 45.0},      // nJ per timestep (static + controller overhead)
  };
}

double energy_proxy_uj(const SpikeCounts& counts,
                       const std::map<std::string, double>& costs_nj) {
  auto cost = [&](const char* name) {
    auto it = costs_nj.find(name);
    if (it == costs_nj.end())
      throw DataError(std::string("energy cost table missing component: ") + name);
    return it->second;
  };
  double nj = cost("spike") * static_cast<double>(counts.input_spikes +
                                                  counts.hidden_spikes +
                                                  counts.output_spikes) +
              cost("synaptic_op") * static_cast<double>(counts.synaptic_ops) +
              cost("neuron_update") * static_cast<double>(counts.neuron_updates) +
              cost("step_idle") * static_cast<double>(counts.steps);
  return nj / 1000.0;
}

}  // namespace spikedet
