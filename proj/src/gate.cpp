#include "spikedet/gate.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "spikedet/errors.hpp"
#include "spikedet/rng.hpp"

namespace spikedet {

namespace {

constexpr uint64_t kTagInit = 0x6741;   // gate init stream
constexpr uint64_t kTagTrain = 0x6754;  // per (epoch, stimulus) streams
constexpr uint64_t kTagInfer = 0x6749;  // per draw streams

// Serialization helpers: fixed-width little-endian, doubles as bit patterns.
void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  explicit Reader(const std::string& b) : buf(b) {}
  uint32_t u32() {
    if (pos + 4 > buf.size()) throw DataError("gate checkpoint truncated");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  uint64_t u64() {
    if (pos + 8 > buf.size()) throw DataError("gate checkpoint truncated");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  double f64() {
    uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  uint8_t u8() {
    if (pos + 1 > buf.size()) throw DataError("gate checkpoint truncated");
    return static_cast<uint8_t>(buf[pos++]);
  }
};

std::string serialize_gate(const CohortGate& g) {
  std::string out;
  out += "SDGT0001";
  put_u32(out, static_cast<uint32_t>(g.cfg.n_input));
  put_u32(out, static_cast<uint32_t>(g.cfg.n_hidden));
  put_u32(out, static_cast<uint32_t>(g.cfg.n_output));
  put_u32(out, static_cast<uint32_t>(g.cfg.steps));
  put_u32(out, static_cast<uint32_t>(g.cfg.epochs));
  put_u32(out, static_cast<uint32_t>(g.cfg.draws));
  put_u64(out, g.cfg.seed);
  put_f64(out, g.cfg.eta_plus);
  put_f64(out, g.cfg.eta_minus);
  put_f64(out, g.cfg.w_ih_scale);
  put_f64(out, g.cfg.sparsity);
  for (double v : g.w_ih) put_f64(out, v);
  for (uint8_t m : g.ih_mask) out.push_back(static_cast<char>(m));
  for (double v : g.w_ho.w) put_f64(out, v);
  return out;
}

uint64_t fnv1a(const void* data, std::size_t len, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

// One frozen presentation (no plasticity, no threshold changes). Optionally
// quantized: weights come pre-quantized from the caller, dynamic registers
// snap to the anchor grid after every update.
int run_inference_draw(const CohortGate& g, const std::vector<double>& w_ih,
                       const PlasticSynapses& w_ho, const Fingerprint& fp,
                       StreamRng& rng, const QuantSpec* quant, double dyn_scale,
                       SpikeCounts* counts) {
  const int n_in = g.cfg.n_input, n_hid = g.cfg.n_hidden, n_out = g.cfg.n_output;
  // Fresh layers at baseline thresholds: the persistent gate is its weight
  // tensors; homeostatic thresholds are training scaffold, not model state.
  LifLayer hidden(n_hid);
  LifLayer output(n_out);
  if (quant) {
    for (double& t : hidden.theta) t = quantize_value(t, dyn_scale, *quant);
    for (double& t : output.theta) t = quantize_value(t, dyn_scale, *quant);
  }

  std::array<double, kFingerprintDim> rate;
  for (int i = 0; i < n_in; ++i) rate[static_cast<std::size_t>(i)] = poisson_rate(fp[static_cast<std::size_t>(i)]);

  // Nonzero fan-out per input, for the synaptic-op tally.
  std::vector<uint32_t> fan_out(static_cast<std::size_t>(n_in), 0);
  if (counts) {
    for (int i = 0; i < n_in; ++i)
      for (int h = 0; h < n_hid; ++h)
        if (g.ih_mask[static_cast<std::size_t>(i) * n_hid + h]) ++fan_out[static_cast<std::size_t>(i)];
  }

  std::vector<int> out_spike_count(static_cast<std::size_t>(n_out), 0);
  std::vector<double> hidden_drive(static_cast<std::size_t>(n_hid));
  std::vector<double> output_drive(static_cast<std::size_t>(n_out));
  std::vector<double> pre_reset;

  for (int t = 0; t < g.cfg.steps; ++t) {
    if (counts) {
      ++counts->steps;
      counts->neuron_updates += static_cast<uint64_t>(n_hid + n_out);
    }
    std::fill(hidden_drive.begin(), hidden_drive.end(), 0.0);
    for (int i = 0; i < n_in; ++i) {
      if (!rng.bernoulli(rate[static_cast<std::size_t>(i)])) continue;
      if (counts) {
        ++counts->input_spikes;
        counts->synaptic_ops += fan_out[static_cast<std::size_t>(i)];
      }
      const double* row = &w_ih[static_cast<std::size_t>(i) * n_hid];
      for (int h = 0; h < n_hid; ++h) hidden_drive[static_cast<std::size_t>(h)] += row[h];
    }
    auto spikes = lif_integrate(hidden, hidden_drive, &pre_reset);
    if (quant)
      for (double& v : hidden.v) v = quantize_value(v, dyn_scale, *quant);
    int winner = wta_select(spikes, pre_reset);

    std::fill(output_drive.begin(), output_drive.end(), 0.0);
    if (winner >= 0) {
      if (counts) {
        ++counts->hidden_spikes;
        counts->synaptic_ops += static_cast<uint64_t>(n_out);
      }
      for (int o = 0; o < n_out; ++o) output_drive[static_cast<std::size_t>(o)] = w_ho.at(winner, o);
    }
    auto out_spikes = lif_integrate(output, output_drive);
    if (quant)
      for (double& v : output.v) v = quantize_value(v, dyn_scale, *quant);
    for (int o : out_spikes) {
      ++out_spike_count[static_cast<std::size_t>(o)];
      if (counts) ++counts->output_spikes;
    }
  }

  int best = 0, best_count = 0;
  for (int o = 0; o < n_out; ++o) {
    if (out_spike_count[static_cast<std::size_t>(o)] > best_count) {
      best_count = out_spike_count[static_cast<std::size_t>(o)];
      best = o;
    }
  }
  return best_count > 0 ? best : 0;  // zero spikes -> sentinel cohort 0
}

}  // namespace

CohortGate make_gate(const GateConfig& cfg) {
  if (cfg.n_input <= 0 || cfg.n_hidden <= 0 || cfg.n_output <= 0)
    throw DataError("make_gate: layer sizes must be positive");
  CohortGate g;
  g.cfg = cfg;
  g.hidden = LifLayer(cfg.n_hidden);
  g.output = LifLayer(cfg.n_output);
  g.w_ih.assign(static_cast<std::size_t>(cfg.n_input) * cfg.n_hidden, 0.0);
  g.ih_mask.assign(g.w_ih.size(), 0);
  g.w_ho = PlasticSynapses(cfg.n_hidden, cfg.n_output);

  StreamRng rng(StreamRng::derive({cfg.seed, kTagInit}));
  for (std::size_t k = 0; k < g.w_ih.size(); ++k) {
    bool present = !rng.bernoulli(cfg.sparsity);
    double u = rng.uniform();  // drawn either way to keep the stream aligned
    if (present) {
      g.ih_mask[k] = 1;
      g.w_ih[k] = (1.0 - u) * cfg.w_ih_scale;  // (0, scale]
    }
  }

  // Dense uniform [0, cap] hidden->output init, L1-normalized so the first
  // presentation sees the same drive scale as every later one (an
  // unnormalized start lets presentation 1 imprint all columns at once).
  for (double& w : g.w_ho.w) w = rng.uniform() * g.w_ho.cap;
  l1_normalize(g.w_ho);
  return g;
}

void train_present(CohortGate& g, const Fingerprint& fp, uint64_t rng_key) {
  const int n_in = g.cfg.n_input, n_hid = g.cfg.n_hidden;
  StdpTraces traces(n_hid, g.cfg.n_output);
  std::vector<double> hidden_drive(static_cast<std::size_t>(n_hid));
  std::vector<double> output_drive(static_cast<std::size_t>(g.cfg.n_output));
  std::vector<double> pre_reset;

  StreamRng rng(rng_key);
  std::array<double, kFingerprintDim> rate;
  for (int i = 0; i < n_in; ++i)
    rate[static_cast<std::size_t>(i)] = poisson_rate(fp[static_cast<std::size_t>(i)]);

  g.hidden.rest();
  g.output.rest();

  for (int t = 0; t < g.cfg.steps; ++t) {
    traces.decay_step();
    std::fill(hidden_drive.begin(), hidden_drive.end(), 0.0);
    for (int i = 0; i < n_in; ++i) {
      if (!rng.bernoulli(rate[static_cast<std::size_t>(i)])) continue;
      const double* row = &g.w_ih[static_cast<std::size_t>(i) * n_hid];
      for (int h = 0; h < n_hid; ++h) hidden_drive[static_cast<std::size_t>(h)] += row[h];
    }
    auto spikes = lif_integrate(g.hidden, hidden_drive, &pre_reset);
    int winner = wta_select(spikes, pre_reset);
    std::vector<int> hidden_spikes;
    if (winner >= 0) hidden_spikes.push_back(winner);

    std::fill(output_drive.begin(), output_drive.end(), 0.0);
    if (winner >= 0)
      for (int o = 0; o < g.cfg.n_output; ++o)
        output_drive[static_cast<std::size_t>(o)] = g.w_ho.at(winner, o);
    auto out_spikes = lif_integrate(g.output, output_drive);

    // Plasticity sees the pre-increment traces, then traces bump.
    stdp_pair_update(g.w_ho, traces, hidden_spikes, out_spikes,
                     g.cfg.eta_plus, g.cfg.eta_minus);
    for (int h : hidden_spikes) traces.on_pre(h);
    for (int o : out_spikes) traces.on_post(o);

    // Competition is hard WTA at the hidden layer and homeostatic
    // threshold adaptation at the free-running cohort layer; hidden
    // thresholds stay at baseline for the life of the gate.
    homeostasis_step(g.output, out_spikes);
  }
  l1_normalize(g.w_ho);
}

void train_phase1(CohortGate& g, const std::vector<Fingerprint>& train) {
  if (train.empty()) throw DataError("train_phase1: empty training set");

  std::vector<std::size_t> order(train.size());
  for (std::size_t s = 0; s < order.size(); ++s) order[s] = s;

  for (int epoch = 0; epoch < g.cfg.epochs; ++epoch) {
    // Seeded reshuffle so consecutive presentations interleave stimuli
    // instead of replaying dataset order every epoch.
    StreamRng shuffle_rng(StreamRng::derive({g.cfg.seed, kTagTrain,
                                             static_cast<uint64_t>(epoch), 0x5f}));
    shuffle_rng.shuffle(order);
    for (std::size_t s : order)
      train_present(g, train[s],
                    StreamRng::derive({g.cfg.seed, kTagTrain,
                                       static_cast<uint64_t>(epoch),
                                       static_cast<uint64_t>(s)}));
  }
}

int plurality_vote(const std::vector<int>& votes) {
  if (votes.empty()) throw DataError("plurality_vote: no votes");
  int best = -1, best_count = 0;
  for (int v : votes) {
    int c = 0;
    for (int u : votes)
      if (u == v) ++c;
    if (c > best_count || (c == best_count && v < best)) {
      best = v;
      best_count = c;
    }
  }
  return best;
}

int assign_cohort(const CohortGate& g, const Fingerprint& fp,
                  const QuantSpec* quant, SpikeCounts* counts) {
  const std::vector<double>* w_ih = &g.w_ih;
  const PlasticSynapses* w_ho = &g.w_ho;
  std::vector<double> w_ih_q;
  PlasticSynapses w_ho_q;
  double dyn_scale = 0.0;
  if (quant) {
    w_ih_q = g.w_ih;
    quantize_tensor(w_ih_q, *quant);
    w_ho_q = g.w_ho;
    quantize_tensor(w_ho_q.w, *quant);
    w_ih = &w_ih_q;
    w_ho = &w_ho_q;
    dyn_scale = quant_scale(kQuantDynamicRange, *quant);
  }
  std::vector<int> votes;
  for (int d = 0; d < g.cfg.draws; ++d) {
    StreamRng rng(StreamRng::derive({g.cfg.seed, kTagInfer, static_cast<uint64_t>(d)}));
    votes.push_back(run_inference_draw(g, *w_ih, *w_ho, fp, rng, quant, dyn_scale, counts));
  }
  return plurality_vote(votes);
}

void save_gate(const std::filesystem::path& path, const CohortGate& g) {
  std::string bytes = serialize_gate(g);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("save_gate: cannot open " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

CohortGate load_gate(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_gate: cannot open " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 8 || buf.compare(0, 8, "SDGT0001") != 0)
    throw DataError("load_gate: bad magic in " + path.string());
  Reader r(buf);
  r.pos = 8;
  CohortGate g;
  g.cfg.n_input = static_cast<int>(r.u32());
  g.cfg.n_hidden = static_cast<int>(r.u32());
  g.cfg.n_output = static_cast<int>(r.u32());
  g.cfg.steps = static_cast<int>(r.u32());
  g.cfg.epochs = static_cast<int>(r.u32());
  g.cfg.draws = static_cast<int>(r.u32());
  g.cfg.seed = r.u64();
  g.cfg.eta_plus = r.f64();
  g.cfg.eta_minus = r.f64();
  g.cfg.w_ih_scale = r.f64();
  g.cfg.sparsity = r.f64();
  if (g.cfg.n_input <= 0 || g.cfg.n_hidden <= 0 || g.cfg.n_output <= 0)
    throw DataError("load_gate: invalid architecture");
  std::size_t n_ih = static_cast<std::size_t>(g.cfg.n_input) * g.cfg.n_hidden;
  g.w_ih.resize(n_ih);
  for (double& v : g.w_ih) v = r.f64();
  g.ih_mask.resize(n_ih);
  for (uint8_t& m : g.ih_mask) m = r.u8();
  g.w_ho = PlasticSynapses(g.cfg.n_hidden, g.cfg.n_output);
  for (double& v : g.w_ho.w) v = r.f64();
  // Checkpoints carry weight tensors only; layers reconstruct at baseline.
  g.hidden = LifLayer(g.cfg.n_hidden);
  g.output = LifLayer(g.cfg.n_output);
  if (r.pos != buf.size()) throw DataError("load_gate: trailing bytes");
  return g;
}

uint64_t gate_digest(const CohortGate& g) {
  std::string bytes = serialize_gate(g);
  return fnv1a(bytes.data(), bytes.size());
}

uint64_t w_ho_digest(const CohortGate& g) {
  std::string out;
  for (double v : g.w_ho.w) put_f64(out, v);
  return fnv1a(out.data(), out.size());
}

}  // namespace spikedet
