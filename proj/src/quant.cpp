#include "spikedet/quant.hpp"

#include <cfenv>
#include <cmath>

#include "spikedet/errors.hpp"

namespace spikedet {

double quant_scale(double max_abs, const QuantSpec& spec) {
  if (spec.bits != 8 && spec.bits != 6)
    throw DataError("quant_scale: bits must be 8 or 6");
  if (!(max_abs > 0.0)) return 1.0;  // empty range, grid choice irrelevant
  double raw = max_abs / static_cast<double>(spec.qmax());
  return std::exp2(std::ceil(std::log2(raw)));
}

double quantize_value(double v, double scale, const QuantSpec& spec) {
  // nearbyint under the default FE_TONEAREST mode is round-half-to-even.
  double q = std::nearbyint(v / scale);
  double lo = static_cast<double>(spec.qmin());
  double hi = static_cast<double>(spec.qmax());
  if (q < lo) q = lo;
  if (q > hi) q = hi;
  return q * scale;
}

double tensor_scale(const std::vector<double>& t, const QuantSpec& spec) {
  double max_abs = 0.0;
  for (double v : t) max_abs = std::max(max_abs, std::abs(v));
  return quant_scale(max_abs, spec);
}

void quantize_tensor(std::vector<double>& t, double scale, const QuantSpec& spec) {
  for (double& v : t) v = quantize_value(v, scale, spec);
}

double quantize_tensor(std::vector<double>& t, const QuantSpec& spec) {
  double scale = tensor_scale(t, spec);
  quantize_tensor(t, scale, spec);
  return scale;
}

}  // namespace spikedet
