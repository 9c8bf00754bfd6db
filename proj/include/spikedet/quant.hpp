#pragma once

#include <vector>

namespace spikedet {

// Signed fixed-point grid description. Values live on multiples of a
// power-of-two step and saturate at the signed `bits` range.
struct QuantSpec {
  int bits = 8;  // {8, 6}

  long qmax() const { return (1L << (bits - 1)) - 1; }
  long qmin() const { return -(1L << (bits - 1)); }
};

// Smallest power-of-two step whose grid covers [-max_abs, max_abs].
double quant_scale(double max_abs, const QuantSpec& spec);

// Round-half-to-even onto the grid, saturating at the signed range.
double quantize_value(double v, double scale, const QuantSpec& spec);

// Per-tensor scale derived from the tensor's own max |value|.
double tensor_scale(const std::vector<double>& t, const QuantSpec& spec);

void quantize_tensor(std::vector<double>& t, double scale, const QuantSpec& spec);

// Convenience: derive the scale, quantize in place, return the scale used.
double quantize_tensor(std::vector<double>& t, const QuantSpec& spec);

}  // namespace spikedet
