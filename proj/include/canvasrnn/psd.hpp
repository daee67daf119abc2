#pragma once

#include <vector>

#include "canvasrnn/tensor.hpp"

namespace canvasrnn {

struct PsdResult {
    std::vector<double> power;  // radially binned spectral power
    std::vector<double> cdf;    // cumulative, normalized to 1 (all-zero input: 1 everywhere)
    double total_power = 0.0;   // equals the sum of squared pixel values (Parseval)
};

// 2-D DFT -> squared magnitude -> radial bins by integer spatial frequency.
// Every frequency lands in exactly one bin, so total power is conserved.
PsdResult power_spectral_density(const std::vector<double>& map, int h, int w);

PsdResult power_spectral_density(const IntMask& mask, int cls);

}  // namespace canvasrnn
