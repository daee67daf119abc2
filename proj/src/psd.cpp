#include "canvasrnn/psd.hpp"

#include <cmath>
#include <complex>

namespace canvasrnn {

namespace {

// Row-column 1-D DFTs; O(n^2) per line is fine at the map sizes used here.
void dft_1d(const std::complex<double>* in, std::complex<double>* out, int n, int stride) {
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    for (int k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (int t = 0; t < n; ++t) {
            const double ang = -kTwoPi * k * t / n;
            acc += in[static_cast<std::size_t>(t) * stride] *
                   std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[static_cast<std::size_t>(k) * stride] = acc;
    }
}

}  // namespace

PsdResult power_spectral_density(const std::vector<double>& map, int h, int w) {
    if (h < 2 || w < 2) {
        throw ConfigError("power_spectral_density: input must be at least 2x2");
    }
    if (map.size() != static_cast<std::size_t>(h) * w) {
        throw ConfigError("power_spectral_density: data length does not match dims");
    }
    std::vector<std::complex<double>> field(map.begin(), map.end());
    std::vector<std::complex<double>> tmp(field.size());
    for (int y = 0; y < h; ++y) {
        dft_1d(field.data() + static_cast<std::size_t>(y) * w,
               tmp.data() + static_cast<std::size_t>(y) * w, w, 1);
    }
    for (int x = 0; x < w; ++x) {
        dft_1d(tmp.data() + x, field.data() + x, h, w);
    }

    const int max_fy = h / 2;
    const int max_fx = w / 2;
    const int n_bins =
        static_cast<int>(std::lround(std::sqrt(static_cast<double>(max_fy) * max_fy +
                                               static_cast<double>(max_fx) * max_fx))) + 1;
    PsdResult result;
    result.power.assign(n_bins, 0.0);
    const double norm = static_cast<double>(h) * w;
    for (int fy = 0; fy < h; ++fy) {
        const int cy = std::min(fy, h - fy);
        for (int fx = 0; fx < w; ++fx) {
            const int cx = std::min(fx, w - fx);
            const int bin = static_cast<int>(std::lround(
                std::sqrt(static_cast<double>(cy) * cy + static_cast<double>(cx) * cx)));
            const double p = std::norm(field[static_cast<std::size_t>(fy) * w + fx]) / norm;
            result.power[std::min(bin, n_bins - 1)] += p;
            result.total_power += p;
        }
    }
    result.cdf.assign(n_bins, 1.0);
    if (result.total_power > 0.0) {
        double acc = 0.0;
        for (int b = 0; b < n_bins; ++b) {
            acc += result.power[b];
            result.cdf[b] = acc / result.total_power;
        }
    }
    return result;
}

PsdResult power_spectral_density(const IntMask& mask, int cls) {
    std::vector<double> map(mask.v.size());
    for (std::size_t i = 0; i < mask.v.size(); ++i) {
        map[i] = mask.v[i] == cls ? 1.0 : 0.0;
    }
    return power_spectral_density(map, mask.h, mask.w);
}

}  // namespace canvasrnn
