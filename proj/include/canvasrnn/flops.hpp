#pragma once

#include <string>
#include <utility>
#include <vector>

#include "canvasrnn/model.hpp"

namespace canvasrnn {

// Analytic cost model. Convention: one multiply-accumulate = 1 FLOP; bias,
// normalization and nonlinearity costs are tracked as separate pointwise
// terms (well under 1% at reference scale).
struct FlopEstimate {
    std::vector<std::pair<std::string, double>> terms;

    double encoder_total = 0.0;    // per image, iteration-independent
    double per_iteration = 0.0;    // marginal cost of one more RNN iteration
    double upsample = 0.0;         // final prediction upsample + argmax
    double pointwise_per_iteration = 0.0;  // included in per_iteration
    double encoder_pointwise = 0.0;        // included in encoder_total
    int iterations = 0;
    double total = 0.0;  // encoder_total + iterations*per_iteration + upsample
};

FlopEstimate estimate_flops(const ModelConfig& cfg, int image_h, int image_w, int iterations);

// Multi-scale evaluation: sum of single-pass totals over the scaled (and
// optionally mirrored) copies, plus the final logit average.
FlopEstimate estimate_flops_multiscale(const ModelConfig& cfg, int image_h, int image_w,
                                       int iterations, const std::vector<double>& scales,
                                       bool flips);

// Reference-scale reference configuration used for cost reconciliation only
// (never executed): 2048-channel features at stride 16, 21 classes,
// RNN widths 512/256.
ModelConfig reference_scale_config();

std::string flops_to_json(const FlopEstimate& est);

}  // namespace canvasrnn
