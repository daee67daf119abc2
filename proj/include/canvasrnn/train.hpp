#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "canvasrnn/data.hpp"
#include "canvasrnn/model.hpp"

namespace canvasrnn {

struct TrainConfig {
    double base_lr = 1e-3;
    double epsilon = 1e-6;  // learning-rate floor
    double power = 0.9;
    double momentum = 0.95;
    int total_steps = 2000;
    int batch_size = 4;
    int loss_iteration = 6;  // unroll depth N; single loss at the final canvas
    std::uint64_t seed = 0;
    bool nesterov = false;
    bool augment_crop = false;
    bool augment_flip = false;
    // With probability 1/2 per step, start the unroll from a perturbed
    // ground-truth canvas (random sub-feature shift, scale and noise)
    // instead of zeros and shorten the unroll to warm_iterations, so the
    // recurrence learns to refine an existing canvas in few steps as well
    // as draw one from scratch (video warm starts). The loss stays single
    // and final-iteration in both regimes.
    bool augment_canvas = false;
    int warm_iterations = 2;
    int checkpoint_interval = 0;  // 0 = only at the end
    int ignore_label = kIgnoreLabel;

    void validate() const;
};

// Polynomial decay: (base_lr - epsilon) * (1 - step/total)^power + epsilon.
double lr_at(const TrainConfig& cfg, int step);

// Classical (heavy-ball) momentum: v <- momentum*v + g; p <- p - lr*v.
// Nesterov applies p <- p - lr*(momentum*v + g) after the velocity update.
void sgd_momentum_step(std::vector<double>& params, const std::vector<double>& grads,
                       std::vector<double>& velocity, double lr, double momentum,
                       bool nesterov = false);

struct TrainPoint {
    int step = 0;
    double lr = 0;
    double loss = 0;
};

struct TrainResult {
    std::vector<TrainPoint> curve;
    bool diverged = false;
    int steps_done = 0;
};

// Per step: sample a batch, unroll loss_iteration canvas updates, apply the
// softmax cross-entropy to the final upsampled canvas only, backprop, SGD
// with momentum at the scheduled rate. Deterministic given the seed.
TrainResult train(SegModel& model, const std::vector<SegSample>& dataset, const TrainConfig& cfg,
                  const std::function<void(int, SegModel&)>& checkpoint_cb = {});

}  // namespace canvasrnn
