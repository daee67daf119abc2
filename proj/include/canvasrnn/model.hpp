#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "canvasrnn/convlstm.hpp"
#include "canvasrnn/ops.hpp"
#include "canvasrnn/tensor.hpp"

namespace canvasrnn {

struct EncoderConfig {
    std::vector<int> widths{8, 16, 32, 32};  // per-stage channel widths
    int output_stride = 8;                   // 8 or 16
    std::vector<int> dilations{2, 4, 8};     // final-stage dilated convs

    int feature_channels() const { return widths.back(); }
    std::vector<int> stage_strides() const;
    void validate() const;
};

// Per-pixel per-class logit map at feature resolution, updated additively.
struct Canvas {
    Tensor logits;
    int iteration = 0;
};

struct ModelConfig {
    EncoderConfig encoder;
    int classes = 4;
    int rnn_width1 = 64;
    int rnn_width2 = 32;
    int iterations = 6;  // training horizon N
    int crop_size = 65;  // must be 1 (mod 32)
    std::uint64_t seed = 1;
    bool batch_norm = false;             // true batch norm in the encoder
    bool carry_state_across_frames = false;  // video mode: keep LSTM h/c between frames

    void validate() const;
};

struct EncoderLayer {
    Tensor kernel;
    Tensor bias;
    int stride = 1;
    int dilation = 1;
    Tensor bn_gamma, bn_beta;              // used when batch norm is enabled
    std::vector<double> bn_mean, bn_var;   // running statistics (buffers)
};

struct Prediction {
    std::vector<Tensor> canvases;  // canvas logits after each iteration
    std::vector<IntMask> labels;   // upsampled argmax per iteration
    ConvLstmState final_states[3];
};

struct IterateResult {
    Canvas canvas;
    std::vector<ConvLstmState> states;
    Tensor rnn_output;  // layer-3 output added to the canvas this step
};

class SegModel {
public:
    explicit SegModel(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }

    // Feature extraction; requires (h-1) and (w-1) divisible by 32.
    Tensor encode(const Tensor& image, bool training = false);

    // One canvas update: concat(features, canvas) -> 3 stacked ConvLSTMs,
    // layer-3 output added to the canvas.
    IterateResult iterate(const Tensor& features, const Canvas& canvas,
                          const std::vector<ConvLstmState>& states);

    Prediction predict(const Tensor& image, int iterations,
                       const Tensor* initial_canvas = nullptr);

    // Multi-scale evaluation: resample, run, upsample logits to native
    // resolution, average (with un-flipped mirrored copies), argmax.
    IntMask predict_multiscale(const Tensor& image, const std::vector<double>& scales, bool flips,
                               int iterations);

    // Video: frame 0 runs cold_iters from a zero canvas; later frames seed
    // the canvas with the previous frame's final logits and run warm_iters.
    std::vector<IntMask> segment_video(const std::vector<Tensor>& frames, int cold_iters = 6,
                                       int warm_iters = 2);

    // Final canvas logits of the unrolled recurrence (training path: call
    // with parameters watched on a graph). Intermediate canvases are
    // appended to canvases_out when provided.
    Tensor run_canvas(const Tensor& image, int iterations, const Tensor* initial_canvas = nullptr,
                      std::vector<Tensor>* canvases_out = nullptr, bool training = false,
                      std::vector<IterateResult>* steps_out = nullptr);

    void for_each_param(const std::function<void(const std::string&, Tensor&)>& fn);
    std::size_t num_trainable_values();

    std::vector<EncoderLayer>& encoder_layers() { return encoder_; }
    ConvLstmParams& rnn_layer(int i) { return rnn_[i]; }

    // Spatial size of the feature map / canvas for a given input size.
    std::pair<int, int> feature_dims(int h, int w) const;

private:
    ModelConfig cfg_;
    std::vector<EncoderLayer> encoder_;
    ConvLstmParams rnn_[3];
};

// Rounds a scaled size to the nearest valid crop size (1 mod 32, >= 33).
int snap_crop_size(double scaled);

// Mean |logit| the carried video canvas is rescaled to before each warm
// frame; the per-frame canvas sum would otherwise grow without bound.
constexpr double kWarmSeedScale = 1.0;

// Scales the logits so their mean absolute value equals target (no-op for
// an all-zero canvas).
Tensor renormalize_canvas(const Tensor& logits, double target);

}  // namespace canvasrnn
