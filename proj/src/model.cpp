#include "canvasrnn/model.hpp"

#include <cmath>

#include "canvasrnn/util.hpp"

namespace canvasrnn {

std::vector<int> EncoderConfig::stage_strides() const {
    if (output_stride == 16) {
        return {2, 2, 2, 2};
    }
    if (output_stride == 8) {
        return {2, 2, 2, 1};
    }
    throw ConfigError("EncoderConfig: output stride must be 8 or 16, got " +
                      std::to_string(output_stride));
}

void EncoderConfig::validate() const {
    if (widths.size() != 4) {
        throw ConfigError("EncoderConfig: exactly four stage widths expected, got " +
                          std::to_string(widths.size()));
    }
    for (int w : widths) {
        if (w <= 0) throw ConfigError("EncoderConfig: stage widths must be positive");
    }
    stage_strides();  // validates output_stride
    for (int d : dilations) {
        if (d <= 0) throw ConfigError("EncoderConfig: dilations must be positive");
    }
}

void ModelConfig::validate() const {
    encoder.validate();
    if (classes < 2) {
        throw ConfigError("ModelConfig: at least 2 classes required");
    }
    if (rnn_width1 <= 0 || rnn_width2 <= 0) {
        throw ConfigError("ModelConfig: RNN widths must be positive");
    }
    if (iterations < 1) {
        throw ConfigError("ModelConfig: iteration count must be >= 1");
    }
    if (crop_size < 33 || crop_size % 32 != 1) {
        throw ConfigError("ModelConfig: crop size must be a multiple of 32 plus one, got " +
                          std::to_string(crop_size));
    }
}

int snap_crop_size(double scaled) {
    int k = static_cast<int>(std::lround((scaled - 1.0) / 32.0));
    if (k < 1) k = 1;
    return k * 32 + 1;
}

Tensor renormalize_canvas(const Tensor& logits, double target) {
    Tensor out = logits;
    double mean_abs = 0.0;
    for (double v : out.values()) mean_abs += std::abs(v);
    mean_abs /= static_cast<double>(out.size());
    if (mean_abs > 0.0) {
        const double k = target / mean_abs;
        for (double& v : out.values()) v *= k;
    }
    return out;
}

namespace {

Tensor glorot_conv_kernel(int c_out, int c_in, int k, Rng& rng) {
    Tensor t(Shape{c_out, c_in, k, k});
    const double stddev =
        std::sqrt(2.0 / (static_cast<double>(c_in) * k * k + static_cast<double>(c_out) * k * k));
    for (double& v : t.values()) {
        v = stddev * rng.normal();
    }
    return t;
}

}  // namespace

SegModel::SegModel(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const auto strides = cfg_.encoder.stage_strides();
    int c_in = 3;
    int layer_index = 0;
    auto make_layer = [&](int c_out, int stride, int dilation) {
        Rng rng(Rng::substream(cfg_.seed, layer_index++));
        EncoderLayer layer;
        layer.kernel = glorot_conv_kernel(c_out, c_in, 3, rng);
        layer.bias = Tensor(Shape{1, c_out, 1, 1});
        layer.stride = stride;
        layer.dilation = dilation;
        if (cfg_.batch_norm) {
            layer.bn_gamma = Tensor(Shape{1, c_out, 1, 1}, 1.0);
            layer.bn_beta = Tensor(Shape{1, c_out, 1, 1});
            layer.bn_mean.assign(c_out, 0.0);
            layer.bn_var.assign(c_out, 1.0);
        }
        encoder_.push_back(std::move(layer));
        c_in = c_out;
    };
    for (std::size_t s = 0; s < cfg_.encoder.widths.size(); ++s) {
        make_layer(cfg_.encoder.widths[s], strides[s], 1);
    }
    for (int d : cfg_.encoder.dilations) {
        make_layer(cfg_.encoder.widths.back(), 1, d);
    }

    const int feat = cfg_.encoder.feature_channels();
    rnn_[0] = ConvLstmParams::init(feat + cfg_.classes, cfg_.rnn_width1,
                                   Rng::substream(cfg_.seed, 100));
    rnn_[1] = ConvLstmParams::init(cfg_.rnn_width1, cfg_.rnn_width2, Rng::substream(cfg_.seed, 101));
    // Third layer width equals the class count: its output is the canvas update.
    rnn_[2] = ConvLstmParams::init(cfg_.rnn_width2, cfg_.classes, Rng::substream(cfg_.seed, 102));
}

std::pair<int, int> SegModel::feature_dims(int h, int w) const {
    for (int s : cfg_.encoder.stage_strides()) {
        h = (h + s - 1) / s;
        w = (w + s - 1) / s;
    }
    return {h, w};
}

Tensor SegModel::encode(const Tensor& image, bool training) {
    const Shape& s = image.shape();
    if (s.c != 3) {
        throw ConfigError("encode: expected 3-channel image, got " + s.str());
    }
    if ((s.h - 1) % 32 != 0 || (s.w - 1) % 32 != 0) {
        throw ConfigError("encode: input size " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                          " must be a multiple of 32 plus one");
    }
    // Fixed per-channel input normalization; batch norm (when enabled)
    // normalizes the interior activations.
    Tensor x = scale(add_scalar(image, -0.5), 2.0);
    for (EncoderLayer& layer : encoder_) {
        x = conv2d(x, layer.kernel, layer.bias, layer.stride, layer.dilation, Padding::Same);
        if (cfg_.batch_norm) {
            if (training) {
                std::vector<double> mean, var;
                x = batch_norm(x, layer.bn_gamma, layer.bn_beta, 1e-5, &mean, &var);
                for (std::size_t c = 0; c < mean.size(); ++c) {
                    layer.bn_mean[c] = 0.9 * layer.bn_mean[c] + 0.1 * mean[c];
                    layer.bn_var[c] = 0.9 * layer.bn_var[c] + 0.1 * var[c];
                }
            } else {
                x = batch_norm_inference(x, layer.bn_gamma, layer.bn_beta, layer.bn_mean,
                                         layer.bn_var, 1e-5);
            }
        }
        x = relu(x);
    }
    return x;
}

IterateResult SegModel::iterate(const Tensor& features, const Canvas& canvas,
                                const std::vector<ConvLstmState>& states) {
    if (canvas.logits.shape().c != cfg_.classes) {
        throw ConfigError("iterate: canvas has " + std::to_string(canvas.logits.shape().c) +
                          " classes, model expects " + std::to_string(cfg_.classes));
    }
    if (canvas.logits.shape().h != features.shape().h ||
        canvas.logits.shape().w != features.shape().w) {
        throw ConfigError("iterate: canvas " + canvas.logits.shape().str() +
                          " does not match features " + features.shape().str());
    }
    IterateResult result;
    const Tensor x = concat_channels(features, canvas.logits);
    result.states.resize(3);
    result.states[0] = lstm_step(rnn_[0], states[0], x);
    result.states[1] = lstm_step(rnn_[1], states[1], result.states[0].h);
    result.states[2] = lstm_step(rnn_[2], states[2], result.states[1].h);
    result.rnn_output = result.states[2].h;
    result.canvas.logits = add(canvas.logits, result.rnn_output);
    result.canvas.iteration = canvas.iteration + 1;
    return result;
}

Tensor SegModel::run_canvas(const Tensor& image, int iterations, const Tensor* initial_canvas,
                            std::vector<Tensor>* canvases_out, bool training,
                            std::vector<IterateResult>* steps_out) {
    if (iterations < 1) {
        throw ConfigError("run_canvas: iterations must be >= 1");
    }
    const Tensor features = encode(image, training);
    const Shape fs = features.shape();
    Canvas canvas;
    if (initial_canvas != nullptr) {
        if (initial_canvas->shape().h != fs.h || initial_canvas->shape().w != fs.w ||
            initial_canvas->shape().c != cfg_.classes) {
            throw ConfigError("run_canvas: initial canvas " + initial_canvas->shape().str() +
                              " does not match feature dims " + fs.str());
        }
        canvas.logits = *initial_canvas;
        canvas.logits.detach();
    } else {
        canvas.logits = Tensor(Shape{fs.n, cfg_.classes, fs.h, fs.w});
    }
    std::vector<ConvLstmState> states{
        ConvLstmState::zeros(fs.n, cfg_.rnn_width1, fs.h, fs.w),
        ConvLstmState::zeros(fs.n, cfg_.rnn_width2, fs.h, fs.w),
        ConvLstmState::zeros(fs.n, cfg_.classes, fs.h, fs.w),
    };
    for (int t = 0; t < iterations; ++t) {
        IterateResult step = iterate(features, canvas, states);
        canvas = step.canvas;
        states = step.states;
        if (canvases_out != nullptr) {
            canvases_out->push_back(canvas.logits);
        }
        if (steps_out != nullptr) {
            steps_out->push_back(std::move(step));
        }
    }
    return canvas.logits;
}

Prediction SegModel::predict(const Tensor& image, int iterations, const Tensor* initial_canvas) {
    Prediction pred;
    std::vector<IterateResult> steps;
    run_canvas(image, iterations, initial_canvas, &pred.canvases, false, &steps);
    for (const Tensor& canvas : pred.canvases) {
        Tensor up = bilinear_upsample(canvas, image.shape().h, image.shape().w);
        pred.labels.push_back(argmax_channels(up));
    }
    for (int i = 0; i < 3; ++i) {
        pred.final_states[i] = steps.back().states[i];
    }
    return pred;
}

IntMask SegModel::predict_multiscale(const Tensor& image, const std::vector<double>& scales,
                                     bool flips, int iterations) {
    if (scales.empty()) {
        throw ConfigError("predict_multiscale: empty scale list");
    }
    const int h = image.shape().h;
    const int w = image.shape().w;
    Tensor accum(Shape{image.shape().n, cfg_.classes, h, w});
    int passes = 0;
    for (double scale : scales) {
        const int th = snap_crop_size(scale * h);
        const int tw = snap_crop_size(scale * w);
        const Tensor scaled = resize_bilinear(image, th, tw);
        auto run_pass = [&](const Tensor& img, bool flipped) {
            Tensor logits = run_canvas(img, iterations);
            Tensor native = resize_bilinear(logits, h, w);
            if (flipped) {
                native = flip_horizontal(native);
            }
            for (std::size_t i = 0; i < accum.size(); ++i) {
                accum.values()[i] += native.values()[i];
            }
            ++passes;
        };
        run_pass(scaled, false);
        if (flips) {
            run_pass(flip_horizontal(scaled), true);
        }
    }
    for (double& v : accum.values()) {
        v /= passes;
    }
    return argmax_channels(accum);
}

std::vector<IntMask> SegModel::segment_video(const std::vector<Tensor>& frames, int cold_iters,
                                             int warm_iters) {
    if (frames.empty()) {
        throw ConfigError("segment_video: empty sequence");
    }
    std::vector<IntMask> out;
    Tensor prev_canvas;
    std::vector<ConvLstmState> carried_states;
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const Tensor& frame = frames[f];
        if (frame.shape().h != frames[0].shape().h || frame.shape().w != frames[0].shape().w) {
            throw ConfigError("segment_video: frames must share one size");
        }
        const Tensor features = encode(frame, false);
        const Shape fs = features.shape();
        Canvas canvas;
        if (f == 0) {
            canvas.logits = Tensor(Shape{fs.n, cfg_.classes, fs.h, fs.w});
        } else {
            canvas.logits = renormalize_canvas(prev_canvas, kWarmSeedScale);
        }
        std::vector<ConvLstmState> states;
        if (f > 0 && cfg_.carry_state_across_frames) {
            states = carried_states;
        } else {
            states = {ConvLstmState::zeros(fs.n, cfg_.rnn_width1, fs.h, fs.w),
                      ConvLstmState::zeros(fs.n, cfg_.rnn_width2, fs.h, fs.w),
                      ConvLstmState::zeros(fs.n, cfg_.classes, fs.h, fs.w)};
        }
        const int iters = (f == 0) ? cold_iters : warm_iters;
        for (int t = 0; t < iters; ++t) {
            IterateResult step = iterate(features, canvas, states);
            canvas = step.canvas;
            states = step.states;
        }
        prev_canvas = canvas.logits;
        carried_states = states;
        Tensor up = bilinear_upsample(canvas.logits, frame.shape().h, frame.shape().w);
        out.push_back(argmax_channels(up));
    }
    return out;
}

void SegModel::for_each_param(const std::function<void(const std::string&, Tensor&)>& fn) {
    for (std::size_t i = 0; i < encoder_.size(); ++i) {
        const std::string prefix = "encoder." + std::to_string(i);
        fn(prefix + ".kernel", encoder_[i].kernel);
        fn(prefix + ".bias", encoder_[i].bias);
        if (cfg_.batch_norm) {
            fn(prefix + ".bn_gamma", encoder_[i].bn_gamma);
            fn(prefix + ".bn_beta", encoder_[i].bn_beta);
        }
    }
    for (int i = 0; i < 3; ++i) {
        rnn_[i].for_each("rnn." + std::to_string(i), fn);
    }
}

std::size_t SegModel::num_trainable_values() {
    std::size_t total = 0;
    for_each_param([&](const std::string&, Tensor& t) { total += t.size(); });
    return total;
}

}  // namespace canvasrnn
