#include "canvasrnn/train.hpp"

#include <algorithm>
#include <cmath>

#include "canvasrnn/ops.hpp"
#include "canvasrnn/util.hpp"

namespace canvasrnn {

void TrainConfig::validate() const {
    if (base_lr <= 0 || epsilon < 0 || epsilon > base_lr) {
        throw ConfigError("TrainConfig: need 0 <= epsilon <= base_lr");
    }
    if (momentum < 0 || momentum >= 1) {
        throw ConfigError("TrainConfig: momentum must be in [0,1)");
    }
    if (total_steps < 1 || batch_size < 1 || loss_iteration < 1 || warm_iterations < 1) {
        throw ConfigError("TrainConfig: steps, batch size and loss iteration must be positive");
    }
}

double lr_at(const TrainConfig& cfg, int step) {
    if (step < 0 || step > cfg.total_steps) {
        throw ConfigError("lr_at: step " + std::to_string(step) + " outside [0," +
                          std::to_string(cfg.total_steps) + "]");
    }
    const double frac = 1.0 - static_cast<double>(step) / cfg.total_steps;
    return (cfg.base_lr - cfg.epsilon) * std::pow(frac, cfg.power) + cfg.epsilon;
}

void sgd_momentum_step(std::vector<double>& params, const std::vector<double>& grads,
                       std::vector<double>& velocity, double lr, double momentum, bool nesterov) {
    if (params.size() != grads.size() || params.size() != velocity.size()) {
        throw ConfigError("sgd_momentum_step: size mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw NumericError("sgd_momentum_step: non-finite gradient at index " +
                               std::to_string(i));
        }
        velocity[i] = momentum * velocity[i] + grads[i];
        params[i] -= lr * (nesterov ? momentum * velocity[i] + grads[i] : velocity[i]);
    }
}

namespace {

// Assembles (B,3,h,w) image and (B,h,w) label batch from dataset indices,
// with optional random crop to crop_size and left-right flip.
void make_batch(const std::vector<SegSample>& dataset, const std::vector<int>& indices,
                const TrainConfig& cfg, int crop_size, Rng& rng, Tensor& images, IntMask& labels) {
    const Shape& s0 = dataset[indices[0]].image.shape();
    const int B = static_cast<int>(indices.size());
    const int out_h = cfg.augment_crop ? std::min(s0.h, crop_size) : s0.h;
    const int out_w = cfg.augment_crop ? std::min(s0.w, crop_size) : s0.w;
    images = Tensor(Shape{B, 3, out_h, out_w});
    labels = IntMask(B, out_h, out_w);
    for (int b = 0; b < B; ++b) {
        const SegSample& sample = dataset[indices[b]];
        if (!(sample.image.shape() == s0)) {
            throw ConfigError("train: samples must share one size");
        }
        const int oy = out_h < s0.h ? rng.uniform_int(0, s0.h - out_h) : 0;
        const int ox = out_w < s0.w ? rng.uniform_int(0, s0.w - out_w) : 0;
        const bool flip = cfg.augment_flip && rng.uniform() < 0.5;
        for (int c = 0; c < 3; ++c) {
            for (int y = 0; y < out_h; ++y) {
                for (int x = 0; x < out_w; ++x) {
                    const int sx = ox + (flip ? out_w - 1 - x : x);
                    images.at(b, c, y, x) = sample.image.at(0, c, oy + y, sx);
                }
            }
        }
        for (int y = 0; y < out_h; ++y) {
            for (int x = 0; x < out_w; ++x) {
                const int sx = ox + (flip ? out_w - 1 - x : x);
                labels.at(b, y, x) = sample.label.at(0, oy + y, sx);
            }
        }
    }
}

// Perturbed ground-truth canvas at feature resolution: per batch item a
// random pixel shift, a random logit scale and additive noise. Labels are
// sampled nearest at the align-corners feature grid; ignored pixels stay 0.
Tensor seeded_canvas(SegModel& model, const IntMask& labels, int classes, int ignore_label,
                     Rng& rng) {
    const int B = labels.n, h = labels.h, w = labels.w;
    const auto [fh, fw] = model.feature_dims(h, w);
    Tensor canvas(Shape{B, classes, fh, fw});
    for (int b = 0; b < B; ++b) {
        const int dy = rng.uniform_int(-3, 3);
        const int dx = rng.uniform_int(-3, 3);
        const double scale = rng.uniform(1.0, 5.0);
        const double noise = rng.uniform(0.0, 1.0);
        for (int fy = 0; fy < fh; ++fy) {
            for (int fx = 0; fx < fw; ++fx) {
                const int y = std::clamp(
                    static_cast<int>(std::lround(fy * double(h - 1) / (fh - 1))) + dy, 0, h - 1);
                const int x = std::clamp(
                    static_cast<int>(std::lround(fx * double(w - 1) / (fw - 1))) + dx, 0, w - 1);
                const int l = labels.at(b, y, x);
                for (int c = 0; c < classes; ++c) {
                    canvas.at(b, c, fy, fx) =
                        (l != ignore_label && l == c ? scale : 0.0) + noise * rng.normal();
                }
            }
        }
    }
    return canvas;
}

}  // namespace

TrainResult train(SegModel& model, const std::vector<SegSample>& dataset, const TrainConfig& cfg,
                  const std::function<void(int, SegModel&)>& checkpoint_cb) {
    cfg.validate();
    if (dataset.empty()) {
        throw ConfigError("train: dataset is empty");
    }
    Rng rng(Rng::substream(cfg.seed, 0xA11C));
    std::map<std::string, std::vector<double>> velocity;
    model.for_each_param([&](const std::string& name, Tensor& t) {
        velocity[name].assign(t.size(), 0.0);
    });

    TrainResult result;
    for (int step = 0; step < cfg.total_steps; ++step) {
        std::vector<int> indices(cfg.batch_size);
        for (int& idx : indices) {
            idx = rng.uniform_int(0, static_cast<int>(dataset.size()) - 1);
        }
        Tensor images;
        IntMask labels;
        make_batch(dataset, indices, cfg, model.config().crop_size, rng, images, labels);

        Tensor init_canvas;
        const Tensor* init_ptr = nullptr;
        int unroll = cfg.loss_iteration;
        if (cfg.augment_canvas && rng.uniform() < 0.5) {
            init_canvas =
                seeded_canvas(model, labels, model.config().classes, cfg.ignore_label, rng);
            init_ptr = &init_canvas;
            unroll = cfg.warm_iterations;
        }

        Graph graph;
        model.for_each_param([&](const std::string&, Tensor& t) { graph.watch(t); });
        double loss_value;
        try {
            const Tensor final_canvas =
                model.run_canvas(images, unroll, init_ptr, nullptr, /*training=*/true);
            const Tensor upsampled =
                bilinear_upsample(final_canvas, images.shape().h, images.shape().w);
            const Tensor loss = softmax_cross_entropy(upsampled, labels, cfg.ignore_label);
            loss_value = loss.values()[0];
            if (!std::isfinite(loss_value)) {
                throw NumericError("train: loss diverged at step " + std::to_string(step));
            }
            graph.backward(loss);
            const double lr = lr_at(cfg, step);
            model.for_each_param([&](const std::string& name, Tensor& t) {
                sgd_momentum_step(t.values(), graph.grad(t), velocity[name], lr, cfg.momentum,
                                  cfg.nesterov);
            });
        } catch (const NumericError&) {
            model.for_each_param([&](const std::string&, Tensor& t) { t.detach(); });
            result.diverged = true;
            result.steps_done = step;
            return result;
        }
        model.for_each_param([&](const std::string&, Tensor& t) { t.detach(); });
        result.curve.push_back({step, lr_at(cfg, step), loss_value});
        if (checkpoint_cb && cfg.checkpoint_interval > 0 &&
            (step + 1) % cfg.checkpoint_interval == 0) {
            checkpoint_cb(step + 1, model);
        }
    }
    result.steps_done = cfg.total_steps;
    if (checkpoint_cb) {
        checkpoint_cb(cfg.total_steps, model);
    }
    return result;
}

}  // namespace canvasrnn
