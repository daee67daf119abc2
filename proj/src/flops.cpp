#include "canvasrnn/flops.hpp"

#include <cstdio>

#include <json.hpp>

namespace canvasrnn {

namespace {

struct Dims {
    int h, w;
};

Dims after_stride(Dims d, int stride) {
    return {(d.h + stride - 1) / stride, (d.w + stride - 1) / stride};
}

}  // namespace

FlopEstimate estimate_flops(const ModelConfig& cfg, int image_h, int image_w, int iterations) {
    cfg.validate();
    if (iterations < 1) {
        throw ConfigError("estimate_flops: iterations must be >= 1");
    }
    FlopEstimate est;
    est.iterations = iterations;

    // Encoder: strided 3x3 stages then the dilated trio at constant width.
    Dims d{image_h, image_w};
    const auto strides = cfg.encoder.stage_strides();
    int c_in = 3;
    int layer = 0;
    auto conv_term = [&](const std::string& name, int c_out, int stride) {
        d = after_stride(d, stride);
        const double macs =
            static_cast<double>(d.h) * d.w * c_out * c_in * 9.0;
        const double pointwise = static_cast<double>(d.h) * d.w * c_out *
                                 (cfg.batch_norm ? 4.0 : 2.0);  // bias+relu (+bn scale/shift)
        est.terms.emplace_back(name + ".conv", macs);
        est.terms.emplace_back(name + ".pointwise", pointwise);
        est.encoder_total += macs + pointwise;
        est.encoder_pointwise += pointwise;
        c_in = c_out;
    };
    for (std::size_t s = 0; s < cfg.encoder.widths.size(); ++s) {
        conv_term("encoder.stage" + std::to_string(layer++), cfg.encoder.widths[s], strides[s]);
    }
    for (std::size_t i = 0; i < cfg.encoder.dilations.size(); ++i) {
        conv_term("encoder.dilated" + std::to_string(i), cfg.encoder.widths.back(), 1);
    }

    // RNN head at feature resolution. Each ConvLSTM cell runs 8 convolutions
    // (4 gates x {input, hidden}) plus pointwise gate arithmetic.
    const double positions = static_cast<double>(d.h) * d.w;
    const int feat = cfg.encoder.feature_channels();
    const int k = 1;
    struct CellDims {
        int c_in, c_out;
    };
    const CellDims cells[3] = {{feat + cfg.classes, cfg.rnn_width1},
                               {cfg.rnn_width1, cfg.rnn_width2},
                               {cfg.rnn_width2, cfg.classes}};
    for (int i = 0; i < 3; ++i) {
        const double x_macs = positions * 4.0 * cells[i].c_in * cells[i].c_out * k * k;
        const double h_macs = positions * 4.0 * cells[i].c_out * cells[i].c_out * k * k;
        // per gate: conv sum + bias + activation; cell mix and output tap
        const double pointwise = positions * cells[i].c_out * 18.0;
        est.terms.emplace_back("rnn.layer" + std::to_string(i) + ".x_convs", x_macs);
        est.terms.emplace_back("rnn.layer" + std::to_string(i) + ".h_convs", h_macs);
        est.terms.emplace_back("rnn.layer" + std::to_string(i) + ".pointwise", pointwise);
        est.per_iteration += x_macs + h_macs + pointwise;
        est.pointwise_per_iteration += pointwise;
    }
    const double canvas_add = positions * cfg.classes;
    est.terms.emplace_back("canvas.add", canvas_add);
    est.per_iteration += canvas_add;

    // Final prediction: bilinear upsample of K logit maps plus argmax.
    est.upsample = static_cast<double>(image_h) * image_w * cfg.classes * 8.0 +
                   static_cast<double>(image_h) * image_w * cfg.classes;
    est.terms.emplace_back("upsample_argmax", est.upsample);

    est.total = est.encoder_total + iterations * est.per_iteration + est.upsample;
    return est;
}

FlopEstimate estimate_flops_multiscale(const ModelConfig& cfg, int image_h, int image_w,
                                       int iterations, const std::vector<double>& scales,
                                       bool flips) {
    if (scales.empty()) {
        throw ConfigError("estimate_flops_multiscale: empty scale list");
    }
    FlopEstimate est;
    est.iterations = iterations;
    const int passes_per_scale = flips ? 2 : 1;
    for (double scale : scales) {
        const int th = snap_crop_size(scale * image_h);
        const int tw = snap_crop_size(scale * image_w);
        const FlopEstimate single = estimate_flops(cfg, th, tw, iterations);
        char label[64];
        std::snprintf(label, sizeof(label), "scale_%.2f", scale);
        est.terms.emplace_back(label, single.total * passes_per_scale);
        est.total += single.total * passes_per_scale;
        est.encoder_total += single.encoder_total * passes_per_scale;
        est.per_iteration += single.per_iteration * passes_per_scale;
    }
    // Averaging the per-scale logit maps at native resolution.
    const double average = static_cast<double>(image_h) * image_w * cfg.classes *
                           (scales.size() * passes_per_scale);
    est.terms.emplace_back("logit_average", average);
    est.total += average;
    return est;
}

ModelConfig reference_scale_config() {
    ModelConfig cfg;
    cfg.encoder.widths = {64, 128, 512, 2048};
    cfg.encoder.output_stride = 16;
    cfg.encoder.dilations = {2, 4, 8};
    cfg.classes = 21;
    cfg.rnn_width1 = 512;
    cfg.rnn_width2 = 256;
    cfg.iterations = 6;
    cfg.crop_size = 513;
    return cfg;
}

std::string flops_to_json(const FlopEstimate& est) {
    nlohmann::json j;
    j["convention"] = "1 multiply-accumulate = 1 FLOP";
    j["iterations"] = est.iterations;
    j["encoder_total"] = est.encoder_total;
    j["encoder_pointwise"] = est.encoder_pointwise;
    j["per_iteration"] = est.per_iteration;
    j["pointwise_per_iteration"] = est.pointwise_per_iteration;
    j["upsample"] = est.upsample;
    j["total"] = est.total;
    nlohmann::json terms = nlohmann::json::object();
    for (const auto& [name, value] : est.terms) {
        terms[name] = value;
    }
    j["terms"] = terms;
    return j.dump(2);
}

}  // namespace canvasrnn
