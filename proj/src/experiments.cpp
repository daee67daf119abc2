#include "canvasrnn/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <mutex>
#include <thread>

#include "canvasrnn/ops.hpp"
#include "canvasrnn/util.hpp"

namespace canvasrnn {

void parallel_for(int count, const std::function<void(int)>& fn) {
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    if (const char* env = std::getenv("CANVASRNN_THREADS")) {
        threads = std::max(1, std::atoi(env));
    }
    threads = std::clamp(threads, 1, std::max(1, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t]() {
            try {
                for (int i = t; i < count; i += threads) {
                    fn(i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

std::vector<AnytimeRow> anytime_curve(SegModel& model, const std::vector<SegSample>& samples,
                                      int max_iters, int ignore_label) {
    if (samples.empty()) {
        throw ConfigError("anytime_curve: no samples");
    }
    const int K = model.config().classes;
    std::vector<std::vector<ConfusionMatrix>> per_sample(
        samples.size(), std::vector<ConfusionMatrix>(max_iters, ConfusionMatrix(K)));
    parallel_for(static_cast<int>(samples.size()), [&](int i) {
        Prediction pred = model.predict(samples[i].image, max_iters);
        for (int t = 0; t < max_iters; ++t) {
            per_sample[i][t].add(pred.labels[t], samples[i].label, ignore_label);
        }
    });
    std::vector<AnytimeRow> rows;
    const Shape& s = samples[0].image.shape();
    for (int t = 0; t < max_iters; ++t) {
        ConfusionMatrix cm(K);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            cm.merge(per_sample[i][t]);
        }
        AnytimeRow row;
        row.iteration = t + 1;
        row.cumulative_flops = estimate_flops(model.config(), s.h, s.w, t + 1).total;
        row.miou = miou(cm).mean;
        rows.push_back(row);
    }
    return rows;
}

PerturbMode perturb_mode_from_string(const std::string& name) {
    if (name == "zeros") return PerturbMode::Zeros;
    if (name == "wrong_class") return PerturbMode::WrongClass;
    if (name == "ground_truth") return PerturbMode::GroundTruth;
    throw ConfigError("unknown perturbation mode: " + name);
}

double typical_logit_scale(SegModel& model, const SegSample& sample, int iterations) {
    const Tensor final_canvas = model.run_canvas(sample.image, iterations);
    double acc = 0.0;
    for (double v : final_canvas.values()) {
        acc += std::abs(v);
    }
    return acc / static_cast<double>(final_canvas.size());
}

namespace {

// Ground-truth labels sampled at the align-corners feature grid.
IntMask label_at_feature_dims(const SegModel& model, const IntMask& label) {
    auto [fh, fw] = model.feature_dims(label.h, label.w);
    IntMask out(1, fh, fw);
    for (int y = 0; y < fh; ++y) {
        const int sy = fh > 1 ? static_cast<int>(std::lround(
                                    static_cast<double>(y) * (label.h - 1) / (fh - 1)))
                              : 0;
        for (int x = 0; x < fw; ++x) {
            const int sx = fw > 1 ? static_cast<int>(std::lround(
                                        static_cast<double>(x) * (label.w - 1) / (fw - 1)))
                                  : 0;
            out.at(0, y, x) = label.at(0, sy, sx);
        }
    }
    return out;
}

}  // namespace

Tensor make_initial_canvas(SegModel& model, const SegSample& sample, PerturbMode mode,
                           double scale) {
    auto [fh, fw] = model.feature_dims(sample.image.shape().h, sample.image.shape().w);
    const int K = model.config().classes;
    Tensor canvas(Shape{1, K, fh, fw});
    if (mode == PerturbMode::Zeros) {
        return canvas;
    }
    const IntMask coarse = label_at_feature_dims(model, sample.label);
    for (int y = 0; y < fh; ++y) {
        for (int x = 0; x < fw; ++x) {
            int cls = coarse.at(0, y, x);
            if (cls == kIgnoreLabel) cls = 0;
            if (mode == PerturbMode::WrongClass) {
                if (cls == 0) continue;  // background untouched
                const int wrong = K > 2 ? (cls % (K - 1)) + 1 : cls;
                canvas.at(0, wrong, y, x) = scale;
            } else {  // GroundTruth: one-hot at the trained logit scale
                canvas.at(0, cls, y, x) = scale;
            }
        }
    }
    return canvas;
}

std::vector<PerturbRow> perturb_experiment(SegModel& model, const SegSample& sample,
                                           PerturbMode mode, int iterations) {
    const Prediction baseline = model.predict(sample.image, iterations);
    const IntMask& reference = baseline.labels.back();
    const double scale = typical_logit_scale(model, sample, iterations);
    const Tensor init = make_initial_canvas(model, sample, mode, scale);
    Prediction perturbed = model.predict(sample.image, iterations, &init);
    std::vector<PerturbRow> rows;
    for (int t = 0; t < iterations; ++t) {
        std::size_t agree = 0;
        for (std::size_t i = 0; i < reference.v.size(); ++i) {
            if (perturbed.labels[t].v[i] == reference.v[i]) ++agree;
        }
        rows.push_back({t + 1, static_cast<double>(agree) / reference.v.size()});
    }
    return rows;
}

std::vector<double> interior_fill_fraction(SegModel& model, const SegSample& sample,
                                           PerturbMode mode, int iterations) {
    // Hole pixels: background in ground truth but not reachable from the
    // image border through background (interiors of rings/wheels/outlines).
    const IntMask& label = sample.label;
    std::vector<char> reachable(label.v.size(), 0);
    std::deque<std::pair<int, int>> queue;
    auto push = [&](int y, int x) {
        const std::size_t idx = static_cast<std::size_t>(y) * label.w + x;
        if (!reachable[idx] && label.at(0, y, x) == 0) {
            reachable[idx] = 1;
            queue.emplace_back(y, x);
        }
    };
    for (int x = 0; x < label.w; ++x) {
        push(0, x);
        push(label.h - 1, x);
    }
    for (int y = 0; y < label.h; ++y) {
        push(y, 0);
        push(y, label.w - 1);
    }
    while (!queue.empty()) {
        auto [y, x] = queue.front();
        queue.pop_front();
        if (y > 0) push(y - 1, x);
        if (y + 1 < label.h) push(y + 1, x);
        if (x > 0) push(y, x - 1);
        if (x + 1 < label.w) push(y, x + 1);
    }
    std::vector<std::size_t> holes;
    for (std::size_t i = 0; i < label.v.size(); ++i) {
        if (label.v[i] == 0 && !reachable[i]) {
            holes.push_back(i);
        }
    }
    const double scale = typical_logit_scale(model, sample, iterations);
    const Tensor init = make_initial_canvas(model, sample, mode, scale);
    const Prediction pred = model.predict(sample.image, iterations, &init);
    std::vector<double> fractions;
    for (int t = 0; t < iterations; ++t) {
        if (holes.empty()) {
            fractions.push_back(0.0);
            continue;
        }
        std::size_t filled = 0;
        for (std::size_t idx : holes) {
            if (pred.labels[t].v[idx] != 0) ++filled;
        }
        fractions.push_back(static_cast<double>(filled) / holes.size());
    }
    return fractions;
}

VideoReport video_experiment(SegModel& model, const VideoSequence& video, int cold_iters,
                             int warm_iters, int ignore_label) {
    if (video.frames.empty()) {
        throw ConfigError("video_experiment: empty sequence");
    }
    const int K = model.config().classes;
    std::vector<Tensor> frames;
    for (const SegSample& f : video.frames) {
        frames.push_back(f.image);
    }
    VideoReport report;
    report.warm_labels = model.segment_video(frames, cold_iters, warm_iters);
    for (std::size_t f = 0; f < frames.size(); ++f) {
        report.warm_miou.push_back(
            miou(report.warm_labels[f], video.frames[f].label, K, ignore_label).mean);
        const Prediction cold = model.predict(frames[f], cold_iters);
        report.cold_miou.push_back(
            miou(cold.labels.back(), video.frames[f].label, K, ignore_label).mean);
    }
    const Shape& s = frames[0].shape();
    const double cold_frame = estimate_flops(model.config(), s.h, s.w, cold_iters).total;
    const double warm_frame = estimate_flops(model.config(), s.h, s.w, warm_iters).total;
    report.cold_flops = cold_frame * static_cast<double>(frames.size());
    report.warm_flops = cold_frame + warm_frame * static_cast<double>(frames.size() - 1);
    return report;
}

void write_svg_lineplot(const std::string& path, const std::vector<SvgSeries>& series,
                        const std::string& x_label, const std::string& y_label) {
    const int width = 640, height = 420, margin = 50;
    double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
    for (const SvgSeries& s : series) {
        for (double v : s.x) {
            x_min = std::min(x_min, v);
            x_max = std::max(x_max, v);
        }
        for (double v : s.y) {
            y_min = std::min(y_min, v);
            y_max = std::max(y_max, v);
        }
    }
    if (x_max <= x_min) x_max = x_min + 1;
    if (y_max <= y_min) y_max = y_min + 1;
    auto px = [&](double x) {
        return margin + (x - x_min) / (x_max - x_min) * (width - 2 * margin);
    };
    auto py = [&](double y) {
        return height - margin - (y - y_min) / (y_max - y_min) * (height - 2 * margin);
    };
    const char* colors[] = {"#3465a4", "#cc0000", "#4e9a06", "#f57900", "#75507b"};
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        throw ConfigError("write_svg_lineplot: cannot open " + path);
    }
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
       << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
       << height - margin << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">"
       << x_label << "</text>\n";
    os << "<text x=\"14\" y=\"" << height / 2 << "\" transform=\"rotate(-90 14 " << height / 2
       << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        os << "<polyline fill=\"none\" stroke=\"" << colors[i % 5] << "\" points=\"";
        for (std::size_t j = 0; j < series[i].x.size(); ++j) {
            os << px(series[i].x[j]) << "," << py(series[i].y[j]) << " ";
        }
        os << "\"/>\n";
        os << "<text x=\"" << width - margin + 4 << "\" y=\"" << margin + 16 * i
           << "\" fill=\"" << colors[i % 5] << "\" font-size=\"11\">" << series[i].label
           << "</text>\n";
    }
    os << "</svg>\n";
}

}  // namespace canvasrnn
