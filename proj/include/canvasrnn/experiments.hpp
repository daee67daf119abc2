#pragma once

#include <functional>
#include <string>
#include <vector>

#include "canvasrnn/data.hpp"
#include "canvasrnn/flops.hpp"
#include "canvasrnn/metrics.hpp"
#include "canvasrnn/model.hpp"
#include "canvasrnn/psd.hpp"

namespace canvasrnn {

// Runs fn(i) for i in [0, count) across up to CANVASRNN_THREADS workers.
// Callers aggregate results in index order, keeping reductions deterministic.
void parallel_for(int count, const std::function<void(int)>& fn);

// --- anytime inference (speed/accuracy curve) ---

struct AnytimeRow {
    int iteration = 0;
    double cumulative_flops = 0.0;
    double miou = 0.0;
};

std::vector<AnytimeRow> anytime_curve(SegModel& model, const std::vector<SegSample>& samples,
                                      int max_iters, int ignore_label = kIgnoreLabel);

// --- canvas perturbation ---

enum class PerturbMode { Zeros, WrongClass, GroundTruth };

PerturbMode perturb_mode_from_string(const std::string& name);

// Mean |logit| of the final canvas from a zeros start; used to scale
// injected perturbations.
double typical_logit_scale(SegModel& model, const SegSample& sample, int iterations);

// Canvas at feature resolution seeded from the ground-truth mask per mode.
Tensor make_initial_canvas(SegModel& model, const SegSample& sample, PerturbMode mode,
                           double scale);

struct PerturbRow {
    int iteration = 0;
    double agreement = 0.0;  // pixel agreement with the zeros-mode final prediction
};

std::vector<PerturbRow> perturb_experiment(SegModel& model, const SegSample& sample,
                                           PerturbMode mode, int iterations);

// Fraction of ground-truth interior pixels (holes of fine-structure shapes)
// labeled foreground at each iteration; tracks the fill-in failure mode.
std::vector<double> interior_fill_fraction(SegModel& model, const SegSample& sample,
                                           PerturbMode mode, int iterations);

// --- video seeding ---

struct VideoReport {
    std::vector<double> warm_miou;  // per frame
    std::vector<double> cold_miou;  // per frame, cold_iters each
    double warm_flops = 0.0;
    double cold_flops = 0.0;
    std::vector<IntMask> warm_labels;
};

VideoReport video_experiment(SegModel& model, const VideoSequence& video, int cold_iters,
                             int warm_iters, int ignore_label = kIgnoreLabel);

// --- plotting ---

struct SvgSeries {
    std::string label;
    std::vector<double> x, y;
};

void write_svg_lineplot(const std::string& path, const std::vector<SvgSeries>& series,
                        const std::string& x_label, const std::string& y_label);

}  // namespace canvasrnn
