// Command-line driver: train / anytime / video / perturb / flops / psd / gen-data.
// Every subcommand reads a JSON config, is deterministic given (config, seed),
// and writes its outputs plus a manifest.json under the output directory.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "canvasrnn/checkpoint.hpp"
#include "canvasrnn/data.hpp"
#include "canvasrnn/experiments.hpp"
#include "canvasrnn/flops.hpp"
#include "canvasrnn/metrics.hpp"
#include "canvasrnn/model.hpp"
#include "canvasrnn/psd.hpp"
#include "canvasrnn/train.hpp"
#include "canvasrnn/util.hpp"

namespace fs = std::filesystem;
using canvasrnn::ConfigError;
using canvasrnn::NumericError;
using json = nlohmann::json;

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

void check_keys(const json& j, const std::string& context,
                std::initializer_list<const char*> allowed) {
    if (!j.is_object()) {
        throw ConfigError("config: '" + context + "' must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) {
            if (key == a) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            throw ConfigError("config: unknown key '" + key + "' in " + context);
        }
    }
}

json load_config(const CommonArgs& args, std::initializer_list<const char*> allowed) {
    std::ifstream is(args.config_path);
    if (!is) {
        throw ConfigError("cannot open config file: " + args.config_path);
    }
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + args.config_path + ": " + e.what());
    }
    check_keys(j, "top level", allowed);
    if (args.seed) j["seed"] = *args.seed;
    if (args.out) j["out"] = *args.out;
    return j;
}

std::uint64_t top_seed(const json& j, std::uint64_t fallback = 1) {
    return j.value("seed", fallback);
}

canvasrnn::ModelConfig parse_model(const json& j, std::uint64_t default_seed) {
    canvasrnn::ModelConfig cfg;
    cfg.seed = default_seed;
    if (j.is_null()) {
        cfg.validate();
        return cfg;
    }
    check_keys(j, "model",
               {"encoder", "classes", "rnn_width1", "rnn_width2", "iterations", "crop_size",
                "seed", "batch_norm", "carry_state"});
    if (j.contains("encoder")) {
        const json& e = j.at("encoder");
        check_keys(e, "model.encoder", {"widths", "output_stride", "dilations"});
        cfg.encoder.widths = e.value("widths", cfg.encoder.widths);
        cfg.encoder.output_stride = e.value("output_stride", cfg.encoder.output_stride);
        cfg.encoder.dilations = e.value("dilations", cfg.encoder.dilations);
    }
    cfg.classes = j.value("classes", cfg.classes);
    cfg.rnn_width1 = j.value("rnn_width1", cfg.rnn_width1);
    cfg.rnn_width2 = j.value("rnn_width2", cfg.rnn_width2);
    cfg.iterations = j.value("iterations", cfg.iterations);
    cfg.crop_size = j.value("crop_size", cfg.crop_size);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.batch_norm = j.value("batch_norm", cfg.batch_norm);
    cfg.carry_state_across_frames = j.value("carry_state", cfg.carry_state_across_frames);
    cfg.validate();
    return cfg;
}

canvasrnn::ShapeStyle parse_style(const std::string& s) {
    if (s == "solid") return canvasrnn::ShapeStyle::Solid;
    if (s == "fine") return canvasrnn::ShapeStyle::Fine;
    throw ConfigError("config: style must be 'solid' or 'fine', got '" + s + "'");
}

// Dataset source: either {"manifest": path} or
// {"synthetic": {count, size, classes, style, seed}}.
canvasrnn::Dataset parse_data(const json& j, std::uint64_t default_seed) {
    check_keys(j, "data", {"manifest", "synthetic"});
    if (j.contains("manifest") == j.contains("synthetic")) {
        throw ConfigError("config: data needs exactly one of 'manifest' or 'synthetic'");
    }
    if (j.contains("manifest")) {
        const std::string path = j.at("manifest").get<std::string>();
        if (!fs::exists(path)) {
            throw ConfigError("dataset manifest not found: " + path);
        }
        return canvasrnn::load_dataset(path);
    }
    const json& s = j.at("synthetic");
    check_keys(s, "data.synthetic", {"count", "size", "classes", "style", "seed"});
    canvasrnn::Dataset ds;
    ds.classes = s.value("classes", 4);
    ds.samples = canvasrnn::generate_shapes(s.value("seed", default_seed), s.value("count", 64),
                                            s.value("size", 65), ds.classes,
                                            parse_style(s.value("style", std::string("solid"))));
    return ds;
}

fs::path ensure_out(const json& j) {
    const fs::path dir = j.value("out", std::string("out"));
    fs::create_directories(dir);
    return dir;
}

void write_manifest(const fs::path& dir, const std::string& command, std::uint64_t seed,
                    const std::vector<std::string>& files, json extra = json::object()) {
    json m;
    m["command"] = command;
    m["seed"] = seed;
    m["outputs"] = files;
    for (auto& [k, v] : extra.items()) m[k] = v;
    std::ofstream os(dir / "manifest.json", std::ios::trunc);
    os << m.dump(2) << "\n";
}

std::string require_checkpoint(const json& j) {
    if (!j.contains("checkpoint")) {
        throw ConfigError("config: 'checkpoint' is required");
    }
    const std::string path = j.at("checkpoint").get<std::string>();
    if (!fs::exists(path)) {
        throw ConfigError("checkpoint not found: " + path);
    }
    return path;
}

// --- subcommands ---

int cmd_train(const CommonArgs& args) {
    const json j = load_config(args, {"out", "seed", "model", "train", "data"});
    const std::uint64_t seed = top_seed(j);
    canvasrnn::ModelConfig mc = parse_model(j.value("model", json()), seed);
    canvasrnn::TrainConfig tc;
    tc.seed = seed;
    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t, "train",
                   {"base_lr", "epsilon", "power", "momentum", "total_steps", "batch_size",
                    "loss_iteration", "seed", "nesterov", "augment_crop", "augment_flip",
                    "augment_canvas", "checkpoint_interval"});
        tc.base_lr = t.value("base_lr", tc.base_lr);
        tc.epsilon = t.value("epsilon", tc.epsilon);
        tc.power = t.value("power", tc.power);
        tc.momentum = t.value("momentum", tc.momentum);
        tc.total_steps = t.value("total_steps", tc.total_steps);
        tc.batch_size = t.value("batch_size", tc.batch_size);
        tc.loss_iteration = t.value("loss_iteration", tc.loss_iteration);
        tc.seed = t.value("seed", tc.seed);
        tc.nesterov = t.value("nesterov", tc.nesterov);
        tc.augment_crop = t.value("augment_crop", tc.augment_crop);
        tc.augment_flip = t.value("augment_flip", tc.augment_flip);
        tc.augment_canvas = t.value("augment_canvas", tc.augment_canvas);
        tc.checkpoint_interval = t.value("checkpoint_interval", tc.checkpoint_interval);
    }
    tc.validate();
    if (!j.contains("data")) {
        throw ConfigError("config: 'data' is required for train");
    }
    const canvasrnn::Dataset ds = parse_data(j.at("data"), seed);
    if (ds.classes != mc.classes) {
        throw ConfigError("config: dataset has " + std::to_string(ds.classes) +
                          " classes but model expects " + std::to_string(mc.classes));
    }
    const fs::path dir = ensure_out(j);

    canvasrnn::SegModel model(mc);
    const canvasrnn::TrainResult result = canvasrnn::train(
        model, ds.samples, tc,
        [&](int step, canvasrnn::SegModel& m) {
            canvasrnn::save_checkpoint((dir / "checkpoint.bin").string(), m);
            (void)step;
        });

    std::ofstream csv(dir / "loss.csv", std::ios::trunc);
    csv << "step,lr,loss\n";
    for (const canvasrnn::TrainPoint& p : result.curve) {
        csv << p.step << "," << canvasrnn::format_double(p.lr) << ","
            << canvasrnn::format_double(p.loss) << "\n";
    }
    csv.close();
    write_manifest(dir, "train", seed, {"checkpoint.bin", "loss.csv"},
                   {{"steps_done", result.steps_done}, {"diverged", result.diverged}});
    if (result.diverged) {
        std::cerr << "training diverged at step " << result.steps_done << "\n";
        return 3;
    }
    std::cout << "trained " << result.steps_done << " steps, final loss "
              << result.curve.back().loss << "\n";
    return 0;
}

int cmd_anytime(const CommonArgs& args) {
    const json j = load_config(args, {"out", "seed", "checkpoint", "data", "max_iterations"});
    const std::uint64_t seed = top_seed(j);
    canvasrnn::SegModel model = canvasrnn::load_checkpoint(require_checkpoint(j));
    if (!j.contains("data")) {
        throw ConfigError("config: 'data' is required for anytime");
    }
    const canvasrnn::Dataset ds = parse_data(j.at("data"), seed);
    const int max_iters = j.value("max_iterations", model.config().iterations + 2);
    if (max_iters < 1) {
        throw ConfigError("config: max_iterations must be >= 1");
    }
    const fs::path dir = ensure_out(j);

    const auto rows = canvasrnn::anytime_curve(model, ds.samples, max_iters);
    std::ofstream csv(dir / "anytime.csv", std::ios::trunc);
    csv << "iteration,cumulative_flops,miou\n";
    canvasrnn::SvgSeries series{"mIOU", {}, {}};
    for (const canvasrnn::AnytimeRow& r : rows) {
        csv << r.iteration << "," << canvasrnn::format_double(r.cumulative_flops) << ","
            << canvasrnn::format_double(r.miou) << "\n";
        series.x.push_back(r.cumulative_flops);
        series.y.push_back(r.miou);
    }
    csv.close();
    canvasrnn::write_svg_lineplot((dir / "anytime.svg").string(), {series}, "FLOPs", "mIOU");
    write_manifest(dir, "anytime", seed, {"anytime.csv", "anytime.svg"});
    std::cout << "anytime: mIOU " << rows.front().miou << " (1 iter) -> " << rows.back().miou
              << " (" << max_iters << " iters)\n";
    return 0;
}

// Video source: {"manifest": path} (frames in sample order) or
// {"synthetic": {frames, size, velocity:[dx,dy], classes, style, seed}}.
canvasrnn::VideoSequence parse_video(const json& j, std::uint64_t default_seed) {
    check_keys(j, "video", {"manifest", "synthetic"});
    if (j.contains("manifest") == j.contains("synthetic")) {
        throw ConfigError("config: video needs exactly one of 'manifest' or 'synthetic'");
    }
    canvasrnn::VideoSequence video;
    if (j.contains("manifest")) {
        const std::string path = j.at("manifest").get<std::string>();
        if (!fs::exists(path)) {
            throw ConfigError("video manifest not found: " + path);
        }
        video.frames = canvasrnn::load_dataset(path).samples;
        return video;
    }
    const json& s = j.at("synthetic");
    check_keys(s, "video.synthetic", {"frames", "size", "velocity", "classes", "style", "seed"});
    std::pair<double, double> velocity{2.0, 1.0};
    if (s.contains("velocity")) {
        const auto v = s.at("velocity").get<std::vector<double>>();
        if (v.size() != 2) {
            throw ConfigError("config: velocity must be [dx, dy]");
        }
        velocity = {v[0], v[1]};
    }
    return canvasrnn::generate_video(s.value("seed", default_seed), s.value("frames", 10),
                                     s.value("size", 65), velocity, s.value("classes", 4),
                                     parse_style(s.value("style", std::string("solid"))));
}

int cmd_video(const CommonArgs& args) {
    const json j = load_config(
        args, {"out", "seed", "checkpoint", "video", "cold_iterations", "warm_iterations"});
    const std::uint64_t seed = top_seed(j);
    canvasrnn::SegModel model = canvasrnn::load_checkpoint(require_checkpoint(j));
    if (!j.contains("video")) {
        throw ConfigError("config: 'video' is required");
    }
    const canvasrnn::VideoSequence video = parse_video(j.at("video"), seed);
    const int cold = j.value("cold_iterations", model.config().iterations);
    const int warm = j.value("warm_iterations", 2);
    const fs::path dir = ensure_out(j);

    const canvasrnn::VideoReport report = canvasrnn::video_experiment(model, video, cold, warm);
    std::vector<std::string> files;
    for (std::size_t f = 0; f < report.warm_labels.size(); ++f) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%03zu.pgm", f);
        canvasrnn::write_pgm((dir / name).string(), report.warm_labels[f]);
        files.emplace_back(name);
    }
    std::ofstream csv(dir / "video.csv", std::ios::trunc);
    csv << "frame,warm_miou,cold_miou\n";
    double warm_mean = 0, cold_mean = 0;
    for (std::size_t f = 0; f < report.warm_miou.size(); ++f) {
        csv << f << "," << canvasrnn::format_double(report.warm_miou[f]) << ","
            << canvasrnn::format_double(report.cold_miou[f]) << "\n";
        warm_mean += report.warm_miou[f];
        cold_mean += report.cold_miou[f];
    }
    csv.close();
    warm_mean /= static_cast<double>(report.warm_miou.size());
    cold_mean /= static_cast<double>(report.cold_miou.size());
    files.emplace_back("video.csv");
    json cost = {{"cold_iterations", cold},
                 {"warm_iterations", warm},
                 {"cold_flops", report.cold_flops},
                 {"warm_flops", report.warm_flops},
                 {"warm_over_cold", report.warm_flops / report.cold_flops},
                 {"mean_warm_miou", warm_mean},
                 {"mean_cold_miou", cold_mean}};
    std::ofstream cj(dir / "cost.json", std::ios::trunc);
    cj << cost.dump(2) << "\n";
    cj.close();
    files.emplace_back("cost.json");
    write_manifest(dir, "video", seed, files, cost);
    std::cout << "video: warm mIOU " << warm_mean << " vs cold " << cold_mean << ", FLOPs ratio "
              << report.warm_flops / report.cold_flops << "\n";
    return 0;
}

int cmd_perturb(const CommonArgs& args) {
    const json j = load_config(
        args, {"out", "seed", "checkpoint", "data", "sample_index", "mode", "iterations"});
    const std::uint64_t seed = top_seed(j);
    canvasrnn::SegModel model = canvasrnn::load_checkpoint(require_checkpoint(j));
    if (!j.contains("data")) {
        throw ConfigError("config: 'data' is required for perturb");
    }
    const canvasrnn::Dataset ds = parse_data(j.at("data"), seed);
    const int index = j.value("sample_index", 0);
    if (index < 0 || index >= static_cast<int>(ds.samples.size())) {
        throw ConfigError("config: sample_index out of range");
    }
    const canvasrnn::PerturbMode mode =
        canvasrnn::perturb_mode_from_string(j.value("mode", std::string("wrong_class")));
    const int iterations = j.value("iterations", model.config().iterations);
    const fs::path dir = ensure_out(j);

    const canvasrnn::SegSample& sample = ds.samples[index];
    const auto rows = canvasrnn::perturb_experiment(model, sample, mode, iterations);
    const double scale = canvasrnn::typical_logit_scale(model, sample, iterations);
    const canvasrnn::Tensor init = canvasrnn::make_initial_canvas(model, sample, mode, scale);
    const canvasrnn::Prediction pred = model.predict(sample.image, iterations, &init);

    std::vector<std::string> files;
    for (int t = 0; t < iterations; ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "iter_%02d.pgm", t + 1);
        canvasrnn::write_pgm((dir / name).string(), pred.labels[t]);
        files.emplace_back(name);
    }
    std::ofstream csv(dir / "agreement.csv", std::ios::trunc);
    csv << "iteration,agreement\n";
    for (const canvasrnn::PerturbRow& r : rows) {
        csv << r.iteration << "," << canvasrnn::format_double(r.agreement) << "\n";
    }
    csv.close();
    files.emplace_back("agreement.csv");
    if (mode == canvasrnn::PerturbMode::GroundTruth) {
        const auto fill = canvasrnn::interior_fill_fraction(model, sample, mode, iterations);
        std::ofstream fc(dir / "fill.csv", std::ios::trunc);
        fc << "iteration,interior_fill_fraction\n";
        for (int t = 0; t < iterations; ++t) {
            fc << t + 1 << "," << canvasrnn::format_double(fill[t]) << "\n";
        }
        files.emplace_back("fill.csv");
    }
    write_manifest(dir, "perturb", seed, files,
                   {{"mode", j.value("mode", std::string("wrong_class"))},
                    {"logit_scale", scale},
                    {"final_agreement", rows.back().agreement}});
    std::cout << "perturb: final agreement " << rows.back().agreement << "\n";
    return 0;
}

int cmd_flops(const CommonArgs& args) {
    const json j = load_config(args, {"out", "seed", "model", "reference_scale", "height", "width",
                                      "iterations", "scales", "flips"});
    const std::uint64_t seed = top_seed(j);
    canvasrnn::ModelConfig mc = j.value("reference_scale", false)
                                    ? canvasrnn::reference_scale_config()
                                    : parse_model(j.value("model", json()), seed);
    const int h = j.value("height", mc.crop_size);
    const int w = j.value("width", mc.crop_size);
    const int iterations = j.value("iterations", mc.iterations);
    const fs::path dir = ensure_out(j);

    canvasrnn::FlopEstimate est;
    if (j.contains("scales")) {
        est = canvasrnn::estimate_flops_multiscale(
            mc, h, w, iterations, j.at("scales").get<std::vector<double>>(),
            j.value("flips", true));
    } else {
        est = canvasrnn::estimate_flops(mc, h, w, iterations);
    }
    std::ofstream os(dir / "flops.json", std::ios::trunc);
    os << canvasrnn::flops_to_json(est) << "\n";
    os.close();
    write_manifest(dir, "flops", seed, {"flops.json"},
                   {{"total", est.total}, {"per_iteration", est.per_iteration}});
    std::cout << "flops: total " << est.total << ", per iteration " << est.per_iteration << "\n";
    return 0;
}

int cmd_psd(const CommonArgs& args) {
    const json j = load_config(args, {"out", "seed", "checkpoint", "data", "iterations"});
    const std::uint64_t seed = top_seed(j);
    if (!j.contains("data")) {
        throw ConfigError("config: 'data' is required for psd");
    }
    const canvasrnn::Dataset ds = parse_data(j.at("data"), seed);
    std::optional<canvasrnn::SegModel> model;
    if (j.contains("checkpoint")) {
        model.emplace(canvasrnn::load_checkpoint(require_checkpoint(j)));
        if (model->config().classes != ds.classes) {
            throw ConfigError("config: checkpoint classes do not match dataset");
        }
    }
    const int iterations = j.value("iterations", model ? model->config().iterations : 6);
    const fs::path dir = ensure_out(j);

    // Mean radial power per class over the dataset, for ground truth and
    // (when a checkpoint is given) for model predictions.
    const int K = ds.classes;
    std::vector<canvasrnn::IntMask> predictions;
    if (model) {
        predictions.resize(ds.samples.size(), canvasrnn::IntMask(1, 1, 1));
        canvasrnn::parallel_for(static_cast<int>(ds.samples.size()), [&](int i) {
            predictions[i] = model->predict(ds.samples[i].image, iterations).labels.back();
        });
    }
    std::ofstream csv(dir / "psd.csv", std::ios::trunc);
    csv << "class,source,bin,power,cdf\n";
    auto emit = [&](int cls, const char* source, const std::vector<canvasrnn::IntMask>& masks) {
        std::vector<double> power, cdf;
        double total = 0.0;
        for (const canvasrnn::IntMask& m : masks) {
            const canvasrnn::PsdResult r = canvasrnn::power_spectral_density(m, cls);
            if (power.empty()) power.assign(r.power.size(), 0.0);
            for (std::size_t b = 0; b < r.power.size(); ++b) power[b] += r.power[b];
            total += r.total_power;
        }
        cdf.assign(power.size(), 1.0);
        if (total > 0.0) {
            double acc = 0.0;
            for (std::size_t b = 0; b < power.size(); ++b) {
                acc += power[b];
                cdf[b] = acc / total;
            }
        }
        for (std::size_t b = 0; b < power.size(); ++b) {
            csv << cls << "," << source << "," << b << "," << canvasrnn::format_double(power[b])
                << "," << canvasrnn::format_double(cdf[b]) << "\n";
        }
    };
    std::vector<canvasrnn::IntMask> truth;
    for (const canvasrnn::SegSample& s : ds.samples) truth.push_back(s.label);
    for (int cls = 0; cls < K; ++cls) {
        emit(cls, "truth", truth);
        if (model) emit(cls, "prediction", predictions);
    }
    csv.close();
    write_manifest(dir, "psd", seed, {"psd.csv"}, {{"classes", K}});
    std::cout << "psd: wrote spectra for " << K << " classes over " << ds.samples.size()
              << " masks\n";
    return 0;
}

int cmd_gen_data(const CommonArgs& args) {
    const json j = load_config(
        args, {"out", "seed", "count", "size", "classes", "style", "video"});
    const std::uint64_t seed = top_seed(j);
    const int size = j.value("size", 65);
    const int K = j.value("classes", 4);
    const canvasrnn::ShapeStyle style = parse_style(j.value("style", std::string("solid")));
    const fs::path dir = ensure_out(j);

    std::vector<canvasrnn::SegSample> samples;
    std::string stem = "sample";
    if (j.contains("video")) {
        const json& v = j.at("video");
        check_keys(v, "video", {"frames", "velocity"});
        std::pair<double, double> velocity{2.0, 1.0};
        if (v.contains("velocity")) {
            const auto vel = v.at("velocity").get<std::vector<double>>();
            if (vel.size() != 2) {
                throw ConfigError("config: velocity must be [dx, dy]");
            }
            velocity = {vel[0], vel[1]};
        }
        samples = canvasrnn::generate_video(seed, v.value("frames", 10), size, velocity, K, style)
                      .frames;
        stem = "frame";
    } else {
        samples = canvasrnn::generate_shapes(seed, j.value("count", 64), size, K, style);
    }
    canvasrnn::write_dataset(dir.string(), samples, K, stem);
    std::cout << "wrote " << samples.size() << " samples to " << dir.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Recurrent additive-canvas segmentation toolkit"};
    app.require_subcommand(1);

    struct Sub {
        const char* name;
        const char* desc;
        int (*run)(const CommonArgs&);
    };
    const Sub subs[] = {
        {"train", "train a model, writing a checkpoint and loss curve", cmd_train},
        {"anytime", "accuracy/cost per refinement iteration on a dataset", cmd_anytime},
        {"video", "segment a frame sequence with canvas seeding", cmd_video},
        {"perturb", "initialize the canvas from a perturbed mask and track recovery", cmd_perturb},
        {"flops", "analytic FLOP breakdown for a configuration", cmd_flops},
        {"psd", "radial power spectra of masks and predictions", cmd_psd},
        {"gen-data", "generate a synthetic shape dataset or video", cmd_gen_data},
    };
    std::vector<std::pair<CLI::App*, const Sub*>> wired;
    auto args = std::make_shared<std::vector<CommonArgs>>(std::size(subs));
    for (std::size_t i = 0; i < std::size(subs); ++i) {
        CLI::App* sc = app.add_subcommand(subs[i].name, subs[i].desc);
        CommonArgs& a = (*args)[i];
        sc->add_option("--config", a.config_path, "JSON run configuration")->required();
        sc->add_option("--seed", a.seed, "override the top-level seed");
        sc->add_option("--out", a.out, "override the output directory");
        wired.emplace_back(sc, &subs[i]);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        for (std::size_t i = 0; i < wired.size(); ++i) {
            if (wired[i].first->parsed()) {
                return wired[i].second->run((*args)[i]);
            }
        }
        std::cerr << "no subcommand selected\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
