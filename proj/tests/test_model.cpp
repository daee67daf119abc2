#include <doctest.h>

#include <cmath>

#include "canvasrnn/model.hpp"
#include "canvasrnn/ops.hpp"
#include "canvasrnn/util.hpp"
#include "fd_check.hpp"

using namespace canvasrnn;
using testutil::random_tensor;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.encoder.widths = {4, 6, 8, 8};
    cfg.encoder.output_stride = 8;
    cfg.classes = 3;
    cfg.rnn_width1 = 6;
    cfg.rnn_width2 = 4;
    cfg.crop_size = 33;
    cfg.seed = 42;
    return cfg;
}

Tensor random_image(int size, std::uint64_t seed) {
    Rng rng(seed);
    return testutil::random_tensor(Shape{1, 3, size, size}, rng, 0.0, 1.0);
}

}  // namespace

TEST_CASE("feature map geometry follows the output stride") {
    ModelConfig cfg = small_config();
    SegModel m8(cfg);
    CHECK(m8.feature_dims(65, 65) == std::pair<int, int>{9, 9});
    CHECK(m8.feature_dims(33, 33) == std::pair<int, int>{5, 5});

    cfg.encoder.output_stride = 16;
    SegModel m16(cfg);
    CHECK(m16.feature_dims(65, 65) == std::pair<int, int>{5, 5});
    CHECK(m16.feature_dims(513, 513) == std::pair<int, int>{33, 33});
}

TEST_CASE("encode validates input size and channel count") {
    SegModel model(small_config());
    CHECK_THROWS_AS(model.encode(Tensor(Shape{1, 3, 64, 64})), ConfigError);
    CHECK_THROWS_AS(model.encode(Tensor(Shape{1, 1, 33, 33})), ConfigError);
    Tensor features = model.encode(random_image(33, 1));
    CHECK(features.shape() == Shape{1, 8, 5, 5});
}

TEST_CASE("config validation") {
    ModelConfig cfg = small_config();
    cfg.crop_size = 64;
    CHECK_THROWS_AS(SegModel{cfg}, ConfigError);
    cfg = small_config();
    cfg.classes = 1;
    CHECK_THROWS_AS(SegModel{cfg}, ConfigError);
    cfg = small_config();
    cfg.encoder.output_stride = 4;
    CHECK_THROWS_AS(SegModel{cfg}, ConfigError);
}

TEST_CASE("snap to the nearest valid crop size") {
    CHECK(snap_crop_size(65.0) == 65);
    CHECK(snap_crop_size(33.0) == 33);
    CHECK(snap_crop_size(52.0) == 65);
    CHECK(snap_crop_size(40.0) == 33);
    CHECK(snap_crop_size(10.0) == 33);
    CHECK(snap_crop_size(97.4) == 97);
}

TEST_CASE("canvas updates are exactly additive") {
    SegModel model(small_config());
    Tensor image = random_image(33, 2);
    std::vector<Tensor> canvases;
    std::vector<IterateResult> steps;
    model.run_canvas(image, 4, nullptr, &canvases, false, &steps);
    REQUIRE(canvases.size() == 4);
    for (int t = 0; t < 4; ++t) {
        const Tensor& prev = t == 0 ? Tensor(canvases[0].shape()) : canvases[t - 1];
        for (std::size_t i = 0; i < canvases[t].size(); ++i) {
            const double expect = (t == 0 ? 0.0 : canvases[t - 1].values()[i]) +
                                  steps[t].rnn_output.values()[i];
            CHECK(canvases[t].values()[i] == expect);  // bitwise
        }
        (void)prev;
    }
}

TEST_CASE("shorter runs are exact prefixes of longer runs") {
    SegModel model(small_config());
    Tensor image = random_image(33, 3);
    Prediction p4 = model.predict(image, 4);
    Prediction p6 = model.predict(image, 6);
    for (int t = 0; t < 4; ++t) {
        CHECK(p4.canvases[t].values() == p6.canvases[t].values());
        CHECK(p4.labels[t] == p6.labels[t]);
    }
}

TEST_CASE("zero parameters leave the canvas at zero") {
    SegModel model(small_config());
    model.for_each_param([](const std::string&, Tensor& t) {
        for (double& v : t.values()) v = 0.0;
    });
    Prediction pred = model.predict(random_image(33, 4), 3);
    for (const Tensor& canvas : pred.canvases) {
        for (double v : canvas.values()) CHECK(v == 0.0);
    }
}

TEST_CASE("parameter count is independent of the iteration setting") {
    ModelConfig cfg = small_config();
    SegModel a(cfg);
    cfg.iterations = 12;
    SegModel b(cfg);
    CHECK(a.num_trainable_values() == b.num_trainable_values());
    CHECK(a.num_trainable_values() > 0);
}

TEST_CASE("gradients reach the first encoder layer through the unroll") {
    SegModel model(small_config());
    Tensor image = random_image(33, 5);
    Graph g;
    model.for_each_param([&](const std::string&, Tensor& t) { g.watch(t); });
    Tensor canvas = model.run_canvas(image, 2);
    Tensor loss = sum(tanh_op(canvas));
    g.backward(loss);
    double mag = 0.0;
    for (double v : g.grad(model.encoder_layers()[0].kernel)) mag += std::abs(v);
    CHECK(mag > 0.0);
    model.for_each_param([](const std::string&, Tensor& t) { t.detach(); });
}

TEST_CASE("multiscale at unit scale without flips equals plain prediction") {
    SegModel model(small_config());
    Tensor image = random_image(33, 6);
    IntMask ms = model.predict_multiscale(image, {1.0}, false, 3);
    Prediction plain = model.predict(image, 3);
    CHECK(ms == plain.labels.back());
}

TEST_CASE("video seeding matches an explicit warm-started prediction") {
    SegModel model(small_config());
    Tensor image = random_image(33, 7);
    std::vector<Tensor> frames{image, image};
    std::vector<IntMask> video = model.segment_video(frames, 4, 2);
    Prediction cold = model.predict(image, 4);
    CHECK(video[0] == cold.labels.back());
    const Tensor seed_canvas = renormalize_canvas(cold.canvases.back(), kWarmSeedScale);
    Prediction warm = model.predict(image, 2, &seed_canvas);
    CHECK(video[1] == warm.labels.back());
}

TEST_CASE("initial canvas must match feature geometry") {
    SegModel model(small_config());
    Tensor image = random_image(33, 8);
    Tensor bad(Shape{1, 3, 4, 4});
    CHECK_THROWS_AS(model.predict(image, 2, &bad), ConfigError);
}

TEST_CASE("identical seeds build identical models") {
    SegModel a(small_config());
    SegModel b(small_config());
    bool same = true;
    std::vector<const Tensor*> pa, pb;
    a.for_each_param([&](const std::string&, Tensor& t) { pa.push_back(&t); });
    b.for_each_param([&](const std::string&, Tensor& t) { pb.push_back(&t); });
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        same = same && pa[i]->values() == pb[i]->values();
    }
    CHECK(same);

    ModelConfig cfg = small_config();
    cfg.seed = 43;
    SegModel c(cfg);
    std::vector<const Tensor*> pc;
    c.for_each_param([&](const std::string&, Tensor& t) { pc.push_back(&t); });
    CHECK(pc[0]->values() != pa[0]->values());
}
