#include <doctest.h>

#include <cmath>

#include "canvasrnn/ops.hpp"
#include "canvasrnn/tensor.hpp"
#include "canvasrnn/util.hpp"
#include "fd_check.hpp"

using namespace canvasrnn;
using testutil::max_grad_rel_err;
using testutil::random_tensor;

TEST_CASE("conv2d 1x1 identity kernel passes input through") {
    Rng rng(11);
    Tensor x = random_tensor(Shape{1, 3, 5, 5}, rng);
    Tensor kernel(Shape{3, 3, 1, 1});
    for (int c = 0; c < 3; ++c) kernel.at(c, c, 0, 0) = 1.0;
    Tensor out = conv2d(x, kernel, {});
    REQUIRE(out.shape() == x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(out.values()[i] == x.values()[i]);
    }
}

TEST_CASE("conv2d impulse response of all-ones 3x3 kernel") {
    Tensor x(Shape{1, 1, 5, 5});
    x.at(0, 0, 2, 2) = 1.0;
    Tensor kernel(Shape{1, 1, 3, 3}, std::vector<double>(9, 1.0));
    Tensor out = conv2d(x, kernel, {});
    for (int y = 0; y < 5; ++y) {
        for (int xx = 0; xx < 5; ++xx) {
            const double expect = (std::abs(y - 2) <= 1 && std::abs(xx - 2) <= 1) ? 1.0 : 0.0;
            CHECK(out.at(0, 0, y, xx) == expect);
        }
    }
    // Border impulse is clipped, so the response sums to 4 instead of 9.
    Tensor corner(Shape{1, 1, 5, 5});
    corner.at(0, 0, 0, 0) = 1.0;
    Tensor out2 = conv2d(corner, kernel, {});
    double total = 0;
    for (double v : out2.values()) total += v;
    CHECK(total == 4.0);
}

TEST_CASE("conv2d output geometry") {
    Tensor x(Shape{1, 1, 7, 9});
    Tensor kernel(Shape{1, 1, 3, 3});
    CHECK(conv2d(x, kernel, {}, 2).shape() == Shape{1, 1, 4, 5});
    CHECK(conv2d(x, kernel, {}, 1, 1, Padding::Valid).shape() == Shape{1, 1, 5, 7});
    CHECK(conv2d(x, kernel, {}, 1, 2, Padding::Valid).shape() == Shape{1, 1, 3, 5});
    CHECK(conv2d(x, kernel, {}, 1, 2, Padding::Same).shape() == Shape{1, 1, 7, 9});
    CHECK_THROWS_AS(conv2d(x, Tensor(Shape{1, 2, 3, 3}), {}), ConfigError);
    CHECK_THROWS_AS(conv2d(x, kernel, Tensor(Shape{1, 5, 1, 1})), ConfigError);
}

TEST_CASE("conv2d gradients match finite differences") {
    Rng rng(3);
    Tensor x = random_tensor(Shape{1, 2, 5, 5}, rng);
    Tensor kernel = random_tensor(Shape{3, 2, 3, 3}, rng);
    Tensor bias = random_tensor(Shape{1, 3, 1, 1}, rng);
    auto loss = [](std::vector<Tensor>& in) {
        return sum(conv2d(in[0], in[1], in[2]));
    };
    CHECK(max_grad_rel_err({x, kernel, bias}, loss) <= 1e-6);

    auto strided = [](std::vector<Tensor>& in) {
        return sum(tanh_op(conv2d(in[0], in[1], in[2], 2, 1, Padding::Same)));
    };
    CHECK(max_grad_rel_err({x, kernel, bias}, strided) <= 1e-6);

    Tensor xb = random_tensor(Shape{2, 2, 7, 7}, rng);
    auto dilated = [](std::vector<Tensor>& in) {
        return sum(sigmoid(conv2d(in[0], in[1], in[2], 1, 2, Padding::Valid)));
    };
    CHECK(max_grad_rel_err({xb, kernel, bias}, dilated) <= 1e-6);
}

TEST_CASE("elementwise op values") {
    Tensor z(Shape{1, 1, 1, 3});
    CHECK(sigmoid(z).values()[0] == 0.5);
    CHECK(tanh_op(z).values()[0] == 0.0);
    Tensor a(Shape{1, 1, 1, 3}, {1.0, -2.0, 3.0});
    Tensor b(Shape{1, 1, 1, 3}, {4.0, 5.0, -6.0});
    CHECK(add(a, b).values() == std::vector<double>{5.0, 3.0, -3.0});
    CHECK(mul(a, b).values() == std::vector<double>{4.0, -10.0, -18.0});
    CHECK(add_scalar(a, 1.5).values()[1] == -0.5);
    CHECK(scale(a, -2.0).values()[2] == -6.0);
    CHECK(relu(a).values() == std::vector<double>{1.0, 0.0, 3.0});
    CHECK_THROWS_AS(add(a, Tensor(Shape{1, 1, 1, 2})), ConfigError);
    CHECK_THROWS_AS(mul(a, Tensor(Shape{1, 2, 1, 3})), ConfigError);
}

TEST_CASE("elementwise gradients match finite differences") {
    Rng rng(5);
    Tensor a = random_tensor(Shape{1, 2, 3, 3}, rng);
    Tensor b = random_tensor(Shape{1, 2, 3, 3}, rng);
    auto chain = [](std::vector<Tensor>& in) {
        Tensor t = mul(add(in[0], in[1]), sigmoid(in[0]));
        return sum(mul(tanh_op(t), scale(add_scalar(in[1], 0.3), 1.7)));
    };
    CHECK(max_grad_rel_err({a, b}, chain) <= 1e-6);
}

TEST_CASE("add gradient is one everywhere") {
    Rng rng(6);
    Tensor a = random_tensor(Shape{1, 1, 2, 2}, rng);
    Tensor b = random_tensor(Shape{1, 1, 2, 2}, rng);
    Graph g;
    g.watch(a);
    g.watch(b);
    Tensor loss = sum(add(a, b));
    g.backward(loss);
    for (double v : g.grad(a)) CHECK(v == 1.0);
    for (double v : g.grad(b)) CHECK(v == 1.0);
}

TEST_CASE("concat and slice") {
    Rng rng(7);
    Tensor a = random_tensor(Shape{1, 2, 4, 4}, rng);
    Tensor b = random_tensor(Shape{1, 3, 4, 4}, rng);
    Tensor cat = concat_channels(a, b);
    REQUIRE(cat.shape() == Shape{1, 5, 4, 4});
    Tensor back = slice_channels(cat, 0, 2);
    CHECK(back.values() == a.values());
    CHECK(slice_channels(cat, 2, 5).values() == b.values());
    CHECK_THROWS_AS(concat_channels(a, Tensor(Shape{1, 3, 5, 4})), ConfigError);
    CHECK_THROWS_AS(slice_channels(cat, 3, 3), ConfigError);

    auto loss = [](std::vector<Tensor>& in) {
        Tensor cat2 = concat_channels(in[0], in[1]);
        return sum(mul(sigmoid(slice_channels(cat2, 1, 4)), slice_channels(cat2, 0, 3)));
    };
    CHECK(max_grad_rel_err({a, b}, loss) <= 1e-6);
}

TEST_CASE("bilinear upsample aligns corners") {
    Tensor x(Shape{1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor up = bilinear_upsample(x, 3, 3);
    CHECK(up.at(0, 0, 0, 0) == 1.0);
    CHECK(up.at(0, 0, 0, 2) == 2.0);
    CHECK(up.at(0, 0, 2, 0) == 3.0);
    CHECK(up.at(0, 0, 2, 2) == 4.0);
    CHECK(up.at(0, 0, 0, 1) == doctest::Approx(1.5));
    CHECK(up.at(0, 0, 1, 1) == doctest::Approx(2.5));
    CHECK_THROWS_AS(bilinear_upsample(x, 1, 3), ConfigError);

    Rng rng(8);
    Tensor y = random_tensor(Shape{1, 2, 3, 4}, rng);
    auto loss = [](std::vector<Tensor>& in) {
        return sum(tanh_op(bilinear_upsample(in[0], 7, 9)));
    };
    CHECK(max_grad_rel_err({y}, loss) <= 1e-6);
}

TEST_CASE("softmax cross entropy values") {
    const int K = 21;
    Tensor logits(Shape{1, K, 2, 2});  // uniform logits
    IntMask labels(1, 2, 2, 3);
    Tensor loss = softmax_cross_entropy(logits, labels, 255);
    CHECK(loss.values()[0] == doctest::Approx(std::log(21.0)).epsilon(1e-12));

    // Brute-force per-pixel oracle on random logits.
    Rng rng(9);
    Tensor l2 = random_tensor(Shape{2, 4, 3, 3}, rng, -3.0, 3.0);
    IntMask lab2(2, 3, 3);
    for (int& v : lab2.v) v = rng.uniform_int(0, 3);
    lab2.at(0, 1, 1) = 255;  // one ignored pixel
    double expected = 0.0;
    int count = 0;
    for (int n = 0; n < 2; ++n) {
        for (int y = 0; y < 3; ++y) {
            for (int x = 0; x < 3; ++x) {
                const int lab = lab2.at(n, y, x);
                if (lab == 255) continue;
                double denom = 0.0;
                for (int c = 0; c < 4; ++c) denom += std::exp(l2.at(n, c, y, x));
                expected += -std::log(std::exp(l2.at(n, lab, y, x)) / denom);
                ++count;
            }
        }
    }
    expected /= count;
    CHECK(softmax_cross_entropy(l2, lab2, 255).values()[0] ==
          doctest::Approx(expected).epsilon(1e-12));

    IntMask all_ignored(1, 2, 2, 255);
    Tensor l3 = random_tensor(Shape{1, 3, 2, 2}, rng);
    Graph g;
    g.watch(l3);
    Tensor z = softmax_cross_entropy(l3, all_ignored, 255);
    CHECK(z.values()[0] == 0.0);
    g.backward(z);
    for (double v : g.grad(l3)) CHECK(v == 0.0);

    CHECK_THROWS_AS(softmax_cross_entropy(l3, IntMask(1, 2, 2, 7), 255), ConfigError);
}

TEST_CASE("softmax cross entropy gradient matches finite differences") {
    Rng rng(10);
    Tensor logits = random_tensor(Shape{1, 3, 4, 4}, rng, -2.0, 2.0);
    IntMask labels(1, 4, 4);
    for (int& v : labels.v) v = rng.uniform_int(0, 2);
    labels.at(0, 0, 0) = 255;
    auto loss = [labels](std::vector<Tensor>& in) {
        return softmax_cross_entropy(in[0], labels, 255);
    };
    CHECK(max_grad_rel_err({logits}, loss) <= 1e-6);
}

TEST_CASE("batch norm normalizes and differentiates") {
    Rng rng(12);
    Tensor x = random_tensor(Shape{2, 3, 4, 4}, rng, -2.0, 5.0);
    Tensor gamma(Shape{1, 3, 1, 1}, 1.0);
    Tensor beta(Shape{1, 3, 1, 1});
    std::vector<double> mean, var;
    Tensor out = batch_norm(x, gamma, beta, 1e-5, &mean, &var);
    for (int c = 0; c < 3; ++c) {
        double m = 0;
        double v = 0;
        for (int n = 0; n < 2; ++n) {
            for (int y = 0; y < 4; ++y) {
                for (int xx = 0; xx < 4; ++xx) m += out.at(n, c, y, xx);
            }
        }
        m /= 32.0;
        for (int n = 0; n < 2; ++n) {
            for (int y = 0; y < 4; ++y) {
                for (int xx = 0; xx < 4; ++xx) {
                    v += (out.at(n, c, y, xx) - m) * (out.at(n, c, y, xx) - m);
                }
            }
        }
        v /= 32.0;
        CHECK(m == doctest::Approx(0.0).epsilon(1e-10));
        CHECK(v == doctest::Approx(1.0).epsilon(1e-3));
        CHECK(var[c] > 0.0);
    }

    Tensor gamma2 = random_tensor(Shape{1, 3, 1, 1}, rng, 0.5, 1.5);
    Tensor beta2 = random_tensor(Shape{1, 3, 1, 1}, rng);
    auto loss = [](std::vector<Tensor>& in) {
        return sum(tanh_op(batch_norm(in[0], in[1], in[2], 1e-5)));
    };
    CHECK(max_grad_rel_err({x, gamma2, beta2}, loss, 1e-4) <= 1e-5);

    // Inference mode with the batch statistics reproduces the training output.
    Tensor inf = batch_norm_inference(x, gamma, beta, mean, var, 1e-5);
    for (std::size_t i = 0; i < inf.size(); ++i) {
        CHECK(inf.values()[i] == doctest::Approx(out.values()[i]).epsilon(1e-12));
    }
}

TEST_CASE("non-finite results raise numeric errors") {
    Tensor huge(Shape{1, 1, 1, 1}, {1e308});
    CHECK_THROWS_AS(scale(huge, 10.0), NumericError);
    CHECK_THROWS_AS(mul(huge, huge), NumericError);
}

TEST_CASE("backward accumulates fan-out and scales linearly") {
    Rng rng(13);
    Tensor x = random_tensor(Shape{1, 1, 2, 2}, rng);
    {
        Graph g;
        g.watch(x);
        Tensor loss = sum(add(x, x));
        g.backward(loss);
        for (double v : g.grad(x)) CHECK(v == 2.0);
    }
    // Doubling the loss doubles every gradient.
    std::vector<double> g1, g2;
    {
        Graph g;
        Tensor t = x;
        g.watch(t);
        Tensor loss = sum(sigmoid(t));
        g.backward(loss);
        g1 = g.grad(t);
    }
    {
        Graph g;
        Tensor t = x;
        g.watch(t);
        Tensor loss = scale(sum(sigmoid(t)), 2.0);
        g.backward(loss);
        g2 = g.grad(t);
    }
    for (std::size_t i = 0; i < g1.size(); ++i) {
        CHECK(g2[i] == doctest::Approx(2.0 * g1[i]).epsilon(1e-15));
    }
}

TEST_CASE("backward is bitwise deterministic") {
    Rng rng(14);
    Tensor x = random_tensor(Shape{1, 2, 4, 4}, rng);
    Tensor k = random_tensor(Shape{2, 2, 3, 3}, rng);
    auto run = [&]() {
        Graph g;
        Tensor xi = x, ki = k;
        g.watch(xi);
        g.watch(ki);
        Tensor loss = sum(tanh_op(conv2d(xi, ki, {})));
        g.backward(loss);
        std::vector<double> all = g.grad(xi);
        const std::vector<double>& gk = g.grad(ki);
        all.insert(all.end(), gk.begin(), gk.end());
        return all;
    };
    CHECK(run() == run());
}

TEST_CASE("argmax, flip and resize utilities") {
    Tensor x(Shape{1, 3, 1, 2}, {0.1, 5.0, 0.2, 1.0, 3.0, 1.0});
    IntMask m = argmax_channels(x);
    CHECK(m.at(0, 0, 0) == 2);  // channel values 0.1, 0.2, 3.0
    CHECK(m.at(0, 0, 1) == 0);  // 5.0, 1.0, 1.0

    Tensor row(Shape{1, 1, 1, 3}, {1.0, 2.0, 3.0});
    CHECK(flip_horizontal(row).values() == std::vector<double>{3.0, 2.0, 1.0});

    Tensor grid(Shape{1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    Tensor down = resize_bilinear(grid, 2, 2);
    CHECK(down.at(0, 0, 0, 0) == 1.0);
    CHECK(down.at(0, 0, 1, 1) == 9.0);
    CHECK(down.at(0, 0, 0, 1) == doctest::Approx(3.0));
}
