#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "canvasrnn/tensor.hpp"
#include "canvasrnn/util.hpp"

namespace testutil {

// Compares backward gradients of a scalar-valued function against central
// finite differences over every element of every input. Returns the worst
// relative error.
inline double max_grad_rel_err(const std::vector<canvasrnn::Tensor>& inputs,
                               const std::function<canvasrnn::Tensor(std::vector<canvasrnn::Tensor>&)>& loss_fn,
                               double eps = 1e-5) {
    canvasrnn::Graph g;
    std::vector<canvasrnn::Tensor> watched = inputs;
    for (canvasrnn::Tensor& t : watched) g.watch(t);
    canvasrnn::Tensor loss = loss_fn(watched);
    g.backward(loss);
    double worst = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const std::vector<double>& bp = g.grad(watched[i]);
        for (std::size_t k = 0; k < inputs[i].size(); ++k) {
            auto eval = [&](double delta) {
                std::vector<canvasrnn::Tensor> plain = inputs;
                plain[i].values()[k] += delta;
                return loss_fn(plain).values()[0];
            };
            const double fd = (eval(eps) - eval(-eps)) / (2.0 * eps);
            const double err =
                std::abs(fd - bp[k]) / std::max({std::abs(fd), std::abs(bp[k]), 1e-6});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

inline canvasrnn::Tensor random_tensor(canvasrnn::Shape s, canvasrnn::Rng& rng, double lo = -1.0,
                                       double hi = 1.0) {
    canvasrnn::Tensor t(s);
    for (double& v : t.values()) {
        v = rng.uniform(lo, hi);
    }
    return t;
}

}  // namespace testutil
