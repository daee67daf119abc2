#include "canvasrnn/tensor.hpp"

#include <cmath>

namespace canvasrnn {

std::string Shape::str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
}

int Graph::record(const Shape& out_shape, BackwardFn backward) {
    shapes_.push_back(out_shape);
    backwards_.push_back(std::move(backward));
    trainable_.push_back(false);
    return static_cast<int>(shapes_.size()) - 1;
}

int Graph::leaf(const Shape& shape, bool trainable) {
    shapes_.push_back(shape);
    backwards_.emplace_back();
    trainable_.push_back(trainable);
    return static_cast<int>(shapes_.size()) - 1;
}

void Graph::watch(Tensor& t) {
    t.attach(this, leaf(t.shape(), /*trainable=*/true));
}

std::vector<double>& Graph::grad_buffer(int node) {
    if (grads_.size() < shapes_.size()) {
        grads_.resize(shapes_.size());
    }
    auto& buf = grads_[node];
    if (buf.empty()) {
        buf.assign(shapes_[node].numel(), 0.0);
    }
    return buf;
}

const std::vector<double>& Graph::grad(const Tensor& t) const {
    if (t.graph() != this || t.node() < 0) {
        throw ConfigError("Graph::grad: tensor is not attached to this graph");
    }
    if (!ran_backward_) {
        throw ConfigError("Graph::grad: backward() has not been run");
    }
    return grads_[t.node()];
}

void Graph::backward(const Tensor& loss) {
    if (loss.graph() != this || loss.node() < 0) {
        throw ConfigError("Graph::backward: loss is not on this graph");
    }
    if (loss.shape().numel() != 1) {
        throw ConfigError("Graph::backward: loss must be scalar, got " + loss.shape().str());
    }
    grads_.clear();
    grads_.resize(shapes_.size());
    grad_buffer(loss.node())[0] = 1.0;
    for (int i = loss.node(); i >= 0; --i) {
        if (!backwards_[i]) {
            continue;
        }
        if (grads_[i].empty()) {
            continue;  // node does not contribute to the loss
        }
        backwards_[i](*this, i);
    }
    // Trainable leaves always report a (possibly zero) gradient of full shape.
    for (std::size_t i = 0; i < shapes_.size(); ++i) {
        if (trainable_[i] && grads_[i].empty()) {
            grads_[i].assign(shapes_[i].numel(), 0.0);
        }
    }
    ran_backward_ = true;
}

void check_finite(const Tensor& t, const char* op) {
    for (double v : t.values()) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(op) + ": non-finite value in output");
        }
    }
}

}  // namespace canvasrnn
