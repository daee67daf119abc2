#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace canvasrnn {

// Configuration / shape errors (CLI exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values or numeric failures (CLI exit code 3).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Shape {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t numel() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

class Graph;

// Dense 4-D (batch, channel, height, width) array of doubles. A tensor may
// be attached to a Graph node, in which case ops consuming it are recorded
// for reverse-mode differentiation.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0)
        : shape_(s), data_(s.numel(), fill) {}
    Tensor(Shape s, std::vector<double> values) : shape_(s), data_(std::move(values)) {
        if (data_.size() != shape_.numel()) {
            throw ConfigError("Tensor: data length " + std::to_string(data_.size()) +
                              " does not match shape " + shape_.str());
        }
    }

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& at(int n, int c, int y, int x) {
        return data_[((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x];
    }
    double at(int n, int c, int y, int x) const {
        return data_[((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x];
    }

    Graph* graph() const { return graph_; }
    int node() const { return node_; }
    void attach(Graph* g, int node) {
        graph_ = g;
        node_ = node;
    }
    void detach() {
        graph_ = nullptr;
        node_ = -1;
    }

private:
    Shape shape_{};
    std::vector<double> data_;
    Graph* graph_ = nullptr;
    int node_ = -1;
};

// Integer label mask (batch, height, width). Values are class ids or the
// ignore label.
struct IntMask {
    int n = 1;
    int h = 0;
    int w = 0;
    std::vector<int> v;

    IntMask() = default;
    IntMask(int n_, int h_, int w_, int fill = 0)
        : n(n_), h(h_), w(w_), v(static_cast<std::size_t>(n_) * h_ * w_, fill) {}

    int& at(int b, int y, int x) {
        return v[(static_cast<std::size_t>(b) * h + y) * w + x];
    }
    int at(int b, int y, int x) const {
        return v[(static_cast<std::size_t>(b) * h + y) * w + x];
    }
    std::size_t size() const { return v.size(); }
    bool operator==(const IntMask&) const = default;
};

// Define-by-run differentiation tape. Rebuilt per forward pass. Nodes are
// recorded in topological order; backward() runs the closures in reverse,
// accumulating into per-node gradient buffers.
class Graph {
public:
    using BackwardFn = std::function<void(Graph&, int out_node)>;

    // Records an op. The closure reads grad_buffer(out_node) and accumulates
    // into the gradient buffers of its input nodes.
    int record(const Shape& out_shape, BackwardFn backward);

    // Registers a leaf (no backward). Trainable leaves keep their gradient
    // buffers allocated even if untouched by backward.
    int leaf(const Shape& shape, bool trainable);

    // Attaches a tensor to this graph as a trainable leaf.
    void watch(Tensor& t);

    void backward(const Tensor& loss);

    std::vector<double>& grad_buffer(int node);
    const std::vector<double>& grad(const Tensor& t) const;
    const Shape& node_shape(int node) const { return shapes_[node]; }
    std::size_t num_nodes() const { return shapes_.size(); }

private:
    std::vector<Shape> shapes_;
    std::vector<BackwardFn> backwards_;
    std::vector<bool> trainable_;
    std::vector<std::vector<double>> grads_;
    bool ran_backward_ = false;
};

void check_finite(const Tensor& t, const char* op);

}  // namespace canvasrnn
