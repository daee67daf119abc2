#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "canvasrnn/tensor.hpp"

namespace canvasrnn {

struct ConfusionMatrix {
    int classes = 0;
    std::vector<std::int64_t> counts;  // counts[truth * K + pred]
    std::int64_t ignored = 0;

    explicit ConfusionMatrix(int K)
        : classes(K), counts(static_cast<std::size_t>(K) * K, 0) {}

    void add(const IntMask& pred, const IntMask& truth, int ignore_label);
    void merge(const ConfusionMatrix& other);
    std::int64_t total() const;
};

struct IouReport {
    std::vector<double> per_class;
    std::vector<bool> present;  // class appears in prediction or truth
    double mean = 0.0;          // over present classes only
};

IouReport miou(const ConfusionMatrix& cm);
IouReport miou(const IntMask& pred, const IntMask& truth, int K, int ignore_label = 255);

// Instance-weighted IOU: each ground-truth pixel's TP/FN contribution is
// scaled by (class average instance size)/(its instance size); FP counts
// are unweighted. Pixels without an instance id (0) get weight 1.
IouReport iiou(const IntMask& pred, const IntMask& truth, const IntMask& instances, int K,
               int ignore_label = 255);

}  // namespace canvasrnn
