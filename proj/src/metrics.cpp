#include "canvasrnn/metrics.hpp"

#include <map>

namespace canvasrnn {

void ConfusionMatrix::add(const IntMask& pred, const IntMask& truth, int ignore_label) {
    if (pred.n != truth.n || pred.h != truth.h || pred.w != truth.w) {
        throw ConfigError("ConfusionMatrix::add: shape mismatch");
    }
    for (std::size_t i = 0; i < truth.v.size(); ++i) {
        const int t = truth.v[i];
        if (t == ignore_label) {
            ++ignored;
            continue;
        }
        const int p = pred.v[i];
        if (t < 0 || t >= classes || p < 0 || p >= classes) {
            throw ConfigError("ConfusionMatrix::add: class id out of range");
        }
        ++counts[static_cast<std::size_t>(t) * classes + p];
    }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.classes != classes) {
        throw ConfigError("ConfusionMatrix::merge: class count mismatch");
    }
    for (std::size_t i = 0; i < counts.size(); ++i) {
        counts[i] += other.counts[i];
    }
    ignored += other.ignored;
}

std::int64_t ConfusionMatrix::total() const {
    std::int64_t t = 0;
    for (std::int64_t c : counts) t += c;
    return t;
}

IouReport miou(const ConfusionMatrix& cm) {
    const int K = cm.classes;
    IouReport report;
    report.per_class.assign(K, 0.0);
    report.present.assign(K, false);
    double sum = 0.0;
    int n_present = 0;
    for (int k = 0; k < K; ++k) {
        std::int64_t tp = cm.counts[static_cast<std::size_t>(k) * K + k];
        std::int64_t fp = 0, fn = 0;
        for (int j = 0; j < K; ++j) {
            if (j == k) continue;
            fp += cm.counts[static_cast<std::size_t>(j) * K + k];
            fn += cm.counts[static_cast<std::size_t>(k) * K + j];
        }
        const std::int64_t uni = tp + fp + fn;
        if (uni == 0) {
            continue;  // class absent from both prediction and truth
        }
        report.present[k] = true;
        report.per_class[k] = static_cast<double>(tp) / static_cast<double>(uni);
        sum += report.per_class[k];
        ++n_present;
    }
    report.mean = n_present > 0 ? sum / n_present : 0.0;
    return report;
}

IouReport miou(const IntMask& pred, const IntMask& truth, int K, int ignore_label) {
    ConfusionMatrix cm(K);
    cm.add(pred, truth, ignore_label);
    return miou(cm);
}

IouReport iiou(const IntMask& pred, const IntMask& truth, const IntMask& instances, int K,
               int ignore_label) {
    if (pred.v.size() != truth.v.size() || instances.v.size() != truth.v.size()) {
        throw ConfigError("iiou: shape mismatch");
    }
    // Instance sizes over ground-truth pixels; instances are keyed by
    // (class, id) so an id may be reused across classes.
    std::map<std::pair<int, int>, std::int64_t> inst_size;
    std::vector<std::int64_t> class_inst_pixels(K, 0);
    std::vector<std::int64_t> class_inst_count(K, 0);
    for (std::size_t i = 0; i < truth.v.size(); ++i) {
        const int t = truth.v[i];
        if (t == ignore_label || instances.v[i] == 0) continue;
        auto [it, inserted] = inst_size.try_emplace({t, instances.v[i]}, 0);
        ++it->second;
    }
    for (const auto& [key, size] : inst_size) {
        if (size == 0) {
            throw ConfigError("iiou: instance of size 0");
        }
        class_inst_pixels[key.first] += size;
        ++class_inst_count[key.first];
    }
    std::vector<double> avg_size(K, 0.0);
    for (int k = 0; k < K; ++k) {
        if (class_inst_count[k] > 0) {
            avg_size[k] = static_cast<double>(class_inst_pixels[k]) / class_inst_count[k];
        }
    }

    std::vector<double> tp_w(K, 0.0), fn_w(K, 0.0);
    std::vector<std::int64_t> fp(K, 0), seen_truth(K, 0), seen_pred(K, 0);
    for (std::size_t i = 0; i < truth.v.size(); ++i) {
        const int t = truth.v[i];
        if (t == ignore_label) continue;
        const int p = pred.v[i];
        if (t < 0 || t >= K || p < 0 || p >= K) {
            throw ConfigError("iiou: class id out of range");
        }
        ++seen_truth[t];
        ++seen_pred[p];
        double w = 1.0;
        if (instances.v[i] != 0) {
            w = avg_size[t] / static_cast<double>(inst_size.at({t, instances.v[i]}));
        }
        if (p == t) {
            tp_w[t] += w;
        } else {
            fn_w[t] += w;
            ++fp[p];
        }
    }
    IouReport report;
    report.per_class.assign(K, 0.0);
    report.present.assign(K, false);
    double sum = 0.0;
    int n_present = 0;
    for (int k = 0; k < K; ++k) {
        if (seen_truth[k] == 0 && seen_pred[k] == 0) continue;
        const double denom = tp_w[k] + fn_w[k] + static_cast<double>(fp[k]);
        report.present[k] = true;
        report.per_class[k] = denom > 0 ? tp_w[k] / denom : 0.0;
        sum += report.per_class[k];
        ++n_present;
    }
    report.mean = n_present > 0 ? sum / n_present : 0.0;
    return report;
}

}  // namespace canvasrnn
