#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "canvasrnn/tensor.hpp"

namespace canvasrnn {

constexpr int kIgnoreLabel = 255;

struct SegSample {
    Tensor image;       // (1, 3, h, w), values in [0,1]
    IntMask label;      // (1, h, w), class ids or ignore
    IntMask instances;  // (1, h, w), 1-based instance ids; 0 = none
};

struct VideoSequence {
    std::vector<SegSample> frames;
    std::vector<std::pair<double, double>> displacements;  // per-frame (dx, dy)
};

enum class ShapeStyle {
    Solid,  // filled disk / rectangle / triangle
    Fine,   // thin rings, spoked wheels, rectangle outlines
};

// 1-3 non-overlapping anti-aliased shapes per image on a textured
// background. Shape classes are 1..K-1 (0 is background); K in [2,4].
// Labels are crisp (no anti-aliasing). Deterministic per seed.
std::vector<SegSample> generate_shapes(std::uint64_t seed, int count, int size, int K,
                                       ShapeStyle style = ShapeStyle::Solid);

// Shapes translate rigidly at `velocity` pixels/frame; labels move with
// them, clipped at frame borders.
VideoSequence generate_video(std::uint64_t seed, int frames, int size,
                             std::pair<double, double> velocity, int K = 4,
                             ShapeStyle style = ShapeStyle::Solid);

// --- on-disk formats ---

void write_ppm(const std::string& path, const Tensor& image);
Tensor read_ppm(const std::string& path);
void write_pgm(const std::string& path, const IntMask& mask);
IntMask read_pgm(const std::string& path);

struct Dataset {
    int classes = 0;
    std::vector<SegSample> samples;
};

// Writes images as PPM (P6), labels/instances as PGM (P5), and a JSON
// manifest {classes, samples:[{image,label,instances?}]}.
void write_dataset(const std::string& dir, const std::vector<SegSample>& samples, int K,
                   const std::string& stem = "sample");
Dataset load_dataset(const std::string& manifest_path);

}  // namespace canvasrnn
