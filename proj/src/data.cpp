#include "canvasrnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "canvasrnn/util.hpp"

namespace canvasrnn {

namespace {

constexpr double kPi = 3.14159265358979323846;

enum class ShapeKind { Disk, Rect, Triangle, Ring, Wheel, RectOutline };

struct SceneShape {
    ShapeKind kind = ShapeKind::Disk;
    int cls = 1;
    int instance = 1;
    double cx = 0, cy = 0;
    double r = 0;            // radius / half-diagonal scale
    double hw = 0, hh = 0;   // rectangle half extents
    double vx[3] = {0, 0, 0}, vy[3] = {0, 0, 0};  // triangle vertices (offsets from center)
    double angle = 0;        // wheel spoke phase
    double color[3] = {0.5, 0.5, 0.5};

    double bounding_radius() const {
        switch (kind) {
            case ShapeKind::Rect:
            case ShapeKind::RectOutline:
                return std::sqrt(hw * hw + hh * hh);
            default:
                return r;
        }
    }

    bool inside(double x, double y) const {
        const double dx = x - cx;
        const double dy = y - cy;
        switch (kind) {
            case ShapeKind::Disk:
                return dx * dx + dy * dy <= r * r;
            case ShapeKind::Rect:
                return std::abs(dx) <= hw && std::abs(dy) <= hh;
            case ShapeKind::RectOutline: {
                const double t = 2.0;
                const bool outer = std::abs(dx) <= hw && std::abs(dy) <= hh;
                const bool inner = std::abs(dx) <= hw - t && std::abs(dy) <= hh - t;
                return outer && !inner;
            }
            case ShapeKind::Triangle: {
                auto side = [&](int i, int j) {
                    const double ex = vx[j] - vx[i];
                    const double ey = vy[j] - vy[i];
                    return ex * (dy - vy[i]) - ey * (dx - vx[i]);
                };
                const double s0 = side(0, 1), s1 = side(1, 2), s2 = side(2, 0);
                return (s0 >= 0 && s1 >= 0 && s2 >= 0) || (s0 <= 0 && s1 <= 0 && s2 <= 0);
            }
            case ShapeKind::Ring: {
                const double d2 = dx * dx + dy * dy;
                const double t = 2.0;
                return d2 <= r * r && d2 >= (r - t) * (r - t);
            }
            case ShapeKind::Wheel: {
                const double d2 = dx * dx + dy * dy;
                if (d2 > r * r) return false;
                const double t = 2.0;
                if (d2 >= (r - t) * (r - t)) return true;       // rim
                const double hub = r / 4.0;
                if (d2 <= hub * hub) return true;               // hub
                // spokes: distance to radial lines through the center
                const double d = std::sqrt(d2);
                for (int s = 0; s < 6; ++s) {
                    const double th = angle + s * kPi / 6.0;
                    const double ux = std::cos(th), uy = std::sin(th);
                    const double along = dx * ux + dy * uy;
                    const double across = std::abs(-dx * uy + dy * ux);
                    (void)d;
                    if (across <= 0.8 && std::abs(along) <= r) return true;
                }
                return false;
            }
        }
        return false;
    }
};

const double kClassColors[4][3] = {
    {0.50, 0.50, 0.50},  // background
    {0.85, 0.25, 0.25},
    {0.25, 0.80, 0.30},
    {0.25, 0.35, 0.85},
};

ShapeKind kind_for_class(int cls, ShapeStyle style) {
    if (style == ShapeStyle::Solid) {
        switch (cls) {
            case 1: return ShapeKind::Disk;
            case 2: return ShapeKind::Rect;
            default: return ShapeKind::Triangle;
        }
    }
    switch (cls) {
        case 1: return ShapeKind::Ring;
        case 2: return ShapeKind::Wheel;
        default: return ShapeKind::RectOutline;
    }
}

std::vector<SceneShape> place_shapes(Rng& rng, int size, int K, ShapeStyle style) {
    const double r_min = std::max(6.0, size * 0.18);
    const double r_max = std::max(r_min + 1.0, size * 0.28);
    if (size - 2.0 * (r_max + 2.0) < 1.0) {
        throw ConfigError("generate_shapes: size " + std::to_string(size) +
                          " too small to place shapes");
    }
    const int target = 1 + rng.uniform_int(0, 2);
    std::vector<SceneShape> shapes;
    for (int i = 0; i < target; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            SceneShape s;
            s.cls = 1 + rng.uniform_int(0, K - 2);
            s.kind = kind_for_class(s.cls, style);
            s.instance = static_cast<int>(shapes.size()) + 1;
            s.r = rng.uniform(r_min, r_max);
            const double margin = s.r + 2.0;
            s.cx = rng.uniform(margin, size - 1 - margin);
            s.cy = rng.uniform(margin, size - 1 - margin);
            if (s.kind == ShapeKind::Rect || s.kind == ShapeKind::RectOutline) {
                s.hw = s.r * rng.uniform(0.7, 1.0);
                s.hh = s.r * rng.uniform(0.7, 1.0);
            } else if (s.kind == ShapeKind::Triangle) {
                const double base = rng.uniform(0.0, 2.0 * kPi);
                for (int v = 0; v < 3; ++v) {
                    const double th = base + v * 2.0 * kPi / 3.0 + rng.uniform(-0.25, 0.25);
                    s.vx[v] = s.r * std::cos(th);
                    s.vy[v] = s.r * std::sin(th);
                }
            } else if (s.kind == ShapeKind::Wheel) {
                s.angle = rng.uniform(0.0, kPi / 6.0);
            }
            for (int c = 0; c < 3; ++c) {
                s.color[c] = std::clamp(kClassColors[s.cls][c] + rng.uniform(-0.08, 0.08), 0.0, 1.0);
            }
            bool overlaps = false;
            for (const SceneShape& other : shapes) {
                const double dx = s.cx - other.cx;
                const double dy = s.cy - other.cy;
                const double lim = s.bounding_radius() + other.bounding_radius() + 2.0;
                if (dx * dx + dy * dy < lim * lim) {
                    overlaps = true;
                    break;
                }
            }
            if (!overlaps) {
                shapes.push_back(s);
                placed = true;
            }
        }
        if (!placed && shapes.empty()) {
            throw ConfigError("generate_shapes: could not place any shape at size " +
                              std::to_string(size));
        }
    }
    return shapes;
}

struct BackgroundField {
    double fx = 0, fy = 0, phase = 0;
    std::vector<double> noise;  // per pixel per channel, [-0.04, 0.04]

    static BackgroundField make(Rng& rng, int size) {
        BackgroundField bg;
        bg.fx = rng.uniform(0.02, 0.06);
        bg.fy = rng.uniform(0.02, 0.06);
        bg.phase = rng.uniform(0.0, 2.0 * kPi);
        bg.noise.resize(static_cast<std::size_t>(size) * size * 3);
        for (double& v : bg.noise) {
            v = rng.uniform(-0.04, 0.04);
        }
        return bg;
    }
};

SegSample rasterize(const std::vector<SceneShape>& shapes, const BackgroundField& bg, int size,
                    std::pair<double, double> offset = {0.0, 0.0}) {
    SegSample sample;
    sample.image = Tensor(Shape{1, 3, size, size});
    sample.label = IntMask(1, size, size, 0);
    sample.instances = IntMask(1, size, size, 0);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            // Anti-aliased coverage for the image; crisp center test for labels.
            const SceneShape* hit = nullptr;
            double coverage = 0.0;
            for (const SceneShape& s : shapes) {
                SceneShape moved = s;
                moved.cx += offset.first;
                moved.cy += offset.second;
                int in_count = 0;
                for (int sy = 0; sy < 3; ++sy) {
                    for (int sx = 0; sx < 3; ++sx) {
                        if (moved.inside(x + (sx - 1) / 3.0, y + (sy - 1) / 3.0)) {
                            ++in_count;
                        }
                    }
                }
                if (in_count > 0) {
                    hit = &s;
                    coverage = in_count / 9.0;
                    if (moved.inside(x, y)) {
                        sample.label.at(0, y, x) = s.cls;
                        sample.instances.at(0, y, x) = s.instance;
                    }
                    break;  // shapes do not overlap
                }
            }
            const double tex =
                0.5 + 0.08 * std::sin(2.0 * kPi * (bg.fx * x + bg.fy * y) + bg.phase);
            for (int c = 0; c < 3; ++c) {
                double v = tex;
                if (hit != nullptr) {
                    v = (1.0 - coverage) * tex + coverage * hit->color[c];
                }
                v += bg.noise[(static_cast<std::size_t>(y) * size + x) * 3 + c];
                sample.image.at(0, c, y, x) = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return sample;
}

}  // namespace

std::vector<SegSample> generate_shapes(std::uint64_t seed, int count, int size, int K,
                                       ShapeStyle style) {
    if (size < 33 || size % 32 != 1) {
        throw ConfigError("generate_shapes: size must be a multiple of 32 plus one, got " +
                          std::to_string(size));
    }
    if (K < 2 || K > 4) {
        throw ConfigError("generate_shapes: K must be in [2,4], got " + std::to_string(K));
    }
    std::vector<SegSample> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        Rng rng(Rng::substream(seed, static_cast<std::uint64_t>(i)));
        const auto shapes = place_shapes(rng, size, K, style);
        const auto bg = BackgroundField::make(rng, size);
        out.push_back(rasterize(shapes, bg, size));
    }
    return out;
}

VideoSequence generate_video(std::uint64_t seed, int frames, int size,
                             std::pair<double, double> velocity, int K, ShapeStyle style) {
    if (std::abs(velocity.first) > 5.0 || std::abs(velocity.second) > 5.0) {
        throw ConfigError("generate_video: |velocity| must be <= 5 pixels/frame");
    }
    if (frames < 1) {
        throw ConfigError("generate_video: need at least one frame");
    }
    Rng rng(Rng::substream(seed, 0));
    const auto shapes = place_shapes(rng, size, K, style);
    const auto bg = BackgroundField::make(rng, size);
    VideoSequence seq;
    for (int f = 0; f < frames; ++f) {
        const std::pair<double, double> offset{velocity.first * f, velocity.second * f};
        seq.frames.push_back(rasterize(shapes, bg, size, offset));
        seq.displacements.push_back(offset);
    }
    return seq;
}

// --- PNM I/O ---

namespace {

int pnm_next_int(std::istream& is, const std::string& path) {
    // Skips whitespace and '#' comments.
    int ch = is.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = is.get();
        } else if (!std::isspace(ch)) {
            break;
        }
        ch = is.get();
    }
    if (ch == EOF || !std::isdigit(ch)) {
        throw ConfigError("pnm: malformed header in " + path);
    }
    int v = 0;
    while (ch != EOF && std::isdigit(ch)) {
        v = v * 10 + (ch - '0');
        ch = is.get();
    }
    return v;
}

}  // namespace

void write_ppm(const std::string& path, const Tensor& image) {
    const Shape& s = image.shape();
    if (s.n != 1 || s.c != 3) {
        throw ConfigError("write_ppm: expected (1,3,h,w), got " + s.str());
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw ConfigError("write_ppm: cannot open " + path);
    }
    os << "P6\n" << s.w << " " << s.h << "\n255\n";
    for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(image.at(0, c, y, x), 0.0, 1.0);
                os.put(static_cast<char>(static_cast<int>(std::lround(v * 255.0))));
            }
        }
    }
}

Tensor read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw ConfigError("read_ppm: cannot open " + path);
    }
    char m0 = static_cast<char>(is.get());
    char m1 = static_cast<char>(is.get());
    if (m0 != 'P' || m1 != '6') {
        throw ConfigError("read_ppm: not a P6 file: " + path);
    }
    const int w = pnm_next_int(is, path);
    const int h = pnm_next_int(is, path);
    const int maxval = pnm_next_int(is, path);
    if (maxval != 255) {
        throw ConfigError("read_ppm: maxval must be 255 in " + path);
    }
    std::vector<char> buf(static_cast<std::size_t>(w) * h * 3);
    if (!is.read(buf.data(), static_cast<std::streamsize>(buf.size()))) {
        throw ConfigError("read_ppm: truncated payload in " + path);
    }
    Tensor image(Shape{1, 3, h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                image.at(0, c, y, x) =
                    static_cast<unsigned char>(buf[(static_cast<std::size_t>(y) * w + x) * 3 + c]) /
                    255.0;
            }
        }
    }
    return image;
}

void write_pgm(const std::string& path, const IntMask& mask) {
    if (mask.n != 1) {
        throw ConfigError("write_pgm: batch must be 1");
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw ConfigError("write_pgm: cannot open " + path);
    }
    os << "P5\n" << mask.w << " " << mask.h << "\n255\n";
    for (int v : mask.v) {
        if (v < 0 || v > 255) {
            throw ConfigError("write_pgm: value " + std::to_string(v) + " out of 8-bit range");
        }
        os.put(static_cast<char>(v));
    }
}

IntMask read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw ConfigError("read_pgm: cannot open " + path);
    }
    char m0 = static_cast<char>(is.get());
    char m1 = static_cast<char>(is.get());
    if (m0 != 'P' || m1 != '5') {
        throw ConfigError("read_pgm: not a P5 file: " + path);
    }
    const int w = pnm_next_int(is, path);
    const int h = pnm_next_int(is, path);
    const int maxval = pnm_next_int(is, path);
    if (maxval != 255) {
        throw ConfigError("read_pgm: maxval must be 255 in " + path);
    }
    std::vector<char> buf(static_cast<std::size_t>(w) * h);
    if (!is.read(buf.data(), static_cast<std::streamsize>(buf.size()))) {
        throw ConfigError("read_pgm: truncated payload in " + path);
    }
    IntMask mask(1, h, w);
    for (std::size_t i = 0; i < buf.size(); ++i) {
        mask.v[i] = static_cast<unsigned char>(buf[i]);
    }
    return mask;
}

void write_dataset(const std::string& dir, const std::vector<SegSample>& samples, int K,
                   const std::string& stem) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["classes"] = K;
    manifest["samples"] = nlohmann::json::array();
    char idx[16];
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::snprintf(idx, sizeof(idx), "%04zu", i);
        const std::string img = stem + "_" + idx + "_img.ppm";
        const std::string lab = stem + "_" + idx + "_lab.pgm";
        const std::string inst = stem + "_" + idx + "_inst.pgm";
        write_ppm(dir + "/" + img, samples[i].image);
        write_pgm(dir + "/" + lab, samples[i].label);
        nlohmann::json entry = {{"image", img}, {"label", lab}};
        if (!samples[i].instances.v.empty()) {
            write_pgm(dir + "/" + inst, samples[i].instances);
            entry["instances"] = inst;
        }
        manifest["samples"].push_back(entry);
    }
    // Manifest written last, after all sample files are on disk.
    std::ofstream os(dir + "/manifest.json", std::ios::trunc);
    os << manifest.dump(2) << "\n";
    if (!os) {
        throw ConfigError("write_dataset: cannot write manifest in " + dir);
    }
}

Dataset load_dataset(const std::string& manifest_path) {
    std::ifstream is(manifest_path);
    if (!is) {
        throw ConfigError("load_dataset: cannot open manifest: " + manifest_path);
    }
    nlohmann::json manifest;
    try {
        is >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("load_dataset: bad manifest " + manifest_path + ": " + e.what());
    }
    Dataset ds;
    ds.classes = manifest.at("classes").get<int>();
    const std::string dir = std::filesystem::path(manifest_path).parent_path().string();
    auto resolve = [&](const std::string& rel) {
        const std::string path = dir.empty() ? rel : dir + "/" + rel;
        if (!std::filesystem::exists(path)) {
            throw ConfigError("load_dataset: missing file: " + path);
        }
        return path;
    };
    for (const auto& entry : manifest.at("samples")) {
        SegSample sample;
        sample.image = read_ppm(resolve(entry.at("image").get<std::string>()));
        const std::string lab_path = resolve(entry.at("label").get<std::string>());
        sample.label = read_pgm(lab_path);
        for (int v : sample.label.v) {
            if (v >= ds.classes && v != kIgnoreLabel) {
                throw ConfigError("load_dataset: label " + std::to_string(v) + " >= K=" +
                                  std::to_string(ds.classes) + " in " + lab_path);
            }
        }
        if (entry.contains("instances")) {
            sample.instances = read_pgm(resolve(entry.at("instances").get<std::string>()));
        }
        ds.samples.push_back(std::move(sample));
    }
    return ds;
}

}  // namespace canvasrnn
