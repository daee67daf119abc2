#include "canvasrnn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include <json.hpp>

namespace canvasrnn {

namespace {

constexpr char kMagic[8] = {'C', 'R', 'N', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
    put_u64(os, std::bit_cast<std::uint64_t>(v));
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
        throw ConfigError("checkpoint: truncated file");
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) {
        throw ConfigError("checkpoint: truncated file");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is) {
    return std::bit_cast<double>(get_u64(is));
}

// All serialized tensors: trainable parameters plus batch-norm running
// statistics, in a fixed order.
std::vector<std::pair<std::string, std::vector<double>*>> tensor_table(SegModel& model,
                                                                       std::vector<Shape>* shapes) {
    std::vector<std::pair<std::string, std::vector<double>*>> table;
    model.for_each_param([&](const std::string& name, Tensor& t) {
        table.emplace_back(name, &t.values());
        if (shapes != nullptr) shapes->push_back(t.shape());
    });
    if (model.config().batch_norm) {
        auto& layers = model.encoder_layers();
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const int c = layers[i].kernel.shape().n;
            table.emplace_back("encoder." + std::to_string(i) + ".bn_mean", &layers[i].bn_mean);
            if (shapes != nullptr) shapes->push_back(Shape{1, c, 1, 1});
            table.emplace_back("encoder." + std::to_string(i) + ".bn_var", &layers[i].bn_var);
            if (shapes != nullptr) shapes->push_back(Shape{1, c, 1, 1});
        }
    }
    return table;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["encoder"] = {{"widths", cfg.encoder.widths},
                    {"output_stride", cfg.encoder.output_stride},
                    {"dilations", cfg.encoder.dilations}};
    j["classes"] = cfg.classes;
    j["rnn_width1"] = cfg.rnn_width1;
    j["rnn_width2"] = cfg.rnn_width2;
    j["iterations"] = cfg.iterations;
    j["crop_size"] = cfg.crop_size;
    j["seed"] = cfg.seed;
    j["batch_norm"] = cfg.batch_norm;
    j["carry_state"] = cfg.carry_state_across_frames;
    return j.dump();
}

ModelConfig model_config_from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    ModelConfig cfg;
    cfg.encoder.widths = j.at("encoder").at("widths").get<std::vector<int>>();
    cfg.encoder.output_stride = j.at("encoder").at("output_stride").get<int>();
    cfg.encoder.dilations = j.at("encoder").at("dilations").get<std::vector<int>>();
    cfg.classes = j.at("classes").get<int>();
    cfg.rnn_width1 = j.at("rnn_width1").get<int>();
    cfg.rnn_width2 = j.at("rnn_width2").get<int>();
    cfg.iterations = j.at("iterations").get<int>();
    cfg.crop_size = j.at("crop_size").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.batch_norm = j.at("batch_norm").get<bool>();
    cfg.carry_state_across_frames = j.at("carry_state").get<bool>();
    return cfg;
}

void save_checkpoint(const std::string& path, SegModel& model) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw ConfigError("checkpoint: cannot open for writing: " + path);
    }
    os.write(kMagic, sizeof(kMagic));
    put_u32(os, kVersion);
    const std::string cfg = model_config_to_json(model.config());
    put_u32(os, static_cast<std::uint32_t>(cfg.size()));
    os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

    std::vector<Shape> shapes;
    auto table = tensor_table(model, &shapes);
    put_u32(os, static_cast<std::uint32_t>(table.size()));
    for (std::size_t i = 0; i < table.size(); ++i) {
        const std::string& name = table[i].first;
        put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(os, 4);
        const Shape& s = shapes[i];
        put_u64(os, static_cast<std::uint64_t>(s.n));
        put_u64(os, static_cast<std::uint64_t>(s.c));
        put_u64(os, static_cast<std::uint64_t>(s.h));
        put_u64(os, static_cast<std::uint64_t>(s.w));
        for (double v : *table[i].second) {
            put_f64(os, v);
        }
    }
    if (!os) {
        throw ConfigError("checkpoint: write failed: " + path);
    }
}

SegModel load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw ConfigError("checkpoint: cannot open: " + path);
    }
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
        throw ConfigError("checkpoint: bad magic in " + path);
    }
    const std::uint32_t version = get_u32(is);
    if (version != kVersion) {
        throw ConfigError("checkpoint: unsupported version " + std::to_string(version));
    }
    const std::uint32_t cfg_len = get_u32(is);
    std::string cfg_text(cfg_len, '\0');
    if (!is.read(cfg_text.data(), cfg_len)) {
        throw ConfigError("checkpoint: truncated config header");
    }
    SegModel model(model_config_from_json(cfg_text));

    std::vector<Shape> shapes;
    auto table = tensor_table(model, &shapes);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < table.size(); ++i) {
        index[table[i].first] = i;
    }
    const std::uint32_t count = get_u32(is);
    if (count != table.size()) {
        throw ConfigError("checkpoint: tensor count " + std::to_string(count) + " does not match model (" +
                          std::to_string(table.size()) + ")");
    }
    for (std::uint32_t t = 0; t < count; ++t) {
        const std::uint32_t name_len = get_u32(is);
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) {
            throw ConfigError("checkpoint: truncated tensor name");
        }
        auto it = index.find(name);
        if (it == index.end()) {
            throw ConfigError("checkpoint: unknown tensor '" + name + "'");
        }
        const std::uint32_t rank = get_u32(is);
        if (rank != 4) {
            throw ConfigError("checkpoint: unexpected rank " + std::to_string(rank));
        }
        Shape s;
        s.n = static_cast<int>(get_u64(is));
        s.c = static_cast<int>(get_u64(is));
        s.h = static_cast<int>(get_u64(is));
        s.w = static_cast<int>(get_u64(is));
        if (!(s == shapes[it->second])) {
            throw ConfigError("checkpoint: shape mismatch for '" + name + "': file " + s.str() +
                              " vs model " + shapes[it->second].str());
        }
        std::vector<double>& dst = *table[it->second].second;
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] = get_f64(is);
        }
    }
    return model;
}

}  // namespace canvasrnn
