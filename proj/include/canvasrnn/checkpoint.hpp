#pragma once

#include <string>

#include "canvasrnn/model.hpp"

namespace canvasrnn {

// Little-endian binary checkpoint: magic "CRNNCKPT", u32 version, u32 config
// JSON length, JSON bytes, u32 tensor count, then per tensor: u32 name
// length, name bytes, u32 rank (always 4), 4 x u64 dims, raw IEEE-754
// doubles. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, SegModel& model);
SegModel load_checkpoint(const std::string& path);

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& json_text);

}  // namespace canvasrnn
