#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "oninfer/graph.hpp"

namespace oninfer {

struct QuantParams;  // quantize.hpp

// Serialized quantization table carried in model metadata (present on int8 models).
struct QuantMetadata {
  // edge value id -> (scale, zero_point)
  std::map<ValueId, std::pair<float, int>> edges;
  // node id -> weight scale (symmetric, zero_point 0)
  std::map<NodeId, float> weight_scales;
};

struct ModelMetadata {
  int64_t reference_params = -1;  // published totals this model is expected to track
  int64_t reference_ops = -1;
  std::optional<QuantMetadata> quantization;
};

struct ModelFile {
  int version = 1;
  std::string name;
  Graph graph;  // weights not included; they live in the blob
  ModelMetadata meta;
};

// Text format: versioned UTF-8 JSON, top-level keys {version, name, inputs, nodes,
// outputs, metadata}; node = {id, kind, attrs, inputs} where an input is a node id
// (integer) or a graph-input name (string). Unknown kinds and unknown attr keys are
// rejected. Serialization is canonical: sorted keys, 2-space indent, trailing newline,
// floats printed shortest-round-trip (widened to double, exact for fp32).
ModelFile parse_model_text(const std::string& text);
std::string serialize_model_text(const ModelFile& m);

// Weight blob: magic "ONIW", u32 entry count, then per entry u32 name length,
// name bytes, u8 dtype (0 fp32, 1 int8), u8 rank, rank u32 dims, raw little-endian
// payload. Entry names are "<node-id>/w" and "<node-id>/b"; canonical order is
// ascending node id with "b" before "w".
std::vector<uint8_t> serialize_weight_blob(const Graph& g);
void load_weight_blob(const std::vector<uint8_t>& bytes, Graph& g);

// Structural equality used by round-trip tests.
bool models_equal(const ModelFile& a, const ModelFile& b);

// File helpers.
std::string read_file(const std::string& path);
std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file(const std::string& path, const std::string& text);
void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes);

// Loads model text (+ optional weight blob) and validates. Throws ModelLoadError
// wrapping the underlying failure.
ModelFile load_model(const std::string& model_path, const std::string& weights_path = "");

}  // namespace oninfer
