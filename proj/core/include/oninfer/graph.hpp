#pragma once

#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "oninfer/errors.hpp"

namespace oninfer {

// Row-major everywhere; images are channels-first; 3D volumes are depth x height x width.
struct Shape {
  std::vector<int64_t> dims;

  Shape() = default;
  Shape(std::initializer_list<int64_t> d) : dims(d) {}
  explicit Shape(std::vector<int64_t> d) : dims(std::move(d)) {}

  int rank() const { return static_cast<int>(dims.size()); }
  int64_t elems() const {
    int64_t n = 1;
    for (int64_t d : dims) n *= d;
    return n;
  }
  bool operator==(const Shape& o) const { return dims == o.dims; }
  bool operator!=(const Shape& o) const { return !(*this == o); }
  std::string str() const {
    std::string s = "(";
    for (size_t i = 0; i < dims.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(dims[i]);
    }
    return s + ")";
  }
};

enum class DType : uint8_t { Fp32 = 0, Int8 = 1 };

struct Tensor {
  Shape shape;
  DType dtype = DType::Fp32;
  std::vector<float> f;    // payload when dtype == Fp32
  std::vector<int8_t> q;   // payload when dtype == Int8

  Tensor() = default;
  static Tensor zeros(Shape s) {
    Tensor t;
    t.shape = std::move(s);
    t.f.assign(static_cast<size_t>(t.shape.elems()), 0.0f);
    return t;
  }
  static Tensor from(Shape s, std::vector<float> data) {
    Tensor t;
    t.shape = std::move(s);
    t.f = std::move(data);
    if (static_cast<int64_t>(t.f.size()) != t.shape.elems())
      throw Error(Errc::ShapeMismatch, "payload length " + std::to_string(t.f.size()) +
                                           " != elems of " + t.shape.str());
    return t;
  }
  int64_t elems() const { return shape.elems(); }
};

enum class LayerKind : uint8_t {
  Conv2D,
  Conv3D,
  MaxPool2D,
  MaxPool3D,
  Dense,
  ReLU,
  LeakyReLU,
  Sigmoid,
  GreaterThan,
  Concat,
  Flatten,
};

const char* kind_name(LayerKind k);
bool kind_from_string(const std::string& s, LayerKind& out);

struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  // Conv*/MaxPool*: per-axis kernel/window, stride, zero padding (size 2 or 3).
  std::vector<int> kernel;
  std::vector<int> stride;
  std::vector<int> pad;
  int in_ch = 0;    // Conv*: input channels; Dense: input features
  int out_ch = 0;   // Conv*: output channels; Dense: output features
  bool has_bias = true;
  float alpha = 0.01f;  // LeakyReLU slope
  float theta = 0.5f;   // GreaterThan threshold (strict >)
  int axis = 0;         // Concat axis

  bool is_conv() const { return kind == LayerKind::Conv2D || kind == LayerKind::Conv3D; }
  bool is_pool() const { return kind == LayerKind::MaxPool2D || kind == LayerKind::MaxPool3D; }
  bool is_activation() const {
    return kind == LayerKind::ReLU || kind == LayerKind::LeakyReLU || kind == LayerKind::Sigmoid;
  }
  int spatial_rank() const {
    return (kind == LayerKind::Conv2D || kind == LayerKind::MaxPool2D) ? 2 : 3;
  }
};

using NodeId = int32_t;
// A value reference is either a node id (>= 0) or a graph input (input k encoded as -1-k).
using ValueId = int32_t;

inline ValueId graph_input_value(int k) { return -1 - k; }
inline bool is_graph_input(ValueId v) { return v < 0; }
inline int graph_input_index(ValueId v) { return -1 - v; }

struct Node {
  NodeId id = 0;
  LayerSpec spec;
  std::vector<ValueId> inputs;
};

struct GraphInput {
  std::string name;
  Shape shape;
};

struct Graph {
  std::vector<Node> nodes;                 // arbitrary order; ids unique, >= 0
  std::vector<GraphInput> inputs;
  std::vector<NodeId> outputs;
  std::map<NodeId, std::map<std::string, Tensor>> weights;  // per node: "w", "b"

  const Node* find_node(NodeId id) const {
    for (const auto& n : nodes)
      if (n.id == id) return &n;
    return nullptr;
  }
  const Tensor* find_weight(NodeId id, const std::string& name) const {
    auto it = weights.find(id);
    if (it == weights.end()) return nullptr;
    auto jt = it->second.find(name);
    return jt == it->second.end() ? nullptr : &jt->second;
  }
  int input_index(const std::string& name) const {
    for (size_t i = 0; i < inputs.size(); ++i)
      if (inputs[i].name == name) return static_cast<int>(i);
    return -1;
  }
};

struct Violation {
  NodeId node = -1;  // -1 for graph-level violations
  std::string rule;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string str() const {
    std::string s;
    for (const auto& v : violations) {
      s += "node " + std::to_string(v.node) + " [" + v.rule + "] " + v.message + "\n";
    }
    return s;
  }
};

ValidationReport validate_graph(const Graph& g);

// Output shape per node. Throws NegativeDimension / ShapeMismatch on inconsistent graphs.
std::unordered_map<NodeId, Shape> infer_shapes(const Graph& g);

// Shape of a value reference given inferred node shapes.
Shape value_shape(const Graph& g, const std::unordered_map<NodeId, Shape>& shapes, ValueId v);

// Deterministic topological order (ties broken by ascending node id). Throws CycleDetected.
std::vector<NodeId> topological_order(const Graph& g);

// Per-axis convolution/pool output extent: floor((in + 2*pad - kernel)/stride) + 1.
int64_t conv_out_dim(int64_t in, int kernel, int stride, int pad);

}  // namespace oninfer
