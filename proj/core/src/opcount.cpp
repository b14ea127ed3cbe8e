#include "oninfer/opcount.hpp"

namespace oninfer {

int64_t count_parameters(const Graph& g) {
  int64_t total = 0;
  for (const auto& n : g.nodes) {
    const LayerSpec& s = n.spec;
    if (s.kind == LayerKind::Dense) {
      total += static_cast<int64_t>(s.out_ch) * s.in_ch;
      if (s.has_bias) total += s.out_ch;
    } else if (s.is_conv()) {
      int64_t kvol = 1;
      for (int k : s.kernel) kvol *= k;
      total += static_cast<int64_t>(s.out_ch) * s.in_ch * kvol;
      if (s.has_bias) total += s.out_ch;
    }
  }
  return total;
}

std::map<NodeId, int64_t> count_operations_by_node(const Graph& g,
                                                   const OpCountConvention& conv) {
  auto shapes = infer_shapes(g);
  std::map<NodeId, int64_t> per_node;
  for (const auto& n : g.nodes) {
    const LayerSpec& s = n.spec;
    int64_t out_elems = shapes.at(n.id).elems();
    int64_t ops = 0;
    switch (s.kind) {
      case LayerKind::Conv2D:
      case LayerKind::Conv3D: {
        int64_t kvol = 1;
        for (int k : s.kernel) kvol *= k;
        int64_t fan_in = static_cast<int64_t>(s.in_ch) * kvol;
        ops = out_elems * fan_in * conv.mac_ops;
        if (s.has_bias) ops += out_elems * conv.bias_ops_per_output;
        break;
      }
      case LayerKind::Dense: {
        ops = out_elems * s.in_ch * conv.mac_ops;
        if (s.has_bias) ops += out_elems * conv.bias_ops_per_output;
        break;
      }
      case LayerKind::MaxPool2D:
      case LayerKind::MaxPool3D: {
        int64_t window = 1;
        for (int k : s.kernel) window *= k;
        ops = conv.pool_ops_per_output_is_window_minus_1 ? out_elems * (window - 1) : 0;
        break;
      }
      case LayerKind::ReLU:
      case LayerKind::LeakyReLU:
      case LayerKind::Sigmoid:
        ops = out_elems * conv.activation_ops_per_element;
        break;
      case LayerKind::GreaterThan:
        ops = out_elems * conv.compare_ops_per_element;
        break;
      case LayerKind::Concat:
      case LayerKind::Flatten:
        ops = 0;
        break;
    }
    per_node[n.id] = ops;
  }
  return per_node;
}

int64_t count_operations(const Graph& g, const OpCountConvention& conv) {
  int64_t total = 0;
  for (const auto& [id, ops] : count_operations_by_node(g, conv)) total += ops;
  return total;
}

}  // namespace oninfer
