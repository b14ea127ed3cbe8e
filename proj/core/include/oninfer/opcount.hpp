#pragma once

#include <cstdint>
#include <map>

#include "oninfer/graph.hpp"

namespace oninfer {

// Scalar-operation accounting. The counting convention is configurable because
// published totals rarely state one; deviations are reported, never hidden.
struct OpCountConvention {
  int mac_ops = 2;               // multiply + add per kernel/dense tap
  int bias_ops_per_output = 1;   // one add per biased output element
  int pool_ops_per_output_is_window_minus_1 = 1;  // pool = (window-1) comparisons per output
  int activation_ops_per_element = 1;
  int compare_ops_per_element = 1;  // GreaterThan
  // Concat/Flatten are data movement: zero ops.
};

int64_t count_parameters(const Graph& g);

// Closed-form per-node scalar op count under `conv`:
//   conv/dense: out_elems * fan_in * mac_ops + (has_bias ? out_elems * bias_ops : 0)
//   pool:       out_elems * (window - 1)
//   activation: out_elems;  compare: out_elems;  concat/flatten: 0
std::map<NodeId, int64_t> count_operations_by_node(const Graph& g,
                                                   const OpCountConvention& conv = {});
int64_t count_operations(const Graph& g, const OpCountConvention& conv = {});

}  // namespace oninfer
