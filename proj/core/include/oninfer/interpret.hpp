#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "oninfer/graph.hpp"
#include "oninfer/opcount.hpp"

namespace oninfer {

struct NodeTrace {
  NodeId id = 0;
  Tensor output;
  uint64_t ops = 0;      // scalar-op tally counted inside the kernel loops
  double seconds = 0.0;  // wall time of this node
};

struct ExecutionTrace {
  std::vector<NodeTrace> nodes;
  uint64_t total_ops = 0;
};

struct RunResult {
  std::vector<Tensor> outputs;  // one per graph output, declaration order
  std::optional<ExecutionTrace> trace;
};

// Counter threaded through the kernels when instrumenting. Kernels increment it
// from inside their loops so the tally is what actually executed, not a formula.
struct OpCounter {
  const OpCountConvention* conv = nullptr;
  uint64_t ops = 0;
  void mac() {
    if (conv) ops += static_cast<uint64_t>(conv->mac_ops);
  }
  void bias() {
    if (conv) ops += static_cast<uint64_t>(conv->bias_ops_per_output);
  }
  void compare_pool() {
    if (conv) ops += static_cast<uint64_t>(conv->pool_ops_per_output_is_window_minus_1);
  }
  void activation() {
    if (conv) ops += static_cast<uint64_t>(conv->activation_ops_per_element);
  }
  void compare() {
    if (conv) ops += static_cast<uint64_t>(conv->compare_ops_per_element);
  }
};

// Deterministic fp32 reference executor. Nodes run one per stage in topological
// order (streaming semantics); accumulations use a fixed ascending order so two
// runs are bit-identical.
RunResult run_graph(const Graph& g, const std::map<std::string, Tensor>& inputs,
                    bool instrument = false, const OpCountConvention& conv = {});

// Layer kernels (exposed for oracle tests). `counter` may be null.
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor* b,
                      const std::vector<int>& stride, const std::vector<int>& pad,
                      OpCounter* counter = nullptr);
Tensor conv3d_forward(const Tensor& x, const Tensor& w, const Tensor* b,
                      const std::vector<int>& stride, const std::vector<int>& pad,
                      OpCounter* counter = nullptr);
Tensor pool_forward(const Tensor& x, const std::vector<int>& window,
                    const std::vector<int>& stride, const std::vector<int>& pad, int spatial_rank,
                    OpCounter* counter = nullptr);
Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor* b,
                     OpCounter* counter = nullptr);
Tensor activation_forward(const Tensor& x, LayerKind kind, float alpha,
                          OpCounter* counter = nullptr);
Tensor threshold_forward(const Tensor& x, float theta, OpCounter* counter = nullptr);
Tensor concat_forward(const std::vector<const Tensor*>& xs, int axis,
                      OpCounter* counter = nullptr);
Tensor flatten_forward(const Tensor& x, OpCounter* counter = nullptr);

namespace detail {
// Single-node execution against a bound value map (ValueId -> Tensor). Shared by
// run_graph and the device simulator so both paths are the same arithmetic.
Tensor execute_node(const Graph& g, const Node& n, const std::map<ValueId, Tensor>& values,
                    OpCounter* counter);
}  // namespace detail

// Latent postprocessing kept host-side: sigma = exp(0.5*logvar), z = mu + sigma.*eps.
// Deterministic mode passes eps = {0,0,0}.
std::array<float, 3> vae_host_postprocess(const std::array<float, 3>& mu,
                                          const std::array<float, 3>& logvar,
                                          const std::array<float, 3>& eps);

// Index of the maximum logit; ties resolve to the lowest index.
int argmax_classify(const std::vector<float>& logits);

}  // namespace oninfer
