#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "oninfer/graph.hpp"
#include "oninfer/model_io.hpp"

namespace oninfer {

struct QuantParams {
  float scale = 1.0f;   // > 0
  int zero_point = 0;   // in [-128, 127]; 0 for symmetric weights
  int qmin = -128;      // -127 for symmetric weights, -128 for activations

  int8_t quantize(float v) const;
  float dequantize(int8_t q) const { return scale * (static_cast<float>(q) - static_cast<float>(zero_point)); }
};

// Asymmetric 256-level params over [lo, hi]; range is widened to cover zero and to
// epsilon when degenerate.
QuantParams activation_params(float lo, float hi);
// Symmetric per-tensor weight params: scale = max|w| / 127 (epsilon floor on all-zero).
QuantParams weight_params(const std::vector<float>& w);

struct CalibrationStats {
  // min/max observed per value (graph inputs and node outputs)
  std::map<ValueId, std::pair<float, float>> ranges;
  void merge(const CalibrationStats& other);
};

struct QuantizedGraph {
  Graph graph;                                   // topology; original fp32 weights retained
  std::map<NodeId, std::vector<int8_t>> qweights;
  std::map<NodeId, QuantParams> weight_qp;
  std::map<NodeId, std::vector<int32_t>> qbias;  // int32 at scale_w * scale_x
  std::map<ValueId, QuantParams> edge_qp;        // graph inputs + node outputs
};

// Runs the fp32 graph over the calibration set recording per-edge envelopes.
CalibrationStats calibrate(const Graph& g, const std::vector<std::map<std::string, Tensor>>& calib_inputs);

QuantizedGraph quantize_graph(const Graph& g, const CalibrationStats& stats);

// INT8 execution: integer accumulation (int64), per-edge requantization, outputs
// dequantized to fp32. Deterministic.
std::vector<Tensor> run_quantized(const QuantizedGraph& q, const std::map<std::string, Tensor>& inputs);

struct QuantErrorReport {
  float max_abs_error = 0.0f;
  double mean_square_error = 0.0;
  double top1_agreement = 1.0;  // fraction of inputs whose argmax matches the fp32 path
};

QuantErrorReport quant_error_report(const Graph& g, const QuantizedGraph& q,
                                    const std::vector<std::map<std::string, Tensor>>& inputs);

// Serialization glue: attach/extract the quant table to a ModelFile (weights are
// written int8 into the blob; biases stay fp32 and are re-quantized at load).
ModelFile quantized_to_model(const QuantizedGraph& q, const ModelFile& base);
QuantizedGraph quantized_from_model(const ModelFile& m);

}  // namespace oninfer
