#include "oninfer/plan.hpp"

#include <algorithm>

#include "json.hpp"
#include "oninfer/errors.hpp"
#include "oninfer/model_io.hpp"
#include "oninfer/opcount.hpp"

namespace oninfer {

DeviceModel load_device_model(const std::string& json_path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(json_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::ParseError, e.what());
  }
  if (!doc.is_object()) throw Error(Errc::ParseError, "device model must be an object");
  DeviceModel d;
  static const char* keys[] = {"name",          "lut",         "ff",
                               "dsp",           "bram36_blocks", "bram36_bytes",
                               "uram_blocks",   "uram_bytes",  "clock_hz"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    bool known = false;
    for (const char* k : keys)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) throw Error(Errc::ParseError, "device model: unknown field '" + it.key() + "'");
  }
  if (doc.contains("name")) d.name = doc.at("name").get<std::string>();
  if (doc.contains("lut")) d.lut = doc.at("lut").get<int64_t>();
  if (doc.contains("ff")) d.ff = doc.at("ff").get<int64_t>();
  if (doc.contains("dsp")) d.dsp = doc.at("dsp").get<int64_t>();
  if (doc.contains("bram36_blocks")) d.bram36_blocks = doc.at("bram36_blocks").get<int64_t>();
  if (doc.contains("bram36_bytes")) d.bram36_bytes = doc.at("bram36_bytes").get<int64_t>();
  if (doc.contains("uram_blocks")) d.uram_blocks = doc.at("uram_blocks").get<int64_t>();
  if (doc.contains("uram_bytes")) d.uram_bytes = doc.at("uram_bytes").get<int64_t>();
  if (doc.contains("clock_hz")) d.clock_hz = doc.at("clock_hz").get<double>();
  return d;
}

BackendProfile BackendProfile::dpu_like() {
  BackendProfile b;
  b.name = "dpu-like";
  b.supported = {LayerKind::Conv2D, LayerKind::MaxPool2D, LayerKind::ReLU,
                 LayerKind::Dense,  LayerKind::Concat,    LayerKind::Flatten};
  b.precision = DType::Int8;
  return b;
}

BackendProfile BackendProfile::hls_like() {
  BackendProfile b;
  b.name = "hls-like";
  b.supported = {LayerKind::Conv2D,    LayerKind::Conv3D,  LayerKind::MaxPool2D,
                 LayerKind::MaxPool3D, LayerKind::Dense,   LayerKind::ReLU,
                 LayerKind::LeakyReLU, LayerKind::Sigmoid, LayerKind::GreaterThan,
                 LayerKind::Concat,    LayerKind::Flatten};
  b.precision = DType::Fp32;
  return b;
}

SupportVerdict check_backend_support(const Graph& g, const BackendProfile& b) {
  SupportVerdict v;
  std::set<LayerKind> missing;
  for (const auto& n : g.nodes)
    if (!b.supported.count(n.spec.kind)) missing.insert(n.spec.kind);
  v.supported = missing.empty();
  v.unsupported.assign(missing.begin(), missing.end());
  std::sort(v.unsupported.begin(), v.unsupported.end(), [](LayerKind a, LayerKind b2) {
    return std::string(kind_name(a)) < std::string(kind_name(b2));
  });
  return v;
}

DeploymentPlan place_weights(const Graph& g, DType precision, const DeviceModel& d) {
  DeploymentPlan plan;
  int64_t elem = precision == DType::Int8 ? 1 : 4;
  plan.weight_bytes = count_parameters(g) * elem;

  // inter-layer buffers: node outputs that some other node consumes
  auto shapes = infer_shapes(g);
  std::set<NodeId> consumed;
  for (const auto& n : g.nodes)
    for (ValueId v : n.inputs)
      if (!is_graph_input(v)) consumed.insert(v);
  std::vector<int64_t> footprints;
  for (NodeId id : consumed) footprints.push_back(shapes.at(id).elems() * elem);
  std::sort(footprints.begin(), footprints.end(), std::greater<>());
  for (size_t i = 0; i < footprints.size() && i < 2; ++i) plan.buffer_bytes += footprints[i];

  if (plan.weight_bytes + plan.buffer_bytes <= d.bram_only_capacity()) {
    plan.weights = Placement::OnChip;
    plan.onchip_bytes = plan.weight_bytes + plan.buffer_bytes;
  } else {
    plan.weights = Placement::ExternalDram;
    plan.onchip_bytes = plan.buffer_bytes;
  }
  plan.est_bram36 = (plan.onchip_bytes + d.bram36_bytes - 1) / d.bram36_bytes;

  SupportVerdict v = check_backend_support(
      g, precision == DType::Int8 ? BackendProfile::dpu_like() : BackendProfile::hls_like());
  plan.supported = v.supported;
  plan.unsupported = v.unsupported;
  return plan;
}

int64_t estimate_onchip_bytes(int64_t bram36, int64_t uram, const DeviceModel& d) {
  if (bram36 < 0 || uram < 0)
    throw Error(Errc::InvalidArgument, "block counts must be non-negative");
  return bram36 * d.bram36_bytes + uram * d.uram_bytes;
}

}  // namespace oninfer
