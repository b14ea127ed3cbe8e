#include "oninfer/zoo.hpp"

#include "oninfer/rng.hpp"

namespace oninfer {

std::vector<ZooModelId> all_zoo_ids() {
  return {ZooModelId::VaeEncoder,   ZooModelId::CnetPlusScalar, ZooModelId::MultiEsperta,
          ZooModelId::LogisticNet,  ZooModelId::ReducedNet,     ZooModelId::BaselineNet};
}

const char* zoo_id_name(ZooModelId id) {
  switch (id) {
    case ZooModelId::VaeEncoder: return "vae_encoder";
    case ZooModelId::CnetPlusScalar: return "cnet_plus_scalar";
    case ZooModelId::MultiEsperta: return "multi_esperta";
    case ZooModelId::LogisticNet: return "logistic_net";
    case ZooModelId::ReducedNet: return "reduced_net";
    case ZooModelId::BaselineNet: return "baseline_net";
  }
  return "?";
}

bool zoo_id_from_string(const std::string& s, ZooModelId& out) {
  for (ZooModelId id : all_zoo_ids())
    if (zoo_id_name(id) == s) {
      out = id;
      return true;
    }
  return false;
}

uint64_t zoo_default_seed(ZooModelId id) {
  switch (id) {
    case ZooModelId::VaeEncoder: return 101;
    case ZooModelId::CnetPlusScalar: return 102;
    case ZooModelId::MultiEsperta: return 103;
    case ZooModelId::LogisticNet: return 104;
    case ZooModelId::ReducedNet: return 105;
    case ZooModelId::BaselineNet: return 106;
  }
  return 1;
}

namespace {

struct Builder {
  Graph g;
  NodeId next = 0;

  ValueId input(const std::string& name, std::vector<int64_t> dims) {
    g.inputs.push_back({name, Shape(std::move(dims))});
    return graph_input_value(static_cast<int>(g.inputs.size()) - 1);
  }

  NodeId add(LayerSpec spec, std::vector<ValueId> ins) {
    Node n;
    n.id = next++;
    n.spec = std::move(spec);
    n.inputs = std::move(ins);
    g.nodes.push_back(std::move(n));
    return g.nodes.back().id;
  }

  NodeId conv2d(ValueId in, int k, int s, int p, int ic, int oc) {
    LayerSpec sp;
    sp.kind = LayerKind::Conv2D;
    sp.kernel = {k, k};
    sp.stride = {s, s};
    sp.pad = {p, p};
    sp.in_ch = ic;
    sp.out_ch = oc;
    return add(sp, {in});
  }

  NodeId conv3d(ValueId in, int k, int s, int p, int ic, int oc) {
    LayerSpec sp;
    sp.kind = LayerKind::Conv3D;
    sp.kernel = {k, k, k};
    sp.stride = {s, s, s};
    sp.pad = {p, p, p};
    sp.in_ch = ic;
    sp.out_ch = oc;
    return add(sp, {in});
  }

  NodeId maxpool2d(ValueId in, int w, int s) {
    LayerSpec sp;
    sp.kind = LayerKind::MaxPool2D;
    sp.kernel = {w, w};
    sp.stride = {s, s};
    sp.pad = {0, 0};
    return add(sp, {in});
  }

  NodeId maxpool3d(ValueId in, int w, int s) {
    LayerSpec sp;
    sp.kind = LayerKind::MaxPool3D;
    sp.kernel = {w, w, w};
    sp.stride = {s, s, s};
    sp.pad = {0, 0, 0};
    return add(sp, {in});
  }

  NodeId dense(ValueId in, int in_n, int out_n) {
    LayerSpec sp;
    sp.kind = LayerKind::Dense;
    sp.in_ch = in_n;
    sp.out_ch = out_n;
    return add(sp, {in});
  }

  NodeId relu(ValueId in) {
    LayerSpec sp;
    sp.kind = LayerKind::ReLU;
    return add(sp, {in});
  }

  NodeId sigmoid(ValueId in) {
    LayerSpec sp;
    sp.kind = LayerKind::Sigmoid;
    return add(sp, {in});
  }

  NodeId greater_than(ValueId in, float theta) {
    LayerSpec sp;
    sp.kind = LayerKind::GreaterThan;
    sp.theta = theta;
    return add(sp, {in});
  }

  NodeId concat(std::vector<ValueId> ins, int axis) {
    LayerSpec sp;
    sp.kind = LayerKind::Concat;
    sp.axis = axis;
    return add(sp, std::move(ins));
  }

  NodeId flatten(ValueId in) {
    LayerSpec sp;
    sp.kind = LayerKind::Flatten;
    return add(sp, {in});
  }
};

Graph build_vae_encoder() {
  Builder b;
  ValueId x = b.input("image", {3, 128, 256});
  NodeId c1 = b.conv2d(x, 4, 2, 1, 3, 16);
  NodeId r1 = b.relu(c1);
  NodeId c2 = b.conv2d(r1, 4, 2, 1, 16, 48);
  NodeId r2 = b.relu(c2);
  NodeId c3 = b.conv2d(r2, 4, 2, 1, 48, 24);
  NodeId r3 = b.relu(c3);
  NodeId c4 = b.conv2d(r3, 4, 2, 1, 24, 4);
  NodeId r4 = b.relu(c4);
  NodeId c5 = b.conv2d(r4, 4, 2, 1, 4, 6);
  NodeId r5 = b.relu(c5);
  NodeId fl = b.flatten(r5);            // (6,4,8) -> 192
  NodeId d1 = b.dense(fl, 192, 1820);
  NodeId r6 = b.relu(d1);
  NodeId d2 = b.dense(r6, 1820, 6);     // mu (3) ++ logvar (3)
  b.g.outputs = {d2};
  return std::move(b.g);
}

Graph build_cnet_plus_scalar() {
  Builder b;
  ValueId img = b.input("image", {3, 256, 256});
  ValueId bg = b.input("background", {1});
  int chans[6] = {3, 48, 32, 64, 96, 32};
  ValueId cur = img;
  for (int i = 0; i < 5; ++i) {
    NodeId c = b.conv2d(cur, 3, 1, 1, chans[i], chans[i + 1]);
    NodeId r = b.relu(c);
    cur = b.maxpool2d(r, 2, 2);
  }
  NodeId fl = b.flatten(cur);           // (32,8,8) -> 2048
  NodeId cc = b.concat({fl, bg}, 0);    // 2049
  NodeId d1 = b.dense(cc, 2049, 609);
  NodeId r1 = b.relu(d1);
  NodeId d2 = b.dense(r1, 609, 2777);
  NodeId r2 = b.relu(d2);
  NodeId d3 = b.dense(r2, 2777, 1);
  b.g.outputs = {d3};
  return std::move(b.g);
}

Graph build_multi_esperta() {
  Builder b;
  ValueId x = b.input("features", {3});
  std::vector<NodeId> outs;
  for (int i = 0; i < 6; ++i) {
    NodeId d = b.dense(x, 3, 1);
    NodeId s = b.sigmoid(d);
    outs.push_back(b.greater_than(s, 0.5f));
  }
  b.g.outputs = outs;
  return std::move(b.g);
}

Graph build_logistic_net() {
  Builder b;
  ValueId x = b.input("volume", {32, 16, 32});
  NodeId p = b.maxpool3d(x, 2, 2);      // (16,8,16) -> 2048
  NodeId fl = b.flatten(p);
  NodeId d = b.dense(fl, 2048, 4);
  b.g.outputs = {d};
  return std::move(b.g);
}

Graph build_reduced_net() {
  Builder b;
  ValueId x = b.input("volume", {32, 16, 32});
  NodeId c1 = b.conv3d(x, 2, 2, 0, 1, 2);
  NodeId r1 = b.relu(c1);
  NodeId c2 = b.conv3d(r1, 2, 2, 0, 2, 38);
  NodeId r2 = b.relu(c2);
  NodeId p = b.maxpool3d(r2, 2, 2);     // (38,4,2,4) -> 1216
  NodeId fl = b.flatten(p);
  NodeId d1 = b.dense(fl, 1216, 36);
  NodeId r3 = b.relu(d1);
  NodeId d2 = b.dense(r3, 36, 4);
  b.g.outputs = {d2};
  return std::move(b.g);
}

Graph build_baseline_net() {
  Builder b;
  ValueId x = b.input("volume", {32, 16, 32});
  NodeId c1 = b.conv3d(x, 3, 2, 1, 1, 24);
  NodeId r1 = b.relu(c1);
  NodeId c2 = b.conv3d(r1, 3, 1, 1, 24, 24);
  NodeId r2 = b.relu(c2);
  NodeId p1 = b.maxpool3d(r2, 2, 2);
  NodeId c3 = b.conv3d(p1, 3, 1, 1, 24, 128);
  NodeId r3 = b.relu(c3);
  NodeId p2 = b.maxpool3d(r3, 2, 2);    // (128,4,2,4) -> 4096
  NodeId fl = b.flatten(p2);
  NodeId d1 = b.dense(fl, 4096, 152);
  NodeId r4 = b.relu(d1);
  NodeId d2 = b.dense(r4, 152, 1232);
  NodeId r5 = b.relu(d2);
  NodeId d3 = b.dense(r5, 1232, 4);
  b.g.outputs = {d3};
  return std::move(b.g);
}

void attach_weights(Graph& g, WeightInit init, uint64_t seed) {
  Rng rng(seed);
  for (const auto& n : g.nodes) {
    if (!(n.spec.is_conv() || n.spec.kind == LayerKind::Dense)) continue;
    Shape wshape;
    if (n.spec.kind == LayerKind::Dense) {
      wshape = Shape({n.spec.out_ch, n.spec.in_ch});
    } else {
      std::vector<int64_t> dims = {n.spec.out_ch, n.spec.in_ch};
      for (int k : n.spec.kernel) dims.push_back(k);
      wshape = Shape(dims);
    }
    Tensor w = Tensor::zeros(wshape);
    Tensor bias = Tensor::zeros(Shape({n.spec.out_ch}));
    if (init == WeightInit::SeededUniform) {
      for (auto& v : w.f) v = rng.uniform(-0.1f, 0.1f);
      for (auto& v : bias.f) v = rng.uniform(-0.1f, 0.1f);
    }
    g.weights[n.id]["w"] = std::move(w);
    if (n.spec.has_bias) g.weights[n.id]["b"] = std::move(bias);
  }
}

void set_reference_counts(ModelFile& m, ZooModelId id) {
  switch (id) {
    case ZooModelId::VaeEncoder:
      m.meta.reference_params = 395692;
      m.meta.reference_ops = 83417100;
      break;
    case ZooModelId::CnetPlusScalar:
      m.meta.reference_params = 3061966;
      m.meta.reference_ops = 918241400;
      break;
    case ZooModelId::MultiEsperta:
      m.meta.reference_params = 24;
      m.meta.reference_ops = 60;
      break;
    case ZooModelId::LogisticNet:
      m.meta.reference_params = 8196;
      m.meta.reference_ops = 30720;
      break;
    case ZooModelId::ReducedNet:
      m.meta.reference_params = 44624;
      m.meta.reference_ops = 502961;
      break;
    case ZooModelId::BaselineNet:
      m.meta.reference_params = 915492;
      m.meta.reference_ops = 110541696;
      break;
  }
}

}  // namespace

ModelFile build_zoo_model(ZooModelId id, WeightInit init, uint64_t seed) {
  ModelFile m;
  m.version = 1;
  m.name = zoo_id_name(id);
  switch (id) {
    case ZooModelId::VaeEncoder: m.graph = build_vae_encoder(); break;
    case ZooModelId::CnetPlusScalar: m.graph = build_cnet_plus_scalar(); break;
    case ZooModelId::MultiEsperta: m.graph = build_multi_esperta(); break;
    case ZooModelId::LogisticNet: m.graph = build_logistic_net(); break;
    case ZooModelId::ReducedNet: m.graph = build_reduced_net(); break;
    case ZooModelId::BaselineNet: m.graph = build_baseline_net(); break;
  }
  set_reference_counts(m, id);
  attach_weights(m.graph, init, seed == 0 ? zoo_default_seed(id) : seed);
  return m;
}

}  // namespace oninfer
