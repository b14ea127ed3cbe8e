#include "oninfer/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "oninfer/interpret.hpp"

namespace oninfer {

namespace {
constexpr float kEps = 1e-6f;
}

int8_t QuantParams::quantize(float v) const {
  long q = std::lround(v / scale) + zero_point;
  q = std::clamp<long>(q, qmin, 127);
  return static_cast<int8_t>(q);
}

QuantParams activation_params(float lo, float hi) {
  lo = std::min(lo, 0.0f);  // keep real zero exactly representable
  hi = std::max(hi, 0.0f);
  if (hi - lo < kEps) hi = lo + kEps;
  QuantParams p;
  p.scale = (hi - lo) / 255.0f;
  long zp = -128 - std::lround(lo / p.scale);
  p.zero_point = static_cast<int>(std::clamp<long>(zp, -128, 127));
  p.qmin = -128;
  return p;
}

QuantParams weight_params(const std::vector<float>& w) {
  float maxabs = 0.0f;
  for (float v : w) maxabs = std::max(maxabs, std::abs(v));
  if (maxabs < kEps) maxabs = kEps;
  QuantParams p;
  p.scale = maxabs / 127.0f;
  p.zero_point = 0;
  p.qmin = -127;
  return p;
}

void CalibrationStats::merge(const CalibrationStats& other) {
  for (const auto& [v, r] : other.ranges) {
    auto it = ranges.find(v);
    if (it == ranges.end()) {
      ranges[v] = r;
    } else {
      it->second.first = std::min(it->second.first, r.first);
      it->second.second = std::max(it->second.second, r.second);
    }
  }
}

namespace {

void observe(CalibrationStats& stats, ValueId v, const Tensor& t) {
  float lo = std::numeric_limits<float>::infinity();
  float hi = -std::numeric_limits<float>::infinity();
  for (float x : t.f) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (t.f.empty()) return;
  auto it = stats.ranges.find(v);
  if (it == stats.ranges.end()) {
    stats.ranges[v] = {lo, hi};
  } else {
    it->second.first = std::min(it->second.first, lo);
    it->second.second = std::max(it->second.second, hi);
  }
}

}  // namespace

CalibrationStats calibrate(const Graph& g,
                           const std::vector<std::map<std::string, Tensor>>& calib_inputs) {
  if (calib_inputs.empty())
    throw Error(Errc::EmptyCalibrationSet, "need at least one calibration sample");
  CalibrationStats stats;
  for (const auto& sample : calib_inputs) {
    for (size_t k = 0; k < g.inputs.size(); ++k) {
      auto it = sample.find(g.inputs[k].name);
      if (it == sample.end()) throw Error(Errc::MissingInput, g.inputs[k].name);
      observe(stats, graph_input_value(static_cast<int>(k)), it->second);
    }
    RunResult res = run_graph(g, sample, /*instrument=*/true);
    for (const NodeTrace& nt : res.trace->nodes) observe(stats, nt.id, nt.output);
  }
  return stats;
}

QuantizedGraph quantize_graph(const Graph& g, const CalibrationStats& stats) {
  QuantizedGraph q;
  q.graph = g;

  auto edge_params = [&](ValueId v) -> QuantParams {
    auto it = stats.ranges.find(v);
    if (it == stats.ranges.end())
      throw Error(Errc::UncoveredEdge, "value " + std::to_string(v) + " has no calibration range");
    return activation_params(it->second.first, it->second.second);
  };

  for (size_t k = 0; k < g.inputs.size(); ++k) {
    ValueId v = graph_input_value(static_cast<int>(k));
    q.edge_qp[v] = edge_params(v);
  }
  for (const auto& n : g.nodes) q.edge_qp[n.id] = edge_params(n.id);

  for (const auto& n : g.nodes) {
    if (!(n.spec.is_conv() || n.spec.kind == LayerKind::Dense)) continue;
    const Tensor* w = g.find_weight(n.id, "w");
    if (!w) throw Error(Errc::MissingTensor, std::to_string(n.id) + "/w");
    QuantParams wp = weight_params(w->f);
    q.weight_qp[n.id] = wp;
    std::vector<int8_t>& qw = q.qweights[n.id];
    qw.resize(w->f.size());
    for (size_t i = 0; i < w->f.size(); ++i) qw[i] = wp.quantize(w->f[i]);

    if (n.spec.has_bias) {
      const Tensor* b = g.find_weight(n.id, "b");
      if (!b) throw Error(Errc::MissingTensor, std::to_string(n.id) + "/b");
      float sx = q.edge_qp.at(n.inputs.at(0)).scale;
      double sb = static_cast<double>(wp.scale) * sx;
      std::vector<int32_t>& qb = q.qbias[n.id];
      qb.resize(b->f.size());
      for (size_t i = 0; i < b->f.size(); ++i) {
        long long r = std::llround(static_cast<double>(b->f[i]) / sb);
        r = std::clamp<long long>(r, std::numeric_limits<int32_t>::min(),
                                  std::numeric_limits<int32_t>::max());
        qb[i] = static_cast<int32_t>(r);
      }
    }
  }
  return q;
}

// ---- int8 execution ----

namespace {

struct QTensor {
  Shape shape;
  std::vector<int8_t> q;
};

int8_t requant_value(int64_t acc, double mult, int zp_out) {
  long long r = std::llround(static_cast<double>(acc) * mult) + zp_out;
  return static_cast<int8_t>(std::clamp<long long>(r, -128, 127));
}

QTensor quant_tensor(const Tensor& t, const QuantParams& p) {
  QTensor out;
  out.shape = t.shape;
  out.q.resize(t.f.size());
  for (size_t i = 0; i < t.f.size(); ++i) out.q[i] = p.quantize(t.f[i]);
  return out;
}

Tensor dequant_tensor(const QTensor& t, const QuantParams& p) {
  Tensor out = Tensor::zeros(t.shape);
  for (size_t i = 0; i < t.q.size(); ++i) out.f[i] = p.dequantize(t.q[i]);
  return out;
}

// (channels, spatial...) view over a possibly channel-less tensor
struct QChanView {
  int64_t channels = 1;
  std::vector<int64_t> spatial;
};

QChanView chan_view(const Shape& s, int spatial_rank) {
  QChanView v;
  if (s.rank() == spatial_rank) {
    v.spatial = s.dims;
  } else {
    v.channels = s.dims[0];
    v.spatial.assign(s.dims.begin() + 1, s.dims.end());
  }
  return v;
}

QTensor conv_int8(const QTensor& x, const std::vector<int8_t>& w, const std::vector<int32_t>* b,
                  const LayerSpec& spec, const Shape& out_shape, int zp_x, double mult,
                  int zp_y) {
  int sr = spec.spatial_rank();
  QChanView in = chan_view(x.shape, sr);
  // pad logical dims to 3 spatial axes (leading singletons) for one unified loop
  int64_t id_[3] = {1, 1, 1}, od_[3] = {1, 1, 1};
  int k_[3] = {1, 1, 1}, s_[3] = {1, 1, 1}, p_[3] = {0, 0, 0};
  QChanView out_v = chan_view(out_shape, sr);
  for (int a = 0; a < sr; ++a) {
    id_[3 - sr + a] = in.spatial[a];
    od_[3 - sr + a] = out_v.spatial[a];
    k_[3 - sr + a] = spec.kernel[a];
    s_[3 - sr + a] = spec.stride[a];
    p_[3 - sr + a] = spec.pad[a];
  }
  int64_t ic_n = in.channels;
  QTensor out;
  out.shape = out_shape;
  out.q.resize(static_cast<size_t>(out_shape.elems()));
  int64_t kvol = static_cast<int64_t>(k_[0]) * k_[1] * k_[2];
  for (int64_t oc = 0; oc < spec.out_ch; ++oc) {
    for (int64_t oz = 0; oz < od_[0]; ++oz)
      for (int64_t oy = 0; oy < od_[1]; ++oy)
        for (int64_t ox = 0; ox < od_[2]; ++ox) {
          int64_t acc = 0;
          for (int64_t ic = 0; ic < ic_n; ++ic)
            for (int kz = 0; kz < k_[0]; ++kz)
              for (int ky = 0; ky < k_[1]; ++ky)
                for (int kx = 0; kx < k_[2]; ++kx) {
                  int64_t iz = oz * s_[0] + kz - p_[0];
                  int64_t iy = oy * s_[1] + ky - p_[1];
                  int64_t ix = ox * s_[2] + kx - p_[2];
                  if (iz < 0 || iz >= id_[0] || iy < 0 || iy >= id_[1] || ix < 0 || ix >= id_[2])
                    continue;  // padding contributes (zp - zp) * w = 0
                  int64_t xi = ((ic * id_[0] + iz) * id_[1] + iy) * id_[2] + ix;
                  int64_t wi = (oc * ic_n + ic) * kvol + (kz * k_[1] + ky) * k_[2] + kx;
                  acc += static_cast<int64_t>(x.q[xi] - zp_x) * w[wi];
                }
          if (b) acc += (*b)[static_cast<size_t>(oc)];
          int64_t oi = ((oc * od_[0] + oz) * od_[1] + oy) * od_[2] + ox;
          out.q[static_cast<size_t>(oi)] = requant_value(acc, mult, zp_y);
        }
  }
  return out;
}

QTensor dense_int8(const QTensor& x, const std::vector<int8_t>& w, const std::vector<int32_t>* b,
                   const LayerSpec& spec, int zp_x, double mult, int zp_y) {
  QTensor out;
  out.shape = Shape({spec.out_ch});
  out.q.resize(static_cast<size_t>(spec.out_ch));
  for (int64_t o = 0; o < spec.out_ch; ++o) {
    int64_t acc = 0;
    const int8_t* row = w.data() + o * spec.in_ch;
    for (int64_t i = 0; i < spec.in_ch; ++i)
      acc += static_cast<int64_t>(x.q[static_cast<size_t>(i)] - zp_x) * row[i];
    if (b) acc += (*b)[static_cast<size_t>(o)];
    out.q[static_cast<size_t>(o)] = requant_value(acc, mult, zp_y);
  }
  return out;
}

QTensor pool_int8(const QTensor& x, const LayerSpec& spec, const Shape& out_shape,
                  const QuantParams& in_p, const QuantParams& out_p) {
  int sr = spec.spatial_rank();
  int64_t lead = 1;
  for (int a = 0; a < x.shape.rank() - sr; ++a) lead *= x.shape.dims[a];
  int64_t id_[3] = {1, 1, 1}, od_[3] = {1, 1, 1};
  int k_[3] = {1, 1, 1}, s_[3] = {1, 1, 1}, p_[3] = {0, 0, 0};
  for (int a = 0; a < sr; ++a) {
    id_[3 - sr + a] = x.shape.dims[x.shape.rank() - sr + a];
    od_[3 - sr + a] = out_shape.dims[out_shape.rank() - sr + a];
    k_[3 - sr + a] = spec.kernel[a];
    s_[3 - sr + a] = spec.stride[a];
    p_[3 - sr + a] = spec.pad[a];
  }
  QTensor out;
  out.shape = out_shape;
  out.q.resize(static_cast<size_t>(out_shape.elems()));
  double remult = static_cast<double>(in_p.scale) / out_p.scale;
  for (int64_t c = 0; c < lead; ++c)
    for (int64_t oz = 0; oz < od_[0]; ++oz)
      for (int64_t oy = 0; oy < od_[1]; ++oy)
        for (int64_t ox = 0; ox < od_[2]; ++ox) {
          int m = std::numeric_limits<int>::min();
          for (int kz = 0; kz < k_[0]; ++kz)
            for (int ky = 0; ky < k_[1]; ++ky)
              for (int kx = 0; kx < k_[2]; ++kx) {
                int64_t iz = oz * s_[0] + kz - p_[0];
                int64_t iy = oy * s_[1] + ky - p_[1];
                int64_t ix = ox * s_[2] + kx - p_[2];
                if (iz < 0 || iz >= id_[0] || iy < 0 || iy >= id_[1] || ix < 0 || ix >= id_[2])
                  continue;
                int64_t xi = ((c * id_[0] + iz) * id_[1] + iy) * id_[2] + ix;
                m = std::max(m, static_cast<int>(x.q[static_cast<size_t>(xi)]));
              }
          int64_t oi = ((c * od_[0] + oz) * od_[1] + oy) * od_[2] + ox;
          out.q[static_cast<size_t>(oi)] =
              requant_value(m - in_p.zero_point, remult, out_p.zero_point);
        }
  return out;
}

}  // namespace

std::vector<Tensor> run_quantized(const QuantizedGraph& q,
                                  const std::map<std::string, Tensor>& inputs) {
  const Graph& g = q.graph;
  std::vector<NodeId> order = topological_order(g);
  auto shapes = infer_shapes(g);

  std::map<ValueId, QTensor> values;
  for (size_t k = 0; k < g.inputs.size(); ++k) {
    auto it = inputs.find(g.inputs[k].name);
    if (it == inputs.end()) throw Error(Errc::MissingInput, g.inputs[k].name);
    if (it->second.shape != g.inputs[k].shape)
      throw Error(Errc::ShapeMismatch, "input '" + g.inputs[k].name + "': expected " +
                                           g.inputs[k].shape.str() + ", got " +
                                           it->second.shape.str());
    ValueId v = graph_input_value(static_cast<int>(k));
    values[v] = quant_tensor(it->second, q.edge_qp.at(v));
  }

  for (NodeId id : order) {
    const Node* n = g.find_node(id);
    const LayerSpec& spec = n->spec;
    const QuantParams& out_p = q.edge_qp.at(id);
    QTensor result;

    switch (spec.kind) {
      case LayerKind::Conv2D:
      case LayerKind::Conv3D: {
        const QTensor& x = values.at(n->inputs[0]);
        const QuantParams& in_p = q.edge_qp.at(n->inputs[0]);
        const QuantParams& wp = q.weight_qp.at(id);
        const std::vector<int32_t>* b =
            spec.has_bias ? &q.qbias.at(id) : nullptr;
        double mult = static_cast<double>(wp.scale) * in_p.scale / out_p.scale;
        result = conv_int8(x, q.qweights.at(id), b, spec, shapes.at(id), in_p.zero_point, mult,
                           out_p.zero_point);
        break;
      }
      case LayerKind::Dense: {
        const QTensor& x = values.at(n->inputs[0]);
        const QuantParams& in_p = q.edge_qp.at(n->inputs[0]);
        const QuantParams& wp = q.weight_qp.at(id);
        const std::vector<int32_t>* b =
            spec.has_bias ? &q.qbias.at(id) : nullptr;
        double mult = static_cast<double>(wp.scale) * in_p.scale / out_p.scale;
        result = dense_int8(x, q.qweights.at(id), b, spec, in_p.zero_point, mult,
                            out_p.zero_point);
        break;
      }
      case LayerKind::MaxPool2D:
      case LayerKind::MaxPool3D: {
        const QTensor& x = values.at(n->inputs[0]);
        result = pool_int8(x, spec, shapes.at(id), q.edge_qp.at(n->inputs[0]), out_p);
        break;
      }
      default: {
        // activation / threshold / concat / flatten: dequantize, run the fp kernel,
        // requantize into the edge's own parameters
        std::vector<Tensor> fp_ins;
        std::vector<const Tensor*> fp_ptrs;
        fp_ins.reserve(n->inputs.size());
        for (ValueId v : n->inputs)
          fp_ins.push_back(dequant_tensor(values.at(v), q.edge_qp.at(v)));
        for (const Tensor& t : fp_ins) fp_ptrs.push_back(&t);
        Tensor fp_out;
        switch (spec.kind) {
          case LayerKind::ReLU:
          case LayerKind::LeakyReLU:
          case LayerKind::Sigmoid:
            fp_out = activation_forward(fp_ins[0], spec.kind, spec.alpha, nullptr);
            break;
          case LayerKind::GreaterThan:
            fp_out = threshold_forward(fp_ins[0], spec.theta, nullptr);
            break;
          case LayerKind::Concat:
            fp_out = concat_forward(fp_ptrs, spec.axis, nullptr);
            break;
          case LayerKind::Flatten:
            fp_out = flatten_forward(fp_ins[0]);
            break;
          default:
            throw Error(Errc::InvalidArgument, "unhandled kind");
        }
        result = quant_tensor(fp_out, out_p);
        break;
      }
    }
    values[id] = std::move(result);
  }

  std::vector<Tensor> outs;
  outs.reserve(g.outputs.size());
  for (NodeId id : g.outputs) outs.push_back(dequant_tensor(values.at(id), q.edge_qp.at(id)));
  return outs;
}

QuantErrorReport quant_error_report(const Graph& g, const QuantizedGraph& q,
                                    const std::vector<std::map<std::string, Tensor>>& inputs) {
  QuantErrorReport rep;
  if (inputs.empty()) return rep;
  double sq_sum = 0.0;
  int64_t count = 0;
  int agree = 0;
  for (const auto& sample : inputs) {
    std::vector<Tensor> fp = run_graph(g, sample).outputs;
    std::vector<Tensor> qi = run_quantized(q, sample);
    std::vector<float> fp_cat, q_cat;
    for (size_t o = 0; o < fp.size(); ++o) {
      for (size_t i = 0; i < fp[o].f.size(); ++i) {
        float d = qi[o].f[i] - fp[o].f[i];
        rep.max_abs_error = std::max(rep.max_abs_error, std::abs(d));
        sq_sum += static_cast<double>(d) * d;
        ++count;
        fp_cat.push_back(fp[o].f[i]);
        q_cat.push_back(qi[o].f[i]);
      }
    }
    if (argmax_classify(fp_cat) == argmax_classify(q_cat)) ++agree;
  }
  rep.mean_square_error = count ? sq_sum / static_cast<double>(count) : 0.0;
  rep.top1_agreement = static_cast<double>(agree) / static_cast<double>(inputs.size());
  return rep;
}

ModelFile quantized_to_model(const QuantizedGraph& q, const ModelFile& base) {
  ModelFile m = base;
  m.graph = q.graph;
  QuantMetadata meta;
  for (const auto& [v, p] : q.edge_qp) meta.edges[v] = {p.scale, p.zero_point};
  for (const auto& [id, p] : q.weight_qp) meta.weight_scales[id] = p.scale;
  m.meta.quantization = meta;
  // weights: int8 "w" payloads; biases stay fp32 and are re-derived at load time
  for (const auto& [id, qw] : q.qweights) {
    Tensor& w = m.graph.weights.at(id).at("w");
    w.dtype = DType::Int8;
    w.q.assign(qw.begin(), qw.end());
    w.f.clear();
  }
  return m;
}

QuantizedGraph quantized_from_model(const ModelFile& m) {
  if (!m.meta.quantization)
    throw Error(Errc::InvalidArgument, "model carries no quantization table");
  const QuantMetadata& meta = *m.meta.quantization;
  QuantizedGraph q;
  q.graph = m.graph;
  for (const auto& [v, sp] : meta.edges) {
    QuantParams p;
    p.scale = sp.first;
    p.zero_point = sp.second;
    p.qmin = -128;
    q.edge_qp[v] = p;
  }
  for (const auto& n : m.graph.nodes) {
    if (!(n.spec.is_conv() || n.spec.kind == LayerKind::Dense)) continue;
    auto sit = meta.weight_scales.find(n.id);
    if (sit == meta.weight_scales.end())
      throw Error(Errc::MissingTensor, std::to_string(n.id) + "/w scale");
    QuantParams wp;
    wp.scale = sit->second;
    wp.zero_point = 0;
    wp.qmin = -127;
    q.weight_qp[n.id] = wp;

    const Tensor* w = m.graph.find_weight(n.id, "w");
    if (!w || w->dtype != DType::Int8)
      throw Error(Errc::MissingTensor, std::to_string(n.id) + "/w (int8)");
    q.qweights[n.id].assign(w->q.begin(), w->q.end());

    if (n.spec.has_bias) {
      const Tensor* b = m.graph.find_weight(n.id, "b");
      if (!b || b->dtype != DType::Fp32)
        throw Error(Errc::MissingTensor, std::to_string(n.id) + "/b (fp32)");
      auto eit = q.edge_qp.find(n.inputs.at(0));
      if (eit == q.edge_qp.end())
        throw Error(Errc::UncoveredEdge,
                    "value " + std::to_string(n.inputs.at(0)) + " has no quantization entry");
      double sb = static_cast<double>(wp.scale) * eit->second.scale;
      std::vector<int32_t>& qb = q.qbias[n.id];
      qb.resize(b->f.size());
      for (size_t i = 0; i < b->f.size(); ++i) {
        long long r = std::llround(static_cast<double>(b->f[i]) / sb);
        r = std::clamp<long long>(r, std::numeric_limits<int32_t>::min(),
                                  std::numeric_limits<int32_t>::max());
        qb[i] = static_cast<int32_t>(r);
      }
    }
  }
  return q;
}

}  // namespace oninfer
