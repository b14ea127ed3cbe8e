#include "oninfer/interpret.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace oninfer {

namespace {

// Normalized channels-first view of a rank-(sr) or rank-(sr+1) tensor.
struct ChanView {
  int64_t ch = 1;
  std::vector<int64_t> sp;  // spatial extents, size sr
  bool channelless = false;
};

ChanView chan_view(const Tensor& x, int sr, const char* what) {
  ChanView v;
  if (x.shape.rank() == sr) {
    v.channelless = true;
    v.sp = x.shape.dims;
  } else if (x.shape.rank() == sr + 1) {
    v.ch = x.shape.dims[0];
    v.sp.assign(x.shape.dims.begin() + 1, x.shape.dims.end());
  } else {
    throw Error(Errc::ShapeMismatch,
                std::string(what) + ": input rank must be " + std::to_string(sr) + " or " +
                    std::to_string(sr + 1) + ", got " + x.shape.str());
  }
  return v;
}

Shape conv_output_shape(const ChanView& in, int64_t out_ch, const std::vector<int>& kernel,
                        const std::vector<int>& stride, const std::vector<int>& pad,
                        bool squeeze) {
  std::vector<int64_t> dims;
  if (!squeeze) dims.push_back(out_ch);
  for (size_t a = 0; a < in.sp.size(); ++a) {
    int64_t o = conv_out_dim(in.sp[a], kernel[a], stride[a], pad[a]);
    if (o < 1)
      throw Error(Errc::NegativeDimension, "output extent " + std::to_string(o) + " on axis " +
                                               std::to_string(a));
    dims.push_back(o);
  }
  return Shape(dims);
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor* b,
                      const std::vector<int>& stride, const std::vector<int>& pad,
                      OpCounter* counter) {
  ChanView in = chan_view(x, 2, "conv2d");
  if (w.shape.rank() != 4)
    throw Error(Errc::ShapeMismatch, "conv2d weight must be rank 4, got " + w.shape.str());
  int64_t oc_n = w.shape.dims[0], ic_n = w.shape.dims[1];
  int64_t kh = w.shape.dims[2], kw = w.shape.dims[3];
  if (ic_n != in.ch)
    throw Error(Errc::ShapeMismatch, "conv2d expects " + std::to_string(ic_n) + " channels");
  if (b && b->shape != Shape({oc_n}))
    throw Error(Errc::ShapeMismatch, "conv2d bias must have one value per output channel");

  bool squeeze = in.channelless && oc_n == 1;
  std::vector<int> kernel = {static_cast<int>(kh), static_cast<int>(kw)};
  Tensor y = Tensor::zeros(conv_output_shape(in, oc_n, kernel, stride, pad, squeeze));
  int64_t H = in.sp[0], W = in.sp[1];
  int64_t OH = conv_out_dim(H, kernel[0], stride[0], pad[0]);
  int64_t OW = conv_out_dim(W, kernel[1], stride[1], pad[1]);

  size_t oi = 0;
  for (int64_t oc = 0; oc < oc_n; ++oc) {
    for (int64_t oy = 0; oy < OH; ++oy) {
      for (int64_t ox = 0; ox < OW; ++ox) {
        float acc = 0.0f;
        // fixed ascending (ic, ky, kx) accumulation; out-of-range taps are skipped
        // in the sum but still counted (a zero-padded tap is still a MAC).
        for (int64_t ic = 0; ic < ic_n; ++ic) {
          for (int64_t ky = 0; ky < kh; ++ky) {
            for (int64_t kx = 0; kx < kw; ++kx) {
              if (counter) counter->mac();
              int64_t iy = oy * stride[0] + ky - pad[0];
              int64_t ix = ox * stride[1] + kx - pad[1];
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              acc += x.f[static_cast<size_t>((ic * H + iy) * W + ix)] *
                     w.f[static_cast<size_t>(((oc * ic_n + ic) * kh + ky) * kw + kx)];
            }
          }
        }
        if (b) {
          acc += b->f[static_cast<size_t>(oc)];
          if (counter) counter->bias();
        }
        y.f[oi++] = acc;
      }
    }
  }
  return y;
}

Tensor conv3d_forward(const Tensor& x, const Tensor& w, const Tensor* b,
                      const std::vector<int>& stride, const std::vector<int>& pad,
                      OpCounter* counter) {
  ChanView in = chan_view(x, 3, "conv3d");
  if (w.shape.rank() != 5)
    throw Error(Errc::ShapeMismatch, "conv3d weight must be rank 5, got " + w.shape.str());
  int64_t oc_n = w.shape.dims[0], ic_n = w.shape.dims[1];
  int64_t kd = w.shape.dims[2], kh = w.shape.dims[3], kw = w.shape.dims[4];
  if (ic_n != in.ch)
    throw Error(Errc::ShapeMismatch, "conv3d expects " + std::to_string(ic_n) + " channels");
  if (b && b->shape != Shape({oc_n}))
    throw Error(Errc::ShapeMismatch, "conv3d bias must have one value per output channel");

  bool squeeze = in.channelless && oc_n == 1;
  std::vector<int> kernel = {static_cast<int>(kd), static_cast<int>(kh), static_cast<int>(kw)};
  Tensor y = Tensor::zeros(conv_output_shape(in, oc_n, kernel, stride, pad, squeeze));
  int64_t D = in.sp[0], H = in.sp[1], W = in.sp[2];
  int64_t OD = conv_out_dim(D, kernel[0], stride[0], pad[0]);
  int64_t OH = conv_out_dim(H, kernel[1], stride[1], pad[1]);
  int64_t OW = conv_out_dim(W, kernel[2], stride[2], pad[2]);

  size_t oi = 0;
  for (int64_t oc = 0; oc < oc_n; ++oc) {
    for (int64_t od = 0; od < OD; ++od) {
      for (int64_t oy = 0; oy < OH; ++oy) {
        for (int64_t ox = 0; ox < OW; ++ox) {
          float acc = 0.0f;
          for (int64_t ic = 0; ic < ic_n; ++ic) {
            for (int64_t kz = 0; kz < kd; ++kz) {
              for (int64_t ky = 0; ky < kh; ++ky) {
                for (int64_t kx = 0; kx < kw; ++kx) {
                  if (counter) counter->mac();
                  int64_t id = od * stride[0] + kz - pad[0];
                  int64_t iy = oy * stride[1] + ky - pad[1];
                  int64_t ix = ox * stride[2] + kx - pad[2];
                  if (id < 0 || id >= D || iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                  acc += x.f[static_cast<size_t>(((ic * D + id) * H + iy) * W + ix)] *
                         w.f[static_cast<size_t>(
                             (((oc * ic_n + ic) * kd + kz) * kh + ky) * kw + kx)];
                }
              }
            }
          }
          if (b) {
            acc += b->f[static_cast<size_t>(oc)];
            if (counter) counter->bias();
          }
          y.f[oi++] = acc;
        }
      }
    }
  }
  return y;
}

Tensor pool_forward(const Tensor& x, const std::vector<int>& window,
                    const std::vector<int>& stride, const std::vector<int>& pad, int spatial_rank,
                    OpCounter* counter) {
  ChanView in = chan_view(x, spatial_rank, "pool");
  // pools keep the input rank: channel dim (if any) passes through unchanged
  std::vector<int64_t> dims;
  if (!in.channelless) dims.push_back(in.ch);
  std::vector<int64_t> osp;
  for (int a = 0; a < spatial_rank; ++a) {
    int64_t o = conv_out_dim(in.sp[a], window[a], stride[a], pad[a]);
    if (o < 1)
      throw Error(Errc::NegativeDimension,
                  "pool output extent " + std::to_string(o) + " on axis " + std::to_string(a));
    dims.push_back(o);
    osp.push_back(o);
  }
  Tensor y = Tensor::zeros(Shape(dims));

  const float neg_inf = -std::numeric_limits<float>::infinity();
  // Unified 3D indexing; 2D pools use a singleton leading axis.
  int64_t D = spatial_rank == 3 ? in.sp[0] : 1;
  int64_t H = in.sp[spatial_rank == 3 ? 1 : 0];
  int64_t W = in.sp[spatial_rank == 3 ? 2 : 1];
  int64_t OD = spatial_rank == 3 ? osp[0] : 1;
  int64_t OH = osp[spatial_rank == 3 ? 1 : 0];
  int64_t OW = osp[spatial_rank == 3 ? 2 : 1];
  int wd = spatial_rank == 3 ? window[0] : 1;
  int wh = window[spatial_rank == 3 ? 1 : 0];
  int ww = window[spatial_rank == 3 ? 2 : 1];
  int sd = spatial_rank == 3 ? stride[0] : 1;
  int sh = stride[spatial_rank == 3 ? 1 : 0];
  int sw = stride[spatial_rank == 3 ? 2 : 1];
  int pd = spatial_rank == 3 ? pad[0] : 0;
  int ph = pad[spatial_rank == 3 ? 1 : 0];
  int pw = pad[spatial_rank == 3 ? 2 : 1];

  size_t oi = 0;
  for (int64_t c = 0; c < in.ch; ++c) {
    for (int64_t od = 0; od < OD; ++od) {
      for (int64_t oy = 0; oy < OH; ++oy) {
        for (int64_t ox = 0; ox < OW; ++ox) {
          float m = neg_inf;
          bool first = true;
          // window cells in fixed order; padding cells act as -inf, and every cell
          // after the first costs one comparison (window-1 total per output).
          for (int kz = 0; kz < wd; ++kz) {
            for (int ky = 0; ky < wh; ++ky) {
              for (int kx = 0; kx < ww; ++kx) {
                if (!first && counter) counter->compare_pool();
                first = false;
                int64_t id = od * sd + kz - pd;
                int64_t iy = oy * sh + ky - ph;
                int64_t ix = ox * sw + kx - pw;
                if (id < 0 || id >= D || iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                float v = x.f[static_cast<size_t>(((c * D + id) * H + iy) * W + ix)];
                if (v > m) m = v;
              }
            }
          }
          y.f[oi++] = m;
        }
      }
    }
  }
  return y;
}

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor* b, OpCounter* counter) {
  if (x.shape.rank() != 1)
    throw Error(Errc::ShapeMismatch, "dense input must be rank 1, got " + x.shape.str());
  if (w.shape.rank() != 2)
    throw Error(Errc::ShapeMismatch, "dense weight must be rank 2, got " + w.shape.str());
  int64_t out_n = w.shape.dims[0], in_n = w.shape.dims[1];
  if (x.shape.dims[0] != in_n)
    throw Error(Errc::ShapeMismatch, "dense expects " + std::to_string(in_n) + " inputs, got " +
                                         x.shape.str());
  if (b && b->shape != Shape({out_n}))
    throw Error(Errc::ShapeMismatch, "dense bias must have one value per output");

  Tensor y = Tensor::zeros(Shape({out_n}));
  for (int64_t o = 0; o < out_n; ++o) {
    float acc = 0.0f;
    const float* row = &w.f[static_cast<size_t>(o * in_n)];
    for (int64_t i = 0; i < in_n; ++i) {  // ascending-i accumulation: bit determinism
      if (counter) counter->mac();
      acc += row[i] * x.f[static_cast<size_t>(i)];
    }
    if (b) {
      acc += b->f[static_cast<size_t>(o)];
      if (counter) counter->bias();
    }
    y.f[static_cast<size_t>(o)] = acc;
  }
  return y;
}

Tensor activation_forward(const Tensor& x, LayerKind kind, float alpha, OpCounter* counter) {
  Tensor y = Tensor::zeros(x.shape);
  for (size_t i = 0; i < x.f.size(); ++i) {
    float v = x.f[i];
    switch (kind) {
      case LayerKind::ReLU: y.f[i] = v > 0.0f ? v : 0.0f; break;
      case LayerKind::LeakyReLU: y.f[i] = v < 0.0f ? alpha * v : v; break;
      case LayerKind::Sigmoid: y.f[i] = 1.0f / (1.0f + std::exp(-v)); break;
      default:
        throw Error(Errc::InvalidArgument, "not an activation kind");
    }
    if (counter) counter->activation();
  }
  return y;
}

Tensor threshold_forward(const Tensor& x, float theta, OpCounter* counter) {
  Tensor y = Tensor::zeros(x.shape);
  for (size_t i = 0; i < x.f.size(); ++i) {
    y.f[i] = x.f[i] > theta ? 1.0f : 0.0f;  // strict >
    if (counter) counter->compare();
  }
  return y;
}

Tensor concat_forward(const std::vector<const Tensor*>& xs, int axis, OpCounter*) {
  if (xs.empty()) throw Error(Errc::ShapeMismatch, "concat needs at least one input");
  const Shape& first = xs[0]->shape;
  if (axis < 0 || axis >= first.rank())
    throw Error(Errc::ShapeMismatch, "concat axis out of range for " + first.str());
  int64_t axis_total = 0;
  for (const Tensor* t : xs) {
    if (t->shape.rank() != first.rank())
      throw Error(Errc::ShapeMismatch, "concat rank mismatch");
    for (int a = 0; a < first.rank(); ++a)
      if (a != axis && t->shape.dims[a] != first.dims[a])
        throw Error(Errc::ShapeMismatch,
                    "concat non-axis dims must match: " + first.str() + " vs " + t->shape.str());
    axis_total += t->shape.dims[axis];
  }
  std::vector<int64_t> dims = first.dims;
  dims[static_cast<size_t>(axis)] = axis_total;
  Tensor y = Tensor::zeros(Shape(dims));

  int64_t outer = 1;
  for (int a = 0; a < axis; ++a) outer *= first.dims[a];
  int64_t inner = 1;
  for (int a = axis + 1; a < first.rank(); ++a) inner *= first.dims[a];

  size_t oi = 0;
  for (int64_t u = 0; u < outer; ++u) {
    for (const Tensor* t : xs) {
      int64_t block = t->shape.dims[axis] * inner;
      const float* src = &t->f[static_cast<size_t>(u * block)];
      for (int64_t k = 0; k < block; ++k) y.f[oi++] = src[k];
    }
  }
  return y;
}

Tensor flatten_forward(const Tensor& x, OpCounter*) {
  Tensor y;
  y.shape = Shape({x.elems()});
  y.f = x.f;  // row-major reshape
  return y;
}

namespace detail {

Tensor execute_node(const Graph& g, const Node& n, const std::map<ValueId, Tensor>& values,
                    OpCounter* counter) {
  auto value = [&](size_t i) -> const Tensor& {
    auto it = values.find(n.inputs[i]);
    if (it == values.end())
      throw Error(Errc::MissingInput,
                  "node " + std::to_string(n.id) + ": value " + std::to_string(n.inputs[i]));
    return it->second;
  };
  const LayerSpec& s = n.spec;
  switch (s.kind) {
    case LayerKind::Conv2D: {
      const Tensor* w = g.find_weight(n.id, "w");
      if (!w) throw Error(Errc::MissingTensor, std::to_string(n.id) + "/w");
      const Tensor* b = s.has_bias ? g.find_weight(n.id, "b") : nullptr;
      if (s.has_bias && !b) throw Error(Errc::MissingTensor, std::to_string(n.id) + "/b");
      return conv2d_forward(value(0), *w, b, s.stride, s.pad, counter);
    }
    case LayerKind::Conv3D: {
      const Tensor* w = g.find_weight(n.id, "w");
      if (!w) throw Error(Errc::MissingTensor, std::to_string(n.id) + "/w");
      const Tensor* b = s.has_bias ? g.find_weight(n.id, "b") : nullptr;
      if (s.has_bias && !b) throw Error(Errc::MissingTensor, std::to_string(n.id) + "/b");
      return conv3d_forward(value(0), *w, b, s.stride, s.pad, counter);
    }
    case LayerKind::MaxPool2D:
      return pool_forward(value(0), s.kernel, s.stride, s.pad, 2, counter);
    case LayerKind::MaxPool3D:
      return pool_forward(value(0), s.kernel, s.stride, s.pad, 3, counter);
    case LayerKind::Dense: {
      const Tensor* w = g.find_weight(n.id, "w");
      if (!w) throw Error(Errc::MissingTensor, std::to_string(n.id) + "/w");
      const Tensor* b = s.has_bias ? g.find_weight(n.id, "b") : nullptr;
      if (s.has_bias && !b) throw Error(Errc::MissingTensor, std::to_string(n.id) + "/b");
      return dense_forward(value(0), *w, b, counter);
    }
    case LayerKind::ReLU:
    case LayerKind::LeakyReLU:
    case LayerKind::Sigmoid:
      return activation_forward(value(0), s.kind, s.alpha, counter);
    case LayerKind::GreaterThan:
      return threshold_forward(value(0), s.theta, counter);
    case LayerKind::Concat: {
      std::vector<const Tensor*> xs;
      xs.reserve(n.inputs.size());
      for (size_t i = 0; i < n.inputs.size(); ++i) xs.push_back(&value(i));
      return concat_forward(xs, s.axis, counter);
    }
    case LayerKind::Flatten:
      return flatten_forward(value(0), counter);
  }
  throw Error(Errc::InvalidArgument, "unknown layer kind");
}

}  // namespace detail

RunResult run_graph(const Graph& g, const std::map<std::string, Tensor>& inputs, bool instrument,
                    const OpCountConvention& conv) {
  // bind graph inputs
  std::map<ValueId, Tensor> values;
  for (size_t k = 0; k < g.inputs.size(); ++k) {
    auto it = inputs.find(g.inputs[k].name);
    if (it == inputs.end())
      throw Error(Errc::MissingInput, "graph input '" + g.inputs[k].name + "' not supplied");
    if (it->second.shape != g.inputs[k].shape)
      throw Error(Errc::ShapeMismatch, "input '" + g.inputs[k].name + "': expected " +
                                           g.inputs[k].shape.str() + ", got " +
                                           it->second.shape.str());
    values[graph_input_value(static_cast<int>(k))] = it->second;
  }

  RunResult result;
  if (instrument) result.trace.emplace();

  for (NodeId id : topological_order(g)) {
    const Node* n = g.find_node(id);
    OpCounter counter;
    counter.conv = instrument ? &conv : nullptr;
    auto t0 = std::chrono::steady_clock::now();
    Tensor out = detail::execute_node(g, *n, values, instrument ? &counter : nullptr);
    auto t1 = std::chrono::steady_clock::now();
    if (instrument) {
      NodeTrace nt;
      nt.id = id;
      nt.output = out;
      nt.ops = counter.ops;
      nt.seconds = std::chrono::duration<double>(t1 - t0).count();
      result.trace->total_ops += counter.ops;
      result.trace->nodes.push_back(std::move(nt));
    }
    values[id] = std::move(out);
  }

  result.outputs.reserve(g.outputs.size());
  for (NodeId out : g.outputs) {
    auto it = values.find(out);
    if (it == values.end())
      throw Error(Errc::MissingInput, "graph output node " + std::to_string(out));
    result.outputs.push_back(it->second);
  }
  return result;
}

std::array<float, 3> vae_host_postprocess(const std::array<float, 3>& mu,
                                          const std::array<float, 3>& logvar,
                                          const std::array<float, 3>& eps) {
  std::array<float, 3> z;
  for (int i = 0; i < 3; ++i) {
    float sigma = std::exp(0.5f * logvar[i]);
    z[i] = mu[i] + sigma * eps[i];
  }
  return z;
}

int argmax_classify(const std::vector<float>& logits) {
  if (logits.empty()) throw Error(Errc::InvalidArgument, "empty logits");
  int best = 0;
  for (size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = static_cast<int>(i);  // ties keep lowest index
  return best;
}

}  // namespace oninfer
