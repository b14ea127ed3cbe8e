#include "oninfer/graph.hpp"

#include <algorithm>
#include <queue>
#include <set>

namespace oninfer {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::Conv3D: return "Conv3D";
    case LayerKind::MaxPool2D: return "MaxPool2D";
    case LayerKind::MaxPool3D: return "MaxPool3D";
    case LayerKind::Dense: return "Dense";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::LeakyReLU: return "LeakyReLU";
    case LayerKind::Sigmoid: return "Sigmoid";
    case LayerKind::GreaterThan: return "GreaterThan";
    case LayerKind::Concat: return "Concat";
    case LayerKind::Flatten: return "Flatten";
  }
  return "?";
}

bool kind_from_string(const std::string& s, LayerKind& out) {
  static const std::pair<const char*, LayerKind> table[] = {
      {"Conv2D", LayerKind::Conv2D},       {"Conv3D", LayerKind::Conv3D},
      {"MaxPool2D", LayerKind::MaxPool2D}, {"MaxPool3D", LayerKind::MaxPool3D},
      {"Dense", LayerKind::Dense},         {"ReLU", LayerKind::ReLU},
      {"LeakyReLU", LayerKind::LeakyReLU}, {"Sigmoid", LayerKind::Sigmoid},
      {"GreaterThan", LayerKind::GreaterThan}, {"Concat", LayerKind::Concat},
      {"Flatten", LayerKind::Flatten},
  };
  for (const auto& [name, kind] : table) {
    if (s == name) {
      out = kind;
      return true;
    }
  }
  return false;
}

int64_t conv_out_dim(int64_t in, int kernel, int stride, int pad) {
  int64_t out = (in + 2 * static_cast<int64_t>(pad) - kernel) / stride + 1;
  if (in + 2 * static_cast<int64_t>(pad) - kernel < 0) out = 0;  // floor of negative
  return out;
}

namespace {

void check_spatial_attrs(const Node& n, ValidationReport& rep) {
  const LayerSpec& s = n.spec;
  int r = s.spatial_rank();
  auto bad = [&](const std::string& rule, const std::string& msg) {
    rep.violations.push_back({n.id, rule, msg});
  };
  if (static_cast<int>(s.kernel.size()) != r)
    bad("kernel-rank", "expected " + std::to_string(r) + " kernel dims");
  if (static_cast<int>(s.stride.size()) != r)
    bad("stride-rank", "expected " + std::to_string(r) + " stride dims");
  if (static_cast<int>(s.pad.size()) != r)
    bad("pad-rank", "expected " + std::to_string(r) + " pad dims");
  for (int k : s.kernel)
    if (k < 1) bad("kernel-positive", "kernel dims must be >= 1");
  for (int v : s.stride)
    if (v < 1) bad("stride-positive", "stride must be >= 1 per axis");
  for (int v : s.pad)
    if (v < 0) bad("pad-nonnegative", "padding must be >= 0");
  if (s.is_pool() && s.kernel.size() == s.pad.size()) {
    for (size_t i = 0; i < s.kernel.size(); ++i)
      if (s.pad[i] >= s.kernel[i])
        bad("pool-pad", "pool padding must be smaller than the window per axis");
  }
}

void check_weights(const Graph& g, const Node& n, ValidationReport& rep) {
  const LayerSpec& s = n.spec;
  auto bad = [&](const std::string& rule, const std::string& msg) {
    rep.violations.push_back({n.id, rule, msg});
  };
  const Tensor* w = g.find_weight(n.id, "w");
  const Tensor* b = g.find_weight(n.id, "b");
  if (!w) return;  // weights may be attached later; shape rules apply when present
  if (s.kind == LayerKind::Dense) {
    Shape want({s.out_ch, s.in_ch});
    if (w->shape != want)
      bad("weight-shape", "dense weight must be " + want.str() + ", got " + w->shape.str());
  } else if (s.is_conv()) {
    std::vector<int64_t> dims = {s.out_ch, s.in_ch};
    for (int k : s.kernel) dims.push_back(k);
    Shape want(dims);
    if (w->shape != want)
      bad("weight-shape", "conv weight must be " + want.str() + ", got " + w->shape.str());
  }
  if (b) {
    if (!s.has_bias)
      bad("bias-unexpected", "bias tensor attached but has_bias is false");
    else if (b->shape != Shape({s.out_ch}))
      bad("bias-shape", "bias must be (" + std::to_string(s.out_ch) + ",), got " + b->shape.str());
  }
}

}  // namespace

ValidationReport validate_graph(const Graph& g) {
  ValidationReport rep;
  auto bad = [&](NodeId id, const std::string& rule, const std::string& msg) {
    rep.violations.push_back({id, rule, msg});
  };

  std::set<NodeId> ids;
  for (const auto& n : g.nodes) {
    if (n.id < 0) bad(n.id, "node-id", "node ids must be >= 0");
    if (!ids.insert(n.id).second) bad(n.id, "node-id", "duplicate node id");
  }
  for (const auto& in : g.inputs) {
    if (in.shape.rank() < 1 || in.shape.rank() > 5)
      bad(-1, "input-rank", "input '" + in.name + "' rank must be in [1,5]");
    for (int64_t d : in.shape.dims)
      if (d < 1) bad(-1, "input-dims", "input '" + in.name + "' dims must be >= 1");
  }

  for (const auto& n : g.nodes) {
    const LayerSpec& s = n.spec;
    // arity
    size_t arity = n.inputs.size();
    if (s.kind == LayerKind::Concat) {
      if (arity < 1) bad(n.id, "arity", "Concat needs at least one input");
    } else if (arity != 1) {
      bad(n.id, "arity", std::string(kind_name(s.kind)) + " takes exactly one input");
    }
    // input resolution
    for (ValueId v : n.inputs) {
      if (is_graph_input(v)) {
        if (graph_input_index(v) >= static_cast<int>(g.inputs.size()))
          bad(n.id, "unresolved input", "graph input #" + std::to_string(graph_input_index(v)));
      } else if (!ids.count(v)) {
        bad(n.id, "unresolved input", "node " + std::to_string(v) + " does not exist");
      }
    }
    if (s.is_conv() || s.is_pool()) check_spatial_attrs(n, rep);
    if (s.is_conv() || s.kind == LayerKind::Dense) {
      if (s.in_ch < 1 || s.out_ch < 1)
        bad(n.id, "channels", "in/out extents must be >= 1");
      check_weights(g, n, rep);
    }
    if (s.kind == LayerKind::Concat && s.axis < 0)
      bad(n.id, "concat-axis", "axis must be >= 0");
  }

  for (NodeId out : g.outputs)
    if (!ids.count(out))
      bad(out, "unresolved output", "graph output names a missing node");

  // cycle check (only meaningful when references resolve)
  if (rep.ok()) {
    try {
      topological_order(g);
    } catch (const Error& e) {
      if (e.code() == Errc::CycleDetected)
        bad(-1, "cycle", e.what());
      else
        throw;
    }
  }
  return rep;
}

std::vector<NodeId> topological_order(const Graph& g) {
  std::map<NodeId, int> indeg;
  std::map<NodeId, std::vector<NodeId>> consumers;
  for (const auto& n : g.nodes) indeg[n.id] = 0;
  for (const auto& n : g.nodes) {
    for (ValueId v : n.inputs) {
      if (!is_graph_input(v)) {
        if (!indeg.count(v))
          throw Error(Errc::MissingInput, "node " + std::to_string(n.id) +
                                              " references missing node " + std::to_string(v));
        ++indeg[n.id];
        consumers[v].push_back(n.id);
      }
    }
  }
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (const auto& [id, d] : indeg)
    if (d == 0) ready.push(id);
  std::vector<NodeId> order;
  order.reserve(g.nodes.size());
  while (!ready.empty()) {
    NodeId id = ready.top();
    ready.pop();
    order.push_back(id);
    for (NodeId c : consumers[id])
      if (--indeg[c] == 0) ready.push(c);
  }
  if (order.size() != g.nodes.size())
    throw Error(Errc::CycleDetected, "graph contains a cycle");
  return order;
}

Shape value_shape(const Graph& g, const std::unordered_map<NodeId, Shape>& shapes, ValueId v) {
  if (is_graph_input(v)) {
    int k = graph_input_index(v);
    if (k >= static_cast<int>(g.inputs.size()))
      throw Error(Errc::MissingInput, "graph input #" + std::to_string(k));
    return g.inputs[k].shape;
  }
  auto it = shapes.find(v);
  if (it == shapes.end())
    throw Error(Errc::MissingInput, "no shape for node " + std::to_string(v));
  return it->second;
}

namespace {

// Shared conv/pool spatial arithmetic. Channel-less inputs keep their rank when the
// operator emits a single channel; pools never change rank.
Shape infer_node_shape(const Graph& g, const Node& n,
                       const std::unordered_map<NodeId, Shape>& shapes) {
  const LayerSpec& s = n.spec;
  auto in_shape = [&](size_t i) { return value_shape(g, shapes, n.inputs[i]); };
  auto mismatch = [&](const std::string& msg) {
    return Error(Errc::ShapeMismatch, "node " + std::to_string(n.id) + " (" +
                                          kind_name(s.kind) + "): " + msg);
  };

  switch (s.kind) {
    case LayerKind::Conv2D:
    case LayerKind::Conv3D: {
      Shape x = in_shape(0);
      int sr = s.spatial_rank();
      bool channelless = (x.rank() == sr);
      if (!channelless && x.rank() != sr + 1)
        throw mismatch("input rank must be " + std::to_string(sr) + " or " +
                       std::to_string(sr + 1) + ", got " + x.str());
      int64_t c = channelless ? 1 : x.dims[0];
      if (c != s.in_ch) throw mismatch("expected " + std::to_string(s.in_ch) + " input channels");
      std::vector<int64_t> out;
      bool squeeze = channelless && s.out_ch == 1;
      if (!squeeze) out.push_back(s.out_ch);
      for (int a = 0; a < sr; ++a) {
        int64_t in = x.dims[(channelless ? 0 : 1) + a];
        int64_t o = conv_out_dim(in, s.kernel[a], s.stride[a], s.pad[a]);
        if (o < 1)
          throw Error(Errc::NegativeDimension,
                      "node " + std::to_string(n.id) + ": output extent " + std::to_string(o) +
                          " on axis " + std::to_string(a));
        out.push_back(o);
      }
      return Shape(out);
    }
    case LayerKind::MaxPool2D:
    case LayerKind::MaxPool3D: {
      Shape x = in_shape(0);
      int sr = s.spatial_rank();
      bool channelless = (x.rank() == sr);
      if (!channelless && x.rank() != sr + 1)
        throw mismatch("input rank must be " + std::to_string(sr) + " or " +
                       std::to_string(sr + 1) + ", got " + x.str());
      std::vector<int64_t> out;
      if (!channelless) out.push_back(x.dims[0]);
      for (int a = 0; a < sr; ++a) {
        int64_t in = x.dims[(channelless ? 0 : 1) + a];
        int64_t o = conv_out_dim(in, s.kernel[a], s.stride[a], s.pad[a]);
        if (o < 1)
          throw Error(Errc::NegativeDimension,
                      "node " + std::to_string(n.id) + ": output extent " + std::to_string(o) +
                          " on axis " + std::to_string(a));
        out.push_back(o);
      }
      return Shape(out);
    }
    case LayerKind::Dense: {
      Shape x = in_shape(0);
      if (x.rank() != 1) throw mismatch("dense input must be rank 1, got " + x.str());
      if (x.dims[0] != s.in_ch)
        throw mismatch("expected " + std::to_string(s.in_ch) + " input features, got " + x.str());
      return Shape({s.out_ch});
    }
    case LayerKind::ReLU:
    case LayerKind::LeakyReLU:
    case LayerKind::Sigmoid:
    case LayerKind::GreaterThan:
      return in_shape(0);
    case LayerKind::Concat: {
      Shape first = in_shape(0);
      if (s.axis >= first.rank()) throw mismatch("axis out of range for " + first.str());
      std::vector<int64_t> out = first.dims;
      for (size_t i = 1; i < n.inputs.size(); ++i) {
        Shape xi = in_shape(i);
        if (xi.rank() != first.rank()) throw mismatch("rank mismatch across concat inputs");
        for (int a = 0; a < first.rank(); ++a) {
          if (a == s.axis) continue;
          if (xi.dims[a] != first.dims[a])
            throw mismatch("non-axis dims must match: " + first.str() + " vs " + xi.str());
        }
        out[s.axis] += xi.dims[s.axis];
      }
      return Shape(out);
    }
    case LayerKind::Flatten: {
      Shape x = in_shape(0);
      return Shape({x.elems()});
    }
  }
  throw mismatch("unknown layer kind");
}

}  // namespace

std::unordered_map<NodeId, Shape> infer_shapes(const Graph& g) {
  std::unordered_map<NodeId, Shape> shapes;
  for (NodeId id : topological_order(g)) {
    const Node* n = g.find_node(id);
    shapes[id] = infer_node_shape(g, *n, shapes);
  }
  return shapes;
}

}  // namespace oninfer
