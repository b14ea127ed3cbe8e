#include "oninfer/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are out of scope");

namespace oninfer {

using nlohmann::json;

namespace {

[[noreturn]] void parse_fail(const std::string& msg) { throw Error(Errc::ParseError, msg); }

void check_keys(const json& obj, const std::vector<std::string>& allowed,
                const std::string& context) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const auto& k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) parse_fail(context + ": unknown field '" + it.key() + "'");
  }
}

int require_int(const json& obj, const char* key, const std::string& context) {
  if (!obj.contains(key)) parse_fail(context + ": missing field '" + key + "'");
  const json& v = obj.at(key);
  if (!v.is_number_integer()) parse_fail(context + ": field '" + key + "' must be an integer");
  return v.get<int>();
}

int optional_int(const json& obj, const char* key, int def) {
  return obj.contains(key) ? obj.at(key).get<int>() : def;
}

bool optional_bool(const json& obj, const char* key, bool def, const std::string& context) {
  if (!obj.contains(key)) return def;
  if (!obj.at(key).is_boolean()) parse_fail(context + ": field '" + key + "' must be a boolean");
  return obj.at(key).get<bool>();
}

float optional_float(const json& obj, const char* key, float def, const std::string& context) {
  if (!obj.contains(key)) return def;
  if (!obj.at(key).is_number()) parse_fail(context + ": field '" + key + "' must be a number");
  return static_cast<float>(obj.at(key).get<double>());
}

std::vector<int> require_int_array(const json& obj, const char* key, int rank,
                                   const std::string& context) {
  if (!obj.contains(key)) parse_fail(context + ": missing field '" + key + "'");
  const json& v = obj.at(key);
  if (!v.is_array() || static_cast<int>(v.size()) != rank)
    parse_fail(context + ": field '" + key + "' must be an array of " + std::to_string(rank) +
               " integers");
  std::vector<int> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) parse_fail(context + ": '" + key + "' entries must be integers");
    out.push_back(e.get<int>());
  }
  return out;
}

std::vector<int> optional_int_array(const json& obj, const char* key, std::vector<int> def,
                                    const std::string& context) {
  if (!obj.contains(key)) return def;
  return require_int_array(obj, key, static_cast<int>(def.size()), context);
}

LayerSpec parse_attrs(LayerKind kind, const json& attrs, const std::string& context) {
  LayerSpec s;
  s.kind = kind;
  switch (kind) {
    case LayerKind::Conv2D:
    case LayerKind::Conv3D: {
      int r = s.spatial_rank();
      check_keys(attrs, {"kernel", "stride", "pad", "in_ch", "out_ch", "has_bias"}, context);
      s.kernel = require_int_array(attrs, "kernel", r, context);
      s.stride = optional_int_array(attrs, "stride", std::vector<int>(r, 1), context);
      s.pad = optional_int_array(attrs, "pad", std::vector<int>(r, 0), context);
      s.in_ch = require_int(attrs, "in_ch", context);
      s.out_ch = require_int(attrs, "out_ch", context);
      s.has_bias = optional_bool(attrs, "has_bias", true, context);
      break;
    }
    case LayerKind::MaxPool2D:
    case LayerKind::MaxPool3D: {
      int r = s.spatial_rank();
      check_keys(attrs, {"window", "stride", "pad"}, context);
      s.kernel = require_int_array(attrs, "window", r, context);
      s.stride = attrs.contains("stride") ? require_int_array(attrs, "stride", r, context)
                                          : s.kernel;  // default: stride = window
      s.pad = optional_int_array(attrs, "pad", std::vector<int>(r, 0), context);
      break;
    }
    case LayerKind::Dense:
      check_keys(attrs, {"in", "out", "has_bias"}, context);
      s.in_ch = require_int(attrs, "in", context);
      s.out_ch = require_int(attrs, "out", context);
      s.has_bias = optional_bool(attrs, "has_bias", true, context);
      break;
    case LayerKind::ReLU:
    case LayerKind::Sigmoid:
    case LayerKind::Flatten:
      check_keys(attrs, {}, context);
      break;
    case LayerKind::LeakyReLU:
      check_keys(attrs, {"alpha"}, context);
      s.alpha = optional_float(attrs, "alpha", 0.01f, context);
      break;
    case LayerKind::GreaterThan:
      check_keys(attrs, {"theta"}, context);
      s.theta = optional_float(attrs, "theta", 0.5f, context);
      break;
    case LayerKind::Concat:
      check_keys(attrs, {"axis"}, context);
      s.axis = optional_int(attrs, "axis", 0);
      break;
  }
  return s;
}

json attrs_to_json(const LayerSpec& s) {
  json a = json::object();
  switch (s.kind) {
    case LayerKind::Conv2D:
    case LayerKind::Conv3D:
      a["kernel"] = s.kernel;
      a["stride"] = s.stride;
      a["pad"] = s.pad;
      a["in_ch"] = s.in_ch;
      a["out_ch"] = s.out_ch;
      a["has_bias"] = s.has_bias;
      break;
    case LayerKind::MaxPool2D:
    case LayerKind::MaxPool3D:
      a["window"] = s.kernel;
      a["stride"] = s.stride;
      a["pad"] = s.pad;
      break;
    case LayerKind::Dense:
      a["in"] = s.in_ch;
      a["out"] = s.out_ch;
      a["has_bias"] = s.has_bias;
      break;
    case LayerKind::LeakyReLU:
      a["alpha"] = static_cast<double>(s.alpha);
      break;
    case LayerKind::GreaterThan:
      a["theta"] = static_cast<double>(s.theta);
      break;
    case LayerKind::Concat:
      a["axis"] = s.axis;
      break;
    case LayerKind::ReLU:
    case LayerKind::Sigmoid:
    case LayerKind::Flatten:
      break;
  }
  return a;
}

QuantMetadata parse_quant_metadata(const json& q) {
  QuantMetadata meta;
  check_keys(q, {"edges", "weights"}, "metadata.quantization");
  if (q.contains("edges")) {
    for (const auto& e : q.at("edges")) {
      check_keys(e, {"value", "scale", "zero_point"}, "quantization edge");
      ValueId v = e.at("value").get<ValueId>();
      meta.edges[v] = {static_cast<float>(e.at("scale").get<double>()),
                       e.at("zero_point").get<int>()};
    }
  }
  if (q.contains("weights")) {
    for (const auto& e : q.at("weights")) {
      check_keys(e, {"node", "scale"}, "quantization weight");
      meta.weight_scales[e.at("node").get<NodeId>()] =
          static_cast<float>(e.at("scale").get<double>());
    }
  }
  return meta;
}

json quant_metadata_to_json(const QuantMetadata& meta) {
  json q = json::object();
  json edges = json::array();
  for (const auto& [v, sp] : meta.edges) {
    json e = json::object();
    e["value"] = v;
    e["scale"] = static_cast<double>(sp.first);
    e["zero_point"] = sp.second;
    edges.push_back(e);
  }
  json weights = json::array();
  for (const auto& [id, s] : meta.weight_scales) {
    json e = json::object();
    e["node"] = id;
    e["scale"] = static_cast<double>(s);
    weights.push_back(e);
  }
  q["edges"] = edges;
  q["weights"] = weights;
  return q;
}

}  // namespace

ModelFile parse_model_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    parse_fail(e.what());  // carries byte position
  }
  if (!doc.is_object()) parse_fail("top level must be an object");
  check_keys(doc, {"version", "name", "inputs", "nodes", "outputs", "metadata"}, "model");

  ModelFile m;
  if (!doc.contains("version") || !doc.at("version").is_number_integer())
    parse_fail("missing integer 'version'");
  m.version = doc.at("version").get<int>();
  if (m.version != 1)
    throw Error(Errc::UnsupportedVersion, "version " + std::to_string(m.version));

  if (doc.contains("name")) {
    if (!doc.at("name").is_string()) parse_fail("'name' must be a string");
    m.name = doc.at("name").get<std::string>();
  }

  if (!doc.contains("inputs") || !doc.at("inputs").is_array())
    parse_fail("missing array 'inputs'");
  for (const auto& in : doc.at("inputs")) {
    check_keys(in, {"name", "shape"}, "input");
    if (!in.contains("name") || !in.at("name").is_string())
      parse_fail("input: missing string 'name'");
    if (!in.contains("shape") || !in.at("shape").is_array())
      parse_fail("input: missing array 'shape'");
    GraphInput gi;
    gi.name = in.at("name").get<std::string>();
    for (const auto& d : in.at("shape")) {
      if (!d.is_number_integer()) parse_fail("input '" + gi.name + "': shape dims must be integers");
      gi.shape.dims.push_back(d.get<int64_t>());
    }
    m.graph.inputs.push_back(std::move(gi));
  }

  if (!doc.contains("nodes") || !doc.at("nodes").is_array()) parse_fail("missing array 'nodes'");
  for (const auto& nj : doc.at("nodes")) {
    check_keys(nj, {"id", "kind", "attrs", "inputs"}, "node");
    Node n;
    n.id = require_int(nj, "id", "node");
    std::string context = "node " + std::to_string(n.id);
    if (!nj.contains("kind") || !nj.at("kind").is_string())
      parse_fail(context + ": missing string 'kind'");
    std::string kind_s = nj.at("kind").get<std::string>();
    LayerKind kind;
    if (!kind_from_string(kind_s, kind)) parse_fail(context + ": unknown kind '" + kind_s + "'");
    json attrs = nj.contains("attrs") ? nj.at("attrs") : json::object();
    if (!attrs.is_object()) parse_fail(context + ": 'attrs' must be an object");
    n.spec = parse_attrs(kind, attrs, context);
    if (!nj.contains("inputs") || !nj.at("inputs").is_array())
      parse_fail(context + ": missing array 'inputs'");
    for (const auto& ref : nj.at("inputs")) {
      if (ref.is_number_integer()) {
        n.inputs.push_back(ref.get<NodeId>());
      } else if (ref.is_string()) {
        int k = m.graph.input_index(ref.get<std::string>());
        if (k < 0)
          parse_fail(context + ": unknown graph input '" + ref.get<std::string>() + "'");
        n.inputs.push_back(graph_input_value(k));
      } else {
        parse_fail(context + ": inputs must be node ids or graph-input names");
      }
    }
    m.graph.nodes.push_back(std::move(n));
  }

  if (!doc.contains("outputs") || !doc.at("outputs").is_array())
    parse_fail("missing array 'outputs'");
  for (const auto& o : doc.at("outputs")) {
    if (!o.is_number_integer()) parse_fail("outputs must be node ids");
    m.graph.outputs.push_back(o.get<NodeId>());
  }

  if (doc.contains("metadata")) {
    const json& md = doc.at("metadata");
    if (!md.is_object()) parse_fail("'metadata' must be an object");
    check_keys(md, {"reference_params", "reference_ops", "quantization"}, "metadata");
    if (md.contains("reference_params"))
      m.meta.reference_params = md.at("reference_params").get<int64_t>();
    if (md.contains("reference_ops")) m.meta.reference_ops = md.at("reference_ops").get<int64_t>();
    if (md.contains("quantization"))
      m.meta.quantization = parse_quant_metadata(md.at("quantization"));
  }
  return m;
}

std::string serialize_model_text(const ModelFile& m) {
  json doc = json::object();
  doc["version"] = m.version;
  doc["name"] = m.name;

  json inputs = json::array();
  for (const auto& in : m.graph.inputs) {
    json ij = json::object();
    ij["name"] = in.name;
    ij["shape"] = in.shape.dims;
    inputs.push_back(ij);
  }
  doc["inputs"] = inputs;

  json nodes = json::array();
  for (const auto& n : m.graph.nodes) {
    json nj = json::object();
    nj["id"] = n.id;
    nj["kind"] = kind_name(n.spec.kind);
    nj["attrs"] = attrs_to_json(n.spec);
    json refs = json::array();
    for (ValueId v : n.inputs) {
      if (is_graph_input(v)) {
        int k = graph_input_index(v);
        refs.push_back(k < static_cast<int>(m.graph.inputs.size()) ? json(m.graph.inputs[k].name)
                                                                   : json(v));
      } else {
        refs.push_back(v);
      }
    }
    nj["inputs"] = refs;
    nodes.push_back(nj);
  }
  doc["nodes"] = nodes;
  doc["outputs"] = m.graph.outputs;

  json md = json::object();
  if (m.meta.reference_params >= 0) md["reference_params"] = m.meta.reference_params;
  if (m.meta.reference_ops >= 0) md["reference_ops"] = m.meta.reference_ops;
  if (m.meta.quantization) md["quantization"] = quant_metadata_to_json(*m.meta.quantization);
  doc["metadata"] = md;

  return doc.dump(2) + "\n";  // sorted keys (json object is ordered), fixed indent
}

bool models_equal(const ModelFile& a, const ModelFile& b) {
  return serialize_model_text(a) == serialize_model_text(b);
}

// ---- weight blob ----

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 24));
}

uint32_t get_u32(const std::vector<uint8_t>& in, size_t& pos) {
  if (pos + 4 > in.size()) throw Error(Errc::ParseError, "weight blob truncated");
  uint32_t v = static_cast<uint32_t>(in[pos]) | (static_cast<uint32_t>(in[pos + 1]) << 8) |
               (static_cast<uint32_t>(in[pos + 2]) << 16) |
               (static_cast<uint32_t>(in[pos + 3]) << 24);
  pos += 4;
  return v;
}

constexpr uint8_t kMagic[4] = {0x4F, 0x4E, 0x49, 0x57};  // "ONIW"

}  // namespace

std::vector<uint8_t> serialize_weight_blob(const Graph& g) {
  std::vector<uint8_t> out(kMagic, kMagic + 4);
  uint32_t count = 0;
  for (const auto& [id, tensors] : g.weights) count += static_cast<uint32_t>(tensors.size());
  put_u32(out, count);
  for (const auto& [id, tensors] : g.weights) {      // node ids ascending
    for (const auto& [key, t] : tensors) {           // "b" before "w"
      std::string name = std::to_string(id) + "/" + key;
      put_u32(out, static_cast<uint32_t>(name.size()));
      out.insert(out.end(), name.begin(), name.end());
      out.push_back(static_cast<uint8_t>(t.dtype));
      out.push_back(static_cast<uint8_t>(t.shape.rank()));
      for (int64_t d : t.shape.dims) put_u32(out, static_cast<uint32_t>(d));
      if (t.dtype == DType::Fp32) {
        size_t off = out.size();
        out.resize(off + t.f.size() * 4);
        std::memcpy(out.data() + off, t.f.data(), t.f.size() * 4);
      } else {
        size_t off = out.size();
        out.resize(off + t.q.size());
        std::memcpy(out.data() + off, t.q.data(), t.q.size());
      }
    }
  }
  return out;
}

void load_weight_blob(const std::vector<uint8_t>& bytes, Graph& g) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw Error(Errc::BadMagic, "weight blob magic mismatch");
  size_t pos = 4;
  uint32_t count = get_u32(bytes, pos);
  std::map<std::string, Tensor> entries;
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t name_len = get_u32(bytes, pos);
    if (pos + name_len > bytes.size()) throw Error(Errc::ParseError, "weight blob truncated");
    std::string name(reinterpret_cast<const char*>(bytes.data() + pos), name_len);
    pos += name_len;
    if (pos + 2 > bytes.size()) throw Error(Errc::ParseError, "weight blob truncated");
    uint8_t dtype = bytes[pos++];
    uint8_t rank = bytes[pos++];
    Tensor t;
    for (int r = 0; r < rank; ++r) t.shape.dims.push_back(get_u32(bytes, pos));
    int64_t elems = t.shape.elems();
    if (dtype == 0) {
      t.dtype = DType::Fp32;
      if (pos + elems * 4 > bytes.size()) throw Error(Errc::ParseError, "weight blob truncated");
      t.f.resize(static_cast<size_t>(elems));
      std::memcpy(t.f.data(), bytes.data() + pos, static_cast<size_t>(elems) * 4);
      pos += static_cast<size_t>(elems) * 4;
    } else if (dtype == 1) {
      t.dtype = DType::Int8;
      if (pos + elems > bytes.size()) throw Error(Errc::ParseError, "weight blob truncated");
      t.q.resize(static_cast<size_t>(elems));
      std::memcpy(t.q.data(), bytes.data() + pos, static_cast<size_t>(elems));
      pos += static_cast<size_t>(elems);
    } else {
      throw Error(Errc::ParseError, "unknown dtype code " + std::to_string(dtype));
    }
    if (!entries.emplace(name, std::move(t)).second)
      throw Error(Errc::ParseError, "duplicate tensor '" + name + "'");
  }

  g.weights.clear();
  for (const auto& n : g.nodes) {
    if (!(n.spec.is_conv() || n.spec.kind == LayerKind::Dense)) continue;
    std::string wname = std::to_string(n.id) + "/w";
    auto wit = entries.find(wname);
    if (wit == entries.end()) throw Error(Errc::MissingTensor, wname);

    Shape expect_w;
    if (n.spec.kind == LayerKind::Dense) {
      expect_w = Shape({n.spec.out_ch, n.spec.in_ch});
    } else {
      std::vector<int64_t> dims = {n.spec.out_ch, n.spec.in_ch};
      for (int k : n.spec.kernel) dims.push_back(k);
      expect_w = Shape(dims);
    }
    if (wit->second.shape != expect_w)
      throw Error(Errc::ShapeMismatch, wname + ": expected " + expect_w.str() + ", got " +
                                           wit->second.shape.str());
    g.weights[n.id]["w"] = std::move(wit->second);
    entries.erase(wit);

    if (n.spec.has_bias) {
      std::string bname = std::to_string(n.id) + "/b";
      auto bit = entries.find(bname);
      if (bit == entries.end()) throw Error(Errc::MissingTensor, bname);
      if (bit->second.shape != Shape({n.spec.out_ch}))
        throw Error(Errc::ShapeMismatch, bname + ": expected (" + std::to_string(n.spec.out_ch) +
                                             ",), got " + bit->second.shape.str());
      g.weights[n.id]["b"] = std::move(bit->second);
      entries.erase(bit);
    }
  }
  if (!entries.empty())
    throw Error(Errc::ParseError, "unexpected tensor '" + entries.begin()->first + "'");
}

// ---- files ----

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::InvalidArgument, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::string s = read_file(path);
  return std::vector<uint8_t>(s.begin(), s.end());
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::InvalidArgument, "cannot write '" + path + "'");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
}

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::InvalidArgument, "cannot write '" + path + "'");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ModelFile load_model(const std::string& model_path, const std::string& weights_path) {
  std::string text;
  try {
    text = read_file(model_path);
  } catch (const Error& e) {
    throw Error(Errc::ModelLoadError, e.what());
  }
  ModelFile m = parse_model_text(text);
  ValidationReport rep = validate_graph(m.graph);
  if (!rep.ok()) throw Error(Errc::ModelLoadError, "invalid graph:\n" + rep.str());
  if (!weights_path.empty()) {
    std::vector<uint8_t> blob;
    try {
      blob = read_file_bytes(weights_path);
    } catch (const Error& e) {
      throw Error(Errc::ModelLoadError, e.what());
    }
    load_weight_blob(blob, m.graph);
  }
  return m;
}

}  // namespace oninfer
