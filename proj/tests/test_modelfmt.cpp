#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "oninfer/model_io.hpp"
#include "oninfer/zoo.hpp"
#include "testutil.hpp"

using namespace oninfer;

TEST_CASE("serialize/parse round trip is canonical and stable") {
  for (uint64_t seed = 1; seed <= 100; ++seed) {
    CAPTURE(seed);
    ModelFile m = testutil::random_model(seed);
    std::string text = serialize_model_text(m);
    ModelFile back = parse_model_text(text);
    CHECK(serialize_model_text(back) == text);  // byte-stable
    CHECK(models_equal(m, back));
  }
}

TEST_CASE("weight blob round trip") {
  for (uint64_t seed = 1; seed <= 30; ++seed) {
    CAPTURE(seed);
    ModelFile m = testutil::random_model(seed);
    std::vector<uint8_t> blob = serialize_weight_blob(m.graph);
    ModelFile copy = m;
    copy.graph.weights.clear();
    load_weight_blob(blob, copy.graph);
    REQUIRE(copy.graph.weights.size() == m.graph.weights.size());
    for (const auto& [id, tensors] : m.graph.weights) {
      for (const auto& [key, t] : tensors) {
        const Tensor* u = copy.graph.find_weight(id, key);
        REQUIRE(u != nullptr);
        CHECK(u->shape == t.shape);
        CHECK(u->f == t.f);  // bit-exact fp32
      }
    }
    CHECK(serialize_weight_blob(copy.graph) == blob);  // canonical order
  }
}

TEST_CASE("parser strictness") {
  ModelFile base = testutil::random_model(3);
  std::string text = serialize_model_text(base);

  SUBCASE("unknown top-level key") {
    std::string t = text;
    t.insert(t.find("\"version\""), "\"vendor\": 1,\n  ");
    CHECK_THROWS_AS(parse_model_text(t), Error);
  }
  SUBCASE("unknown kind") {
    ModelFile m = testutil::random_model(4);
    std::string t = serialize_model_text(m);
    size_t pos = t.find("\"kind\": \"");
    t.replace(pos, 9 + 4, "\"kind\": \"Gelu");
    CHECK_THROWS_AS(parse_model_text(t), Error);
  }
  SUBCASE("unsupported version") {
    std::string t = text;
    size_t pos = t.find("\"version\": 1");
    t.replace(pos, 12, "\"version\": 2");
    try {
      parse_model_text(t);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::UnsupportedVersion);
    }
  }
  SUBCASE("unknown attr key is rejected") {
    std::string t =
        "{\"version\":1,\"name\":\"t\",\"inputs\":[{\"name\":\"x\",\"shape\":[4]}],"
        "\"nodes\":[{\"id\":0,\"kind\":\"ReLU\",\"attrs\":{\"slope\":1},\"inputs\":[\"x\"]}],"
        "\"outputs\":[0],\"metadata\":{}}";
    CHECK_THROWS_AS(parse_model_text(t), Error);
  }
  SUBCASE("unknown graph input name") {
    std::string t =
        "{\"version\":1,\"name\":\"t\",\"inputs\":[{\"name\":\"x\",\"shape\":[4]}],"
        "\"nodes\":[{\"id\":0,\"kind\":\"ReLU\",\"attrs\":{},\"inputs\":[\"y\"]}],"
        "\"outputs\":[0],\"metadata\":{}}";
    CHECK_THROWS_AS(parse_model_text(t), Error);
  }
  SUBCASE("malformed JSON names a position") {
    try {
      parse_model_text("{\"version\": 1,,}");
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ParseError);
    }
  }
  SUBCASE("pool stride defaults to window") {
    std::string t =
        "{\"version\":1,\"name\":\"t\",\"inputs\":[{\"name\":\"x\",\"shape\":[8,8]}],"
        "\"nodes\":[{\"id\":0,\"kind\":\"MaxPool2D\",\"attrs\":{\"window\":[2,2]},"
        "\"inputs\":[\"x\"]}],\"outputs\":[0],\"metadata\":{}}";
    ModelFile m = parse_model_text(t);
    CHECK(m.graph.nodes[0].spec.stride == std::vector<int>{2, 2});
  }
}

TEST_CASE("float attrs survive the round trip exactly") {
  Graph g;
  g.inputs.push_back({"x", Shape({4})});
  LayerSpec l;
  l.kind = LayerKind::LeakyReLU;
  l.alpha = 0.30000001192092896f;  // awkward fp32 value
  g.nodes.push_back({0, l, {graph_input_value(0)}});
  LayerSpec t;
  t.kind = LayerKind::GreaterThan;
  t.theta = 1.0f / 3.0f;
  g.nodes.push_back({1, t, {0}});
  g.outputs = {1};
  ModelFile m;
  m.graph = g;
  ModelFile back = parse_model_text(serialize_model_text(m));
  CHECK(back.graph.nodes[0].spec.alpha == l.alpha);
  CHECK(back.graph.nodes[1].spec.theta == t.theta);
}

TEST_CASE("weight blob error cases") {
  ModelFile m = build_zoo_model(ZooModelId::LogisticNet);
  std::vector<uint8_t> blob = serialize_weight_blob(m.graph);
  REQUIRE(blob.size() > 16);

  SUBCASE("bad magic") {
    std::vector<uint8_t> b = blob;
    b[0] = 'X';
    try {
      load_weight_blob(b, m.graph);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::BadMagic);
    }
  }
  SUBCASE("truncated") {
    std::vector<uint8_t> b(blob.begin(), blob.begin() + blob.size() / 2);
    CHECK_THROWS_AS(load_weight_blob(b, m.graph), Error);
  }
  SUBCASE("missing tensor") {
    Graph g = m.graph;
    LayerSpec d;  // extra dense node the blob knows nothing about
    d.kind = LayerKind::Dense;
    d.in_ch = 4;
    d.out_ch = 2;
    g.nodes.push_back({1001, d, {g.outputs[0]}});
    g.outputs = {1001};
    try {
      load_weight_blob(blob, g);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::MissingTensor);
    }
  }
  SUBCASE("unexpected tensor") {
    Graph extra = m.graph;
    extra.weights[9999]["w"] = Tensor::zeros(Shape({1, 1}));
    std::vector<uint8_t> b = serialize_weight_blob(extra);
    Graph g = m.graph;
    CHECK_THROWS_AS(load_weight_blob(b, g), Error);
  }
  SUBCASE("declared shape wins over blob shape") {
    Graph g = m.graph;
    for (auto& n : g.nodes)
      if (n.spec.kind == LayerKind::Dense) n.spec.out_ch = 5;  // blob says 4
    try {
      load_weight_blob(blob, g);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ShapeMismatch);
    }
  }
}

TEST_CASE("quantization metadata survives the round trip") {
  ModelFile m = testutil::random_model(9);
  QuantMetadata q;
  q.edges[-1] = {0.5f, -3};
  q.edges[0] = {0.25f, 10};
  q.weight_scales[0] = 0.125f;
  m.meta.quantization = q;
  m.meta.reference_params = 123;
  m.meta.reference_ops = 456;
  ModelFile back = parse_model_text(serialize_model_text(m));
  REQUIRE(back.meta.quantization.has_value());
  CHECK(back.meta.quantization->edges.at(-1).first == 0.5f);
  CHECK(back.meta.quantization->edges.at(0).second == 10);
  CHECK(back.meta.quantization->weight_scales.at(0) == 0.125f);
  CHECK(back.meta.reference_params == 123);
  CHECK(back.meta.reference_ops == 456);
}

TEST_CASE("bundled zoo files equal the in-code builders") {
  for (ZooModelId id : all_zoo_ids()) {
    CAPTURE(zoo_id_name(id));
    ModelFile built = build_zoo_model(id);
    std::string model_path = testutil::data_path("zoo/" + std::string(zoo_id_name(id)) + ".model");
    std::string weights_path =
        testutil::data_path("zoo/" + std::string(zoo_id_name(id)) + ".weights");
    CHECK(read_file(model_path) == serialize_model_text(built));
    CHECK(read_file_bytes(weights_path) == serialize_weight_blob(built.graph));
    ModelFile loaded = load_model(model_path, weights_path);
    CHECK(models_equal(loaded, built));
  }
}

TEST_CASE("load_model surfaces validation failures") {
  testutil::TempDir tmp;
  std::string bad =
      "{\"version\":1,\"name\":\"t\",\"inputs\":[{\"name\":\"x\",\"shape\":[4]}],"
      "\"nodes\":[{\"id\":0,\"kind\":\"ReLU\",\"attrs\":{},\"inputs\":[3]}],"
      "\"outputs\":[0],\"metadata\":{}}";
  write_file(tmp.file("bad.model"), bad);
  try {
    load_model(tmp.file("bad.model"));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ModelLoadError);
  }
  CHECK_THROWS_AS(load_model(tmp.file("missing.model")), Error);
}
