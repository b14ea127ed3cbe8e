#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "oninfer/graph.hpp"
#include "oninfer/interpret.hpp"
#include "oninfer/opcount.hpp"
#include "testutil.hpp"

using namespace oninfer;

namespace {

Graph chain_graph() {
  // (3,8,8) -> Conv2D k3 s1 p1 -> ReLU -> MaxPool2D 2 -> Flatten -> Dense 10
  Graph g;
  g.inputs.push_back({"x", Shape({3, 8, 8})});
  LayerSpec conv;
  conv.kind = LayerKind::Conv2D;
  conv.kernel = {3, 3};
  conv.stride = {1, 1};
  conv.pad = {1, 1};
  conv.in_ch = 3;
  conv.out_ch = 4;
  g.nodes.push_back({0, conv, {graph_input_value(0)}});
  LayerSpec relu;
  relu.kind = LayerKind::ReLU;
  g.nodes.push_back({1, relu, {0}});
  LayerSpec pool;
  pool.kind = LayerKind::MaxPool2D;
  pool.kernel = {2, 2};
  pool.stride = {2, 2};
  pool.pad = {0, 0};
  g.nodes.push_back({2, pool, {1}});
  LayerSpec fl;
  fl.kind = LayerKind::Flatten;
  g.nodes.push_back({3, fl, {2}});
  LayerSpec dense;
  dense.kind = LayerKind::Dense;
  dense.in_ch = 64;
  dense.out_ch = 10;
  g.nodes.push_back({4, dense, {3}});
  g.outputs = {4};
  g.weights[0]["w"] = Tensor::zeros(Shape({4, 3, 3, 3}));
  g.weights[0]["b"] = Tensor::zeros(Shape({4}));
  g.weights[4]["w"] = Tensor::zeros(Shape({10, 64}));
  g.weights[4]["b"] = Tensor::zeros(Shape({10}));
  return g;
}

}  // namespace

TEST_CASE("conv output dimension") {
  CHECK(conv_out_dim(8, 3, 1, 1) == 8);
  CHECK(conv_out_dim(8, 3, 2, 1) == 4);
  CHECK(conv_out_dim(8, 2, 2, 0) == 4);
  CHECK(conv_out_dim(5, 2, 2, 0) == 2);   // floor
  CHECK(conv_out_dim(4, 4, 1, 0) == 1);
  CHECK(conv_out_dim(2, 4, 1, 0) == 0);   // too small
  CHECK(conv_out_dim(2, 4, 1, 1) == 1);   // rescued by padding
}

TEST_CASE("shape inference on a conv chain") {
  Graph g = chain_graph();
  REQUIRE(validate_graph(g).ok());
  auto shapes = infer_shapes(g);
  CHECK(shapes.at(0) == Shape({4, 8, 8}));
  CHECK(shapes.at(1) == Shape({4, 8, 8}));
  CHECK(shapes.at(2) == Shape({4, 4, 4}));
  CHECK(shapes.at(3) == Shape({64}));
  CHECK(shapes.at(4) == Shape({10}));
}

TEST_CASE("channel-less conv squeezes single output channel") {
  Graph g;
  g.inputs.push_back({"vol", Shape({8, 8, 8})});
  LayerSpec conv;
  conv.kind = LayerKind::Conv3D;
  conv.kernel = {2, 2, 2};
  conv.stride = {2, 2, 2};
  conv.pad = {0, 0, 0};
  conv.in_ch = 1;
  conv.out_ch = 1;
  g.nodes.push_back({0, conv, {graph_input_value(0)}});
  g.outputs = {0};
  g.weights[0]["w"] = Tensor::zeros(Shape({1, 1, 2, 2, 2}));
  g.weights[0]["b"] = Tensor::zeros(Shape({1}));
  REQUIRE(validate_graph(g).ok());
  CHECK(infer_shapes(g).at(0) == Shape({4, 4, 4}));  // squeezed

  g.nodes[0].spec.out_ch = 2;  // no squeeze with 2 channels
  g.weights[0]["w"] = Tensor::zeros(Shape({2, 1, 2, 2, 2}));
  g.weights[0]["b"] = Tensor::zeros(Shape({2}));
  CHECK(infer_shapes(g).at(0) == Shape({2, 4, 4, 4}));
}

TEST_CASE("pool keeps rank on channel-less input") {
  Graph g;
  g.inputs.push_back({"vol", Shape({8, 4, 8})});
  LayerSpec pool;
  pool.kind = LayerKind::MaxPool3D;
  pool.kernel = {2, 2, 2};
  pool.stride = {2, 2, 2};
  pool.pad = {0, 0, 0};
  g.nodes.push_back({0, pool, {graph_input_value(0)}});
  g.outputs = {0};
  REQUIRE(validate_graph(g).ok());
  CHECK(infer_shapes(g).at(0) == Shape({4, 2, 4}));
}

TEST_CASE("negative output dimension is rejected") {
  Graph g;
  g.inputs.push_back({"x", Shape({3, 2, 2})});
  LayerSpec conv;
  conv.kind = LayerKind::Conv2D;
  conv.kernel = {4, 4};
  conv.stride = {1, 1};
  conv.pad = {0, 0};
  conv.in_ch = 3;
  conv.out_ch = 1;
  g.nodes.push_back({0, conv, {graph_input_value(0)}});
  g.outputs = {0};
  g.weights[0]["w"] = Tensor::zeros(Shape({1, 3, 4, 4}));
  g.weights[0]["b"] = Tensor::zeros(Shape({1}));
  REQUIRE(validate_graph(g).ok());  // structurally fine
  CHECK_THROWS_AS(infer_shapes(g), Error);
  try {
    infer_shapes(g);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NegativeDimension);
  }
}

TEST_CASE("validation catches structural problems") {
  Graph ok = chain_graph();
  REQUIRE(validate_graph(ok).ok());

  SUBCASE("duplicate node id") {
    Graph g = ok;
    g.nodes[1].id = 0;
    CHECK_FALSE(validate_graph(g).ok());
  }
  SUBCASE("negative node id") {
    Graph g = ok;
    g.nodes[1].id = -3;
    CHECK_FALSE(validate_graph(g).ok());
  }
  SUBCASE("unresolved input reference") {
    Graph g = ok;
    g.nodes[1].inputs = {99};
    CHECK_FALSE(validate_graph(g).ok());
  }
  SUBCASE("unresolved output") {
    Graph g = ok;
    g.outputs = {99};
    CHECK_FALSE(validate_graph(g).ok());
  }
  SUBCASE("bad arity") {
    Graph g = ok;
    g.nodes[1].inputs = {0, 0};
    CHECK_FALSE(validate_graph(g).ok());
  }
  SUBCASE("pool pad must stay below window") {
    Graph g = ok;
    g.nodes[2].spec.pad = {2, 2};
    CHECK_FALSE(validate_graph(g).ok());
  }
  SUBCASE("missing weight tensor") {
    // Weights may be attached after graph construction, so validation stays
    // green; execution is where the absence becomes an error.
    Graph g = ok;
    g.weights.erase(0);
    CHECK(validate_graph(g).ok());
    std::map<std::string, Tensor> in;
    in["x"] = Tensor::zeros(Shape({3, 8, 8}));
    CHECK_THROWS_AS(run_graph(g, in), Error);
  }
  SUBCASE("weight shape mismatch") {
    Graph g = ok;
    g.weights[0]["w"] = Tensor::zeros(Shape({4, 3, 3}));
    CHECK_FALSE(validate_graph(g).ok());
  }
  SUBCASE("unexpected bias") {
    Graph g = ok;
    g.nodes[4].spec.has_bias = false;
    CHECK_FALSE(validate_graph(g).ok());  // blob still carries 4/b
  }
  SUBCASE("cycle") {
    Graph g = ok;
    g.nodes[0].inputs = {4};
    ValidationReport rep = validate_graph(g);
    CHECK_FALSE(rep.ok());
  }
  SUBCASE("graph input rank bound") {
    Graph g = ok;
    g.inputs[0].shape = Shape({1, 1, 1, 1, 1, 1});
    CHECK_FALSE(validate_graph(g).ok());
  }
  SUBCASE("non-positive dim") {
    Graph g = ok;
    g.inputs[0].shape = Shape({3, 0, 8});
    CHECK_FALSE(validate_graph(g).ok());
  }
}

TEST_CASE("topological order is deterministic and id-ascending on ties") {
  Graph g;
  g.inputs.push_back({"x", Shape({4})});
  LayerSpec relu;
  relu.kind = LayerKind::ReLU;
  // three independent nodes consuming the input, declared out of order
  g.nodes.push_back({5, relu, {graph_input_value(0)}});
  g.nodes.push_back({1, relu, {graph_input_value(0)}});
  g.nodes.push_back({3, relu, {graph_input_value(0)}});
  LayerSpec cat;
  cat.kind = LayerKind::Concat;
  cat.axis = 0;
  g.nodes.push_back({7, cat, {1, 3, 5}});
  g.outputs = {7};
  REQUIRE(validate_graph(g).ok());
  std::vector<NodeId> order = topological_order(g);
  CHECK(order == std::vector<NodeId>{1, 3, 5, 7});
}

TEST_CASE("cycle detection throws from topological_order") {
  Graph g;
  g.inputs.push_back({"x", Shape({4})});
  LayerSpec relu;
  relu.kind = LayerKind::ReLU;
  g.nodes.push_back({0, relu, {1}});
  g.nodes.push_back({1, relu, {0}});
  g.outputs = {1};
  CHECK_THROWS_AS(topological_order(g), Error);
}

TEST_CASE("parameter counting") {
  Graph g = chain_graph();
  // conv: 4*3*9+4 = 112, dense: 10*64+10 = 650
  CHECK(count_parameters(g) == 762);
}

TEST_CASE("operation counting follows the convention") {
  Graph g = chain_graph();
  OpCountConvention conv;
  // conv: 64 outputs/ch * 4 ch * (3*9 MACs*2) + bias 1/out = 256*54 + 256
  // relu: 256; pool: 64 outputs * (4-1) = 192; flatten 0; dense: 10*(64*2) + 10
  int64_t conv_ops = 256 * 54 + 256;
  int64_t expect = conv_ops + 256 + 192 + 0 + 10 * 128 + 10;
  CHECK(count_operations(g, conv) == expect);

  OpCountConvention mac1;
  mac1.mac_ops = 1;
  mac1.bias_ops_per_output = 0;
  mac1.pool_ops_per_output_is_window_minus_1 = 0;
  int64_t expect2 = 256 * 27 + 256 + 0 + 0 + 10 * 64;
  CHECK(count_operations(g, mac1) == expect2);
}

TEST_CASE("random graphs validate and infer shapes") {
  for (uint64_t seed = 1; seed <= 50; ++seed) {
    ModelFile m = testutil::random_model(seed);
    CAPTURE(seed);
    REQUIRE(validate_graph(m.graph).ok());
    auto shapes = infer_shapes(m.graph);
    CHECK(shapes.size() == m.graph.nodes.size());
    for (const auto& [id, s] : shapes) CHECK(s.elems() >= 1);
  }
}
