#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "oninfer/opcount.hpp"
#include "oninfer/plan.hpp"
#include "oninfer/zoo.hpp"
#include "testutil.hpp"

using namespace oninfer;

TEST_CASE("device model defaults and loader agree") {
  DeviceModel d = DeviceModel::zcu104();
  CHECK(d.lut == 230000);
  CHECK(d.ff == 461000);
  CHECK(d.dsp == 1728);
  CHECK(d.bram_only_capacity() == 312 * 4608);
  CHECK(d.total_onchip_bytes() == 312 * 4608 + 96 * 36864);

  DeviceModel j = load_device_model(testutil::data_path("zcu104.json"));
  CHECK(j.name == d.name);
  CHECK(j.lut == d.lut);
  CHECK(j.ff == d.ff);
  CHECK(j.dsp == d.dsp);
  CHECK(j.bram36_blocks == d.bram36_blocks);
  CHECK(j.bram36_bytes == d.bram36_bytes);
  CHECK(j.uram_blocks == d.uram_blocks);
  CHECK(j.uram_bytes == d.uram_bytes);
  CHECK(j.clock_hz == d.clock_hz);
}

TEST_CASE("onchip estimate arithmetic") {
  CHECK(estimate_onchip_bytes(13, 0) == 13 * 4608);
  CHECK(estimate_onchip_bytes(0, 1) == 36864);
  CHECK(estimate_onchip_bytes(165, 92) == 165 * 4608 + 92 * 36864);
  DeviceModel tiny;
  tiny.bram36_bytes = 100;
  tiny.uram_bytes = 10;
  CHECK(estimate_onchip_bytes(2, 3, tiny) == 230);
}

TEST_CASE("backend profiles") {
  BackendProfile dpu = BackendProfile::dpu_like();
  CHECK(dpu.name == "dpu-like");
  CHECK(dpu.precision == DType::Int8);
  CHECK(dpu.supported == std::set<LayerKind>{LayerKind::Conv2D, LayerKind::MaxPool2D,
                                             LayerKind::ReLU, LayerKind::Dense,
                                             LayerKind::Concat, LayerKind::Flatten});
  BackendProfile hls = BackendProfile::hls_like();
  CHECK(hls.name == "hls-like");
  CHECK(hls.precision == DType::Fp32);
  CHECK(hls.supported.size() == 11);

  SupportVerdict v = check_backend_support(build_zoo_model(ZooModelId::MultiEsperta).graph, dpu);
  CHECK_FALSE(v.supported);
  CHECK(v.unsupported == std::vector<LayerKind>{LayerKind::GreaterThan, LayerKind::Sigmoid});

  SupportVerdict v2 = check_backend_support(build_zoo_model(ZooModelId::CnetPlusScalar).graph, dpu);
  CHECK(v2.supported);
  CHECK(v2.unsupported.empty());

  for (ZooModelId id : all_zoo_ids()) {
    SupportVerdict h = check_backend_support(build_zoo_model(id).graph, hls);
    CAPTURE(zoo_id_name(id));
    CHECK(h.supported);
  }
}

TEST_CASE("weight placement policy") {
  DeviceModel d = DeviceModel::zcu104();

  SUBCASE("small nets stay on chip in fp32") {
    Graph g = build_zoo_model(ZooModelId::LogisticNet).graph;
    DeploymentPlan p = place_weights(g, DType::Fp32, d);
    CHECK(p.weights == Placement::OnChip);
    CHECK(p.weight_bytes == count_parameters(g) * 4);
    CHECK(p.onchip_bytes == p.weight_bytes + p.buffer_bytes);
    CHECK(p.est_bram36 ==
          (p.onchip_bytes + d.bram36_bytes - 1) / d.bram36_bytes);
  }

  SUBCASE("large fp32 weights spill wholesale") {
    Graph g = build_zoo_model(ZooModelId::BaselineNet).graph;
    DeploymentPlan p = place_weights(g, DType::Fp32, d);
    CHECK(p.weights == Placement::ExternalDram);
    CHECK(p.weight_bytes == count_parameters(g) * 4);
    CHECK(p.onchip_bytes == p.buffer_bytes);  // only buffers remain
    DeploymentPlan q = place_weights(g, DType::Int8, d);
    CHECK(q.weight_bytes == count_parameters(g));  // one byte per parameter
  }

  SUBCASE("buffers are the two largest consumed outputs") {
    // conv(4ch 8x8) -> relu -> flatten; conv and relu outputs are consumed,
    // flatten's output is not. Largest two: conv out and relu out, 256 elems each.
    Graph g;
    Node c;
    c.id = 0;
    c.spec.kind = LayerKind::Conv2D;
    c.spec.kernel = {3, 3};
    c.spec.stride = {1, 1};
    c.spec.pad = {1, 1};
    c.spec.in_ch = 1;
    c.spec.out_ch = 4;
    c.spec.has_bias = false;
    c.inputs = {graph_input_value(0)};
    Node r;
    r.id = 1;
    r.spec.kind = LayerKind::ReLU;
    r.inputs = {0};
    Node f;
    f.id = 2;
    f.spec.kind = LayerKind::Flatten;
    f.inputs = {1};
    g.nodes = {c, r, f};
    g.inputs.push_back({"x", Shape({1, 8, 8})});
    g.outputs = {2};
    g.weights[0]["w"] = Tensor::zeros(Shape({4, 1, 3, 3}));

    DeploymentPlan p = place_weights(g, DType::Fp32, d);
    CHECK(p.weight_bytes == 36 * 4);
    CHECK(p.buffer_bytes == 2 * 256 * 4);
    CHECK(p.weights == Placement::OnChip);

    DeploymentPlan pi = place_weights(g, DType::Int8, d);
    CHECK(pi.weight_bytes == 36);
    CHECK(pi.buffer_bytes == 2 * 256);
  }

  SUBCASE("single-node graph has no consumed buffers") {
    Graph g;
    Node n;
    n.id = 0;
    n.spec.kind = LayerKind::ReLU;
    n.inputs = {graph_input_value(0)};
    g.nodes = {n};
    g.inputs.push_back({"x", Shape({4})});
    g.outputs = {0};
    DeploymentPlan p = place_weights(g, DType::Fp32, d);
    CHECK(p.weight_bytes == 0);
    CHECK(p.buffer_bytes == 0);
    CHECK(p.weights == Placement::OnChip);
  }
}

TEST_CASE("derived metrics arithmetic") {
  BenchRecord r;
  r.fps = 100.0;
  r.p_mpsoc_w = 2.5;
  r.op_count = 30720;
  DerivedMetrics m = derive_metrics(r);
  CHECK(m.energy_j == doctest::Approx(0.025));
  CHECK(m.throughput_mops == doctest::Approx(30720.0 * 100.0 / 1e6));
  CHECK_FALSE(m.speedup.has_value());

  BenchRecord cpu;
  cpu.fps = 25.0;
  DerivedMetrics s = derive_metrics(r, &cpu);
  REQUIRE(s.speedup.has_value());
  CHECK(*s.speedup == doctest::Approx(4.0));
}

TEST_CASE("reference csv loads and indexes") {
  auto rows = load_reference_csv(testutil::data_path("reference_values.csv"));
  CHECK(rows.size() == 12);
  const ReferenceRow* vae = find_reference(rows, "vae_encoder", "vitis-ai");
  REQUIRE(vae != nullptr);
  CHECK(vae->fps == doctest::Approx(606.65));
  CHECK(vae->params == 395692);
  CHECK(find_reference(rows, "vae_encoder", "hls") == nullptr);
  const ReferenceRow* bl = find_reference(rows, "baseline_net", "hls");
  REQUIRE(bl != nullptr);
  CHECK(bl->fps == doctest::Approx(0.21));

  std::optional<double> sp = reference_speedup("vae_encoder", "vitis-ai");
  REQUIRE(sp.has_value());
  CHECK(*sp == doctest::Approx(24.06));
  // cpu is the baseline platform, so its speedup is the self-ratio.
  std::optional<double> cpu_sp = reference_speedup("vae_encoder", "cpu");
  REQUIRE(cpu_sp.has_value());
  CHECK(*cpu_sp == doctest::Approx(1.0));
  CHECK_FALSE(reference_speedup("no_such_model", "hls").has_value());
}

TEST_CASE("reference csv parse errors") {
  testutil::TempDir td;
  SUBCASE("bad header") {
    std::string p = td.file("bad.csv");
    write_file(p, "model,platform,fps\nx,cpu,1\n");
    CHECK_THROWS_AS(load_reference_csv(p), Error);
  }
  SUBCASE("non-numeric field") {
    std::string p = td.file("bad2.csv");
    write_file(p,
               "model,platform,fps,p_board_w,p_mpsoc_w,energy_mj,throughput_mops,params,ops\n"
               "m,cpu,abc,1,1,1,1,1,1\n");
    CHECK_THROWS_AS(load_reference_csv(p), Error);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_reference_csv(td.file("nope.csv")), Error); }
}

TEST_CASE("table report on a self-consistent reference") {
  // Reference rows derived from their own fps/power/ops: everything must pass.
  testutil::TempDir td;
  std::string p = td.file("ref.csv");
  write_file(p,
             "model,platform,fps,p_board_w,p_mpsoc_w,energy_mj,throughput_mops,params,ops\n"
             "modelA,cpu,10,12,2.0,200,0.5,100,50000\n"
             "modelA,hls,100,11,1.5,15,5,100,50000\n");
  auto rows = load_reference_csv(p);
  std::vector<std::pair<std::string, std::pair<int64_t, int64_t>>> counts = {
      {"modelA", {100, 50000}}};
  TableReport rep = build_table_report(counts, rows);
  CHECK(rep.within_tolerances);
  CHECK(rep.violations.empty());
  REQUIRE(rep.counts.size() == 1);
  CHECK(rep.counts[0].params_dev == 0.0);
  CHECK(rep.counts[0].ops_dev == 0.0);
  REQUIRE(rep.metrics.size() == 2);
  for (const auto& m : rep.metrics) {
    CHECK(m.energy_dev <= 0.05);
    CHECK_FALSE(m.throughput_flagged);
  }
  // hls row: speedup = 100/10 = 10 but no published figure for this fake model
  CHECK_FALSE(rep.metrics[1].ref_speedup.has_value());
}

TEST_CASE("table report flags a thousand-fold throughput entry") {
  testutil::TempDir td;
  std::string p = td.file("ref.csv");
  // throughput column is ops*fps/1e9 instead of /1e6: flag and score against 1000x
  write_file(p,
             "model,platform,fps,p_board_w,p_mpsoc_w,energy_mj,throughput_mops,params,ops\n"
             "modelB,cpu,10,12,2.0,200,0.5,100,50000000\n");
  auto rows = load_reference_csv(p);
  std::vector<std::pair<std::string, std::pair<int64_t, int64_t>>> counts = {
      {"modelB", {100, 50000000}}};
  TableReport rep = build_table_report(counts, rows);
  REQUIRE(rep.metrics.size() == 1);
  CHECK(rep.metrics[0].throughput_flagged);
  CHECK(rep.metrics[0].throughput_mops == doctest::Approx(500.0));
  CHECK(rep.within_tolerances);  // flagged entries score against the scaled value
}
