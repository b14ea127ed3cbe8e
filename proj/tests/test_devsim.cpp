#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>

#include "doctest.h"
#include "oninfer/devsim.hpp"
#include "oninfer/interpret.hpp"
#include "oninfer/zoo.hpp"
#include "testutil.hpp"

using namespace oninfer;

namespace {

constexpr uint64_t kBase = 0x40000000ull;

struct Rig {
  SimDram dram;
  AccelDevice dev;
  HostDriver host;

  explicit Rig(ZooModelId id, uint64_t dram_size = 16ull << 20)
      : dram(kBase, dram_size),
        dev(build_zoo_model(id).graph, &dram),
        host{&dev, &dram} {}
};

void write_addr(AccelDevice& dev, uint32_t lo_reg, uint64_t addr) {
  dev.mmio_write(lo_reg, static_cast<uint32_t>(addr & 0xffffffffu));
  dev.mmio_write(lo_reg + 4, static_cast<uint32_t>(addr >> 32));
}

}  // namespace

TEST_CASE("dram bounds and round trips") {
  SimDram d(kBase, 4096);
  CHECK(d.base() == kBase);
  CHECK(d.size() == 4096);
  std::vector<float> v = {1.5f, -2.25f, 3.0f};
  d.write_f32(kBase + 16, v);
  CHECK(d.read_f32(kBase + 16, 3) == v);

  CHECK(d.in_bounds(kBase, 4096));
  CHECK_FALSE(d.in_bounds(kBase - 1, 1));
  CHECK_FALSE(d.in_bounds(kBase + 4095, 2));
  CHECK_FALSE(d.in_bounds(kBase, ~0ull));  // overflow guarded

  try {
    d.write_f32(kBase + 4090, v);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DmaOutOfBounds);
  }

  std::vector<uint8_t> snap = d.snapshot();
  CHECK(snap.size() == 16 + 4096);
  SimDram d2 = SimDram::from_snapshot(snap);
  CHECK(d2.base() == d.base());
  CHECK(d2.size() == d.size());
  CHECK(d2.read_f32(kBase + 16, 3) == v);
}

TEST_CASE("register semantics") {
  Rig rig(ZooModelId::MultiEsperta);
  AccelDevice& dev = rig.dev;

  SUBCASE("idle bit reflects state, start self-clears") {
    uint32_t ctrl = dev.mmio_read(REG_CTRL);
    CHECK((ctrl & CTRL_IDLE) != 0);
    CHECK((ctrl & CTRL_START) == 0);

    Rng rng(1);
    auto in = testutil::random_inputs(dev.graph(), rng);
    uint64_t in_addr = rig.host.load_ip_input(in);
    write_addr(dev, REG_INPUT_ADDR_LO, in_addr);
    write_addr(dev, REG_OUTPUT_ADDR_LO, in_addr + 4096);
    dev.mmio_write(REG_CTRL, CTRL_START);
    CHECK(dev.state() == DeviceState::Running);
    ctrl = dev.mmio_read(REG_CTRL);
    CHECK((ctrl & CTRL_START) == 0);  // self-cleared
    CHECK((ctrl & CTRL_IDLE) == 0);

    dev.step();
    CHECK(dev.state() == DeviceState::DoneLatched);
    ctrl = dev.mmio_read(REG_CTRL);
    CHECK((ctrl & CTRL_DONE) != 0);
    CHECK((ctrl & CTRL_IDLE) != 0);  // not running
    // DONE cleared by the read; device returns to Idle
    CHECK(dev.state() == DeviceState::Idle);
    CHECK((dev.mmio_read(REG_CTRL) & CTRL_DONE) == 0);
    CHECK(dev.completions() == 1);
  }

  SUBCASE("start is ignored unless idle") {
    Rng rng(2);
    auto in = testutil::random_inputs(dev.graph(), rng);
    uint64_t a = rig.host.load_ip_input(in);
    write_addr(dev, REG_INPUT_ADDR_LO, a);
    write_addr(dev, REG_OUTPUT_ADDR_LO, a + 4096);
    dev.mmio_write(REG_CTRL, CTRL_START);
    REQUIRE(dev.state() == DeviceState::Running);
    dev.step(1);  // fetch stage only
    dev.mmio_write(REG_CTRL, CTRL_START);  // mid-flight: ignored
    CHECK(dev.completions() == 0);
    dev.step();
    CHECK(dev.completions() == 1);
  }

  SUBCASE("interrupt status latches and clears on write-1") {
    dev.mmio_write(REG_GIER, 1);
    dev.mmio_write(REG_IP_IER, 1);
    CHECK(dev.mmio_read(REG_GIER) == 1);
    CHECK(dev.mmio_read(REG_IP_IER) == 1);

    Rng rng(3);
    auto in = testutil::random_inputs(dev.graph(), rng);
    uint64_t a = rig.host.load_ip_input(in);
    write_addr(dev, REG_INPUT_ADDR_LO, a);
    write_addr(dev, REG_OUTPUT_ADDR_LO, a + 4096);
    dev.mmio_write(REG_CTRL, CTRL_START);
    dev.step();
    CHECK((dev.mmio_read(REG_IP_ISR) & 1u) != 0);
    dev.mmio_write(REG_IP_ISR, 0);  // write-0: no effect
    CHECK((dev.mmio_read(REG_IP_ISR) & 1u) != 0);
    dev.mmio_write(REG_IP_ISR, 1);  // write-1-to-clear
    CHECK((dev.mmio_read(REG_IP_ISR) & 1u) == 0);
  }

  SUBCASE("no interrupt when disabled") {
    Rng rng(4);
    auto in = testutil::random_inputs(dev.graph(), rng);
    uint64_t a = rig.host.load_ip_input(in);
    write_addr(dev, REG_INPUT_ADDR_LO, a);
    write_addr(dev, REG_OUTPUT_ADDR_LO, a + 4096);
    dev.mmio_write(REG_CTRL, CTRL_START);
    dev.step();
    CHECK(dev.mmio_read(REG_IP_ISR) == 0);
  }

  SUBCASE("unmapped offsets are recorded, reads return zero") {
    CHECK(dev.mmio_read(0x44) == 0);
    dev.mmio_write(0x80, 123);
    CHECK(dev.unmapped_accesses().size() == 2);
    CHECK(dev.unmapped_accesses()[0] == 0x44);
    CHECK(dev.unmapped_accesses()[1] == 0x80);
    CHECK(dev.state() == DeviceState::Idle);  // harmless
  }
}

TEST_CASE("auto restart re-enters running after completion") {
  Rig rig(ZooModelId::MultiEsperta);
  AccelDevice& dev = rig.dev;
  Rng rng(5);
  auto in = testutil::random_inputs(dev.graph(), rng);
  uint64_t a = rig.host.load_ip_input(in);
  write_addr(dev, REG_INPUT_ADDR_LO, a);
  write_addr(dev, REG_OUTPUT_ADDR_LO, a + 4096);
  dev.mmio_write(REG_CTRL, CTRL_START | CTRL_AUTO_RESTART);
  CHECK(dev.state() == DeviceState::Running);

  dev.step();  // one inference
  CHECK(dev.completions() == 1);
  CHECK(dev.state() == DeviceState::Running);  // restarted, not latched
  dev.step();
  CHECK(dev.completions() == 2);
  CHECK((dev.mmio_read(REG_CTRL) & CTRL_AUTO_RESTART) != 0);  // persistent

  // dropping the bit stops the loop at the next completion
  dev.mmio_write(REG_CTRL, 0);
  dev.step();
  CHECK(dev.completions() == 3);
  CHECK(dev.state() == DeviceState::DoneLatched);
}

TEST_CASE("dma errors park the device without partial output") {
  Rig rig(ZooModelId::MultiEsperta, 1 << 12);  // 4 KiB dram
  AccelDevice& dev = rig.dev;
  Rng rng(6);
  auto in = testutil::random_inputs(dev.graph(), rng);
  uint64_t a = rig.host.load_ip_input(in);

  SUBCASE("input fetch out of bounds") {
    write_addr(dev, REG_INPUT_ADDR_LO, kBase + (1 << 12) - 4);  // too close to the end
    write_addr(dev, REG_OUTPUT_ADDR_LO, a);
    dev.mmio_write(REG_CTRL, CTRL_START);
    dev.step();
    CHECK(dev.state() == DeviceState::Idle);
    CHECK(dev.error_flag());
    CHECK(dev.completions() == 0);
    CHECK((dev.mmio_read(REG_CTRL) & CTRL_DONE) == 0);
  }

  SUBCASE("output writeback out of bounds leaves dram untouched") {
    std::vector<uint8_t> before = rig.dram.snapshot();
    write_addr(dev, REG_INPUT_ADDR_LO, a);
    write_addr(dev, REG_OUTPUT_ADDR_LO, kBase + (1 << 12) - 4);
    dev.mmio_write(REG_CTRL, CTRL_START);
    dev.step();
    CHECK(dev.state() == DeviceState::Idle);
    CHECK(dev.error_flag());
    CHECK_FALSE(dev.last_error().empty());
    CHECK(rig.dram.snapshot() == before);  // no partial writeback
  }
}

TEST_CASE("host driver round trip matches direct execution") {
  for (ZooModelId id : {ZooModelId::MultiEsperta, ZooModelId::LogisticNet}) {
    Rig rig(id);
    Rng rng(7 + static_cast<uint64_t>(id));
    for (int i = 0; i < 5; ++i) {
      auto in = testutil::random_inputs(rig.dev.graph(), rng);
      std::vector<Tensor> got = rig.host.host_infer(in);
      RunResult ref = run_graph(rig.dev.graph(), in);
      REQUIRE(got.size() == ref.outputs.size());
      for (size_t j = 0; j < got.size(); ++j) {
        REQUIRE(got[j].shape == ref.outputs[j].shape);
        CHECK(got[j].f == ref.outputs[j].f);  // bitwise
      }
    }
  }
}

TEST_CASE("host driver rejects a busy device") {
  Rig rig(ZooModelId::MultiEsperta);
  Rng rng(8);
  auto in = testutil::random_inputs(rig.dev.graph(), rng);
  uint64_t a = rig.host.load_ip_input(in);
  write_addr(rig.dev, REG_INPUT_ADDR_LO, a);
  write_addr(rig.dev, REG_OUTPUT_ADDR_LO, a + 4096);
  rig.dev.mmio_write(REG_CTRL, CTRL_START);
  REQUIRE(rig.dev.state() == DeviceState::Running);
  try {
    rig.host.host_infer(in);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::RejectedBusy);
  }
}

TEST_CASE("host driver times out when done never arrives") {
  Rig rig(ZooModelId::MultiEsperta);
  rig.host.poll_budget = 2;  // far fewer polls than pipeline stages
  Rng rng(9);
  auto in = testutil::random_inputs(rig.dev.graph(), rng);
  try {
    rig.host.host_infer(in);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::Timeout);
  }
}

TEST_CASE("a faulted device recovers for the next clean run") {
  Rig rig(ZooModelId::MultiEsperta);
  write_addr(rig.dev, REG_INPUT_ADDR_LO, kBase + rig.dram.size() - 4);
  write_addr(rig.dev, REG_OUTPUT_ADDR_LO, kBase);
  rig.dev.mmio_write(REG_CTRL, CTRL_START);
  rig.dev.step();
  REQUIRE(rig.dev.error_flag());
  REQUIRE(rig.dev.state() == DeviceState::Idle);
  Rng rng(9);
  auto in = testutil::random_inputs(rig.dev.graph(), rng);
  std::vector<Tensor> got = rig.host.host_infer(in);  // fresh run succeeds
  RunResult ref = run_graph(rig.dev.graph(), in);
  CHECK(got[0].f == ref.outputs[0].f);
}

TEST_CASE("multi-output graphs concatenate outputs in declaration order") {
  // multi_esperta declares six scalar verdict outputs; the driver must slice
  // the flat DRAM span back into six tensors in declaration order.
  Rig rig(ZooModelId::MultiEsperta, 1 << 16);
  CHECK(rig.dev.output_elems() == 6);
  CHECK(rig.dev.input_elems() == 3);
  Rng rng(10);
  auto in = testutil::random_inputs(rig.dev.graph(), rng);
  std::vector<Tensor> got = rig.host.host_infer(in);
  RunResult ref = run_graph(rig.dev.graph(), in);
  REQUIRE(got.size() == 6);
  for (size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].shape == ref.outputs[i].shape);
    CHECK(got[i].f == ref.outputs[i].f);
  }
}

TEST_CASE("large single-output graph round-trips through dram") {
  // vae encoder: 98,304 input floats in, one packed (6,) tensor out.
  Rig rig(ZooModelId::VaeEncoder, 64ull << 20);
  CHECK(rig.dev.output_elems() == 6);
  CHECK(rig.dev.input_elems() == 98304);
  Rng rng(10);
  auto in = testutil::random_inputs(rig.dev.graph(), rng);
  std::vector<Tensor> got = rig.host.host_infer(in);
  RunResult ref = run_graph(rig.dev.graph(), in);
  REQUIRE(got.size() == 1);
  CHECK(got[0].f == ref.outputs[0].f);
}

TEST_CASE("random mmio sequences never corrupt the device") {
  Rig rig(ZooModelId::MultiEsperta, 1 << 16);
  AccelDevice& dev = rig.dev;
  Rng rng(4242);
  Rng inp(17);
  auto in = testutil::random_inputs(dev.graph(), inp);
  uint64_t a = rig.host.load_ip_input(in);
  for (int i = 0; i < 20000; ++i) {
    int action = rng.uniform_int(0, 4);
    switch (action) {
      case 0: {
        uint32_t off = static_cast<uint32_t>(rng.uniform_int(0, 10)) * 4;
        dev.mmio_write(off, rng.next_u32());
        break;
      }
      case 1: {
        uint32_t off = static_cast<uint32_t>(rng.uniform_int(0, 10)) * 4;
        (void)dev.mmio_read(off);
        break;
      }
      case 2:
        dev.step(rng.uniform_int(1, 4));
        break;
      case 3:
        write_addr(dev, REG_INPUT_ADDR_LO, a);
        write_addr(dev, REG_OUTPUT_ADDR_LO, a + 8192);
        break;
      default:
        dev.mmio_write(REG_CTRL, CTRL_START);
        break;
    }
    DeviceState s = dev.state();
    CHECK((s == DeviceState::Idle || s == DeviceState::Running ||
           s == DeviceState::DoneLatched));
  }
  // Device still functions after the fuzzing: quiesce it and do a clean run.
  dev.mmio_write(REG_CTRL, 0);  // drop auto-restart if a random write set it
  while (dev.state() != DeviceState::Idle) {
    dev.step();
    (void)dev.mmio_read(REG_CTRL);  // clears a DONE latch
  }
  std::vector<Tensor> got = rig.host.host_infer(in);
  RunResult ref = run_graph(dev.graph(), in);
  CHECK(got[0].f == ref.outputs[0].f);
}
