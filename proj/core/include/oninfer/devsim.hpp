#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "oninfer/graph.hpp"
#include "oninfer/interpret.hpp"

namespace oninfer {

// Register map (this artifact's documented ABI; 32-bit registers, byte offsets):
//   0x00 CTRL   bit0 START (write-1, self-clearing)
//               bit1 DONE  (set on completion, cleared by reading CTRL)
//               bit2 IDLE  (set when not Running)
//               bit7 AUTO_RESTART (persistent; re-enter Running on completion)
//   0x04 GIER   global interrupt enable (stored)
//   0x08 IP_IER ip interrupt enable (bit0 done-interrupt)
//   0x0C IP_ISR ip interrupt status (bit0 set on completion if enabled; write-1-to-clear)
//   0x10 INPUT_ADDR_LO   0x14 INPUT_ADDR_HI
//   0x18 OUTPUT_ADDR_LO  0x1C OUTPUT_ADDR_HI
inline constexpr uint32_t REG_CTRL = 0x00;
inline constexpr uint32_t REG_GIER = 0x04;
inline constexpr uint32_t REG_IP_IER = 0x08;
inline constexpr uint32_t REG_IP_ISR = 0x0C;
inline constexpr uint32_t REG_INPUT_ADDR_LO = 0x10;
inline constexpr uint32_t REG_INPUT_ADDR_HI = 0x14;
inline constexpr uint32_t REG_OUTPUT_ADDR_LO = 0x18;
inline constexpr uint32_t REG_OUTPUT_ADDR_HI = 0x1C;

inline constexpr uint32_t CTRL_START = 1u << 0;
inline constexpr uint32_t CTRL_DONE = 1u << 1;
inline constexpr uint32_t CTRL_IDLE = 1u << 2;
inline constexpr uint32_t CTRL_AUTO_RESTART = 1u << 7;

// Byte-addressable DRAM shared between host and device.
class SimDram {
 public:
  SimDram(uint64_t base, uint64_t size) : base_(base), bytes_(size, 0) {}

  uint64_t base() const { return base_; }
  uint64_t size() const { return bytes_.size(); }
  bool in_bounds(uint64_t addr, uint64_t len) const {
    return addr >= base_ && addr + len >= addr && addr + len <= base_ + bytes_.size();
  }
  // Throws DmaOutOfBounds.
  void write(uint64_t addr, const void* src, uint64_t len);
  void read(uint64_t addr, void* dst, uint64_t len) const;

  void write_f32(uint64_t addr, const std::vector<float>& v);
  std::vector<float> read_f32(uint64_t addr, size_t count) const;

  // Snapshot: u64 LE base, u64 LE size, raw bytes.
  std::vector<uint8_t> snapshot() const;
  static SimDram from_snapshot(const std::vector<uint8_t>& bytes);

 private:
  uint64_t base_;
  std::vector<uint8_t> bytes_;
};

enum class DeviceState { Idle, Running, DoneLatched };

// Memory-mapped accelerator model. One inference = DMA input fetch, one graph node
// per stage in topological order, DMA output writeback, DONE latch. Inputs/outputs
// travel as little-endian fp32, row-major, multiple tensors concatenated in graph
// declaration order.
class AccelDevice {
 public:
  AccelDevice(Graph g, SimDram* dram);

  // Register access. Unmapped offsets are reported (non-fatal): writes ignored,
  // reads return 0; see unmapped_accesses().
  void mmio_write(uint32_t offset, uint32_t value);
  uint32_t mmio_read(uint32_t offset);

  // Executes up to `max_stages` pipeline stages (-1 = run to completion of the
  // current inference). No-op unless Running.
  DeviceState step(int max_stages = -1);

  DeviceState state() const { return state_; }
  bool error_flag() const { return error_flag_; }
  std::string last_error() const { return last_error_; }
  const std::vector<uint32_t>& unmapped_accesses() const { return unmapped_; }
  uint64_t completions() const { return completions_; }

  const Graph& graph() const { return graph_; }
  int64_t input_elems() const { return input_elems_; }
  int64_t output_elems() const { return output_elems_; }

 private:
  void start();
  void complete();
  void fail(const std::string& what);
  uint64_t input_addr() const;
  uint64_t output_addr() const;

  Graph graph_;
  SimDram* dram_;
  std::vector<NodeId> order_;
  int64_t input_elems_ = 0;
  int64_t output_elems_ = 0;

  DeviceState state_ = DeviceState::Idle;
  uint32_t gier_ = 0, ip_ier_ = 0, ip_isr_ = 0;
  uint32_t addr_regs_[4] = {0, 0, 0, 0};
  bool auto_restart_ = false;
  bool done_latch_ = false;
  bool error_flag_ = false;
  std::string last_error_;
  std::vector<uint32_t> unmapped_;
  uint64_t completions_ = 0;

  // in-flight inference
  size_t stage_ = 0;  // 0 = fetch; 1..n = nodes; n+1 = writeback
  std::map<std::string, Tensor> staged_inputs_;
  std::map<ValueId, Tensor> values_;
};

// Host driver: the load-input / start / read-output sequence over MMIO + DRAM.
struct HostDriver {
  AccelDevice* dev;
  SimDram* dram;
  uint64_t poll_budget = 1000000;

  uint64_t load_ip_input(const std::map<std::string, Tensor>& inputs);  // returns input addr
  void start_ip(uint64_t input_addr, uint64_t output_addr, bool auto_restart = false);
  std::vector<Tensor> read_ip_output(uint64_t output_addr);

  // Full round trip; throws RejectedBusy when the device is not Idle and Timeout
  // when DONE is not observed within poll_budget CTRL reads.
  std::vector<Tensor> host_infer(const std::map<std::string, Tensor>& inputs);
};

}  // namespace oninfer
