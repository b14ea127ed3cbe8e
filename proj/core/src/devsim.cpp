#include "oninfer/devsim.hpp"

#include <cstring>

#include "oninfer/errors.hpp"

namespace oninfer {

// ---- SimDram ----

void SimDram::write(uint64_t addr, const void* src, uint64_t len) {
  if (!in_bounds(addr, len))
    throw Error(Errc::DmaOutOfBounds, "write of " + std::to_string(len) + " bytes at " +
                                          std::to_string(addr));
  std::memcpy(bytes_.data() + (addr - base_), src, len);
}

void SimDram::read(uint64_t addr, void* dst, uint64_t len) const {
  if (!in_bounds(addr, len))
    throw Error(Errc::DmaOutOfBounds, "read of " + std::to_string(len) + " bytes at " +
                                          std::to_string(addr));
  std::memcpy(dst, bytes_.data() + (addr - base_), len);
}

void SimDram::write_f32(uint64_t addr, const std::vector<float>& v) {
  write(addr, v.data(), v.size() * 4);
}

std::vector<float> SimDram::read_f32(uint64_t addr, size_t count) const {
  std::vector<float> out(count);
  read(addr, out.data(), count * 4);
  return out;
}

std::vector<uint8_t> SimDram::snapshot() const {
  std::vector<uint8_t> out(16 + bytes_.size());
  uint64_t size = bytes_.size();
  std::memcpy(out.data(), &base_, 8);
  std::memcpy(out.data() + 8, &size, 8);
  std::memcpy(out.data() + 16, bytes_.data(), bytes_.size());
  return out;
}

SimDram SimDram::from_snapshot(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 16) throw Error(Errc::ParseError, "dram snapshot truncated");
  uint64_t base = 0, size = 0;
  std::memcpy(&base, bytes.data(), 8);
  std::memcpy(&size, bytes.data() + 8, 8);
  if (bytes.size() != 16 + size)
    throw Error(Errc::ParseError, "dram snapshot size field mismatch");
  SimDram d(base, size);
  std::memcpy(d.bytes_.data(), bytes.data() + 16, size);
  return d;
}

// ---- AccelDevice ----

AccelDevice::AccelDevice(Graph g, SimDram* dram) : graph_(std::move(g)), dram_(dram) {
  order_ = topological_order(graph_);
  for (const auto& in : graph_.inputs) input_elems_ += in.shape.elems();
  auto shapes = infer_shapes(graph_);
  for (NodeId id : graph_.outputs) output_elems_ += shapes.at(id).elems();
}

uint64_t AccelDevice::input_addr() const {
  return (static_cast<uint64_t>(addr_regs_[1]) << 32) | addr_regs_[0];
}

uint64_t AccelDevice::output_addr() const {
  return (static_cast<uint64_t>(addr_regs_[3]) << 32) | addr_regs_[2];
}

void AccelDevice::mmio_write(uint32_t offset, uint32_t value) {
  switch (offset) {
    case REG_CTRL:
      auto_restart_ = (value & CTRL_AUTO_RESTART) != 0;
      if ((value & CTRL_START) && state_ == DeviceState::Idle) start();
      break;  // START while Running/DoneLatched is ignored
    case REG_GIER:
      gier_ = value;
      break;
    case REG_IP_IER:
      ip_ier_ = value;
      break;
    case REG_IP_ISR:
      ip_isr_ &= ~value;  // write-1-to-clear
      break;
    case REG_INPUT_ADDR_LO:
    case REG_INPUT_ADDR_HI:
    case REG_OUTPUT_ADDR_LO:
    case REG_OUTPUT_ADDR_HI:
      addr_regs_[(offset - REG_INPUT_ADDR_LO) / 4] = value;
      break;
    default:
      unmapped_.push_back(offset);  // ignored
  }
}

uint32_t AccelDevice::mmio_read(uint32_t offset) {
  switch (offset) {
    case REG_CTRL: {
      uint32_t bits = 0;
      if (state_ != DeviceState::Running) bits |= CTRL_IDLE;
      if (done_latch_) bits |= CTRL_DONE;
      if (auto_restart_) bits |= CTRL_AUTO_RESTART;
      done_latch_ = false;  // DONE is clear-on-read
      if (state_ == DeviceState::DoneLatched) state_ = DeviceState::Idle;
      return bits;
    }
    case REG_GIER:
      return gier_;
    case REG_IP_IER:
      return ip_ier_;
    case REG_IP_ISR:
      return ip_isr_;
    case REG_INPUT_ADDR_LO:
    case REG_INPUT_ADDR_HI:
    case REG_OUTPUT_ADDR_LO:
    case REG_OUTPUT_ADDR_HI:
      return addr_regs_[(offset - REG_INPUT_ADDR_LO) / 4];
    default:
      unmapped_.push_back(offset);
      return 0;
  }
}

void AccelDevice::start() {
  state_ = DeviceState::Running;
  stage_ = 0;
  error_flag_ = false;
  last_error_.clear();
  staged_inputs_.clear();
  values_.clear();
}

void AccelDevice::complete() {
  done_latch_ = true;
  if (ip_ier_ & 1u) ip_isr_ |= 1u;
  ++completions_;
  stage_ = 0;
  staged_inputs_.clear();
  values_.clear();
  state_ = auto_restart_ ? DeviceState::Running : DeviceState::DoneLatched;
}

void AccelDevice::fail(const std::string& what) {
  error_flag_ = true;
  last_error_ = what;
  state_ = DeviceState::Idle;
  stage_ = 0;
  staged_inputs_.clear();
  values_.clear();
}

DeviceState AccelDevice::step(int max_stages) {
  int executed = 0;
  while (state_ == DeviceState::Running && (max_stages < 0 || executed < max_stages)) {
    try {
      if (stage_ == 0) {
        // DMA fetch: concatenated LE fp32, graph-input declaration order
        std::vector<float> flat = dram_->read_f32(input_addr(), static_cast<size_t>(input_elems_));
        size_t off = 0;
        for (size_t k = 0; k < graph_.inputs.size(); ++k) {
          const GraphInput& gi = graph_.inputs[k];
          size_t n = static_cast<size_t>(gi.shape.elems());
          Tensor t = Tensor::from(
              gi.shape, std::vector<float>(flat.begin() + off, flat.begin() + off + n));
          off += n;
          staged_inputs_[gi.name] = t;
          values_[graph_input_value(static_cast<int>(k))] = std::move(t);
        }
        ++stage_;
      } else if (stage_ <= order_.size()) {
        const Node* n = graph_.find_node(order_[stage_ - 1]);
        values_[n->id] = detail::execute_node(graph_, *n, values_, nullptr);
        ++stage_;
      } else {
        std::vector<float> flat;
        for (NodeId id : graph_.outputs) {
          const Tensor& t = values_.at(id);
          flat.insert(flat.end(), t.f.begin(), t.f.end());
        }
        dram_->write_f32(output_addr(), flat);  // bounds-checked before any byte lands
        complete();
        if (max_stages < 0) {
          ++executed;
          break;  // one full inference per run-to-completion call
        }
      }
    } catch (const Error& e) {
      fail(e.what());
      break;
    }
    ++executed;
  }
  return state_;
}

// ---- HostDriver ----

uint64_t HostDriver::load_ip_input(const std::map<std::string, Tensor>& inputs) {
  std::vector<float> flat;
  for (const auto& gi : dev->graph().inputs) {
    auto it = inputs.find(gi.name);
    if (it == inputs.end()) throw Error(Errc::MissingInput, gi.name);
    if (it->second.shape != gi.shape)
      throw Error(Errc::ShapeMismatch, "input '" + gi.name + "': expected " + gi.shape.str() +
                                           ", got " + it->second.shape.str());
    flat.insert(flat.end(), it->second.f.begin(), it->second.f.end());
  }
  dram->write_f32(dram->base(), flat);
  return dram->base();
}

void HostDriver::start_ip(uint64_t input_addr, uint64_t output_addr, bool auto_restart) {
  dev->mmio_write(REG_INPUT_ADDR_LO, static_cast<uint32_t>(input_addr));
  dev->mmio_write(REG_INPUT_ADDR_HI, static_cast<uint32_t>(input_addr >> 32));
  dev->mmio_write(REG_OUTPUT_ADDR_LO, static_cast<uint32_t>(output_addr));
  dev->mmio_write(REG_OUTPUT_ADDR_HI, static_cast<uint32_t>(output_addr >> 32));
  dev->mmio_write(REG_CTRL, CTRL_START | (auto_restart ? CTRL_AUTO_RESTART : 0u));
}

std::vector<Tensor> HostDriver::read_ip_output(uint64_t output_addr) {
  std::vector<float> flat =
      dram->read_f32(output_addr, static_cast<size_t>(dev->output_elems()));
  auto shapes = infer_shapes(dev->graph());
  std::vector<Tensor> outs;
  size_t off = 0;
  for (NodeId id : dev->graph().outputs) {
    const Shape& s = shapes.at(id);
    size_t n = static_cast<size_t>(s.elems());
    outs.push_back(
        Tensor::from(s, std::vector<float>(flat.begin() + off, flat.begin() + off + n)));
    off += n;
  }
  return outs;
}

std::vector<Tensor> HostDriver::host_infer(const std::map<std::string, Tensor>& inputs) {
  if (dev->state() != DeviceState::Idle)
    throw Error(Errc::RejectedBusy, "device is not idle");
  uint64_t in_addr = load_ip_input(inputs);
  uint64_t in_bytes = static_cast<uint64_t>(dev->input_elems()) * 4;
  uint64_t out_addr = dram->base() + ((in_bytes + 63) & ~uint64_t{63});
  start_ip(in_addr, out_addr);
  for (uint64_t i = 0; i < poll_budget; ++i) {
    dev->step(1);
    if (dev->error_flag()) throw Error(Errc::DmaOutOfBounds, dev->last_error());
    uint32_t ctrl = dev->mmio_read(REG_CTRL);
    if (ctrl & CTRL_DONE) return read_ip_output(out_addr);
  }
  throw Error(Errc::Timeout, "no DONE within poll budget");
}

}  // namespace oninfer
