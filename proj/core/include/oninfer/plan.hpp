#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "oninfer/graph.hpp"

namespace oninfer {

// ZCU104-class budgets; JSON-loadable so other parts can be described too.
struct DeviceModel {
  std::string name = "zcu104";
  int64_t lut = 230000;
  int64_t ff = 461000;
  int64_t dsp = 1728;
  int64_t bram36_blocks = 312;
  int64_t bram36_bytes = 4608;   // one 36Kb block
  int64_t uram_blocks = 96;
  int64_t uram_bytes = 36864;    // one 288Kb block
  double clock_hz = 100e6;       // metadata only; no cycle model

  int64_t bram_only_capacity() const { return bram36_blocks * bram36_bytes; }
  int64_t total_onchip_bytes() const {
    return bram36_blocks * bram36_bytes + uram_blocks * uram_bytes;
  }
  static DeviceModel zcu104() { return DeviceModel{}; }
};

DeviceModel load_device_model(const std::string& json_path);

struct BackendProfile {
  std::string name;                 // "dpu-like" | "hls-like"
  std::set<LayerKind> supported;
  DType precision = DType::Fp32;

  static BackendProfile dpu_like();  // int8; Conv2D, MaxPool2D, ReLU, Dense, Concat, Flatten
  static BackendProfile hls_like();  // fp32; every kind
};

struct SupportVerdict {
  bool supported = true;
  std::vector<LayerKind> unsupported;  // deduplicated, sorted by kind name
};

SupportVerdict check_backend_support(const Graph& g, const BackendProfile& b);

enum class Placement { OnChip, ExternalDram };

struct DeploymentPlan {
  Placement weights = Placement::OnChip;   // all-or-spill
  int64_t weight_bytes = 0;
  int64_t buffer_bytes = 0;                // two largest inter-layer tensor footprints
  int64_t onchip_bytes = 0;                // what the plan keeps on chip
  int64_t est_bram36 = 0;                  // ceil(onchip_bytes / bram36_bytes)
  bool supported = true;
  std::vector<LayerKind> unsupported;
};

// Weight residency policy: everything on chip if weights + the two largest
// inter-layer buffers fit the BRAM-only capacity, otherwise weights spill to DRAM
// wholesale (buffers stay on chip).
DeploymentPlan place_weights(const Graph& g, DType precision, const DeviceModel& d);

int64_t estimate_onchip_bytes(int64_t bram36, int64_t uram,
                              const DeviceModel& d = DeviceModel::zcu104());

struct BenchRecord {
  double fps = 0.0;
  double p_board_w = 0.0;
  double p_mpsoc_w = 0.0;
  int64_t op_count = 0;
};

struct DerivedMetrics {
  double energy_j = 0.0;        // p_mpsoc / fps
  double throughput_mops = 0.0; // op_count * fps / 1e6
  std::optional<double> speedup;
};

DerivedMetrics derive_metrics(const BenchRecord& r,
                              const BenchRecord* baseline = nullptr);

// ---- Reference values (CSV keyed by model,platform) ----

struct ReferenceRow {
  std::string model;
  std::string platform;  // cpu | vitis-ai | hls
  double fps = 0.0;
  double p_board_w = 0.0;
  double p_mpsoc_w = 0.0;
  double energy_mj = 0.0;
  double throughput_mops = 0.0;
  int64_t params = 0;
  int64_t ops = 0;
};

std::vector<ReferenceRow> load_reference_csv(const std::string& path);
const ReferenceRow* find_reference(const std::vector<ReferenceRow>& rows,
                                   const std::string& model, const std::string& platform);

// Published speedup figures keyed like the CSV (accelerated platforms only; CPU rows
// are the 1x baseline). Kept in code because the CSV schema has no speedup column.
std::optional<double> reference_speedup(const std::string& model, const std::string& platform);

// ---- Comparison tables (counts table + performance table) ----

struct CountsRow {
  std::string model;
  int64_t params = 0, ref_params = 0;
  int64_t ops = 0, ref_ops = 0;
  double params_dev = 0.0, ops_dev = 0.0;  // relative |ours-ref|/ref
};

struct MetricsRow {
  std::string model, platform;
  double fps = 0.0, p_mpsoc_w = 0.0;
  double energy_mj = 0.0, ref_energy_mj = 0.0, energy_dev = 0.0;
  double throughput_mops = 0.0, ref_throughput_mops = 0.0, throughput_dev = 0.0;
  bool throughput_flagged = false;  // known-inconsistent reference entry
  std::optional<double> speedup, ref_speedup;
  double speedup_dev = 0.0;
};

struct TableReport {
  std::vector<CountsRow> counts;
  std::vector<MetricsRow> metrics;
  // Tolerances used for the pass/fail verdict.
  double energy_tol = 0.05, throughput_tol = 0.05, speedup_tol = 0.02;
  bool within_tolerances = true;
  std::vector<std::string> violations;
};

// Builds both tables from computed per-model counts and the reference rows.
// `our_counts` maps model name -> (params, ops).
TableReport build_table_report(
    const std::vector<std::pair<std::string, std::pair<int64_t, int64_t>>>& our_counts,
    const std::vector<ReferenceRow>& reference);

}  // namespace oninfer
