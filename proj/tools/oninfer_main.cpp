// oninfer: inference, quantization, deployment planning, and reporting CLI.
#include <chrono>
#include <cstdint>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "oninfer/devsim.hpp"
#include "oninfer/interpret.hpp"
#include "oninfer/model_io.hpp"
#include "oninfer/opcount.hpp"
#include "oninfer/plan.hpp"
#include "oninfer/powertrace.hpp"
#include "oninfer/quantize.hpp"
#include "oninfer/rng.hpp"
#include "oninfer/zoo.hpp"

using nlohmann::json;
using namespace oninfer;

namespace {

struct CommonOpts {
  std::string model_path;
  std::string zoo_id;
  std::string weights_path;
  std::string backend = "fp32";
  int inputs = -1;  // -1 = per-command default
  uint64_t seed = 0;
  std::string device_path;
  std::string reference_path;
  std::string out_path;
  std::string format;  // "" = per-command default
};

void add_model_opts(CLI::App* sub, CommonOpts& o) {
  sub->add_option("--model", o.model_path, "model JSON path");
  sub->add_option("--zoo", o.zoo_id, "built-in model id (e.g. vae_encoder)");
  sub->add_option("--weights", o.weights_path, "weight blob path");
  sub->add_option("--seed", o.seed, "RNG seed (0 = per-model default)");
}

ModelFile resolve_model(const CommonOpts& o) {
  if (!o.model_path.empty() && !o.zoo_id.empty())
    throw Error(Errc::InvalidArgument, "--model and --zoo are mutually exclusive");
  if (!o.model_path.empty()) return load_model(o.model_path, o.weights_path);
  if (!o.zoo_id.empty()) {
    ZooModelId id;
    if (!zoo_id_from_string(o.zoo_id, id)) {
      std::string known;
      for (ZooModelId z : all_zoo_ids()) known += std::string(" ") + zoo_id_name(z);
      throw Error(Errc::InvalidArgument, "unknown zoo id '" + o.zoo_id + "'; known:" + known);
    }
    ModelFile m = build_zoo_model(id, WeightInit::SeededUniform, o.seed);
    if (!o.weights_path.empty()) load_weight_blob(read_file_bytes(o.weights_path), m.graph);
    return m;
  }
  throw Error(Errc::InvalidArgument, "need --model PATH or --zoo ID");
}

std::vector<std::map<std::string, Tensor>> gen_inputs(const Graph& g, int n, uint64_t seed) {
  Rng rng(seed == 0 ? 1 : seed);
  std::vector<std::map<std::string, Tensor>> sets;
  sets.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::map<std::string, Tensor> set;
    for (const auto& gi : g.inputs) {
      Tensor t = Tensor::zeros(gi.shape);
      for (auto& v : t.f) v = rng.uniform(0.0f, 1.0f);
      set[gi.name] = std::move(t);
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

json tensor_json(const Tensor& t) {
  json j;
  j["shape"] = t.shape.dims;
  j["data"] = t.f;
  return j;
}

void emit(const CommonOpts& o, const std::string& text) {
  if (o.out_path.empty())
    std::cout << text;
  else
    write_file(o.out_path, text);
}

DeviceModel resolve_device(const CommonOpts& o) {
  return o.device_path.empty() ? DeviceModel::zcu104() : load_device_model(o.device_path);
}

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---- run ----

int cmd_run(const CommonOpts& o, bool instrument) {
  ModelFile m = resolve_model(o);
  int n = o.inputs < 0 ? 1 : o.inputs;
  auto sets = gen_inputs(m.graph, n, o.seed == 0 ? 42 : o.seed);

  json out;
  out["model"] = m.name;
  out["backend"] = o.backend;
  json runs = json::array();
  uint64_t total_ops = 0;

  if (o.backend == "fp32") {
    for (const auto& set : sets) {
      RunResult res = run_graph(m.graph, set, instrument);
      json r;
      json outs = json::array();
      for (const Tensor& t : res.outputs) outs.push_back(tensor_json(t));
      r["outputs"] = outs;
      if (instrument && res.trace) {
        total_ops += res.trace->total_ops;
        json nodes = json::array();
        for (const NodeTrace& nt : res.trace->nodes) {
          json nj;
          nj["id"] = nt.id;
          nj["kind"] = kind_name(m.graph.find_node(nt.id)->spec.kind);
          nj["ops"] = nt.ops;
          nj["seconds"] = nt.seconds;
          nodes.push_back(nj);
        }
        r["nodes"] = nodes;
      }
      runs.push_back(std::move(r));
    }
  } else if (o.backend == "int8") {
    QuantizedGraph q;
    if (m.meta.quantization) {
      q = quantized_from_model(m);
    } else {
      CalibrationStats stats = calibrate(m.graph, sets);
      q = quantize_graph(m.graph, stats);
    }
    for (const auto& set : sets) {
      json r;
      json outs = json::array();
      for (const Tensor& t : run_quantized(q, set)) outs.push_back(tensor_json(t));
      r["outputs"] = outs;
      runs.push_back(std::move(r));
    }
  } else {
    throw Error(Errc::UnsupportedBackend, "'" + o.backend + "' (use fp32 or int8)");
  }
  out["runs"] = runs;
  if (instrument) out["total_ops"] = total_ops;
  emit(o, out.dump(2) + "\n");
  return 0;
}

// ---- validate ----

int cmd_validate(const CommonOpts& o) {
  ModelFile m;
  if (!o.model_path.empty()) {
    m = parse_model_text(read_file(o.model_path));
  } else {
    m = resolve_model(o);
  }
  ValidationReport rep = validate_graph(m.graph);
  if (!rep.ok()) {
    std::cout << rep.str();
    std::cout << "invalid: " << rep.violations.size() << " violation(s)\n";
    return 1;
  }
  if (!o.weights_path.empty() && !o.model_path.empty())
    load_weight_blob(read_file_bytes(o.weights_path), m.graph);  // throws on mismatch
  auto shapes = infer_shapes(m.graph);
  std::cout << "ok: " << m.graph.nodes.size() << " node(s), outputs:";
  for (NodeId id : m.graph.outputs) std::cout << " " << shapes.at(id).str();
  std::cout << "\n";
  return 0;
}

// ---- quantize ----

int cmd_quantize(const CommonOpts& o) {
  ModelFile m = resolve_model(o);
  int n = o.inputs < 0 ? 8 : o.inputs;
  auto sets = gen_inputs(m.graph, n, o.seed == 0 ? 42 : o.seed);
  CalibrationStats stats = calibrate(m.graph, sets);
  QuantizedGraph q = quantize_graph(m.graph, stats);
  QuantErrorReport err = quant_error_report(m.graph, q, sets);

  ModelFile qm = quantized_to_model(q, m);
  qm.name = m.name + "_int8";
  std::string out_model = o.out_path.empty() ? m.name + "_int8.model" : o.out_path;
  std::string out_weights;
  size_t dot = out_model.find_last_of('.');
  out_weights = (dot == std::string::npos ? out_model : out_model.substr(0, dot)) + ".weights";
  write_file(out_model, serialize_model_text(qm));
  write_file_bytes(out_weights, serialize_weight_blob(qm.graph));

  json j;
  j["model"] = out_model;
  j["weights"] = out_weights;
  j["calibration_samples"] = n;
  j["max_abs_error"] = err.max_abs_error;
  j["mean_square_error"] = err.mean_square_error;
  j["top1_agreement"] = err.top1_agreement;
  std::cout << j.dump(2) << "\n";
  return 0;
}

// ---- count ----

int cmd_count(const CommonOpts& o) {
  ModelFile m = resolve_model(o);
  int64_t params = count_parameters(m.graph);
  OpCountConvention conv;
  auto by_node = count_operations_by_node(m.graph, conv);
  int64_t ops = count_operations(m.graph, conv);

  std::string fmt = o.format.empty() ? "json" : o.format;
  if (fmt == "csv") {
    std::ostringstream ss;
    ss << "model,params,ops\n" << m.name << "," << params << "," << ops << "\n";
    emit(o, ss.str());
  } else if (fmt == "md") {
    std::ostringstream ss;
    ss << "| model | params | ops |\n|---|---|---|\n";
    ss << "| " << m.name << " | " << params << " | " << ops << " |\n";
    emit(o, ss.str());
  } else {
    json j;
    j["model"] = m.name;
    j["params"] = params;
    j["ops"] = ops;
    if (m.meta.reference_params >= 0) j["ref_params"] = m.meta.reference_params;
    if (m.meta.reference_ops >= 0) j["ref_ops"] = m.meta.reference_ops;
    json nodes = json::array();
    for (const auto& [id, n_ops] : by_node) {
      json nj;
      nj["id"] = id;
      nj["kind"] = kind_name(m.graph.find_node(id)->spec.kind);
      nj["ops"] = n_ops;
      nodes.push_back(nj);
    }
    j["per_node"] = nodes;
    emit(o, j.dump(2) + "\n");
  }
  return 0;
}

// ---- plan ----

int cmd_plan(const CommonOpts& o) {
  ModelFile m = resolve_model(o);
  DeviceModel dev = resolve_device(o);
  DType precision;
  BackendProfile profile;
  if (o.backend == "fp32") {
    precision = DType::Fp32;
    profile = BackendProfile::hls_like();
  } else if (o.backend == "int8") {
    precision = DType::Int8;
    profile = BackendProfile::dpu_like();
  } else {
    throw Error(Errc::UnsupportedBackend, "'" + o.backend + "' (use fp32 or int8)");
  }
  DeploymentPlan plan = place_weights(m.graph, precision, dev);

  json j;
  j["model"] = m.name;
  j["device"] = dev.name;
  j["backend"] = profile.name;
  j["precision"] = precision == DType::Int8 ? "int8" : "fp32";
  j["weight_bytes"] = plan.weight_bytes;
  j["buffer_bytes"] = plan.buffer_bytes;
  j["onchip_bytes"] = plan.onchip_bytes;
  j["est_bram36"] = plan.est_bram36;
  j["placement"] = plan.weights == Placement::OnChip ? "on-chip" : "external-dram";
  j["supported"] = plan.supported;
  json uns = json::array();
  for (LayerKind k : plan.unsupported) uns.push_back(kind_name(k));
  j["unsupported"] = uns;
  emit(o, j.dump(2) + "\n");
  return 0;
}

// ---- bench ----

struct BenchOpts {
  double p_mpsoc = 0.0;
  double p_board = 0.0;
  double fps_override = 0.0;
  double baseline_fps = 0.0;
  std::string trace_path;
};

int cmd_bench(const CommonOpts& o, const BenchOpts& b) {
  ModelFile m = resolve_model(o);
  int n = o.inputs;
  if (n < 0) {
    if (m.name == "multi_esperta")
      n = 1000000;
    else if (m.name == "baseline_net")
      n = 10;
    else
      n = 1000;
  }

  // inputs are staged up front; the timed region is inference only
  auto sets = gen_inputs(m.graph, std::min(n, 64), o.seed == 0 ? 42 : o.seed);
  double seconds = 0.0;
  if (b.fps_override <= 0.0) {
    if (o.backend != "fp32")
      throw Error(Errc::UnsupportedBackend, "bench times the fp32 interpreter");
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < n; ++i) run_graph(m.graph, sets[static_cast<size_t>(i) % sets.size()]);
    auto t1 = std::chrono::steady_clock::now();
    seconds = std::chrono::duration<double>(t1 - t0).count();
  }
  double fps = b.fps_override > 0.0 ? b.fps_override
                                    : (seconds > 0.0 ? n / seconds : 0.0);

  BenchRecord rec;
  rec.fps = fps;
  rec.p_board_w = b.p_board;
  rec.p_mpsoc_w = b.p_mpsoc;
  rec.op_count = count_operations(m.graph);

  json j;
  j["model"] = m.name;
  j["runs"] = n;
  j["seconds"] = seconds;
  j["fps"] = fps;
  j["ops_per_inference"] = rec.op_count;
  if (fps > 0.0) {
    BenchRecord base;
    base.fps = b.baseline_fps;
    DerivedMetrics dm = derive_metrics(rec, b.baseline_fps > 0.0 ? &base : nullptr);
    j["throughput_mops"] = dm.throughput_mops;
    if (b.p_mpsoc > 0.0) {
      j["p_mpsoc_w"] = b.p_mpsoc;
      j["energy_j"] = dm.energy_j;
      j["energy_mj"] = dm.energy_j * 1e3;
    }
    if (b.p_board > 0.0) j["p_board_w"] = b.p_board;
    if (dm.speedup) j["speedup"] = *dm.speedup;
  }
  if (!b.trace_path.empty()) {
    PowerTrace tr = parse_power_trace(read_file(b.trace_path));
    PhaseReport rep = phase_energy(tr);
    json t;
    t["total_energy_j"] = rep.total_energy_j;
    t["peak_phase"] = rep.peak_phase;
    j["trace"] = t;
  }
  emit(o, j.dump(2) + "\n");
  return 0;
}

// ---- report ----

int cmd_report(const CommonOpts& o) {
  if (o.reference_path.empty())
    throw Error(Errc::ReferenceFileMissing, "need --reference PATH");
  std::vector<ReferenceRow> ref = load_reference_csv(o.reference_path);

  std::vector<std::pair<std::string, std::pair<int64_t, int64_t>>> ours;
  for (ZooModelId id : all_zoo_ids()) {
    ModelFile m = build_zoo_model(id, WeightInit::Zeros);
    ours.push_back({m.name, {count_parameters(m.graph), count_operations(m.graph)}});
  }
  TableReport rep = build_table_report(ours, ref);

  std::string fmt = o.format.empty() ? "md" : o.format;
  std::ostringstream ss;
  if (fmt == "json") {
    json j;
    json counts = json::array();
    for (const CountsRow& r : rep.counts) {
      json c;
      c["model"] = r.model;
      c["params"] = r.params;
      c["ref_params"] = r.ref_params;
      c["params_dev"] = r.params_dev;
      c["ops"] = r.ops;
      c["ref_ops"] = r.ref_ops;
      c["ops_dev"] = r.ops_dev;
      counts.push_back(c);
    }
    j["counts"] = counts;
    json metrics = json::array();
    for (const MetricsRow& r : rep.metrics) {
      json mrow;
      mrow["model"] = r.model;
      mrow["platform"] = r.platform;
      mrow["fps"] = r.fps;
      mrow["energy_mj"] = r.energy_mj;
      mrow["ref_energy_mj"] = r.ref_energy_mj;
      mrow["energy_dev"] = r.energy_dev;
      mrow["throughput_mops"] = r.throughput_mops;
      mrow["ref_throughput_mops"] = r.ref_throughput_mops;
      mrow["throughput_dev"] = r.throughput_dev;
      mrow["throughput_flagged"] = r.throughput_flagged;
      if (r.speedup) mrow["speedup"] = *r.speedup;
      if (r.ref_speedup) mrow["ref_speedup"] = *r.ref_speedup;
      mrow["speedup_dev"] = r.speedup_dev;
      metrics.push_back(mrow);
    }
    j["metrics"] = metrics;
    j["violations"] = rep.violations;
    j["within_tolerances"] = rep.within_tolerances;
    ss << j.dump(2) << "\n";
  } else if (fmt == "csv") {
    ss << "model,params,ref_params,ops,ref_ops\n";
    for (const CountsRow& r : rep.counts)
      ss << r.model << "," << r.params << "," << r.ref_params << "," << r.ops << ","
         << r.ref_ops << "\n";
    ss << "\nmodel,platform,energy_mj,ref_energy_mj,throughput_mops,ref_throughput_mops,"
          "speedup,ref_speedup\n";
    for (const MetricsRow& r : rep.metrics) {
      ss << r.model << "," << r.platform << "," << fmt_g(r.energy_mj) << ","
         << fmt_g(r.ref_energy_mj) << "," << fmt_g(r.throughput_mops) << ","
         << fmt_g(r.ref_throughput_mops) << "," << (r.speedup ? fmt_g(*r.speedup) : "") << ","
         << (r.ref_speedup ? fmt_g(*r.ref_speedup) : "") << "\n";
    }
  } else {
    ss << "## Parameter / operation counts\n\n";
    ss << "| model | params | ref | dev % | ops | ref | dev % |\n";
    ss << "|---|---:|---:|---:|---:|---:|---:|\n";
    for (const CountsRow& r : rep.counts)
      ss << "| " << r.model << " | " << r.params << " | " << r.ref_params << " | "
         << fmt_g(r.params_dev * 100) << " | " << r.ops << " | " << r.ref_ops << " | "
         << fmt_g(r.ops_dev * 100) << " |\n";
    ss << "\n## Energy / throughput / speedup\n\n";
    ss << "| model | platform | energy mJ | ref | dev % | MOP/s | ref | dev % | speedup | ref "
          "| dev % |\n";
    ss << "|---|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n";
    for (const MetricsRow& r : rep.metrics) {
      ss << "| " << r.model << " | " << r.platform << " | " << fmt_g(r.energy_mj) << " | "
         << fmt_g(r.ref_energy_mj) << " | " << fmt_g(r.energy_dev * 100) << " | "
         << fmt_g(r.throughput_mops) << (r.throughput_flagged ? "*" : "") << " | "
         << fmt_g(r.ref_throughput_mops) << " | " << fmt_g(r.throughput_dev * 100) << " | "
         << (r.speedup ? fmt_g(*r.speedup) : "-") << " | "
         << (r.ref_speedup ? fmt_g(*r.ref_speedup) : "-") << " | "
         << fmt_g(r.speedup_dev * 100) << " |\n";
    }
    if (!rep.violations.empty()) {
      ss << "\n### Tolerance violations\n\n";
      for (const std::string& v : rep.violations) ss << "- " << v << "\n";
    }
    ss << "\nwithin tolerances: " << (rep.within_tolerances ? "yes" : "no") << "\n";
  }
  emit(o, ss.str());
  return rep.within_tolerances ? 0 : 1;
}

// ---- trace ----

int cmd_trace(const CommonOpts& o, const std::string& trace_path) {
  PowerTrace tr = parse_power_trace(read_file(trace_path));
  PhaseReport rep = phase_energy(tr);

  std::string fmt = o.format.empty() ? "json" : o.format;
  std::ostringstream ss;
  if (fmt == "csv") {
    ss << "phase,t_start,t_end,mean_w,energy_j,peak_w\n";
    for (const PhaseStats& p : rep.phases)
      ss << p.label << "," << fmt_g(p.t_start) << "," << fmt_g(p.t_end) << ","
         << fmt_g(p.mean_w) << "," << fmt_g(p.energy_j) << "," << fmt_g(p.peak_w) << "\n";
  } else if (fmt == "md") {
    ss << "| phase | start s | end s | mean W | energy J | peak W |\n";
    ss << "|---|---:|---:|---:|---:|---:|\n";
    for (const PhaseStats& p : rep.phases)
      ss << "| " << p.label << " | " << fmt_g(p.t_start) << " | " << fmt_g(p.t_end) << " | "
         << fmt_g(p.mean_w) << " | " << fmt_g(p.energy_j) << " | " << fmt_g(p.peak_w) << " |\n";
    ss << "\ntotal energy: " << fmt_g(rep.total_energy_j) << " J, peak phase: "
       << rep.peak_phase << "\n";
  } else {
    json j;
    j["total_energy_j"] = rep.total_energy_j;
    j["peak_phase"] = rep.peak_phase;
    json phases = json::array();
    for (const PhaseStats& p : rep.phases) {
      json pj;
      pj["phase"] = p.label;
      pj["t_start"] = p.t_start;
      pj["t_end"] = p.t_end;
      pj["mean_w"] = p.mean_w;
      pj["energy_j"] = p.energy_j;
      pj["peak_w"] = p.peak_w;
      phases.push_back(pj);
    }
    j["phases"] = phases;
    ss << j.dump(2) << "\n";
  }
  emit(o, ss.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural inference + FPGA deployment planning toolkit"};
  app.require_subcommand(1);

  CommonOpts o;
  BenchOpts b;
  bool instrument = false;
  std::string trace_path;
  int rc = 0;

  CLI::App* run = app.add_subcommand("run", "run inference");
  add_model_opts(run, o);
  run->add_option("--backend", o.backend, "fp32|int8");
  run->add_option("--inputs", o.inputs, "number of random input sets");
  run->add_option("--out", o.out_path, "write result here instead of stdout");
  run->add_flag("--instrument", instrument, "per-node op counts and timings");
  run->callback([&] { rc = cmd_run(o, instrument); });

  CLI::App* validate = app.add_subcommand("validate", "structural validation");
  add_model_opts(validate, o);
  validate->callback([&] { rc = cmd_validate(o); });

  CLI::App* quantize = app.add_subcommand("quantize", "post-training int8 quantization");
  add_model_opts(quantize, o);
  quantize->add_option("--inputs", o.inputs, "calibration sample count (default 8)");
  quantize->add_option("--out", o.out_path, "output model path");
  quantize->callback([&] { rc = cmd_quantize(o); });

  CLI::App* count = app.add_subcommand("count", "parameter and operation counts");
  add_model_opts(count, o);
  count->add_option("--format", o.format, "csv|md|json (default json)");
  count->add_option("--out", o.out_path, "write result here instead of stdout");
  count->callback([&] { rc = cmd_count(o); });

  CLI::App* plan = app.add_subcommand("plan", "device placement planning");
  add_model_opts(plan, o);
  plan->add_option("--backend,--precision", o.backend, "fp32|int8 (default fp32)");
  plan->add_option("--device", o.device_path, "device model JSON (default: zcu104)");
  plan->add_option("--out", o.out_path, "write result here instead of stdout");
  plan->callback([&] { rc = cmd_plan(o); });

  CLI::App* bench = app.add_subcommand("bench", "timed inference loop");
  add_model_opts(bench, o);
  bench->add_option("--backend", o.backend, "fp32");
  bench->add_option("--inputs", o.inputs, "inference count (default: per-model)");
  bench->add_option("--p-mpsoc", b.p_mpsoc, "MPSoC power draw in W (for energy)");
  bench->add_option("--p-board", b.p_board, "board power draw in W");
  bench->add_option("--fps", b.fps_override, "skip timing; derive metrics from this rate");
  bench->add_option("--baseline-fps", b.baseline_fps, "baseline rate (for speedup)");
  bench->add_option("--trace", b.trace_path, "power trace CSV to fold into the result");
  bench->add_option("--out", o.out_path, "write result here instead of stdout");
  bench->callback([&] { rc = cmd_bench(o, b); });

  CLI::App* report = app.add_subcommand("report", "compare against reference values");
  report->add_option("--reference", o.reference_path, "reference CSV path")->required();
  report->add_option("--format", o.format, "csv|md|json (default md)");
  report->add_option("--out", o.out_path, "write result here instead of stdout");
  report->callback([&] { rc = cmd_report(o); });

  CLI::App* trace = app.add_subcommand("trace", "power trace phase analysis");
  trace->add_option("file", trace_path, "power trace CSV")->required();
  trace->add_option("--format", o.format, "csv|md|json (default json)");
  trace->add_option("--out", o.out_path, "write result here instead of stdout");
  trace->callback([&] { rc = cmd_trace(o, trace_path); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return rc;
}
