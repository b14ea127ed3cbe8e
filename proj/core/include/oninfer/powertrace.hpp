#pragma once

#include <string>
#include <vector>

namespace oninfer {

struct PowerSample {
  double t_s = 0.0;
  double watts = 0.0;
  std::string phase;  // may be empty
};

struct PhaseSpan {
  std::string label;
  double t_start = 0.0;
  double t_end = 0.0;
};

struct PowerTrace {
  std::vector<PowerSample> samples;  // timestamps strictly increasing
  std::vector<PhaseSpan> phases;     // non-overlapping, within the sample span
};

// CSV: header "t_s,watts,phase" (phase column optional), UTF-8, LF endings.
// Malformed rows and non-monotone timestamps raise ParseError naming the line.
// Phases derive from runs of equal non-empty labels: a phase starts at its first
// sample and ends where the next labeled run starts (the last one ends at the
// final sample). Unlabeled samples extend the phase in progress; unlabeled
// leading samples belong to no phase.
PowerTrace parse_power_trace(const std::string& csv);

// Trapezoidal integral over the whole trace.
double total_energy(const PowerTrace& trace);

struct PhaseStats {
  std::string label;
  double t_start = 0.0, t_end = 0.0;
  double mean_w = 0.0;    // energy / duration (time-weighted)
  double energy_j = 0.0;  // trapezoidal integral over the span
  double peak_w = 0.0;    // max sample within the closed span
};

struct PhaseReport {
  std::vector<PhaseStats> phases;
  std::string peak_phase;   // phase holding the maximum power sample
  double total_energy_j = 0.0;
};

PhaseReport phase_energy(const PowerTrace& trace);

}  // namespace oninfer
