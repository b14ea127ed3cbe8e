#include "oninfer/powertrace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "oninfer/errors.hpp"

namespace oninfer {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_num(const std::string& s, int line_no, const char* what) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": bad " + what + " '" +
                                      s + "'");
  }
}

}  // namespace

PowerTrace parse_power_trace(const std::string& csv) {
  PowerTrace trace;
  std::istringstream in(csv);
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  bool has_phase_col = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (!saw_header) {
      if (t == "t_s,watts,phase") {
        has_phase_col = true;
      } else if (t == "t_s,watts") {
        has_phase_col = false;
      } else {
        throw Error(Errc::ParseError,
                    "line " + std::to_string(line_no) + ": expected 't_s,watts[,phase]' header");
      }
      saw_header = true;
      continue;
    }
    std::vector<std::string> cols = split(t);
    size_t expect = has_phase_col ? 3 : 2;
    if (cols.size() != expect)
      throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(expect) + " columns, got " +
                                        std::to_string(cols.size()));
    PowerSample s;
    s.t_s = parse_num(cols[0], line_no, "timestamp");
    s.watts = parse_num(cols[1], line_no, "power");
    if (has_phase_col) s.phase = cols[2];
    if (!trace.samples.empty() && s.t_s <= trace.samples.back().t_s)
      throw Error(Errc::ParseError,
                  "line " + std::to_string(line_no) + ": timestamps must be strictly increasing");
    trace.samples.push_back(std::move(s));
  }
  if (!saw_header) throw Error(Errc::ParseError, "empty trace");

  // phase spans: runs of equal non-empty labels; unlabeled samples extend the run
  std::string cur_label;
  double cur_start = 0.0;
  for (const PowerSample& s : trace.samples) {
    if (s.phase.empty()) continue;
    if (cur_label.empty()) {
      cur_label = s.phase;
      cur_start = s.t_s;
    } else if (s.phase != cur_label) {
      trace.phases.push_back({cur_label, cur_start, s.t_s});
      cur_label = s.phase;
      cur_start = s.t_s;
    }
  }
  if (!cur_label.empty())
    trace.phases.push_back({cur_label, cur_start, trace.samples.back().t_s});
  return trace;
}

double total_energy(const PowerTrace& trace) {
  double e = 0.0;
  for (size_t i = 1; i < trace.samples.size(); ++i) {
    const PowerSample& a = trace.samples[i - 1];
    const PowerSample& b = trace.samples[i];
    e += (b.t_s - a.t_s) * (a.watts + b.watts) * 0.5;
  }
  return e;
}

PhaseReport phase_energy(const PowerTrace& trace) {
  PhaseReport rep;
  rep.total_energy_j = total_energy(trace);
  double best_peak = -std::numeric_limits<double>::infinity();
  for (const PhaseSpan& span : trace.phases) {
    PhaseStats st;
    st.label = span.label;
    st.t_start = span.t_start;
    st.t_end = span.t_end;
    st.peak_w = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < trace.samples.size(); ++i) {
      const PowerSample& s = trace.samples[i];
      if (s.t_s >= span.t_start && s.t_s <= span.t_end)
        st.peak_w = std::max(st.peak_w, s.watts);
      if (i > 0) {
        const PowerSample& a = trace.samples[i - 1];
        if (a.t_s >= span.t_start && s.t_s <= span.t_end)
          st.energy_j += (s.t_s - a.t_s) * (a.watts + s.watts) * 0.5;
      }
    }
    double dur = span.t_end - span.t_start;
    st.mean_w = dur > 0.0 ? st.energy_j / dur : st.peak_w;
    if (st.peak_w > best_peak) {
      best_peak = st.peak_w;
      rep.peak_phase = st.label;
    }
    rep.phases.push_back(std::move(st));
  }
  return rep;
}

}  // namespace oninfer
