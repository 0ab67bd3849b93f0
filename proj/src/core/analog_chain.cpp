#include "analog_chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "common.hpp"

namespace tdmsim {

void ChainParams::validate() const {
  dac.validate();
  gain.validate();
  require(r_on > 0.0 && c_hold > 0.0, ErrorKind::validation, "r_on and c_hold must be > 0");
  require(tau_hold > 0.0, ErrorKind::validation, "tau_hold must be > 0");
  require(std::isfinite(input_offset_low) && std::isfinite(input_offset_high),
          ErrorKind::validation, "input offsets must be finite");
  require(clip_high > clip_low, ErrorKind::validation, "clip_high must exceed clip_low");
  require(slew_rate > 0.0, ErrorKind::validation, "slew_rate must be > 0");
  if (lpf_cutoff) {
    require(std::isfinite(*lpf_cutoff) && *lpf_cutoff > 0.0, ErrorKind::validation,
            "lpf_cutoff must be > 0 when present");
  }
}

ChainParams ChainParams::ideal(const DacSpec& dac, const GainStage& gain) {
  ChainParams p;
  p.dac = dac;
  p.gain = gain;
  p.tau_hold = std::numeric_limits<double>::infinity();
  p.input_offset_low = dac.input_range_low;
  p.input_offset_high = dac.input_range_high;
  p.clip_low = -1e6;
  p.clip_high = 1e6;
  p.slew_rate = 1e18;
  p.lpf_cutoff.reset();
  return p;
}

const char* to_string(Node n) noexcept {
  switch (n) {
    case Node::dac_out: return "dac_out";
    case Node::cap: return "cap";
    case Node::amp_out: return "amp_out";
    case Node::filtered: return "filtered";
  }
  return "?";
}

Node parse_node(const std::string& s) {
  if (s == "dac_out") return Node::dac_out;
  if (s == "cap") return Node::cap;
  if (s == "amp_out") return Node::amp_out;
  if (s == "filtered") return Node::filtered;
  fail(ErrorKind::validation, "unknown trace node '" + s + "'");
}

void Trace::validate() const {
  require(std::isfinite(dt) && dt > 0.0, ErrorKind::validation, "trace dt must be > 0");
  require(std::isfinite(t0), ErrorKind::validation, "trace t0 must be finite");
  for (double v : samples) {
    require(std::isfinite(v), ErrorKind::validation, "trace samples must be finite");
  }
}

double dac_output(int code, const ChainParams& p) {
  require(code >= 0 && code <= p.dac.max_code(), ErrorKind::domain,
          "dac_output: code " + std::to_string(code) + " out of range");
  return p.input_offset_low + static_cast<double>(code) / p.dac.max_code() *
                                  (p.input_offset_high - p.input_offset_low);
}

double rc_charge(double v_cap, double v_drive, double dt, const ChainParams& p) {
  return v_drive + (v_cap - v_drive) * std::exp(-dt / p.charge_tau());
}

double hold_decay(double v_cap, double dt, const ChainParams& p) {
  return v_cap * std::exp(-dt / p.tau_hold);
}

double amplifier(double v_in, const GainStage& g) {
  // Same as gain * v_in - ratio * vref, but exact at v_in == vref.
  return v_in + g.ratio() * (v_in - g.vref);
}

double clip_slew(double v_target, double v_prev, double dt, const ChainParams& p) {
  const double clipped = std::clamp(v_target, p.clip_low, p.clip_high);
  const double max_step = p.slew_rate * dt;
  return std::clamp(clipped, v_prev - max_step, v_prev + max_step);
}

double lpf_step(double v_out_prev, double v_in, double dt, double cutoff) {
  const double tau = 1.0 / (constants::two_pi * cutoff);
  return v_in + (v_out_prev - v_in) * std::exp(-dt / tau);
}

std::size_t substeps_per_slot(double frame_period, double sim_dt) {
  require(sim_dt > 0.0, ErrorKind::validation, "sim_dt must be > 0");
  require(sim_dt <= frame_period / 10.0 * (1.0 + 1e-9), ErrorKind::validation,
          "sim_dt must be <= frame_period / 10");
  return static_cast<std::size_t>(std::ceil(frame_period / sim_dt - 1e-9));
}

std::vector<Trace> simulate(const TdmSchedule& schedule, const ChainParams& p,
                            const SimulationOptions& options) {
  schedule.validate();
  p.validate();
  require(schedule.bits == p.dac.bits, ErrorKind::validation,
          "schedule bit depth does not match chain DAC");
  require(options.duration > 0.0 && std::isfinite(options.duration), ErrorKind::validation,
          "simulation duration must be > 0");
  require(options.record_stride >= 1, ErrorKind::validation, "record_stride must be >= 1");

  const double requested_dt =
      options.sim_dt > 0.0 ? options.sim_dt : schedule.frame_period / 100.0;
  const std::size_t substeps = substeps_per_slot(schedule.frame_period, requested_dt);
  const double h = schedule.frame_period / static_cast<double>(substeps);
  const auto steps = static_cast<std::size_t>(std::ceil(options.duration / h - 1e-9));
  const std::size_t stride = options.record_stride;
  const std::size_t n_records = steps / stride + 1;

  const auto n = static_cast<std::size_t>(schedule.n_channels);
  const bool has_lpf = p.lpf_cutoff.has_value();

  // Per-step factors; identical to what rc_charge/hold_decay/lpf_step compute.
  const double charge_keep = std::exp(-h / p.charge_tau());
  const double hold_keep = std::exp(-h / p.tau_hold);
  const double lpf_keep =
      has_lpf ? std::exp(-h / (1.0 / (constants::two_pi * *p.lpf_cutoff))) : 0.0;

  std::vector<double> drive(schedule.entries.size());
  for (std::size_t k = 0; k < drive.size(); ++k) {
    drive[k] = dac_output(schedule.entries[k].code, p);
  }

  std::vector<double> cap(n, 0.0), amp(n), filt(n);
  if (options.start_settled) {
    for (std::size_t c = 0; c < n; ++c) cap[c] = drive[c];
  }
  for (std::size_t c = 0; c < n; ++c) {
    amp[c] = std::clamp(amplifier(cap[c], p.gain), p.clip_low, p.clip_high);
    filt[c] = amp[c];
  }

  auto make = [&](Node node, int channel) {
    Trace t;
    t.node = node;
    t.channel = channel;
    t.t0 = 0.0;
    t.dt = h * static_cast<double>(stride);
    t.samples.reserve(n_records);
    return t;
  };
  std::vector<Trace> traces;
  Trace* dac_trace = nullptr;
  std::vector<Trace*> cap_tr(n, nullptr), amp_tr(n, nullptr), filt_tr(n, nullptr);
  traces.reserve(1 + 3 * n);
  if (options.nodes.dac_out) traces.push_back(make(Node::dac_out, -1));
  for (std::size_t c = 0; c < n; ++c) {
    const int ch = static_cast<int>(c);
    if (options.nodes.cap) traces.push_back(make(Node::cap, ch));
    if (options.nodes.amp_out) traces.push_back(make(Node::amp_out, ch));
    if (options.nodes.filtered && has_lpf) traces.push_back(make(Node::filtered, ch));
  }
  // Pointers are taken only after the vector stops growing.
  {
    std::size_t i = 0;
    if (options.nodes.dac_out) dac_trace = &traces[i++];
    for (std::size_t c = 0; c < n; ++c) {
      if (options.nodes.cap) cap_tr[c] = &traces[i++];
      if (options.nodes.amp_out) amp_tr[c] = &traces[i++];
      if (options.nodes.filtered && has_lpf) filt_tr[c] = &traces[i++];
    }
  }

  const std::size_t n_entries = schedule.entries.size();
  auto record = [&](std::size_t step) {
    if (dac_trace) dac_trace->samples.push_back(drive[(step / substeps) % n_entries]);
    for (std::size_t c = 0; c < n; ++c) {
      if (cap_tr[c]) cap_tr[c]->samples.push_back(cap[c]);
      if (amp_tr[c]) amp_tr[c]->samples.push_back(amp[c]);
      if (filt_tr[c]) filt_tr[c]->samples.push_back(filt[c]);
    }
  };

  record(0);
  const double max_step = p.slew_rate * h;
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t k = (s / substeps) % n_entries;
    const auto active = static_cast<std::size_t>(schedule.entries[k].channel);
    const double v_drive = drive[k];
    for (std::size_t c = 0; c < n; ++c) {
      if (c == active) {
        cap[c] = v_drive + (cap[c] - v_drive) * charge_keep;
      } else {
        cap[c] = cap[c] * hold_keep;
      }
      const double target =
          std::clamp(amplifier(cap[c], p.gain), p.clip_low, p.clip_high);
      amp[c] = std::clamp(target, amp[c] - max_step, amp[c] + max_step);
      if (has_lpf) filt[c] = amp[c] + (filt[c] - amp[c]) * lpf_keep;
    }
    if ((s + 1) % stride == 0) record(s + 1);
  }
  return traces;
}

}  // namespace tdmsim
