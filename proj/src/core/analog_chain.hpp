#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tdm_compiler.hpp"

namespace tdmsim {

/// Electrical constants of the reconstruction chain: DAC, demultiplexer
/// switch and hold capacitor, output amplifier, optional output filter.
struct ChainParams {
  DacSpec dac;
  GainStage gain;
  double r_on = 9.0;            // switch on-resistance
  double c_hold = 33e-12;       // hold capacitor
  double tau_hold = 0.233;      // hold leakage time constant; may be +inf
  // Measured converter output at code 0 and at full scale.
  double input_offset_low = 0.26;
  double input_offset_high = 2.79;
  double clip_low = -7.5;
  double clip_high = 14.2;
  double slew_rate = 193e6;     // V/s
  std::optional<double> lpf_cutoff = 2e3;

  double charge_tau() const noexcept { return r_on * c_hold; }
  void validate() const;

  // Offsets equal to the nominal converter range, no hold leakage, rails and
  // slew far outside anything the stage can produce, no filter.
  static ChainParams ideal(const DacSpec& dac, const GainStage& gain);
};

enum class Node { dac_out, cap, amp_out, filtered };

const char* to_string(Node n) noexcept;
Node parse_node(const std::string& s);

/// Uniformly sampled voltage record at one node. channel is -1 for the
/// shared DAC line.
struct Trace {
  Node node = Node::amp_out;
  int channel = 0;
  double t0 = 0.0;
  double dt = 1.0;
  std::vector<double> samples;

  double time_at(std::size_t i) const noexcept { return t0 + static_cast<double>(i) * dt; }
  double end_time() const noexcept {
    return samples.empty() ? t0 : time_at(samples.size() - 1);
  }
  void validate() const;
};

double dac_output(int code, const ChainParams& p);
double rc_charge(double v_cap, double v_drive, double dt, const ChainParams& p);
double hold_decay(double v_cap, double dt, const ChainParams& p);
double amplifier(double v_in, const GainStage& g);
double clip_slew(double v_target, double v_prev, double dt, const ChainParams& p);
double lpf_step(double v_out_prev, double v_in, double dt, double cutoff);

struct NodeMask {
  bool dac_out = true;
  bool cap = true;
  bool amp_out = true;
  bool filtered = true;
};

struct SimulationOptions {
  double sim_dt = 0.0;  // 0 selects frame_period / 100
  double duration = 0.0;
  std::size_t record_stride = 1;
  // Start every hold capacitor at its first-cycle DAC level instead of 0 V.
  bool start_settled = false;
  NodeMask nodes{};
};

/// Fixed-step run of the chain driven by a schedule.
///
/// The step is frame_period / ceil(frame_period / sim_dt), so slot edges fall
/// on step boundaries. The schedule repeats when duration exceeds its span.
/// Output order: dac_out (channel -1), then cap, amp_out, filtered per
/// channel, each subject to options.nodes and to an LPF being configured.
std::vector<Trace> simulate(const TdmSchedule& schedule, const ChainParams& p,
                            const SimulationOptions& options);

// Steps per slot simulate() will use for a requested sim_dt.
std::size_t substeps_per_slot(double frame_period, double sim_dt);

}  // namespace tdmsim
