#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "analog_chain.hpp"
#include "analysis.hpp"
#include "tdm_compiler.hpp"
#include "trap_model.hpp"
#include "waveform.hpp"

namespace tdmsim {

struct WaveformGroup {
  std::string name;
  std::vector<ChannelWaveform> channels;  // document order
  std::vector<std::string> electrodes;    // electrode id per entry of channels; may be empty
};

struct SimulationSection {
  double duration = 0.0;  // 0: the span of the compiled schedule
  double sim_dt = 0.0;    // 0: frame_period / 100
  std::size_t record_stride = 1;
  bool start_settled = false;
  NodeMask nodes{};
};

struct AnalysisSection {
  std::string group;  // empty: first group
  int channel = 0;
  Node node = Node::amp_out;
  double settle_time = 0.0;
  std::optional<std::pair<double, double>> exponential_window;
  std::optional<double> clip_high;  // presence enables the clipped-sine fit
  ClippedSineOptions clipped_sine{};
  bool slew = false;
};

struct ToleranceSection {
  double v_in_low = 0.26;
  double v_in_high = 2.79;
  double rel_tol = 0.05;
  std::size_t n_samples = 1000000;
};

struct FeasibilitySection {
  double per_channel_rate = 0.5e6;
  double settling_time = 10e-9;
  double switch_dead_time = 0.0;
  double charge_settle_multiplier = 5.0;
};

struct FieldMapSection {
  std::vector<double> xs, ys, zs;
};

struct DynamicsSection {
  double t_end = 1e-3;
  double dt = 0.0;  // 0: RF period / 20
  std::size_t record_stride = 1000;
  Node voltage_source = Node::filtered;
  Box bounding_box{};
  Vec3 initial_offset = Vec3::Zero();
};

struct TrapSection {
  std::vector<Electrode> electrodes;
  TrapDrive drive;
  Vec3 axial_direction = Vec3::UnitX();
  Vec3 initial_guess = Vec3(0.0, 0.0, 80e-6);
  MinimizeOptions minimize{};
  GridScanOptions grid{};
  FieldMapSection field_map{};
  DynamicsSection dynamics{};
};

/// Parsed configuration document. Every section is optional; commands check
/// for the ones they need.
struct Config {
  std::string hash;  // SHA-256 of the document bytes
  std::uint64_t seed = 0;
  ChainParams chain;  // chain.dac and chain.gain hold the dac / gain sections
  SelectEncoding encoding = SelectEncoding::one_hot;
  std::vector<WaveformGroup> groups;
  SimulationSection simulation;
  AnalysisSection analysis;
  ToleranceSection tolerances;
  FeasibilitySection feasibility;
  std::optional<TrapSection> trap;

  const WaveformGroup& group(const std::string& name) const;
};

Config parse_config(const std::string& text);
Config load_config(const std::string& path);

}  // namespace tdmsim
