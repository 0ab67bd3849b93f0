#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "waveform.hpp"

namespace tdmsim {

/// Current-output DAC followed by its I-to-V converter. The input range is
/// the voltage span at the converter output.
struct DacSpec {
  int bits = 14;
  double input_range_low = 0.0;
  double input_range_high = 2.5;
  double update_rate = 30e6;  // updates per second
  double settling_time = 0.0;

  int max_code() const noexcept { return (1 << bits) - 1; }
  double lsb() const noexcept {
    return (input_range_high - input_range_low) / static_cast<double>(max_code());
  }
  void validate() const;
};

/// Non-inverting stage with a reference on the inverting input:
/// v_out = (1 + r0/r1) v_in - (r0/r1) vref.
struct GainStage {
  double r0 = 8.2e3;
  double r1 = 1.0e3;
  double vref = 1.25;

  double ratio() const noexcept { return r0 / r1; }
  double gain() const noexcept { return 1.0 + r0 / r1; }
  void validate() const;
};

enum class SelectEncoding { one_hot, binary };

const char* to_string(SelectEncoding e) noexcept;
SelectEncoding parse_select_encoding(const std::string& s);

struct ScheduleEntry {
  int code;
  int channel;

  friend bool operator==(const ScheduleEntry&, const ScheduleEntry&) = default;
};

/// Multiplexed DAC stream. Entry k occupies the slot [k, k+1) * frame_period
/// and is routed to channel k mod n_channels.
struct TdmSchedule {
  int n_channels = 1;
  int bits = 14;
  double frame_period = 0.0;
  double cycle_period = 0.0;
  SelectEncoding encoding = SelectEncoding::one_hot;
  std::vector<ScheduleEntry> entries;

  std::size_t samples_per_channel() const noexcept {
    return entries.size() / static_cast<std::size_t>(n_channels);
  }
  double per_channel_rate() const noexcept { return 1.0 / cycle_period; }

  // Logic levels on the select lines while entry k is active (bit i = line i).
  std::uint64_t select_word(std::size_t k) const;

  // Checks code range, round-robin order and timing consistency.
  void validate() const;
};

/// Rebuilds a schedule from (code, channel) rows and DAC timing.
TdmSchedule make_schedule(std::vector<ScheduleEntry> entries, int n_channels,
                          const DacSpec& dac, SelectEncoding encoding);

struct ChannelCompileStats {
  int channel = 0;
  std::size_t samples = 0;
  std::size_t clamp_events = 0;
  // Worst |amplifier(dequantize(code)) - target| over the channel, output volts.
  double max_quantization_error = 0.0;
};

struct CompileReport {
  std::vector<ChannelCompileStats> channels;
  int select_lines = 0;

  std::size_t total_clamp_events() const noexcept;
};

struct CompileResult {
  TdmSchedule schedule;
  CompileReport report;
};

struct Quantized {
  int code;
  bool clamped;
};

double invert_amplifier(double v_out, const GainStage& g);

// Round half away from zero, clamped to [0, 2^bits - 1].
Quantized quantize(double v_in, const DacSpec& spec);

double dequantize(int code, const DacSpec& spec);

/// Compiles per-channel target waveforms into one TDM stream.
///
/// Waveforms must share a total duration and carry channel ids exactly
/// 0..N-1 (any order). Each channel is sampled at the start of its own slot;
/// the number of cycles is the smallest count whose span covers the
/// waveform duration.
CompileResult compile(std::span<const ChannelWaveform> waveforms, const DacSpec& spec,
                      const GainStage& gain, SelectEncoding encoding);

int select_line_count(int n_channels, SelectEncoding encoding);

/// Per-slot time budget used for the multiplexing-factor estimate.
struct SlotBudget {
  double settling_time = 0.0;
  double switch_dead_time = 0.0;
  double charge_tau = 0.0;
  double charge_settle_multiplier = 5.0;
};

std::int64_t max_multiplexing_factor(double per_channel_rate, const SlotBudget& budget);

}  // namespace tdmsim
