#include "tdm_compiler.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "analog_chain.hpp"
#include "common.hpp"

namespace tdmsim {

void DacSpec::validate() const {
  require(bits >= 1 && bits <= 30, ErrorKind::validation, "DAC bits must be in [1, 30]");
  require(std::isfinite(input_range_low) && std::isfinite(input_range_high) &&
              input_range_high > input_range_low,
          ErrorKind::validation, "DAC input range must satisfy high > low");
  require(std::isfinite(update_rate) && update_rate > 0.0, ErrorKind::validation,
          "DAC update rate must be > 0");
  require(std::isfinite(settling_time) && settling_time >= 0.0, ErrorKind::validation,
          "DAC settling time must be >= 0");
}

void GainStage::validate() const {
  require(std::isfinite(r0) && r0 > 0.0 && std::isfinite(r1) && r1 > 0.0,
          ErrorKind::validation, "gain resistors must be > 0");
  require(std::isfinite(vref), ErrorKind::validation, "vref must be finite");
}

const char* to_string(SelectEncoding e) noexcept {
  return e == SelectEncoding::one_hot ? "one-hot" : "binary";
}

SelectEncoding parse_select_encoding(const std::string& s) {
  if (s == "one-hot" || s == "one_hot") return SelectEncoding::one_hot;
  if (s == "binary") return SelectEncoding::binary;
  fail(ErrorKind::validation, "unknown select encoding '" + s + "'");
}

std::uint64_t TdmSchedule::select_word(std::size_t k) const {
  const auto ch = static_cast<std::uint64_t>(entries.at(k).channel);
  return encoding == SelectEncoding::one_hot ? (std::uint64_t{1} << ch) : ch;
}

void TdmSchedule::validate() const {
  require(n_channels >= 1, ErrorKind::validation, "schedule needs n_channels >= 1");
  require(!entries.empty(), ErrorKind::validation, "schedule is empty");
  require(entries.size() % static_cast<std::size_t>(n_channels) == 0,
          ErrorKind::validation, "schedule length is not a whole number of cycles");
  require(frame_period > 0.0 && cycle_period > 0.0, ErrorKind::validation,
          "schedule periods must be > 0");
  require(std::abs(cycle_period - n_channels * frame_period) <= 1e-12 * cycle_period,
          ErrorKind::validation, "cycle_period must equal n_channels * frame_period");
  const int max_code = (1 << bits) - 1;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& e = entries[k];
    require(e.code >= 0 && e.code <= max_code, ErrorKind::validation,
            "schedule entry " + std::to_string(k) + " has code out of range");
    require(e.channel == static_cast<int>(k % static_cast<std::size_t>(n_channels)),
            ErrorKind::validation,
            "schedule entry " + std::to_string(k) + " breaks round-robin order");
  }
}

TdmSchedule make_schedule(std::vector<ScheduleEntry> entries, int n_channels,
                          const DacSpec& dac, SelectEncoding encoding) {
  dac.validate();
  TdmSchedule s;
  s.n_channels = n_channels;
  s.bits = dac.bits;
  s.frame_period = 1.0 / dac.update_rate;
  s.cycle_period = n_channels * s.frame_period;
  s.encoding = encoding;
  s.entries = std::move(entries);
  s.validate();
  return s;
}

std::size_t CompileReport::total_clamp_events() const noexcept {
  std::size_t n = 0;
  for (const auto& c : channels) n += c.clamp_events;
  return n;
}

double invert_amplifier(double v_out, const GainStage& g) {
  return (v_out + g.ratio() * g.vref) / g.gain();
}

Quantized quantize(double v_in, const DacSpec& spec) {
  const int max_code = spec.max_code();
  const double scaled = (v_in - spec.input_range_low) /
                        (spec.input_range_high - spec.input_range_low) * max_code;
  if (!(scaled >= 0.0)) return {0, true};  // also catches NaN
  if (scaled > max_code) return {max_code, true};
  // std::round is half-away-from-zero.
  return {static_cast<int>(std::round(scaled)), false};
}

double dequantize(int code, const DacSpec& spec) {
  require(code >= 0 && code <= spec.max_code(), ErrorKind::domain,
          "dequantize: code " + std::to_string(code) + " out of range");
  return spec.input_range_low +
         static_cast<double>(code) / spec.max_code() *
             (spec.input_range_high - spec.input_range_low);
}

CompileResult compile(std::span<const ChannelWaveform> waveforms, const DacSpec& spec,
                      const GainStage& gain, SelectEncoding encoding) {
  spec.validate();
  gain.validate();
  require(!waveforms.empty(), ErrorKind::validation, "compile needs at least one waveform");

  const int n = static_cast<int>(waveforms.size());
  std::vector<const ChannelWaveform*> by_channel(static_cast<std::size_t>(n), nullptr);
  for (const auto& w : waveforms) {
    require(w.channel_id() < n, ErrorKind::validation,
            "channel ids must be exactly 0.." + std::to_string(n - 1) + "; got " +
                std::to_string(w.channel_id()));
    auto& slot = by_channel[static_cast<std::size_t>(w.channel_id())];
    require(slot == nullptr, ErrorKind::validation,
            "duplicate channel id " + std::to_string(w.channel_id()));
    slot = &w;
  }
  const double duration = waveforms.front().total_duration();
  for (const auto& w : waveforms) {
    require(std::abs(w.total_duration() - duration) <= 1e-12 * duration,
            ErrorKind::validation,
            "channel " + std::to_string(w.channel_id()) +
                " duration differs from channel " +
                std::to_string(waveforms.front().channel_id()));
  }

  const double frame = 1.0 / spec.update_rate;
  const double cycle = n * frame;
  const auto cycles = static_cast<std::size_t>(
      std::max(1.0, std::ceil(duration / cycle - 1e-9)));

  CompileResult out;
  auto& sched = out.schedule;
  sched.n_channels = n;
  sched.bits = spec.bits;
  sched.frame_period = frame;
  sched.cycle_period = cycle;
  sched.encoding = encoding;
  sched.entries.reserve(cycles * static_cast<std::size_t>(n));

  out.report.select_lines = select_line_count(n, encoding);
  out.report.channels.resize(static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) out.report.channels[static_cast<std::size_t>(c)].channel = c;

  for (std::size_t j = 0; j < cycles; ++j) {
    for (int c = 0; c < n; ++c) {
      const std::size_t k = j * static_cast<std::size_t>(n) + static_cast<std::size_t>(c);
      // Slots in the final cycle may start past the end of the waveform.
      const double t = std::min(static_cast<double>(k) * frame, duration);
      const double target = by_channel[static_cast<std::size_t>(c)]->evaluate(t);
      const auto q = quantize(invert_amplifier(target, gain), spec);
      sched.entries.push_back({q.code, c});

      auto& stats = out.report.channels[static_cast<std::size_t>(c)];
      ++stats.samples;
      if (q.clamped) ++stats.clamp_events;
      const double err = std::abs(amplifier(dequantize(q.code, spec), gain) - target);
      stats.max_quantization_error = std::max(stats.max_quantization_error, err);
    }
  }
  return out;
}

int select_line_count(int n_channels, SelectEncoding encoding) {
  require(n_channels >= 1, ErrorKind::validation, "n_channels must be >= 1");
  if (encoding == SelectEncoding::one_hot) return n_channels;
  // ceil(log2 N); N = 1 needs no lines.
  return static_cast<int>(std::bit_width(static_cast<unsigned>(n_channels - 1)));
}

std::int64_t max_multiplexing_factor(double per_channel_rate, const SlotBudget& b) {
  require(std::isfinite(per_channel_rate) && per_channel_rate > 0.0, ErrorKind::validation,
          "per-channel rate must be > 0");
  require(b.settling_time >= 0.0 && b.switch_dead_time >= 0.0 && b.charge_tau >= 0.0 &&
              b.charge_settle_multiplier >= 0.0,
          ErrorKind::validation, "slot budget terms must be >= 0");
  const double slot = b.settling_time + b.switch_dead_time +
                      b.charge_settle_multiplier * b.charge_tau;
  if (slot <= 0.0) return std::numeric_limits<std::int64_t>::max();
  const double n = std::floor((1.0 / per_channel_rate) / slot);
  if (n >= static_cast<double>(std::numeric_limits<std::int64_t>::max())) {
    return std::numeric_limits<std::int64_t>::max();
  }
  return static_cast<std::int64_t>(n);
}

}  // namespace tdmsim
