#pragma once

#include <span>
#include <variant>
#include <vector>

namespace tdmsim {

struct ConstantShape {
  double level;
};

struct RampShape {
  double start;
  double end;
};

// offset + amplitude * sin(2*pi*frequency*tau + phase), tau measured from the
// start of the segment.
struct SineShape {
  double offset;
  double amplitude;
  double frequency;
  double phase;
};

struct Segment {
  std::variant<ConstantShape, RampShape, SineShape> shape;
  double duration;

  static Segment constant(double level, double duration);
  static Segment ramp(double start, double end, double duration);
  static Segment sinusoid(double offset, double amplitude, double frequency,
                          double phase, double duration);

  // Value at local time tau in [0, duration].
  double value_at(double tau) const;
  double end_value() const { return value_at(duration); }
  void validate() const;
};

/// Target output-voltage waveform for one channel.
///
/// Values are electrode volts (after the gain stage). Segment i covers the
/// half-open interval [start_i, start_i + duration_i); the final instant
/// t == total_duration() belongs to the last segment.
class ChannelWaveform {
 public:
  ChannelWaveform(int channel_id, std::vector<Segment> segments);

  int channel_id() const noexcept { return channel_id_; }
  double total_duration() const noexcept { return total_; }
  std::span<const Segment> segments() const noexcept { return segments_; }

  double evaluate(double t) const;

  // Samples at t = k / rate for k = 0 .. floor(total_duration * rate).
  std::vector<double> sample(double rate) const;

 private:
  int channel_id_;
  std::vector<Segment> segments_;
  std::vector<double> starts_;
  double total_ = 0.0;
};

// Number of grid points sample(rate) produces for a waveform of this length.
std::size_t sample_count(double total_duration, double rate);

}  // namespace tdmsim
