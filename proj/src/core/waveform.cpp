#include "waveform.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "common.hpp"

namespace tdmsim {

namespace {

// Grid points within this fraction of a sample period of the end still count
// as on the grid; k/rate rarely lands exactly on total_duration in binary.
constexpr double kGridSlack = 1e-9;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

Segment Segment::constant(double level, double duration) {
  return Segment{ConstantShape{level}, duration};
}

Segment Segment::ramp(double start, double end, double duration) {
  return Segment{RampShape{start, end}, duration};
}

Segment Segment::sinusoid(double offset, double amplitude, double frequency,
                          double phase, double duration) {
  return Segment{SineShape{offset, amplitude, frequency, phase}, duration};
}

double Segment::value_at(double tau) const {
  return std::visit(
      overloaded{
          [](const ConstantShape& c) { return c.level; },
          [&](const RampShape& r) {
            return r.start + (r.end - r.start) * (tau / duration);
          },
          [&](const SineShape& s) {
            return s.offset +
                   s.amplitude *
                       std::sin(constants::two_pi * s.frequency * tau + s.phase);
          },
      },
      shape);
}

void Segment::validate() const {
  require(std::isfinite(duration) && duration > 0.0, ErrorKind::validation,
          "segment duration must be finite and > 0");
  std::visit(overloaded{
                 [](const ConstantShape& c) {
                   require(std::isfinite(c.level), ErrorKind::validation,
                           "constant level must be finite");
                 },
                 [](const RampShape& r) {
                   require(std::isfinite(r.start) && std::isfinite(r.end),
                           ErrorKind::validation, "ramp endpoints must be finite");
                 },
                 [](const SineShape& s) {
                   require(std::isfinite(s.offset) && std::isfinite(s.amplitude) &&
                               std::isfinite(s.frequency) && std::isfinite(s.phase),
                           ErrorKind::validation, "sinusoid parameters must be finite");
                   require(s.amplitude >= 0.0, ErrorKind::validation,
                           "sinusoid amplitude must be >= 0");
                   require(s.frequency >= 0.0, ErrorKind::validation,
                           "sinusoid frequency must be >= 0");
                 },
             },
             shape);
}

ChannelWaveform::ChannelWaveform(int channel_id, std::vector<Segment> segments)
    : channel_id_(channel_id), segments_(std::move(segments)) {
  require(channel_id_ >= 0, ErrorKind::validation, "channel_id must be >= 0");
  require(!segments_.empty(), ErrorKind::validation,
          "channel " + std::to_string(channel_id_) + " has no segments");
  starts_.reserve(segments_.size());
  for (const auto& s : segments_) {
    s.validate();
    starts_.push_back(total_);
    total_ += s.duration;
  }
}

double ChannelWaveform::evaluate(double t) const {
  if (!(t >= 0.0) || t > total_ * (1.0 + 2.0 * kGridSlack)) {
    fail(ErrorKind::domain, "evaluate: t = " + std::to_string(t) +
                                " outside [0, " + std::to_string(total_) + "]");
  }
  if (t >= total_) return segments_.back().end_value();
  // Last segment whose start is <= t.
  auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
  const auto i = static_cast<std::size_t>(std::distance(starts_.begin(), it)) - 1;
  const double tau = std::min(t - starts_[i], segments_[i].duration);
  return segments_[i].value_at(tau);
}

std::size_t sample_count(double total_duration, double rate) {
  require(std::isfinite(rate) && rate > 0.0, ErrorKind::validation,
          "sample rate must be > 0");
  return static_cast<std::size_t>(std::floor(total_duration * rate + kGridSlack)) + 1;
}

std::vector<double> ChannelWaveform::sample(double rate) const {
  const std::size_t n = sample_count(total_, rate);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.push_back(evaluate(static_cast<double>(k) / rate));
  }
  return out;
}

}  // namespace tdmsim
