#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>

#include "analog_chain.hpp"
#include "waveform.hpp"

namespace tdmsim {

struct ReconstructionReport {
  double max_abs_error = 0.0;
  double rms_error = 0.0;
  double ripple_pp = 0.0;
  double droop_per_cycle_rel = 0.0;
  std::size_t clamp_events = 0;
  std::size_t samples_compared = 0;
};

struct CompareOptions {
  // Maps electrode-volt targets onto the cap / dac_out nodes, and amp_out
  // samples back onto the capacitor for the droop estimate.
  GainStage gain{};
  double cycle_period = 0.0;  // 0 disables ripple and droop metrics
  double settle_time = 0.0;   // samples before this time are ignored
  std::size_t clamp_events = 0;
};

/// Error metrics of a reconstructed trace against its target waveform.
///
/// Droop is reported as the relative loss per cycle implied by the decay
/// rate observed on hold intervals (runs of strictly shrinking |v_cap|), so
/// it does not depend on how much of each cycle the switch is open.
ReconstructionReport compare(const ChannelWaveform& target, const Trace& trace,
                             const CompareOptions& options = {});

struct ExponentialFit {
  double tau = 0.0;
  double tau_sigma = 0.0;
  double v0 = 0.0;  // amplitude at t = 0 of the trace time axis
  std::size_t samples_used = 0;
};

// Log-domain least squares of v0 * exp(-t / tau) over samples with v > 0 in
// [t_start, t_end].
ExponentialFit fit_exponential(const Trace& trace, double t_start, double t_end);

struct SineFit {
  double offset = 0.0;
  double amplitude = 0.0;
  double frequency = 0.0;
  double phase = 0.0;  // v = offset + amplitude * sin(2 pi f t + phase)
  double rms_residual = 0.0;
  std::size_t samples_used = 0;

  double peak() const noexcept { return offset + amplitude; }
};

struct ClippedSineOptions {
  double guard_fraction = 0.02;  // of the trace's peak-to-peak swing
  double clip_low = -std::numeric_limits<double>::infinity();
};

// Sine fit using only samples strictly inside the clip levels minus the guard
// band.
SineFit fit_clipped_sine(const Trace& trace, double clip_high,
                         const ClippedSineOptions& options = {});

struct SlewMeasurement {
  double slew_rate = 0.0;  // V/s, always positive
  double t10 = 0.0;
  double t90 = 0.0;
  double swing = 0.0;
  bool rising = true;
};

// 10-90 % transition time of the first full-swing edge, linearly interpolated.
SlewMeasurement measure_slew(const Trace& trace);

struct ToleranceResult {
  double v_low_mean = 0.0;
  double v_low_sigma = 0.0;
  double v_high_mean = 0.0;
  double v_high_sigma = 0.0;
  std::size_t n_samples = 0;
};

/// Monte Carlo of the gain-stage output at two input levels with r0 and r1
/// drawn independently and uniformly within +-rel_tol of nominal.
///
/// Draws come from fixed-size blocks; block b uses its own mt19937_64 seeded
/// from (seed, b), so the result is independent of thread count.
ToleranceResult propagate_tolerances(double v_in_low, double v_in_high, const GainStage& g,
                                     double rel_tol, std::size_t n_samples,
                                     std::uint64_t seed);

}  // namespace tdmsim
