#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "analysis.hpp"
#include "common.hpp"

using namespace tdmsim;

namespace {

template <class F>
Trace make_trace(F f, double t0, double dt, std::size_t n, Node node = Node::amp_out) {
  Trace t;
  t.node = node;
  t.channel = 0;
  t.t0 = t0;
  t.dt = dt;
  for (std::size_t i = 0; i < n; ++i) t.samples.push_back(f(t0 + static_cast<double>(i) * dt));
  return t;
}

double clipped_sine(double t, double off, double amp, double f, double ph, double lo, double hi) {
  return std::clamp(off + amp * std::sin(2.0 * M_PI * f * t + ph), lo, hi);
}

}  // namespace

TEST_CASE("compare on an exact reconstruction reports zero error") {
  ChannelWaveform w(0, {Segment::constant(3.0, 1e-6)});
  Trace t = make_trace([](double) { return 3.0; }, 0.0, 1e-8, 101);
  const auto r = compare(w, t, {});
  CHECK(r.max_abs_error == 0.0);
  CHECK(r.rms_error == 0.0);
  CHECK(r.samples_compared == 101);
}

TEST_CASE("compare maps targets into the capacitor domain") {
  GainStage g;
  ChannelWaveform w(0, {Segment::constant(5.5, 1e-6)});
  const double v_in = invert_amplifier(5.5, g);
  Trace t = make_trace([&](double) { return v_in + 1e-3; }, 0.0, 1e-8, 101, Node::cap);
  CompareOptions o;
  o.gain = g;
  const auto r = compare(w, t, o);
  CHECK(r.max_abs_error == doctest::Approx(1e-3).epsilon(1e-9));
}

TEST_CASE("droop estimate recovers the hold time constant") {
  GainStage g;
  const double tau = 0.233, cycle = 1e-6;
  // sawtooth: recharge to 2 V at every cycle start, then decay
  Trace t = make_trace(
      [&](double x) { return 2.0 * std::exp(-std::fmod(x, cycle) / tau); }, 0.0, cycle / 50.0,
      500, Node::cap);
  ChannelWaveform w(0, {Segment::constant(amplifier(2.0, g), 1e-5)});
  CompareOptions o;
  o.gain = g;
  o.cycle_period = cycle;
  const auto r = compare(w, t, o);
  CHECK(r.droop_per_cycle_rel == doctest::Approx(-std::expm1(-cycle / tau)).epsilon(1e-6));
  CHECK(r.ripple_pp == doctest::Approx(2.0 * -std::expm1(-cycle * 49.0 / 50.0 / tau)).epsilon(1e-6));
}

TEST_CASE("exponential fit is exact on noiseless data") {
  const double tau = 0.233, v0 = 4.2;
  Trace t = make_trace([&](double x) { return v0 * std::exp(-x / tau); }, -0.045, 1e-4, 3451);
  const auto f = fit_exponential(t, -0.045, 0.3001);
  CHECK(std::abs(f.tau / tau - 1.0) < 1e-6);
  CHECK(std::abs(f.v0 / v0 - 1.0) < 1e-6);
  CHECK(f.tau_sigma < 1e-9);
  CHECK(f.samples_used == 3451);
}

TEST_CASE("exponential fit errors") {
  Trace rising = make_trace([](double x) { return 1.0 + x; }, 0.0, 0.1, 10);
  CHECK_THROWS_AS(fit_exponential(rising, 0.0, 1.0), Error);
  Trace negative = make_trace([](double) { return -1.0; }, 0.0, 0.1, 10);
  try {
    fit_exponential(negative, 0.0, 1.0);
    FAIL("expected fit error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::fit);
  }
}

TEST_CASE("clipped sine fit is exact on noiseless data") {
  const double off = 4.15, amp = 11.65, f = 100e3, ph = 0.3;
  Trace t = make_trace([&](double x) { return clipped_sine(x, off, amp, f, ph, -7.5, 14.2); },
                       0.0, 5e-9, 6000);
  ClippedSineOptions o;
  o.clip_low = -7.5;
  const auto s = fit_clipped_sine(t, 14.2, o);
  CHECK(std::abs(s.offset / off - 1.0) < 1e-6);
  CHECK(std::abs(s.amplitude / amp - 1.0) < 1e-6);
  CHECK(std::abs(s.frequency / f - 1.0) < 1e-6);
  CHECK(s.peak() == doctest::Approx(off + amp).epsilon(1e-6));
  CHECK(s.rms_residual < 1e-9);
}

TEST_CASE("clipped sine fit without a lower clip") {
  Trace t = make_trace([](double x) { return clipped_sine(x, 1.0, 3.0, 37e3, -1.0, -1e9, 3.0); },
                       1e-6, 1e-7, 2000);
  const auto s = fit_clipped_sine(t, 3.0);
  CHECK(s.peak() == doctest::Approx(4.0).epsilon(1e-6));
  CHECK(s.frequency == doctest::Approx(37e3).epsilon(1e-6));
}

TEST_CASE("slew measurement is invariant under offset and time shift") {
  auto edge = [](double t) { return std::clamp(14.2 - 193e6 * (t - 1e-6), -7.5, 14.2); };
  Trace a = make_trace(edge, 0.0, 1e-10, 30000);
  const auto m = measure_slew(a);
  CHECK(m.slew_rate == doctest::Approx(193e6).epsilon(1e-9));
  CHECK(m.swing == doctest::Approx(21.7).epsilon(1e-12));
  CHECK_FALSE(m.rising);
  CHECK(m.t10 - m.t90 == doctest::Approx(0.8 * 21.7 / 193e6).epsilon(1e-9));

  Trace b = make_trace([&](double t) { return edge(t - 3.7e-7) + 2.5; }, 0.0, 1e-10, 30000);
  const auto n = measure_slew(b);
  CHECK(n.slew_rate == doctest::Approx(m.slew_rate).epsilon(1e-9));
  CHECK(n.t10 - m.t10 == doctest::Approx(3.7e-7).epsilon(1e-6));
  CHECK(n.swing == doctest::Approx(m.swing).epsilon(1e-12));

  Trace flat = make_trace([](double) { return 1.0; }, 0.0, 1e-9, 100);
  CHECK_THROWS_AS(measure_slew(flat), Error);
}

TEST_CASE("tolerance sigma matches first-order propagation") {
  GainStage g;
  for (double rel : {0.01, 0.03, 0.05}) {
    const auto r = propagate_tolerances(0.26, 2.79, g, rel, 400000, 11);
    const double k = g.r0 / g.r1 * rel * std::sqrt(2.0 / 3.0);
    CHECK(r.v_low_sigma == doctest::Approx(std::abs(0.26 - g.vref) * k).epsilon(0.05));
    CHECK(r.v_high_sigma == doctest::Approx(std::abs(2.79 - g.vref) * k).epsilon(0.05));
    CHECK(r.v_low_mean == doctest::Approx(amplifier(0.26, g)).epsilon(0.01));
  }
}

TEST_CASE("tolerance propagation is deterministic per seed") {
  GainStage g;
  const auto a = propagate_tolerances(0.26, 2.79, g, 0.05, 200000, 5);
  const auto b = propagate_tolerances(0.26, 2.79, g, 0.05, 200000, 5);
  const auto c = propagate_tolerances(0.26, 2.79, g, 0.05, 200000, 6);
  CHECK(a.v_low_mean == b.v_low_mean);
  CHECK(a.v_high_sigma == b.v_high_sigma);
  CHECK(a.v_low_mean != c.v_low_mean);
  CHECK_THROWS_AS(propagate_tolerances(0.26, 2.79, g, 0.05, 10, 5), Error);
}
