#include "analysis.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"

namespace tdmsim {

namespace {

bool node_in_input_domain(Node n) { return n == Node::cap || n == Node::dac_out; }

double interpolate_crossing(const Trace& tr, std::size_t j, double level) {
  const double v0 = tr.samples[j];
  const double v1 = tr.samples[j + 1];
  const double frac = (v1 == v0) ? 0.0 : (level - v0) / (v1 - v0);
  return tr.time_at(j) + frac * tr.dt;
}

}  // namespace

ReconstructionReport compare(const ChannelWaveform& target, const Trace& trace,
                             const CompareOptions& options) {
  trace.validate();
  options.gain.validate();
  const bool input_domain = node_in_input_domain(trace.node);
  const double total = target.total_duration();
  const double start = std::max({options.settle_time, trace.t0, 0.0});

  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    const double t = trace.time_at(i);
    if (t < start) continue;
    if (t > total) break;
    idx.push_back(i);
  }
  require(!idx.empty(), ErrorKind::validation,
          "compare: trace and target do not overlap after settle_time");

  ReconstructionReport r;
  r.clamp_events = options.clamp_events;
  r.samples_compared = idx.size();
  double sum_sq = 0.0;
  for (std::size_t i : idx) {
    double want = target.evaluate(trace.time_at(i));
    if (input_domain) want = invert_amplifier(want, options.gain);
    const double err = std::abs(trace.samples[i] - want);
    r.max_abs_error = std::max(r.max_abs_error, err);
    sum_sq += err * err;
  }
  r.rms_error = std::sqrt(sum_sq / static_cast<double>(idx.size()));

  if (options.cycle_period <= 0.0) return r;

  // Ripple: peak-to-peak within each complete cycle window after start.
  const double last_t = trace.time_at(idx.back());
  const auto full_windows = static_cast<std::size_t>(
      std::floor((last_t - start) / options.cycle_period + 1e-9));
  if (full_windows > 0) {
    std::vector<double> lo(full_windows, INFINITY), hi(full_windows, -INFINITY);
    for (std::size_t i : idx) {
      const auto w =
          static_cast<std::size_t>((trace.time_at(i) - start) / options.cycle_period);
      if (w >= full_windows) continue;
      lo[w] = std::min(lo[w], trace.samples[i]);
      hi[w] = std::max(hi[w], trace.samples[i]);
    }
    for (std::size_t w = 0; w < full_windows; ++w) {
      r.ripple_pp = std::max(r.ripple_pp, hi[w] - lo[w]);
    }
  }

  // Droop: decay rate on hold runs of the capacitor voltage.
  auto cap_level = [&](std::size_t i) {
    const double v = trace.samples[i];
    return std::abs(input_domain ? v : invert_amplifier(v, options.gain));
  };
  double log_sum = 0.0;
  double time_sum = 0.0;
  std::size_t run_start = 0;
  for (std::size_t k = 1; k <= idx.size(); ++k) {
    const bool continues =
        k < idx.size() && idx[k] == idx[k - 1] + 1 && cap_level(idx[k]) < cap_level(idx[k - 1]);
    if (continues) continue;
    const std::size_t run_end = k - 1;
    if (run_end >= run_start + 2) {
      const double a0 = cap_level(idx[run_start]);
      const double a1 = cap_level(idx[run_end]);
      if (a1 > 0.0) {
        log_sum += std::log(a0 / a1);
        time_sum += trace.time_at(idx[run_end]) - trace.time_at(idx[run_start]);
      }
    }
    run_start = k;
  }
  if (time_sum > 0.0) {
    r.droop_per_cycle_rel = -std::expm1(-(log_sum / time_sum) * options.cycle_period);
  }
  return r;
}

ExponentialFit fit_exponential(const Trace& trace, double t_start, double t_end) {
  trace.validate();
  require(t_end > t_start, ErrorKind::validation, "fit window must have t_end > t_start");
  std::vector<double> ts, ys;
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    const double t = trace.time_at(i);
    if (t < t_start || t > t_end) continue;
    if (trace.samples[i] <= 0.0) continue;
    ts.push_back(t);
    ys.push_back(std::log(trace.samples[i]));
  }
  const std::size_t n = ts.size();
  require(n >= 3, ErrorKind::fit, "exponential fit needs >= 3 positive samples in window");

  double t_mean = 0.0, y_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    t_mean += ts[i];
    y_mean += ys[i];
  }
  t_mean /= static_cast<double>(n);
  y_mean /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (ts[i] - t_mean) * (ts[i] - t_mean);
    sxy += (ts[i] - t_mean) * (ys[i] - y_mean);
  }
  require(sxx > 0.0, ErrorKind::fit, "exponential fit window has no time spread");
  const double slope = sxy / sxx;
  require(slope < 0.0, ErrorKind::fit, "trace is not decaying in the fit window");
  const double intercept = y_mean - slope * t_mean;

  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = ys[i] - (intercept + slope * ts[i]);
    ssr += e * e;
  }
  const double slope_sigma = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);

  ExponentialFit fit;
  fit.tau = -1.0 / slope;
  fit.tau_sigma = slope_sigma / (slope * slope);
  fit.v0 = std::exp(intercept);
  fit.samples_used = n;
  return fit;
}

namespace {

struct LinearSine {
  double offset, b, c, ssr;
};

// Best offset + b sin(w x) + c cos(w x) for fixed frequency.
LinearSine linear_sine_fit(const std::vector<double>& x, const std::vector<double>& y,
                           double f) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd rhs(n);
  const double w = constants::two_pi * f;
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = std::sin(w * x[static_cast<std::size_t>(i)]);
    a(i, 2) = std::cos(w * x[static_cast<std::size_t>(i)]);
    rhs(i) = y[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector3d p = a.colPivHouseholderQr().solve(rhs);
  return {p(0), p(1), p(2), (a * p - rhs).squaredNorm()};
}

double estimate_period(const Trace& tr) {
  const auto [mn, mx] = std::minmax_element(tr.samples.begin(), tr.samples.end());
  const double level = 0.5 * (*mn + *mx);
  std::vector<double> up, down;
  for (std::size_t j = 0; j + 1 < tr.samples.size(); ++j) {
    const double v0 = tr.samples[j], v1 = tr.samples[j + 1];
    if (v0 < level && v1 >= level) up.push_back(interpolate_crossing(tr, j, level));
    if (v0 > level && v1 <= level) down.push_back(interpolate_crossing(tr, j, level));
  }
  double sum = 0.0;
  int terms = 0;
  for (const auto* list : {&up, &down}) {
    if (list->size() >= 2) {
      sum += (list->back() - list->front()) / static_cast<double>(list->size() - 1);
      ++terms;
    }
  }
  if (terms > 0) return sum / terms;
  require(!up.empty() && !down.empty(), ErrorKind::fit,
          "sine fit: trace does not contain a full period");
  return 2.0 * std::abs(down.front() - up.front());
}

}  // namespace

SineFit fit_clipped_sine(const Trace& trace, double clip_high,
                         const ClippedSineOptions& options) {
  trace.validate();
  require(trace.samples.size() >= 8, ErrorKind::fit, "sine fit needs >= 8 samples");
  const auto [mn, mx] = std::minmax_element(trace.samples.begin(), trace.samples.end());
  const double swing = *mx - *mn;
  require(swing > 0.0, ErrorKind::fit, "sine fit: trace is constant");
  const double guard = options.guard_fraction * swing;
  const double upper = clip_high - guard;
  const double lower = options.clip_low + guard;

  const double t_mid = 0.5 * (trace.t0 + trace.end_time());
  std::vector<double> x, y;
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    const double v = trace.samples[i];
    if (v < upper && v > lower) {
      x.push_back(trace.time_at(i) - t_mid);
      y.push_back(v);
    }
  }
  require(x.size() >= 5, ErrorKind::fit, "sine fit: all samples are clipped");

  // Coarse frequency from level crossings, then a local scan.
  const double f0 = 1.0 / estimate_period(trace);
  double f = f0;
  double best = INFINITY;
  for (int k = -40; k <= 40; ++k) {
    const double fk = f0 * (1.0 + 0.005 * k);
    const double ssr = linear_sine_fit(x, y, fk).ssr;
    if (ssr < best) {
      best = ssr;
      f = fk;
    }
  }
  LinearSine lin = linear_sine_fit(x, y, f);

  // Levenberg-Marquardt on (offset, b, c, f).
  Eigen::Vector4d p(lin.offset, lin.b, lin.c, f);
  auto residuals = [&](const Eigen::Vector4d& q, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    const auto n = static_cast<Eigen::Index>(x.size());
    r.resize(n);
    if (jac) jac->resize(n, 4);
    const double w = constants::two_pi * q(3);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double xi = x[static_cast<std::size_t>(i)];
      const double s = std::sin(w * xi), co = std::cos(w * xi);
      r(i) = y[static_cast<std::size_t>(i)] - (q(0) + q(1) * s + q(2) * co);
      if (jac) {
        (*jac)(i, 0) = 1.0;
        (*jac)(i, 1) = s;
        (*jac)(i, 2) = co;
        (*jac)(i, 3) = (q(1) * co - q(2) * s) * constants::two_pi * xi;
      }
    }
    return r.squaredNorm();
  };
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  double ssr = residuals(p, r, &jac);
  double lambda = 1e-3;
  for (int iter = 0; iter < 200; ++iter) {
    const Eigen::Matrix4d jtj = jac.transpose() * jac;
    const Eigen::Vector4d jtr = jac.transpose() * r;
    Eigen::Matrix4d damped = jtj;
    damped.diagonal() += lambda * jtj.diagonal();
    const Eigen::Vector4d step = damped.ldlt().solve(jtr);
    Eigen::VectorXd r_try;
    const double ssr_try = residuals(p + step, r_try, nullptr);
    if (ssr_try <= ssr) {
      p += step;
      const bool converged = std::abs(step(3)) <= 1e-15 * std::abs(p(3)) ||
                             ssr - ssr_try <= 1e-30 + 1e-15 * ssr;
      ssr = residuals(p, r, &jac);
      lambda = std::max(lambda / 10.0, 1e-12);
      if (converged) break;
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
  }

  SineFit fit;
  fit.offset = p(0);
  fit.amplitude = std::hypot(p(1), p(2));
  fit.frequency = p(3);
  double phase = std::atan2(p(2), p(1)) - constants::two_pi * p(3) * t_mid;
  phase = std::remainder(phase, constants::two_pi);
  fit.phase = phase;
  fit.rms_residual = std::sqrt(ssr / static_cast<double>(x.size()));
  fit.samples_used = x.size();
  return fit;
}

SlewMeasurement measure_slew(const Trace& trace) {
  trace.validate();
  require(trace.samples.size() >= 2, ErrorKind::fit, "slew: trace too short");
  const auto [mn, mx] = std::minmax_element(trace.samples.begin(), trace.samples.end());
  const double swing = *mx - *mn;
  require(swing > 0.0, ErrorKind::fit, "slew: trace has no transition");
  const double lo = *mn + 0.1 * swing;
  const double hi = *mn + 0.9 * swing;

  // First sample that reaches the opposite band after visiting one band.
  std::ptrdiff_t last_low = -1, last_high = -1;
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    const double v = trace.samples[i];
    if (v >= hi && last_low >= 0 && (last_high < last_low)) {
      SlewMeasurement m;
      m.rising = true;
      m.swing = swing;
      auto j = static_cast<std::size_t>(last_low);
      while (trace.samples[j + 1] <= lo) ++j;
      m.t10 = interpolate_crossing(trace, j, lo);
      m.t90 = interpolate_crossing(trace, i - 1, hi);
      m.slew_rate = 0.8 * swing / (m.t90 - m.t10);
      return m;
    }
    if (v <= lo && last_high >= 0 && (last_low < last_high)) {
      SlewMeasurement m;
      m.rising = false;
      m.swing = swing;
      auto j = static_cast<std::size_t>(last_high);
      while (trace.samples[j + 1] >= hi) ++j;
      m.t90 = interpolate_crossing(trace, j, hi);
      m.t10 = interpolate_crossing(trace, i - 1, lo);
      m.slew_rate = 0.8 * swing / (m.t10 - m.t90);
      return m;
    }
    if (v <= lo) last_low = static_cast<std::ptrdiff_t>(i);
    if (v >= hi) last_high = static_cast<std::ptrdiff_t>(i);
  }
  fail(ErrorKind::fit, "slew: no full-swing transition found");
}

namespace {

struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) {
    ++n;
    const double d = v - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (v - mean);
  }

  void merge(const Moments& o) {
    if (o.n == 0) return;
    const double total = static_cast<double>(n + o.n);
    const double d = o.mean - mean;
    mean += d * static_cast<double>(o.n) / total;
    m2 += o.m2 + d * d * static_cast<double>(n) * static_cast<double>(o.n) / total;
    n += o.n;
  }

  double sigma() const { return n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0; }
};

constexpr std::size_t kToleranceBlock = std::size_t{1} << 16;

}  // namespace

ToleranceResult propagate_tolerances(double v_in_low, double v_in_high, const GainStage& g,
                                     double rel_tol, std::size_t n_samples,
                                     std::uint64_t seed) {
  g.validate();
  require(n_samples >= 10000, ErrorKind::validation, "tolerance propagation needs >= 1e4 samples");
  require(rel_tol >= 0.0 && rel_tol < 1.0, ErrorKind::validation, "rel_tol must be in [0, 1)");

  const std::size_t blocks = (n_samples + kToleranceBlock - 1) / kToleranceBlock;
  std::vector<Moments> low(blocks), high(blocks);

  auto run_block = [&](std::size_t b) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    std::mt19937_64 eng(seq);
    auto uniform = [&] {
      const double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
      return 1.0 + rel_tol * (2.0 * u - 1.0);
    };
    const std::size_t count = std::min(kToleranceBlock, n_samples - b * kToleranceBlock);
    for (std::size_t i = 0; i < count; ++i) {
      GainStage draw = g;
      draw.r0 = g.r0 * uniform();
      draw.r1 = g.r1 * uniform();
      low[b].add(amplifier(v_in_low, draw));
      high[b].add(amplifier(v_in_high, draw));
    }
  };

  const std::size_t workers =
      std::min<std::size_t>(blocks, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) run_block(b);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t b = w; b < blocks; b += workers) run_block(b);
      });
    }
  }

  Moments lo_all, hi_all;
  for (std::size_t b = 0; b < blocks; ++b) {
    lo_all.merge(low[b]);
    hi_all.merge(high[b]);
  }
  return {lo_all.mean, lo_all.sigma(), hi_all.mean, hi_all.sigma(), n_samples};
}

}  // namespace tdmsim
