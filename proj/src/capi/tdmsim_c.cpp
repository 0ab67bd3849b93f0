#include "tdmsim/tdmsim.h"

#include <cmath>
#include <exception>
#include <new>
#include <string>

#include "analysis.hpp"
#include "commands.hpp"
#include "common.hpp"
#include "config.hpp"
#include "trap_model.hpp"

struct tdm_config {
  tdmsim::Config cfg;
};

struct tdm_result {
  tdmsim::CommandResult result;
  std::string report;
};

struct tdm_trap {
  tdmsim::TrapModel model;
  tdmsim::MinimizeOptions minimize;
  tdmsim::Vec3 axial;
};

namespace {

thread_local std::string last_error;
thread_local double last_escape_time = 0.0;

struct bad_argument : std::exception {
  explicit bad_argument(const char* what) : msg(what) {}
  const char* what() const noexcept override { return msg; }
  const char* msg;
};

template <typename T>
T& deref(T* p, const char* name = "pointer argument") {
  if (p == nullptr) throw bad_argument(name);
  return *p;
}

tdm_status status_of(tdmsim::ErrorKind k) {
  using tdmsim::ErrorKind;
  switch (k) {
    case ErrorKind::domain: return TDM_DOMAIN;
    case ErrorKind::validation: return TDM_VALIDATION;
    case ErrorKind::fit: return TDM_FIT;
    case ErrorKind::no_trap: return TDM_NO_TRAP;
    case ErrorKind::saddle: return TDM_SADDLE;
    case ErrorKind::escape: return TDM_ESCAPE;
    case ErrorKind::io: return TDM_IO;
    case ErrorKind::parse: return TDM_PARSE;
  }
  return TDM_INTERNAL;
}

template <typename F>
tdm_status try_(F&& f) {
  try {
    f();
  } catch (const bad_argument& e) {
    last_error = std::string("null ") + e.what();
    return TDM_INVALID_ARGUMENT;
  } catch (const tdmsim::EscapeError& e) {
    last_error = e.what();
    last_escape_time = e.escape_time();
    return TDM_ESCAPE;
  } catch (const tdmsim::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return TDM_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return TDM_INTERNAL;
  } catch (...) {
    last_error = "unknown exception";
    return TDM_INTERNAL;
  }
  last_error.clear();
  return TDM_OK;
}

const char* str(const char* p, const char* name) {
  if (p == nullptr) throw bad_argument(name);
  return p;
}

tdmsim::GainStage to_core(const tdm_gain_stage& g) { return {g.r0, g.r1, g.vref}; }

tdmsim::DacSpec to_core(const tdm_dac_spec& d) {
  tdmsim::DacSpec s;
  s.bits = d.bits;
  s.input_range_low = d.input_range_low;
  s.input_range_high = d.input_range_high;
  s.update_rate = d.update_rate;
  s.settling_time = d.settling_time;
  return s;
}

tdmsim::ChainParams to_core(const tdm_chain_params& p) {
  tdmsim::ChainParams c;
  c.dac = to_core(p.dac);
  c.gain = to_core(p.gain);
  c.r_on = p.r_on;
  c.c_hold = p.c_hold;
  c.tau_hold = p.tau_hold;
  c.input_offset_low = p.input_offset_low;
  c.input_offset_high = p.input_offset_high;
  c.clip_low = p.clip_low;
  c.clip_high = p.clip_high;
  c.slew_rate = p.slew_rate;
  if (p.lpf_cutoff > 0.0) {
    c.lpf_cutoff = p.lpf_cutoff;
  } else {
    c.lpf_cutoff.reset();
  }
  return c;
}

tdmsim::Trace view(const double* samples, size_t n, double t0, double dt) {
  if (samples == nullptr && n > 0) throw bad_argument("samples");
  tdmsim::Trace t;
  t.t0 = t0;
  t.dt = dt;
  t.samples.assign(samples, samples + n);
  return t;
}

}  // namespace

extern "C" {

const char* tdm_status_name(tdm_status status) {
  switch (status) {
    case TDM_OK: return "ok";
    case TDM_INVALID_ARGUMENT: return "invalid_argument";
    case TDM_DOMAIN: return "domain";
    case TDM_VALIDATION: return "validation";
    case TDM_FIT: return "fit";
    case TDM_NO_TRAP: return "no_trap";
    case TDM_SADDLE: return "saddle";
    case TDM_ESCAPE: return "escape";
    case TDM_IO: return "io";
    case TDM_PARSE: return "parse";
    case TDM_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* tdm_last_error(void) { return last_error.c_str(); }

double tdm_last_escape_time(void) { return last_escape_time; }

const char* tdm_version(void) { return "0.1.0"; }

void tdm_chain_params_default(tdm_chain_params* p) {
  if (p == nullptr) return;
  const tdmsim::ChainParams c;
  p->dac = {c.dac.bits, c.dac.input_range_low, c.dac.input_range_high, c.dac.update_rate,
            c.dac.settling_time};
  p->gain = {c.gain.r0, c.gain.r1, c.gain.vref};
  p->r_on = c.r_on;
  p->c_hold = c.c_hold;
  p->tau_hold = c.tau_hold;
  p->input_offset_low = c.input_offset_low;
  p->input_offset_high = c.input_offset_high;
  p->clip_low = c.clip_low;
  p->clip_high = c.clip_high;
  p->slew_rate = c.slew_rate;
  p->lpf_cutoff = c.lpf_cutoff.value_or(0.0);
}

tdm_status tdm_amplifier(double v_in, const tdm_gain_stage* g, double* v_out) {
  return try_([&] { deref(v_out, "v_out") = tdmsim::amplifier(v_in, to_core(deref(g, "gain"))); });
}

tdm_status tdm_invert_amplifier(double v_out, const tdm_gain_stage* g, double* v_in) {
  return try_([&] {
    deref(v_in, "v_in") = tdmsim::invert_amplifier(v_out, to_core(deref(g, "gain")));
  });
}

tdm_status tdm_quantize(double v_in, const tdm_dac_spec* dac, int* code, int* clamped) {
  return try_([&] {
    const auto spec = to_core(deref(dac, "dac"));
    spec.validate();
    const auto q = tdmsim::quantize(v_in, spec);
    deref(code, "code") = q.code;
    if (clamped != nullptr) *clamped = q.clamped ? 1 : 0;
  });
}

tdm_status tdm_dequantize(int code, const tdm_dac_spec* dac, double* v_in) {
  return try_([&] {
    const auto spec = to_core(deref(dac, "dac"));
    spec.validate();
    deref(v_in, "v_in") = tdmsim::dequantize(code, spec);
  });
}

tdm_status tdm_dac_output(int code, const tdm_chain_params* p, double* v) {
  return try_([&] { deref(v, "v") = tdmsim::dac_output(code, to_core(deref(p, "params"))); });
}

tdm_status tdm_rc_charge(double v_cap, double v_drive, double dt, const tdm_chain_params* p,
                         double* out) {
  return try_([&] {
    tdmsim::require(dt >= 0.0, tdmsim::ErrorKind::domain, "dt must be >= 0");
    deref(out, "out") = tdmsim::rc_charge(v_cap, v_drive, dt, to_core(deref(p, "params")));
  });
}

tdm_status tdm_hold_decay(double v_cap, double dt, const tdm_chain_params* p, double* out) {
  return try_([&] {
    tdmsim::require(dt >= 0.0, tdmsim::ErrorKind::domain, "dt must be >= 0");
    deref(out, "out") = tdmsim::hold_decay(v_cap, dt, to_core(deref(p, "params")));
  });
}

tdm_status tdm_clip_slew(double v_target, double v_prev, double dt, const tdm_chain_params* p,
                         double* out) {
  return try_([&] {
    tdmsim::require(dt > 0.0, tdmsim::ErrorKind::domain, "dt must be > 0");
    deref(out, "out") = tdmsim::clip_slew(v_target, v_prev, dt, to_core(deref(p, "params")));
  });
}

tdm_status tdm_lpf_step(double v_prev, double v_in, double dt, double cutoff, double* out) {
  return try_([&] {
    tdmsim::require(dt > 0.0 && cutoff > 0.0, tdmsim::ErrorKind::domain,
                    "dt and cutoff must be > 0");
    deref(out, "out") = tdmsim::lpf_step(v_prev, v_in, dt, cutoff);
  });
}

tdm_status tdm_select_line_count(int n_channels, int binary, int* lines) {
  return try_([&] {
    deref(lines, "lines") = tdmsim::select_line_count(
        n_channels, binary ? tdmsim::SelectEncoding::binary : tdmsim::SelectEncoding::one_hot);
  });
}

tdm_status tdm_max_multiplexing_factor(double per_channel_rate, double settling_time,
                                       double switch_dead_time, double charge_tau,
                                       double charge_settle_multiplier, int64_t* n_max) {
  return try_([&] {
    tdmsim::SlotBudget b{settling_time, switch_dead_time, charge_tau, charge_settle_multiplier};
    deref(n_max, "n_max") = tdmsim::max_multiplexing_factor(per_channel_rate, b);
  });
}

tdm_status tdm_propagate_tolerances(double v_in_low, double v_in_high, const tdm_gain_stage* g,
                                    double rel_tol, size_t n_samples, uint64_t seed,
                                    tdm_tolerance_result* out) {
  return try_([&] {
    const auto r = tdmsim::propagate_tolerances(v_in_low, v_in_high, to_core(deref(g, "gain")),
                                                rel_tol, n_samples, seed);
    deref(out, "out") = {r.v_low_mean, r.v_low_sigma, r.v_high_mean, r.v_high_sigma, r.n_samples};
  });
}

tdm_status tdm_fit_exponential(const double* samples, size_t n, double t0, double dt,
                               double t_start, double t_end, tdm_exp_fit* out) {
  return try_([&] {
    const auto f = tdmsim::fit_exponential(view(samples, n, t0, dt), t_start, t_end);
    deref(out, "out") = {f.tau, f.tau_sigma, f.v0, f.samples_used};
  });
}

tdm_status tdm_fit_clipped_sine(const double* samples, size_t n, double t0, double dt,
                                double clip_high, double guard_fraction, double clip_low,
                                tdm_sine_fit* out) {
  return try_([&] {
    tdmsim::ClippedSineOptions o;
    o.guard_fraction = guard_fraction;
    o.clip_low = clip_low;
    const auto f = tdmsim::fit_clipped_sine(view(samples, n, t0, dt), clip_high, o);
    deref(out, "out") = {f.offset, f.amplitude, f.frequency, f.phase,
                         f.peak(), f.rms_residual, f.samples_used};
  });
}

tdm_status tdm_measure_slew(const double* samples, size_t n, double t0, double dt,
                            tdm_slew* out) {
  return try_([&] {
    const auto m = tdmsim::measure_slew(view(samples, n, t0, dt));
    deref(out, "out") = {m.slew_rate, m.t10, m.t90, m.swing, m.rising ? 1 : 0};
  });
}

tdm_status tdm_config_load(const char* path, tdm_config** out) {
  return try_([&] {
    auto* cfg = new tdm_config{tdmsim::load_config(str(path, "path"))};
    deref(out, "out") = cfg;
  });
}

tdm_status tdm_config_parse(const char* text, size_t len, tdm_config** out) {
  return try_([&] {
    if (text == nullptr && len > 0) throw bad_argument("text");
    auto* cfg = new tdm_config{tdmsim::parse_config(std::string(text, len))};
    deref(out, "out") = cfg;
  });
}

void tdm_config_free(tdm_config* cfg) { delete cfg; }

const char* tdm_config_hash(const tdm_config* cfg) {
  return cfg == nullptr ? "" : cfg->cfg.hash.c_str();
}

void tdm_run_options_init(tdm_run_options* opts) {
  if (opts == nullptr) return;
  *opts = tdm_run_options{0, 0, 0.0, 0.0, 0, nullptr, nullptr, nullptr};
}

tdm_status tdm_run(const tdm_config* cfg, const char* command, const tdm_run_options* opts,
                   tdm_result** out) {
  return try_([&] {
    const auto& c = deref(cfg, "config").cfg;
    tdmsim::RunOptions ro;
    if (opts != nullptr) {
      if (opts->has_seed) ro.seed = opts->seed;
      if (opts->sim_dt > 0.0) ro.sim_dt = opts->sim_dt;
      if (opts->duration > 0.0) ro.duration = opts->duration;
      if (opts->record_stride > 0) ro.record_stride = opts->record_stride;
      if (opts->group != nullptr) ro.group = opts->group;
      if (opts->trace_path != nullptr) ro.trace_path = opts->trace_path;
      if (opts->schedule_path != nullptr) ro.schedule_path = opts->schedule_path;
    }
    auto* r = new tdm_result{tdmsim::run_command(str(command, "command"), c, ro), {}};
    r->report = r->result.report.dump(2);
    deref(out, "out") = r;
  });
}

void tdm_result_free(tdm_result* r) { delete r; }

const char* tdm_result_report(const tdm_result* r) { return r == nullptr ? "" : r->report.c_str(); }

size_t tdm_result_warning_count(const tdm_result* r) {
  return r == nullptr ? 0 : r->result.warnings.size();
}

const char* tdm_result_warning(const tdm_result* r, size_t i) {
  if (r == nullptr || i >= r->result.warnings.size()) return nullptr;
  return r->result.warnings[i].c_str();
}

size_t tdm_result_file_count(const tdm_result* r) {
  return r == nullptr ? 0 : r->result.files.size();
}

const char* tdm_result_file_name(const tdm_result* r, size_t i) {
  if (r == nullptr || i >= r->result.files.size()) return nullptr;
  return r->result.files[i].name.c_str();
}

const char* tdm_result_file_data(const tdm_result* r, size_t i, size_t* len) {
  if (r == nullptr || i >= r->result.files.size()) return nullptr;
  if (len != nullptr) *len = r->result.files[i].content.size();
  return r->result.files[i].content.data();
}

tdm_status tdm_result_write(const tdm_result* r, const char* out_dir) {
  return try_([&] { tdmsim::write_outputs(deref(r, "result").result, str(out_dir, "out_dir")); });
}

tdm_status tdm_trap_from_config(const tdm_config* cfg, tdm_trap** out) {
  return try_([&] {
    const auto& c = deref(cfg, "config").cfg;
    tdmsim::require(c.trap.has_value(), tdmsim::ErrorKind::validation,
                    "configuration has no trap section");
    auto* t = new tdm_trap{tdmsim::TrapModel(c.trap->electrodes, c.trap->drive),
                           c.trap->minimize, c.trap->axial_direction};
    deref(out, "out") = t;
  });
}

void tdm_trap_free(tdm_trap* trap) { delete trap; }

tdm_status tdm_trap_total_potential(const tdm_trap* trap, const double r[3], double* value,
                                    double grad[3], double hess[9]) {
  return try_([&] {
    const auto& t = deref(trap, "trap");
    if (r == nullptr) throw bad_argument("r");
    const int order = hess != nullptr ? 2 : (grad != nullptr ? 1 : 0);
    const auto p = t.model.total(tdmsim::Vec3(r[0], r[1], r[2]), order);
    deref(value, "value") = p.value;
    if (grad != nullptr) {
      for (int i = 0; i < 3; ++i) grad[i] = p.gradient(i);
    }
    if (hess != nullptr) {
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) hess[3 * i + j] = p.hessian(i, j);
      }
    }
  });
}

tdm_status tdm_trap_find_minimum(const tdm_trap* trap, const double initial[3],
                                 double minimum[3]) {
  return try_([&] {
    const auto& t = deref(trap, "trap");
    if (initial == nullptr) throw bad_argument("initial");
    if (minimum == nullptr) throw bad_argument("minimum");
    const auto m = tdmsim::find_minimum(t.model, tdmsim::Vec3(initial[0], initial[1], initial[2]),
                                        t.minimize);
    for (int i = 0; i < 3; ++i) minimum[i] = m.position(i);
  });
}

tdm_status tdm_trap_secular(const tdm_trap* trap, const double r[3], double freqs[3],
                            double axes[9], int* axial_index) {
  return try_([&] {
    const auto& t = deref(trap, "trap");
    if (r == nullptr) throw bad_argument("r");
    if (freqs == nullptr) throw bad_argument("freqs");
    const auto s = tdmsim::secular_frequencies(t.model, tdmsim::Vec3(r[0], r[1], r[2]), t.axial);
    for (int i = 0; i < 3; ++i) {
      freqs[i] = s.modes[static_cast<std::size_t>(i)].frequency;
      if (axes != nullptr) {
        for (int j = 0; j < 3; ++j) axes[3 * i + j] = s.modes[static_cast<std::size_t>(i)].axis(j);
      }
    }
    if (axial_index != nullptr) *axial_index = static_cast<int>(s.axial_index);
  });
}

}  // extern "C"
