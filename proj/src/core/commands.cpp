#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>

#include "analysis.hpp"
#include "common.hpp"
#include "io.hpp"

namespace tdmsim {

namespace {

using json = nlohmann::json;

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

std::string report_text(const json& j) { return j.dump(2) + "\n"; }

CommandResult start(const std::string& command, const Config& cfg) {
  CommandResult r;
  r.command = command;
  r.report["command"] = command;
  r.report["config_hash"] = cfg.hash;
  return r;
}

void finish(CommandResult& r) {
  if (!r.warnings.empty()) r.report["warnings"] = r.warnings;
  std::string name = r.command;
  std::replace(name.begin(), name.end(), '-', '_');
  r.files.push_back({name + "_report.json", report_text(r.report)});
}

CompileResult compile_group(const Config& cfg, const WaveformGroup& g) {
  return compile(g.channels, cfg.chain.dac, cfg.chain.gain, cfg.encoding);
}

json schedule_json(const TdmSchedule& s) {
  json j;
  j["n_channels"] = s.n_channels;
  j["bits"] = s.bits;
  j["frame_period"] = s.frame_period;
  j["cycle_period"] = s.cycle_period;
  j["encoding"] = to_string(s.encoding);
  j["select_lines"] = select_line_count(s.n_channels, s.encoding);
  json entries = json::array();
  json words = json::array();
  for (std::size_t k = 0; k < s.entries.size(); ++k) {
    entries.push_back(json::array({s.entries[k].code, s.entries[k].channel}));
    words.push_back(s.select_word(k));
  }
  j["entries"] = std::move(entries);
  j["select_words"] = std::move(words);
  return j;
}

std::string electrode_of(const WaveformGroup& g, int channel) {
  for (std::size_t i = 0; i < g.channels.size(); ++i) {
    if (g.channels[i].channel_id() == channel) return g.electrodes[i];
  }
  return "";
}

const ChannelWaveform& channel_of(const WaveformGroup& g, int channel) {
  for (const auto& w : g.channels) {
    if (w.channel_id() == channel) return w;
  }
  fail(ErrorKind::validation,
       "group '" + g.name + "' has no channel " + std::to_string(channel));
}

CommandResult cmd_compile(const Config& cfg, const RunOptions&) {
  require(!cfg.groups.empty(), ErrorKind::validation, "compile needs waveforms.groups");
  CommandResult r = start("compile", cfg);
  json groups = json::array();
  for (const auto& g : cfg.groups) {
    const CompileResult c = compile_group(cfg, g);
    const auto& s = c.schedule;
    json gj;
    gj["name"] = g.name;
    gj["n_channels"] = s.n_channels;
    gj["encoding"] = to_string(s.encoding);
    gj["select_lines"] = c.report.select_lines;
    gj["frame_period"] = s.frame_period;
    gj["cycle_period"] = s.cycle_period;
    gj["per_channel_rate"] = s.per_channel_rate();
    gj["samples_per_channel"] = s.samples_per_channel();
    gj["entries"] = s.entries.size();
    gj["total_clamp_events"] = c.report.total_clamp_events();
    json chans = json::array();
    for (const auto& st : c.report.channels) {
      chans.push_back({{"channel", st.channel},
                       {"electrode", electrode_of(g, st.channel)},
                       {"samples", st.samples},
                       {"clamp_events", st.clamp_events},
                       {"max_quantization_error", st.max_quantization_error}});
      if (st.clamp_events > 0) {
        r.warnings.push_back("group '" + g.name + "' channel " + std::to_string(st.channel) +
                             ": " + std::to_string(st.clamp_events) +
                             " samples clamped to the DAC range");
      }
    }
    gj["channels"] = std::move(chans);
    gj["schedule_csv"] = "schedule_" + g.name + ".csv";
    gj["schedule_json"] = "schedule_" + g.name + ".json";
    groups.push_back(std::move(gj));
    r.files.push_back({"schedule_" + g.name + ".csv", schedule_to_csv(s)});
    r.files.push_back({"schedule_" + g.name + ".json", report_text(schedule_json(s))});
  }
  r.report["groups"] = std::move(groups);
  finish(r);
  return r;
}

struct SimulatedGroup {
  std::string name;
  TdmSchedule schedule;
  std::size_t clamp_events = 0;
  std::vector<Trace> traces;
  std::size_t substeps = 0;
  double duration = 0.0;
  std::size_t record_stride = 1;
};

SimulatedGroup simulate_schedule(const Config& cfg, const std::string& name, TdmSchedule schedule,
                                 const RunOptions& opts, const NodeMask& nodes,
                                 std::optional<bool> start_settled = std::nullopt,
                                 std::optional<double> duration_override = std::nullopt) {
  SimulatedGroup out;
  out.name = name;
  SimulationOptions so;
  so.sim_dt = opts.sim_dt.value_or(cfg.simulation.sim_dt);
  double duration = opts.duration.value_or(cfg.simulation.duration);
  if (duration_override) duration = *duration_override;
  if (duration <= 0.0) {
    duration = static_cast<double>(schedule.entries.size()) * schedule.frame_period;
  }
  so.duration = duration;
  so.record_stride = opts.record_stride.value_or(cfg.simulation.record_stride);
  so.start_settled = start_settled.value_or(cfg.simulation.start_settled);
  so.nodes = nodes;
  const double dt = so.sim_dt > 0.0 ? so.sim_dt : schedule.frame_period / 100.0;
  out.substeps = substeps_per_slot(schedule.frame_period, dt);
  out.traces = simulate(schedule, cfg.chain, so);
  out.duration = duration;
  out.record_stride = so.record_stride;
  out.schedule = std::move(schedule);
  return out;
}

std::string trace_file_name(const std::string& group, const Trace& t) {
  std::string name = "trace_" + group + "_" + to_string(t.node);
  if (t.channel >= 0) name += "_" + std::to_string(t.channel);
  return name + ".csv";
}

CommandResult cmd_simulate(const Config& cfg, const RunOptions& opts) {
  CommandResult r = start("simulate", cfg);
  std::vector<SimulatedGroup> runs;
  if (!opts.schedule_path.empty()) {
    auto entries = schedule_entries_from_csv(read_file(opts.schedule_path));
    require(!entries.empty(), ErrorKind::validation, "schedule '" + opts.schedule_path + "' is empty");
    int n = 0;
    for (const auto& e : entries) n = std::max(n, e.channel + 1);
    auto schedule = make_schedule(std::move(entries), n, cfg.chain.dac, cfg.encoding);
    runs.push_back(simulate_schedule(cfg, opts.group.empty() ? "external" : opts.group,
                                     std::move(schedule), opts, cfg.simulation.nodes));
  } else {
    require(!cfg.groups.empty(), ErrorKind::validation, "simulate needs waveforms.groups or --schedule");
    for (const auto& g : cfg.groups) {
      if (!opts.group.empty() && g.name != opts.group) continue;
      CompileResult c = compile_group(cfg, g);
      runs.push_back(simulate_schedule(cfg, g.name, std::move(c.schedule), opts, cfg.simulation.nodes));
      runs.back().clamp_events = c.report.total_clamp_events();
    }
    require(!runs.empty(), ErrorKind::validation, "no waveform group named '" + opts.group + "'");
  }

  json groups = json::array();
  for (const auto& run : runs) {
    json gj;
    gj["name"] = run.name;
    gj["n_channels"] = run.schedule.n_channels;
    gj["frame_period"] = run.schedule.frame_period;
    gj["cycle_period"] = run.schedule.cycle_period;
    gj["substeps_per_slot"] = run.substeps;
    gj["sim_dt"] = run.schedule.frame_period / static_cast<double>(run.substeps);
    gj["duration"] = run.duration;
    gj["record_stride"] = run.record_stride;
    gj["clamp_events"] = run.clamp_events;
    json traces = json::array();
    for (const auto& t : run.traces) {
      const std::string file = trace_file_name(run.name, t);
      traces.push_back({{"file", file},
                        {"node", to_string(t.node)},
                        {"channel", t.channel},
                        {"samples", t.samples.size()},
                        {"dt", t.dt},
                        {"final_value", t.samples.back()}});
      r.files.push_back({file, trace_to_csv(t)});
    }
    gj["traces"] = std::move(traces);
    groups.push_back(std::move(gj));
  }
  r.report["groups"] = std::move(groups);
  finish(r);
  return r;
}

const Trace& find_trace(const std::vector<Trace>& traces, Node node, int channel) {
  for (const auto& t : traces) {
    if (t.node == node && t.channel == channel) return t;
  }
  fail(ErrorKind::validation, std::string("no ") + to_string(node) + " trace for channel " +
                                  std::to_string(channel));
}

json fits_json(const Config& cfg, const Trace& trace) {
  const auto& an = cfg.analysis;
  json j = json::object();
  if (an.exponential_window) {
    const auto f = fit_exponential(trace, an.exponential_window->first, an.exponential_window->second);
    j["exponential_fit"] = {{"t_start", an.exponential_window->first},
                            {"t_end", an.exponential_window->second},
                            {"tau", f.tau},
                            {"tau_sigma", f.tau_sigma},
                            {"v0", f.v0},
                            {"samples_used", f.samples_used}};
  }
  if (an.clip_high) {
    const auto f = fit_clipped_sine(trace, *an.clip_high, an.clipped_sine);
    json s = {{"clip_high", *an.clip_high},
              {"guard_fraction", an.clipped_sine.guard_fraction},
              {"offset", f.offset},
              {"amplitude", f.amplitude},
              {"frequency", f.frequency},
              {"phase", f.phase},
              {"peak", f.peak()},
              {"rms_residual", f.rms_residual},
              {"samples_used", f.samples_used}};
    if (std::isfinite(an.clipped_sine.clip_low)) s["clip_low"] = an.clipped_sine.clip_low;
    j["clipped_sine"] = std::move(s);
  }
  if (an.slew) {
    const auto m = measure_slew(trace);
    j["slew"] = {{"slew_rate", m.slew_rate},
                 {"slew_rate_v_per_us", m.slew_rate * 1e-6},
                 {"t10", m.t10},
                 {"t90", m.t90},
                 {"transition_time", std::abs(m.t90 - m.t10)},
                 {"swing", m.swing},
                 {"rising", m.rising}};
  }
  return j;
}

CommandResult cmd_analyze(const Config& cfg, const RunOptions& opts) {
  CommandResult r = start("analyze", cfg);
  const auto& an = cfg.analysis;
  if (!opts.trace_path.empty()) {
    const Trace trace = trace_from_csv(read_file(opts.trace_path));
    r.report["source"] = {{"kind", "csv"},
                          {"node", to_string(trace.node)},
                          {"channel", trace.channel},
                          {"samples", trace.samples.size()},
                          {"dt", trace.dt}};
    r.report["fits"] = fits_json(cfg, trace);
    finish(r);
    return r;
  }

  const std::string group_name = opts.group.empty() ? an.group : opts.group;
  const WaveformGroup& g = cfg.group(group_name);
  CompileResult c = compile_group(cfg, g);
  Node node = an.node;
  if (node == Node::filtered && !cfg.chain.lpf_cutoff) node = Node::amp_out;
  NodeMask mask{false, false, false, false};
  mask.cap = node == Node::cap;
  mask.amp_out = node == Node::amp_out;
  mask.filtered = node == Node::filtered;
  mask.dac_out = node == Node::dac_out;
  const SimulatedGroup run =
      simulate_schedule(cfg, g.name, std::move(c.schedule), opts, mask);

  r.report["source"] = {{"kind", "simulation"},
                        {"group", g.name},
                        {"node", to_string(node)},
                        {"duration", run.duration}};
  json channels = json::array();
  if (node != Node::dac_out) {
    for (const auto& st : c.report.channels) {
      CompareOptions co;
      co.gain = cfg.chain.gain;
      co.cycle_period = run.schedule.cycle_period;
      co.settle_time = an.settle_time;
      co.clamp_events = st.clamp_events;
      const auto rep = compare(channel_of(g, st.channel),
                               find_trace(run.traces, node, st.channel), co);
      channels.push_back({{"channel", st.channel},
                          {"electrode", electrode_of(g, st.channel)},
                          {"max_abs_error", rep.max_abs_error},
                          {"rms_error", rep.rms_error},
                          {"ripple_pp", rep.ripple_pp},
                          {"droop_per_cycle_rel", rep.droop_per_cycle_rel},
                          {"clamp_events", rep.clamp_events},
                          {"samples_compared", rep.samples_compared}});
    }
  }
  r.report["reconstruction"] = std::move(channels);
  const int fit_channel = node == Node::dac_out ? -1 : an.channel;
  const Trace& fit_trace = find_trace(run.traces, node, fit_channel);
  r.report["fit_channel"] = fit_channel;
  r.report["fits"] = fits_json(cfg, fit_trace);
  finish(r);
  return r;
}

CommandResult cmd_tolerances(const Config& cfg, const RunOptions& opts) {
  CommandResult r = start("tolerances", cfg);
  const auto& t = cfg.tolerances;
  const std::uint64_t seed = opts.seed.value_or(cfg.seed);
  const auto res =
      propagate_tolerances(t.v_in_low, t.v_in_high, cfg.chain.gain, t.rel_tol, t.n_samples, seed);
  r.report["v_in_low"] = t.v_in_low;
  r.report["v_in_high"] = t.v_in_high;
  r.report["rel_tol"] = t.rel_tol;
  r.report["n_samples"] = res.n_samples;
  r.report["seed"] = seed;
  r.report["nominal_low"] = amplifier(t.v_in_low, cfg.chain.gain);
  r.report["nominal_high"] = amplifier(t.v_in_high, cfg.chain.gain);
  r.report["v_low_mean"] = res.v_low_mean;
  r.report["v_low_sigma"] = res.v_low_sigma;
  r.report["v_high_mean"] = res.v_high_mean;
  r.report["v_high_sigma"] = res.v_high_sigma;
  r.report["summary"] = format_with_uncertainty(res.v_low_mean, res.v_low_sigma) + " V to " +
                        format_with_uncertainty(res.v_high_mean, res.v_high_sigma) + " V";
  finish(r);
  return r;
}

CommandResult cmd_feasibility(const Config& cfg, const RunOptions&) {
  CommandResult r = start("feasibility", cfg);
  const auto& f = cfg.feasibility;
  SlotBudget b;
  b.settling_time = f.settling_time;
  b.switch_dead_time = f.switch_dead_time;
  b.charge_tau = cfg.chain.charge_tau();
  b.charge_settle_multiplier = f.charge_settle_multiplier;
  const auto n_max = max_multiplexing_factor(f.per_channel_rate, b);
  r.report["per_channel_rate"] = f.per_channel_rate;
  r.report["settling_time"] = b.settling_time;
  r.report["switch_dead_time"] = b.switch_dead_time;
  r.report["charge_tau"] = b.charge_tau;
  r.report["charge_settle_multiplier"] = b.charge_settle_multiplier;
  r.report["slot_time"] = b.settling_time + b.switch_dead_time + b.charge_settle_multiplier * b.charge_tau;
  r.report["charge_fraction"] = -std::expm1(-b.charge_settle_multiplier);
  r.report["n_max"] = n_max;
  r.report["required_update_rate"] = static_cast<double>(n_max) * f.per_channel_rate;
  r.report["select_lines_one_hot"] = n_max >= 1 ? select_line_count(static_cast<int>(std::min<std::int64_t>(n_max, 1 << 30)), SelectEncoding::one_hot) : 0;
  r.report["select_lines_binary"] = n_max >= 1 ? select_line_count(static_cast<int>(std::min<std::int64_t>(n_max, 1 << 30)), SelectEncoding::binary) : 0;
  finish(r);
  return r;
}

const TrapSection& need_trap(const Config& cfg) {
  require(cfg.trap.has_value(), ErrorKind::validation, "configuration has no trap section");
  return *cfg.trap;
}

json minimum_json(const TrapModel& model, const MinimumResult& m) {
  const double q = model.drive().ion_charge;
  return {{"position", vec_json(m.position)},
          {"height", m.position.z()},
          {"potential_ev", m.value / q},
          {"pseudopotential_ev", model.pseudopotential(m.position, 0).value / q},
          {"gradient_norm", m.gradient_norm},
          {"iterations", m.iterations}};
}

CommandResult cmd_trap_solve(const Config& cfg, const RunOptions&) {
  const TrapSection& t = need_trap(cfg);
  CommandResult r = start("trap-solve", cfg);
  const TrapModel model(t.electrodes, t.drive);
  const MinimumResult m = find_minimum(model, t.initial_guess, t.minimize);
  const GridScanResult grid =
      grid_scan_minimum([&](const Vec3& p) { return model.total_value(p); }, t.grid);
  const SecularResult sec = secular_frequencies(model, m.position, t.axial_direction);

  r.report["minimum"] = minimum_json(model, m);
  const Vec3 diff = (grid.position - m.position).cwiseAbs();
  r.report["grid_scan"] = {{"position", vec_json(grid.position)},
                           {"cell", vec_json(grid.cell)},
                           {"offset", vec_json(diff)},
                           {"agrees_within_cell", (diff.array() <= grid.cell.array()).all()}};
  json modes = json::array();
  for (const auto& mode : sec.modes) {
    modes.push_back({{"frequency", mode.frequency}, {"axis", vec_json(mode.axis)}});
  }
  r.report["secular"] = {{"modes", std::move(modes)},
                         {"axial_index", sec.axial_index},
                         {"axial_frequency", sec.axial_frequency()},
                         {"positive_definite", true}};
  finish(r);
  return r;
}

std::string trajectory_csv(const MotionResult& m) {
  std::string out = "time,x,y,z,vx,vy,vz\n";
  for (const auto& s : m.samples) {
    out += format_double(s.t);
    for (int i = 0; i < 3; ++i) out += "," + format_double(s.position(i));
    for (int i = 0; i < 3; ++i) out += "," + format_double(s.velocity(i));
    out += '\n';
  }
  return out;
}

json energy_stats(const MotionResult& m, double q) {
  double lo = INFINITY, hi = -INFINITY, sum = 0.0;
  for (double e : m.energy) {
    lo = std::min(lo, e);
    hi = std::max(hi, e);
    sum += e;
  }
  const double mean = m.energy.empty() ? 0.0 : sum / static_cast<double>(m.energy.size());
  return {{"mean_ev", mean / q}, {"min_ev", lo / q}, {"max_ev", hi / q},
          {"periods", m.energy.size()}, {"steps", m.steps}, {"dt", m.dt_used}};
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

CommandResult cmd_trap_dynamics(const Config& cfg, const RunOptions& opts) {
  const TrapSection& t = need_trap(cfg);
  CommandResult r = start("trap-dynamics", cfg);
  const TrapModel model(t.electrodes, t.drive);
  const auto& dy = t.dynamics;
  const MinimumResult m = find_minimum(model, t.initial_guess, t.minimize);
  const Vec3 r0 = micromotion_start(model, m.position) + dy.initial_offset;
  const double q = t.drive.ion_charge;

  MotionOptions mo;
  mo.t_end = opts.duration.value_or(dy.t_end);
  mo.dt = dy.dt > 0.0 ? dy.dt : 1.0 / t.drive.rf_frequency / 20.0;
  mo.record_stride = dy.record_stride;
  mo.bounding_box = dy.bounding_box;
  mo.energy_reference = m.value;

  // Reference run: the configured DC voltages held constant.
  const MotionResult constant =
      integrate_motion(model, VoltageProgram::from_drive(t.drive), r0, Vec3::Zero(), mo);

  // Driven run: channel traces from the chain simulation replace the DC
  // voltages of the electrodes they are wired to.
  VoltageProgram program = VoltageProgram::from_drive(t.drive);
  json driven = json::array();
  double min_cycle = 0.0;
  Node node = dy.voltage_source;
  if (node == Node::filtered && !cfg.chain.lpf_cutoff) node = Node::amp_out;
  require(node != Node::dac_out, ErrorKind::validation,
          "trap.dynamics.voltage_source must be cap, amp_out or filtered");
  NodeMask mask{false, false, false, false};
  mask.cap = node == Node::cap;
  mask.amp_out = node == Node::amp_out;
  mask.filtered = node == Node::filtered;
  for (const auto& g : cfg.groups) {
    CompileResult c = compile_group(cfg, g);
    const double cycle = c.schedule.cycle_period;
    // Cover t_end plus one cycle so interpolation never runs off the end.
    const SimulatedGroup run = simulate_schedule(cfg, g.name, std::move(c.schedule), opts, mask,
                                                 true, mo.t_end + cycle);
    min_cycle = min_cycle == 0.0 ? cycle : std::min(min_cycle, cycle);
    for (std::size_t i = 0; i < g.channels.size(); ++i) {
      const std::string& el = g.electrodes[i];
      if (el.empty()) continue;
      require(t.drive.dc_voltages.count(el) != 0, ErrorKind::validation,
              "group '" + g.name + "' drives unknown electrode '" + el + "'");
      Trace tr = find_trace(run.traces, node, g.channels[i].channel_id());
      driven.push_back({{"electrode", el},
                        {"group", g.name},
                        {"channel", g.channels[i].channel_id()},
                        {"initial_volts", tr.samples.front()}});
      program.set_trace(el, std::move(tr));
    }
  }
  MotionOptions mo_driven = mo;
  mo_driven.voltage_period = min_cycle;
  // The voltage period only tightens dt when it is the shorter one.
  if (min_cycle > 0.0 && mo_driven.dt > min_cycle / 20.0) mo_driven.dt = min_cycle / 20.0;
  const MotionResult simulated = integrate_motion(model, program, r0, Vec3::Zero(), mo_driven);

  const double e_const = mean_of(constant.energy);
  const double e_sim = mean_of(simulated.energy);
  r.report["minimum"] = minimum_json(model, m);
  r.report["initial_position"] = vec_json(r0);
  r.report["initial_offset"] = vec_json(dy.initial_offset);
  r.report["t_end"] = mo.t_end;
  r.report["voltage_source"] = to_string(node);
  r.report["driven_electrodes"] = std::move(driven);
  r.report["constant_run"] = energy_stats(constant, q);
  r.report["simulated_run"] = energy_stats(simulated, q);
  r.report["bounded"] = true;
  r.report["energy_relative_difference"] =
      e_const != 0.0 ? std::abs(e_sim - e_const) / std::abs(e_const) : 0.0;

  r.files.push_back({"trajectory_constant.csv", trajectory_csv(constant)});
  r.files.push_back({std::string("trajectory_") + to_string(node) + ".csv", trajectory_csv(simulated)});
  std::string energy = "time_constant,energy_constant_ev,time_simulated,energy_simulated_ev\n";
  const std::size_t rows = std::max(constant.energy.size(), simulated.energy.size());
  for (std::size_t i = 0; i < rows; ++i) {
    if (i < constant.energy.size()) {
      energy += format_double(constant.energy_time[i]) + "," + format_double(constant.energy[i] / q);
    } else {
      energy += ",";
    }
    energy += ",";
    if (i < simulated.energy.size()) {
      energy += format_double(simulated.energy_time[i]) + "," + format_double(simulated.energy[i] / q);
    } else {
      energy += ",";
    }
    energy += '\n';
  }
  r.files.push_back({"energy.csv", std::move(energy)});
  finish(r);
  return r;
}

CommandResult cmd_field_map(const Config& cfg, const RunOptions&) {
  const TrapSection& t = need_trap(cfg);
  require(!t.field_map.xs.empty(), ErrorKind::validation, "trap.field_map is not configured");
  CommandResult r = start("field-map", cfg);
  const TrapModel model(t.electrodes, t.drive);
  const auto rows = field_map(model, t.field_map.xs, t.field_map.ys, t.field_map.zs);
  std::string csv = "x,y,z,pseudo_V,dc_V,total_V\n";
  for (const auto& row : rows) {
    csv += format_double(row.position.x()) + "," + format_double(row.position.y()) + "," +
           format_double(row.position.z()) + "," + format_double(row.pseudo) + "," +
           format_double(row.dc) + "," + format_double(row.total) + "\n";
  }
  r.files.push_back({"field_map.csv", std::move(csv)});
  r.report["points"] = rows.size();
  r.report["file"] = "field_map.csv";
  finish(r);
  return r;
}

using Handler = std::function<CommandResult(const Config&, const RunOptions&)>;

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> h = {
      {"compile", cmd_compile},         {"simulate", cmd_simulate},
      {"analyze", cmd_analyze},         {"tolerances", cmd_tolerances},
      {"feasibility", cmd_feasibility}, {"trap-solve", cmd_trap_solve},
      {"trap-dynamics", cmd_trap_dynamics}, {"field-map", cmd_field_map},
  };
  return h;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"compile",    "simulate",   "analyze",
                                                 "tolerances", "feasibility", "trap-solve",
                                                 "trap-dynamics", "field-map"};
  return names;
}

CommandResult run_command(const std::string& name, const Config& cfg, const RunOptions& opts) {
  const auto it = handlers().find(name);
  require(it != handlers().end(), ErrorKind::validation, "unknown command '" + name + "'");
  return it->second(cfg, opts);
}

void write_outputs(const CommandResult& result, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(!ec && fs::is_directory(out_dir), ErrorKind::io,
          "cannot create output directory '" + out_dir + "'");
  for (const auto& f : result.files) {
    write_file_atomic((fs::path(out_dir) / f.name).string(), f.content);
  }
}

std::string format_with_uncertainty(double value, double sigma) {
  char buf[64];
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    std::snprintf(buf, sizeof buf, "%g", value);
    return buf;
  }
  int decimals = -static_cast<int>(std::floor(std::log10(sigma)));
  long digit = std::lround(sigma * std::pow(10.0, decimals));
  if (digit >= 10) {
    --decimals;
    digit = std::lround(sigma * std::pow(10.0, decimals));
  }
  if (decimals >= 0) {
    std::snprintf(buf, sizeof buf, "%.*f(%ld)", decimals, value, digit);
  } else {
    // Uncertainty above one unit: show it in value units.
    const double scale = std::pow(10.0, -decimals);
    std::snprintf(buf, sizeof buf, "%.0f(%.0f)", std::round(value / scale) * scale,
                  static_cast<double>(digit) * scale);
  }
  return buf;
}

}  // namespace tdmsim
