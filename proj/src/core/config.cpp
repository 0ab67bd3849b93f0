#include "config.hpp"

#include <cctype>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "common.hpp"
#include "io.hpp"

namespace tdmsim {

namespace {

using json = nlohmann::json;

class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    require(j_.is_object(), ErrorKind::validation, where() + " must be an object");
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  Section child(const char* key) const { return Section(at(key), path_ + "." + key); }

  const json& at(const char* key) const {
    require(j_.contains(key), ErrorKind::validation, "missing " + path_ + "." + key);
    return j_.at(key);
  }

  double number(const char* key) const {
    const json& v = at(key);
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    }
    require(v.is_number(), ErrorKind::validation, path_ + "." + key + " must be a number");
    return v.get<double>();
  }

  double number(const char* key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  long long integer(const char* key, long long fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    require(v.is_number_integer(), ErrorKind::validation, path_ + "." + key + " must be an integer");
    return v.get<long long>();
  }

  std::string text(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    require(v.is_string(), ErrorKind::validation, path_ + "." + key + " must be a string");
    return v.get<std::string>();
  }

  bool flag(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    require(v.is_boolean(), ErrorKind::validation, path_ + "." + key + " must be a boolean");
    return v.get<bool>();
  }

  std::vector<double> numbers(const char* key) const {
    const json& v = at(key);
    require(v.is_array(), ErrorKind::validation, path_ + "." + key + " must be an array");
    std::vector<double> out;
    for (const auto& e : v) {
      require(e.is_number(), ErrorKind::validation, path_ + "." + key + " must hold numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  Vec3 vec3(const char* key, const Vec3& fallback) const {
    if (!has(key)) return fallback;
    const auto v = numbers(key);
    require(v.size() == 3, ErrorKind::validation, path_ + "." + key + " must have 3 entries");
    return Vec3(v[0], v[1], v[2]);
  }

  // [[x0, x1], [y0, y1], [z0, z1]]
  Box box(const char* key, const Box& fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    const std::string msg = path_ + "." + key + " must be [[x0,x1],[y0,y1],[z0,z1]]";
    require(v.is_array() && v.size() == 3, ErrorKind::validation, msg);
    Box b;
    for (int i = 0; i < 3; ++i) {
      const json& r = v[static_cast<std::size_t>(i)];
      require(r.is_array() && r.size() == 2 && r[0].is_number() && r[1].is_number(),
              ErrorKind::validation, msg);
      b.lo(i) = r[0].get<double>();
      b.hi(i) = r[1].get<double>();
      require(b.hi(i) > b.lo(i), ErrorKind::validation, msg + " with hi > lo");
    }
    return b;
  }

  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }
  std::string where() const { return path_; }

 private:
  const json& j_;
  std::string path_;
};

Segment parse_segment(const Section& s) {
  const std::string kind = s.text("kind", "");
  const double duration = s.number("duration");
  if (kind == "constant") return Segment::constant(s.number("level"), duration);
  if (kind == "ramp") return Segment::ramp(s.number("start"), s.number("end"), duration);
  if (kind == "sine" || kind == "sinusoid") {
    return Segment::sinusoid(s.number("offset"), s.number("amplitude"), s.number("frequency"),
                             s.number("phase", 0.0), duration);
  }
  fail(ErrorKind::validation, s.path() + ".kind must be constant, ramp or sine");
}

WaveformGroup parse_group(const Section& s) {
  WaveformGroup g;
  g.name = s.text("name", "");
  require(!g.name.empty(), ErrorKind::validation, s.path() + ".name is required");
  for (char c : g.name) {
    require(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-',
            ErrorKind::validation, s.path() + ".name may only use [A-Za-z0-9_-]");
  }
  const json& channels = s.at("channels");
  require(channels.is_array(), ErrorKind::validation, s.path() + ".channels must be an array");
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const Section c(channels[i], s.path() + ".channels[" + std::to_string(i) + "]");
    const auto id = c.integer("channel_id", -1);
    require(id >= 0, ErrorKind::validation, c.path() + ".channel_id must be >= 0");
    const json& segs = c.at("segments");
    require(segs.is_array(), ErrorKind::validation, c.path() + ".segments must be an array");
    std::vector<Segment> segments;
    for (std::size_t k = 0; k < segs.size(); ++k) {
      segments.push_back(parse_segment(Section(segs[k], c.path() + ".segments[" + std::to_string(k) + "]")));
    }
    g.channels.emplace_back(static_cast<int>(id), std::move(segments));
    g.electrodes.push_back(c.text("electrode", ""));
  }
  return g;
}

std::vector<double> axis_values(const Section& s, const char* key) {
  const json& v = s.at(key);
  if (v.is_array()) return s.numbers(key);
  const Section r = s.child(key);
  const double a = r.number("start"), b = r.number("stop");
  const auto n = r.integer("count", 2);
  require(n >= 1, ErrorKind::validation, r.path() + ".count must be >= 1");
  std::vector<double> out;
  for (long long i = 0; i < n; ++i) {
    out.push_back(n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return out;
}

TrapSection parse_trap(const Section& s) {
  TrapSection t;
  const json& els = s.at("electrodes");
  require(els.is_array(), ErrorKind::validation, "trap.electrodes must be an array");
  for (std::size_t i = 0; i < els.size(); ++i) {
    const Section e(els[i], "trap.electrodes[" + std::to_string(i) + "]");
    Electrode el;
    el.id = e.text("id", "");
    require(!el.id.empty(), ErrorKind::validation, e.path() + ".id is required");
    el.role = parse_electrode_role(e.text("role", ""));
    const json& rects = e.at("rects");
    require(rects.is_array(), ErrorKind::validation, e.path() + ".rects must be an array");
    for (const auto& r : rects) {
      require(r.is_array() && r.size() == 4, ErrorKind::validation,
              e.path() + ".rects entries must be [x_min, x_max, y_min, y_max]");
      el.rects.push_back({r[0].get<double>(), r[1].get<double>(), r[2].get<double>(),
                          r[3].get<double>()});
    }
    t.electrodes.push_back(std::move(el));
  }

  if (s.has("ion")) {
    const Section ion = s.child("ion");
    const double charge_e = ion.number("charge_e", 1.0);
    t.drive.ion_charge = charge_e * constants::elementary_charge;
    if (ion.has("mass_kg")) {
      t.drive.ion_mass = ion.number("mass_kg");
    } else {
      // Neutral-atom mass less the removed electrons.
      t.drive.ion_mass = ion.number("mass_amu", constants::calcium40_amu) *
                             constants::atomic_mass_unit -
                         charge_e * constants::electron_mass;
    }
  }
  const Section rf = s.child("rf");
  t.drive.rf_peak_to_peak = rf.number("peak_to_peak");
  t.drive.rf_frequency = rf.number("frequency");
  t.drive.rf_phase = rf.number("phase", 0.0);
  if (s.has("dc_voltages")) {
    const json& dc = s.at("dc_voltages");
    require(dc.is_object(), ErrorKind::validation, "trap.dc_voltages must be an object");
    for (const auto& [id, v] : dc.items()) {
      require(v.is_number(), ErrorKind::validation, "trap.dc_voltages." + id + " must be a number");
      t.drive.dc_voltages[id] = v.get<double>();
    }
  }
  t.axial_direction = s.vec3("axial_direction", t.axial_direction);
  require(t.axial_direction.norm() > 0.0, ErrorKind::validation,
          "trap.axial_direction must be non-zero");
  t.initial_guess = s.vec3("initial_guess", t.initial_guess);

  if (s.has("search")) {
    const Section m = s.child("search");
    t.minimize.gradient_tolerance = m.number("gradient_tolerance", t.minimize.gradient_tolerance);
    t.minimize.max_iterations = static_cast<int>(m.integer("max_iterations", t.minimize.max_iterations));
    t.minimize.min_height = m.number("min_height", t.minimize.min_height);
    t.minimize.max_step = m.number("max_step", t.minimize.max_step);
    t.minimize.bounds = m.box("bounds", t.minimize.bounds);
  }
  if (s.has("grid_scan")) {
    const Section g = s.child("grid_scan");
    t.grid.box = g.box("box", t.grid.box);
    t.grid.points_per_axis = static_cast<int>(g.integer("points_per_axis", t.grid.points_per_axis));
    t.grid.levels = static_cast<int>(g.integer("levels", t.grid.levels));
    t.grid.zoom_cells = static_cast<int>(g.integer("zoom_cells", t.grid.zoom_cells));
  } else {
    t.grid.box = t.minimize.bounds;
  }
  if (s.has("field_map")) {
    const Section f = s.child("field_map");
    t.field_map.xs = axis_values(f, "x");
    t.field_map.ys = axis_values(f, "y");
    t.field_map.zs = axis_values(f, "z");
  }
  if (s.has("dynamics")) {
    const Section d = s.child("dynamics");
    auto& dy = t.dynamics;
    dy.t_end = d.number("t_end", dy.t_end);
    dy.dt = d.number("dt", dy.dt);
    dy.record_stride = static_cast<std::size_t>(d.integer("record_stride", static_cast<long long>(dy.record_stride)));
    dy.voltage_source = parse_node(d.text("voltage_source", to_string(dy.voltage_source)));
    dy.bounding_box = d.box("bounding_box", t.minimize.bounds);
    dy.initial_offset = d.vec3("initial_offset", dy.initial_offset);
  } else {
    t.dynamics.bounding_box = t.minimize.bounds;
  }
  return t;
}

}  // namespace

const WaveformGroup& Config::group(const std::string& name) const {
  require(!groups.empty(), ErrorKind::validation, "configuration has no waveform groups");
  if (name.empty()) return groups.front();
  for (const auto& g : groups) {
    if (g.name == name) return g;
  }
  fail(ErrorKind::validation, "no waveform group named '" + name + "'");
}

Config parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::parse, std::string("configuration is not valid JSON: ") + e.what());
  }
  Config cfg;
  cfg.hash = sha256_hex(text);
  try {
    const Section root(doc, "config");
    cfg.seed = static_cast<std::uint64_t>(root.integer("seed", 0));

    if (root.has("dac")) {
      const Section d = root.child("dac");
      auto& dac = cfg.chain.dac;
      dac.bits = static_cast<int>(d.integer("bits", dac.bits));
      dac.input_range_low = d.number("input_range_low", dac.input_range_low);
      dac.input_range_high = d.number("input_range_high", dac.input_range_high);
      dac.update_rate = d.number("update_rate", dac.update_rate);
      dac.settling_time = d.number("settling_time", dac.settling_time);
    }
    if (root.has("gain")) {
      const Section g = root.child("gain");
      auto& gain = cfg.chain.gain;
      gain.r0 = g.number("r0", gain.r0);
      gain.r1 = g.number("r1", gain.r1);
      gain.vref = g.number("vref", gain.vref);
    }
    if (root.has("chain")) {
      const Section c = root.child("chain");
      auto& p = cfg.chain;
      p.r_on = c.number("r_on", p.r_on);
      p.c_hold = c.number("c_hold", p.c_hold);
      p.tau_hold = c.number("tau_hold", p.tau_hold);
      p.input_offset_low = c.number("input_offset_low", p.input_offset_low);
      p.input_offset_high = c.number("input_offset_high", p.input_offset_high);
      p.clip_low = c.number("clip_low", p.clip_low);
      p.clip_high = c.number("clip_high", p.clip_high);
      p.slew_rate = c.number("slew_rate", p.slew_rate);
      if (c.raw().contains("lpf_cutoff")) {
        if (c.raw().at("lpf_cutoff").is_null()) {
          p.lpf_cutoff.reset();
        } else {
          p.lpf_cutoff = c.number("lpf_cutoff");
        }
      }
    }
    cfg.chain.dac.validate();
    cfg.chain.gain.validate();
    cfg.chain.validate();
    cfg.encoding = parse_select_encoding(root.text("select_encoding", "one-hot"));

    if (root.has("waveforms")) {
      const Section w = root.child("waveforms");
      const json& groups = w.at("groups");
      require(groups.is_array(), ErrorKind::validation, "waveforms.groups must be an array");
      for (std::size_t i = 0; i < groups.size(); ++i) {
        cfg.groups.push_back(
            parse_group(Section(groups[i], "waveforms.groups[" + std::to_string(i) + "]")));
        for (std::size_t k = 0; k < i; ++k) {
          require(cfg.groups[k].name != cfg.groups[i].name, ErrorKind::validation,
                  "duplicate waveform group '" + cfg.groups[i].name + "'");
        }
      }
    }

    if (root.has("simulation")) {
      const Section s = root.child("simulation");
      auto& sim = cfg.simulation;
      sim.duration = s.number("duration", sim.duration);
      sim.sim_dt = s.number("sim_dt", sim.sim_dt);
      const auto stride = s.integer("record_stride", 1);
      require(stride >= 1, ErrorKind::validation, "simulation.record_stride must be >= 1");
      sim.record_stride = static_cast<std::size_t>(stride);
      sim.start_settled = s.flag("start_settled", sim.start_settled);
      if (s.has("nodes")) {
        const json& nodes = s.at("nodes");
        require(nodes.is_array(), ErrorKind::validation, "simulation.nodes must be an array");
        sim.nodes = NodeMask{false, false, false, false};
        for (const auto& n : nodes) {
          require(n.is_string(), ErrorKind::validation, "simulation.nodes must hold strings");
          switch (parse_node(n.get<std::string>())) {
            case Node::dac_out: sim.nodes.dac_out = true; break;
            case Node::cap: sim.nodes.cap = true; break;
            case Node::amp_out: sim.nodes.amp_out = true; break;
            case Node::filtered: sim.nodes.filtered = true; break;
          }
        }
      }
    }

    if (root.has("analysis")) {
      const Section a = root.child("analysis");
      auto& an = cfg.analysis;
      an.group = a.text("group", "");
      an.channel = static_cast<int>(a.integer("channel", 0));
      an.node = parse_node(a.text("node", "amp_out"));
      an.settle_time = a.number("settle_time", 0.0);
      if (a.has("exponential_fit")) {
        const Section e = a.child("exponential_fit");
        an.exponential_window = std::make_pair(e.number("t_start"), e.number("t_end"));
      }
      if (a.has("clipped_sine")) {
        const Section c = a.child("clipped_sine");
        an.clip_high = c.number("clip_high", cfg.chain.clip_high);
        an.clipped_sine.guard_fraction = c.number("guard_fraction", an.clipped_sine.guard_fraction);
        an.clipped_sine.clip_low = c.number("clip_low", an.clipped_sine.clip_low);
      }
      an.slew = a.has("slew") ? a.flag("slew", false) : false;
    }

    if (root.has("tolerances")) {
      const Section t = root.child("tolerances");
      auto& tol = cfg.tolerances;
      tol.v_in_low = t.number("v_in_low", tol.v_in_low);
      tol.v_in_high = t.number("v_in_high", tol.v_in_high);
      tol.rel_tol = t.number("rel_tol", tol.rel_tol);
      const auto n = t.integer("n_samples", static_cast<long long>(tol.n_samples));
      require(n > 0, ErrorKind::validation, "tolerances.n_samples must be > 0");
      tol.n_samples = static_cast<std::size_t>(n);
    }

    if (root.has("feasibility")) {
      const Section f = root.child("feasibility");
      auto& fe = cfg.feasibility;
      fe.per_channel_rate = f.number("per_channel_rate", fe.per_channel_rate);
      fe.settling_time = f.number("settling_time", fe.settling_time);
      fe.switch_dead_time = f.number("switch_dead_time", fe.switch_dead_time);
      fe.charge_settle_multiplier = f.number("charge_settle_multiplier", fe.charge_settle_multiplier);
    }

    if (root.has("trap")) cfg.trap = parse_trap(root.child("trap"));
  } catch (const json::exception& e) {
    fail(ErrorKind::validation, std::string("configuration: ") + e.what());
  }
  return cfg;
}

Config load_config(const std::string& path) { return parse_config(read_file(path)); }

}  // namespace tdmsim
