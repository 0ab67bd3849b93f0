#include "trap_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace tdmsim {

const char* to_string(ElectrodeRole r) noexcept {
  switch (r) {
    case ElectrodeRole::rf: return "rf";
    case ElectrodeRole::center_dc: return "center_dc";
    case ElectrodeRole::side_dc: return "side_dc";
  }
  return "?";
}

ElectrodeRole parse_electrode_role(const std::string& s) {
  if (s == "rf") return ElectrodeRole::rf;
  if (s == "center_dc") return ElectrodeRole::center_dc;
  if (s == "side_dc") return ElectrodeRole::side_dc;
  fail(ErrorKind::validation, "unknown electrode role '" + s + "'");
}

namespace {

bool rects_overlap(const Rect& a, const Rect& b) {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  return w > 0.0 && h > 0.0;
}

}  // namespace

void validate_geometry(const std::vector<Electrode>& electrodes) {
  require(!electrodes.empty(), ErrorKind::validation, "trap has no electrodes");
  std::set<std::string> ids;
  std::vector<std::pair<std::size_t, Rect>> all;
  for (std::size_t i = 0; i < electrodes.size(); ++i) {
    const auto& e = electrodes[i];
    require(ids.insert(e.id).second, ErrorKind::validation, "duplicate electrode id '" + e.id + "'");
    require(!e.rects.empty(), ErrorKind::validation, "electrode '" + e.id + "' has no rectangles");
    for (const auto& r : e.rects) {
      require(r.x_max > r.x_min && r.y_max > r.y_min, ErrorKind::validation,
              "electrode '" + e.id + "' has a rectangle with non-positive area");
      all.emplace_back(i, r);
    }
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      require(!rects_overlap(all[i].second, all[j].second), ErrorKind::validation,
              "electrodes '" + electrodes[all[i].first].id + "' and '" +
                  electrodes[all[j].first].id + "' overlap");
    }
  }
}

void TrapDrive::validate() const {
  require(std::isfinite(rf_frequency) && rf_frequency > 0.0, ErrorKind::validation,
          "rf_frequency must be > 0");
  require(std::isfinite(rf_peak_to_peak) && rf_peak_to_peak >= 0.0, ErrorKind::validation,
          "rf_peak_to_peak must be >= 0");
  require(std::isfinite(ion_mass) && ion_mass > 0.0, ErrorKind::validation,
          "ion_mass must be > 0");
  require(std::isfinite(ion_charge), ErrorKind::validation, "ion_charge must be finite");
}

BasisDerivatives basis_derivatives(const Electrode& e, const Vec3& r, int order) {
  BasisDerivatives d;
  for (const auto& rect : e.rects) accumulate_rect_basis(rect, r, order, d);
  return d;
}

double basis_potential(const Electrode& e, const Vec3& r) {
  return basis_derivatives(e, r, 0).value;
}

TrapModel::TrapModel(std::vector<Electrode> electrodes, TrapDrive drive)
    : electrodes_(std::move(electrodes)), drive_(std::move(drive)) {
  validate_geometry(electrodes_);
  drive_.validate();
  for (std::size_t i = 0; i < electrodes_.size(); ++i) {
    const auto& e = electrodes_[i];
    if (e.role == ElectrodeRole::rf) {
      rf_.push_back(i);
      continue;
    }
    const auto it = drive_.dc_voltages.find(e.id);
    require(it != drive_.dc_voltages.end(), ErrorKind::validation,
            "no DC voltage for electrode '" + e.id + "'");
    require(std::isfinite(it->second), ErrorKind::validation,
            "DC voltage for electrode '" + e.id + "' is not finite");
    dc_.push_back(i);
    dc_volts_.push_back(it->second);
  }
}

Vec3 TrapModel::rf_unit_gradient(const Vec3& r) const {
  BasisDerivatives d;
  for (std::size_t i : rf_) {
    for (const auto& rect : electrodes_[i].rects) accumulate_rect_basis(rect, r, 1, d);
  }
  return d.gradient;
}

PotentialPoint TrapModel::pseudopotential(const Vec3& r, int order) const {
  require(r.z() > 0.0, ErrorKind::domain, "pseudopotential needs z > 0");
  PotentialPoint p;
  p.position = r;
  if (rf_.empty() || drive_.rf_peak_to_peak == 0.0) return p;
  BasisDerivatives d;
  const int basis_order = std::min(order, 2) + 1;
  for (std::size_t i : rf_) {
    for (const auto& rect : electrodes_[i].rects) accumulate_rect_basis(rect, r, basis_order, d);
  }
  const double q = drive_.ion_charge;
  const double v = drive_.rf_amplitude();
  const double w = drive_.omega();
  const double c = q * q * v * v / (4.0 * drive_.ion_mass * w * w);
  const Vec3& g = d.gradient;
  p.value = c * g.squaredNorm();
  if (order >= 1) p.gradient = 2.0 * c * (d.hessian * g);
  if (order >= 2) {
    Mat3 h = d.hessian * d.hessian;
    for (int k = 0; k < 3; ++k) h += g(k) * d.third[static_cast<std::size_t>(k)];
    p.hessian = 2.0 * c * h;
  }
  return p;
}

PotentialPoint TrapModel::dc_potential(const Vec3& r, int order) const {
  require(r.z() > 0.0, ErrorKind::domain, "potential needs z > 0");
  PotentialPoint p;
  p.position = r;
  const double q = drive_.ion_charge;
  const int basis_order = std::min(order, 2);
  for (std::size_t k = 0; k < dc_.size(); ++k) {
    if (dc_volts_[k] == 0.0) continue;
    const BasisDerivatives d = basis_derivatives(electrodes_[dc_[k]], r, basis_order);
    const double s = q * dc_volts_[k];
    p.value += s * d.value;
    if (order >= 1) p.gradient += s * d.gradient;
    if (order >= 2) p.hessian += s * d.hessian;
  }
  return p;
}

PotentialPoint TrapModel::total(const Vec3& r, int order) const {
  PotentialPoint p = pseudopotential(r, order);
  const PotentialPoint d = dc_potential(r, order);
  p.value += d.value;
  p.gradient += d.gradient;
  p.hessian += d.hessian;
  return p;
}

MinimumResult find_minimum(const PotentialFn& potential, const Vec3& initial,
                           const MinimizeOptions& o) {
  auto inside = [&](const Vec3& x) { return x.z() > o.min_height && o.bounds.contains(x); };
  require(initial.z() > 0.0, ErrorKind::domain, "initial guess needs z > 0");
  require(inside(initial), ErrorKind::no_trap, "initial guess lies outside the search domain");

  Vec3 x = initial;
  PotentialPoint p = potential(x);
  for (int it = 0; it < o.max_iterations; ++it) {
    const double gnorm = p.gradient.norm();
    if (gnorm < o.gradient_tolerance) {
      return {x, p.value, gnorm, it};
    }
    const Eigen::LLT<Mat3> llt(p.hessian);
    const bool newton = llt.info() == Eigen::Success;
    Vec3 d = newton ? Vec3(-llt.solve(p.gradient)) : Vec3(-p.gradient / gnorm * o.max_step);
    if (d.norm() > o.max_step) d *= o.max_step / d.norm();
    const double slope = p.gradient.dot(d);

    bool accepted = false;
    double alpha = 1.0;
    for (int k = 0; k < 60 && !accepted; ++k, alpha *= 0.5) {
      const Vec3 trial = x + alpha * d;
      if (!inside(trial)) {
        fail(ErrorKind::no_trap, "minimum search left the domain above the electrode plane");
      }
      PotentialPoint pt = potential(trial);
      const bool armijo = pt.value <= p.value + 1e-4 * alpha * slope;
      // Near convergence the energy change drops below rounding; a Newton
      // step that shrinks the gradient is then accepted.
      const bool gradient_drop = newton && pt.gradient.norm() < 0.5 * gnorm;
      if (armijo || gradient_drop) {
        x = trial;
        p = pt;
        accepted = true;
      }
    }
    if (!accepted) fail(ErrorKind::no_trap, "minimum search stalled in line search");
  }
  const double gnorm = p.gradient.norm();
  if (gnorm < o.gradient_tolerance) return {x, p.value, gnorm, o.max_iterations};
  fail(ErrorKind::no_trap, "minimum search did not converge");
}

MinimumResult find_minimum(const TrapModel& model, const Vec3& initial,
                           const MinimizeOptions& options) {
  return find_minimum([&](const Vec3& r) { return model.total(r, 2); }, initial, options);
}

namespace {

template <typename F>
void parallel_for(std::size_t n, F&& body) {
  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) body(i);
    });
  }
}

}  // namespace

GridScanResult grid_scan_minimum(const std::function<double(const Vec3&)>& value,
                                 const GridScanOptions& o) {
  require(o.points_per_axis >= 3 && o.levels >= 1 && o.zoom_cells >= 1, ErrorKind::validation,
          "grid scan needs >= 3 points per axis, >= 1 level, zoom >= 1");
  require((o.box.hi.array() > o.box.lo.array()).all(), ErrorKind::validation,
          "grid scan box must have hi > lo on every axis");
  const auto n = static_cast<std::size_t>(o.points_per_axis);
  Vec3 lo = o.box.lo, hi = o.box.hi;
  GridScanResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (int level = 0; level < o.levels; ++level) {
    const Vec3 cell = (hi - lo) / static_cast<double>(n - 1);
    std::vector<double> values(n * n * n);
    auto point = [&](std::size_t idx) {
      const auto ix = idx / (n * n), iy = (idx / n) % n, iz = idx % n;
      return Vec3(lo.x() + static_cast<double>(ix) * cell.x(),
                  lo.y() + static_cast<double>(iy) * cell.y(),
                  lo.z() + static_cast<double>(iz) * cell.z());
    };
    parallel_for(values.size(), [&](std::size_t idx) {
      const Vec3 r = point(idx);
      values[idx] = r.z() > 0.0 ? value(r) : std::numeric_limits<double>::infinity();
    });
    const auto it = std::min_element(values.begin(), values.end());
    require(std::isfinite(*it), ErrorKind::no_trap, "grid scan found no finite values");
    best.position = point(static_cast<std::size_t>(it - values.begin()));
    best.value = *it;
    best.cell = cell;
    lo = best.position - o.zoom_cells * cell;
    hi = best.position + o.zoom_cells * cell;
  }
  return best;
}

SecularResult secular_modes(const Mat3& hessian, double mass, const Vec3& axial_direction) {
  require(mass > 0.0, ErrorKind::validation, "mass must be > 0");
  const Mat3 sym = 0.5 * (hessian + hessian.transpose());
  const Eigen::SelfAdjointEigenSolver<Mat3> es(sym);
  require(es.info() == Eigen::Success, ErrorKind::saddle, "Hessian eigen-decomposition failed");
  SecularResult out;
  out.hessian = sym;
  for (int i = 0; i < 3; ++i) {
    const double lambda = es.eigenvalues()(i);
    require(lambda > 0.0, ErrorKind::saddle,
            "Hessian is not positive definite at the stationary point");
    out.modes[static_cast<std::size_t>(i)] = {std::sqrt(lambda / mass) / constants::two_pi,
                                             es.eigenvectors().col(i)};
  }
  const Vec3 dir = axial_direction.normalized();
  double best = -1.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double a = std::abs(out.modes[i].axis.dot(dir));
    if (a > best) {
      best = a;
      out.axial_index = i;
    }
  }
  return out;
}

SecularResult secular_frequencies(const TrapModel& model, const Vec3& minimum,
                                  const Vec3& axial_direction) {
  return secular_modes(model.total(minimum, 2).hessian, model.drive().ion_mass,
                       axial_direction);
}

double VoltageProgram::Source::at(double t) const {
  if (!is_trace) return constant;
  const auto& s = trace.samples;
  const double x = (t - trace.t0) / trace.dt;
  if (x <= 0.0) return s.front();
  const auto i = static_cast<std::size_t>(x);
  if (i + 1 >= s.size()) return s.back();
  const double f = x - static_cast<double>(i);
  return s[i] + f * (s[i + 1] - s[i]);
}

void VoltageProgram::set_constant(const std::string& electrode, double volts) {
  require(std::isfinite(volts), ErrorKind::validation, "voltage must be finite");
  sources_[electrode] = Source{volts, false, {}};
}

void VoltageProgram::set_trace(const std::string& electrode, Trace trace) {
  trace.validate();
  require(!trace.samples.empty(), ErrorKind::validation, "voltage trace is empty");
  sources_[electrode] = Source{0.0, true, std::move(trace)};
}

bool VoltageProgram::has(const std::string& electrode) const {
  return sources_.count(electrode) != 0;
}

const VoltageProgram::Source& VoltageProgram::source(const std::string& electrode) const {
  const auto it = sources_.find(electrode);
  require(it != sources_.end(), ErrorKind::validation,
          "no voltage program for electrode '" + electrode + "'");
  return it->second;
}

double VoltageProgram::value(const std::string& electrode, double t) const {
  return source(electrode).at(t);
}

double VoltageProgram::covered_until() const {
  double end = std::numeric_limits<double>::infinity();
  for (const auto& [id, s] : sources_) {
    if (s.is_trace) end = std::min(end, s.trace.end_time());
  }
  return end;
}

VoltageProgram VoltageProgram::from_drive(const TrapDrive& drive) {
  VoltageProgram p;
  for (const auto& [id, v] : drive.dc_voltages) p.set_constant(id, v);
  return p;
}

std::vector<TrajectorySample> integrate(const std::function<Vec3(double, const Vec3&)>& accel,
                                        const Vec3& r0, const Vec3& v0, double dt,
                                        std::size_t steps, std::size_t record_stride) {
  require(dt > 0.0, ErrorKind::validation, "dt must be > 0");
  require(record_stride >= 1, ErrorKind::validation, "record_stride must be >= 1");
  std::vector<TrajectorySample> out;
  out.reserve(steps / record_stride + 1);
  Vec3 x = r0, v = v0;
  out.push_back({0.0, x, v});
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) * dt;
    const Vec3 x_half = x + 0.5 * dt * v;
    v += dt * accel(t + 0.5 * dt, x_half);
    x = x_half + 0.5 * dt * v;
    if ((s + 1) % record_stride == 0) {
      out.push_back({static_cast<double>(s + 1) * dt, x, v});
    }
  }
  return out;
}

MotionResult integrate_motion(const TrapModel& model, const VoltageProgram& voltages,
                              const Vec3& r0, const Vec3& v0, const MotionOptions& o) {
  const TrapDrive& drive = model.drive();
  require(o.t_end > 0.0 && std::isfinite(o.t_end), ErrorKind::validation, "t_end must be > 0");
  require(o.dt > 0.0, ErrorKind::validation, "dt must be > 0");
  require(o.record_stride >= 1, ErrorKind::validation, "record_stride must be >= 1");
  const double t_rf = 1.0 / drive.rf_frequency;
  double resolve = t_rf;
  if (o.voltage_period > 0.0) resolve = std::min(resolve, o.voltage_period);
  require(o.dt <= resolve / 20.0 * (1.0 + 1e-9), ErrorKind::validation,
          "dt must be <= min(RF period, voltage period) / 20");
  require(voltages.covered_until() >= o.t_end * (1.0 - 1e-12), ErrorKind::validation,
          "voltage traces do not cover [0, t_end]");
  require(o.bounding_box.contains(r0) && r0.z() > 0.0, ErrorKind::validation,
          "initial position is outside the bounding box");

  const auto& electrodes = model.electrodes();
  std::vector<const VoltageProgram::Source*> dc_src;
  std::vector<const Electrode*> dc_el;
  for (std::size_t i : model.dc_indices()) {
    dc_el.push_back(&electrodes[i]);
    dc_src.push_back(&voltages.source(electrodes[i].id));
  }

  const auto per_period = static_cast<std::size_t>(std::ceil(t_rf / o.dt - 1e-9));
  const double h = t_rf / static_cast<double>(per_period);
  const auto steps = static_cast<std::size_t>(std::ceil(o.t_end / h - 1e-9));
  const double q = drive.ion_charge;
  const double m = drive.ion_mass;
  const double v_rf = drive.rf_amplitude();
  const double w = drive.omega();

  MotionResult res;
  res.dt_used = h;
  res.steps = steps;
  res.samples.reserve(steps / o.record_stride + 1);
  res.samples.push_back({0.0, r0, v0});

  Vec3 x = r0, v = v0;
  double energy_sum = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    const double t_half = (static_cast<double>(s) + 0.5) * h;
    const Vec3 x_half = x + 0.5 * h * v;
    if (!o.bounding_box.contains(x_half) || x_half.z() <= 0.0) {
      throw EscapeError("ion left the bounding box", t_half);
    }
    Vec3 force = -q * v_rf * std::cos(w * t_half + drive.rf_phase) * model.rf_unit_gradient(x_half);
    double potential = 0.0;
    for (std::size_t k = 0; k < dc_el.size(); ++k) {
      const double volts = dc_src[k]->at(t_half);
      if (volts == 0.0) continue;
      const BasisDerivatives d = basis_derivatives(*dc_el[k], x_half, 1);
      force -= q * volts * d.gradient;
      potential += q * volts * d.value;
    }
    const Vec3 v_new = v + (h / m) * force;
    const Vec3 v_mid = 0.5 * (v + v_new);
    energy_sum += 0.5 * m * v_mid.squaredNorm() + potential;
    v = v_new;
    x = x_half + 0.5 * h * v;
    const double t = static_cast<double>(s + 1) * h;
    if (!o.bounding_box.contains(x) || x.z() <= 0.0) {
      throw EscapeError("ion left the bounding box", t);
    }
    if ((s + 1) % per_period == 0) {
      res.energy_time.push_back(t - 0.5 * t_rf);
      res.energy.push_back(energy_sum / static_cast<double>(per_period) - o.energy_reference);
      energy_sum = 0.0;
    }
    if ((s + 1) % o.record_stride == 0) res.samples.push_back({t, x, v});
  }
  return res;
}

Vec3 micromotion_start(const TrapModel& model, const Vec3& r_min) {
  const TrapDrive& d = model.drive();
  const double w = d.omega();
  // Driven response to -q V cos(w t) grad phi_rf is (q V / (m w^2)) grad phi_rf cos(w t).
  return r_min + d.ion_charge * d.rf_amplitude() / (d.ion_mass * w * w) *
                     std::cos(d.rf_phase) * model.rf_unit_gradient(r_min);
}

std::vector<FieldMapRow> field_map(const TrapModel& model, const std::vector<double>& xs,
                                   const std::vector<double>& ys, const std::vector<double>& zs) {
  require(!xs.empty() && !ys.empty() && !zs.empty(), ErrorKind::validation,
          "field map axes must be non-empty");
  for (double z : zs) require(z > 0.0, ErrorKind::domain, "field map heights must be > 0");
  const double q = model.drive().ion_charge;
  std::vector<FieldMapRow> rows(xs.size() * ys.size() * zs.size());
  parallel_for(rows.size(), [&](std::size_t idx) {
    const std::size_t iz = idx % zs.size();
    const std::size_t iy = (idx / zs.size()) % ys.size();
    const std::size_t ix = idx / (zs.size() * ys.size());
    const Vec3 r(xs[ix], ys[iy], zs[iz]);
    FieldMapRow row;
    row.position = r;
    row.pseudo = model.pseudopotential(r, 0).value / q;
    row.dc = model.dc_potential(r, 0).value / q;
    row.total = row.pseudo + row.dc;
    rows[idx] = row;
  });
  return rows;
}

}  // namespace tdmsim
