#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "common.hpp"
#include "config.hpp"
#include "electrode_basis.hpp"
#include "trap_model.hpp"

using namespace tdmsim;

namespace {

// Composite Gauss-Legendre quadrature of z / (2 pi |r - r'|^3) over the rectangle.
double quadrature_basis(const Rect& rc, const Vec3& r, int panels) {
  static const double xg[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                               0.8611363115940526};
  static const double wg[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                               0.3478548451374538};
  const double hx = (rc.x_max - rc.x_min) / panels;
  const double hy = (rc.y_max - rc.y_min) / panels;
  double sum = 0.0;
  for (int i = 0; i < panels; ++i) {
    for (int a = 0; a < 4; ++a) {
      const double x = rc.x_min + hx * (i + 0.5 + 0.5 * xg[a]);
      for (int j = 0; j < panels; ++j) {
        for (int b = 0; b < 4; ++b) {
          const double y = rc.y_min + hy * (j + 0.5 + 0.5 * xg[b]);
          const double dx = r.x() - x, dy = r.y() - y;
          const double d2 = dx * dx + dy * dy + r.z() * r.z();
          sum += wg[a] * wg[b] * r.z() / (2.0 * M_PI * d2 * std::sqrt(d2));
        }
      }
    }
  }
  return sum * 0.25 * hx * hy;
}

TrapSection demo_trap() {
  return *load_config(std::string(TDMSIM_CONFIG_DIR) + "/trap_demo.json").trap;
}

Vec3 fd_gradient(const std::function<double(const Vec3&)>& f, const Vec3& r, double h) {
  Vec3 g;
  for (int i = 0; i < 3; ++i) {
    Vec3 e = Vec3::Zero();
    e(i) = h;
    g(i) = (f(r + e) - f(r - e)) / (2.0 * h);
  }
  return g;
}

double rel_diff(const Vec3& a, const Vec3& b) { return (a - b).norm() / b.norm(); }

PotentialPoint quadratic(const Vec3& r, const Vec3& c, const Mat3& k) {
  PotentialPoint p;
  p.position = r;
  p.value = 0.5 * (r - c).dot(k * (r - c));
  p.gradient = k * (r - c);
  p.hessian = k;
  return p;
}

}  // namespace

TEST_CASE("basis matches brute-force quadrature") {
  const Rect rc{-50e-6, 100e-6, 20e-6, 80e-6};
  for (const Vec3& r : {Vec3(0, 0, 50e-6), Vec3(25e-6, 50e-6, 30e-6), Vec3(-200e-6, 10e-6, 90e-6),
                        Vec3(300e-6, -100e-6, 400e-6)}) {
    const double exact = rect_basis_value(rc, r);
    const double quad = quadrature_basis(rc, r, 64);
    CHECK(std::abs(exact - quad) < 1e-4 * std::abs(quad));
    CHECK(exact >= 0.0);
    CHECK(exact <= 1.0);
  }
}

TEST_CASE("basis boundary values near the plane") {
  const Rect rc{0.0, 100e-6, 0.0, 100e-6};
  const double z = 1e-6 * 100e-6;
  CHECK(std::abs(rect_basis_value(rc, Vec3(50e-6, 50e-6, z)) - 1.0) < 1e-3);
  CHECK(std::abs(rect_basis_value(rc, Vec3(20e-6, 70e-6, z)) - 1.0) < 1e-3);
  CHECK(rect_basis_value(rc, Vec3(150e-6, 50e-6, z)) < 1e-3);
  CHECK(rect_basis_value(rc, Vec3(-30e-6, -30e-6, z)) < 1e-3);
  CHECK_THROWS_AS(rect_basis_value(rc, Vec3(0, 0, 0)), Error);
  CHECK_THROWS_AS(rect_basis_value(rc, Vec3(0, 0, -1e-6)), Error);
}

TEST_CASE("basis derivatives match finite differences and satisfy Laplace") {
  const Rect rc{-40e-6, 60e-6, -10e-6, 120e-6};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-150e-6, 150e-6), uz(20e-6, 200e-6);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 r(u(rng), u(rng), uz(rng));
    BasisDerivatives d;
    accumulate_rect_basis(rc, r, 3, d);
    const double h = 1e-3 * r.z();
    auto value = [&](const Vec3& p) { return rect_basis_value(rc, p); };
    const Vec3 g_fd = fd_gradient(value, r, 1e-4 * r.z());
    CHECK(rel_diff(d.gradient, g_fd) < 1e-6);

    Mat3 h_fd;
    for (int i = 0; i < 3; ++i) {
      Vec3 e = Vec3::Zero();
      e(i) = h;
      BasisDerivatives dp, dm;
      accumulate_rect_basis(rc, r + e, 1, dp);
      accumulate_rect_basis(rc, r - e, 1, dm);
      h_fd.col(i) = (dp.gradient - dm.gradient) / (2.0 * h);
    }
    CHECK((d.hessian - h_fd).norm() < 1e-5 * d.hessian.norm());

    for (int k = 0; k < 3; ++k) {
      Vec3 e = Vec3::Zero();
      e(k) = h;
      BasisDerivatives dp, dm;
      accumulate_rect_basis(rc, r + e, 2, dp);
      accumulate_rect_basis(rc, r - e, 2, dm);
      const Mat3 t_fd = (dp.hessian - dm.hessian) / (2.0 * h);
      CHECK((d.third[k] - t_fd).norm() < 1e-5 * (d.third[k].norm() + 1e-3 * d.hessian.norm() / r.z()));
    }

    // 7-point Laplacian from values only
    double lap = -6.0 * value(r);
    for (int i = 0; i < 3; ++i) {
      Vec3 e = Vec3::Zero();
      e(i) = h;
      lap += value(r + e) + value(r - e);
    }
    lap /= h * h;
    CHECK(std::abs(lap) < 1e-3 * d.hessian.norm());
    CHECK(std::abs(d.hessian.trace()) < 1e-9 * d.hessian.norm());
  }
}

TEST_CASE("geometry validation") {
  std::vector<Electrode> e{{"a", ElectrodeRole::side_dc, {{0, 1, 0, 1}}},
                           {"b", ElectrodeRole::side_dc, {{0.5, 2, 0.5, 2}}}};
  CHECK_THROWS_AS(validate_geometry(e), Error);
  e[1].rects = {{1, 2, 0, 1}};
  CHECK_NOTHROW(validate_geometry(e));
  e[1].rects = {{1, 1, 0, 1}};
  CHECK_THROWS_AS(validate_geometry(e), Error);
}

TEST_CASE("missing DC voltage is a validation error") {
  auto t = demo_trap();
  t.drive.dc_voltages.erase("7");
  try {
    TrapModel m(t.electrodes, t.drive);
    FAIL("expected validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::validation);
  }
}

TEST_CASE("zero drive gives zero potential") {
  auto t = demo_trap();
  for (auto& [id, v] : t.drive.dc_voltages) v = 0.0;
  t.drive.rf_peak_to_peak = 0.0;
  const TrapModel m(t.electrodes, t.drive);
  CHECK(m.total_value(Vec3(10e-6, -5e-6, 70e-6)) == 0.0);
}

TEST_CASE("pseudopotential scaling, sign and decay") {
  auto t = demo_trap();
  const TrapModel m1(t.electrodes, t.drive);
  t.drive.rf_peak_to_peak *= 2.0;
  const TrapModel m2(t.electrodes, t.drive);
  for (const Vec3& r : {Vec3(0, 0, 50e-6), Vec3(30e-6, 20e-6, 120e-6), Vec3(-80e-6, -60e-6, 40e-6)}) {
    const double a = m1.pseudopotential(r, 0).value;
    CHECK(a >= 0.0);
    CHECK(m2.pseudopotential(r, 0).value == doctest::Approx(4.0 * a).epsilon(1e-12));
  }
  CHECK(m1.pseudopotential(Vec3(0, 0, 1.0), 0).value <
        1e-9 * m1.pseudopotential(Vec3(0, 0, 50e-6), 0).value);
}

TEST_CASE("pseudopotential derivatives match finite differences") {
  const auto t = demo_trap();
  const TrapModel m(t.electrodes, t.drive);
  for (const Vec3& r : {Vec3(5e-6, 3e-6, 60e-6), Vec3(40e-6, -25e-6, 110e-6), Vec3(-70e-6, 15e-6, 85e-6)}) {
    const auto p = m.pseudopotential(r, 2);
    const double h = 1e-3 * r.z();
    const Vec3 g_fd =
        fd_gradient([&](const Vec3& q) { return m.pseudopotential(q, 0).value; }, r, 1e-4 * r.z());
    CHECK(rel_diff(p.gradient, g_fd) < 1e-6);
    Mat3 h_fd;
    for (int i = 0; i < 3; ++i) {
      Vec3 e = Vec3::Zero();
      e(i) = h;
      h_fd.col(i) = (m.pseudopotential(r + e, 1).gradient - m.pseudopotential(r - e, 1).gradient) / (2.0 * h);
    }
    CHECK((p.hessian - h_fd).norm() < 1e-5 * p.hessian.norm());
  }
}

TEST_CASE("total potential is affine in the DC voltages") {
  auto t = demo_trap();
  const Vec3 r(12e-6, -7e-6, 90e-6);
  const TrapModel base(t.electrodes, t.drive);
  TrapDrive w = t.drive;
  w.rf_peak_to_peak = 0.0;
  for (auto& [id, v] : w.dc_voltages) v = 0.1 * static_cast<double>(id.size()) - 0.3;
  const TrapModel only_w(t.electrodes, w);
  TrapDrive sum = t.drive;
  for (auto& [id, v] : sum.dc_voltages) v += w.dc_voltages.at(id);
  const TrapModel both(t.electrodes, sum);
  const auto a = base.total(r), b = only_w.total(r), c = both.total(r);
  CHECK(c.value == doctest::Approx(a.value + b.value).epsilon(1e-12));
  CHECK(rel_diff(c.gradient, a.gradient + b.gradient) < 1e-12);
  CHECK((c.hessian - a.hessian - b.hessian).norm() < 1e-12 * c.hessian.norm());
}

TEST_CASE("find_minimum on a quadratic") {
  const Vec3 c(3e-6, -2e-6, 50e-6);
  Mat3 k;
  k << 2.0, 0.3, 0.0, 0.3, 1.5, 0.1, 0.0, 0.1, 4.0;
  k *= 1e-12;
  MinimizeOptions o;
  o.bounds = Box{Vec3(-1e-3, -1e-3, 0.0), Vec3(1e-3, 1e-3, 1e-3)};
  o.gradient_tolerance = 1e-30;
  const auto m = find_minimum([&](const Vec3& r) { return quadratic(r, c, k); }, Vec3(40e-6, 30e-6, 90e-6), o);
  CHECK((m.position - c).norm() < 1e-10);
}

TEST_CASE("repulsive DC without RF has no trap") {
  auto t = demo_trap();
  for (auto& [id, v] : t.drive.dc_voltages) v = -1.0;
  t.drive.rf_peak_to_peak = 0.0;
  const TrapModel m(t.electrodes, t.drive);
  try {
    find_minimum(m, t.initial_guess, t.minimize);
    FAIL("expected no-trap error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::no_trap);
  }
}

TEST_CASE("representative trap: minimum, grid oracle and random starts") {
  const auto t = demo_trap();
  const TrapModel m(t.electrodes, t.drive);
  const auto res = find_minimum(m, t.initial_guess, t.minimize);
  CHECK(res.position.z() > 20e-6);
  CHECK(res.gradient_norm < t.minimize.gradient_tolerance);
  const auto grid = grid_scan_minimum([&](const Vec3& r) { return m.total_value(r); }, t.grid);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(grid.position(i) - res.position(i)) <= grid.cell(i));

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-8e-6, 8e-6);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec3 start = res.position + Vec3(u(rng), u(rng), u(rng));
    const auto other = find_minimum(m, start, t.minimize);
    CHECK((other.position - res.position).norm() < 1e-9);
  }
}

TEST_CASE("secular frequencies") {
  const double mass = constants::calcium40_ion_mass;
  const double k = 1e-12;
  const auto iso = secular_modes(k * Mat3::Identity(), mass, Vec3::UnitX());
  for (const auto& mode : iso.modes) {
    CHECK(mode.frequency == doctest::Approx(std::sqrt(k / mass) / (2.0 * M_PI)).epsilon(1e-12));
  }
  Mat3 saddle = Mat3::Identity() * k;
  saddle(2, 2) = -k;
  try {
    secular_modes(saddle, mass, Vec3::UnitX());
    FAIL("expected saddle error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::saddle);
  }

  const auto t = demo_trap();
  const TrapModel m(t.electrodes, t.drive);
  const Vec3 r = find_minimum(m, t.initial_guess, t.minimize).position;
  const auto sec = secular_frequencies(m, r, t.axial_direction);
  Mat3 h_fd;
  const double h = 1e-3 * r.z();
  for (int i = 0; i < 3; ++i) {
    Vec3 e = Vec3::Zero();
    e(i) = h;
    h_fd.col(i) = (m.total(r + e, 1).gradient - m.total(r - e, 1).gradient) / (2.0 * h);
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (h_fd + h_fd.transpose()));
  for (int i = 0; i < 3; ++i) {
    const double f = std::sqrt(es.eigenvalues()(i) / mass) / (2.0 * M_PI);
    // frequencies go as sqrt(lambda), so 1e-4 on lambda is 5e-5 here
    CHECK(sec.modes[static_cast<std::size_t>(i)].frequency == doctest::Approx(f).epsilon(5e-5));
  }
  CHECK(std::abs(sec.modes[sec.axial_index].axis.x()) > 0.99);
}

TEST_CASE("harmonic integration: frequency and energy drift") {
  const double mass = constants::calcium40_ion_mass;
  const double k = mass * std::pow(2.0 * M_PI * 1e6, 2);
  const auto sec = secular_modes(k * Mat3::Identity(), mass, Vec3::UnitX());
  const double f = sec.modes[0].frequency;
  const double dt = 1.0 / f / 400.0;
  const std::size_t steps = 100000;
  const auto traj = integrate([&](double, const Vec3& r) -> Vec3 { return -(k / mass) * r; },
                              Vec3(1e-6, 0, 0), Vec3::Zero(), dt, steps, 1);
  REQUIRE(traj.size() == steps + 1);

  std::vector<double> ups;
  for (std::size_t i = 1; i < traj.size(); ++i) {
    const double a = traj[i - 1].position.x(), b = traj[i].position.x();
    if (a < 0.0 && b >= 0.0) ups.push_back(traj[i - 1].t + dt * a / (a - b));
  }
  REQUIRE(ups.size() > 10);
  const double f_meas = static_cast<double>(ups.size() - 1) / (ups.back() - ups.front());
  CHECK(std::abs(f_meas / f - 1.0) < 0.02);

  auto energy = [&](const TrajectorySample& s) {
    return 0.5 * mass * s.velocity.squaredNorm() + 0.5 * k * s.position.squaredNorm();
  };
  const double e0 = energy(traj.front());
  double worst = 0.0;
  for (const auto& s : traj) worst = std::max(worst, std::abs(energy(s) / e0 - 1.0));
  CHECK(worst < 1e-4);
}

TEST_CASE("equilibrium start: micromotion dominates secular motion") {
  const auto t = demo_trap();
  const TrapModel m(t.electrodes, t.drive);
  const Vec3 r_min = find_minimum(m, t.initial_guess, t.minimize).position;
  const Vec3 r0 = micromotion_start(m, r_min);
  MotionOptions o;
  o.t_end = 20e-6;
  o.dt = 1.0 / t.drive.rf_frequency / 40.0;
  o.bounding_box = t.dynamics.bounding_box;
  const auto res = integrate_motion(m, VoltageProgram::from_drive(t.drive), r0, Vec3::Zero(), o);
  const double period = 1.0 / t.drive.rf_frequency;
  const auto per_period = static_cast<std::size_t>(std::llround(period / res.dt_used));
  double secular = 0.0, micro = 0.0;
  for (std::size_t p = 0; p + per_period < res.samples.size(); p += per_period) {
    Vec3 mean = Vec3::Zero();
    for (std::size_t i = p; i < p + per_period; ++i) mean += res.samples[i].position;
    mean /= static_cast<double>(per_period);
    secular = std::max(secular, (mean - r_min).norm());
    for (std::size_t i = p; i < p + per_period; ++i) {
      micro = std::max(micro, (res.samples[i].position - mean).norm());
    }
  }
  CHECK(micro > 0.0);
  CHECK(secular < micro);
}

TEST_CASE("escape raises with the escape time") {
  const auto t = demo_trap();
  auto drive = t.drive;
  for (auto& [id, v] : drive.dc_voltages) v = -5.0;
  drive.rf_peak_to_peak = 0.0;
  drive.rf_frequency = 24.3e6;
  const TrapModel m(t.electrodes, drive);
  MotionOptions o;
  o.t_end = 1e-3;
  o.dt = 1.0 / drive.rf_frequency / 20.0;
  o.bounding_box = t.dynamics.bounding_box;
  try {
    integrate_motion(m, VoltageProgram::from_drive(drive), Vec3(0, 0, 80e-6), Vec3::Zero(), o);
    FAIL("expected escape");
  } catch (const EscapeError& e) {
    CHECK(e.kind() == ErrorKind::escape);
    CHECK(e.escape_time() > 0.0);
    CHECK(e.escape_time() < 1e-3);
  }
}

TEST_CASE("integration step must resolve the voltage updates") {
  const auto t = demo_trap();
  const TrapModel m(t.electrodes, t.drive);
  MotionOptions o;
  o.t_end = 1e-6;
  o.dt = 5e-9;
  o.bounding_box = t.dynamics.bounding_box;
  CHECK_THROWS_AS(integrate_motion(m, VoltageProgram::from_drive(t.drive), Vec3(0, 0, 80e-6),
                                   Vec3::Zero(), o),
                  Error);
}

TEST_CASE("voltage program interpolates traces") {
  VoltageProgram v;
  Trace tr;
  tr.t0 = 0.0;
  tr.dt = 1.0;
  tr.samples = {0.0, 2.0, 4.0};
  v.set_trace("a", tr);
  v.set_constant("b", 1.5);
  CHECK(v.value("a", 0.25) == doctest::Approx(0.5));
  CHECK(v.value("a", 1.5) == doctest::Approx(3.0));
  CHECK(v.value("b", 7.0) == 1.5);
  CHECK(v.covered_until() == 2.0);
  CHECK_FALSE(v.has("c"));
}

TEST_CASE("field map rows") {
  const auto t = demo_trap();
  const TrapModel m(t.electrodes, t.drive);
  const auto rows = field_map(m, {0.0, 1e-5}, {0.0}, {50e-6, 60e-6, 70e-6});
  CHECK(rows.size() == 6);
  for (const auto& r : rows) CHECK(r.total == doctest::Approx(r.pseudo + r.dc).epsilon(1e-12));
  CHECK_THROWS_AS(field_map(m, {0.0}, {0.0}, {0.0}), Error);
}
