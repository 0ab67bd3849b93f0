#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "analog_chain.hpp"
#include "common.hpp"
#include "electrode_basis.hpp"

namespace tdmsim {

enum class ElectrodeRole { rf, center_dc, side_dc };

const char* to_string(ElectrodeRole r) noexcept;
ElectrodeRole parse_electrode_role(const std::string& s);

struct Electrode {
  std::string id;
  ElectrodeRole role = ElectrodeRole::side_dc;
  std::vector<Rect> rects;
};

// Checks positive areas, unique ids and that no two electrodes overlap.
void validate_geometry(const std::vector<Electrode>& electrodes);

struct TrapDrive {
  double rf_peak_to_peak = 0.0;
  double rf_frequency = 1.0;
  double rf_phase = 0.0;
  std::map<std::string, double> dc_voltages;
  double ion_mass = constants::calcium40_ion_mass;
  double ion_charge = constants::elementary_charge;

  double rf_amplitude() const noexcept { return 0.5 * rf_peak_to_peak; }
  double omega() const noexcept { return constants::two_pi * rf_frequency; }
  void validate() const;
};

// Unit-voltage potential of one electrode at r (z > 0).
double basis_potential(const Electrode& e, const Vec3& r);
BasisDerivatives basis_derivatives(const Electrode& e, const Vec3& r, int order);

/// Value in joules with gradient (J/m) and Hessian (J/m^2).
struct PotentialPoint {
  Vec3 position = Vec3::Zero();
  double value = 0.0;
  Vec3 gradient = Vec3::Zero();
  Mat3 hessian = Mat3::Zero();
};

/// Surface trap: electrode geometry plus drive. Construction checks that
/// every non-RF electrode has a DC voltage.
class TrapModel {
 public:
  TrapModel(std::vector<Electrode> electrodes, TrapDrive drive);

  const std::vector<Electrode>& electrodes() const noexcept { return electrodes_; }
  const TrapDrive& drive() const noexcept { return drive_; }

  // Indices into electrodes() of the RF and DC electrodes.
  const std::vector<std::size_t>& rf_indices() const noexcept { return rf_; }
  const std::vector<std::size_t>& dc_indices() const noexcept { return dc_; }

  // order as for accumulate_rect_basis, capped at 2 (the pseudopotential
  // Hessian uses third derivatives internally).
  PotentialPoint pseudopotential(const Vec3& r, int order = 2) const;
  PotentialPoint dc_potential(const Vec3& r, int order = 2) const;
  PotentialPoint total(const Vec3& r, int order = 2) const;
  double total_value(const Vec3& r) const { return total(r, 0).value; }

  // Sum of unit RF basis gradients; the RF field is -V cos(...) times this.
  Vec3 rf_unit_gradient(const Vec3& r) const;

 private:
  std::vector<Electrode> electrodes_;
  TrapDrive drive_;
  std::vector<std::size_t> rf_, dc_;
  std::vector<double> dc_volts_;  // aligned with dc_
};

// Box used to bound searches and trajectories.
struct Box {
  Vec3 lo = Vec3::Constant(-1.0);
  Vec3 hi = Vec3::Constant(1.0);

  bool contains(const Vec3& r) const {
    return (r.array() >= lo.array()).all() && (r.array() <= hi.array()).all();
  }
};

struct MinimizeOptions {
  double gradient_tolerance = 1e-24;  // J/m
  int max_iterations = 500;
  double min_height = 1e-6;           // m; going below is a no-trap error
  double max_step = 10e-6;            // m
  Box bounds{};
};

struct MinimumResult {
  Vec3 position = Vec3::Zero();
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
};

using PotentialFn = std::function<PotentialPoint(const Vec3&)>;

/// Damped Newton with a gradient-descent fallback and Armijo backtracking.
/// Leaving bounds, dropping below min_height or running out of iterations
/// is a no_trap error.
MinimumResult find_minimum(const PotentialFn& potential, const Vec3& initial,
                           const MinimizeOptions& options = {});
MinimumResult find_minimum(const TrapModel& model, const Vec3& initial,
                           const MinimizeOptions& options = {});

struct GridScanOptions {
  Box box{};
  int points_per_axis = 21;
  int levels = 3;
  int zoom_cells = 2;  // half-width of the next level's box, in current cells
};

struct GridScanResult {
  Vec3 position = Vec3::Zero();
  double value = 0.0;
  Vec3 cell = Vec3::Zero();  // spacing of the finest level
};

/// Brute-force nested grid search over total_value. Points with z <= 0 are
/// skipped. Evaluation is spread across threads.
GridScanResult grid_scan_minimum(const std::function<double(const Vec3&)>& value,
                                 const GridScanOptions& options);

struct SecularMode {
  double frequency = 0.0;  // Hz
  Vec3 axis = Vec3::Zero();
};

struct SecularResult {
  std::array<SecularMode, 3> modes{};  // ascending frequency
  std::size_t axial_index = 0;        // mode most aligned with the axial direction
  Mat3 hessian = Mat3::Zero();

  double axial_frequency() const { return modes[axial_index].frequency; }
};

// Eigen-decomposition of a potential Hessian (J/m^2); saddle error unless
// positive definite.
SecularResult secular_modes(const Mat3& hessian, double mass, const Vec3& axial_direction);
SecularResult secular_frequencies(const TrapModel& model, const Vec3& minimum,
                                  const Vec3& axial_direction = Vec3::UnitX());

/// Per-electrode DC voltage as a function of time: a constant, or a trace
/// interpolated linearly between samples.
class VoltageProgram {
 public:
  void set_constant(const std::string& electrode, double volts);
  void set_trace(const std::string& electrode, Trace trace);

  bool has(const std::string& electrode) const;
  double value(const std::string& electrode, double t) const;
  // Earliest end time over trace-driven electrodes (infinity if none).
  double covered_until() const;

  // Constant program from the drive's dc_voltages.
  static VoltageProgram from_drive(const TrapDrive& drive);

  struct Source {
    double constant = 0.0;
    bool is_trace = false;
    Trace trace;

    double at(double t) const;
  };
  const Source& source(const std::string& electrode) const;

 private:
  std::map<std::string, Source> sources_;
};

struct MotionOptions {
  double t_end = 0.0;
  double dt = 0.0;  // snapped to a whole number of steps per RF period
  // Shortest voltage-update period the step has to resolve (0 if none).
  double voltage_period = 0.0;
  std::size_t record_stride = 1;
  Box bounding_box{};
  // Subtracted from the RF-period averaged energy; callers usually pass the
  // total potential at the trap minimum.
  double energy_reference = 0.0;
};

struct TrajectorySample {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
};

struct MotionResult {
  std::vector<TrajectorySample> samples;
  // One entry per complete RF period: mean kinetic energy plus mean DC
  // potential energy, minus energy_reference. Micromotion kinetic energy
  // stands in for the pseudopotential.
  std::vector<double> energy_time;
  std::vector<double> energy;
  double dt_used = 0.0;
  std::size_t steps = 0;
};

/// Integrates m r'' = -q grad Phi(r, t) with the full RF potential
/// V cos(Omega t + phase) phi_rf and DC voltages from the program, using a
/// drift-kick-drift Verlet step. Leaving the bounding box throws EscapeError.
MotionResult integrate_motion(const TrapModel& model, const VoltageProgram& voltages,
                              const Vec3& r0, const Vec3& v0, const MotionOptions& options);

/// Same stepping scheme for an arbitrary acceleration field a(t, r); used
/// for harmonic checks.
std::vector<TrajectorySample> integrate(const std::function<Vec3(double, const Vec3&)>& accel,
                                        const Vec3& r0, const Vec3& v0, double dt,
                                        std::size_t steps, std::size_t record_stride = 1);

// Micromotion turning point for an ion whose secular position is r_min, at
// RF phase zero; start there with zero velocity.
Vec3 micromotion_start(const TrapModel& model, const Vec3& r_min);

struct FieldMapRow {
  Vec3 position;
  double pseudo = 0.0;  // volts (energy / charge)
  double dc = 0.0;
  double total = 0.0;
};

std::vector<FieldMapRow> field_map(const TrapModel& model, const std::vector<double>& xs,
                                   const std::vector<double>& ys, const std::vector<double>& zs);

}  // namespace tdmsim
