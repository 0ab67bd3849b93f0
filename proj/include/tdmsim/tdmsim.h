#ifndef TDMSIM_TDMSIM_H
#define TDMSIM_TDMSIM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#  ifdef TDM_BUILDING_LIBRARY
#    define TDM_API __declspec(dllexport)
#  else
#    define TDM_API __declspec(dllimport)
#  endif
#else
#  define TDM_API __attribute__((visibility("default")))
#endif

typedef enum tdm_status {
  TDM_OK = 0,
  TDM_INVALID_ARGUMENT = 1, /* null pointer or bad enum passed to the API */
  TDM_DOMAIN = 2,
  TDM_VALIDATION = 3,
  TDM_FIT = 4,
  TDM_NO_TRAP = 5,
  TDM_SADDLE = 6,
  TDM_ESCAPE = 7,
  TDM_IO = 8,
  TDM_PARSE = 9,
  TDM_INTERNAL = 10
} tdm_status;

TDM_API const char* tdm_status_name(tdm_status status);

/* Message of the last failed call on this thread ("" after success). */
TDM_API const char* tdm_last_error(void);

/* Escape time in seconds of the last TDM_ESCAPE on this thread. */
TDM_API double tdm_last_escape_time(void);

TDM_API const char* tdm_version(void);

/* ---- electrical building blocks ---------------------------------------- */

typedef struct tdm_gain_stage {
  double r0;
  double r1;
  double vref;
} tdm_gain_stage;

typedef struct tdm_dac_spec {
  int bits;
  double input_range_low;
  double input_range_high;
  double update_rate;
  double settling_time;
} tdm_dac_spec;

typedef struct tdm_chain_params {
  tdm_dac_spec dac;
  tdm_gain_stage gain;
  double r_on;
  double c_hold;
  double tau_hold; /* may be INFINITY */
  double input_offset_low;
  double input_offset_high;
  double clip_low;
  double clip_high;
  double slew_rate;
  double lpf_cutoff; /* <= 0: no filter */
} tdm_chain_params;

/* Fills the measured reconstruction-chain values used as defaults. */
TDM_API void tdm_chain_params_default(tdm_chain_params* p);

TDM_API tdm_status tdm_amplifier(double v_in, const tdm_gain_stage* g, double* v_out);
TDM_API tdm_status tdm_invert_amplifier(double v_out, const tdm_gain_stage* g, double* v_in);
TDM_API tdm_status tdm_quantize(double v_in, const tdm_dac_spec* dac, int* code, int* clamped);
TDM_API tdm_status tdm_dequantize(int code, const tdm_dac_spec* dac, double* v_in);
TDM_API tdm_status tdm_dac_output(int code, const tdm_chain_params* p, double* v);
TDM_API tdm_status tdm_rc_charge(double v_cap, double v_drive, double dt,
                                 const tdm_chain_params* p, double* out);
TDM_API tdm_status tdm_hold_decay(double v_cap, double dt, const tdm_chain_params* p,
                                  double* out);
TDM_API tdm_status tdm_clip_slew(double v_target, double v_prev, double dt,
                                 const tdm_chain_params* p, double* out);
TDM_API tdm_status tdm_lpf_step(double v_prev, double v_in, double dt, double cutoff,
                                double* out);

/* binary != 0 selects binary encoding, otherwise one-hot. */
TDM_API tdm_status tdm_select_line_count(int n_channels, int binary, int* lines);

TDM_API tdm_status tdm_max_multiplexing_factor(double per_channel_rate, double settling_time,
                                               double switch_dead_time, double charge_tau,
                                               double charge_settle_multiplier,
                                               int64_t* n_max);

/* ---- analysis on raw sample arrays ------------------------------------- */

typedef struct tdm_tolerance_result {
  double v_low_mean;
  double v_low_sigma;
  double v_high_mean;
  double v_high_sigma;
  size_t n_samples;
} tdm_tolerance_result;

TDM_API tdm_status tdm_propagate_tolerances(double v_in_low, double v_in_high,
                                            const tdm_gain_stage* g, double rel_tol,
                                            size_t n_samples, uint64_t seed,
                                            tdm_tolerance_result* out);

typedef struct tdm_exp_fit {
  double tau;
  double tau_sigma;
  double v0;
  size_t samples_used;
} tdm_exp_fit;

TDM_API tdm_status tdm_fit_exponential(const double* samples, size_t n, double t0, double dt,
                                       double t_start, double t_end, tdm_exp_fit* out);

typedef struct tdm_sine_fit {
  double offset;
  double amplitude;
  double frequency;
  double phase;
  double peak;
  double rms_residual;
  size_t samples_used;
} tdm_sine_fit;

/* clip_low = -INFINITY disables the lower mask. */
TDM_API tdm_status tdm_fit_clipped_sine(const double* samples, size_t n, double t0, double dt,
                                        double clip_high, double guard_fraction,
                                        double clip_low, tdm_sine_fit* out);

typedef struct tdm_slew {
  double slew_rate;
  double t10;
  double t90;
  double swing;
  int rising;
} tdm_slew;

TDM_API tdm_status tdm_measure_slew(const double* samples, size_t n, double t0, double dt,
                                    tdm_slew* out);

/* ---- configuration and batch commands ---------------------------------- */

typedef struct tdm_config tdm_config;
typedef struct tdm_result tdm_result;

TDM_API tdm_status tdm_config_load(const char* path, tdm_config** out);
TDM_API tdm_status tdm_config_parse(const char* text, size_t len, tdm_config** out);
TDM_API void tdm_config_free(tdm_config* cfg);
/* Lowercase hex SHA-256 of the document; valid while cfg lives. */
TDM_API const char* tdm_config_hash(const tdm_config* cfg);

typedef struct tdm_run_options {
  int has_seed;
  uint64_t seed;
  double sim_dt;          /* <= 0: from configuration */
  double duration;        /* <= 0: from configuration */
  size_t record_stride;   /* 0: from configuration */
  const char* group;      /* NULL or "": all groups / configured group */
  const char* trace_path; /* analyze: external CSV trace */
  const char* schedule_path; /* simulate: external schedule CSV */
} tdm_run_options;

TDM_API void tdm_run_options_init(tdm_run_options* opts);

/* Subcommand names: compile, simulate, analyze, tolerances, feasibility,
   trap-solve, trap-dynamics, field-map. Results stay in memory. */
TDM_API tdm_status tdm_run(const tdm_config* cfg, const char* command,
                           const tdm_run_options* opts, tdm_result** out);
TDM_API void tdm_result_free(tdm_result* r);

/* JSON report text; valid while r lives. */
TDM_API const char* tdm_result_report(const tdm_result* r);
TDM_API size_t tdm_result_warning_count(const tdm_result* r);
TDM_API const char* tdm_result_warning(const tdm_result* r, size_t i);
TDM_API size_t tdm_result_file_count(const tdm_result* r);
TDM_API const char* tdm_result_file_name(const tdm_result* r, size_t i);
TDM_API const char* tdm_result_file_data(const tdm_result* r, size_t i, size_t* len);
/* Creates out_dir if needed; each file is written then renamed into place. */
TDM_API tdm_status tdm_result_write(const tdm_result* r, const char* out_dir);

/* ---- trap model -------------------------------------------------------- */

typedef struct tdm_trap tdm_trap;

TDM_API tdm_status tdm_trap_from_config(const tdm_config* cfg, tdm_trap** out);
TDM_API void tdm_trap_free(tdm_trap* trap);

/* Total potential energy (J), gradient (J/m) and row-major Hessian (J/m^2).
   grad and hess may be NULL. */
TDM_API tdm_status tdm_trap_total_potential(const tdm_trap* trap, const double r[3],
                                            double* value, double grad[3], double hess[9]);
TDM_API tdm_status tdm_trap_find_minimum(const tdm_trap* trap, const double initial[3],
                                         double minimum[3]);
/* Ascending frequencies (Hz); axes row i is the unit vector of mode i. */
TDM_API tdm_status tdm_trap_secular(const tdm_trap* trap, const double r[3],
                                    double freqs[3], double axes[9], int* axial_index);

#ifdef __cplusplus
}
#endif

#endif
