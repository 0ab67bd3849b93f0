#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "tdmsim/tdmsim.h"

namespace {

const std::string demo = std::string(TDMSIM_CONFIG_DIR) + "/trap_demo.json";

}  // namespace

TEST_CASE("scalar operations") {
  tdm_gain_stage g{8.2e3, 1e3, 1.25};
  double v = 0.0;
  REQUIRE(tdm_amplifier(0.0, &g, &v) == TDM_OK);
  CHECK(v == -10.25);
  REQUIRE(tdm_amplifier(2.5, &g, &v) == TDM_OK);
  CHECK(v == 12.75);
  double back = 0.0;
  REQUIRE(tdm_invert_amplifier(12.75, &g, &back) == TDM_OK);
  CHECK(back == doctest::Approx(2.5));

  tdm_chain_params p;
  tdm_chain_params_default(&p);
  CHECK(p.r_on == 9.0);
  CHECK(p.lpf_cutoff == 2e3);
  int code = -1, clamped = -1;
  REQUIRE(tdm_quantize(3.0, &p.dac, &code, &clamped) == TDM_OK);
  CHECK(code == 16383);
  CHECK(clamped == 1);
  double rc = 0.0;
  REQUIRE(tdm_rc_charge(0.0, 1.0, 1.5e-9, &p, &rc) == TDM_OK);
  CHECK(rc > 0.99);
  double droop = 0.0;
  REQUIRE(tdm_hold_decay(1.0, 5.0 / 30e6, &p, &droop) == TDM_OK);
  CHECK(std::abs(1.0 - droop - 7.15e-7) < 1e-9);
  int lines = 0;
  REQUIRE(tdm_select_line_count(10, 1, &lines) == TDM_OK);
  CHECK(lines == 4);
  int64_t n_max = 0;
  REQUIRE(tdm_max_multiplexing_factor(0.5e6, 10e-9, 3e-9, 297e-12, 5.0, &n_max) == TDM_OK);
  CHECK(n_max == 138);
}

TEST_CASE("errors map to status codes") {
  double v = 0.0;
  CHECK(tdm_amplifier(0.0, nullptr, &v) == TDM_INVALID_ARGUMENT);
  CHECK(std::strlen(tdm_last_error()) > 0);
  tdm_chain_params p;
  tdm_chain_params_default(&p);
  CHECK(tdm_dac_output(20000, &p, &v) == TDM_DOMAIN);
  tdm_gain_stage g{8.2e3, 1e3, 1.25};
  CHECK(tdm_amplifier(0.0, &g, &v) == TDM_OK);
  CHECK(std::string(tdm_last_error()).empty());
  CHECK(std::string(tdm_status_name(TDM_NO_TRAP)) == "no_trap");
  CHECK(std::strlen(tdm_version()) > 0);
}

TEST_CASE("fits on raw arrays") {
  std::vector<double> s;
  for (int i = 0; i < 1000; ++i) s.push_back(3.0 * std::exp(-i * 1e-3 / 0.233));
  tdm_exp_fit f{};
  REQUIRE(tdm_fit_exponential(s.data(), s.size(), 0.0, 1e-3, 0.0, 1.0, &f) == TDM_OK);
  CHECK(f.tau == doctest::Approx(0.233).epsilon(1e-9));
  CHECK(tdm_fit_exponential(s.data(), 2, 0.0, 1e-3, 0.0, 1.0, &f) == TDM_FIT);

  tdm_gain_stage g{8.2e3, 1e3, 1.25};
  tdm_tolerance_result t{};
  REQUIRE(tdm_propagate_tolerances(0.26, 2.79, &g, 0.05, 100000, 1, &t) == TDM_OK);
  CHECK(t.v_low_mean == doctest::Approx(-7.86).epsilon(0.01));
  CHECK(t.n_samples == 100000);
}

TEST_CASE("config and commands") {
  tdm_config* cfg = nullptr;
  REQUIRE(tdm_config_load(demo.c_str(), &cfg) == TDM_OK);
  CHECK(std::strlen(tdm_config_hash(cfg)) == 64);

  tdm_run_options o;
  tdm_run_options_init(&o);
  tdm_result* r = nullptr;
  REQUIRE(tdm_run(cfg, "compile", &o, &r) == TDM_OK);
  CHECK(tdm_result_file_count(r) == 5);
  CHECK(std::string(tdm_result_file_name(r, 4)) == "compile_report.json");
  size_t len = 0;
  const char* data = tdm_result_file_data(r, 0, &len);
  CHECK(std::string(data, len).rfind("code,channel\n", 0) == 0);
  CHECK(std::string(tdm_result_report(r)).find(tdm_config_hash(cfg)) != std::string::npos);
  tdm_result_free(r);

  CHECK(tdm_run(cfg, "no-such-command", &o, &r) == TDM_VALIDATION);
  tdm_config_free(cfg);

  CHECK(tdm_config_parse("{oops", 5, &cfg) == TDM_PARSE);
  CHECK(tdm_config_load("/nonexistent.json", &cfg) == TDM_IO);
  const char* no_trap = "{}";
  REQUIRE(tdm_config_parse(no_trap, 2, &cfg) == TDM_OK);
  tdm_trap* trap = nullptr;
  CHECK(tdm_trap_from_config(cfg, &trap) == TDM_VALIDATION);
  tdm_config_free(cfg);
}

TEST_CASE("trap handle") {
  tdm_config* cfg = nullptr;
  REQUIRE(tdm_config_load(demo.c_str(), &cfg) == TDM_OK);
  tdm_trap* trap = nullptr;
  REQUIRE(tdm_trap_from_config(cfg, &trap) == TDM_OK);
  const double start[3] = {0.0, 0.0, 80e-6};
  double r[3];
  REQUIRE(tdm_trap_find_minimum(trap, start, r) == TDM_OK);
  CHECK(r[2] > 20e-6);
  double value = 0.0, grad[3], hess[9];
  REQUIRE(tdm_trap_total_potential(trap, r, &value, grad, hess) == TDM_OK);
  CHECK(std::hypot(grad[0], grad[1], grad[2]) < 1e-22);
  double freqs[3], axes[9];
  int axial = -1;
  REQUIRE(tdm_trap_secular(trap, r, freqs, axes, &axial) == TDM_OK);
  CHECK(axial == 0);
  CHECK(freqs[0] <= freqs[1]);
  CHECK(freqs[1] <= freqs[2]);
  const double below[3] = {0.0, 0.0, -1e-6};
  CHECK(tdm_trap_total_potential(trap, below, &value, nullptr, nullptr) == TDM_DOMAIN);
  tdm_trap_free(trap);
  tdm_config_free(cfg);
}
