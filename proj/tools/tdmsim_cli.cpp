#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "tdmsim/tdmsim.h"

namespace {

using json = nlohmann::json;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("tdmsim");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("TDMSIM_LOG_LEVEL")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

// Machine-readable failure line on stderr plus a nonzero exit code.
int fail(tdm_status status, const std::string& context) {
  json err = {{"error", {{"status", tdm_status_name(status)},
                         {"message", tdm_last_error()},
                         {"context", context}}}};
  if (status == TDM_ESCAPE) err["error"]["escape_time"] = tdm_last_escape_time();
  spdlog::error("{}: {}", context, tdm_last_error());
  std::cerr << err.dump() << "\n";
  return static_cast<int>(status);
}

void log_summary(const std::string& command, const json& report) {
  if (command == "tolerances") {
    spdlog::info("output range {}", report.value("summary", ""));
  } else if (command == "feasibility") {
    spdlog::info("N_max = {} at {} updates/s per channel", report.value("n_max", 0),
                 report.value("per_channel_rate", 0.0));
  } else if (command == "trap-solve") {
    const auto& sec = report.at("secular");
    spdlog::info("trap at height {} m, axial frequency {} Hz",
                 report.at("minimum").value("height", 0.0), sec.value("axial_frequency", 0.0));
  } else if (command == "trap-dynamics") {
    spdlog::info("ion bounded; energy difference vs constant voltages {}",
                 report.value("energy_relative_difference", 0.0));
  } else if (command == "compile") {
    for (const auto& g : report.at("groups")) {
      spdlog::info("group {}: {} entries, {} clamp events", g.value("name", ""),
                   g.value("entries", 0), g.value("total_clamp_events", 0));
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"TDM electrode waveform compiler, chain simulator and trap checker"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::int64_t seed = 0;
  double sim_dt = 0.0;
  double duration = 0.0;
  std::size_t record_stride = 0;
  std::string group, trace_path, schedule_path;

  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"compile", "compile waveform groups into TDM schedules"},
      {"simulate", "simulate the reconstruction chain and write traces"},
      {"analyze", "reconstruction metrics and fits"},
      {"tolerances", "Monte Carlo of the gain-stage output range"},
      {"feasibility", "maximum multiplexing factor"},
      {"trap-solve", "trap minimum and secular frequencies"},
      {"trap-dynamics", "ion trajectory under constant and simulated voltages"},
      {"field-map", "potential on a grid"},
  };
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", config_path, "configuration document")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--sim-dt", sim_dt, "simulation step in seconds");
    sub->add_option("--duration", duration, "simulated duration in seconds");
    sub->add_option("--record-stride", record_stride, "record every n-th step");
    sub->add_option("--group", group, "waveform group");
    if (std::string(s.name) == "analyze") {
      sub->add_option("--trace", trace_path, "external (time, volts) CSV")->check(CLI::ExistingFile);
    }
    if (std::string(s.name) == "simulate") {
      sub->add_option("--schedule", schedule_path, "(code, channel) CSV")->check(CLI::ExistingFile);
    }
  }
  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  const CLI::App* sub = app.get_subcommands().front();

  tdm_config* raw_cfg = nullptr;
  if (tdm_status st = tdm_config_load(config_path.c_str(), &raw_cfg); st != TDM_OK) {
    return fail(st, "loading " + config_path);
  }
  std::unique_ptr<tdm_config, decltype(&tdm_config_free)> cfg(raw_cfg, tdm_config_free);
  spdlog::debug("config {} sha256 {}", config_path, tdm_config_hash(cfg.get()));

  tdm_run_options opts;
  tdm_run_options_init(&opts);
  if (sub->count("--seed") > 0) {
    opts.has_seed = 1;
    opts.seed = static_cast<std::uint64_t>(seed);
  }
  opts.sim_dt = sim_dt;
  opts.duration = duration;
  opts.record_stride = record_stride;
  opts.group = group.empty() ? nullptr : group.c_str();
  opts.trace_path = trace_path.empty() ? nullptr : trace_path.c_str();
  opts.schedule_path = schedule_path.empty() ? nullptr : schedule_path.c_str();

  tdm_result* raw_res = nullptr;
  if (tdm_status st = tdm_run(cfg.get(), command.c_str(), &opts, &raw_res); st != TDM_OK) {
    return fail(st, command);
  }
  std::unique_ptr<tdm_result, decltype(&tdm_result_free)> res(raw_res, tdm_result_free);

  for (std::size_t i = 0; i < tdm_result_warning_count(res.get()); ++i) {
    spdlog::warn("{}", tdm_result_warning(res.get(), i));
  }
  if (tdm_status st = tdm_result_write(res.get(), out_dir.c_str()); st != TDM_OK) {
    return fail(st, "writing " + out_dir);
  }
  for (std::size_t i = 0; i < tdm_result_file_count(res.get()); ++i) {
    spdlog::debug("wrote {}/{}", out_dir, tdm_result_file_name(res.get(), i));
  }
  log_summary(command, json::parse(tdm_result_report(res.get())));
  return 0;
}
