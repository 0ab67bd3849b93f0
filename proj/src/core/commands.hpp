#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"

namespace tdmsim {

struct OutputFile {
  std::string name;  // relative to the output directory
  std::string content;
};

/// Everything a subcommand produces. Nothing touches the disk until
/// write_outputs, so a failing command leaves no files behind.
struct CommandResult {
  std::string command;
  nlohmann::json report;
  std::vector<OutputFile> files;  // the report itself is the last entry
  std::vector<std::string> warnings;
};

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<double> sim_dt;
  std::optional<double> duration;
  std::optional<std::size_t> record_stride;
  std::string group;          // simulate / analyze: restrict to one waveform group
  std::string trace_path;     // analyze: external (time, volts) CSV
  std::string schedule_path;  // simulate: (code, channel) CSV instead of compiling
};

const std::vector<std::string>& command_names();

CommandResult run_command(const std::string& name, const Config& cfg, const RunOptions& opts);

void write_outputs(const CommandResult& result, const std::string& out_dir);

// "-7.9(3)": value rounded to the first significant digit of sigma.
std::string format_with_uncertainty(double value, double sigma);

}  // namespace tdmsim
