#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "analog_chain.hpp"
#include "tdm_compiler.hpp"

namespace tdmsim {

// Shortest round-trip decimal form.
std::string format_double(double v);

std::string read_file(const std::string& path);

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::string& path, std::string_view content);

std::string sha256_hex(std::string_view bytes);

// Header "time,<node>[<channel>]" (no brackets for the shared DAC line).
std::string trace_column_name(const Trace& t);
std::string trace_to_csv(const Trace& t);

/// Two-column (time, volts) CSV with one header row. Times must be uniformly
/// spaced to 1e-6 of the step. The node is taken from the header when it
/// names one, otherwise amp_out.
Trace trace_from_csv(std::string_view text);

std::string schedule_to_csv(const TdmSchedule& s);
// Rows of (code, channel) after a "code,channel" header.
std::vector<ScheduleEntry> schedule_entries_from_csv(std::string_view text);

}  // namespace tdmsim
