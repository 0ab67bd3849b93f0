#include "io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "common.hpp"

namespace tdmsim {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::validation: return "validation";
    case ErrorKind::fit: return "fit";
    case ErrorKind::no_trap: return "no_trap";
    case ErrorKind::saddle: return "saddle";
    case ErrorKind::escape: return "escape";
    case ErrorKind::io: return "io";
    case ErrorKind::parse: return "parse";
  }
  return "unknown";
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      fail(ErrorKind::io, "write failed for '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorKind::io, "cannot rename into '" + path + "'");
  }
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  const bool ok = EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) == 1;
  require(ok, ErrorKind::io, "SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

std::string trace_column_name(const Trace& t) {
  std::string name = to_string(t.node);
  if (t.channel >= 0) name += "[" + std::to_string(t.channel) + "]";
  return name;
}

std::string trace_to_csv(const Trace& t) {
  std::string out = "time," + trace_column_name(t) + "\n";
  out.reserve(out.size() + t.samples.size() * 40);
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    out += format_double(t.time_at(i));
    out += ',';
    out += format_double(t.samples[i]);
    out += '\n';
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    lines.push_back(trim(text.substr(0, nl)));
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return lines;
}

template <typename T>
T parse_number(std::string_view s, std::size_t line) {
  s = trim(s);
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrorKind::parse,
          "line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  return v;
}

std::pair<std::string_view, std::string_view> two_columns(std::string_view line, std::size_t n) {
  const auto comma = line.find(',');
  require(comma != std::string_view::npos, ErrorKind::parse,
          "line " + std::to_string(n) + ": expected two comma-separated columns");
  return {line.substr(0, comma), line.substr(comma + 1)};
}

}  // namespace

Trace trace_from_csv(std::string_view text) {
  const auto lines = split_lines(text);
  require(!lines.empty(), ErrorKind::parse, "trace CSV is empty");
  Trace t;
  t.node = Node::amp_out;
  t.channel = 0;
  {
    auto [c0, c1] = two_columns(lines[0], 1);
    std::string col(trim(c1));
    const auto br = col.find('[');
    const std::string node = col.substr(0, br);
    if (node == "dac_out" || node == "cap" || node == "amp_out" || node == "filtered") {
      t.node = parse_node(node);
      t.channel = -1;
      if (br != std::string::npos && col.back() == ']') {
        t.channel = parse_number<int>(std::string_view(col).substr(br + 1, col.size() - br - 2), 1);
      }
    }
  }
  std::vector<double> times;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto [c0, c1] = two_columns(lines[i], i + 1);
    times.push_back(parse_number<double>(c0, i + 1));
    t.samples.push_back(parse_number<double>(c1, i + 1));
  }
  require(times.size() >= 2, ErrorKind::parse, "trace CSV needs at least two rows");
  t.t0 = times.front();
  t.dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  require(t.dt > 0.0, ErrorKind::parse, "trace CSV times must increase");
  for (std::size_t i = 0; i < times.size(); ++i) {
    require(std::abs(times[i] - t.time_at(i)) <= 1e-6 * t.dt, ErrorKind::parse,
            "trace CSV times are not uniformly spaced (row " + std::to_string(i + 2) + ")");
  }
  t.validate();
  return t;
}

std::string schedule_to_csv(const TdmSchedule& s) {
  std::string out = "code,channel\n";
  out.reserve(out.size() + s.entries.size() * 10);
  for (const auto& e : s.entries) {
    out += std::to_string(e.code);
    out += ',';
    out += std::to_string(e.channel);
    out += '\n';
  }
  return out;
}

std::vector<ScheduleEntry> schedule_entries_from_csv(std::string_view text) {
  const auto lines = split_lines(text);
  require(!lines.empty() && lines[0] == "code,channel", ErrorKind::parse,
          "schedule CSV must start with a 'code,channel' header");
  std::vector<ScheduleEntry> entries;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto [c0, c1] = two_columns(lines[i], i + 1);
    entries.push_back({parse_number<int>(c0, i + 1), parse_number<int>(c1, i + 1)});
  }
  return entries;
}

}  // namespace tdmsim
