#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const std::string cli = TDMSIM_CLI_PATH;
const std::string configs = TDMSIM_CONFIG_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tdmsim_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = "TDMSIM_LOG_LEVEL=off " + cli + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string one_group(const std::string& channels) {
  return R"({"waveforms": {"groups": [{"name": "g", "channels": [)" + channels + "]}]}}";
}

std::string channel(int id, double level) {
  return R"({"channel_id": )" + std::to_string(id) +
         R"(, "segments": [{"kind": "constant", "level": )" + std::to_string(level) +
         R"(, "duration": 1e-6}]})";
}

}  // namespace

TEST_CASE("compile writes two schedules with no clamps") {
  const auto out = scratch("compile");
  REQUIRE(run("compile --config " + configs + "/trap_demo.json --out " + out.string()) == 0);
  CHECK(fs::exists(out / "schedule_A.csv"));
  CHECK(fs::exists(out / "schedule_B.csv"));
  const auto report = nlohmann::json::parse(slurp(out / "compile_report.json"));
  for (const auto& g : report.at("groups")) CHECK(g.at("total_clamp_events") == 0);
  CHECK(report.at("config_hash").get<std::string>().size() == 64);
}

TEST_CASE("outputs are byte-identical across runs") {
  const auto a = scratch("repeat_a");
  const auto b = scratch("repeat_b");
  for (const char* cmd : {"simulate", "tolerances", "analyze"}) {
    const std::string args = std::string(cmd) + " --config " + configs + "/trap_demo.json --seed 9 --out ";
    REQUIRE(run(args + a.string()) == 0);
    REQUIRE(run(args + b.string()) == 0);
  }
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
    ++files;
  }
  CHECK(files > 10);
}

TEST_CASE("clamped waveform warns but succeeds") {
  const auto dir = scratch("clamp");
  spit(dir / "c.json", one_group(channel(0, 30.0) + "," + channel(1, 0.0)));
  REQUIRE(run("compile --config " + (dir / "c.json").string() + " --out " + (dir / "out").string()) == 0);
  const auto report = nlohmann::json::parse(slurp(dir / "out" / "compile_report.json"));
  CHECK(report.at("groups")[0].at("total_clamp_events").get<int>() > 0);
  CHECK(report.at("warnings").size() == 1);
}

TEST_CASE("missing channel id fails without partial output") {
  const auto dir = scratch("missing");
  spit(dir / "c.json", one_group(channel(0, 1.0) + "," + channel(2, 1.0)));
  CHECK(run("compile --config " + (dir / "c.json").string() + " --out " + (dir / "out").string()) != 0);
  CHECK_FALSE(fs::exists(dir / "out"));
}

TEST_CASE("empty schedule fails") {
  const auto dir = scratch("empty");
  spit(dir / "s.csv", "code,channel\n");
  CHECK(run("simulate --config " + configs + "/trap_demo.json --schedule " + (dir / "s.csv").string() +
            " --out " + (dir / "out").string()) != 0);
}

TEST_CASE("external schedule simulates") {
  const auto dir = scratch("schedule");
  spit(dir / "s.csv", "code,channel\n100,0\n16000,1\n200,0\n15000,1\n");
  REQUIRE(run("simulate --config " + configs + "/trap_demo.json --schedule " + (dir / "s.csv").string() +
              " --sim-dt 1e-9 --duration 2e-7 --out " + (dir / "out").string()) == 0);
  CHECK(fs::exists(dir / "out" / "trace_external_amp_out_1.csv"));
}

TEST_CASE("analyze runs fits on an external trace") {
  const auto dir = scratch("trace");
  std::string csv = "time,volts\n";
  for (int i = 0; i <= 2000; ++i) {
    const double t = i * 1e-4;
    csv += std::to_string(t) + "," + std::to_string(5.0 * std::exp(-t / 0.233)) + "\n";
  }
  spit(dir / "t.csv", csv);
  spit(dir / "c.json", R"({"analysis": {"exponential_fit": {"t_start": 0.0, "t_end": 0.2}}})");
  REQUIRE(run("analyze --config " + (dir / "c.json").string() + " --trace " + (dir / "t.csv").string() +
              " --out " + (dir / "out").string()) == 0);
  const auto report = nlohmann::json::parse(slurp(dir / "out" / "analyze_report.json"));
  CHECK(report.at("fits").at("exponential_fit").at("tau").get<double>() ==
        doctest::Approx(0.233).epsilon(1e-4));
}

TEST_CASE("reports for tolerances, feasibility and trap-solve") {
  const auto out = scratch("reports");
  const std::string cfg = " --config " + configs + "/trap_demo.json --out " + out.string();
  REQUIRE(run("tolerances" + cfg) == 0);
  REQUIRE(run("feasibility" + cfg) == 0);
  REQUIRE(run("trap-solve" + cfg) == 0);
  REQUIRE(run("field-map" + cfg) == 0);
  const auto tol = nlohmann::json::parse(slurp(out / "tolerances_report.json"));
  CHECK(tol.at("summary") == "-7.9(3) V to 15.4(5) V");
  const auto fe = nlohmann::json::parse(slurp(out / "feasibility_report.json"));
  CHECK(fe.at("n_max").get<int>() >= 100);
  const auto trap = nlohmann::json::parse(slurp(out / "trap_solve_report.json"));
  CHECK(trap.at("secular").at("positive_definite") == true);
  CHECK(trap.at("secular").at("modes").size() == 3);
  CHECK(trap.at("grid_scan").at("agrees_within_cell") == true);
  CHECK(slurp(out / "field_map.csv").rfind("x,y,z,pseudo_V,dc_V,total_V\n", 0) == 0);
}

TEST_CASE("bad invocations exit nonzero") {
  const auto out = scratch("bad");
  CHECK(run("compile --config /nonexistent.json --out " + out.string()) != 0);
  CHECK(run("frobnicate --config " + configs + "/trap_demo.json") != 0);
  CHECK(run("") != 0);
  const auto dir = scratch("badjson");
  spit(dir / "c.json", "{ not json");
  CHECK(run("compile --config " + (dir / "c.json").string() + " --out " + out.string()) != 0);
  CHECK(run("trap-solve --config " + configs + "/clipped_sine.json --out " + out.string()) != 0);
}
