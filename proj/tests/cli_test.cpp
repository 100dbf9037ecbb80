// Copyright 2026 The canpath Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Drives the canpath executable end to end through the shell.

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "canpath/canpath.hpp"
#include "json.hpp"
#include "support/fixtures.hpp"

namespace canpath {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int status = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("canpath_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliRun run(const std::string& args) const {
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = std::string("env -u CANPATH_MATCHER_URL ") + CANPATH_CLI + " " + args + " 2>" + err.string();
    CliRun r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int st = ::pclose(pipe);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    r.err = slurp(err);
    return r;
  }

  fs::path write(const std::string& name, const std::string& content) const {
    std::ofstream(dir_ / name) << content;
    return dir_ / name;
  }

  /// Town graph, a scenario on it and the synthesised outputs.
  void synthesize(const std::string& route_json) {
    std::ofstream g(dir_ / "town.graph");
    write_road_graph(g, *testing::town_graph());
    g.close();
    write("drive.json", R"({"graph": "town.graph", "route": )" + route_json +
                            R"(, "speed_kmh": 30, "model": "Renault Captur", "output": "out/drive"})");
    const CliRun r = run("synth " + (dir_ / "drive.json").string());
    ASSERT_EQ(r.status, 0) << r.err;
    ASSERT_TRUE(fs::exists(dir_ / "out/drive.log"));
    ASSERT_TRUE(fs::exists(dir_ / "out/drive.truth.gpx"));
    manifest_ = nlohmann::json::parse(slurp(dir_ / "out/drive.manifest.json"));
  }

  std::string start_arg() const {
    const auto s = manifest_["start"];
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.10f,%.10f,%.6f", s[0].get<double>(), s[1].get<double>(), s[2].get<double>());
    return buf;
  }

  fs::path dir_;
  nlohmann::json manifest_;
};

TEST_F(CliTest, InferWithoutStartIsUsageError) {
  const auto log = write("a.log", "(1.000000) can0 0C6#7DC8\n");
  const CliRun r = run("infer " + log.string() + " --model 'Renault Captur'");
  EXPECT_EQ(r.status, 2);
  const auto j = nlohmann::json::parse(r.err);
  EXPECT_EQ(j["error"], "usage");
  EXPECT_EQ(j["message"], "infer requires --start lat,lon,bearing");
  EXPECT_TRUE(r.out.empty());
}

TEST_F(CliTest, BadArgumentsExitTwo) {
  EXPECT_EQ(run("").status, 2);
  EXPECT_EQ(run("frobnicate").status, 2);
  EXPECT_EQ(run("logfilter x.log").status, 2);  // --swa-id missing
  const auto log = write("a.log", "(1.000000) can0 0C6#7DC8\n");
  EXPECT_EQ(run("infer " + log.string() + " --start 1,2 --model 'Renault Captur'").status, 2);
  EXPECT_EQ(run("infer " + log.string() + " --start 1,2,3 --model 'Nope'").status, 2);
  EXPECT_EQ(run("infer " + log.string() + " --start 1,2,3 --model 'Renault Captur' --params t_window=0").status, 2);
  EXPECT_EQ(run("infer " + log.string() + " --start 1,2,3 --model 'Renault Captur' --matcher bogus").status, 2);
}

TEST_F(CliTest, MissingFileExitsOneWithJson) {
  const CliRun r = run("compare " + (dir_ / "nope.gpx").string() + " " + (dir_ / "nope.gpx").string());
  EXPECT_EQ(r.status, 1);
  EXPECT_EQ(nlohmann::json::parse(r.err)["error"], "io");
}

TEST_F(CliTest, MalformedLogReportsLine) {
  const auto log = write("bad.log", "(1.000000) can0 0C6#7DC8\n(1.01) can0 0C6#7DZ8\n");
  const CliRun strict = run("decode " + log.string() + " --model 'Renault Captur'");
  EXPECT_EQ(strict.status, 1);
  EXPECT_NE(strict.err.find("line 2"), std::string::npos) << strict.err;
  const CliRun lax = run("decode --permissive " + log.string() + " --model 'Renault Captur'");
  EXPECT_EQ(lax.status, 0);
  EXPECT_EQ(lax.out, "timestamp,kind,value\n1.000000,angle_deg,-5.67\n");
}

TEST_F(CliTest, DecodeSeries) {
  const auto log = write("d.log",
                         "(1.000000) can0 0C6#7DC8\n"
                         "(1.005000) can0 7E8#03410D21AAAAAAAA\n"
                         "(1.006000) can0 7DF#02010DAAAAAAAAAA\n"
                         "(1.010000) can0 0C6#8000\n");
  const CliRun r = run("decode " + log.string() + " --model 'Renault Captur'");
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out,
            "timestamp,kind,value\n"
            "1.000000,angle_deg,-5.67\n"
            "1.005000,speed_kmh,33\n"
            "1.010000,angle_deg,0.01\n");
}

TEST_F(CliTest, LogfilterKeepsSwaAndResponses) {
  const auto log = write("f.log",
                         "(1.000000) can0 0C6#7DC8\n"
                         "(1.001000) can0 123#00\n"
                         "(1.002000) can0 7DF#02010DAAAAAAAAAA\n"
                         "(1.003000) can0 7E8#03410D21AAAAAAAA\n"
                         "(1.004000) can0 7E9#03410D21AAAAAAAA\n");
  const CliRun r = run("logfilter " + log.string() + " --swa-id 0C6");
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out, "(1.000000) can0 0C6#7DC8\n(1.003000) can0 7E8#03410D21AAAAAAAA\n");
  const CliRun to_file = run("logfilter " + log.string() + " --swa-id 0C6 -o " + (dir_ / "kept.log").string());
  ASSERT_EQ(to_file.status, 0);
  EXPECT_EQ(slurp(dir_ / "kept.log"), r.out);
}

TEST_F(CliTest, CompareIdenticalTracks) {
  synthesize(R"([1000, 1001, 2002, 2012])");
  const auto truth = (dir_ / "out/drive.truth.gpx").string();
  const CliRun r = run("compare " + truth + " " + truth + " --id self");
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "id,length_km,accuracy");
  EXPECT_NE(r.out.find("self,"), std::string::npos);
  EXPECT_NE(r.out.find(",1.000000\n"), std::string::npos) << r.out;
}

TEST_F(CliTest, SynthInferCompareRoundTrip) {
  synthesize(R"([1000, 1001, 2002, 2012])");
  const std::string graph = (dir_ / "town.graph").string();
  const std::string gpx = (dir_ / "inferred.gpx").string();
  const CliRun inf = run("infer " + (dir_ / "out/drive.log").string() + " --model 'Renault Captur' --start " +
                      start_arg() + " --matcher internal:" + graph + " -o " + gpx);
  ASSERT_EQ(inf.status, 0) << inf.err;
  EXPECT_NE(slurp(gpx + ".diag.txt").find("matcher: internal"), std::string::npos);
  EXPECT_NE(slurp(gpx).find("<name>drive</name>"), std::string::npos);
  const CliRun cmp = run("compare --no-header --matcher internal:" + graph + " " + gpx + " " +
                      (dir_ / "out/drive.truth.gpx").string());
  ASSERT_EQ(cmp.status, 0) << cmp.err;
  const double acc = std::stod(cmp.out.substr(cmp.out.rfind(',') + 1));
  EXPECT_GE(acc, 0.95) << cmp.out;
  EXPECT_EQ(cmp.out.rfind("inferred,", 0), 0u);
}

TEST_F(CliTest, RewheelFindsSteeringId) {
  synthesize(R"([1000, 1001, 2002, 2012])");
  const CliRun r = run("rewheel " + (dir_ / "out/drive.log").string());
  ASSERT_EQ(r.status, 0) << r.err;
  std::istringstream lines(r.out);
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  EXPECT_EQ(header.rfind("id,count,avg_hamming,byte0", 0), 0u);
  EXPECT_EQ(first.rfind("0x0C6,", 0), 0u) << r.out;
}

TEST_F(CliTest, TuneSmallGrid) {
  synthesize(R"([1000, 1001, 2002, 2012])");
  write("tune.json", R"({"tracks": ["out/drive.manifest.json"],
    "grids": {"t_window": [0.1, 1.0], "speed_max": [50], "steer_max": [35], "max_interpolation_points": [30]}})");
  const CliRun r = run("tune " + (dir_ / "tune.json").string() + " --workers 2 --marginals " +
                    (dir_ / "marg.csv").string());
  ASSERT_EQ(r.status, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 3u) << r.out;
  EXPECT_EQ(rows[0], "t_window,speed_max,steer_max,max_interpolation_points,mean_accuracy");
  EXPECT_EQ(rows[1].rfind("0.1,50,35,30,", 0), 0u) << r.out;
  EXPECT_EQ(slurp(dir_ / "marg.csv").rfind("parameter,value,mean_accuracy\nt_window,0.1,", 0), 0u);
}

}  // namespace
}  // namespace canpath
