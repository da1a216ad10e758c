#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome cli(const std::string& args) {
  const fs::path tmp = fs::temp_directory_path() / ("homebot_cli_" + std::to_string(::getpid()) + ".out");
  const std::string cmd = std::string(HOMEBOT_CLI) + " " + args + " > " + tmp.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(tmp);
  std::ostringstream ss;
  ss << in.rdbuf();
  o.out = ss.str();
  fs::remove(tmp);
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string arena(const std::string& name) { return std::string(HOMEBOT_SCENARIO_DIR) + "/" + name + ".arena"; }

}  // namespace

TEST(Cli, GarbageSucceedsWithSummary) {
  const auto o = cli("--arena " + arena("garbage") + " --task garbage --deterministic-race -q");
  EXPECT_EQ(o.code, 0) << o.out;
  EXPECT_NE(o.out.find("task=garbage\n"), std::string::npos);
  EXPECT_NE(o.out.find("success=1\n"), std::string::npos);
  EXPECT_NE(o.out.find("score=4\n"), std::string::npos);
}

TEST(Cli, TimeoutExitsOne) {
  const auto o = cli("--arena " + arena("garbage") + " --task garbage --limit 5 -q");
  EXPECT_EQ(o.code, 1) << o.out;
  EXPECT_NE(o.out.find("success=0\n"), std::string::npos);
}

TEST(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(cli("--arena /nonexistent.arena --task garbage").code, 2);
  const auto unknown = cli("--arena " + arena("garbage") + " --task juggling");
  EXPECT_EQ(unknown.code, 2);
  EXPECT_NE(unknown.out.find("groceries"), std::string::npos);
  EXPECT_EQ(cli("--arena " + arena("garbage") + " --task luggage").code, 2);
  EXPECT_EQ(cli("--task garbage").code, 2);
  EXPECT_EQ(cli("--arena " + arena("garbage") + " --task garbage --dt 0").code, 2);
}

TEST(Cli, TraceAndRenderAreByteStable) {
  const fs::path dir = fs::temp_directory_path() / ("homebot_cli_files_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::string traces[2], renders[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path t = dir / ("trace" + std::to_string(i)), r = dir / ("render" + std::to_string(i) + ".pgm");
    const auto o = cli("--arena " + arena("luggage") + " --task luggage --seed 11 -q --trace " + t.string() + " --render " + r.string());
    ASSERT_EQ(o.code, 0) << o.out;
    traces[i] = slurp(t);
    renders[i] = slurp(r);
  }
  fs::remove_all(dir);
  EXPECT_FALSE(traces[0].empty());
  EXPECT_EQ(traces[0], traces[1]);
  EXPECT_EQ(renders[0].rfind("P5\n", 0), 0u);
  EXPECT_EQ(renders[0], renders[1]);
}
