#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "odlc/cli/cli.hpp"
#include "odlc/fog/fog_node.hpp"
#include "odlc/fog/server.hpp"
#include "odlc/util/files.hpp"
#include "test_util.hpp"

namespace odlc::cli {
namespace {

using nlohmann::json;

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args, const std::string& stdin_text = "") {
  args.insert(args.begin(), "odlc");
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  Run r;
  r.code = dispatch(args, in, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Last JSON object on a stream.
json last_json(const std::string& text) {
  const auto trimmed = text.substr(0, text.find_last_not_of('\n') + 1);
  return json::parse(trimmed.substr(trimmed.rfind('\n') + 1));
}

const char* kDoc =
    "# HELP up Whether the target is up.\n"
    "# TYPE up gauge\n"
    "up 1\n"
    "# HELP node_load1 One minute load.\n"
    "# TYPE node_load1 gauge\n"
    "node_load1 0.25\n";

TEST(CliTest, ReduceFromStdin) {
  const auto r = run({"reduce", "--strip-help", "--allowlist", "up"}, kDoc);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "# TYPE up gauge\nup 1\n");
  const auto stats = last_json(r.err);
  EXPECT_EQ(stats["bytes_before"].get<std::size_t>(), std::string(kDoc).size());
  EXPECT_EQ(stats["bytes_after"].get<std::size_t>(), r.out.size());
}

TEST(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run({"reduce", "--no-such-flag"}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
}

TEST(CliTest, DomainErrorsExitOneWithJson) {
  const auto r = run({"reduce"}, "up{ 1\n");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(last_json(r.err)["error"], "ParseError");
  const auto bad_scale = run({"reduce", "--interval-scale", "0.5"}, kDoc);
  EXPECT_EQ(bad_scale.code, 1);
}

TEST(CliTest, FogServeOnOccupiedPort) {
  test::TempDir dir("cli");
  fog::FogNode fog;
  fog::FrameServer holder(fog, "127.0.0.1", 0);
  const auto addr = "127.0.0.1:" + std::to_string(holder.port());
  const auto r = run({"fog", "serve", "--listen", addr, "--query-socket", (dir / "q.sock").string(), "--duration",
                      "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(last_json(r.err)["error"], "AddressInUse");

  // Same through the installed binary.
  const std::string cmd = std::string(ODLC_CLI_PATH) + " fog serve --listen " + addr + " --query-socket " +
                          (dir / "q2.sock").string() + " --duration 1 2>" + (dir / "err.txt").string();
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 1);
  EXPECT_EQ(last_json(files::read_file(dir / "err.txt"))["error"], "AddressInUse");
}

TEST(CliTest, SettingsPrecedence) {
  test::TempDir dir("cli");
  const auto cfg = dir / "run.conf";
  files::write_file_atomic(cfg, "devices = 1\nduration_s = 10\nseed = 5\n");
  auto devices = [&](const std::vector<std::string>& extra) {
    std::vector<std::string> args{"replay", "--config", cfg.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = run(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return json::parse(r.out)["devices"].size();
  };
  ::unsetenv("ODLC_DEVICES");
  EXPECT_EQ(devices({}), 1u);
  ::setenv("ODLC_DEVICES", "2", 1);
  EXPECT_EQ(devices({}), 2u);
  EXPECT_EQ(devices({"--set", "devices=3"}), 3u);
  EXPECT_EQ(devices({"--set", "devices=3", "--devices", "4"}), 4u);
  ::unsetenv("ODLC_DEVICES");

  const auto unknown = run({"replay", "--config", cfg.string(), "--set", "bogus=1"});
  EXPECT_EQ(unknown.code, 1);
  EXPECT_EQ(last_json(unknown.err)["error"], "ConfigError");
}

}  // namespace
}  // namespace odlc::cli
