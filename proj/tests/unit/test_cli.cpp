#include <gtest/gtest.h>

#include <bcm/error.hpp>
#include <bcmlab/commands.hpp>
#include <bcmlab/config.hpp>
#include <bcmlab/svg.hpp>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

using namespace bcmlab;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::string kDefault = std::string(BCM_CONFIG_DIR) + "/default_1d.yaml";
const std::string kSweep = std::string(BCM_CONFIG_DIR) + "/sweep_3pair.yaml";

std::string replaced(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  if (at != std::string::npos) text.replace(at, from.size(), to);
  return text;
}

// Error text for a config that must fail, or "" if it parsed.
std::string error_of(const std::string& text) {
  try {
    parse_config(text, "bad.yaml");
  } catch (const bcm::Error& e) {
    EXPECT_EQ(e.kind(), bcm::ErrorKind::validation);
    return e.what();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("bcmlab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Config, CanonicalFormRoundTrips) {
  for (const auto& path : {kDefault, kSweep}) {
    const auto cfg = load_config(path);
    const auto once = emit_canonical(cfg);
    const auto twice = emit_canonical(parse_config(once));
    EXPECT_EQ(once, twice) << path;
  }
}

TEST(Config, DefaultValues) {
  const auto cfg = load_config(kDefault);
  EXPECT_EQ(cfg.dim, 1);
  EXPECT_DOUBLE_EQ(cfg.T, 7.2);
  EXPECT_DOUBLE_EQ(cfg.h, 0.02);
  EXPECT_EQ(cfg.potentials.size(), 3u);
  EXPECT_EQ(cfg.alphas.size(), 8u);
  EXPECT_EQ(cfg.reference, "q0");
}

TEST(Config, ErrorsNameLineAndKey) {
  const auto text = read_file(kDefault);
  const std::regex located(R"(^bad\.yaml:\d+:\d+: )");

  auto odd = error_of(replaced(text, "  cfl: 1.0\n", "  cfl: 1.0\n  steps: 361\n"));
  EXPECT_TRUE(std::regex_search(odd, located)) << odd;
  EXPECT_NE(odd.find("time.steps: must be even, got 361"), std::string::npos) << odd;
  EXPECT_NE(odd.find("bad.yaml:10:"), std::string::npos) << odd;

  auto unknown = error_of(replaced(text, "  cfl: 1.0\n", "  cfl: 1.0\n  stepz: 4\n"));
  EXPECT_NE(unknown.find("time.stepz: unknown key"), std::string::npos) << unknown;

  auto missing = error_of(replaced(text, "  h: 0.02\n", ""));
  EXPECT_NE(missing.find("solver.h: missing required key"), std::string::npos) << missing;

  auto nan = error_of(replaced(text, "h: 0.02", "h: fine"));
  EXPECT_NE(nan.find("solver.h: expected a real number, got 'fine'"), std::string::npos) << nan;

  auto short_t = error_of(replaced(text, "T: 7.2", "T: 5.0"));
  EXPECT_NE(short_t.find("time.T: must exceed 2 L(K, omega)"), std::string::npos) << short_t;

  auto touching = error_of(replaced(text, "k: {lo: [-1.0], hi: [0.0]}", "k: {lo: [1.0], hi: [2.5]}"));
  EXPECT_NE(touching.find("geometry.k: must lie at positive distance from omega"), std::string::npos) << touching;

  auto alphas = error_of(replaced(text, "alphas: [1e-1, 1e-2,", "alphas: [1e-2, 1e-1,"));
  EXPECT_NE(alphas.find("control.alphas: must be strictly decreasing"), std::string::npos) << alphas;

  auto id = error_of(replaced(text, "data: q1", "data: q9"));
  EXPECT_NE(id.find("run.data: unknown potential id 'q9'"), std::string::npos) << id;

  EXPECT_NE(error_of("- just\n- a list\n").find("expected a mapping"), std::string::npos);
}

TEST(Config, MissingFileIsValidationError) {
  try {
    load_config("/nonexistent/cfg.yaml");
    FAIL();
  } catch (const bcm::Error& e) {
    EXPECT_EQ(e.kind(), bcm::ErrorKind::validation);
  }
}

TEST(Svg, DeterministicOutput) {
  PlotSpec spec{"decay", "sigma", "error", true, true, {{"N=1", {5, 10, 20}, {1, 0.3, 0.08}, Series::Style::markers_line}}, {"slope -1.9"}};
  std::ostringstream a, b;
  write_svg(a, spec);
  write_svg(b, spec);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str().find("<polyline"), std::string::npos);
  EXPECT_NE(a.str().find("slope -1.9"), std::string::npos);
}

TEST(Svg, SinglePointIsMarker) {
  PlotSpec spec{"one", "x", "y", false, false, {{"s", {1}, {2}, Series::Style::line}}, {}};
  std::ostringstream os;
  write_svg(os, spec);
  EXPECT_EQ(os.str().find("<polyline"), std::string::npos);
  EXPECT_NE(os.str().find("<circle"), std::string::npos);
}

TEST(Svg, EmptyTableFails) {
  PlotSpec spec{"none", "x", "y", true, false, {{"s", {-1, 0}, {1, 2}, Series::Style::line}}, {}};
  std::ostringstream os;
  EXPECT_THROW(write_svg(os, spec), bcm::Error);  // nothing positive on a log axis
}

TEST(Svg, EscapesLabels) {
  PlotSpec spec{"a < b & c", "x", "y", false, false, {{"s", {1, 2}, {2, 3}, Series::Style::markers}}, {}};
  std::ostringstream os;
  write_svg(os, spec);
  EXPECT_NE(os.str().find("a &lt; b &amp; c"), std::string::npos);
}

TEST(Commands, UnknownSubcommandIsValidation) {
  const auto cfg = load_config(kDefault);
  EXPECT_EQ(run_command("frobnicate", cfg, {scratch("unknown"), false}), exit_validation);
}

TEST(Commands, SweepWritesOneRowPerPair) {
  const auto cfg = load_config(kSweep);
  const auto out = scratch("sweep");
  ASSERT_EQ(run_command("sweep", cfg, {out, false}), exit_ok);
  std::istringstream csv(read_file(out / "sweep.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 4);
  EXPECT_TRUE(fs::exists(out / "sweep.svg"));
  fs::remove_all(out);
}
