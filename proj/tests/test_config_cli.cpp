#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "mfcce/runner.hpp"

using namespace mfcce;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("mfcce_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::vector<std::vector<int>> read_pgm(const fs::path& p, std::string* header) {
  std::ifstream is(p);
  std::string magic, comment;
  std::getline(is, magic);
  EXPECT_EQ(magic, "P2");
  std::getline(is, comment);
  if (header) *header = comment;
  int w = 0, h = 0, maxv = 0;
  is >> w >> h >> maxv;
  EXPECT_EQ(maxv, 255);
  std::vector<std::vector<int>> img(h, std::vector<int>(w));
  for (auto& row : img)
    for (auto& v : row) is >> v;
  return img;
}

}  // namespace

TEST(Config, DefaultsValidate) { EXPECT_NO_THROW(RunConfig{}.validate()); }

TEST(Config, RoundTrip) {
  RunConfig c;
  c.command = "gap";
  c.a = -0.75;
  c.b = 1.25;
  c.p = {0.5, 0.3, 0.2, 0.0};
  c.alphas = {0.1, 0.7};
  c.Ns = {10, 30};
  c.seed = 123456789012345ULL;
  c.tol = 1e-3;
  c.action = 0.3;
  c.out = "dir/x.csv";
  const RunConfig back = parse_config_text(header_json(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(header_json(back), header_json(c));
  EXPECT_EQ(parse_config_text(header_json(RunConfig{})), RunConfig{});
}

TEST(Config, PartialObjectKeepsDefaults) {
  const auto c = parse_config_text(R"({"command": "poc", "N": 40})");
  EXPECT_EQ(c.command, "poc");
  EXPECT_EQ(c.Ns, std::vector<std::size_t>{40});
  EXPECT_EQ(c.reps, RunConfig{}.reps);
}

TEST(Config, UnknownFieldIsNamed) {
  try {
    parse_config_text(R"({"command": "gap", "repz": 10})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "repz");
  }
}

TEST(Config, WrongTypeIsNamed) {
  for (const auto& [text, field] : std::vector<std::pair<std::string, std::string>>{
           {R"({"reps": "many"})", "reps"},
           {R"({"a": [1]})", "a"},
           {R"({"p": [1, 0, 0]})", "p"},
           {R"({"command": 3})", "command"},
           {R"({"steps": -4})", "steps"},
           {R"({"alpha": [0.5, "x"]})", "alpha"}}) {
    try {
      parse_config_text(text);
      ADD_FAILURE() << text;
    } catch (const ConfigError& e) {
      EXPECT_EQ(e.field(), field) << text;
    }
  }
}

TEST(Config, SemanticErrorsAreNamed) {
  for (const auto& [text, field] : std::vector<std::pair<std::string, std::string>>{
           {R"({"a": 0.5})", "a"},
           {R"({"p": [0.5, 0.5, 0.5, 0]})", "p"},
           {R"({"N": [100, 50]})", "N"},
           {R"({"command": "nope"})", "command"},
           {R"({"alpha": 1.5})", "alpha"},
           {R"({"action": 3})", "action"}}) {
    try {
      parse_config_text(text);
      ADD_FAILURE() << text;
    } catch (const ConfigError& e) {
      EXPECT_EQ(e.field(), field) << text;
    }
  }
}

TEST(Config, SyntaxErrorReportsLine) {
  try {
    parse_config_text("{\n  \"a\": -1,\n  \"b\": ,\n}\n");
    FAIL();
  } catch (const ConfigError& e) {
    ASSERT_TRUE(e.line());
    EXPECT_EQ(*e.line(), 3u);
  }
}

TEST(Config, HeaderLineOfCsvParses) {
  RunConfig c;
  c.command = "mfgap";
  c.reps = 17;
  const std::string csv = "# " + header_json(c) + "\nestimate,raw\n1,2\n";
  EXPECT_EQ(parse_config_text(csv), c);
}

TEST(Runner, SiblingPathAndLabels) {
  EXPECT_EQ(sibling_path("out/region.csv", "_alpha0.5", ".pgm"), fs::path("out/region_alpha0.5.pgm"));
  EXPECT_EQ(number_label(0.5), "0.5");
  EXPECT_EQ(number_label(0.0), "0");
  EXPECT_EQ(number_label(0.1), "0.1");
}

TEST(Runner, RegionOutputs) {
  const auto dir = scratch("region");
  RunConfig c;
  c.resolution = 21;
  c.alphas = {0.0, 0.5};
  c.out = (dir / "region.csv").string();
  std::ostringstream log;
  ASSERT_EQ(run(c, 1, log), 0);

  const std::string csv = slurp(c.out);
  EXPECT_EQ(csv.rfind("# ", 0), 0u);
  EXPECT_EQ(parse_config_text(csv), c);
  EXPECT_NE(csv.find("\np11,p22,p12,p21,alpha,h,k,margin,is_cce\n"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2 + 2 * 21 * 21);

  for (const char* label : {"0", "0.5"}) {
    std::string header;
    const auto img = read_pgm(dir / (std::string("region_alpha") + label + ".pgm"), &header);
    EXPECT_EQ(parse_config_text(header), c);
    ASSERT_EQ(img.size(), 21u);
    bool black = false, white = false;
    for (int r = 0; r < 21; ++r)
      for (int col = 0; col < 21; ++col) {
        const int v = img[r][col];
        EXPECT_TRUE(v == 0 || v == 255 || v == 128);
        if (20 - r == col) {
          EXPECT_EQ(v, 255) << r << ' ' << col;
        }
        black |= v == 0;
        white |= v == 255;
      }
    EXPECT_TRUE(black);
    EXPECT_TRUE(white);
  }
}

TEST(Runner, OutputsAreByteIdenticalAndRegenerable) {
  const auto dir = scratch("determinism");
  RunConfig c;
  c.command = "gap";
  c.p = {0.5, 0.3, 0.2, 0.0};
  c.Ns = {5, 9};
  c.reps = 20;
  c.steps = 10;
  c.G = 5;
  c.seed = 77;
  c.out = (dir / "gap.csv").string();
  std::ostringstream log;
  ASSERT_EQ(run(c, 1, log), 0);
  const std::string first = slurp(c.out);
  ASSERT_EQ(run(c, 3, log), 0);
  EXPECT_EQ(slurp(c.out), first);

  // Regenerate from the header alone.
  const RunConfig again = parse_config_text(first);
  fs::remove(c.out);
  ASSERT_EQ(run(again, 2, log), 0);
  EXPECT_EQ(slurp(c.out), first);
}

TEST(Runner, EveryCommandWritesItsTable) {
  const auto dir = scratch("commands");
  const std::vector<std::pair<std::string, std::string>> expected{
      {"mfgap", "estimate,raw,se,ci_lo,ci_hi,best_deviation,closed_form,closed_form_raw"},
      {"poc", "N,estimate,se,class_mu1,class_mu2"},
      {"consistency", "class,prob,count,t,w2"},
      {"mkv", "t,mean,var"}};
  for (const auto& [cmd, columns] : expected) {
    RunConfig c;
    c.command = cmd;
    c.p = {0.5, 0.0, 0.0, 0.5};
    c.Ns = {4, 8};
    c.reps = 200;
    c.steps = 8;
    c.G = 5;
    c.particles = 200;
    c.tol = 0.5;
    c.out = (dir / (cmd + ".csv")).string();
    std::ostringstream log;
    ASSERT_EQ(run(c, 1, log), 0) << cmd;
    std::istringstream is(slurp(c.out));
    std::string header, cols;
    std::getline(is, header);
    std::getline(is, cols);
    EXPECT_EQ(parse_config_text(header), c) << cmd;
    EXPECT_EQ(cols, columns) << cmd;
  }
  EXPECT_TRUE(fs::exists(dir / "mkv_trace.csv"));
}
