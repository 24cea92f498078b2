#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <string>

#include "matx/io.hpp"

namespace fs = std::filesystem;
using namespace matx;

namespace {

struct CliRun {
  int code = -1;
  std::string output;
};

CliRun matx_cli(const std::string& args) {
  const std::string cmd = std::string(MATX_BIN) + " " + args + " 2>&1";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) r.output.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / ("matx_cli_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    ASSERT_EQ(matx_cli("make-demo --out " + demo().string() + " --seed 3 --size 32").code, 0);
    std::ofstream(root_ / "short.json")
        << R"({"projection_iters": 4, "transfer_iters": 3, "directions": 8})";
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static fs::path demo() { return root_ / "demo"; }
  static std::string shortcfg() { return " --config " + (root_ / "short.json").string(); }
  static fs::path root_;
};

fs::path Cli::root_;

TEST_F(Cli, HelpAndUnknownCommand) {
  EXPECT_EQ(matx_cli("--help").code, 0);
  EXPECT_EQ(matx_cli("frobnicate").code, 2);
  EXPECT_EQ(matx_cli("render --pack").code, 2);
}

TEST_F(Cli, MissingMapNamesTheFile) {
  const fs::path pack = root_ / "broken";
  fs::create_directories(pack);
  for (const char* f : {"albedo.png", "normal.png", "specular.png"})
    fs::copy_file(demo() / "gray" / f, pack / f, fs::copy_options::overwrite_existing);
  const CliRun r = matx_cli("project --pack " + pack.string() + " --generator " +
                         (demo() / "generator.bin").string() + " --out " +
                         (root_ / "x.bin").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("roughness.png"), std::string::npos) << r.output;
  EXPECT_EQ(matx_cli("render --pack " + pack.string() + " --out " + (root_ / "x.png").string()).code, 2);
  EXPECT_EQ(matx_cli("check-tileable --pack " + pack.string()).code, 2);
}

TEST_F(Cli, BadConfigReportsPosition) {
  std::ofstream(root_ / "bad.json") << "{\n  \"transfer_iters\": 3,\n  \"bogus\": 1\n}";
  const CliRun r = matx_cli("project --pack " + (demo() / "gray").string() + " --generator " +
                         (demo() / "generator.bin").string() + " --out " +
                         (root_ / "x.bin").string() + " --config " + (root_ / "bad.json").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("bogus"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("line 3"), std::string::npos) << r.output;
}

TEST_F(Cli, ProjectIsSeedDeterministic) {
  const std::string base = "project --pack " + (demo() / "bricks").string() + " --generator " +
                           (demo() / "generator.bin").string() + shortcfg() + " --seed 11 --out ";
  ASSERT_EQ(matx_cli(base + (root_ / "p1.bin").string()).code, 0);
  ASSERT_EQ(matx_cli(base + (root_ / "p2.bin").string()).code, 0);
  EXPECT_EQ(bytes(root_ / "p1.bin"), bytes(root_ / "p2.bin"));
  const std::string report = bytes(root_ / "p1.json");
  EXPECT_NE(report.find("\"seed\": 11"), std::string::npos);
  EXPECT_NE(report.find("\"iterations\": 4"), std::string::npos);
}

TEST_F(Cli, TransferWithImplicitRule) {
  ASSERT_EQ(matx_cli("project --pack " + (demo() / "gray").string() + " --generator " +
                     (demo() / "generator.bin").string() + shortcfg() + " --out " +
                     (root_ / "g.bin").string())
                .code,
            0);
  const std::string base = "transfer --theta " + (root_ / "g.bin").string() + " --pack " +
                           (demo() / "gray").string() + " --target " +
                           (demo() / "targets" / "red.png").string() + shortcfg() + " --seed 5 --out ";
  const CliRun r = matx_cli(base + (root_ / "t1").string());
  ASSERT_EQ(r.code, 0) << r.output;
  for (const char* f : {"albedo.png", "normal.png", "roughness.png", "specular.png", "render.png",
                        "tiled2x2.png", "report.json", "theta.bin"})
    EXPECT_TRUE(fs::exists(root_ / "t1" / f)) << f;
  const Image tiled = read_png(root_ / "t1" / "tiled2x2.png");
  EXPECT_EQ(tiled.width, 64);
  EXPECT_NE(bytes(root_ / "t1" / "report.json").find("\"seed\": 5"), std::string::npos);
  EXPECT_EQ(matx_cli("check-tileable --pack " + (root_ / "t1").string()).code, 0);

  ASSERT_EQ(matx_cli(base + (root_ / "t2").string()).code, 0);
  for (const char* f : {"albedo.png", "normal.png", "theta.bin"})
    EXPECT_EQ(bytes(root_ / "t1" / f), bytes(root_ / "t2" / f)) << f;
}

TEST_F(Cli, UnknownTargetLabelIsBadInput) {
  ASSERT_EQ(matx_cli("project --pack " + (demo() / "bricks").string() + " --generator " +
                     (demo() / "generator.bin").string() + shortcfg() + " --out " +
                     (root_ / "b.bin").string())
                .code,
            0);
  const CliRun r = matx_cli("transfer --theta " + (root_ / "b.bin").string() + " --pack " +
                         (demo() / "bricks").string() + " --target " +
                         (demo() / "targets" / "red.png").string() + " --rule 1:0:2 --out " +
                         (root_ / "bad").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("label 2"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("1:0:2"), std::string::npos) << r.output;
  EXPECT_EQ(matx_cli("transfer --theta " + (root_ / "b.bin").string() + " --pack " +
                     (demo() / "bricks").string() + " --target " +
                     (demo() / "targets" / "red.png").string() + " --rule 1:0 --out " +
                     (root_ / "bad").string())
                .code,
            2);
}

TEST_F(Cli, PerPixelBaseline) {
  const CliRun r = matx_cli("transfer --per-pixel --pack " + (demo() / "gray").string() + " --target " +
                         (demo() / "targets" / "blue.png").string() + shortcfg() + " --out " +
                         (root_ / "pp").string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(root_ / "pp" / "render.png"));
  EXPECT_FALSE(fs::exists(root_ / "pp" / "theta.bin"));
}

TEST_F(Cli, TileOneEqualsPlainRender) {
  const std::string pack = (demo() / "bricks").string();
  ASSERT_EQ(matx_cli("render --pack " + pack + " --out " + (root_ / "r0.png").string()).code, 0);
  ASSERT_EQ(matx_cli("render --pack " + pack + " --tile 1 --out " + (root_ / "r1.png").string()).code, 0);
  EXPECT_EQ(bytes(root_ / "r0.png"), bytes(root_ / "r1.png"));
  ASSERT_EQ(matx_cli("render --pack " + pack + " --tile 3 --out " + (root_ / "r3.png").string()).code, 0);
  EXPECT_EQ(read_png(root_ / "r3.png").width, 96);
  EXPECT_EQ(matx_cli("render --pack " + pack + " --tile 0 --out " + (root_ / "r.png").string()).code, 2);
  EXPECT_EQ(matx_cli("render --pack " + pack + " --gamma -1 --out " + (root_ / "r.png").string()).code, 2);
}

TEST_F(Cli, FlatGrayHighlightPeaksAtCenter) {
  ASSERT_EQ(matx_cli("render --pack " + (demo() / "gray").string() + " --out " +
                     (root_ / "gray.png").string())
                .code,
            0);
  const Image img = read_png(root_ / "gray.png");
  const std::int64_t c = img.width / 2;
  for (std::int64_t y = 0; y < img.height; ++y)
    for (std::int64_t x = 0; x < img.width; ++x)
      ASSERT_LE(img.at(y, x, 0), img.at(c, c, 0)) << y << "," << x;
  EXPECT_GT(img.at(c, c, 0), img.at(0, 0, 0));
}

TEST_F(Cli, CheckTileable) {
  EXPECT_EQ(matx_cli("check-tileable --pack " + (demo() / "gray").string()).code, 0);
  EXPECT_EQ(matx_cli("check-tileable --pack " + (demo() / "bricks").string()).code, 0);

  // Albedo ramp: the wrap line jumps from 1 back to 0.
  MaterialMaps m = load_pack(demo() / "gray", DType::f64).maps;
  auto v = m.albedo.values();
  const std::int64_t n = m.size();
  for (std::int64_t c = 0; c < 3; ++c)
    for (std::int64_t y = 0; y < n; ++y)
      for (std::int64_t x = 0; x < n; ++x) v[(c * n + y) * n + x] = static_cast<double>(x) / (n - 1);
  m.albedo.set_values(v);
  save_pack(root_ / "ramp", m, 8);
  const CliRun r = matx_cli("check-tileable --pack " + (root_ / "ramp").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("seams detected"), std::string::npos);
}

TEST_F(Cli, DemoIsDeterministic) {
  ASSERT_EQ(matx_cli("make-demo --out " + (root_ / "demo2").string() + " --seed 3 --size 32").code, 0);
  ASSERT_EQ(matx_cli("make-demo --out " + (root_ / "demo3").string() + " --seed 4 --size 32").code, 0);
  bool any_diff = false;
  for (const auto& e : fs::recursive_directory_iterator(demo())) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), demo());
    EXPECT_EQ(bytes(e.path()), bytes(root_ / "demo2" / rel)) << rel;
    any_diff |= bytes(e.path()) != bytes(root_ / "demo3" / rel);
  }
  EXPECT_TRUE(any_diff);
}

TEST_F(Cli, DemoPacksAreValid) {
  for (const char* p : {"gray", "bricks", "noise", "split"}) {
    const MaterialPack pack = load_pack(demo() / p);
    EXPECT_EQ(pack.maps.size(), 32) << p;
    const LabelGrid labels = load_labels(demo() / p / "labels.png");
    EXPECT_EQ(labels.height, 32);
  }
  const LabelGrid bricks = load_labels(demo() / "bricks" / "labels.png");
  std::set<int> ids(bricks.labels.begin(), bricks.labels.end());
  EXPECT_EQ(ids.size(), 2u);
}

}  // namespace
