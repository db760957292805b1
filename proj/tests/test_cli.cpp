#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "fabtwin/cli.hpp"
#include "fabtwin/error.hpp"
#include "fabtwin/plot.hpp"
#include "fabtwin/png.hpp"

using namespace fabtwin;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / "fabtwin_cli" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fabtwin");
  return cli::run(args);
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::vector<fs::path> pngs(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// Centres of filled 5x5 squares (or, with `ring`, 7x7 outlines) of colour
// `c`, merged when adjacent.
int count_markers(const IndexedImage& img, std::uint8_t c, bool ring = false) {
  std::vector<std::uint8_t> hit(img.indices.size(), 0);
  const int r = ring ? 3 : 2;
  auto at = [&](int x, int y) { return img.indices[static_cast<std::size_t>(y * img.width + x)]; };
  for (int y = r; y < img.height - r; ++y)
    for (int x = r; x < img.width - r; ++x) {
      bool full = true;
      for (int dy = -r; dy <= r && full; ++dy)
        for (int dx = -r; dx <= r && full; ++dx) {
          if (ring && std::abs(dx) < r && std::abs(dy) < r) continue;
          full = at(x + dx, y + dy) == c;
        }
      if (full) hit[static_cast<std::size_t>(y * img.width + x)] = 1;
    }
  int blobs = 0;
  for (std::size_t i = 0; i < hit.size(); ++i) {
    if (!hit[i]) continue;
    ++blobs;
    std::vector<std::size_t> stack{i};
    hit[i] = 0;
    while (!stack.empty()) {
      const auto k = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(k % static_cast<std::size_t>(img.width)), y = static_cast<int>(k / static_cast<std::size_t>(img.width));
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= img.width || ny >= img.height) continue;
          const auto n = static_cast<std::size_t>(ny * img.width + nx);
          if (hit[n]) {
            hit[n] = 0;
            stack.push_back(n);
          }
        }
    }
  }
  return blobs;
}

constexpr std::uint8_t kBlueIndex = 3, kRedIndex = 4;

void write_log(const fs::path& p, const std::string& body) {
  std::ofstream(p) << "step,loss_D,loss_G_total,loss_G_gan,loss_G_l1,wall_ms\n" << body;
}

}  // namespace

TEST(Cli, StructuresWritesLayoutAndManifest) {
  const auto d = scratch("structures");
  ASSERT_EQ(run_cli({"gen-data", "structures", "--kind", "cross100", "--out", d.string()}), 0);
  const auto layout = load_mask(d / "cross100.png");
  EXPECT_EQ(layout.width(), 256);
  EXPECT_EQ(layout.count(), 30000u);
  const auto m = read_json(d / "manifest.json");
  EXPECT_EQ(m["pairs"].size(), 1u);
  EXPECT_EQ(pngs(d / "cross100").size(), 35u);
  EXPECT_EQ(read_json(d / "run.json")["exit_code"], 0);
}

TEST(Cli, EvaluateEmptyGeneratedDirIsValidationError) {
  const auto d = scratch("eval_empty");
  fs::create_directories(d / "real");
  fs::create_directories(d / "gen");
  save_mask(d / "real" / "a.png", BitMask(8, 8, 1));
  testing::internal::CaptureStderr();
  const int code = run_cli({"evaluate", "--real", (d / "real").string(), "--generated", (d / "gen").string(), "--report",
                        (d / "report.json").string()});
  const auto err = testing::internal::GetCapturedStderr();
  EXPECT_EQ(code, 1);
  EXPECT_NE(err.find("gen"), std::string::npos) << err;
  EXPECT_NE(err.find("no PNG"), std::string::npos) << err;
  // run.json records the failure too.
  const auto run = read_json(d / "run.json");
  EXPECT_EQ(run["exit_code"], 1);
  EXPECT_EQ(run["status"], "failed");
}

TEST(Cli, FabSimulateIsReproducible) {
  const auto d = scratch("simulate");
  ASSERT_EQ(run_cli({"gen-data", "structures", "--kind", "cross25", "--canvas", "64", "--scale", "0.25", "--samples", "0",
                 "--out", (d / "s").string()}),
            0);
  const auto layout = (d / "s" / "cross25.png").string();
  ASSERT_EQ(run_cli({"fab", "simulate", "--layout", layout, "--samples", "35", "--seed", "4", "--out", (d / "a").string()}), 0);
  ASSERT_EQ(run_cli({"fab", "simulate", "--layout", layout, "--samples", "35", "--seed", "4", "--out", (d / "b").string()}), 0);
  const auto a = pngs(d / "a"), b = pngs(d / "b");
  ASSERT_EQ(a.size(), 35u);
  ASSERT_EQ(b.size(), 35u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(read_file(a[i]), read_file(b[i]));
  EXPECT_TRUE(fs::exists(d / "a" / "manifest.json"));
  const auto ra = read_json(d / "a" / "run.json"), rb = read_json(d / "b" / "run.json");
  for (std::size_t i = 0; i < ra["artifacts"].size(); ++i) {
    if (!ra["artifacts"][i].contains("fnv1a64")) continue;
    EXPECT_EQ(ra["artifacts"][i]["fnv1a64"], rb["artifacts"][i]["fnv1a64"]);
  }
}

TEST(Cli, UnknownFlagAndMissingSubcommand) {
  testing::internal::CaptureStderr();
  EXPECT_EQ(run_cli({"evaluate", "--frobnicate", "1"}), 1);
  EXPECT_EQ(run_cli({}), 1);
  EXPECT_EQ(run_cli({"fab", "simulate", "--layout", "/nonexistent.png", "--samples", "-3", "--out", "/tmp/x"}), 1);
  testing::internal::GetCapturedStderr();
  testing::internal::CaptureStdout();
  EXPECT_EQ(run_cli({"--help"}), 0);
  testing::internal::GetCapturedStdout();
}

TEST(Cli, BadConfigIsValidationError) {
  const auto d = scratch("badconfig");
  ASSERT_EQ(run_cli({"gen-data", "synth", "--count", "2", "--size", "32", "--out", (d / "data").string()}), 0);
  std::ofstream(d / "train.json") << R"({"steps": -5})";
  testing::internal::CaptureStderr();
  EXPECT_EQ(run_cli({"train", "genfab", "--data", (d / "data" / "manifest.json").string(), "--config",
                 (d / "train.json").string(), "--out", (d / "m.gfck").string()}),
            1);
  std::ofstream(d / "broken.json") << "{ not json";
  EXPECT_EQ(run_cli({"train", "unet", "--data", (d / "data" / "manifest.json").string(), "--config",
                 (d / "broken.json").string(), "--out", (d / "m.gfck").string()}),
            1);
  testing::internal::GetCapturedStderr();
}

// A miniature end-to-end pass through every subcommand.
TEST(Cli, PipelineRoundTrip) {
  const auto d = scratch("pipeline");
  const auto s = [&](const char* p) { return (d / p).string(); };
  ASSERT_EQ(run_cli({"gen-data", "synth", "--count", "4", "--size", "32", "--seed", "3", "--fab-samples", "2", "--out", s("data")}), 0);
  EXPECT_EQ(read_json(d / "data" / "manifest.json")["pairs"].size(), 4u);
  json cfg{{"generator", {{"depth", 3}, {"base_width", 4}, {"latent_dim", 4}, {"input_size", 32}}},
           {"discriminator", {{"base_width", 4}}},
           {"steps", 3},
           {"log_every", 1}};
  std::ofstream(d / "train.json") << cfg.dump();
  for (const char* seed : {"1", "2"}) {
    ASSERT_EQ(run_cli({"train", "genfab", "--data", s("data/manifest.json"), "--config", s("train.json"), "--seed", seed,
                   "--out", (d / (std::string("g") + seed + ".gfck")).string()}),
              0);
  }
  EXPECT_EQ(read_loss_log(d / "g1.gfck.losses.csv").size(), 3u);
  ASSERT_EQ(run_cli({"train", "ensemble", "--data", s("data/manifest.json"), "--config", s("train.json"), "--members", "2",
                 "--out", s("ens.gfck")}),
            0);
  ASSERT_EQ(run_cli({"train", "mcdropout", "--data", s("data/manifest.json"), "--config", s("train.json"), "--out", s("mc.gfck")}), 0);

  ASSERT_EQ(run_cli({"gen-data", "structures", "--kind", "cross50", "--canvas", "32", "--scale", "0.125", "--samples", "6",
                 "--out", s("st")}),
            0);
  ASSERT_EQ(run_cli({"generate", "--ckpt", s("g1.gfck"), "--layout", s("st/cross50.png"), "--samples", "5", "--seed", "2",
                 "--out", s("gen")}),
            0);
  EXPECT_EQ(pngs(d / "gen").size(), 5u);
  ASSERT_EQ(run_cli({"generate", "--ckpt", s("ens.gfck"), "--layout", s("st/cross50.png"), "--out", s("gen_ens")}), 0);
  EXPECT_EQ(pngs(d / "gen_ens").size(), 2u);
  testing::internal::CaptureStderr();
  EXPECT_EQ(run_cli({"generate", "--ckpt", s("ens.gfck"), "--layout", s("st/cross50.png"), "--samples", "5", "--out", s("gen_bad")}), 1);
  EXPECT_EQ(run_cli({"generate", "--ckpt", s("g1.gfck"), "--layout", s("data/layouts/pattern_0000.png"), "--samples", "2",
                 "--out", s("gen_ok")}),
            0);
  testing::internal::GetCapturedStderr();

  testing::internal::CaptureStdout();
  ASSERT_EQ(run_cli({"evaluate", "--real", s("st/cross50"), "--generated", s("gen"), "--structure", "cross50", "--report",
                 s("report.json")}),
            0);
  testing::internal::GetCapturedStdout();
  const auto rep = read_json(d / "report.json");
  EXPECT_EQ(rep["structure_id"], "cross50");
  EXPECT_GE(rep["iou_greedy_mean"].get<double>(), rep["iou_random_mean"].get<double>());

  ASSERT_EQ(run_cli({"uncertainty", "--ckpts", s("g1.gfck"), s("g2.gfck"), "--layout", s("st/cross50.png"), "--samples", "4",
                 "--out", s("unc")}),
            0);
  const auto u = read_json(d / "unc" / "uncertainty.json");
  EXPECT_NEAR(u["mean_total"].get<double>(), u["mean_aleatoric"].get<double>() + u["mean_epistemic"].get<double>(), 1e-6);
  EXPECT_TRUE(fs::exists(d / "unc" / "epistemic.png"));

  ASSERT_EQ(run_cli({"plot", "losses", "--in", s("g1.gfck.losses.csv"), "--out", s("plots/loss.png")}), 0);
  EXPECT_TRUE(fs::exists(d / "plots" / "loss.png"));
  EXPECT_TRUE(fs::exists(d / "plots" / "loss_terms.png"));
  ASSERT_EQ(run_cli({"plot", "heatmap", "--in", s("st/cross50/fab_000.png"), "--out", s("plots/heat.png"), "--scale", "0.25"}), 0);
}

TEST(Heatmap, AllZeroIsUniformBackground) {
  const auto img = decode_indexed(render_heatmap(GrayImage(9, 7)));
  EXPECT_EQ(img.width, 9);
  for (auto i : img.indices) EXPECT_EQ(i, 0);
}

TEST(Heatmap, OneHotPixelIsTheOnlyMaximum) {
  GrayImage m(8, 8, 0.01f);
  m.set(3, 5, 0.2f);
  const auto img = decode_indexed(render_heatmap(m));
  EXPECT_EQ(std::count(img.indices.begin(), img.indices.end(), 255), 1);
  EXPECT_EQ(img.indices[5 * 8 + 3], 255);
  EXPECT_EQ(img.palette.size(), 256u);
}

TEST(Heatmap, FixedScaleDeterministicAndComparable) {
  GrayImage m(8, 8, 0.05f);
  m.set(0, 0, 0.125f);
  const auto a = render_heatmap(m, HeatmapScale::fixed(0.25)), b = render_heatmap(m, HeatmapScale::fixed(0.25));
  EXPECT_EQ(a, b);
  const auto img = decode_indexed(a);
  EXPECT_EQ(img.indices[0], 127);  // half of the fixed ceiling
  EXPECT_EQ(std::count(img.indices.begin(), img.indices.end(), 255), 0);
  EXPECT_THROW(render_heatmap(m, HeatmapScale::fixed(0.0)), InvalidInput);
}

TEST(LossPlot, TwoRowsGiveTwoPointsPerSeries) {
  const std::vector<LossRecord> log{{1, 1.4, 51.0, 0.7, 0.503, 2.0}, {2, 1.1, 40.0, 0.9, 0.391, 4.0}};
  const auto charts = plot_loss_curves(log);
  for (const auto* png : {&charts.totals, &charts.terms}) {
    const auto img = decode_indexed(*png);
    EXPECT_EQ(img.width, 640);
    EXPECT_EQ(count_markers(img, kBlueIndex), 2);
    EXPECT_EQ(count_markers(img, kRedIndex, true), 2);
  }
  EXPECT_NE(charts.totals, charts.terms);
}

TEST(LossPlot, DeterministicAndStrict) {
  const auto d = scratch("lossplot");
  write_log(d / "a.csv", "1,1.4,51,0.7,0.503,2\n2,1.1,40,0.9,0.391,4\n3,1.0,30,0.8,0.292,6\n");
  write_log(d / "b.csv", "1,1.4,51,0.7,0.503,2\n2,1.1,40,0.9,0.391,4\n3,1.0,30,0.8,0.292,6\n");
  const auto a = plot_loss_curves(d / "a.csv"), b = plot_loss_curves(d / "b.csv");
  EXPECT_EQ(a.totals, b.totals);
  EXPECT_EQ(a.terms, b.terms);

  std::ofstream(d / "nogan.csv") << "step,loss_D,loss_G_total,loss_G_l1,wall_ms\n1,1,2,3,4\n";
  try {
    plot_loss_curves(d / "nogan.csv");
    FAIL() << "missing column accepted";
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("loss_G_gan"), std::string::npos);
  }
  write_log(d / "bad.csv", "1,1.4,51,0.7,0.503,2\n2,1.1,oops,0.9,0.391,4\n");
  try {
    plot_loss_curves(d / "bad.csv");
    FAIL() << "malformed row accepted";
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
  write_log(d / "nan.csv", "1,nan,51,0.7,0.503,2\n");
  EXPECT_THROW(plot_loss_curves(d / "nan.csv"), InvalidInput);
  testing::internal::CaptureStderr();
  EXPECT_EQ(run_cli({"plot", "losses", "--in", (d / "nogan.csv").string(), "--out", (d / "x.png").string()}), 1);
  testing::internal::GetCapturedStderr();
  EXPECT_EQ(read_json(d / "run.json")["exit_code"], 1);
}
