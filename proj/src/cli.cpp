#include "fabtwin/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fabtwin/checkpoint.hpp"
#include "fabtwin/error.hpp"
#include "fabtwin/evaluation.hpp"
#include "fabtwin/manifest.hpp"
#include "fabtwin/parallel.hpp"
#include "fabtwin/pattern_synth.hpp"
#include "fabtwin/plot.hpp"
#include "fabtwin/png.hpp"
#include "fabtwin/training.hpp"
#include "fabtwin/virtual_fab.hpp"

namespace fabtwin::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string file_digest(const fs::path& p) {
  const auto bytes = read_file(p);
  return hex64(fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size())));
}

json read_json_file(const fs::path& p, const char* what) {
  std::ifstream in(p);
  if (!in) throw InvalidConfig(std::string("cannot open ") + what + " " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("malformed ") + what + " " + p.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& p, const json& j) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw RuntimeFailure("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

std::string padded(std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, i);
  return buf;
}

std::string index_name(const std::string& prefix, std::size_t i) { return prefix + padded(i, 3) + ".png"; }

/// Sorted top-level *.png files of a directory.
std::vector<fs::path> list_pngs(const fs::path& dir, const char* what) {
  if (!fs::is_directory(dir)) throw InvalidInput(std::string(what) + " directory " + dir.string() + " does not exist");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw InvalidInput(std::string(what) + " directory " + dir.string() + " contains no PNG images");
  return out;
}

// Provenance record written next to a command's outputs.
class RunRecord {
 public:
  RunRecord(std::string subcommand, const std::vector<std::string>& args) {
    j_["subcommand"] = std::move(subcommand);
    j_["argv"] = args;
    j_["config"] = json::object();
    j_["seeds"] = json::object();
    j_["artifacts"] = json::array();
  }

  json& config() { return j_["config"]; }
  json& seeds() { return j_["seeds"]; }
  void set_dir(fs::path dir) { dir_ = std::move(dir); }
  void artifact(const fs::path& p) { artifacts_.push_back(p); }

  void write(int exit_code, const std::string& error, double wall_ms) {
    if (dir_.empty()) return;
    j_["exit_code"] = exit_code;
    j_["status"] = exit_code == 0 ? "ok" : "failed";
    if (!error.empty()) j_["error"] = error;
    j_["wall_ms"] = wall_ms;
    for (const auto& p : artifacts_) {
      json a{{"path", p.string()}};
      if (fs::is_regular_file(p)) a["fnv1a64"] = file_digest(p);
      j_["artifacts"].push_back(a);
    }
    try {
      write_json_file(dir_ / "run.json", j_);
    } catch (const std::exception& e) {
      std::cerr << "warning: could not write run.json: " << e.what() << '\n';
    }
  }

 private:
  json j_;
  fs::path dir_;
  std::vector<fs::path> artifacts_;
};

int execute(RunRecord& rec, const std::function<void()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  int code = 0;
  std::string err;
  try {
    body();
  } catch (const InvalidInput& e) {
    code = 1;
    err = e.what();
  } catch (const json::exception& e) {
    code = 1;
    err = std::string("malformed JSON: ") + e.what();
  } catch (const std::exception& e) {
    code = 2;
    err = e.what();
  }
  if (code != 0) std::cerr << "error: " << err << '\n';
  rec.write(code, err, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  return code;
}

fs::path parent_or_dot(const fs::path& p) { return p.has_parent_path() ? p.parent_path() : fs::path("."); }

std::vector<GrayImage> model_samples(ModelCheckpoint& ck, const BitMask& layout, int m, RngSeed seed) {
  const int s = ck.generator.input_size;
  if (layout.width() != s || layout.height() != s) {
    throw InvalidInput("layout is " + std::to_string(layout.width()) + "x" + std::to_string(layout.height()) +
                       " but the checkpoint expects " + std::to_string(s) + "x" + std::to_string(s));
  }
  const int k = static_cast<int>(ck.members.size());
  switch (ck.kind) {
    case ModelKind::GenFab:
      if (m < 1) throw InvalidInput("--samples must be >= 1");
      return sample_outputs(ck.members.front(), layout, m, seed);
    case ModelKind::UNet: {
      if (m < 1) throw InvalidInput("--samples must be >= 1");
      const auto out = unet_forward(ck.members.front(), layout, false, seed);
      return std::vector<GrayImage>(static_cast<std::size_t>(m), out);
    }
    case ModelKind::McDropout:
      if (m < 1) throw InvalidInput("--samples must be >= 1");
      return mc_dropout_samples(ck.members.front(), layout, m, seed);
    case ModelKind::Ensemble:
      if (m != 0 && m != k) {
        throw InvalidInput("an ensemble of " + std::to_string(k) + " members yields exactly " + std::to_string(k) +
                           " samples; got --samples " + std::to_string(m));
      }
      return ensemble_samples(ck.members, layout);
  }
  throw InvalidInput("unknown checkpoint kind");
}

HeatmapScale parse_scale(const std::string& s) {
  if (s == "auto") return HeatmapScale::auto_max();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !(v > 0.0)) {
    throw InvalidInput("--scale must be 'auto' or a positive number, got '" + s + "'");
  }
  return HeatmapScale::fixed(v);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string t;
  while (std::getline(ss, t, ',')) {
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"fabtwin: variation-aware generative twin of a stochastic fabrication process", "fabtwin"};
  app.require_subcommand(1);

  // gen-data
  auto* gen_data = app.add_subcommand("gen-data", "synthesize layouts and evaluation structures");
  gen_data->require_subcommand(1);

  struct {
    int count = 0;
    int size = 0;
    std::string spec, params, out;
    std::uint64_t seed = 0;
    int fab_samples = 1;
    bool augment = false;
  } synth;
  auto* synth_cmd = gen_data->add_subcommand("synth", "Fourier-synthesized layouts, each with virtual-fab outcomes");
  synth_cmd->add_option("--count", synth.count, "number of layouts")->required();
  synth_cmd->add_option("--size", synth.size, "side length in pixels (overrides the SynthSpec JSON)");
  synth_cmd->add_option("--spec", synth.spec, "SynthSpec JSON");
  synth_cmd->add_option("--seed", synth.seed, "base seed");
  synth_cmd->add_option("--params", synth.params, "FabParams JSON for the outcomes (default parameters if absent)");
  synth_cmd->add_option("--fab-samples", synth.fab_samples, "fabricated outcomes per layout");
  synth_cmd->add_flag("--augment", synth.augment, "add the 90/180/270 degree rotations of every pair");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();

  struct {
    std::string kind, out, params;
    int canvas = 256;
    double scale = 1.0;
    int samples = 35;
    std::uint64_t seed = 0;
  } structs;
  auto* struct_cmd = gen_data->add_subcommand("structures", "one evaluation structure plus oracle outcomes");
  struct_cmd->add_option("--kind", structs.kind, "cross25|cross50|cross100|square|target50|target100")->required();
  struct_cmd->add_option("--canvas", structs.canvas, "canvas side in pixels");
  struct_cmd->add_option("--scale", structs.scale, "multiply every structure length by this factor");
  struct_cmd->add_option("--samples", structs.samples, "virtual-fab outcomes to draw (0 = layout only)");
  struct_cmd->add_option("--params", structs.params, "FabParams JSON");
  struct_cmd->add_option("--seed", structs.seed, "seed for the outcomes");
  struct_cmd->add_option("--out", structs.out, "output directory")->required();

  // fab
  auto* fab = app.add_subcommand("fab", "virtual fabrication");
  fab->require_subcommand(1);
  struct {
    std::string layout, params, out;
    int samples = 1;
    std::uint64_t seed = 0;
  } sim;
  auto* sim_cmd = fab->add_subcommand("simulate", "sample fabricated outcomes of one layout");
  sim_cmd->add_option("--layout", sim.layout, "layout PNG")->required();
  sim_cmd->add_option("--params", sim.params, "FabParams JSON");
  sim_cmd->add_option("--samples", sim.samples, "number of outcomes");
  sim_cmd->add_option("--seed", sim.seed, "seed");
  sim_cmd->add_option("--out", sim.out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "train a model");
  train->require_subcommand(1);
  struct {
    std::string data, config, out, log;
    int members = 5;
    double dropout = 0.1;
    int steps = 0;
    std::int64_t seed = -1;
  } tr;
  std::string train_kind;
  for (const char* kind : {"genfab", "unet", "mcdropout", "ensemble"}) {
    auto* c = train->add_subcommand(kind, std::string("train a ") + kind + " model");
    c->add_option("--data", tr.data, "dataset manifest JSON")->required();
    c->add_option("--config", tr.config, "TrainConfig JSON");
    c->add_option("--out", tr.out, "checkpoint path")->required();
    c->add_option("--log", tr.log, "loss log CSV (default: <out>.losses.csv)");
    c->add_option("--steps", tr.steps, "override steps");
    c->add_option("--seed", tr.seed, "override seed");
    if (std::string(kind) == "ensemble") c->add_option("--members", tr.members, "ensemble size K");
    if (std::string(kind) == "mcdropout") c->add_option("--dropout", tr.dropout, "dropout rate");
    c->callback([&train_kind, kind] { train_kind = kind; });
  }

  // generate
  struct {
    std::string ckpt, layout, out;
    int samples = 0;
    std::uint64_t seed = 0;
  } gen;
  auto* gen_cmd = app.add_subcommand("generate", "sample outputs of a trained model");
  gen_cmd->add_option("--ckpt", gen.ckpt, "checkpoint")->required();
  gen_cmd->add_option("--layout", gen.layout, "layout PNG")->required();
  gen_cmd->add_option("--samples", gen.samples, "number of samples (ensembles: K or omitted)");
  gen_cmd->add_option("--seed", gen.seed, "seed");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();

  // evaluate
  struct {
    std::string real, generated, metrics = "iou,kl,wd,fd", report, embedder = "avgpool8", structure;
    int bins = kDefaultBins;
    std::uint64_t seed = 0;
  } ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "distribution metrics of generated vs real outcomes");
  ev_cmd->add_option("--real", ev.real, "directory of real outcome PNGs")->required();
  ev_cmd->add_option("--generated", ev.generated, "directory of generated PNGs")->required();
  ev_cmd->add_option("--bins", ev.bins, "histogram bins");
  ev_cmd->add_option("--metrics", ev.metrics, "comma list of iou,kl,wd,fd");
  ev_cmd->add_option("--embedder", ev.embedder, "avgpool8|pixels16");
  ev_cmd->add_option("--seed", ev.seed, "seed for random matching");
  ev_cmd->add_option("--structure", ev.structure, "structure id recorded in the report");
  ev_cmd->add_option("--report", ev.report, "report JSON path")->required();

  // uncertainty
  struct {
    std::vector<std::string> ckpts;
    std::string layout, out, scale = "shared";
    int samples = 35;
    std::uint64_t seed = 0;
  } unc;
  auto* unc_cmd = app.add_subcommand("uncertainty", "aleatoric/epistemic decomposition over K models");
  unc_cmd->add_option("--ckpts", unc.ckpts, "K >= 2 checkpoints")->required()->expected(2, 1 << 20);
  unc_cmd->add_option("--layout", unc.layout, "layout PNG")->required();
  unc_cmd->add_option("--samples", unc.samples, "samples per model");
  unc_cmd->add_option("--seed", unc.seed, "seed (shared by all models)");
  unc_cmd->add_option("--scale", unc.scale, "heatmap scale: shared (max of total), auto, or a number");
  unc_cmd->add_option("--out", unc.out, "output directory")->required();

  // plot
  auto* plot = app.add_subcommand("plot", "static PNG charts");
  plot->require_subcommand(1);
  struct {
    std::string in, out, scale = "auto";
  } pl;
  auto* pl_losses = plot->add_subcommand("losses", "loss curves from a training log");
  pl_losses->add_option("--in", pl.in, "loss log CSV")->required();
  pl_losses->add_option("--out", pl.out, "PNG path for loss_D/loss_G_total; the term chart gets a _terms suffix")
      ->required();
  auto* pl_heat = plot->add_subcommand("heatmap", "colour-mapped rendering of a gray map");
  pl_heat->add_option("--in", pl.in, "gray PNG")->required();
  pl_heat->add_option("--out", pl.out, "PNG path")->required();
  pl_heat->add_option("--scale", pl.scale, "auto or a fixed maximum");

  std::vector<std::string> rev(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  const std::vector<std::string> argv_copy(args.begin(), args.end());

  if (synth_cmd->parsed()) {
    RunRecord rec("gen-data synth", argv_copy);
    rec.set_dir(synth.out);
    return execute(rec, [&] {
      SynthSpec spec = synth.spec.empty() ? SynthSpec{} : synth_spec_from_json(read_json_file(synth.spec, "spec"));
      if (synth.size > 0) spec.size = synth.size;
      spec.validate();
      FabParams params = synth.params.empty() ? FabParams{} : fab_params_from_json(read_json_file(synth.params, "params"));
      params.validate();
      if (synth.count < 1) throw InvalidInput("--count must be >= 1");
      if (synth.fab_samples < 1) throw InvalidInput("--fab-samples must be >= 1");
      rec.config() = {{"spec", to_json(spec)}, {"params", to_json(params)}, {"count", synth.count},
                      {"fab_samples", synth.fab_samples}, {"augment", synth.augment}};
      rec.seeds()["base"] = synth.seed;

      const fs::path out(synth.out);
      const RngSeed base(synth.seed);
      DatasetManifest man;
      man.base_dir = out;
      const int rotations = synth.augment ? 4 : 1;
      std::vector<ManifestPair> pairs(static_cast<std::size_t>(synth.count * rotations));
      fs::create_directories(out / "layouts");
      fs::create_directories(out / "fabricated");
      parallel_for(static_cast<std::size_t>(synth.count), [&](std::size_t i) {
        const RngSeed ps = base.child("pattern", i);
        BitMask layout = synth_fourier_pattern(spec, ps);
        auto outcomes = fab_batch(layout, synth.fab_samples, params, base.child("outcome", i));
        for (int r = 0; r < rotations; ++r) {
          const std::string stem = "pattern_" + padded(i, 4) + (synth.augment ? "_r" + std::to_string(r * 90) : "");
          ManifestPair p;
          p.layout_path = "layouts/" + stem + ".png";
          p.structure_id = stem;
          p.seed = ps.value;
          save_mask(out / p.layout_path, layout);
          for (std::size_t k = 0; k < outcomes.size(); ++k) {
            const std::string f = "fabricated/" + stem + "_" + padded(k, 2) + ".png";
            save_mask(out / f, outcomes[k]);
            p.fabricated_paths.push_back(f);
          }
          pairs[i * static_cast<std::size_t>(rotations) + static_cast<std::size_t>(r)] = std::move(p);
          layout = rotate90(layout);
          for (auto& o : outcomes) o = rotate90(o);
        }
      });
      man.pairs = std::move(pairs);
      save_manifest(out / "manifest.json", man);
      rec.artifact(out / "manifest.json");
      std::cout << "wrote " << man.pairs.size() << " pairs to " << out.string() << '\n';
    });
  }

  if (struct_cmd->parsed()) {
    RunRecord rec("gen-data structures", argv_copy);
    rec.set_dir(structs.out);
    return execute(rec, [&] {
      const StructureKind kind = parse_structure_kind(structs.kind);
      if (!(structs.scale > 0.0)) throw InvalidInput("--scale must be positive");
      const StructureGeometry geom = StructureGeometry{}.scaled(structs.scale, structs.canvas);
      if (geom.canvas_px < geom.region_px) {
        throw InvalidInput("canvas " + std::to_string(geom.canvas_px) + " px is smaller than the " +
                           std::to_string(geom.region_px) + " px structure region");
      }
      if (structs.samples < 0) throw InvalidInput("--samples must be >= 0");
      FabParams params =
          structs.params.empty() ? FabParams{} : fab_params_from_json(read_json_file(structs.params, "params"));
      params.validate();
      rec.config() = {{"kind", to_string(kind)}, {"canvas", structs.canvas}, {"scale", structs.scale},
                      {"samples", structs.samples}, {"params", to_json(params)}};
      rec.seeds()["fab"] = structs.seed;

      const fs::path out(structs.out);
      const std::string name = to_string(kind);
      const BitMask layout = make_eval_structure(kind, geom);
      save_mask(out / (name + ".png"), layout);
      rec.artifact(out / (name + ".png"));

      DatasetManifest man;
      man.base_dir = out;
      ManifestPair p;
      p.layout_path = name + ".png";
      p.structure_id = name;
      p.seed = structs.seed;
      if (structs.samples > 0) {
        const auto outcomes = fab_batch(layout, structs.samples, params, RngSeed(structs.seed));
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
          const std::string f = name + "/" + index_name("fab_", i);
          save_mask(out / f, outcomes[i]);
          p.fabricated_paths.push_back(f);
        }
      }
      man.pairs.push_back(p);
      save_manifest(out / "manifest.json", man);
      rec.artifact(out / "manifest.json");
    });
  }

  if (sim_cmd->parsed()) {
    RunRecord rec("fab simulate", argv_copy);
    rec.set_dir(sim.out);
    return execute(rec, [&] {
      const BitMask layout = load_mask(sim.layout);
      FabParams params = sim.params.empty() ? FabParams{} : fab_params_from_json(read_json_file(sim.params, "params"));
      params.validate();
      if (sim.samples < 1) throw InvalidInput("--samples must be >= 1");
      rec.config() = {{"layout", sim.layout}, {"params", to_json(params)}, {"samples", sim.samples}};
      rec.seeds()["fab"] = sim.seed;

      const fs::path out(sim.out);
      const auto outcomes = fab_batch(layout, sim.samples, params, RngSeed(sim.seed));
      DatasetManifest man;
      man.base_dir = out;
      ManifestPair p;
      p.layout_path = "layout/" + fs::path(sim.layout).filename().string();
      p.structure_id = fs::path(sim.layout).stem().string();
      p.seed = sim.seed;
      save_mask(out / p.layout_path, layout);
      for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const std::string f = index_name("sample_", i);
        save_mask(out / f, outcomes[i]);
        p.fabricated_paths.push_back(f);
        rec.artifact(out / f);
      }
      man.pairs.push_back(p);
      save_manifest(out / "manifest.json", man);
      rec.artifact(out / "manifest.json");
    });
  }

  if (!train_kind.empty()) {
    RunRecord rec("train " + train_kind, argv_copy);
    rec.set_dir(parent_or_dot(tr.out));
    return execute(rec, [&] {
      TrainConfig cfg = tr.config.empty() ? TrainConfig{} : train_config_from_json(read_json_file(tr.config, "config"));
      if (tr.steps > 0) cfg.steps = tr.steps;
      if (tr.seed >= 0) cfg.seed = static_cast<std::uint64_t>(tr.seed);
      cfg.checkpoint_path = tr.out;
      cfg.validate();
      const auto manifest = load_manifest(tr.data);
      const auto data = load_dataset(manifest);

      const fs::path log_path = tr.log.empty() ? fs::path(tr.out + ".losses.csv") : fs::path(tr.log);
      rec.config() = {{"train", to_json(cfg)}, {"data", tr.data}, {"pairs", data.size()}};
      rec.seeds()["train"] = cfg.seed;
      auto progress = [](const LossRecord& r) {
        std::cout << "step " << r.step << " loss_D " << r.loss_D << " loss_G_total " << r.loss_G_total << " loss_G_l1 "
                  << r.loss_G_l1 << '\n';
      };

      ModelCheckpoint ck;
      ck.generator = cfg.generator;
      ck.metadata = {{"train_config", to_json(cfg)}, {"data", tr.data}};
      try {
        if (train_kind == "genfab") {
          auto res = train_genfab(data, cfg, progress);
          ck.kind = ModelKind::GenFab;
          ck.members.push_back(std::move(res.generator));
          write_loss_log(log_path, res.log);
        } else if (train_kind == "unet" || train_kind == "mcdropout") {
          const double p = train_kind == "unet" ? 0.0 : tr.dropout;
          rec.config()["dropout_p"] = p;
          GeneratorConfig gc = cfg.generator;
          gc.latent_dim = 0;
          cfg.generator = gc;
          ck.generator = gc;
          auto res = train_unet(data, cfg, p, progress);
          ck.kind = train_kind == "unet" ? ModelKind::UNet : ModelKind::McDropout;
          ck.dropout_p = p;
          ck.members.push_back(std::move(res.unet));
          write_loss_log(log_path, res.log);
        } else {
          if (tr.members < 1) throw InvalidInput("--members must be >= 1");
          rec.config()["members"] = tr.members;
          cfg.generator.latent_dim = 0;
          ck.generator = cfg.generator;
          auto res = train_ensemble_logged(data, cfg, tr.members, RngSeed(cfg.seed));
          ck.kind = ModelKind::Ensemble;
          std::vector<LossRecord> merged;
          for (auto& r : res) {
            ck.members.push_back(std::move(r.unet));
            merged.insert(merged.end(), r.log.begin(), r.log.end());
          }
          // Member logs are concatenated; the step column restarts per member.
          write_loss_log(log_path, merged);
        }
      } catch (const TrainingDiverged& e) {
        write_loss_log(log_path, e.log());
        rec.artifact(log_path);
        throw;
      }
      save_checkpoint(tr.out, ck);
      rec.artifact(tr.out);
      rec.artifact(log_path);
    });
  }

  if (gen_cmd->parsed()) {
    RunRecord rec("generate", argv_copy);
    rec.set_dir(gen.out);
    return execute(rec, [&] {
      auto ck = load_checkpoint(gen.ckpt);
      const auto layout = load_mask(gen.layout);
      rec.config() = {{"ckpt", gen.ckpt}, {"kind", to_string(ck.kind)}, {"layout", gen.layout}, {"samples", gen.samples}};
      rec.seeds()["generate"] = gen.seed;
      if (ck.kind != ModelKind::Ensemble && gen.samples < 1) throw InvalidInput("--samples must be >= 1");
      const auto outs = model_samples(ck, layout, gen.samples, RngSeed(gen.seed));
      for (std::size_t i = 0; i < outs.size(); ++i) {
        const fs::path f = fs::path(gen.out) / index_name("gen_", i);
        save_gray(f, outs[i]);
        rec.artifact(f);
      }
    });
  }

  if (ev_cmd->parsed()) {
    RunRecord rec("evaluate", argv_copy);
    rec.set_dir(parent_or_dot(ev.report));
    return execute(rec, [&] {
      EvaluateOptions opts;
      opts.metrics = split_csv(ev.metrics);
      if (opts.metrics.empty()) throw InvalidInput("--metrics is empty");
      if (ev.bins < 2) throw InvalidInput("--bins must be >= 2");
      opts.bins = ev.bins;
      opts.seed = RngSeed(ev.seed);
      opts.embedder = parse_embedder(ev.embedder);
      rec.config() = {{"real", ev.real}, {"generated", ev.generated}, {"bins", ev.bins}, {"metrics", opts.metrics},
                      {"embedder", ev.embedder}};
      rec.seeds()["match"] = ev.seed;

      std::vector<GrayImage> real, generated;
      for (const auto& p : list_pngs(ev.generated, "generated")) generated.push_back(load_gray(p));
      for (const auto& p : list_pngs(ev.real, "real")) real.push_back(load_gray(p));
      auto report = evaluate_sets(real, generated, opts, ev.structure);
      report.provenance = {{"real_dir", ev.real}, {"generated_dir", ev.generated}};
      write_json_file(ev.report, to_json(report));
      rec.artifact(ev.report);
      std::cout << to_json(report).dump(2) << '\n';
    });
  }

  if (unc_cmd->parsed()) {
    RunRecord rec("uncertainty", argv_copy);
    rec.set_dir(unc.out);
    return execute(rec, [&] {
      if (unc.ckpts.size() < 2) throw InvalidInput("uncertainty needs at least two checkpoints");
      const auto layout = load_mask(unc.layout);
      rec.config() = {{"ckpts", unc.ckpts}, {"layout", unc.layout}, {"samples", unc.samples}, {"scale", unc.scale}};
      rec.seeds()["z"] = unc.seed;
      std::vector<std::vector<GrayImage>> samples;
      for (const auto& path : unc.ckpts) {
        auto ck = load_checkpoint(path);
        // Every model sees the same latent draws so the spread across models
        // reflects the weights alone.
        const auto outs = model_samples(ck, layout, ck.kind == ModelKind::Ensemble ? 0 : unc.samples, RngSeed(unc.seed));
        samples.push_back(to_gray(binarize_all(outs)));
      }
      const auto maps = decompose_uncertainty(samples);
      HeatmapScale scale;
      if (unc.scale == "shared") {
        double top = 0.0;
        for (float v : maps.total.values()) top = std::max(top, static_cast<double>(v));
        scale = top > 0.0 ? HeatmapScale::fixed(top) : HeatmapScale::auto_max();
      } else {
        scale = parse_scale(unc.scale);
      }
      const fs::path out(unc.out);
      json summary{{"models", unc.ckpts.size()}, {"samples_per_model", samples.front().size()}};
      for (auto [name, img] : {std::pair{"aleatoric", &maps.aleatoric}, std::pair{"epistemic", &maps.epistemic},
                               std::pair{"total", &maps.total}}) {
        write_file(out / (std::string(name) + ".png"), render_heatmap(*img, scale));
        rec.artifact(out / (std::string(name) + ".png"));
        summary[std::string("mean_") + name] = img->mean();
      }
      write_json_file(out / "uncertainty.json", summary);
      rec.artifact(out / "uncertainty.json");
    });
  }

  if (pl_losses->parsed()) {
    RunRecord rec("plot losses", argv_copy);
    rec.set_dir(parent_or_dot(pl.out));
    return execute(rec, [&] {
      const auto charts = plot_loss_curves(fs::path(pl.in));
      const fs::path out(pl.out);
      const fs::path terms = out.parent_path() / (out.stem().string() + "_terms" + out.extension().string());
      write_file(out, charts.totals);
      write_file(terms, charts.terms);
      rec.config() = {{"in", pl.in}};
      rec.artifact(out);
      rec.artifact(terms);
    });
  }

  if (pl_heat->parsed()) {
    RunRecord rec("plot heatmap", argv_copy);
    rec.set_dir(parent_or_dot(pl.out));
    return execute(rec, [&] {
      const auto scale = parse_scale(pl.scale);
      write_file(pl.out, render_heatmap(load_gray(pl.in), scale));
      rec.config() = {{"in", pl.in}, {"scale", pl.scale}};
      rec.artifact(pl.out);
    });
  }

  std::cerr << app.help() << '\n';
  return 1;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args);
}

}  // namespace fabtwin::cli
