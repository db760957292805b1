#include "fabtwin/training.hpp"

#include <chrono>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "fabtwin/parallel.hpp"
#include "fabtwin/png.hpp"

namespace fabtwin {

namespace {

using Clock = std::chrono::steady_clock;

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

bool should_log(int step, const TrainConfig& cfg) {
  return step == 1 || step % cfg.log_every == 0 || step == cfg.steps;
}

bool finite_record(const LossRecord& r) {
  return std::isfinite(r.loss_D) && std::isfinite(r.loss_G_total) && std::isfinite(r.loss_G_gan) &&
         std::isfinite(r.loss_G_l1);
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t epoch, RngSeed seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed.child("shuffle", epoch));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
  return order;
}

struct Batch {
  nn::Tensor<float> layout;
  nn::Tensor<float> target;
};

Batch make_batch(const PairedDataset& data, const std::vector<std::size_t>& idx) {
  std::vector<const BitMask*> ls, ts;
  for (auto i : idx) {
    ls.push_back(&data.layouts[i]);
    ts.push_back(&data.targets[i]);
  }
  return {nn::to_tensor<float>(ls), nn::to_tensor<float>(ts)};
}

void check_dataset(const PairedDataset& data, const TrainConfig& cfg) {
  if (data.size() == 0) throw InvalidInput("training dataset is empty");
  const int s = cfg.generator.input_size;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.layouts[i].width() != s || data.layouts[i].height() != s) {
      throw InvalidInput("training pair " + std::to_string(i) + " is not " + std::to_string(s) + "x" +
                         std::to_string(s));
    }
  }
}

AdamHyper hyper(const TrainConfig& cfg, double lr) { return {lr, cfg.beta1, cfg.beta2, cfg.adam_eps}; }

std::string describe(const LossRecord& r) {
  std::ostringstream os;
  os << "step " << r.step << ": loss_D=" << r.loss_D << " loss_G_total=" << r.loss_G_total
     << " loss_G_gan=" << r.loss_G_gan << " loss_G_l1=" << r.loss_G_l1;
  return os.str();
}

}  // namespace

void TrainConfig::validate() const {
  generator.validate();
  discriminator.validate();
  if (steps < 1) throw InvalidConfig("steps must be >= 1");
  if (batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
  if (!(lr_g > 0) || !(lr_d > 0)) throw InvalidConfig("learning rates must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw InvalidConfig("betas must lie in [0,1)");
  if (!(adam_eps > 0)) throw InvalidConfig("adam_eps must be positive");
  if (!(lambda_l1 >= 0) || !(lambda_gan >= 0)) throw InvalidConfig("loss weights must be nonnegative");
  if (log_every < 1) throw InvalidConfig("log_every must be >= 1");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"generator", to_json(c.generator)},
          {"discriminator", to_json(c.discriminator)},
          {"steps", c.steps},
          {"batch_size", c.batch_size},
          {"lr_g", c.lr_g},
          {"lr_d", c.lr_d},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"lambda_l1", c.lambda_l1},
          {"lambda_gan", c.lambda_gan},
          {"log_every", c.log_every},
          {"checkpoint_path", c.checkpoint_path},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    if (j.contains("generator")) c.generator = generator_config_from_json(j.at("generator"));
    if (j.contains("discriminator")) c.discriminator = discriminator_config_from_json(j.at("discriminator"));
    if (j.contains("latent_dim")) c.generator.latent_dim = j.at("latent_dim").get<int>();
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr_g = j.value("lr_g", c.lr_g);
    c.lr_d = j.value("lr_d", c.lr_d);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.lambda_l1 = j.value("lambda_l1", c.lambda_l1);
    c.lambda_gan = j.value("lambda_gan", c.lambda_gan);
    c.log_every = j.value("log_every", c.log_every);
    c.checkpoint_path = j.value("checkpoint_path", c.checkpoint_path);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("malformed train config: ") + e.what());
  }
  c.validate();
  return c;
}

void write_loss_log(const std::filesystem::path& path, const std::vector<LossRecord>& log) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << kLossLogHeader << '\n';
  out.precision(17);
  for (const auto& r : log) {
    out << r.step << ',' << r.loss_D << ',' << r.loss_G_total << ',' << r.loss_G_gan << ',' << r.loss_G_l1 << ','
        << r.wall_ms << '\n';
  }
}

std::vector<LossRecord> read_loss_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open loss log " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput(path.string() + ": empty loss log");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  const char* required[] = {"step", "loss_D", "loss_G_total", "loss_G_gan", "loss_G_l1", "wall_ms"};
  int pos[6];
  for (int k = 0; k < 6; ++k) {
    auto it = std::find(cols.begin(), cols.end(), required[k]);
    if (it == cols.end()) throw InvalidInput(path.string() + ":1: missing column '" + required[k] + "'");
    pos[k] = static_cast<int>(it - cols.begin());
  }

  std::vector<LossRecord> log;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) f.push_back(c);
    if (f.size() != cols.size()) {
      throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(cols.size()) +
                         " fields, got " + std::to_string(f.size()));
    }
    double v[6];
    for (int k = 0; k < 6; ++k) {
      const auto& s = f[static_cast<std::size_t>(pos[k])];
      char* end = nullptr;
      v[k] = std::strtod(s.c_str(), &end);
      if (s.empty() || end != s.c_str() + s.size()) {
        throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": malformed value '" + s + "'");
      }
    }
    log.push_back({static_cast<int>(v[0]), v[1], v[2], v[3], v[4], v[5]});
  }
  return log;
}

double loss_l1(const GrayImage& pred, const BitMask& target) {
  if (pred.width() != target.width() || pred.height() != target.height()) throw InvalidInput("L1: dimension mismatch");
  const auto t = GrayImage::from_mask(target);
  return loss_l1<float>(pred.values(), t.values());
}

double loss_generator_total(double gan, double l1, const TrainConfig& cfg) {
  if (!std::isfinite(gan) || !std::isfinite(l1)) throw InvalidInput("non-finite loss term");
  return cfg.lambda_gan * gan + cfg.lambda_l1 * l1;
}

void PairedDataset::add(BitMask layout, BitMask target) {
  if (!same_dims(layout, target)) throw InvalidInput("layout and target dimensions differ");
  layouts.push_back(std::move(layout));
  targets.push_back(std::move(target));
}

PairedDataset load_dataset(const DatasetManifest& manifest) {
  const auto violations = validate_manifest(manifest);
  if (!violations.empty()) throw InvalidInput("invalid manifest: " + describe(violations.front()));
  PairedDataset data;
  for (const auto& p : manifest.pairs) {
    const auto layout = load_mask(manifest.resolve(p.layout_path));
    for (const auto& f : p.fabricated_paths) data.add(layout, load_mask(manifest.resolve(f)));
  }
  return data;
}

std::vector<std::size_t> batch_indices(std::size_t dataset_size, int batch_size, int step, RngSeed seed) {
  if (dataset_size == 0) throw InvalidInput("empty dataset");
  std::vector<std::size_t> out;
  std::uint64_t cached_epoch = ~0ULL;
  std::vector<std::size_t> order;
  for (int k = 0; k < batch_size; ++k) {
    const std::uint64_t flat = static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(batch_size) + k;
    const std::uint64_t epoch = flat / dataset_size;
    if (epoch != cached_epoch) {
      order = epoch_order(dataset_size, epoch, seed);
      cached_epoch = epoch;
    }
    out.push_back(order[flat % dataset_size]);
  }
  return out;
}

GenFabResult train_genfab(const PairedDataset& data, const TrainConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  if (cfg.generator.latent_dim < 1) throw InvalidConfig("Gen-Fab training needs latent_dim >= 1");
  check_dataset(data, cfg);
  const RngSeed seed(cfg.seed);

  GenFabResult res{build_generator(cfg.generator, seed.child("generator", 0)),
                   build_discriminator(cfg.discriminator, seed.child("discriminator", 0)),
                   {}};
  auto gparams = res.generator.parameters();
  auto dparams = res.discriminator.parameters();
  Adam<float> opt_g(hyper(cfg, cfg.lr_g)), opt_d(hyper(cfg, cfg.lr_d));
  const bool adversarial = cfg.lambda_gan > 0.0;
  const int d = cfg.generator.latent_dim;
  const auto t0 = Clock::now();

  for (int step = 1; step <= cfg.steps; ++step) {
    auto batch = make_batch(data, batch_indices(data.size(), cfg.batch_size, step - 1, seed));
    const int n = batch.layout.n;

    nn::Tensor<float> z(n, d, 1, 1);
    Rng zr(seed.child("z-train", static_cast<std::uint64_t>(step)));
    for (auto& v : z.data) v = static_cast<float>(zr.normal());

    LossRecord rec{step, nan(), nan(), nan(), nan(), 0.0};
    try {
      nn::zero_grad(gparams);
      auto fake = res.generator.forward(batch.layout, &z);

      nn::zero_grad(dparams);
      rec.loss_D = nn::discriminator_pass(res.discriminator, batch.layout, batch.target, fake);
      if (adversarial) opt_d.step(dparams);

      nn::Tensor<float> dfake;
      // The GAN column carries the weighted term, so every row satisfies
      // total = gan + lambda_l1 * l1 whatever lambda_gan is.
      const double gan = nn::generator_adversarial_pass(res.discriminator, batch.layout, fake, cfg.lambda_gan, dfake);
      rec.loss_G_gan = cfg.lambda_gan * gan;
      rec.loss_G_l1 = nn::l1_pass(fake, batch.target, cfg.lambda_l1, dfake);
      rec.loss_G_total = loss_generator_total(gan, rec.loss_G_l1, cfg);
      rec.wall_ms = ms_since(t0);
      if (!finite_record(rec)) throw InvalidInput("non-finite loss");
      res.generator.backward(dfake);
      opt_g.step(gparams);
    } catch (const InvalidInput& e) {
      // Inputs were validated up front, so anything raised here is numeric.
      rec.wall_ms = ms_since(t0);
      res.log.push_back(rec);
      throw TrainingDiverged(std::string(e.what()) + " at " + describe(rec), res.log);
    }

    if (should_log(step, cfg)) {
      res.log.push_back(rec);
      if (progress) progress(rec);
    }
  }
  return res;
}

GenFabResult train_genfab(const DatasetManifest& manifest, const TrainConfig& cfg) {
  return train_genfab(load_dataset(manifest), cfg);
}

UNetResult train_unet(const PairedDataset& data, const TrainConfig& cfg, double dropout_p, const ProgressFn& progress) {
  cfg.validate();
  check_dataset(data, cfg);
  const RngSeed seed(cfg.seed);
  UNetResult res{build_unet(cfg.generator, dropout_p, seed.child("unet", 0)), {}};
  auto params = res.unet.parameters();
  Adam<float> opt(hyper(cfg, cfg.lr_g));
  const auto t0 = Clock::now();

  for (int step = 1; step <= cfg.steps; ++step) {
    auto batch = make_batch(data, batch_indices(data.size(), cfg.batch_size, step - 1, seed));
    Rng drop(seed.child("dropout", static_cast<std::uint64_t>(step)));
    LossRecord rec{step, 0.0, nan(), 0.0, nan(), 0.0};
    try {
      nn::zero_grad(params);
      auto pred = res.unet.forward(batch.layout, nullptr, dropout_p > 0.0 ? &drop : nullptr);
      nn::Tensor<float> dpred;
      rec.loss_G_l1 = nn::l1_pass(pred, batch.target, 1.0, dpred);
      rec.loss_G_total = cfg.lambda_l1 * rec.loss_G_l1;
      rec.wall_ms = ms_since(t0);
      if (!finite_record(rec)) throw InvalidInput("non-finite loss");
      res.unet.backward(dpred);
      opt.step(params);
    } catch (const InvalidInput& e) {
      rec.wall_ms = ms_since(t0);
      res.log.push_back(rec);
      throw TrainingDiverged(std::string(e.what()) + " at " + describe(rec), res.log);
    }
    if (should_log(step, cfg)) {
      res.log.push_back(rec);
      if (progress) progress(rec);
    }
  }
  return res;
}

std::vector<UNetResult> train_ensemble_logged(const PairedDataset& data, const TrainConfig& cfg, int members,
                                              RngSeed base_seed) {
  if (members < 1) throw InvalidInput("ensemble needs at least one member");
  cfg.validate();
  check_dataset(data, cfg);
  std::vector<UNetResult> out(static_cast<std::size_t>(members));
  parallel_for(out.size(), [&](std::size_t k) {
    TrainConfig c = cfg;
    c.seed = base_seed.child("member", k).value;
    out[k] = train_unet(data, c, 0.0);
  });
  return out;
}

std::vector<UNet> train_ensemble(const PairedDataset& data, const TrainConfig& cfg, int members, RngSeed base_seed) {
  std::vector<UNet> nets;
  for (auto& r : train_ensemble_logged(data, cfg, members, base_seed)) nets.push_back(std::move(r.unet));
  return nets;
}

}  // namespace fabtwin
