#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fabtwin/checkpoint.hpp"
#include "fabtwin/error.hpp"
#include "fabtwin/manifest.hpp"
#include "fabtwin/networks.hpp"

namespace fabtwin {

struct TrainConfig {
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  int steps = 1000;
  int batch_size = 4;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double lambda_l1 = 100.0;
  double lambda_gan = 1.0;
  int log_every = 10;
  std::string checkpoint_path;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
/// Missing keys keep their defaults; a top-level "latent_dim" overrides the
/// generator's.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct LossRecord {
  int step = 0;
  double loss_D = 0.0;
  double loss_G_total = 0.0;
  double loss_G_gan = 0.0;
  double loss_G_l1 = 0.0;
  double wall_ms = 0.0;
};

inline constexpr const char* kLossLogHeader = "step,loss_D,loss_G_total,loss_G_gan,loss_G_l1,wall_ms";

void write_loss_log(const std::filesystem::path& path, const std::vector<LossRecord>& log);
/// Throws InvalidInput naming the offending line on malformed rows or a
/// header missing any column.
std::vector<LossRecord> read_loss_log(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Losses. Logit losses are averaged over every patch logit in the batch and
// evaluated in log-sigmoid form: -log sigmoid(l) = softplus(-l).

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
inline double stable_sigmoid(double x) {
  x = std::clamp(x, -30.0, 30.0);
  return 1.0 / (1.0 + std::exp(-x));
}

template <typename T>
void require_finite(std::span<const T> v, const char* what) {
  for (T x : v) {
    if (!std::isfinite(static_cast<double>(x))) throw InvalidInput(std::string("non-finite ") + what);
  }
}

/// -mean log sigmoid(real) - mean log(1 - sigmoid(fake))
template <typename T>
double loss_discriminator(std::span<const T> logits_real, std::span<const T> logits_fake) {
  if (logits_real.size() != logits_fake.size() || logits_real.empty()) {
    throw InvalidInput("real and fake logit maps must have the same non-zero size");
  }
  require_finite(logits_real, "real logits");
  require_finite(logits_fake, "fake logits");
  double a = 0.0, b = 0.0;
  for (T l : logits_real) a += softplus(-static_cast<double>(l));
  for (T l : logits_fake) b += softplus(static_cast<double>(l));
  return a / static_cast<double>(logits_real.size()) + b / static_cast<double>(logits_fake.size());
}

/// -mean log sigmoid(fake)
template <typename T>
double loss_generator_gan(std::span<const T> logits_fake) {
  if (logits_fake.empty()) throw InvalidInput("empty logit map");
  require_finite(logits_fake, "fake logits");
  double a = 0.0;
  for (T l : logits_fake) a += softplus(-static_cast<double>(l));
  return a / static_cast<double>(logits_fake.size());
}

/// Mean absolute difference.
template <typename T>
double loss_l1(std::span<const T> pred, std::span<const T> target) {
  if (pred.size() != target.size() || pred.empty()) throw InvalidInput("L1: size mismatch");
  double a = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) a += std::abs(static_cast<double>(pred[i]) - static_cast<double>(target[i]));
  return a / static_cast<double>(pred.size());
}

double loss_l1(const GrayImage& pred, const BitMask& target);

/// lambda_gan * gan + lambda_l1 * l1
double loss_generator_total(double gan, double l1, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Adam

struct AdamHyper {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One Adam step in place. `t` is the 1-based step count after this update.
template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v, long t,
                 const AdamHyper& h) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
    throw InvalidInput("adam: shape mismatch");
  }
  if (t < 1) throw InvalidInput("adam: step count must be >= 1");
  require_finite(grad, "gradient");
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double mi = h.beta1 * m[i] + (1.0 - h.beta1) * g;
    const double vi = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double mhat = mi / c1, vhat = vi / c2;
    param[i] = static_cast<T>(param[i] - h.lr * mhat / (std::sqrt(vhat) + h.eps));
  }
}

template <typename T>
class Adam {
 public:
  explicit Adam(AdamHyper h = {}) : h_(h) {}

  void step(const std::vector<nn::Param<T>*>& params) {
    if (m_.empty()) {
      for (auto* p : params) {
        m_.emplace_back(p->size(), T(0));
        v_.emplace_back(p->size(), T(0));
      }
    }
    ++t_;
    for (std::size_t k = 0; k < params.size(); ++k) {
      adam_update<T>(params[k]->value, std::span<const T>(params[k]->grad), m_[k], v_[k], t_, h_);
    }
  }

  long steps() const { return t_; }

 private:
  AdamHyper h_;
  std::vector<std::vector<T>> m_, v_;
  long t_ = 0;
};

// ---------------------------------------------------------------------------
// Loss/gradient passes shared by the training loop and the gradient checks.

namespace nn {

/// Builds [layout, image] channel pairs.
template <typename T>
Tensor<T> pair_input(const Tensor<T>& layout, const Tensor<T>& image) {
  return concat_channels(layout, image);
}

/// Forward + backward of the discriminator loss on real and fake pairs.
/// Accumulates D parameter gradients and returns L_D.
template <typename T>
double discriminator_pass(PatchDiscriminator<T>& disc, const Tensor<T>& layout, const Tensor<T>& real,
                          const Tensor<T>& fake) {
  auto logits = disc.forward(concat_batch(pair_input(layout, real), pair_input(layout, fake)));
  const std::size_t half = logits.size() / 2;
  std::span<const T> lr(logits.data.data(), half), lf(logits.data.data() + half, half);
  const double loss = loss_discriminator<T>(lr, lf);

  Tensor<T> dlogits(logits.n, logits.c, logits.h, logits.w);
  const double inv = 1.0 / static_cast<double>(half);
  for (std::size_t i = 0; i < half; ++i) {
    dlogits.data[i] = static_cast<T>((stable_sigmoid(lr[i]) - 1.0) * inv);
    dlogits.data[half + i] = static_cast<T>(stable_sigmoid(lf[i]) * inv);
  }
  disc.backward(dlogits);
  return loss;
}

/// Adversarial generator loss through the discriminator. Writes
/// scale * dL_GAN/dfake into `dfake` (accumulating) and returns L_GAN.
/// Discriminator parameter gradients are also accumulated; callers zero
/// them before the next discriminator update.
template <typename T>
double generator_adversarial_pass(PatchDiscriminator<T>& disc, const Tensor<T>& layout, const Tensor<T>& fake,
                                  double scale, Tensor<T>& dfake) {
  auto logits = disc.forward(pair_input(layout, fake));
  const double loss = loss_generator_gan<T>(logits.data);
  Tensor<T> dlogits(logits.n, logits.c, logits.h, logits.w);
  const double inv = 1.0 / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    dlogits.data[i] = static_cast<T>((stable_sigmoid(logits.data[i]) - 1.0) * inv * scale);
  }
  auto dinput = disc.backward(dlogits);
  if (dfake.data.empty()) dfake = Tensor<T>(fake.n, fake.c, fake.h, fake.w);
  for (int i = 0; i < fake.n; ++i) {
    const T* src = dinput.channel(i, 1);
    T* dst = dfake.item(i);
    for (std::size_t j = 0; j < fake.item_size(); ++j) dst[j] += src[j];
  }
  return loss;
}

/// Mean-reduced L1; accumulates scale * dL1/dfake into `dfake`.
template <typename T>
double l1_pass(const Tensor<T>& fake, const Tensor<T>& real, double scale, Tensor<T>& dfake) {
  const double loss = loss_l1<T>(fake.data, real.data);
  if (dfake.data.empty()) dfake = Tensor<T>(fake.n, fake.c, fake.h, fake.w);
  const double inv = scale / static_cast<double>(fake.size());
  for (std::size_t i = 0; i < fake.size(); ++i) {
    const T diff = fake.data[i] - real.data[i];
    const double s = diff > T(0) ? 1.0 : (diff < T(0) ? -1.0 : 0.0);
    dfake.data[i] += static_cast<T>(s * inv);
  }
  return loss;
}

}  // namespace nn

// ---------------------------------------------------------------------------
// Training loops

/// In-memory (layout, outcome) pairs, all of one square size.
struct PairedDataset {
  std::vector<BitMask> layouts;
  std::vector<BitMask> targets;

  std::size_t size() const { return layouts.size(); }
  void add(BitMask layout, BitMask target);
};

/// One training pair per fabricated path. Throws InvalidInput when the
/// manifest has violations.
PairedDataset load_dataset(const DatasetManifest& manifest);

/// Thrown when a loss turns non-finite; carries the log up to and including
/// the offending step.
class TrainingDiverged : public RuntimeFailure {
 public:
  TrainingDiverged(const std::string& what, std::vector<LossRecord> log)
      : RuntimeFailure(what), log_(std::move(log)) {}
  const std::vector<LossRecord>& log() const { return log_; }

 private:
  std::vector<LossRecord> log_;
};

struct GenFabResult {
  Generator generator;
  Discriminator discriminator;
  std::vector<LossRecord> log;
};

struct UNetResult {
  UNet unet;
  std::vector<LossRecord> log;
};

using ProgressFn = std::function<void(const LossRecord&)>;

/// Alternating updates: per step sample a batch and fresh z per item,
/// update D on real vs generated pairs, then G on
/// lambda_gan * L_GAN + lambda_l1 * L_L1. D is left untouched when
/// lambda_gan == 0. Deterministic given (dataset, cfg).
GenFabResult train_genfab(const PairedDataset& data, const TrainConfig& cfg, const ProgressFn& progress = {});
GenFabResult train_genfab(const DatasetManifest& manifest, const TrainConfig& cfg);

/// L1-only U-Net; dropout is active during training when dropout_p > 0.
UNetResult train_unet(const PairedDataset& data, const TrainConfig& cfg, double dropout_p,
                      const ProgressFn& progress = {});

/// Member k trains with seed base_seed.child("member", k) for init and order.
std::vector<UNet> train_ensemble(const PairedDataset& data, const TrainConfig& cfg, int members, RngSeed base_seed);
/// Same, keeping each member's loss log.
std::vector<UNetResult> train_ensemble_logged(const PairedDataset& data, const TrainConfig& cfg, int members,
                                              RngSeed base_seed);

/// Batch order for a run: epoch e is a Fisher-Yates shuffle seeded by
/// seed.child("shuffle", e). Returns the item indices for step `step` (0-based).
std::vector<std::size_t> batch_indices(std::size_t dataset_size, int batch_size, int step, RngSeed seed);

}  // namespace fabtwin
