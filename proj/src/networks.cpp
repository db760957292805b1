#include "fabtwin/networks.hpp"

#include <algorithm>
#include <cstring>

#include "fabtwin/error.hpp"

namespace fabtwin {

namespace {

constexpr int kDiscriminatorWidths[5] = {64, 128, 256, 512, 512};
constexpr int kInferenceChunk = 8;

GrayImage to_gray(const float* data, int width, int height) {
  std::vector<float> v(data, data + static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  for (auto& x : v) x = std::clamp(x, 0.0f, 1.0f);
  return GrayImage(width, height, std::move(v));
}

nn::Tensor<float> layout_batch(const BitMask& layout, int n) {
  std::vector<const BitMask*> ptrs(static_cast<std::size_t>(n), &layout);
  return nn::to_tensor<float>(ptrs);
}

void check_layout(const GeneratorConfig& cfg, const BitMask& layout) {
  if (layout.width() != cfg.input_size || layout.height() != cfg.input_size) {
    throw InvalidInput("layout is " + std::to_string(layout.width()) + "x" + std::to_string(layout.height()) +
                       " but the model expects " + std::to_string(cfg.input_size) + "x" +
                       std::to_string(cfg.input_size));
  }
}

std::uint64_t checksum_params(const std::vector<nn::Param<float>*>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto* p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
    for (std::size_t i = 0; i < p->value.size() * sizeof(float); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (depth < 1 || depth > 12) throw InvalidConfig("depth must lie in [1,12]");
  if (base_width < 1) throw InvalidConfig("base_width must be >= 1");
  if (latent_dim < 0) throw InvalidConfig("latent_dim must be >= 0");
  if (input_size < 2 || input_size % (1 << depth) != 0) {
    throw InvalidConfig("input_size " + std::to_string(input_size) + " is not divisible by 2^depth = " +
                        std::to_string(1 << depth));
  }
}

int GeneratorConfig::channels(int level) const {
  const long c = static_cast<long>(base_width) << std::min(level, 20);
  return static_cast<int>(std::min<long>(c, 8L * base_width));
}

void DiscriminatorConfig::validate() const {
  if (base_width < 1) throw InvalidConfig("discriminator base_width must be >= 1");
  if (in_channels < 1) throw InvalidConfig("discriminator in_channels must be >= 1");
}

std::vector<int> DiscriminatorConfig::widths() const {
  std::vector<int> w;
  for (int k : kDiscriminatorWidths) w.push_back(std::max(1, k * base_width / 64));
  return w;
}

nlohmann::json to_json(const GeneratorConfig& c) {
  return {{"depth", c.depth}, {"base_width", c.base_width}, {"latent_dim", c.latent_dim}, {"input_size", c.input_size}};
}

GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  try {
    c.depth = j.value("depth", c.depth);
    c.base_width = j.value("base_width", c.base_width);
    c.latent_dim = j.value("latent_dim", c.latent_dim);
    c.input_size = j.value("input_size", c.input_size);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("malformed generator config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const DiscriminatorConfig& c) {
  return {{"base_width", c.base_width}, {"in_channels", c.in_channels}};
}

DiscriminatorConfig discriminator_config_from_json(const nlohmann::json& j) {
  DiscriminatorConfig c;
  try {
    c.base_width = j.value("base_width", c.base_width);
    c.in_channels = j.value("in_channels", c.in_channels);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("malformed discriminator config: ") + e.what());
  }
  c.validate();
  return c;
}

int patch_receptive_field(const DiscriminatorConfig&) {
  int rf = 1, jump = 1;
  for (int s : DiscriminatorConfig::kStrides) {
    rf += (4 - 1) * jump;
    jump *= s;
  }
  return rf;  // the 1x1 head adds nothing
}

int patch_output_size(int input_size) {
  int s = input_size;
  for (int stride : DiscriminatorConfig::kStrides) s = nn::conv_out_size(s, 4, stride, 1);
  return s;
}

LatentVector sample_latent(int latent_dim, RngSeed seed) {
  Rng rng(seed);
  LatentVector z;
  z.z.resize(static_cast<std::size_t>(latent_dim));
  for (auto& v : z.z) v = static_cast<float>(rng.normal());
  return z;
}

Generator build_generator(const GeneratorConfig& cfg, RngSeed seed) {
  if (cfg.latent_dim < 1) throw InvalidConfig("generator needs latent_dim >= 1");
  Generator g(cfg);
  g.init(seed);
  return g;
}

GrayImage generator_forward(Generator& gen, const BitMask& layout, const LatentVector& z) {
  const auto& cfg = gen.config();
  check_layout(cfg, layout);
  if (static_cast<int>(z.z.size()) != cfg.latent_dim) {
    throw InvalidInput("latent vector has length " + std::to_string(z.z.size()) + ", expected " +
                       std::to_string(cfg.latent_dim));
  }
  nn::Tensor<float> zt(1, cfg.latent_dim, 1, 1);
  std::copy(z.z.begin(), z.z.end(), zt.data.begin());
  auto out = gen.forward(layout_batch(layout, 1), &zt);
  return to_gray(out.item(0), out.w, out.h);
}

Discriminator build_discriminator(const DiscriminatorConfig& cfg, RngSeed seed) {
  Discriminator d(cfg);
  d.init(seed);
  return d;
}

LogitMap discriminator_forward(Discriminator& disc, const BitMask& layout, const GrayImage& image) {
  if (layout.width() != image.width() || layout.height() != image.height()) {
    throw InvalidInput("layout and image dimensions differ");
  }
  nn::Tensor<float> x(1, 2, layout.height(), layout.width());
  auto bits = layout.bits();
  std::transform(bits.begin(), bits.end(), x.channel(0, 0), [](std::uint8_t b) { return float(b); });
  std::copy(image.values().begin(), image.values().end(), x.channel(0, 1));
  auto y = disc.forward(x);
  return {y.w, y.h, y.data};
}

UNet build_unet(GeneratorConfig cfg, double dropout_p, RngSeed seed) {
  cfg.latent_dim = 0;
  UNet u(cfg, dropout_p);
  u.init(seed);
  return u;
}

GrayImage unet_forward(UNet& unet, const BitMask& layout, bool dropout_active, RngSeed seed) {
  check_layout(unet.config(), layout);
  Rng rng(seed.child("dropout", 0));
  auto out = unet.forward(layout_batch(layout, 1), nullptr, dropout_active ? &rng : nullptr);
  return to_gray(out.item(0), out.w, out.h);
}

std::vector<GrayImage> sample_outputs(Generator& gen, const BitMask& layout, int m, RngSeed seed) {
  if (m < 1) throw InvalidInput("sample count must be >= 1");
  const auto& cfg = gen.config();
  check_layout(cfg, layout);
  std::vector<GrayImage> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int start = 0; start < m; start += kInferenceChunk) {
    const int n = std::min(kInferenceChunk, m - start);
    nn::Tensor<float> z(n, cfg.latent_dim, 1, 1);
    for (int i = 0; i < n; ++i) {
      const auto lv = sample_latent(cfg.latent_dim, seed.child("z", static_cast<std::uint64_t>(start + i)));
      std::copy(lv.z.begin(), lv.z.end(), z.item(i));
    }
    auto y = gen.forward(layout_batch(layout, n), &z);
    for (int i = 0; i < n; ++i) out.push_back(to_gray(y.item(i), y.w, y.h));
  }
  return out;
}

std::vector<GrayImage> mc_dropout_samples(UNet& unet, const BitMask& layout, int m, RngSeed seed) {
  if (m < 1) throw InvalidInput("sample count must be >= 1");
  std::vector<GrayImage> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) out.push_back(unet_forward(unet, layout, true, seed.child("mc", static_cast<std::uint64_t>(i))));
  return out;
}

std::vector<GrayImage> ensemble_samples(std::vector<UNet>& members, const BitMask& layout) {
  if (members.empty()) throw InvalidInput("ensemble needs at least one member");
  std::vector<GrayImage> out;
  out.reserve(members.size());
  for (auto& m : members) out.push_back(unet_forward(m, layout, false, RngSeed(0)));
  return out;
}

std::uint64_t weights_checksum(nn::UNetGenerator<float>& model) { return checksum_params(model.parameters()); }
std::uint64_t weights_checksum(nn::PatchDiscriminator<float>& model) { return checksum_params(model.parameters()); }

}  // namespace fabtwin
