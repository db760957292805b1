#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "fabtwin/image.hpp"
#include "fabtwin/nn/layers.hpp"
#include "fabtwin/rng.hpp"

namespace fabtwin {

/// U-Net encoder/decoder. `latent_dim` > 0 adds the tiled noise input at the
/// bottleneck; 0 gives the plain U-Net baseline.
struct GeneratorConfig {
  int depth = 8;
  int base_width = 32;
  int latent_dim = 16;
  int input_size = 256;

  /// Throws InvalidConfig.
  void validate() const;
  int channels(int level) const;
  int bottleneck_size() const { return input_size >> depth; }
  bool operator==(const GeneratorConfig&) const = default;
};

/// PatchGAN: 4x4 convs with widths [64,128,256,512,512] * base_width/64,
/// strides [2,2,2,1,1], pad 1, leaky ReLU 0.2, then a 1x1 conv to one logit.
struct DiscriminatorConfig {
  int base_width = 32;
  int in_channels = 2;

  void validate() const;
  std::vector<int> widths() const;
  static constexpr int kStrides[5] = {2, 2, 2, 1, 1};
  bool operator==(const DiscriminatorConfig&) const = default;
};

nlohmann::json to_json(const GeneratorConfig& c);
GeneratorConfig generator_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DiscriminatorConfig& c);
DiscriminatorConfig discriminator_config_from_json(const nlohmann::json& j);

/// Receptive field of one output logit, by the recurrence r += (k-1)*jump.
int patch_receptive_field(const DiscriminatorConfig& cfg);
/// Logit map side length for a square input.
int patch_output_size(int input_size);

namespace nn {

template <typename T>
void init_normal(std::vector<Param<T>*> params, RngSeed seed, double sd = 0.02) {
  Rng rng(seed.child("init", 0));
  for (auto* p : params) {
    const bool is_bias = p->shape.size() == 1;
    for (auto& v : p->value) v = is_bias ? T(0) : static_cast<T>(rng.normal(0.0, sd));
  }
}

/// Encoder levels are 4x4 stride-2 convs (leaky ReLU before all but the
/// first, instance norm on all but the first and the innermost). Decoder
/// levels are 4x4 stride-2 transposed convs fed by ReLU of [skip, upsampled];
/// every decoder level but the output one is instance-normalized, and the
/// three levels nearest the bottleneck carry dropout. The output passes
/// through a sigmoid so values lie in [0,1].
template <typename T>
class UNetGenerator {
 public:
  UNetGenerator() = default;
  explicit UNetGenerator(const GeneratorConfig& cfg, double dropout_p = 0.0) : cfg_(cfg), dropout_p_(dropout_p) {
    cfg_.validate();
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw InvalidConfig("dropout_p must lie in [0,1)");
    const int d = cfg_.depth;
    for (int l = 0; l < d; ++l) {
      const int in = l == 0 ? 1 : cfg_.channels(l - 1);
      enc_.emplace_back("enc" + std::to_string(l), in, cfg_.channels(l), 4, 2, 1);
    }
    for (int l = 0; l < d; ++l) {
      int in;
      if (l == d - 1) {
        in = cfg_.channels(d - 1) + cfg_.latent_dim;
      } else {
        in = 2 * cfg_.channels(l);
      }
      const int out = l == 0 ? 1 : cfg_.channels(l - 1);
      dec_.emplace_back("dec" + std::to_string(l), in, out, 4, 2, 1);
    }
    enc_act_.assign(static_cast<std::size_t>(d), LeakyRelu<T>(T(0.2)));
    dec_act_.assign(static_cast<std::size_t>(d), LeakyRelu<T>(T(0)));
    enc_norm_.assign(static_cast<std::size_t>(d), InstanceNorm<T>());
    dec_norm_.assign(static_cast<std::size_t>(d), InstanceNorm<T>());
    drop_.assign(static_cast<std::size_t>(d), Dropout<T>());
  }

  const GeneratorConfig& config() const { return cfg_; }
  double dropout_p() const { return dropout_p_; }

  std::vector<Param<T>*> parameters() {
    std::vector<Param<T>*> out;
    for (auto& c : enc_)
      for (auto* p : c.parameters()) out.push_back(p);
    for (auto& c : dec_)
      for (auto* p : c.parameters()) out.push_back(p);
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : parameters()) n += p->size();
    return n;
  }

  void init(RngSeed seed) { init_normal<T>(parameters(), seed); }

  /// x: (N,1,S,S); z: (N,d,1,1) or null when latent_dim == 0. Dropout is
  /// applied only when `dropout_rng` is non-null.
  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>* z, Rng* dropout_rng = nullptr) {
    const int d = cfg_.depth;
    if (x.c != 1 || x.h != cfg_.input_size || x.w != cfg_.input_size) {
      throw InvalidInput("generator input must be 1x" + std::to_string(cfg_.input_size) + "x" +
                         std::to_string(cfg_.input_size));
    }
    e_.assign(static_cast<std::size_t>(d), Tensor<T>());
    e_[0] = enc_[0].forward(x);
    for (int l = 1; l < d; ++l) {
      auto a = enc_act_[l].forward(e_[l - 1]);
      auto c = enc_[l].forward(a);
      e_[l] = (l < d - 1) ? enc_norm_[l].forward(c) : std::move(c);
    }

    auto u = bottleneck_act_.forward(e_[d - 1]);
    if (cfg_.latent_dim > 0) {
      if (!z || z->n != x.n || z->c != cfg_.latent_dim) {
        throw InvalidInput("latent vector length must equal latent_dim " + std::to_string(cfg_.latent_dim));
      }
      Tensor<T> tiled(x.n, cfg_.latent_dim, u.h, u.w);
      for (int i = 0; i < x.n; ++i)
        for (int k = 0; k < cfg_.latent_dim; ++k) {
          T* p = tiled.channel(i, k);
          std::fill(p, p + tiled.plane(), z->channel(i, k)[0]);
        }
      u = concat_channels(u, tiled);
    }
    decoder_input_shape_ = {u.c, u.h, u.w};

    for (int l = d - 1; l >= 1; --l) {
      auto c = dec_[l].forward(u);
      auto dl = dec_norm_[l].forward(c);
      const bool has_drop = l >= d - 3;
      dl = drop_[l].forward(dl, has_drop ? dropout_p_ : 0.0, dropout_rng);
      u = dec_act_[l - 1].forward(concat_channels(e_[l - 1], dl));
    }
    return out_act_.forward(dec_[0].forward(u));
  }

  /// Accumulates parameter gradients for the last forward call.
  void backward(const Tensor<T>& dout) {
    const int d = cfg_.depth;
    std::vector<Tensor<T>> ge(static_cast<std::size_t>(d));
    auto g = dec_[0].backward(out_act_.backward(dout));
    for (int l = 1; l < d; ++l) {
      auto gcat = dec_act_[l - 1].backward(g);
      Tensor<T> gskip, gd;
      split_channels(gcat, e_[l - 1].c, gskip, gd);
      add_into(ge[l - 1], gskip);
      gd = drop_[l].backward(gd);
      gd = dec_norm_[l].backward(gd);
      g = dec_[l].backward(gd);
    }
    if (cfg_.latent_dim > 0) {
      Tensor<T> gb, gz;
      split_channels(g, e_[d - 1].c, gb, gz);
      g = std::move(gb);
    }
    add_into(ge[d - 1], bottleneck_act_.backward(g));
    for (int l = d - 1; l >= 1; --l) {
      auto gl = (l < d - 1) ? enc_norm_[l].backward(ge[l]) : ge[l];
      auto ga = enc_[l].backward(gl);
      add_into(ge[l - 1], enc_act_[l].backward(ga));
    }
    enc_[0].backward(ge[0], false);
  }

  /// (channels, height, width) of the tensor entering the first decoder
  /// layer during the last forward call.
  std::array<int, 3> decoder_input_shape() const { return decoder_input_shape_; }

 private:
  GeneratorConfig cfg_;
  double dropout_p_ = 0.0;
  std::vector<Conv2d<T>> enc_;
  std::vector<ConvTranspose2d<T>> dec_;
  std::vector<LeakyRelu<T>> enc_act_, dec_act_;
  LeakyRelu<T> bottleneck_act_{T(0)};
  std::vector<InstanceNorm<T>> enc_norm_, dec_norm_;
  std::vector<Dropout<T>> drop_;
  Sigmoid<T> out_act_;
  std::vector<Tensor<T>> e_;
  std::array<int, 3> decoder_input_shape_{0, 0, 0};
};

template <typename T>
class PatchDiscriminator {
 public:
  PatchDiscriminator() = default;
  explicit PatchDiscriminator(const DiscriminatorConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const auto widths = cfg_.widths();
    int in = cfg_.in_channels;
    for (int l = 0; l < 5; ++l) {
      convs_.emplace_back("disc" + std::to_string(l), in, widths[static_cast<std::size_t>(l)], 4,
                          DiscriminatorConfig::kStrides[l], 1);
      in = widths[static_cast<std::size_t>(l)];
    }
    head_ = Conv2d<T>("disc_head", in, 1, 1, 1, 0);
    acts_.assign(5, LeakyRelu<T>(T(0.2)));
  }

  const DiscriminatorConfig& config() const { return cfg_; }

  std::vector<Param<T>*> parameters() {
    std::vector<Param<T>*> out;
    for (auto& c : convs_)
      for (auto* p : c.parameters()) out.push_back(p);
    for (auto* p : head_.parameters()) out.push_back(p);
    return out;
  }

  void init(RngSeed seed) { init_normal<T>(parameters(), seed); }

  /// x: (N, in_channels, H, W) -> pre-sigmoid logits (N, 1, H', W').
  Tensor<T> forward(const Tensor<T>& x) {
    Tensor<T> h = x;
    for (std::size_t l = 0; l < convs_.size(); ++l) h = acts_[l].forward(convs_[l].forward(h));
    return head_.forward(h);
  }

  /// Accumulates parameter gradients; returns dL/dx.
  Tensor<T> backward(const Tensor<T>& dlogits) {
    auto g = head_.backward(dlogits);
    for (std::size_t l = convs_.size(); l-- > 0;) g = convs_[l].backward(acts_[l].backward(g));
    return g;
  }

 private:
  DiscriminatorConfig cfg_;
  std::vector<Conv2d<T>> convs_;
  Conv2d<T> head_;
  std::vector<LeakyRelu<T>> acts_;
};

template <typename T>
void zero_grad(std::vector<Param<T>*> params) {
  for (auto* p : params) p->zero_grad();
}

template <typename T>
Tensor<T> to_tensor(const std::vector<const BitMask*>& masks) {
  const auto& first = *masks.front();
  Tensor<T> t(static_cast<int>(masks.size()), 1, first.height(), first.width());
  for (std::size_t i = 0; i < masks.size(); ++i) {
    auto bits = masks[i]->bits();
    std::transform(bits.begin(), bits.end(), t.item(static_cast<int>(i)), [](std::uint8_t b) { return T(b); });
  }
  return t;
}

}  // namespace nn

using Generator = nn::UNetGenerator<float>;
using UNet = nn::UNetGenerator<float>;
using Discriminator = nn::PatchDiscriminator<float>;

struct LatentVector {
  std::vector<float> z;
};

LatentVector sample_latent(int latent_dim, RngSeed seed);

/// Fresh generator with N(0, 0.02^2) weights; requires latent_dim > 0.
Generator build_generator(const GeneratorConfig& cfg, RngSeed seed);
GrayImage generator_forward(Generator& gen, const BitMask& layout, const LatentVector& z);

Discriminator build_discriminator(const DiscriminatorConfig& cfg, RngSeed seed);

/// Pre-sigmoid logit map as a dense (height x width) array.
struct LogitMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;
};

LogitMap discriminator_forward(Discriminator& disc, const BitMask& layout, const GrayImage& image);

/// Baseline U-Net (no noise input). Dropout sits after the three decoder
/// blocks nearest the bottleneck.
UNet build_unet(GeneratorConfig cfg, double dropout_p, RngSeed seed);
GrayImage unet_forward(UNet& unet, const BitMask& layout, bool dropout_active, RngSeed seed);

/// M outputs, z_m drawn from seed.child("z", m).
std::vector<GrayImage> sample_outputs(Generator& gen, const BitMask& layout, int m, RngSeed seed);
/// M forwards with dropout active; pass m uses seed.child("mc", m).
std::vector<GrayImage> mc_dropout_samples(UNet& unet, const BitMask& layout, int m, RngSeed seed);
/// One deterministic forward per member, in member order.
std::vector<GrayImage> ensemble_samples(std::vector<UNet>& members, const BitMask& layout);

/// Order-dependent FNV digest of all parameter bytes.
std::uint64_t weights_checksum(nn::UNetGenerator<float>& model);
std::uint64_t weights_checksum(nn::PatchDiscriminator<float>& model);

}  // namespace fabtwin
