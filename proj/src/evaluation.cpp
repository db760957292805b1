#include "fabtwin/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "fabtwin/error.hpp"

namespace fabtwin {

namespace {

template <typename Img>
void check_set(const std::vector<Img>& set, const char* what, std::size_t min_size = 1) {
  if (set.size() < min_size) {
    throw InvalidInput(std::string(what) + ": needs at least " + std::to_string(min_size) + " image(s)");
  }
  for (const auto& im : set) {
    if (im.width() != set.front().width() || im.height() != set.front().height()) {
      throw InvalidInput(std::string(what) + ": images differ in size");
    }
  }
}

double pop_variance(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size());
}

GrayImage image_from(int w, int h, const std::vector<double>& v) {
  std::vector<float> f(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) f[i] = static_cast<float>(std::clamp(v[i], 0.0, 1.0));
  return GrayImage(w, h, std::move(f));
}

}  // namespace

double iou(const BitMask& a, const BitMask& b) {
  if (!same_dims(a, b)) throw InvalidInput("iou: dimension mismatch");
  std::size_t inter = 0, uni = 0;
  const auto x = a.bits(), y = b.bits();
  for (std::size_t i = 0; i < x.size(); ++i) {
    inter += (x[i] & y[i]);
    uni += (x[i] | y[i]);
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double match_random(const std::vector<BitMask>& preds, const std::vector<BitMask>& reals, RngSeed seed) {
  if (preds.empty() || reals.empty()) throw InvalidInput("match_random: empty list");
  double s = 0.0;
  for (std::size_t i = 0; i < reals.size(); ++i) {
    Rng rng(seed.child("match", i));
    s += iou(preds[rng.uniform_index(preds.size())], reals[i]);
  }
  return 100.0 * s / static_cast<double>(reals.size());
}

double match_greedy(const std::vector<BitMask>& preds, const std::vector<BitMask>& reals) {
  if (preds.empty() || reals.empty()) throw InvalidInput("match_greedy: empty list");
  double s = 0.0;
  for (const auto& r : reals) {
    double best = 0.0;
    for (const auto& p : preds) best = std::max(best, iou(p, r));
    s += best;
  }
  return 100.0 * s / static_cast<double>(reals.size());
}

std::vector<BitMask> binarize_all(const std::vector<GrayImage>& images) {
  std::vector<BitMask> out;
  out.reserve(images.size());
  for (const auto& im : images) out.push_back(binarize(im, 0.5));
  return out;
}

std::vector<GrayImage> to_gray(const std::vector<BitMask>& masks) {
  std::vector<GrayImage> out;
  out.reserve(masks.size());
  for (const auto& m : masks) out.push_back(GrayImage::from_mask(m));
  return out;
}

GrayImage mean_image(const std::vector<GrayImage>& set) {
  check_set(set, "mean_image");
  std::vector<double> acc(set.front().size(), 0.0);
  for (const auto& im : set) {
    const auto v = im.values();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
  }
  for (auto& a : acc) a /= static_cast<double>(set.size());
  return image_from(set.front().width(), set.front().height(), acc);
}

GrayImage mean_image(const std::vector<BitMask>& set) { return mean_image(to_gray(set)); }

Histogram intensity_histogram(const GrayImage& img, int bins, double epsilon) {
  if (bins < 2) throw InvalidInput("histogram needs at least 2 bins");
  if (img.size() == 0) throw InvalidInput("histogram of an empty image");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InvalidInput("histogram epsilon must be >= 0");
  Histogram h;
  h.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) h.bin_edges[static_cast<std::size_t>(i)] = static_cast<double>(i) / bins;
  h.mass.assign(static_cast<std::size_t>(bins), 0.0);
  for (float v : img.values()) {
    int b = static_cast<int>(std::floor(static_cast<double>(v) * bins));
    h.mass[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))] += 1.0;
  }
  // Smoothing acts on probabilities, not counts, so its weight does not
  // depend on the image size.
  const double n = static_cast<double>(img.size());
  double total = 0.0;
  for (auto& m : h.mass) {
    m = m / n + epsilon;
    total += m;
  }
  for (auto& m : h.mass) m /= total;
  return h;
}

double kl_divergence(const Histogram& p, const Histogram& q) {
  if (!p.same_binning(q) || p.mass.size() != q.mass.size()) throw InvalidInput("kl: histogram binning differs");
  double s = 0.0;
  for (std::size_t i = 0; i < p.mass.size(); ++i) {
    if (p.mass[i] <= 0.0) continue;
    if (q.mass[i] <= 0.0) throw InvalidInput("kl: model histogram has an empty bin where real mass is positive");
    s += p.mass[i] * std::log(p.mass[i] / q.mass[i]);
  }
  return std::max(s, 0.0);
}

double wasserstein_1d(const Histogram& p, const Histogram& q) {
  if (!p.same_binning(q) || p.mass.size() != q.mass.size()) {
    throw InvalidInput("wasserstein: histogram binning differs");
  }
  double cp = 0.0, cq = 0.0, s = 0.0;
  for (std::size_t i = 0; i < p.mass.size(); ++i) {
    cp += p.mass[i];
    cq += q.mass[i];
    s += std::abs(cp - cq);
  }
  return s * p.bin_width();
}

double wd_pairwise_mean(const std::vector<GrayImage>& gen_set, const std::vector<GrayImage>& real_set, int bins) {
  if (gen_set.empty() || real_set.empty()) throw InvalidInput("wd_pairwise_mean: empty set");
  std::vector<Histogram> g, r;
  for (const auto& im : gen_set) g.push_back(intensity_histogram(im, bins, 0.0));
  for (const auto& im : real_set) r.push_back(intensity_histogram(im, bins, 0.0));
  double s = 0.0;
  for (const auto& a : g) {
    for (const auto& b : r) s += wasserstein_1d(a, b);
  }
  return s / (static_cast<double>(g.size()) * static_cast<double>(r.size()));
}

double kl_mean_image(const std::vector<GrayImage>& real_set, const std::vector<GrayImage>& model_set, int bins,
                     double epsilon) {
  const auto p = intensity_histogram(mean_image(real_set), bins, epsilon);
  const auto q = intensity_histogram(mean_image(model_set), bins, epsilon);
  return kl_divergence(p, q);
}

GrayImage variance_map(const std::vector<GrayImage>& set) {
  check_set(set, "variance_map", 2);
  const std::size_t n = set.front().size();
  std::vector<double> out(n), col(set.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < set.size(); ++k) col[k] = set[k].values()[i];
    out[i] = pop_variance(col);
  }
  return image_from(set.front().width(), set.front().height(), out);
}

GrayImage variance_map(const std::vector<BitMask>& set) { return variance_map(to_gray(set)); }

UncertaintyValues decompose_uncertainty(const std::vector<std::vector<std::vector<double>>>& samples) {
  if (samples.size() < 2) throw InvalidInput("decompose_uncertainty: needs K >= 2 models");
  const std::size_t m = samples.front().size();
  if (m < 1) throw InvalidInput("decompose_uncertainty: model 0 has no samples");
  const std::size_t n = samples.front().front().size();
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (samples[k].size() != m) {
      throw InvalidInput("decompose_uncertainty: model " + std::to_string(k) + " has " +
                         std::to_string(samples[k].size()) + " samples, expected " + std::to_string(m));
    }
    for (const auto& s : samples[k]) {
      if (s.size() != n) throw InvalidInput("decompose_uncertainty: images differ in size");
    }
  }
  UncertaintyValues u;
  u.aleatoric.resize(n);
  u.epistemic.resize(n);
  u.total.resize(n);
  std::vector<double> col(m), means(samples.size()), pooled(samples.size() * m);
  for (std::size_t i = 0; i < n; ++i) {
    double ale = 0.0;
    for (std::size_t k = 0; k < samples.size(); ++k) {
      for (std::size_t j = 0; j < m; ++j) {
        col[j] = samples[k][j][i];
        pooled[k * m + j] = col[j];
      }
      double mu = 0.0;
      for (double x : col) mu += x;
      means[k] = mu / static_cast<double>(m);
      ale += pop_variance(col);
    }
    u.aleatoric[i] = ale / static_cast<double>(samples.size());
    u.epistemic[i] = pop_variance(means);
    u.total[i] = pop_variance(pooled);
  }
  return u;
}

UncertaintyMaps decompose_uncertainty(const std::vector<std::vector<GrayImage>>& samples) {
  std::vector<std::vector<std::vector<double>>> raw(samples.size());
  int w = 0, h = 0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    for (const auto& im : samples[k]) {
      if (w == 0) {
        w = im.width();
        h = im.height();
      } else if (im.width() != w || im.height() != h) {
        throw InvalidInput("decompose_uncertainty: images differ in size");
      }
      raw[k].emplace_back(im.values().begin(), im.values().end());
    }
  }
  const auto u = decompose_uncertainty(raw);
  return {image_from(w, h, u.aleatoric), image_from(w, h, u.epistemic), image_from(w, h, u.total)};
}

Embedder parse_embedder(const std::string& s) {
  if (s == "avgpool8") return Embedder::AvgPool8;
  if (s == "pixels16") return Embedder::Pixels16;
  throw InvalidInput("unknown embedder '" + s + "' (expected avgpool8 or pixels16)");
}

std::string to_string(Embedder e) { return e == Embedder::AvgPool8 ? "avgpool8" : "pixels16"; }

Eigen::MatrixXd embed_features(const std::vector<GrayImage>& set, Embedder embedder) {
  check_set(set, "embed_features");
  const int g = embedder == Embedder::AvgPool8 ? 8 : 16;
  const int w = set.front().width(), h = set.front().height();
  if (w < g || h < g) throw InvalidInput("embed_features: image smaller than the pooling grid");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(set.size()), g * g);
  for (std::size_t r = 0; r < set.size(); ++r) {
    const auto& im = set[r];
    for (int by = 0; by < g; ++by) {
      const int y0 = by * h / g, y1 = (by + 1) * h / g;
      for (int bx = 0; bx < g; ++bx) {
        const int x0 = bx * w / g, x1 = (bx + 1) * w / g;
        double s = 0.0;
        for (int y = y0; y < y1; ++y) {
          for (int x = x0; x < x1; ++x) s += im(x, y);
        }
        out(static_cast<Eigen::Index>(r), by * g + bx) = s / static_cast<double>((y1 - y0) * (x1 - x0));
      }
    }
  }
  return out;
}

double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() < 2 || b.rows() < 2) throw InvalidInput("frechet_distance: needs at least 2 rows per set");
  if (a.cols() != b.cols()) throw InvalidInput("frechet_distance: feature dimensions differ");
  if (!a.allFinite() || !b.allFinite()) throw InvalidInput("frechet_distance: non-finite features");

  auto stats = [](const Eigen::MatrixXd& f, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
    mu = f.colwise().mean().transpose();
    const Eigen::MatrixXd c = f.rowwise() - mu.transpose();
    cov = (c.transpose() * c) / static_cast<double>(f.rows() - 1);
  };
  Eigen::VectorXd mu_a, mu_b;
  Eigen::MatrixXd sa, sb;
  stats(a, mu_a, sa);
  stats(b, mu_b, sb);

  auto clamp_eigs = [](Eigen::VectorXd v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = v[i] < 1e-10 ? 0.0 : v[i];
    return v;
  };
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(sa);
  const Eigen::MatrixXd sa_half =
      ea.eigenvectors() * clamp_eigs(ea.eigenvalues()).cwiseSqrt().asDiagonal() * ea.eigenvectors().transpose();
  Eigen::MatrixXd m = sa_half * sb * sa_half;
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(m, Eigen::EigenvaluesOnly);
  const double tr_sqrt = clamp_eigs(em.eigenvalues()).cwiseSqrt().sum();

  const double fd = (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() - 2.0 * tr_sqrt;
  return std::max(fd, 0.0);
}

BitMask edge_band(const BitMask& layout, int radius) {
  if (radius < 0) throw InvalidInput("edge_band: radius must be >= 0");
  const int w = layout.width(), h = layout.height();
  std::vector<std::pair<int, int>> boundary;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto v = layout(x, y);
      const bool edge = (x > 0 && layout(x - 1, y) != v) || (x + 1 < w && layout(x + 1, y) != v) ||
                        (y > 0 && layout(x, y - 1) != v) || (y + 1 < h && layout(x, y + 1) != v);
      if (edge) boundary.emplace_back(x, y);
    }
  }
  BitMask band(w, h, 0);
  for (auto [bx, by] : boundary) {
    for (int dy = -radius; dy <= radius; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx) {
        if (dx * dx + dy * dy > radius * radius) continue;
        const int x = bx + dx, y = by + dy;
        if (x >= 0 && y >= 0 && x < w && y < h) band.set(x, y, true);
      }
    }
  }
  return band;
}

double masked_pearson(const GrayImage& a, const GrayImage& b, const BitMask& mask) {
  if (a.width() != b.width() || a.height() != b.height() || a.width() != mask.width() ||
      a.height() != mask.height()) {
    throw InvalidInput("masked_pearson: dimension mismatch");
  }
  double sa = 0, sb = 0, n = 0;
  const auto bits = mask.bits();
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (!bits[i]) continue;
    sa += a.values()[i];
    sb += b.values()[i];
    n += 1;
  }
  if (n < 2) return 0.0;
  const double ma = sa / n, mb = sb / n;
  double cab = 0, caa = 0, cbb = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (!bits[i]) continue;
    const double da = a.values()[i] - ma, db = b.values()[i] - mb;
    cab += da * db;
    caa += da * da;
    cbb += db * db;
  }
  if (caa <= 0 || cbb <= 0) return 0.0;
  return cab / std::sqrt(caa * cbb);
}

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j{{"structure_id", r.structure_id},
                   {"metrics", r.metrics},
                   {"sample_counts", {{"generated", r.generated_count}, {"real", r.real_count}}},
                   {"bins", r.bins},
                   {"seed", r.seed},
                   {"embedder", to_string(r.embedder)},
                   {"provenance", r.provenance}};
  auto has = [&](const char* m) { return std::find(r.metrics.begin(), r.metrics.end(), m) != r.metrics.end(); };
  if (has("iou")) {
    j["iou_random_mean"] = r.iou_random_mean;
    j["iou_greedy_mean"] = r.iou_greedy_mean;
  }
  if (has("kl")) j["kl_real_vs_model"] = r.kl_real_vs_model;
  if (has("wd")) j["wd_pairwise_mean"] = r.wd_pairwise_mean;
  if (has("fd")) {
    j["fd"] = r.fd;
    j["fd_note"] = "features from the " + to_string(r.embedder) +
                   " embedder; not comparable to pretrained-CNN Frechet distances";
  }
  return j;
}

MetricReport evaluate_sets(const std::vector<GrayImage>& real_set, const std::vector<GrayImage>& generated,
                           const EvaluateOptions& opts, const std::string& structure_id) {
  check_set(real_set, "real set");
  check_set(generated, "generated set");
  if (real_set.front().width() != generated.front().width() ||
      real_set.front().height() != generated.front().height()) {
    throw InvalidInput("real and generated images differ in size");
  }
  MetricReport r;
  r.structure_id = structure_id;
  r.metrics = opts.metrics;
  r.generated_count = static_cast<int>(generated.size());
  r.real_count = static_cast<int>(real_set.size());
  r.bins = opts.bins;
  r.seed = opts.seed.value;
  r.embedder = opts.embedder;
  for (const auto& m : opts.metrics) {
    if (m == "iou") {
      const auto p = binarize_all(generated), q = binarize_all(real_set);
      r.iou_random_mean = match_random(p, q, opts.seed);
      r.iou_greedy_mean = match_greedy(p, q);
    } else if (m == "kl") {
      r.kl_real_vs_model = kl_mean_image(real_set, generated, opts.bins);
    } else if (m == "wd") {
      r.wd_pairwise_mean = wd_pairwise_mean(generated, real_set, opts.bins);
    } else if (m == "fd") {
      r.fd = frechet_distance(embed_features(real_set, opts.embedder), embed_features(generated, opts.embedder));
    } else {
      throw InvalidInput("unknown metric '" + m + "' (expected iou, kl, wd, fd)");
    }
  }
  return r;
}

}  // namespace fabtwin
