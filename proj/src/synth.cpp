#include "trust/synth.hpp"

#include <algorithm>
#include <cmath>

#include "trust/error.hpp"
#include "trust/format.hpp"
#include "trust/random.hpp"

namespace trust {

namespace {

enum StreamTag : std::uint64_t {
  kImagePrototypes = 1,
  kTextPrototypes,
  kClipPrototypes,
  kShiftOffset,
  kSourceSamples,
  kTargetSamples,
};

// Rows drawn i.i.d. Gaussian then Gram-Schmidt orthonormalised (rows <= cols).
Matrix orthonormal_rows(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m = gaussian_matrix(rng, rows, cols, 1.0);
  for (std::size_t i = 0; i < rows; ++i) {
    auto r = m.row(i);
    for (std::size_t k = 0; k < i; ++k) {
      const double proj = dot(r, m.row(k));
      auto q = m.row(k);
      for (std::size_t j = 0; j < cols; ++j) r[j] -= proj * q[j];
    }
    const double n = norm(r);
    for (double& v : r) v /= n;
  }
  return m;
}

// Product of Givens rotations by `angle` in planes (0,1), (2,3), ... covering
// at most the first 8 coordinate pairs.
void rotate_in_place(std::span<double> v, double angle) {
  const std::size_t pairs = std::min<std::size_t>(v.size() / 2, 8);
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  for (std::size_t p = 0; p < pairs; ++p) {
    const double a = v[2 * p];
    const double b = v[2 * p + 1];
    v[2 * p] = c * a - s * b;
    v[2 * p + 1] = s * a + c * b;
  }
}

struct Prototypes {
  Matrix image;  // C x D_img
  Matrix text;   // C x D_txt
  Matrix clip;   // C x D_clip
};

EmbeddingDataset sample_domain(const SynthConfig& cfg, const Prototypes& protos, Domain domain,
                               const std::vector<double>& offset) {
  const std::size_t n = cfg.classes * cfg.n_per_class;
  Rng rng(derive_seed(cfg.seed, {domain == Domain::kSource ? kSourceSamples : kTargetSamples}));
  std::normal_distribution<double> img_noise(0.0, cfg.noise_img);
  std::normal_distribution<double> txt_noise(0.0, cfg.noise_txt);
  std::normal_distribution<double> clip_noise(0.0, cfg.noise_clip);
  std::bernoulli_distribution corrupt(domain == Domain::kTarget ? cfg.rho : 0.0);
  std::uniform_int_distribution<std::size_t> wrong_class(0, cfg.classes - 2);

  auto noise = [&rng](std::normal_distribution<double>& d) { return d.stddev() > 0.0 ? d(rng) : 0.0; };

  EmbeddingDataset ds;
  ds.domain = domain;
  ds.num_classes = cfg.classes;
  ds.seed = cfg.seed;
  ds.image_emb = Matrix(n, cfg.dim_image);
  ds.caption_emb = Matrix(n, cfg.dim_caption);
  ds.clip_img = Matrix(n, cfg.dim_clip);
  ds.clip_txt = Matrix(n, cfg.dim_clip);
  ds.labels = std::vector<int>(n);
  ds.corrupted_mask = std::vector<std::uint8_t>(n, 0);

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i / cfg.n_per_class;
    std::size_t caption_class = c;
    if (corrupt(rng)) {
      caption_class = wrong_class(rng);
      if (caption_class >= c) ++caption_class;
    }
    (*ds.labels)[i] = static_cast<int>(c);
    (*ds.corrupted_mask)[i] = caption_class != c ? 1 : 0;

    auto img = ds.image_emb.row(i);
    std::copy_n(protos.image.row(c).begin(), cfg.dim_image, img.begin());
    if (domain == Domain::kTarget) {
      rotate_in_place(img, cfg.shift_angle);
      for (std::size_t j = 0; j < img.size(); ++j) img[j] += offset[j];
    }
    for (double& v : img) v += noise(img_noise);

    auto cap = ds.caption_emb.row(i);
    for (std::size_t j = 0; j < cap.size(); ++j) cap[j] = protos.text(caption_class, j) + noise(txt_noise);

    auto ci = ds.clip_img.row(i);
    auto ct = ds.clip_txt.row(i);
    for (std::size_t j = 0; j < cfg.dim_clip; ++j) ci[j] = protos.clip(c, j) + noise(clip_noise);
    for (std::size_t j = 0; j < cfg.dim_clip; ++j) ct[j] = protos.clip(caption_class, j) + noise(clip_noise);
  }

  ds.image_emb = quantize_f32(ds.image_emb);
  ds.caption_emb = quantize_f32(ds.caption_emb);
  ds.clip_img = quantize_f32(ds.clip_img);
  ds.clip_txt = quantize_f32(ds.clip_txt);
  return ds;
}

}  // namespace

void SynthConfig::validate() const {
  if (classes < 2) throw ConfigError("synth: classes must be >= 2");
  if (n_per_class < 1) throw ConfigError("synth: n_per_class must be >= 1");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("synth: rho must lie in [0, 1]");
  if (dim_image < classes || dim_caption < classes || dim_clip < classes) {
    throw ConfigError("synth: every embedding dimension must be >= classes");
  }
  if (!(noise_img >= 0.0 && noise_txt >= 0.0 && noise_clip >= 0.0)) {
    throw ConfigError("synth: noise levels must be non-negative");
  }
  if (!std::isfinite(shift_angle) || !(shift_offset >= 0.0) || !std::isfinite(shift_offset)) {
    throw ConfigError("synth: shift_angle must be finite and shift_offset non-negative");
  }
}

DomainPair gen_synthetic(const SynthConfig& config) {
  config.validate();

  Prototypes protos;
  {
    Rng rng(derive_seed(config.seed, {kImagePrototypes}));
    protos.image = gaussian_matrix(rng, config.classes, config.dim_image,
                                   1.0 / std::sqrt(static_cast<double>(config.dim_image)));
  }
  {
    Rng rng(derive_seed(config.seed, {kTextPrototypes}));
    protos.text = gaussian_matrix(rng, config.classes, config.dim_caption,
                                  1.0 / std::sqrt(static_cast<double>(config.dim_caption)));
  }
  {
    Rng rng(derive_seed(config.seed, {kClipPrototypes}));
    protos.clip = orthonormal_rows(rng, config.classes, config.dim_clip);
  }

  std::vector<double> offset(config.dim_image, 0.0);
  {
    Rng rng(derive_seed(config.seed, {kShiftOffset}));
    Matrix dir = gaussian_matrix(rng, 1, config.dim_image, 1.0);
    const double n = norm(dir.row(0));
    for (std::size_t j = 0; j < config.dim_image; ++j) offset[j] = config.shift_offset * dir(0, j) / n;
  }

  return {sample_domain(config, protos, Domain::kSource, offset),
          sample_domain(config, protos, Domain::kTarget, offset)};
}

}  // namespace trust
