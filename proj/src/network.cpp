#include "wavessm/network.hpp"

#include "wavessm/hfe.hpp"
#include "wavessm/lfss.hpp"

namespace wavessm {

void ModelConfig::validate() const {
  if (channels == 0) throw ConfigError("config: channels must be positive");
  if (lfss_counts.size() != kLevels)
    throw ConfigError("config: lfss_counts needs " + std::to_string(kLevels) + " entries, got " +
                      std::to_string(lfss_counts.size()));
  if (hfe_counts.size() != kLevels)
    throw ConfigError("config: hfe_counts needs " + std::to_string(kLevels) + " entries, got " +
                      std::to_string(hfe_counts.size()));
  if (heads == 0 || channels % heads != 0)
    throw ConfigError("config: heads (" + std::to_string(heads) + ") must divide channels (" +
                      std::to_string(channels) + ")");
  if (lambda == 0) throw ConfigError("config: lambda must be positive");
  if (state_size == 0) throw ConfigError("config: state_size must be positive");
}

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.channels = 8;
  c.lfss_counts = {1, 1, 1};
  c.hfe_counts = {1, 1, 1};
  c.heads = 2;
  return c;
}

namespace {

std::string level(std::size_t i) { return "l" + std::to_string(i + 1); }

}  // namespace

template <class T>
void init_model(ParamInit<T> init, const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t c = cfg.channels;
  init.conv("embed", 3, c, 3);
  for (std::size_t i = 0; i < kLevels; ++i) {
    auto lv = init.sub("enc").sub(level(i));
    lv.conv("img_embed", 3, c, 3);
    lv.conv("fuse", 2 * c, c, 1);
    for (std::size_t k = 0; k < cfg.lfss_counts[i]; ++k)
      init_lfss_block(lv.sub("lfss", k), c, cfg.lambda, cfg.state_size);
    init_skff(lv.sub("skff"), c);
    for (std::size_t k = 0; k < cfg.hfe_counts[i]; ++k) init_hfe_block(lv.sub("hfe", k), c, cfg.heads);
  }
  for (std::size_t i = kLevels; i-- > 0;) {
    auto lv = init.sub("dec").sub(level(i));
    for (std::size_t k = 0; k < cfg.lfss_counts[i]; ++k)
      init_lfss_block(lv.sub("lfss", k), c, cfg.lambda, cfg.state_size);
    for (std::size_t k = 0; k < cfg.hfe_counts[i]; ++k) init_hfe_block(lv.sub("hfe", k), c, cfg.heads);
    lv.conv("bands", c, 3 * c, 1);
  }
  init.conv("head", c, 3, 3);
}

template <class T>
ad::Var<T> forward_graph(const ModelConfig& cfg, const Scope<T>& w, const ad::Var<T>& img, bool clamp_output) {
  cfg.validate();
  const Shape& s = img.shape();
  if (s.size() != 3 || s[2] != 3) throw ShapeError("forward: expected an [H,W,3] image, got " + shape_str(s));
  const std::size_t h = s[0], wd = s[1], c = cfg.channels;
  const std::size_t hp = (h + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  const std::size_t wp = (wd + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  const auto padded = ad::pad_reflect(img, hp, wp);

  ad::Var<T> cur = conv(w, "embed", padded, 3);
  std::vector<ad::Var<T>> skips{cur}, highs;
  for (std::size_t i = 0; i < kLevels; ++i) {
    const auto lv = w.sub("enc").sub(level(i));
    const auto bands = ad::dwt2(cur);
    const std::size_t f = std::size_t{2} << i;
    const auto img_small = conv(lv, "img_embed", ad::resize_bilinear(padded, hp / f, wp / f), 3);
    cur = conv(lv, "fuse", ad::concat_last<T>({ad::slice_last(bands, 0, c), img_small}), 1);
    for (std::size_t k = 0; k < cfg.lfss_counts[i]; ++k) cur = lfss_block(cur, lv.sub("lfss", k));
    auto high = skff(ad::slice_last(bands, c, c), ad::slice_last(bands, 2 * c, c), ad::slice_last(bands, 3 * c, c),
                     lv.sub("skff"));
    for (std::size_t k = 0; k < cfg.hfe_counts[i]; ++k) high = hfe_block(high, cur, lv.sub("hfe", k));
    highs.push_back(high);
    if (i + 1 < kLevels) skips.push_back(cur);
  }

  for (std::size_t i = kLevels; i-- > 0;) {
    const auto lv = w.sub("dec").sub(level(i));
    for (std::size_t k = 0; k < cfg.lfss_counts[i]; ++k) cur = lfss_block(cur, lv.sub("lfss", k));
    auto high = highs[i];
    for (std::size_t k = 0; k < cfg.hfe_counts[i]; ++k) high = hfe_block(high, cur, lv.sub("hfe", k));
    const auto up = ad::iwt2(ad::concat_last<T>({cur, conv(lv, "bands", high, 1)}));
    cur = ad::add(up, skips[i]);
  }

  const auto out = ad::crop(ad::add(padded, conv(w, "head", cur, 3)), h, wd);
  return clamp_output ? ad::clamp(out, T{0}, T{1}) : out;
}

template <class T>
Tensor<T> forward(const ModelConfig& cfg, const ParamStore<T>& params, const Tensor<T>& img) {
  ParamBinder<T> binder(params, nullptr);
  const ad::Var<T> x(img);
  Tensor<T> out = forward_graph(cfg, Scope<T>(binder, ""), x, true).value();
  check_finite(out, "forward output");
  return out;
}

Tensor<float> Model::forward(const Tensor<float>& img) const { return wavessm::forward(config, params, img); }

Model build(const ModelConfig& cfg) {
  cfg.validate();
  Model m{cfg, {}};
  Rng rng(cfg.seed);
  init_model(ParamInit<float>(m.params, rng), cfg);
  return m;
}

std::uint64_t checksum(const ParamStore<float>& params) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      hash ^= b[i];
      hash *= 0x100000001b3ULL;
    }
  };
  for (const auto& name : params.names()) {
    mix(name.data(), name.size());
    const auto& t = params.get(name);
    for (std::size_t d : t.shape()) {
      const std::uint64_t v = d;
      mix(&v, sizeof v);
    }
    mix(t.data().data(), t.size() * sizeof(float));
  }
  return hash;
}

#define WAVESSM_INSTANTIATE(T)                                                                      \
  template void init_model(ParamInit<T>, const ModelConfig&);                                       \
  template ad::Var<T> forward_graph(const ModelConfig&, const Scope<T>&, const ad::Var<T>&, bool);  \
  template Tensor<T> forward(const ModelConfig&, const ParamStore<T>&, const Tensor<T>&);

WAVESSM_INSTANTIATE(float)
WAVESSM_INSTANTIATE(double)

#undef WAVESSM_INSTANTIATE

}  // namespace wavessm
