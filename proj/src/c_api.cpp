#include "wavessm/wavessm.h"

#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "wavessm/analysis.hpp"
#include "wavessm/gradcheck.hpp"
#include "wavessm/image_io.hpp"
#include "wavessm/metrics.hpp"
#include "wavessm/network.hpp"
#include "wavessm/parallel.hpp"
#include "wavessm/train.hpp"

struct wavessm_model {
  wavessm::Model model;
};

struct wavessm_gradcheck_report {
  std::vector<wavessm::GradcheckResult> rows;
};

namespace {

thread_local std::string last_error;

template <class F>
wavessm_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return WAVESSM_OK;
  } catch (const wavessm::Error& e) {
    last_error = e.what();
    return static_cast<wavessm_status>(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return WAVESSM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = std::string("internal error: ") + e.what();
    return WAVESSM_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown internal error";
    return WAVESSM_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw wavessm::ConfigError(std::string(what) + " must not be NULL");
}

wavessm::ModelConfig to_model_config(const wavessm_config& c) {
  wavessm::ModelConfig m;
  m.channels = c.channels;
  m.lfss_counts.assign(c.lfss_counts, c.lfss_counts + WAVESSM_LEVELS);
  m.hfe_counts.assign(c.hfe_counts, c.hfe_counts + WAVESSM_LEVELS);
  m.heads = c.heads;
  m.lambda = c.lambda;
  m.state_size = c.state_size;
  m.seed = c.seed;
  return m;
}

void from_model_config(const wavessm::ModelConfig& m, wavessm_config* c) {
  c->channels = static_cast<uint32_t>(m.channels);
  for (std::size_t i = 0; i < WAVESSM_LEVELS; ++i) {
    c->lfss_counts[i] = static_cast<uint32_t>(m.lfss_counts[i]);
    c->hfe_counts[i] = static_cast<uint32_t>(m.hfe_counts[i]);
  }
  c->heads = static_cast<uint32_t>(m.heads);
  c->lambda = static_cast<uint32_t>(m.lambda);
  c->state_size = static_cast<uint32_t>(m.state_size);
  c->seed = m.seed;
}

wavessm::Tensor<float> read_image(const char* path) { return wavessm::to_tensor(wavessm::read_ppm(path)); }

}  // namespace

extern "C" {

const char* wavessm_version(void) { return "1.0.0"; }

const char* wavessm_last_error(void) { return last_error.c_str(); }

void wavessm_set_threads(uint32_t n) { wavessm::set_num_threads(n); }

void wavessm_default_config(wavessm_config* cfg) {
  if (cfg) from_model_config(wavessm::ModelConfig{}, cfg);
}

void wavessm_toy_config(wavessm_config* cfg) {
  if (cfg) from_model_config(wavessm::ModelConfig::toy(), cfg);
}

wavessm_status wavessm_model_build(const wavessm_config* cfg, wavessm_model** out) {
  return guarded([&] {
    require(cfg, "config");
    require(out, "out");
    *out = new wavessm_model{wavessm::build(to_model_config(*cfg))};
  });
}

wavessm_status wavessm_model_load(const char* path, wavessm_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new wavessm_model{wavessm::load(path)};
  });
}

wavessm_status wavessm_model_save(const wavessm_model* m, const char* path) {
  return guarded([&] {
    require(m, "model");
    require(path, "path");
    wavessm::save(m->model, path);
  });
}

void wavessm_model_free(wavessm_model* m) { delete m; }

wavessm_status wavessm_model_config(const wavessm_model* m, wavessm_config* out) {
  return guarded([&] {
    require(m, "model");
    require(out, "out");
    from_model_config(m->model.config, out);
  });
}

wavessm_status wavessm_model_param_count(const wavessm_model* m, uint64_t* out) {
  return guarded([&] {
    require(m, "model");
    require(out, "out");
    *out = m->model.param_count();
  });
}

wavessm_status wavessm_model_checksum(const wavessm_model* m, uint64_t* out) {
  return guarded([&] {
    require(m, "model");
    require(out, "out");
    *out = wavessm::checksum(m->model.params);
  });
}

wavessm_status wavessm_enhance(const wavessm_model* m, const float* rgb, size_t height, size_t width, float* out) {
  return guarded([&] {
    require(m, "model");
    require(rgb, "rgb");
    require(out, "out");
    if (height == 0 || width == 0) throw wavessm::ShapeError("enhance: empty image");
    const std::size_t n = height * width * 3;
    const wavessm::Tensor<float> img(wavessm::Shape{height, width, 3}, std::vector<float>(rgb, rgb + n));
    const auto result = m->model.forward(img);
    std::memcpy(out, result.data().data(), n * sizeof(float));
  });
}

wavessm_status wavessm_enhance_file(const wavessm_model* m, const char* input_path, const char* output_path) {
  return guarded([&] {
    require(m, "model");
    require(input_path, "input path");
    require(output_path, "output path");
    const auto out = m->model.forward(read_image(input_path));
    wavessm::write_ppm(output_path, wavessm::from_tensor(out));
  });
}

wavessm_status wavessm_analyze_files(const char* a_path, const char* b_path, char** report) {
  return guarded([&] {
    require(a_path, "a path");
    require(report, "report");
    const auto a = read_image(a_path);
    std::string text;
    if (b_path) {
      const auto b = read_image(b_path);
      text = wavessm::analysis_report(a, &b);
    } else {
      text = wavessm::analysis_report(a, nullptr);
    }
    char* buf = new char[text.size() + 1];
    std::memcpy(buf, text.c_str(), text.size() + 1);
    *report = buf;
  });
}

void wavessm_string_free(char* s) { delete[] s; }

wavessm_status wavessm_metrics_files(const char* a_path, const char* b_path, double* psnr, double* ssim) {
  return guarded([&] {
    require(a_path, "a path");
    require(b_path, "b path");
    require(psnr, "psnr");
    require(ssim, "ssim");
    const auto a = read_image(a_path), b = read_image(b_path);
    if (!a.same_shape(b))
      throw wavessm::ShapeError(std::string("metrics: images differ in size (") + wavessm::shape_str(a.shape()) +
                                " vs " + wavessm::shape_str(b.shape()) + ")");
    *psnr = wavessm::psnr(a, b);
    *ssim = wavessm::ssim(a, b);
  });
}

size_t wavessm_gradcheck_op_count(void) {
  static const auto ops = wavessm::gradcheck_suite_ops();
  return ops.size();
}

const char* wavessm_gradcheck_op_name(size_t i) {
  static const auto ops = wavessm::gradcheck_suite_ops();
  return i < ops.size() ? ops[i].c_str() : nullptr;
}

wavessm_status wavessm_gradcheck_run(const char* which, uint64_t seed, wavessm_gradcheck_report** out) {
  return guarded([&] {
    require(which, "which");
    require(out, "out");
    *out = new wavessm_gradcheck_report{wavessm::run_gradcheck_suite(which, seed)};
  });
}

size_t wavessm_gradcheck_rows(const wavessm_gradcheck_report* r) { return r ? r->rows.size() : 0; }

wavessm_status wavessm_gradcheck_row_at(const wavessm_gradcheck_report* r, size_t i, wavessm_gradcheck_row* row) {
  return guarded([&] {
    require(r, "report");
    require(row, "row");
    if (i >= r->rows.size()) throw wavessm::ConfigError("gradcheck row index out of range");
    const auto& g = r->rows[i];
    *row = wavessm_gradcheck_row{g.op.c_str(), g.tensor.c_str(), g.note.c_str(), g.error, g.tolerance,
                                 g.worst_index, g.checked, g.passed() ? 1 : 0};
  });
}

void wavessm_gradcheck_free(wavessm_gradcheck_report* r) { delete r; }

void wavessm_default_train_options(wavessm_train_options* opt) {
  if (!opt) return;
  const wavessm::ToyTrainConfig d;
  *opt = wavessm_train_options{static_cast<uint32_t>(d.steps), static_cast<uint32_t>(d.crop), d.lr_max, d.lr_min,
                               d.model.seed};
}

wavessm_status wavessm_train_toy(const char* low_path, const char* normal_path, const wavessm_train_options* opt,
                                 wavessm_progress_fn progress, void* user, wavessm_model** out, double* initial_l1,
                                 double* final_l1) {
  return guarded([&] {
    require(low_path, "low path");
    require(normal_path, "normal path");
    require(opt, "options");
    require(out, "out");
    wavessm::ToyTrainConfig cfg;
    cfg.steps = opt->steps;
    cfg.crop = opt->crop;
    cfg.lr_max = opt->lr_max;
    cfg.lr_min = opt->lr_min;
    cfg.model.seed = opt->seed;
    if (cfg.crop == 0) throw wavessm::ConfigError("train_toy: crop must be positive");
    auto result = wavessm::train_toy(read_image(low_path), read_image(normal_path), cfg,
                                     [&](std::size_t step, double loss) {
                                       if (progress) progress(static_cast<uint32_t>(step), loss, user);
                                     });
    if (initial_l1) *initial_l1 = result.initial_l1;
    if (final_l1) *final_l1 = result.final_l1;
    *out = new wavessm_model{std::move(result.model)};
  });
}

}  // extern "C"
