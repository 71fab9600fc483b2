// wavessm command-line tool. Talks to the library only through wavessm.h.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wavessm/wavessm.h"

namespace {

int fail(wavessm_status s) {
  std::fprintf(stderr, "error: %s\n", wavessm_last_error());
  return static_cast<int>(s);
}

struct ModelHandle {
  wavessm_model* m = nullptr;
  ~ModelHandle() { wavessm_model_free(m); }
};

int cmd_enhance(const std::string& input, const std::string& output, const std::string& ckpt) {
  ModelHandle h;
  if (auto s = wavessm_model_load(ckpt.c_str(), &h.m); s != WAVESSM_OK) return fail(s);
  if (auto s = wavessm_enhance_file(h.m, input.c_str(), output.c_str()); s != WAVESSM_OK) return fail(s);
  std::printf("wrote %s\n", output.c_str());
  return 0;
}

int cmd_analyze(const std::string& a, const std::string& b, const std::string& report_path) {
  char* report = nullptr;
  if (auto s = wavessm_analyze_files(a.c_str(), b.empty() ? nullptr : b.c_str(), &report); s != WAVESSM_OK)
    return fail(s);
  const std::string text(report);
  wavessm_string_free(report);
  std::ofstream f(report_path, std::ios::binary | std::ios::trunc);
  if (!f || !(f << text)) {
    std::fprintf(stderr, "error: cannot write report '%s'\n", report_path.c_str());
    return WAVESSM_ERR_IO;
  }
  std::printf("wrote %s\n", report_path.c_str());
  return 0;
}

int cmd_metrics(const std::string& a, const std::string& b) {
  double psnr = 0, ssim = 0;
  if (auto s = wavessm_metrics_files(a.c_str(), b.c_str(), &psnr, &ssim); s != WAVESSM_OK) return fail(s);
  if (std::isinf(psnr))
    std::printf("PSNR: inf\n");
  else
    std::printf("PSNR: %.4f dB\n", psnr);
  std::printf("SSIM: %.6f\n", ssim);
  return 0;
}

int cmd_gradcheck(const std::string& ops, std::uint64_t seed) {
  wavessm_gradcheck_report* r = nullptr;
  if (auto s = wavessm_gradcheck_run(ops.c_str(), seed, &r); s != WAVESSM_OK) return fail(s);
  std::printf("%-22s %-46s %11s %9s %8s  %s\n", "op", "tensor", "rel.error", "tol", "coords", "result");
  std::size_t failures = 0;
  for (std::size_t i = 0; i < wavessm_gradcheck_rows(r); ++i) {
    wavessm_gradcheck_row row{};
    wavessm_gradcheck_row_at(r, i, &row);
    if (!row.passed) ++failures;
    std::printf("%-22s %-46s %11.3e %9.1e %8zu  %s", row.op, row.tensor, row.error, row.tolerance, row.checked,
                row.passed ? "ok" : "FAIL");
    if (!row.passed && *row.note) std::printf(" (%s)", row.note);
    if (!row.passed && !*row.note) std::printf(" (worst flat index %zu)", row.worst_index);
    std::printf("\n");
  }
  std::printf("%zu tensors checked, %zu failed\n", wavessm_gradcheck_rows(r), failures);
  wavessm_gradcheck_free(r);
  return failures == 0 ? 0 : 1;
}

int cmd_init(std::uint64_t seed, const std::string& out) {
  wavessm_config cfg;
  wavessm_default_config(&cfg);
  cfg.seed = seed;
  ModelHandle h;
  if (auto s = wavessm_model_build(&cfg, &h.m); s != WAVESSM_OK) return fail(s);
  if (auto s = wavessm_model_save(h.m, out.c_str()); s != WAVESSM_OK) return fail(s);
  std::uint64_t count = 0, sum = 0;
  wavessm_model_param_count(h.m, &count);
  wavessm_model_checksum(h.m, &sum);
  std::printf("wrote %s (%llu parameters, checksum %016llx)\n", out.c_str(), static_cast<unsigned long long>(count),
              static_cast<unsigned long long>(sum));
  return 0;
}

int cmd_train_toy(const std::vector<std::string>& pair, std::uint32_t steps, std::uint64_t seed,
                  const std::string& out) {
  wavessm_train_options opt;
  wavessm_default_train_options(&opt);
  opt.steps = steps;
  opt.seed = seed;
  const auto progress = [](std::uint32_t step, double loss, void* user) {
    const auto total = *static_cast<std::uint32_t*>(user);
    if (step % 20 == 0 || step + 1 == total) std::printf("step %4u  L1 %.6f\n", step, loss);
    std::fflush(stdout);
  };
  ModelHandle h;
  double initial = 0, final = 0;
  if (auto s = wavessm_train_toy(pair[0].c_str(), pair[1].c_str(), &opt, progress, &steps, &h.m, &initial, &final);
      s != WAVESSM_OK)
    return fail(s);
  std::printf("initial L1 %.6f\nfinal L1 %.6f\nratio %.4f\n", initial, final, final / initial);
  if (!out.empty()) {
    if (auto s = wavessm_model_save(h.m, out.c_str()); s != WAVESSM_OK) return fail(s);
    std::printf("wrote %s\n", out.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wavelet state-space low-light enhancement"};
  app.require_subcommand(1);
  app.set_version_flag("--version", wavessm_version());

  std::string input, output, ckpt;
  auto* enhance = app.add_subcommand("enhance", "Enhance a PPM image with a checkpoint");
  enhance->add_option("--input", input, "Input PPM")->required();
  enhance->add_option("--output", output, "Output PPM")->required();
  enhance->add_option("--ckpt", ckpt, "Checkpoint file")->required();

  std::string a, b, report;
  auto* analyze = app.add_subcommand("analyze", "Wavelet energy / histogram report for one image or a pair");
  analyze->add_option("--a", a, "Image (low-light image of a pair)")->required();
  analyze->add_option("--b", b, "Reference image for the subband swap study");
  analyze->add_option("--report", report, "JSON report path")->required();

  std::string ma, mb;
  auto* metrics = app.add_subcommand("metrics", "PSNR and SSIM between two PPM images");
  metrics->add_option("--a", ma, "First image")->required();
  metrics->add_option("--b", mb, "Second image")->required();

  std::string ops = "all";
  std::uint64_t gc_seed = 0;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
  gradcheck->add_option("--ops", ops, "'all' or a single op name")->capture_default_str();
  gradcheck->add_option("--seed", gc_seed, "Seed for the random test points")->capture_default_str();

  std::uint64_t seed = 0;
  std::string init_out;
  auto* init = app.add_subcommand("init", "Write a freshly initialised checkpoint");
  init->add_option("--seed", seed, "Weight seed")->capture_default_str();
  init->add_option("--out", init_out, "Checkpoint path")->required();

  std::vector<std::string> pair;
  std::uint32_t steps = 200;
  std::uint64_t train_seed = 0;
  std::string train_out;
  auto* train = app.add_subcommand("train-toy", "Overfit the small configuration on one low/normal pair");
  train->alias("train_toy");
  train->add_option("--input", pair, "LOW NORMAL image pair")->required()->expected(2);
  train->add_option("--steps", steps, "Optimisation steps")->capture_default_str();
  train->add_option("--seed", train_seed, "Weight seed")->capture_default_str();
  train->add_option("--out", train_out, "Where to save the trained checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(WAVESSM_ERR_INVALID_ARGUMENT);
  }

  if (*enhance) return cmd_enhance(input, output, ckpt);
  if (*analyze) return cmd_analyze(a, b, report);
  if (*metrics) return cmd_metrics(ma, mb);
  if (*gradcheck) return cmd_gradcheck(ops, gc_seed);
  if (*init) return cmd_init(seed, init_out);
  if (*train) return cmd_train_toy(pair, steps, train_seed, train_out);
  return static_cast<int>(WAVESSM_ERR_INVALID_ARGUMENT);
}
