// Writes the files the command-line tests need into the given directory:
//   zero_head.wmck  toy model whose final convolution is zero (identity enhancer)
//   constant.ppm    flat grey image
#include <cstdio>
#include <filesystem>

#include "wavessm/image_io.hpp"
#include "wavessm/network.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s OUTDIR\n", argv[0]);
    return 1;
  }
  const std::filesystem::path dir(argv[1]);
  std::filesystem::create_directories(dir);
  try {
    auto m = wavessm::build(wavessm::ModelConfig::toy());
    m.params.get_mut("head.w").fill(0);
    m.params.get_mut("head.b").fill(0);
    wavessm::save(m, (dir / "zero_head.wmck").string());
    wavessm::write_ppm((dir / "constant.ppm").string(),
                       wavessm::Image{12, 10, std::vector<std::uint8_t>(12 * 10 * 3, 100)});
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
