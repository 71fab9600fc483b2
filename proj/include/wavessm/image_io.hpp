#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "wavessm/tensor.hpp"

namespace wavessm {

// 8-bit RGB, row-major, interleaved.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;
};

// Binary PPM: "P6\n<width> <height>\n255\n" followed by the RGB bytes. The
// reader also accepts comments and arbitrary whitespace in the header.
Image read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Image& img);
Image decode_ppm(const std::string& bytes);
std::string encode_ppm(const Image& img);

// [H,W,3] in [0,1], v / 255.
Tensor<float> to_tensor(const Image& img);
// Round half up and clamp to [0,255].
Image from_tensor(const Tensor<float>& t);
std::uint8_t quantize(float v);

}  // namespace wavessm
