#include "wavessm/image_io.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

namespace wavessm {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(const std::string& s) : s_(s) {}

  std::size_t number(const char* what) {
    skip_space_and_comments();
    if (pos_ >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_])))
      throw FormatError(std::string("ppm: expected ") + what + " in header");
    std::size_t v = 0;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      v = v * 10 + static_cast<std::size_t>(s_[pos_++] - '0');
      if (v > (std::size_t{1} << 31)) throw FormatError(std::string("ppm: ") + what + " is too large");
    }
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void single_space() {
    if (pos_ >= s_.size() || !std::isspace(static_cast<unsigned char>(s_[pos_])))
      throw FormatError("ppm: missing whitespace before pixel data");
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  void skip_space_and_comments() {
    while (pos_ < s_.size()) {
      if (std::isspace(static_cast<unsigned char>(s_[pos_]))) {
        ++pos_;
      } else if (s_[pos_] == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

Image decode_ppm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw FormatError("ppm: not a binary PPM (P6)");
  HeaderReader r(bytes);
  r.advance(2);
  Image img;
  img.width = r.number("width");
  img.height = r.number("height");
  const std::size_t maxval = r.number("maxval");
  if (img.width == 0 || img.height == 0) throw FormatError("ppm: zero image dimension");
  if (maxval != 255) throw FormatError("ppm: only maxval 255 is supported, got " + std::to_string(maxval));
  r.single_space();
  const std::size_t n = img.width * img.height * 3;
  if (bytes.size() - r.pos() < n)
    throw FormatError("ppm: truncated pixel data (" + std::to_string(bytes.size() - r.pos()) + " of " +
                      std::to_string(n) + " bytes)");
  img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos()),
                 bytes.begin() + static_cast<std::ptrdiff_t>(r.pos() + n));
  return img;
}

std::string encode_ppm(const Image& img) {
  if (img.rgb.size() != img.width * img.height * 3)
    throw ShapeError("ppm: pixel buffer does not match " + std::to_string(img.width) + "x" + std::to_string(img.height));
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(img.rgb.begin(), img.rgb.end());
  return out;
}

Image read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open image '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_ppm(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_ppm(const std::string& path, const Image& img) {
  const std::string bytes = encode_ppm(img);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing '" + path + "'");
}

Tensor<float> to_tensor(const Image& img) {
  if (img.rgb.size() != img.width * img.height * 3 || img.rgb.empty())
    throw ShapeError("image: pixel buffer does not match its dimensions");
  Tensor<float> t(Shape{img.height, img.width, 3});
  for (std::size_t i = 0; i < img.rgb.size(); ++i) t[i] = static_cast<float>(img.rgb[i]) / 255.0f;
  return t;
}

std::uint8_t quantize(float v) {
  if (!(v > 0)) return 0;  // also maps NaN to 0
  const double q = std::floor(static_cast<double>(v) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(std::min(q, 255.0));
}

Image from_tensor(const Tensor<float>& t) {
  if (t.rank() != 3 || t.dim(2) != 3) throw ShapeError("image: expected [H,W,3], got " + shape_str(t.shape()));
  Image img{t.dim(1), t.dim(0), std::vector<std::uint8_t>(t.size())};
  for (std::size_t i = 0; i < t.size(); ++i) img.rgb[i] = quantize(t[i]);
  return img;
}

}  // namespace wavessm
