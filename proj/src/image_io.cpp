#include "hit/image_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hit {

uint8_t value_to_byte(double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("value_to_byte: non-finite pixel value");
  double y = (v + 1.0) * 127.5;
  if (y <= 0.0) return 0;
  if (y >= 255.0) return 255;
  double f = std::floor(y);
  double r = y - f;
  if (r > 0.5 || (r == 0.5 && std::fmod(f, 2.0) != 0.0)) f += 1.0;
  return static_cast<uint8_t>(f);
}

std::string ppm_bytes(const Tensor& image) {
  Shape s = image.shape();
  if (s.size() == 4 && s[0] == 1) s.erase(s.begin());
  if (s.size() != 3 || s[2] != 3) {
    throw std::invalid_argument("ppm: expected [h, w, 3] image, got " + shape_str(image.shape()));
  }
  const int64_t h = s[0], w = s[1];
  std::ostringstream os;
  os << "P6\n" << w << " " << h << "\n255\n";
  for (int64_t i = 0; i < h * w * 3; ++i) {
    os.put(static_cast<char>(value_to_byte(image[i])));
  }
  return os.str();
}

void write_ppm(const std::string& path, const Tensor& image) {
  write_file(path, ppm_bytes(image));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace hit
