#pragma once

#include <cstdint>
#include <string>

#include "hit/tensor.hpp"

namespace hit {

/// [-1, 1] -> [0, 255]: linear map with round-half-to-even, clamped.
/// -1 -> 0, 0 -> 128 (half-even of 127.5), +1 -> 255.
uint8_t value_to_byte(double v);

/// Binary PPM (P6, maxval 255) for an image [h, w, 3] or [1, h, w, 3].
std::string ppm_bytes(const Tensor& image);
void write_ppm(const std::string& path, const Tensor& image);

/// Whole-file read, for byte comparisons in tests.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace hit
