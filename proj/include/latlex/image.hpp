#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace latlex {

struct ImageShape {
  int height = 32;
  int width = 32;
  int channels = 3;

  int pixel_count() const { return height * width * channels; }
  bool operator==(const ImageShape&) const = default;
};

/// Pixels in [0, 1], stored HWC (row, column, channel) in one flat vector.
struct ImageBuffer {
  ImageShape shape;
  Eigen::VectorXd pixels;

  double& at(int row, int col, int ch) { return pixels[(row * shape.width + col) * shape.channels + ch]; }
  double at(int row, int col, int ch) const { return pixels[(row * shape.width + col) * shape.channels + ch]; }
  double mean() const { return pixels.mean(); }
};

/// 8-bit quantization used by the on-disk format: round(255 p).
std::vector<std::uint8_t> quantize(const ImageBuffer& image);

/// Binary PNM bytes: P6 for three channels, P5 for one.
std::string encode_pnm(const ImageBuffer& image);

/// Inverse of encode_pnm; pixel values are the quantized levels / 255.
ImageBuffer decode_pnm(const std::string& bytes);

void write_pnm(const std::filesystem::path& path, const ImageBuffer& image);
ImageBuffer read_pnm(const std::filesystem::path& path);

/// Values snapped to the 8-bit grid (what survives a write/read cycle).
ImageBuffer quantized_copy(const ImageBuffer& image);

}  // namespace latlex
