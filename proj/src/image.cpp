#include "latlex/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "latlex/error.hpp"

namespace latlex {

std::vector<std::uint8_t> quantize(const ImageBuffer& image) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(image.pixels.size()));
  for (Eigen::Index i = 0; i < image.pixels.size(); ++i) {
    const double p = std::clamp(image.pixels[i], 0.0, 1.0);
    out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::lround(p * 255.0));
  }
  return out;
}

std::string encode_pnm(const ImageBuffer& image) {
  if (image.shape.channels != 1 && image.shape.channels != 3)
    throw Error(ErrorKind::InvalidConfig, "PNM supports 1 or 3 channels");
  std::ostringstream os;
  os << (image.shape.channels == 3 ? "P6" : "P5") << '\n'
     << image.shape.width << ' ' << image.shape.height << '\n'
     << 255 << '\n';
  const auto bytes = quantize(image);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  return os.str();
}

namespace {

// Reads one header token, skipping whitespace and '#' comments.
std::string next_token(const std::string& s, std::size_t& pos) {
  while (pos < s.size()) {
    if (s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  return s.substr(start, pos - start);
}

}  // namespace

ImageBuffer decode_pnm(const std::string& bytes) {
  std::size_t pos = 0;
  const std::string magic = next_token(bytes, pos);
  ImageBuffer img;
  if (magic == "P6") {
    img.shape.channels = 3;
  } else if (magic == "P5") {
    img.shape.channels = 1;
  } else {
    throw Error(ErrorKind::Parse, "not a binary PNM image");
  }
  try {
    img.shape.width = std::stoi(next_token(bytes, pos));
    img.shape.height = std::stoi(next_token(bytes, pos));
    if (std::stoi(next_token(bytes, pos)) != 255) throw Error(ErrorKind::Parse, "PNM max value must be 255");
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::Parse, "malformed PNM header");
  }
  ++pos;  // single whitespace byte after maxval
  const auto n = static_cast<std::size_t>(img.shape.pixel_count());
  if (bytes.size() < pos + n) throw Error(ErrorKind::Parse, "truncated PNM data");
  img.pixels.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    img.pixels[static_cast<Eigen::Index>(i)] = static_cast<unsigned char>(bytes[pos + i]) / 255.0;
  return img;
}

void write_pnm(const std::filesystem::path& path, const ImageBuffer& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  const std::string data = encode_pnm(image);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

ImageBuffer read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_pnm(ss.str());
}

ImageBuffer quantized_copy(const ImageBuffer& image) {
  ImageBuffer out = image;
  const auto q = quantize(image);
  for (std::size_t i = 0; i < q.size(); ++i) out.pixels[static_cast<Eigen::Index>(i)] = q[i] / 255.0;
  return out;
}

}  // namespace latlex
