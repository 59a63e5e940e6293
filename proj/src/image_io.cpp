#include "madnet/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

#include "madnet/error.hpp"

namespace madnet {

namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::string& header, const std::vector<std::uint8_t>& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

// Decoded 8-bit raster with 1 or 3 interleaved channels.
struct Decoded {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};

Decoded decode_pnm(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  std::size_t pos = 2;
  auto next_token = [&]() -> long {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    long v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > (1L << 30)) throw DataError(name + ": header value too large");
      ++pos;
      any = true;
    }
    if (!any) throw DataError(name + ": malformed PNM header");
    return v;
  };
  Decoded d;
  d.channels = bytes[1] == '6' ? 3 : 1;
  d.width = static_cast<int>(next_token());
  d.height = static_cast<int>(next_token());
  const long maxval = next_token();
  if (d.width < 1 || d.height < 1 || maxval < 1 || maxval > 65535) throw DataError(name + ": bad PNM dimensions");
  ++pos;  // single whitespace before raster
  const std::size_t count = static_cast<std::size_t>(d.width) * d.height * d.channels;
  const std::size_t bytesPer = maxval > 255 ? 2 : 1;
  if (pos + count * bytesPer > bytes.size()) throw DataError(name + ": truncated PNM raster");
  d.pixels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    long v = bytesPer == 2 ? (bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1] : bytes[pos + i];
    d.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * static_cast<double>(v) / static_cast<double>(maxval)));
  }
  return d;
}

Decoded decode_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw DataError(path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  Decoded d;
  d.width = static_cast<int>(image.width);
  d.height = static_cast<int>(image.height);
  d.channels = 3;
  d.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, d.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw DataError(path.string() + ": " + image.message);
  }
  return d;
}

Decoded decode_any(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_bytes(path);
  if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' && bytes[3] == 'G') {
    return decode_png(path);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) {
    return decode_pnm(bytes, path.string());
  }
  throw DataError(path.string() + ": unsupported image format (expected P5/P6 PNM or PNG)");
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  const Decoded d = decode_any(path);
  Image img(d.width, d.height);
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * d.width + x;
      for (int c = 0; c < 3; ++c) {
        const std::uint8_t v = d.channels == 3 ? d.pixels[3 * i + c] : d.pixels[i];
        img.at(c, x, y) = v / 255.0;
      }
    }
  }
  return img;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  std::vector<std::uint8_t> body;
  body.reserve(3 * static_cast<std::size_t>(image.width()) * image.height());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(image.at(c, x, y), 0.0, 1.0);
        body.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
      }
    }
  }
  write_bytes(path, "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n", body);
}

Raster<std::uint8_t> read_gray8(const std::filesystem::path& path) {
  const Decoded d = decode_any(path);
  Raster<std::uint8_t> out(d.width, d.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (d.channels == 1) {
      out.data[i] = d.pixels[i];
    } else {
      const double luma = 0.299 * d.pixels[3 * i] + 0.587 * d.pixels[3 * i + 1] + 0.114 * d.pixels[3 * i + 2];
      out.data[i] = static_cast<std::uint8_t>(std::lround(luma));
    }
  }
  return out;
}

BinaryRaster read_binary_raster(const std::filesystem::path& path) {
  Raster<std::uint8_t> gray = read_gray8(path);
  for (auto& v : gray.data) v = v > 127 ? 1 : 0;
  return gray;
}

void write_binary_raster(const std::filesystem::path& path, const BinaryRaster& raster) {
  Raster<std::uint8_t> gray = raster;
  for (auto& v : gray.data) v = v ? 255 : 0;
  write_pgm8(path, gray);
}

void write_pgm8(const std::filesystem::path& path, const Raster<std::uint8_t>& raster) {
  write_bytes(path, "P5\n" + std::to_string(raster.width) + " " + std::to_string(raster.height) + "\n255\n",
              raster.data);
}

void write_pgm16(const std::filesystem::path& path, const Raster<std::uint16_t>& raster) {
  std::vector<std::uint8_t> body;
  body.reserve(2 * raster.size());
  for (std::uint16_t v : raster.data) {
    body.push_back(static_cast<std::uint8_t>(v >> 8));
    body.push_back(static_cast<std::uint8_t>(v & 0xff));
  }
  write_bytes(path, "P5\n" + std::to_string(raster.width) + " " + std::to_string(raster.height) + "\n65535\n", body);
}

}  // namespace madnet
