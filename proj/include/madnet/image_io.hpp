#pragma once

#include <cstdint>
#include <filesystem>

#include "madnet/image.hpp"

namespace madnet {

/// Reads binary PPM (P6), PGM (P5, replicated to RGB) or PNG. Values are scaled to [0, 1].
Image read_image(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& image);

/// Raw 8-bit gray values of a P5 PGM or PNG.
Raster<std::uint8_t> read_gray8(const std::filesystem::path& path);
/// 0/1 raster from an 8-bit gray file: value > 127 maps to 1.
BinaryRaster read_binary_raster(const std::filesystem::path& path);
/// Writes 0/1 as 0/255.
void write_binary_raster(const std::filesystem::path& path, const BinaryRaster& raster);
void write_pgm8(const std::filesystem::path& path, const Raster<std::uint8_t>& raster);
void write_pgm16(const std::filesystem::path& path, const Raster<std::uint16_t>& raster);

}  // namespace madnet
