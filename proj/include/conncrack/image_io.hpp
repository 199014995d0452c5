#pragma once

#include "conncrack/image.hpp"

#include <filesystem>
#include <string>

namespace conncrack::image_io {

/// Binary PGM (P5) for one channel, PPM (P6) for three. Maxval 255.
std::string encode_pnm(const Image& img);
/// Reads P2/P3/P5/P6 with maxval 255. Throws FormatError with the byte
/// offset on malformed or truncated input.
Image decode_pnm(const std::string& bytes);

std::string encode_png(const Image& img);
Image decode_png(const std::string& bytes);

/// Dispatches on the file signature (load) or extension (save): .pgm/.ppm/.pnm
/// or .png. Saves atomically.
Image load_image(const std::filesystem::path& path);
void save_image(const Image& img, const std::filesystem::path& path);

/// Any nonzero sample becomes crack.
BinaryMask load_mask(const std::filesystem::path& path);

} // namespace conncrack::image_io
