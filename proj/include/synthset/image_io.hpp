#pragma once

#include "synthset/raster.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace synthset {

enum class ImageFormat { unknown, jpeg, png, webp };

/// Sniffs the container format from magic bytes.
ImageFormat detect_format(std::span<const std::uint8_t> bytes);

/// File extension used in the image store ("jpg", "png", "webp"); empty for unknown.
std::string extension_for(ImageFormat format);

/// A decoded image. `has_alpha` is true only when the file carried an alpha channel.
struct DecodedImage {
  RgbaImage pixels;
  bool has_alpha = false;
};

/// Decodes PNG or JPEG bytes. Throws DataError for anything else or for corrupt data.
DecodedImage decode_image(std::span<const std::uint8_t> bytes);
DecodedImage read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const RgbaImage& image);
std::vector<std::uint8_t> encode_png(const Mask& mask);
std::vector<std::uint8_t> encode_jpeg(const RgbImage& image, int quality = 95);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace synthset
