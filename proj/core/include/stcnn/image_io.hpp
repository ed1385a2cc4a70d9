#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace stcnn {

/// 8-bit interleaved image as it lives on disk.
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3
  std::vector<std::uint8_t> pixels;
};

/// Decodes PNG or JPEG (chosen by file signature). `channels` forces 1 or 3
/// output channels; 0 keeps the file's natural layout.
RawImage read_image(const std::filesystem::path& path, int channels = 0);

void write_png(const std::filesystem::path& path, const RawImage& image);
void write_jpeg(const std::filesystem::path& path, const RawImage& image,
                int quality = 95);

}  // namespace stcnn
