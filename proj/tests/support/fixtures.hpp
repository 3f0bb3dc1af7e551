#pragma once

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "badm/errors.hpp"

namespace badm_test {

inline std::filesystem::path fresh_temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("badm_" + tag + "_" +
                                                       std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_be_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

// Writes an IDX image/label file pair as MNIST does: big-endian headers,
// magics 0x00000803 / 0x00000801, one byte per pixel and label.
inline void write_idx_pair(const std::filesystem::path& images_path,
                           const std::filesystem::path& labels_path,
                           const std::vector<std::vector<unsigned char>>& images,
                           const std::vector<unsigned char>& labels, std::uint32_t rows,
                           std::uint32_t cols, std::uint32_t images_magic = 0x00000803,
                           std::uint32_t labels_magic = 0x00000801) {
  std::ofstream img(images_path, std::ios::binary);
  write_be_u32(img, images_magic);
  write_be_u32(img, static_cast<std::uint32_t>(images.size()));
  write_be_u32(img, rows);
  write_be_u32(img, cols);
  for (const auto& im : images)
    img.write(reinterpret_cast<const char*>(im.data()), static_cast<std::streamsize>(im.size()));

  std::ofstream lab(labels_path, std::ios::binary);
  write_be_u32(lab, labels_magic);
  write_be_u32(lab, static_cast<std::uint32_t>(labels.size()));
  lab.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

}  // namespace badm_test
