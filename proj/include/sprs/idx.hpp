#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sprs/image.hpp"

namespace sprs {

// IDX image/label containers (big-endian headers): magic 0x00000803 for
// u8 image stacks, 0x00000801 for u8 label vectors.
std::vector<GrayImage> read_idx_images(const std::string& path);
std::vector<std::uint8_t> read_idx_labels(const std::string& path);

void write_idx_images(const std::vector<GrayImage>& images, const std::string& path);
void write_idx_labels(const std::vector<std::uint8_t>& labels, const std::string& path);

}  // namespace sprs
