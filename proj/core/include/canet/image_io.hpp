#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "canet/tensor.hpp"

namespace canet {

// Binary netpbm codecs. Images are P6 (maxval 255) mapped to [0,1] doubles
// as (1,3,H,W); labels are P5 with one byte per pixel holding the class id
// (255 = ignore).

std::vector<std::uint8_t> encode_ppm(const Tensor& image);
Tensor decode_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pgm(const LabelMap& label);
LabelMap decode_pgm(std::span<const std::uint8_t> bytes);

void write_image(const std::filesystem::path& path, const Tensor& image);
Tensor read_image(const std::filesystem::path& path);
void write_label(const std::filesystem::path& path, const LabelMap& label);
LabelMap read_label(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes);

}  // namespace canet
