#pragma once

#include <filesystem>
#include <string>

#include "gtrm/core.hpp"
#include "gtrm/imaging.hpp"

namespace gtrm::io {

// Netpbm PAM (P7). RGBA frames use RGB_ALPHA, gray frames GRAYSCALE; both
// lossless. Frame id/timestamp are not part of the file.
void write_pam(const std::filesystem::path& path, const Frame& frame);
Frame read_pam(const std::filesystem::path& path);

// Reads PAM (P7), PGM (P5) or PPM (P6) by magic, 8-bit only.
// PGM loads as GRAY8, PPM as RGBA8 with alpha 255.
Frame read_image(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const imaging::GrayImage& img);

}  // namespace gtrm::io
