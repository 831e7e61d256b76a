#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace gtrm::glyphs {

// Fixed 5x7 monochrome bitmap font, defined in-repo so text rendering and
// recognition never depend on system fonts.
inline constexpr int kWidth = 5;
inline constexpr int kHeight = 7;
inline constexpr int kAdvance = 6;  // glyph width plus one blank column

// A-Z, 0-9, space and basic punctuation.
std::string_view charset();

bool has_glyph(char c);

// Row bitmasks, bit 4 = leftmost column. Unknown chars map to the blank glyph.
const std::array<uint8_t, 7>& glyph_rows(char c);

inline bool glyph_pixel(char c, int gx, int gy) {
    return (glyph_rows(c)[gy] >> (kWidth - 1 - gx)) & 1;
}

}  // namespace gtrm::glyphs
