#pragma once

#include <string>

#include "panoscan/image.hpp"

namespace panoscan {

// Loads an 8- or 16-bit PNG (gray/RGB, with or without alpha) as RGB reals in
// [0,1]. Alpha is dropped; palettes are expanded.
Image load_png(const std::string& path);

// Writes RGB rounded to the given bit depth (8 or 16). Values clamp to [0,1].
void save_png(const std::string& path, const Image& img, int bit_depth = 8);

}  // namespace panoscan
