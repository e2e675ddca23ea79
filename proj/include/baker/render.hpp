#pragma once

// Tile-parallel escape-time rendering and the PNM / CSV writers.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "baker/dynamics.hpp"

namespace baker {

using Rgb = std::array<std::uint8_t, 3>;

struct Palette {
  /// Escaping pixels: escape step 0 maps to escape_bright, k_max to escape_dark.
  Rgb escape_bright{170, 210, 255};
  Rgb escape_dark{10, 30, 120};
  Rgb unresolved{0, 0, 0};
  /// Converged pixels: hue from the root, roots bucketed on this grid.
  double root_bucket = 1e-6;
  double saturation = 0.65;
  double value = 0.95;
};

Rgb pixel_color(const Palette& pal, const Classification& cls, int k_max);

struct GridSpec {
  cplx center = 0.0;
  double width = 1.0, height = 1.0;
  int nx = 1, ny = 1;
  ClassifyLimits limits;
  Palette palette;
};

/// Pixel (0, 0) is top-left; column i, row j.
cplx pixel_center(const GridSpec& grid, int i, int j);

struct Image {
  int nx = 0, ny = 0;
  std::vector<std::uint8_t> rgb;            // row-major from top-left
  std::vector<Classification> classes;      // same order
};

/// Classifies every pixel centre; the result does not depend on `tiles` or
/// `threads` (threads = 0 uses the hardware concurrency).
Image render_grid(const Chain& chain, const CalibratedBounds& bounds, const GridSpec& grid, int tiles,
                  int threads = 0);

struct RenderStats {
  long long escaping = 0, converged = 0, unresolved = 0;
  /// Pixels whose centre lies in U, and those among them not Escaping.
  long long in_u = 0, in_u_not_escaping = 0;
};
RenderStats render_stats(const Chain& chain, const CalibratedBounds& bounds, const GridSpec& grid, const Image& img);

/// "P6\n{nx} {ny}\n255\n" followed by the RGB triples.
std::string encode_pnm(const Image& img);
void write_pnm(const Image& img, const std::string& path);

/// Header line plus rows of reals with 17 significant digits.
void write_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows,
               const std::string& path);

}  // namespace baker
