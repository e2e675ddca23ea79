#include "baker/render.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "baker/errors.hpp"
#include "baker/io.hpp"

namespace baker {

namespace {

std::uint8_t to_byte(double x) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(x * 255.0), 0L, 255L));
}

Rgb hsv(double h, double s, double v) {
  h = 6.0 * (h - std::floor(h));
  const int sector = std::min(5, static_cast<int>(h));
  const double f = h - sector;
  const double p = v * (1.0 - s), q = v * (1.0 - s * f), t = v * (1.0 - s * (1.0 - f));
  double r = 0, g = 0, b = 0;
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
  return {to_byte(r), to_byte(g), to_byte(b)};
}

// splitmix64 finaliser
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Rgb pixel_color(const Palette& pal, const Classification& cls, int k_max) {
  switch (cls.outcome) {
    case Outcome::Escaping: {
      const double t = k_max > 0 ? std::clamp(static_cast<double>(cls.steps) / k_max, 0.0, 1.0) : 0.0;
      Rgb out;
      for (int i = 0; i < 3; ++i) {
        out[i] = static_cast<std::uint8_t>(std::lround((1.0 - t) * pal.escape_bright[i] + t * pal.escape_dark[i]));
      }
      return out;
    }
    case Outcome::Converged: {
      const auto bx = static_cast<std::int64_t>(std::llround(cls.root.real() / pal.root_bucket));
      const auto by = static_cast<std::int64_t>(std::llround(cls.root.imag() / pal.root_bucket));
      const std::uint64_t h = mix(static_cast<std::uint64_t>(bx) ^ mix(static_cast<std::uint64_t>(by)));
      return hsv(static_cast<double>(h >> 11) * 0x1.0p-53, pal.saturation, pal.value);
    }
    case Outcome::Unresolved: return pal.unresolved;
  }
  return pal.unresolved;
}

cplx pixel_center(const GridSpec& grid, int i, int j) {
  const double x = ((i + 0.5) / grid.nx - 0.5) * grid.width;
  const double y = (0.5 - (j + 0.5) / grid.ny) * grid.height;
  return grid.center + cplx(x, y);
}

Image render_grid(const Chain& chain, const CalibratedBounds& bounds, const GridSpec& grid, int tiles, int threads) {
  if (grid.nx < 1 || grid.ny < 1) throw DomainError("render: nx and ny must be >= 1");
  if (tiles < 1) throw DomainError("render: tiles must be >= 1");
  Image img;
  img.nx = grid.nx;
  img.ny = grid.ny;
  const std::size_t npix = static_cast<std::size_t>(grid.nx) * grid.ny;
  img.rgb.assign(3 * npix, 0);
  img.classes.assign(npix, {});

  // tiles = tx * ty with tx the largest divisor not above sqrt(tiles)
  int tx = 1;
  for (int d = 1; d * d <= tiles; ++d) {
    if (tiles % d == 0) tx = d;
  }
  const int ty = tiles / tx;
  auto span = [](int n, int parts, int idx) {
    return std::pair<int, int>{static_cast<int>(static_cast<long long>(n) * idx / parts),
                               static_cast<int>(static_cast<long long>(n) * (idx + 1) / parts)};
  };
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int t = next.fetch_add(1);
      if (t >= tiles) return;
      const auto [i0, i1] = span(grid.nx, tx, t % tx);
      const auto [j0, j1] = span(grid.ny, ty, t / tx);
      for (int j = j0; j < j1; ++j) {
        for (int i = i0; i < i1; ++i) {
          const std::size_t idx = static_cast<std::size_t>(j) * grid.nx + i;
          const Classification cls = classify(chain, bounds, pixel_center(grid, i, j), grid.limits);
          img.classes[idx] = cls;
          const Rgb col = pixel_color(grid.palette, cls, grid.limits.k_max);
          std::copy(col.begin(), col.end(), img.rgb.begin() + 3 * idx);
        }
      }
    }
  };
  int nthreads = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  nthreads = std::min(nthreads, tiles);
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < nthreads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return img;
}

RenderStats render_stats(const Chain& chain, const CalibratedBounds& bounds, const GridSpec& grid,
                         const Image& img) {
  RenderStats st;
  const ConstructionParams& p = chain.params();
  for (int j = 0; j < img.ny; ++j) {
    for (int i = 0; i < img.nx; ++i) {
      const Classification& cls = img.classes[static_cast<std::size_t>(j) * img.nx + i];
      switch (cls.outcome) {
        case Outcome::Escaping: ++st.escaping; break;
        case Outcome::Converged: ++st.converged; break;
        case Outcome::Unresolved: ++st.unresolved; break;
      }
      if (in_u(p, bounds, to_spiral_point(pixel_center(grid, i, j), p.c))) {
        ++st.in_u;
        if (cls.outcome != Outcome::Escaping) ++st.in_u_not_escaping;
      }
    }
  }
  return st;
}

std::string encode_pnm(const Image& img) {
  std::string out = "P6\n" + std::to_string(img.nx) + " " + std::to_string(img.ny) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
  return out;
}

void write_pnm(const Image& img, const std::string& path) { write_file(path, encode_pnm(img)); }

void write_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows,
               const std::string& path) {
  CsvWriter csv(path, header);
  for (const auto& row : rows) {
    for (double x : row) csv.add(x);
    csv.end_row();
  }
  csv.close();
}

}  // namespace baker
