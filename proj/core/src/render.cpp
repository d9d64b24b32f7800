#include "sdeit/render.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace sdeit {
namespace {

// viridis sampled at 9 evenly spaced points
constexpr std::array<std::array<double, 3>, 9> kViridis{{
    {68, 1, 84},
    {71, 44, 122},
    {59, 81, 139},
    {44, 113, 142},
    {33, 144, 141},
    {39, 173, 129},
    {92, 200, 99},
    {170, 220, 50},
    {253, 231, 37},
}};

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

std::array<std::uint8_t, 3> colormap(double t) {
  if (!std::isfinite(t)) t = 0.0;
  t = std::clamp(t, 0.0, 1.0) * double(kViridis.size() - 1);
  const auto i = std::min(std::size_t(t), kViridis.size() - 2);
  const double f = t - double(i);
  std::array<std::uint8_t, 3> rgb{};
  for (int c = 0; c < 3; ++c) {
    rgb[c] = std::uint8_t(std::lround(kViridis[i][c] * (1.0 - f) + kViridis[i + 1][c] * f));
  }
  return rgb;
}

void write_png(const GridImage& img, const std::filesystem::path& path, double lo, double hi,
               bool blank_outside) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot write " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);

  std::ostringstream range;
  range.precision(17);
  range << lo << ' ' << hi;
  std::string key = "sdeit:range";
  std::string text = range.str();
  png_text chunk{};
  chunk.compression = PNG_TEXT_COMPRESSION_NONE;
  chunk.key = key.data();
  chunk.text = text.data();
  png_set_text(png, info, &chunk, 1);
  png_write_info(png, info);

  const double span = hi > lo ? hi - lo : 1.0;
  std::vector<png_byte> row(std::size_t(img.width) * 3);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      const std::size_t idx = std::size_t(r) * img.width + c;
      std::array<std::uint8_t, 3> rgb{255, 255, 255};
      if (!blank_outside || img.mask.empty() || img.mask[idx]) {
        rgb = colormap((img.values[idx] - lo) / span);
      }
      std::copy(rgb.begin(), rgb.end(), row.begin() + std::ptrdiff_t(c) * 3);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace sdeit
