#include "sermm/png_plot.hpp"

#include <png.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace sermm {

namespace {

// 3x5 bitmap digits, one row per entry, bit 2 is the left column.
constexpr std::array<std::array<unsigned char, 5>, 10> kDigits = {{
    {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7}, {5, 5, 7, 1, 1},
    {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1}, {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7},
}};

struct Image {
  int width;
  int height;
  std::vector<unsigned char> rgb;

  void set(int x, int y, unsigned char r, unsigned char g, unsigned char b) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    const auto i = 3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                        static_cast<std::size_t>(x));
    rgb[i] = r;
    rgb[i + 1] = g;
    rgb[i + 2] = b;
  }
};

void draw_text(Image& img, const std::string& text, int cx, int cy, int scale, unsigned char shade) {
  const int w = static_cast<int>(text.size()) * 4 * scale - scale;
  int x0 = cx - w / 2;
  const int y0 = cy - 5 * scale / 2;
  for (char c : text) {
    if (c >= '0' && c <= '9') {
      const auto& glyph = kDigits[static_cast<std::size_t>(c - '0')];
      for (int row = 0; row < 5; ++row) {
        for (int col = 0; col < 3; ++col) {
          if (!(glyph[static_cast<std::size_t>(row)] & (4 >> col))) continue;
          for (int dy = 0; dy < scale; ++dy) {
            for (int dx = 0; dx < scale; ++dx) {
              img.set(x0 + col * scale + dx, y0 + row * scale + dy, shade, shade, shade);
            }
          }
        }
      }
    }
    x0 += 4 * scale;
  }
}

}  // namespace

void write_confusion_png(const std::filesystem::path& path, const ConfusionMatrix& cm,
                         int cell_px) {
  if (cell_px < 12) throw ParameterError("confusion cells need at least 12 px");
  const int k = cm.classes();
  const int margin = cell_px / 4;
  Image img{k * cell_px + 2 * margin, k * cell_px + 2 * margin, {}};
  img.rgb.assign(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height) * 3, 255);

  const auto pct = cm.row_percentages();
  const int scale = std::max(1, cell_px / 14);
  for (int t = 0; t < k; ++t) {
    for (int p = 0; p < k; ++p) {
      const double v = pct[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] / 100.0;
      const auto r = static_cast<unsigned char>(std::lround(255.0 - v * (255.0 - 8.0)));
      const auto g = static_cast<unsigned char>(std::lround(255.0 - v * (255.0 - 48.0)));
      const auto b = static_cast<unsigned char>(std::lround(255.0 - v * (255.0 - 107.0)));
      const int x0 = margin + p * cell_px;
      const int y0 = margin + t * cell_px;
      for (int y = 0; y < cell_px; ++y) {
        for (int x = 0; x < cell_px; ++x) {
          const bool edge = x == 0 || y == 0 || x == cell_px - 1 || y == cell_px - 1;
          if (edge) {
            img.set(x0 + x, y0 + y, 160, 160, 160);
          } else {
            img.set(x0 + x, y0 + y, r, g, b);
          }
        }
      }
      const std::string label = std::to_string(std::lround(100.0 * v));
      draw_text(img, label, x0 + cell_px / 2, y0 + cell_px / 2, scale, v > 0.5 ? 255 : 0);
    }
  }

  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!file) throw DataError("cannot write image " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    throw DataError("failed encoding PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
               8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    png_write_row(png, img.rgb.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width) * 3);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace sermm
