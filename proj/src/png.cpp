#include "fabtwin/png.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "fabtwin/error.hpp"

namespace fabtwin {

namespace {

// libpng reports errors by longjmp; the message is kept here and turned
// into an exception once control is back in C++.
struct Io {
  std::span<const std::uint8_t> in;
  std::size_t pos = 0;
  Bytes* out = nullptr;
  char error[256] = {};
};

void on_error(png_structp png, png_const_charp msg) {
  auto* io = static_cast<Io*>(png_get_error_ptr(png));
  std::snprintf(io->error, sizeof io->error, "%s", msg);
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

void read_bytes(png_structp png, png_bytep dst, png_size_t n) {
  auto* io = static_cast<Io*>(png_get_io_ptr(png));
  if (io->pos + n > io->in.size()) png_error(png, "truncated PNG");
  std::memcpy(dst, io->in.data() + io->pos, n);
  io->pos += n;
}

void write_bytes(png_structp png, png_bytep src, png_size_t n) {
  Bytes* out = static_cast<Io*>(png_get_io_ptr(png))->out;
  out->insert(out->end(), src, src + n);
}

void flush_nothing(png_structp) {}

// The setjmp frames below hold only pointers and integers, so a longjmp out
// of libpng cannot skip a destructor or clobber a C++ object.

struct WriteJob {
  int width, height, color_type;
  const std::uint8_t* pixels;
  const png_color* palette;
  int palette_size;
};

bool write_png(png_structp png, png_infop info, const WriteJob* job) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_IHDR(png, info, static_cast<png_uint_32>(job->width), static_cast<png_uint_32>(job->height), 8,
               job->color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (job->palette_size > 0) png_set_PLTE(png, info, job->palette, job->palette_size);
  // No row filtering and a fixed zlib level keep the bytes a pure function
  // of the pixels.
  png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_NONE);
  png_set_compression_level(png, 9);
  png_write_info(png, info);
  for (int y = 0; y < job->height; ++y) {
    png_write_row(png, job->pixels + static_cast<std::size_t>(y) * static_cast<std::size_t>(job->width));
  }
  png_write_end(png, nullptr);
  return true;
}

// 8-bit, one byte per pixel.
Bytes encode_raw(int width, int height, int color_type, std::span<const std::uint8_t> pixels,
                 std::span<const Rgb> palette) {
  Bytes out;
  Io io;
  io.out = &out;
  std::vector<png_color> plte(palette.size());
  for (std::size_t i = 0; i < palette.size(); ++i) plte[i] = {palette[i][0], palette[i][1], palette[i][2]};
  const WriteJob job{width, height, color_type, pixels.data(), plte.data(), static_cast<int>(plte.size())};

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &io, on_error, on_warning);
  if (!png) throw RuntimeFailure("libpng: out of memory");
  png_infop info = png_create_info_struct(png);
  png_set_write_fn(png, &io, write_bytes, flush_nothing);
  const bool ok = info && write_png(png, info, &job);
  png_destroy_write_struct(&png, &info);
  if (!ok) throw RuntimeFailure(std::string("PNG encoding failed: ") + io.error);
  return out;
}

bool read_header(png_structp png, png_infop info) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_info(png, info);
  return true;
}

bool read_rows(png_structp png, std::uint8_t* dst, int width, int height) {
  if (setjmp(png_jmpbuf(png))) return false;
  for (int y = 0; y < height; ++y) png_read_row(png, dst + static_cast<std::size_t>(y) * static_cast<std::size_t>(width), nullptr);
  png_read_end(png, nullptr);
  return true;
}

struct Decoded8 {
  int width = 0;
  int height = 0;
  Bytes pixels;
  std::vector<Rgb> palette;
};

// `want_color` is PNG_COLOR_TYPE_GRAY or _PALETTE; anything else is
// rejected from the header before pixel data is read.
Decoded8 decode_8bit(std::span<const std::uint8_t> bytes, int want_color) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw UnsupportedFormat("not a PNG file");
  Io io;
  io.in = bytes;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &io, on_error, on_warning);
  if (!png) throw RuntimeFailure("libpng: out of memory");
  png_infop info = png_create_info_struct(png);
  auto fail = [&](const std::string& msg) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw UnsupportedFormat(msg);
  };
  if (!info) fail("libpng: out of memory");
  png_set_read_fn(png, &io, read_bytes);
  if (!read_header(png, info)) fail(std::string("corrupt PNG: ") + io.error);

  const int color = png_get_color_type(png, info), depth = png_get_bit_depth(png, info);
  if (color != want_color) {
    fail(std::string(want_color == PNG_COLOR_TYPE_GRAY ? "only grayscale PNG is supported" : "expected a palette PNG") +
         " (colour type " + std::to_string(color) + ")");
  }
  if (depth != 8) fail("only 8-bit PNG is supported (bit depth " + std::to_string(depth) + ")");
  if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) fail("interlaced PNG is not supported");

  Decoded8 out;
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.pixels.resize(static_cast<std::size_t>(out.width) * static_cast<std::size_t>(out.height));
  if (!read_rows(png, out.pixels.data(), out.width, out.height)) fail(std::string("corrupt PNG: ") + io.error);
  if (want_color == PNG_COLOR_TYPE_PALETTE) {
    png_colorp plte = nullptr;
    int n = 0;
    png_get_PLTE(png, info, &plte, &n);
    for (int i = 0; i < n; ++i) out.palette.push_back({plte[i].red, plte[i].green, plte[i].blue});
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (want_color == PNG_COLOR_TYPE_PALETTE) {
    if (out.palette.empty()) throw UnsupportedFormat("palette PNG without PLTE");
    for (auto i : out.pixels)
      if (i >= out.palette.size()) throw UnsupportedFormat("palette index out of range");
  }
  return out;
}

}  // namespace

Bytes encode_mask(const BitMask& mask) {
  Bytes px(mask.size());
  std::transform(mask.bits().begin(), mask.bits().end(), px.begin(),
                 [](std::uint8_t b) { return static_cast<std::uint8_t>(b ? 255 : 0); });
  return encode_raw(mask.width(), mask.height(), PNG_COLOR_TYPE_GRAY, px, {});
}

BitMask decode_mask(std::span<const std::uint8_t> png) {
  auto d = decode_8bit(png, PNG_COLOR_TYPE_GRAY);
  std::vector<std::uint8_t> bits(d.pixels.size());
  std::transform(d.pixels.begin(), d.pixels.end(), bits.begin(),
                 [](std::uint8_t p) { return static_cast<std::uint8_t>(p >= 128 ? 1 : 0); });
  return BitMask(d.width, d.height, std::move(bits));
}

Bytes encode_gray(const GrayImage& image) {
  Bytes px(image.size());
  std::transform(image.values().begin(), image.values().end(), px.begin(), [](float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
  });
  return encode_raw(image.width(), image.height(), PNG_COLOR_TYPE_GRAY, px, {});
}

GrayImage decode_gray(std::span<const std::uint8_t> png) {
  auto d = decode_8bit(png, PNG_COLOR_TYPE_GRAY);
  std::vector<float> v(d.pixels.size());
  std::transform(d.pixels.begin(), d.pixels.end(), v.begin(),
                 [](std::uint8_t p) { return static_cast<float>(p) / 255.0f; });
  return GrayImage(d.width, d.height, std::move(v));
}

Bytes encode_indexed(int width, int height, std::span<const std::uint8_t> indices,
                     std::span<const Rgb> palette) {
  if (palette.empty() || palette.size() > 256) throw InvalidInput("palette must have 1..256 entries");
  if (indices.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw InvalidInput("index count does not match image size");
  }
  for (auto i : indices) {
    if (i >= palette.size()) throw InvalidInput("palette index out of range");
  }
  return encode_raw(width, height, PNG_COLOR_TYPE_PALETTE, indices, palette);
}

Bytes read_file(const std::filesystem::path& path) {
  // A path that is not there is a bad argument; one that exists but cannot
  // be read is an environment problem.
  if (!std::filesystem::is_regular_file(path)) throw InvalidInput("no such file: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw RuntimeFailure("write failed for " + path.string());
}

BitMask load_mask(const std::filesystem::path& path) { return decode_mask(read_file(path)); }
void save_mask(const std::filesystem::path& path, const BitMask& mask) { write_file(path, encode_mask(mask)); }
GrayImage load_gray(const std::filesystem::path& path) { return decode_gray(read_file(path)); }
void save_gray(const std::filesystem::path& path, const GrayImage& image) { write_file(path, encode_gray(image)); }

IndexedImage decode_indexed(std::span<const std::uint8_t> png) {
  auto d = decode_8bit(png, PNG_COLOR_TYPE_PALETTE);
  return {d.width, d.height, std::move(d.pixels), std::move(d.palette)};
}

}  // namespace fabtwin
