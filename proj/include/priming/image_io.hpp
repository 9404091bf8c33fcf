#pragma once

/// @file image_io.hpp
/// PNG read/write (libpng simplified API) and JPEG read (libjpeg).
/// Masks are single-channel PNGs: 0 = background, 255 = foreground; on read
/// any non-zero value counts as foreground.

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <jpeglib.h>

#include "priming/core.hpp"

namespace priming {

namespace detail {

inline std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  for (auto& ch : e) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return e;
}

inline std::vector<std::uint8_t> read_png_raw(const std::string& path, png_uint_32 format, int& w, int& h) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw ValidationError("cannot read PNG " + path + ": " + img.message);
  img.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw ValidationError("cannot decode PNG " + path + ": " + img.message);
  }
  w = static_cast<int>(img.width);
  h = static_cast<int>(img.height);
  return buf;
}

inline void write_png_raw(const std::string& path, png_uint_32 format, int w, int h, const std::uint8_t* data) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = format;
  if (!png_image_write_to_file(&img, path.c_str(), 0, data, 0, nullptr))
    throw std::runtime_error("cannot write PNG " + path + ": " + img.message);
}

struct JpegErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

inline RgbImage read_jpeg(const std::string& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!file) throw ValidationError("cannot open JPEG " + path);
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  // Storage touched after setjmp lives outside this frame.
  auto rows = std::make_unique<std::vector<std::uint8_t>>();
  int w = 0, h = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw ValidationError("cannot decode JPEG " + path + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  w = static_cast<int>(cinfo.output_width);
  h = static_cast<int>(cinfo.output_height);
  rows->resize(static_cast<std::size_t>(w) * h * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = rows->data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);

  RgbImage out(w, h);
  for (std::size_t i = 0; i < out.pixels().size(); ++i)
    out.pixels()[i] = {(*rows)[3 * i], (*rows)[3 * i + 1], (*rows)[3 * i + 2]};
  return out;
}

}  // namespace detail

/// Reads a PNG or JPEG (by extension) as 8-bit RGB.
inline RgbImage read_image(const std::string& path) {
  const auto ext = detail::lower_ext(path);
  if (ext == ".jpg" || ext == ".jpeg") return detail::read_jpeg(path);
  int w = 0, h = 0;
  const auto buf = detail::read_png_raw(path, PNG_FORMAT_RGB, w, h);
  RgbImage out(w, h);
  for (std::size_t i = 0; i < out.pixels().size(); ++i) out.pixels()[i] = {buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]};
  return out;
}

inline void write_png(const std::string& path, const RgbImage& image) {
  std::vector<std::uint8_t> buf;
  buf.reserve(image.pixels().size() * 3);
  for (const auto& p : image.pixels()) {
    buf.push_back(p.r);
    buf.push_back(p.g);
    buf.push_back(p.b);
  }
  detail::write_png_raw(path, PNG_FORMAT_RGB, image.width(), image.height(), buf.data());
}

inline BinaryMask read_mask(const std::string& path) {
  int w = 0, h = 0;
  const auto buf = detail::read_png_raw(path, PNG_FORMAT_GRAY, w, h);
  BinaryMask m(w, h);
  for (std::size_t i = 0; i < buf.size(); ++i) m.data()[i] = buf[i] != 0 ? 1 : 0;
  return m;
}

inline void write_mask(const std::string& path, const BinaryMask& mask) {
  std::vector<std::uint8_t> buf(mask.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = mask[i] ? 255 : 0;
  detail::write_png_raw(path, PNG_FORMAT_GRAY, mask.width(), mask.height(), buf.data());
}

inline bool is_image_file(const std::filesystem::path& p) {
  const auto ext = detail::lower_ext(p);
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace priming
