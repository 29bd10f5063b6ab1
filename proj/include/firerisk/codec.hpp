#pragma once

// PNG/JPEG ingestion and PNG emission on top of libpng and libjpeg.
// Both libraries report fatal errors by longjmp; every object whose
// destructor must run lives in the frame that calls setjmp.

#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "firerisk/error.hpp"
#include "firerisk/image.hpp"

namespace firerisk {

namespace codec_detail {

struct PngReadState {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
  char message[256] = {};
  bool unsupported = false;
};

inline void png_read_fn(png_structp png, png_bytep out, png_size_t len) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->offset + len > st->bytes.size()) {
    png_error(png, "unexpected end of PNG stream");
  }
  std::memcpy(out, st->bytes.data() + st->offset, len);
  st->offset += len;
}

inline void png_error_fn(png_structp png, png_const_charp msg) {
  auto* st = static_cast<PngReadState*>(png_get_error_ptr(png));
  std::snprintf(st->message, sizeof st->message, "%s", msg);
  png_longjmp(png, 1);
}

inline void png_warning_fn(png_structp, png_const_charp) {}

inline ImageU8 decode_png(std::span<const std::uint8_t> bytes) {
  PngReadState st;
  st.bytes = bytes;
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &st, png_error_fn, png_warning_fn);
  if (!png) throw Error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("png_create_info_struct failed");
  }

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    if (st.unsupported) throw UnsupportedFormatError(st.message);
    throw DecodeError(std::string("PNG decode failed: ") + st.message, st.offset);
  }

  png_set_read_fn(png, &st, png_read_fn);
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);

  if (bit_depth == 16) {
    std::snprintf(st.message, sizeof st.message,
                  "unsupported PNG bit depth 16 (only 8-bit and palette/low-bit gray are accepted)");
    st.unsupported = true;
    png_longjmp(png, 1);
  }
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  // Alpha (including tRNS) is dropped.
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  if (png_get_rowbytes(png, info) != static_cast<png_size_t>(width) * 3) {
    std::snprintf(st.message, sizeof st.message, "unsupported PNG pixel layout");
    st.unsupported = true;
    png_longjmp(png, 1);
  }

  pixels.resize(static_cast<std::size_t>(width) * height * 3);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  return ImageU8(static_cast<int>(width), static_cast<int>(height), std::move(pixels));
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX] = {};
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

inline void jpeg_silent(j_common_ptr, int) {}

inline ImageU8 decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo{};
  JpegErrorMgr err{};
  std::vector<std::uint8_t> pixels;
  volatile bool unsupported = false;

  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  err.pub.emit_message = jpeg_silent;

  if (setjmp(err.jump)) {
    std::size_t offset = bytes.size();
    if (cinfo.src) offset = bytes.size() - cinfo.src->bytes_in_buffer;
    jpeg_destroy_decompress(&cinfo);
    if (unsupported) throw UnsupportedFormatError(err.message);
    throw DecodeError(std::string("JPEG decode failed: ") + err.message, offset);
  }

  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.data_precision != 8) {
    std::snprintf(err.message, sizeof err.message, "unsupported JPEG precision %d",
                  cinfo.data_precision);
    unsupported = true;
    std::longjmp(err.jump, 1);
  }
  if (cinfo.jpeg_color_space == JCS_CMYK || cinfo.jpeg_color_space == JCS_YCCK) {
    std::snprintf(err.message, sizeof err.message, "unsupported JPEG color space (CMYK/YCCK)");
    unsupported = true;
    std::longjmp(err.jump, 1);
  }
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);

  const auto w = cinfo.output_width, h = cinfo.output_height;
  pixels.resize(static_cast<std::size_t>(w) * h * 3);
  while (cinfo.output_scanline < h) {
    JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return ImageU8(static_cast<int>(w), static_cast<int>(h), std::move(pixels));
}

inline void png_write_fn(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

inline void png_flush_fn(png_structp) {}

} // namespace codec_detail

/// Decodes PNG or JPEG (sniffed from the signature) into 8-bit RGB.
/// Grayscale is replicated to three channels and alpha is dropped.
inline ImageU8 decode_image(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0)
    return codec_detail::decode_png(bytes);
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF)
    return codec_detail::decode_jpeg(bytes);
  throw DecodeError("not a PNG or JPEG stream (unrecognized signature)", 0);
}

/// 8-bit RGB, non-interlaced PNG. Output is deterministic for a given image.
inline std::vector<std::uint8_t> encode_png(const ImageU8& img) {
  std::vector<std::uint8_t> out;
  std::vector<png_const_bytep> rows(static_cast<std::size_t>(img.height()));
  for (int y = 0; y < img.height(); ++y)
    rows[static_cast<std::size_t>(y)] = img.data().data() + static_cast<std::size_t>(y) * img.width() * 3;
  codec_detail::PngReadState st;  // reused only for the error message buffer

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &st, codec_detail::png_error_fn,
                                            codec_detail::png_warning_fn);
  if (!png) throw Error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(std::string("PNG encode failed: ") + st.message);
  }
  png_set_write_fn(png, &out, codec_detail::png_write_fn, codec_detail::png_flush_fn);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()),
               8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void write_file_text(const std::filesystem::path& path, std::string_view text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline ImageU8 load_image(const std::filesystem::path& path) { return decode_image(read_file_bytes(path)); }

inline void save_png(const std::filesystem::path& path, const ImageU8& img) {
  write_file_bytes(path, encode_png(img));
}

} // namespace firerisk
