#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

// jpeglib.h needs FILE and size_t declared first.
#include <jpeglib.h>

#include "binary_io.hpp"
#include "demnet/dataio.hpp"
#include "demnet/errors.hpp"

namespace demnet {

namespace {

GrayImage decode_png(const std::string& bytes, const std::string& name) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw DataError("cannot decode PNG '" + name + "': " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw DataError("cannot decode PNG '" + name + "': " + msg);
  }
  GrayImage out;
  out.height = image.height;
  out.width = image.width;
  out.pixels.resize(buffer.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) out.pixels[i] = buffer[i] / 255.0f;
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

GrayImage decode_jpeg(const std::string& bytes, const std::string& name) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  GrayImage out;
  std::vector<unsigned char> row;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw DataError("cannot decode JPEG '" + name + "': " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, reinterpret_cast<const unsigned char*>(bytes.data()),
               static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_GRAYSCALE;
  jpeg_start_decompress(&cinfo);
  out.height = cinfo.output_height;
  out.width = cinfo.output_width;
  out.pixels.resize(out.height * out.width);
  row.resize(out.width * static_cast<std::size_t>(cinfo.output_components));
  while (cinfo.output_scanline < cinfo.output_height) {
    const std::size_t y = cinfo.output_scanline;
    JSAMPROW ptr = row.data();
    jpeg_read_scanlines(&cinfo, &ptr, 1);
    for (std::size_t x = 0; x < out.width; ++x) out.pixels[y * out.width + x] = row[x] / 255.0f;
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

}  // namespace

GrayImage decode_image(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  const std::string name = path.string();
  if (bytes.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) == 0) {
    return decode_png(bytes, name);
  }
  if (bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xFF &&
      static_cast<unsigned char>(bytes[1]) == 0xD8 && static_cast<unsigned char>(bytes[2]) == 0xFF) {
    return decode_jpeg(bytes, name);
  }
  throw DataError("cannot decode '" + name + "': not a PNG or JPEG file");
}

void write_png(const std::filesystem::path& path, const GrayImage& image) {
  if (image.pixels.size() != image.height * image.width || image.pixels.empty()) {
    throw ValueError("write_png: pixel buffer does not match dimensions");
  }
  std::vector<png_byte> buffer(image.pixels.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const float v = std::clamp(image.pixels[i], 0.0f, 1.0f);
    buffer[i] = static_cast<png_byte>(std::lround(v * 255.0f));
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, buffer.data(), 0, nullptr)) {
    throw IoError("cannot encode PNG '" + path.string() + "': " + png.message);
  }
  std::string bytes(size, '\0');
  if (!png_image_write_to_memory(&png, bytes.data(), &size, 0, buffer.data(), 0, nullptr)) {
    throw IoError("cannot encode PNG '" + path.string() + "': " + png.message);
  }
  bytes.resize(size);
  detail::write_file(path, bytes);
}

GrayImage resize_bilinear(const GrayImage& image, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw ValueError("resize target must be at least 1x1");
  if (image.height == 0 || image.width == 0) throw ValueError("cannot resize an empty image");
  GrayImage out;
  out.height = height;
  out.width = width;
  out.pixels.resize(height * width);
  const double sy = height > 1 ? static_cast<double>(image.height - 1) / (height - 1) : 0.0;
  const double sx = width > 1 ? static_cast<double>(image.width - 1) / (width - 1) : 0.0;
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = y * sy;
    const auto y0 = std::min(static_cast<std::size_t>(fy), image.height - 1);
    const std::size_t y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = x * sx;
      const auto x0 = std::min(static_cast<std::size_t>(fx), image.width - 1);
      const std::size_t x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - static_cast<double>(x0);
      const double p00 = image.pixels[y0 * image.width + x0];
      const double p01 = image.pixels[y0 * image.width + x1];
      const double p10 = image.pixels[y1 * image.width + x0];
      const double p11 = image.pixels[y1 * image.width + x1];
      const double top = p00 + wx * (p01 - p00);
      const double bottom = p10 + wx * (p11 - p10);
      out.pixels[y * width + x] = static_cast<float>(top + wy * (bottom - top));
    }
  }
  return out;
}

}  // namespace demnet
