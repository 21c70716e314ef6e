#include "dreamsplat/codec.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <mutex>
#include <stdexcept>

#include <png.h>
#include <sodium.h>

#include "dreamsplat/errors.hpp"

namespace dreamsplat {

namespace {

void ensure_sodium() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0)
      throw std::runtime_error("libsodium failed to initialize");
  });
}

} // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  ensure_sodium();
  constexpr int variant = sodium_base64_VARIANT_ORIGINAL;
  std::string out(sodium_base64_ENCODED_LEN(bytes.size(), variant), '\0');
  sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(), variant);
  out.resize(std::strlen(out.c_str()));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  ensure_sodium();
  std::vector<std::uint8_t> out(text.size() / 4 * 3 + 3);
  std::size_t len = 0;
  const char *end = nullptr;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), "\r\n", &len, &end,
                        sodium_base64_VARIANT_ORIGINAL) != 0 ||
      end != text.data() + text.size())
    throw ParseError("base64: malformed input");
  out.resize(len);
  return out;
}

namespace {

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

struct PngErrorState {
  std::jmp_buf jump;
  char message[256] = {0};
};

void on_png_error(png_structp png, png_const_charp msg) {
  auto *state = static_cast<PngErrorState *>(png_get_error_ptr(png));
  std::snprintf(state->message, sizeof(state->message), "%s", msg);
  std::longjmp(state->jump, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

void read_from_cursor(png_structp png, png_bytep out, png_size_t len) {
  auto *cursor = static_cast<ReadCursor *>(png_get_io_ptr(png));
  if (cursor->offset + len > cursor->bytes.size())
    png_error(png, "truncated PNG stream");
  std::memcpy(out, cursor->bytes.data() + cursor->offset, len);
  cursor->offset += len;
}

void write_to_vector(png_structp png, png_bytep data, png_size_t len) {
  auto *out = static_cast<std::vector<std::uint8_t> *>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void flush_noop(png_structp) {}

} // namespace

PngPixels decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
    throw ParseError("png: missing PNG signature");

  PngErrorState err;
  ReadCursor cursor{bytes, 0};
  PngPixels result;
  std::vector<png_byte> raw;
  std::vector<png_bytep> rows;
  const char *failure = nullptr;

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, on_png_error, on_png_warning);
  if (!png)
    throw std::runtime_error("png: out of memory");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png: out of memory");
  }

  if (setjmp(err.jump)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError(std::string("png: ") + err.message);
  }

  png_set_read_fn(png, &cursor, read_from_cursor);
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  const bool interlaced = png_get_interlace_type(png, info) != PNG_INTERLACE_NONE;

  int file_channels = 0;
  int out_channels = 0;
  if (bit_depth == 8 && color_type == PNG_COLOR_TYPE_GRAY) {
    file_channels = 1;
    out_channels = 1;
  } else if (bit_depth == 8 && color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    file_channels = 2;
    out_channels = 1;
  } else if (bit_depth == 8 && color_type == PNG_COLOR_TYPE_RGB) {
    file_channels = 3;
    out_channels = 3;
  } else if (bit_depth == 8 && color_type == PNG_COLOR_TYPE_RGB_ALPHA) {
    file_channels = 4;
    out_channels = 3;
  } else if (bit_depth == 16 && color_type == PNG_COLOR_TYPE_GRAY) {
    file_channels = 1;
    out_channels = 1;
  } else {
    failure = "unsupported bit depth or color type";
  }

  if (!failure && interlaced)
    failure = "interlaced PNG is not supported";

  if (!failure) {
    const std::size_t bytes_per_sample = bit_depth / 8;
    const std::size_t stride = static_cast<std::size_t>(width) * file_channels * bytes_per_sample;
    if (png_get_rowbytes(png, info) != stride)
      failure = "unexpected row size";
    else {
      raw.resize(stride * height);
      rows.resize(height);
      for (png_uint_32 y = 0; y < height; ++y)
        rows[y] = raw.data() + y * stride;
      png_read_image(png, rows.data());
      png_read_end(png, nullptr);

      result.width = static_cast<int>(width);
      result.height = static_cast<int>(height);
      result.channels = out_channels;
      result.bit_depth = bit_depth;
      result.samples.resize(static_cast<std::size_t>(width) * height * out_channels);
      for (std::size_t p = 0; p < static_cast<std::size_t>(width) * height; ++p) {
        for (int c = 0; c < out_channels; ++c) {
          const std::size_t src = (p * file_channels + c) * bytes_per_sample;
          result.samples[p * out_channels + c] =
              bit_depth == 16 ? static_cast<std::uint16_t>((raw[src] << 8) | raw[src + 1]) : raw[src];
        }
      }
    }
  }

  png_destroy_read_struct(&png, &info, nullptr);
  if (failure)
    throw ParseError(std::string("png: ") + failure);
  return result;
}

std::vector<std::uint8_t> encode_png(const PngPixels &pixels) {
  if (pixels.width <= 0 || pixels.height <= 0)
    throw std::invalid_argument("png: image must be non-empty");
  if (!(pixels.channels == 1 || pixels.channels == 3) || !(pixels.bit_depth == 8 || pixels.bit_depth == 16))
    throw std::invalid_argument("png: only 8/16-bit gray and 8-bit RGB are written");
  if (pixels.samples.size() != static_cast<std::size_t>(pixels.width) * pixels.height * pixels.channels)
    throw std::invalid_argument("png: sample count mismatch");

  const std::size_t bytes_per_sample = pixels.bit_depth / 8;
  const std::size_t stride = static_cast<std::size_t>(pixels.width) * pixels.channels * bytes_per_sample;
  std::vector<png_byte> raw(stride * pixels.height);
  for (std::size_t i = 0; i < pixels.samples.size(); ++i) {
    const std::uint16_t s = pixels.samples[i];
    if (bytes_per_sample == 2) {
      raw[i * 2] = static_cast<png_byte>(s >> 8);
      raw[i * 2 + 1] = static_cast<png_byte>(s & 0xff);
    } else {
      raw[i] = static_cast<png_byte>(std::min<std::uint16_t>(s, 255));
    }
  }
  std::vector<png_bytep> rows(pixels.height);
  for (int y = 0; y < pixels.height; ++y)
    rows[y] = raw.data() + y * stride;

  std::vector<std::uint8_t> out;
  PngErrorState err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, on_png_error, on_png_warning);
  if (!png)
    throw std::runtime_error("png: out of memory");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png: out of memory");
  }
  if (setjmp(err.jump)) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error(std::string("png: encode failed: ") + err.message);
  }

  png_set_write_fn(png, &out, write_to_vector, flush_noop);
  png_set_IHDR(png, info, pixels.width, pixels.height, pixels.bit_depth,
               pixels.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

std::vector<std::uint8_t> encode_png_rgb(const ImageBuffer &img) {
  PngPixels px{img.width(), img.height(), 3, 8, {}};
  px.samples.resize(img.data().size());
  const auto d = img.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    px.samples[i] = static_cast<std::uint16_t>(std::lround(std::clamp(d[i], 0.0, 1.0) * 255.0));
  return encode_png(px);
}

ImageBuffer decode_png_rgb(std::span<const std::uint8_t> bytes) {
  const PngPixels px = decode_png(bytes);
  if (px.bit_depth != 8)
    throw ParseError("png: expected an 8-bit color image");
  std::vector<double> data(static_cast<std::size_t>(px.width) * px.height * 3);
  for (std::size_t p = 0; p < static_cast<std::size_t>(px.width) * px.height; ++p)
    for (int c = 0; c < 3; ++c)
      data[p * 3 + c] = px.samples[p * px.channels + (px.channels == 3 ? c : 0)] / 255.0;
  return ImageBuffer(px.width, px.height, std::move(data));
}

std::vector<std::uint8_t> encode_png_mask(const MaskBuffer &mask) {
  PngPixels px{mask.width(), mask.height(), 1, 8, {}};
  px.samples.reserve(mask.data().size());
  for (std::uint8_t b : mask.data())
    px.samples.push_back(b ? 255 : 0);
  return encode_png(px);
}

MaskBuffer decode_png_mask(std::span<const std::uint8_t> bytes) {
  const PngPixels px = decode_png(bytes);
  if (px.bit_depth != 8)
    throw ParseError("png: expected an 8-bit mask");
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(px.width) * px.height);
  for (std::size_t p = 0; p < bits.size(); ++p) {
    bool on = false;
    for (int c = 0; c < px.channels; ++c)
      on = on || px.samples[p * px.channels + c] != 0;
    bits[p] = on ? 1 : 0;
  }
  return MaskBuffer(px.width, px.height, std::move(bits));
}

} // namespace dreamsplat
