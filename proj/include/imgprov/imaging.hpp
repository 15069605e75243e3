// Copyright 2026 The imgprov Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// In-memory images, PNG/JPEG codecs and the four perturbations used both as
// training augmentation and as evaluation attacks.

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "imgprov/error.hpp"
#include "imgprov/random.hpp"
#include "imgprov/tensor_store.hpp"

namespace imgprov {

inline constexpr std::size_t kStandardSide = 512;

// Channels-last RGB, scalars in [0, 1].
struct ImageRgb {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;

  ImageRgb() = default;
  ImageRgb(std::size_t h, std::size_t w, float fill = 0.0f)
      : height(h), width(w), pixels(h * w * 3, fill) {}

  float& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * 3 + c];
  }
  float at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }

  friend bool operator==(const ImageRgb&, const ImageRgb&) = default;
};

// Single-channel f32 image, row-major.
struct Plane {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> values;

  Plane() = default;
  Plane(std::size_t h, std::size_t w, float fill = 0.0f)
      : height(h), width(w), values(h * w, fill) {}

  float& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  float at(std::size_t y, std::size_t x) const { return values[y * width + x]; }

  friend bool operator==(const Plane&, const Plane&) = default;
};

inline std::uint8_t to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

inline ImageRgb image_from_bytes(std::size_t h, std::size_t w,
                                 std::span<const std::uint8_t> rgb) {
  ImageRgb img(h, w);
  for (std::size_t i = 0; i < rgb.size(); ++i) img.pixels[i] = rgb[i] / 255.0f;
  return img;
}

inline std::vector<std::uint8_t> image_to_bytes(const ImageRgb& img) {
  std::vector<std::uint8_t> out(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), out.begin(), to_byte);
  return out;
}

// ---------------------------------------------------------------------------
// Codecs

namespace detail {

struct JpegErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

extern "C" inline void jpeg_error_exit_longjmp(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

extern "C" inline void jpeg_silent_output(j_common_ptr) {}

// Decodes baseline JPEG into interleaved 8-bit RGB. Returns false and fills
// `error` on failure. Kept free of non-trivial locals across setjmp.
inline bool jpeg_decode_raw(std::span<const std::uint8_t> bytes,
                            std::vector<std::uint8_t>& rgb, std::size_t& h,
                            std::size_t& w, std::string& error) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit_longjmp;
  jerr.pub.output_message = jpeg_silent_output;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    error = jerr.message;
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  cinfo.dct_method = JDCT_ISLOW;
  jpeg_start_decompress(&cinfo);
  h = cinfo.output_height;
  w = cinfo.output_width;
  rgb.resize(h * w * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

// Baseline JPEG, 4:2:0 chroma subsampling (libjpeg default for YCbCr),
// Annex K tables scaled by the IJG quality mapping.
inline bool jpeg_encode_raw(std::span<const std::uint8_t> rgb, std::size_t h,
                            std::size_t w, int quality,
                            std::vector<std::uint8_t>& out, std::string& error) {
  jpeg_compress_struct cinfo;
  JpegErrorManager jerr;
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit_longjmp;
  jerr.pub.output_message = jpeg_silent_output;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(buffer);
    error = jerr.message;
    return false;
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buffer, &size);
  cinfo.image_width = static_cast<JDIMENSION>(w);
  cinfo.image_height = static_cast<JDIMENSION>(h);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  cinfo.dct_method = JDCT_ISLOW;
  cinfo.comp_info[0].h_samp_factor = 2;
  cinfo.comp_info[0].v_samp_factor = 2;
  cinfo.comp_info[1].h_samp_factor = 1;
  cinfo.comp_info[1].v_samp_factor = 1;
  cinfo.comp_info[2].h_samp_factor = 1;
  cinfo.comp_info[2].v_samp_factor = 1;
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(rgb.data() +
                                        static_cast<std::size_t>(cinfo.next_scanline) * w * 3);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  out.assign(buffer, buffer + size);
  jpeg_destroy_compress(&cinfo);
  std::free(buffer);
  return true;
}

inline bool is_png(std::span<const std::uint8_t> b) {
  static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  return b.size() >= 8 && std::memcmp(b.data(), sig, 8) == 0;
}

inline bool is_jpeg(std::span<const std::uint8_t> b) {
  return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

}  // namespace detail

// Decodes PNG or baseline JPEG to 8-bit-derived RGB at native size.
inline ImageRgb decode_image(std::span<const std::uint8_t> bytes) {
  if (detail::is_png(bytes)) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
      throw DataError(std::string("PNG decode failed: ") + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    if (image.width == 0 || image.height == 0) {
      png_image_free(&image);
      throw DataError("PNG has a zero dimension");
    }
    std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr)) {
      const std::string msg = image.message;
      png_image_free(&image);
      throw DataError("PNG decode failed: " + msg);
    }
    return image_from_bytes(image.height, image.width, rgb);
  }
  if (detail::is_jpeg(bytes)) {
    std::vector<std::uint8_t> rgb;
    std::size_t h = 0, w = 0;
    std::string error;
    if (!detail::jpeg_decode_raw(bytes, rgb, h, w, error)) {
      throw DataError("JPEG decode failed: " + error);
    }
    if (h == 0 || w == 0) throw DataError("JPEG has a zero dimension");
    return image_from_bytes(h, w, rgb);
  }
  throw DataError("undecodable image bytes (neither PNG nor JPEG)");
}

inline std::vector<std::uint8_t> encode_png(const ImageRgb& img) {
  const auto rgb = image_to_bytes(img);
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, rgb.data(), 0, nullptr)) {
    throw DataError(std::string("PNG encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, rgb.data(), 0, nullptr)) {
    throw DataError(std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

inline std::vector<std::uint8_t> encode_jpeg(const ImageRgb& img, int quality) {
  require(quality >= 1 && quality <= 100,
          "JPEG quality must be in [1, 100], got " + std::to_string(quality));
  const auto rgb = image_to_bytes(img);
  std::vector<std::uint8_t> out;
  std::string error;
  if (!detail::jpeg_encode_raw(rgb, img.height, img.width, quality, out, error)) {
    throw DataError("JPEG encode failed: " + error);
  }
  return out;
}

// Bilinear resampling with half-pixel centers; edge samples are clamped.
inline ImageRgb resize_bilinear(const ImageRgb& src, std::size_t out_h, std::size_t out_w) {
  require(src.height > 0 && src.width > 0, "cannot resize an empty image");
  ImageRgb out(out_h, out_w);
  const double sy = static_cast<double>(src.height) / static_cast<double>(out_h);
  const double sx = static_cast<double>(src.width) / static_cast<double>(out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(src.height - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(src.width - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = src.at(y0, x0, c) * (1.0 - wx) + src.at(y0, x1, c) * wx;
        const double bottom = src.at(y1, x0, c) * (1.0 - wx) + src.at(y1, x1, c) * wx;
        out.at(y, x, c) = static_cast<float>(top * (1.0 - wy) + bottom * wy);
      }
    }
  }
  return out;
}

inline ImageRgb standardize(const ImageRgb& img, std::size_t side = kStandardSide) {
  if (img.height == side && img.width == side) return img;
  return resize_bilinear(img, side, side);
}

inline ImageRgb decode_and_resize(std::span<const std::uint8_t> bytes,
                                  std::size_t side = kStandardSide) {
  return standardize(decode_image(bytes), side);
}

inline ImageRgb load_image(const std::string& path, std::size_t side = kStandardSide) {
  const auto bytes = detail::read_file_bytes(path);
  try {
    return decode_and_resize(bytes, side);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

// BT.601 luma.
inline Plane to_grayscale(const ImageRgb& img) {
  Plane g(img.height, img.width);
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    const float r = img.pixels[3 * i], gr = img.pixels[3 * i + 1], b = img.pixels[3 * i + 2];
    if (r == gr && gr == b) {
      g.values[i] = r;
    } else {
      g.values[i] = static_cast<float>(0.299 * r + 0.587 * gr + 0.114 * b);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Perturbations

inline ImageRgb jpeg_roundtrip(const ImageRgb& img, int quality) {
  const auto encoded = encode_jpeg(img, quality);
  return decode_image(encoded);
}

// Normalized 1-D Gaussian taps w[k], k = -r..r, sampled at integer offsets.
inline std::vector<double> gaussian_kernel(double sigma, int size) {
  require(size >= 1 && size % 2 == 1,
          "blur kernel size must be odd and >= 1, got " + std::to_string(size));
  require(sigma > 0.0, "gaussian_kernel needs sigma > 0");
  const int r = size / 2;
  std::vector<double> w(static_cast<std::size_t>(size));
  double sum = 0.0;
  for (int k = -r; k <= r; ++k) {
    const double v = std::exp(-(k * k) / (2.0 * sigma * sigma));
    w[static_cast<std::size_t>(k + r)] = v;
    sum += v;
  }
  for (double& v : w) v /= sum;
  return w;
}

// Mirror index without repeating the edge sample (… c b | a b c … ).
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<std::ptrdiff_t>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

inline ImageRgb gaussian_blur(const ImageRgb& img, float sigma, int kernel) {
  require(kernel >= 1 && kernel % 2 == 1,
          "blur kernel size must be odd and >= 1, got " + std::to_string(kernel));
  require(sigma >= 0.0f, "blur sigma must be >= 0");
  if (sigma == 0.0f || kernel == 1) return img;
  const auto w = gaussian_kernel(sigma, kernel);
  const int r = kernel / 2;
  const std::size_t h = img.height, wd = img.width;
  std::vector<double> tmp(img.pixels.size());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < wd; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -r; k <= r; ++k) {
          const std::size_t xx = reflect_index(static_cast<std::ptrdiff_t>(x) + k, wd);
          acc += w[static_cast<std::size_t>(k + r)] * img.at(y, xx, c);
        }
        tmp[(y * wd + x) * 3 + c] = acc;
      }
    }
  }
  ImageRgb out(h, wd);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < wd; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -r; k <= r; ++k) {
          const std::size_t yy = reflect_index(static_cast<std::ptrdiff_t>(y) + k, h);
          acc += w[static_cast<std::size_t>(k + r)] * tmp[(yy * wd + x) * 3 + c];
        }
        out.at(y, x, c) = std::clamp(static_cast<float>(acc), 0.0f, 1.0f);
      }
    }
  }
  return out;
}

// Noise is drawn in scalar order (row-major, channels-last) from a
// GaussianStream seeded with `seed`.
inline ImageRgb add_noise(const ImageRgb& img, float stddev, std::uint64_t seed) {
  require(stddev >= 0.0f, "noise std must be >= 0");
  if (stddev == 0.0f) return img;
  GaussianStream rng(seed);
  ImageRgb out = img;
  for (float& v : out.pixels) {
    v = std::clamp(static_cast<float>(v + stddev * rng.next()), 0.0f, 1.0f);
  }
  return out;
}

inline ImageRgb adjust_brightness(const ImageRgb& img, float factor) {
  require(factor > 0.0f && factor <= 1.0f,
          "brightness factor must be in (0, 1], got " + std::to_string(factor));
  if (factor == 1.0f) return img;
  ImageRgb out = img;
  for (float& v : out.pixels) v = std::clamp(factor * v, 0.0f, 1.0f);
  return out;
}

enum class PerturbationKind { kNoise, kJpeg, kBrightness, kBlur };

struct NoiseSpec {
  float stddev = 0.3f;
};
struct JpegSpec {
  int quality = 50;
};
struct BrightnessSpec {
  float factor = 0.5f;
};
struct BlurSpec {
  float sigma = 5.0f;
  int kernel = 5;
};

// Defaults carry the augmentation parameters used for training.
struct PerturbationSpec {
  std::variant<NoiseSpec, JpegSpec, BrightnessSpec, BlurSpec> params;
  std::uint64_t seed = 0;

  PerturbationKind kind() const { return static_cast<PerturbationKind>(params.index()); }

  // Identity for noise 0, brightness 1 and blur sigma 0. JPEG always
  // round-trips the codec, even at quality 100.
  bool is_identity() const {
    return std::visit(
        [](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, NoiseSpec>) return p.stddev == 0.0f;
          if constexpr (std::is_same_v<T, BrightnessSpec>) return p.factor == 1.0f;
          if constexpr (std::is_same_v<T, BlurSpec>) return p.sigma == 0.0f;
          return false;
        },
        params);
  }

  void validate() const {
    std::visit(
        [](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, NoiseSpec>) {
            require(p.stddev >= 0.0f, "noise std must be >= 0");
          } else if constexpr (std::is_same_v<T, JpegSpec>) {
            require(p.quality >= 1 && p.quality <= 100, "JPEG quality must be in [1, 100]");
          } else if constexpr (std::is_same_v<T, BrightnessSpec>) {
            require(p.factor > 0.0f && p.factor <= 1.0f, "brightness factor must be in (0, 1]");
          } else {
            require(p.sigma >= 0.0f, "blur sigma must be >= 0");
            require(p.kernel >= 1 && p.kernel % 2 == 1, "blur kernel size must be odd");
          }
        },
        params);
  }
};

inline ImageRgb apply_perturbation(const ImageRgb& img, const PerturbationSpec& spec) {
  spec.validate();
  return std::visit(
      [&](const auto& p) -> ImageRgb {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, NoiseSpec>) return add_noise(img, p.stddev, spec.seed);
        if constexpr (std::is_same_v<T, JpegSpec>) return jpeg_roundtrip(img, p.quality);
        if constexpr (std::is_same_v<T, BrightnessSpec>) return adjust_brightness(img, p.factor);
        if constexpr (std::is_same_v<T, BlurSpec>) return gaussian_blur(img, p.sigma, p.kernel);
      },
      spec.params);
}

inline PerturbationKind parse_perturbation_kind(std::string_view s) {
  if (s == "noise") return PerturbationKind::kNoise;
  if (s == "jpeg") return PerturbationKind::kJpeg;
  if (s == "brightness") return PerturbationKind::kBrightness;
  if (s == "blur") return PerturbationKind::kBlur;
  throw PreconditionError("unknown perturbation kind '" + std::string(s) + "'");
}

inline std::string_view perturbation_name(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::kNoise: return "noise";
    case PerturbationKind::kJpeg: return "jpeg";
    case PerturbationKind::kBrightness: return "brightness";
    case PerturbationKind::kBlur: return "blur";
  }
  return "?";
}

// Builds a spec whose primary parameter is `level`: noise std, JPEG
// quality, brightness factor or blur sigma (kernel size fixed by caller).
inline PerturbationSpec make_perturbation(PerturbationKind kind, double level,
                                          std::uint64_t seed = 0, int blur_kernel = 5) {
  PerturbationSpec s;
  s.seed = seed;
  switch (kind) {
    case PerturbationKind::kNoise: s.params = NoiseSpec{static_cast<float>(level)}; break;
    case PerturbationKind::kJpeg: s.params = JpegSpec{static_cast<int>(std::lround(level))}; break;
    case PerturbationKind::kBrightness: s.params = BrightnessSpec{static_cast<float>(level)}; break;
    case PerturbationKind::kBlur: s.params = BlurSpec{static_cast<float>(level), blur_kernel}; break;
  }
  s.validate();
  return s;
}

inline TensorFile image_to_tensor(const ImageRgb& img) {
  return TensorFile::f32({img.height, img.width, 3}, img.pixels);
}

// Slices image i out of a [n, h, w, 3] batch.
inline ImageRgb image_from_batch(const TensorFile& t, std::size_t i) {
  if (t.rank() != 4 || t.dim(3) != 3) throw DataError("expected an image batch [n, h, w, 3]");
  if (i >= t.dim(0)) throw DataError("image index out of range");
  ImageRgb img(t.dim(1), t.dim(2));
  const auto data = t.as_f32();
  const std::size_t stride = img.pixels.size();
  std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(i * stride), stride, img.pixels.begin());
  return img;
}

}  // namespace imgprov
