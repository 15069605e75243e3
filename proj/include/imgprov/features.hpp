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

// The 5-channel feature stack [R, G, B, E, F]: RGB, reconstruction error
// and the centered log-magnitude spectrum.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "imgprov/error.hpp"
#include "imgprov/fft.hpp"
#include "imgprov/imaging.hpp"
#include "imgprov/tensor_store.hpp"

namespace imgprov {

inline constexpr std::size_t kFeatureChannels = 5;

struct FeatureStack {
  std::size_t side = 0;
  std::vector<float> values;  // [side, side, 5], channels last

  float at(std::size_t y, std::size_t x, std::size_t c) const {
    return values[(y * side + x) * kFeatureChannels + c];
  }

  Plane channel(std::size_t c) const {
    Plane p(side, side);
    for (std::size_t i = 0; i < side * side; ++i) p.values[i] = values[i * kFeatureChannels + c];
    return p;
  }
};

// In-place min-max scaling to [0, 1]; constant planes become all zero.
inline void normalize_min_max(Plane& p) {
  if (p.values.empty()) return;
  const auto [lo, hi] = std::minmax_element(p.values.begin(), p.values.end());
  const float mn = *lo, mx = *hi;
  if (mx == mn) {
    std::fill(p.values.begin(), p.values.end(), 0.0f);
    return;
  }
  const double range = static_cast<double>(mx) - mn;
  for (float& v : p.values) v = static_cast<float>((static_cast<double>(v) - mn) / range);
}

// ln(1 + |shift(DFT(gray))|) for a square image of any side; DC is moved
// to (side/2, side/2). Computed in double, returned as double.
inline std::vector<double> log_magnitude_spectrum(const Plane& gray) {
  require(gray.height == gray.width && gray.height > 0,
          "frequency feature needs a square image");
  const std::size_t n = gray.height;
  const auto g = fft::transform_2d(gray.values, n, n);
  std::vector<double> out(n * n);
  const std::size_t shift = n / 2;
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const std::size_t ty = (y + shift) % n, tx = (x + shift) % n;
      out[ty * n + tx] = std::log1p(std::abs(g[y * n + x]));
    }
  }
  return out;
}

inline std::vector<double> frequency_spectrum_raw(const ImageRgb& img) {
  return log_magnitude_spectrum(to_grayscale(img));
}

inline Plane frequency_feature(const ImageRgb& img) {
  require(img.height == img.width, "frequency feature needs a square image");
  const auto raw = frequency_spectrum_raw(img);
  Plane p(img.height, img.width);
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double mn = *lo, mx = *hi;
  if (mx == mn) return p;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    p.values[i] = static_cast<float>((raw[i] - mn) / (mx - mn));
  }
  return p;
}

// Mean over RGB of |recon - orig|, before normalization.
inline Plane reconstruction_error_raw(const ImageRgb& original, const ImageRgb& recon) {
  if (original.height != recon.height || original.width != recon.width) {
    throw PreconditionError("reconstruction shape differs from the original image");
  }
  Plane e(original.height, original.width);
  for (std::size_t i = 0; i < e.values.size(); ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      acc += std::fabs(static_cast<double>(recon.pixels[3 * i + c]) - original.pixels[3 * i + c]);
    }
    e.values[i] = static_cast<float>(acc / 3.0);
  }
  return e;
}

inline Plane reconstruction_error(const ImageRgb& original, const ImageRgb& recon) {
  Plane e = reconstruction_error_raw(original, recon);
  normalize_min_max(e);
  return e;
}

// Pixel-space L1 reconstruction distance: mean of the raw error channel.
inline double reconstruction_distance(const ImageRgb& original, const ImageRgb& recon) {
  const Plane e = reconstruction_error_raw(original, recon);
  double acc = 0.0;
  for (float v : e.values) acc += v;
  return acc / static_cast<double>(e.values.size());
}

inline FeatureStack stack_channels(const ImageRgb& img, const Plane& e, const Plane& f) {
  if (img.height != img.width || e.height != img.height || e.width != img.width ||
      f.height != img.height || f.width != img.width) {
    throw PreconditionError("feature channels must share one square shape");
  }
  FeatureStack s;
  s.side = img.height;
  const std::size_t px = s.side * s.side;
  s.values.resize(px * kFeatureChannels);
  for (std::size_t i = 0; i < px; ++i) {
    float* dst = &s.values[i * kFeatureChannels];
    dst[0] = img.pixels[3 * i];
    dst[1] = img.pixels[3 * i + 1];
    dst[2] = img.pixels[3 * i + 2];
    dst[3] = e.values[i];
    dst[4] = f.values[i];
  }
  return s;
}

// Full stack for one image. Without a reconstruction the E plane is zero.
inline FeatureStack build_features(const ImageRgb& img, const ImageRgb* recon) {
  const Plane e = recon ? reconstruction_error(img, *recon) : Plane(img.height, img.width);
  return stack_channels(img, e, frequency_feature(img));
}

// Non-overlapping average pooling to out_side x out_side per channel,
// flattened row-major with channels last.
inline std::vector<float> pool_features(const FeatureStack& x, std::size_t out_side) {
  require(out_side > 0 && x.side % out_side == 0,
          "pool size " + std::to_string(out_side) + " does not divide " +
              std::to_string(x.side));
  const std::size_t block = x.side / out_side;
  const double inv = 1.0 / static_cast<double>(block * block);
  std::vector<float> out(out_side * out_side * kFeatureChannels);
  for (std::size_t oy = 0; oy < out_side; ++oy) {
    for (std::size_t ox = 0; ox < out_side; ++ox) {
      for (std::size_t c = 0; c < kFeatureChannels; ++c) {
        double acc = 0.0;
        for (std::size_t dy = 0; dy < block; ++dy) {
          for (std::size_t dx = 0; dx < block; ++dx) {
            acc += x.at(oy * block + dy, ox * block + dx, c);
          }
        }
        out[(oy * out_side + ox) * kFeatureChannels + c] =
            block == 1 ? static_cast<float>(acc) : static_cast<float>(acc * inv);
      }
    }
  }
  return out;
}

}  // namespace imgprov
