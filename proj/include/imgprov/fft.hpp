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

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace imgprov::fft {

using Complex = std::complex<double>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Forward transform X[k] = sum_n x[n] exp(-2 pi i k n / N), in place.
// Iterative radix-2 for powers of two; direct evaluation otherwise.
inline void transform(std::span<Complex> data) {
  const std::size_t n = data.size();
  if (n <= 1) return;
  if (!is_power_of_two(n)) {
    std::vector<Complex> out(n);
    for (std::size_t k = 0; k < n; ++k) {
      Complex acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * j) % n) /
                             static_cast<double>(n);
        acc += data[j] * std::polar(1.0, angle);
      }
      out[k] = acc;
    }
    std::copy(out.begin(), out.end(), data.begin());
    return;
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  std::vector<Complex> twiddle(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    twiddle[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) /
                                     static_cast<double>(n));
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex t = k == 0 ? data[start + half] : twiddle[k * step] * data[start + k + half];
        const Complex u = data[start + k];
        data[start + k] = u + t;
        data[start + k + half] = u - t;
      }
    }
  }
}

// 2-D forward transform of a row-major real field (rows x cols).
inline std::vector<Complex> transform_2d(std::span<const float> field, std::size_t rows,
                                         std::size_t cols) {
  std::vector<Complex> grid(field.begin(), field.end());
  for (std::size_t r = 0; r < rows; ++r) {
    transform(std::span<Complex>(grid).subspan(r * cols, cols));
  }
  std::vector<Complex> column(rows);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) column[r] = grid[r * cols + c];
    transform(column);
    for (std::size_t r = 0; r < rows; ++r) grid[r * cols + c] = column[r];
  }
  return grid;
}

}  // namespace imgprov::fft
