// Copyright 2026 The synctrack Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Direct cross-correlation kernels over up to three spatial axes for one
// batch element. Weights are [C_out, C_in, KD, KH, KW]; all three routines
// accumulate into their destination.

#ifndef SYNCTRACK_SRC_NN_CONV_KERNELS_HPP_
#define SYNCTRACK_SRC_NN_CONV_KERNELS_HPP_

#include <array>
#include <cstddef>

namespace synctrack::nn::detail {

struct ConvGeometry {
  std::array<std::size_t, 3> in{1, 1, 1};
  std::array<std::size_t, 3> out{1, 1, 1};
  std::array<std::size_t, 3> kernel{1, 1, 1};
  std::array<std::size_t, 3> pad{0, 0, 0};
  std::array<std::size_t, 3> stride{1, 1, 1};

  std::size_t in_size() const { return in[0] * in[1] * in[2]; }
  std::size_t out_size() const { return out[0] * out[1] * out[2]; }
  std::size_t kernel_size() const { return kernel[0] * kernel[1] * kernel[2]; }
};

// Valid output range [lo, hi) along one axis for kernel tap k.
struct TapRange {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

inline TapRange tap_range(std::size_t in, std::size_t out, std::size_t pad,
                          std::size_t stride, std::size_t k) {
  // Output o reads input o * stride + k - pad.
  TapRange r;
  r.lo = k >= pad ? 0 : (pad - k + stride - 1) / stride;
  if (in + pad < k + 1) return {0, 0};
  std::size_t last = (in - 1 + pad - k) / stride;
  r.hi = last + 1 < out ? last + 1 : out;
  if (r.lo > r.hi) r.lo = r.hi;
  return r;
}

// Visits every (kernel tap, output row, input row) triple with the flat tap
// index, both row offsets, the column tap kw and its valid column range.
template <typename RowFn>
void for_each_tap_row(const ConvGeometry& g, RowFn&& row) {
  const std::size_t ow_n = g.out[2];
  for (std::size_t kd = 0; kd < g.kernel[0]; ++kd) {
    const TapRange rd = tap_range(g.in[0], g.out[0], g.pad[0], g.stride[0], kd);
    for (std::size_t kh = 0; kh < g.kernel[1]; ++kh) {
      const TapRange rh = tap_range(g.in[1], g.out[1], g.pad[1], g.stride[1], kh);
      for (std::size_t kw = 0; kw < g.kernel[2]; ++kw) {
        const TapRange rw = tap_range(g.in[2], g.out[2], g.pad[2], g.stride[2], kw);
        if (rw.lo >= rw.hi) continue;
        const std::size_t tap = (kd * g.kernel[1] + kh) * g.kernel[2] + kw;
        for (std::size_t od = rd.lo; od < rd.hi; ++od) {
          const std::size_t id = od * g.stride[0] + kd - g.pad[0];
          for (std::size_t oh = rh.lo; oh < rh.hi; ++oh) {
            const std::size_t ih = oh * g.stride[1] + kh - g.pad[1];
            const std::size_t out_row = (od * g.out[1] + oh) * ow_n;
            const std::size_t in_row = (id * g.in[1] + ih) * g.in[2];
            row(tap, out_row, in_row, kw, rw);
          }
        }
      }
    }
  }
}

template <typename T>
void conv_forward(const ConvGeometry& g, std::size_t cin, std::size_t cout,
                  const T* input, const T* weight, T* output) {
  const std::size_t in_plane = g.in_size();
  const std::size_t out_plane = g.out_size();
  const std::size_t taps = g.kernel_size();
  const std::size_t sw = g.stride[2];
  const std::size_t pw = g.pad[2];
  for (std::size_t co = 0; co < cout; ++co) {
    T* out = output + co * out_plane;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* in = input + ci * in_plane;
      const T* w = weight + (co * cin + ci) * taps;
      for_each_tap_row(g, [&](std::size_t tap, std::size_t out_row, std::size_t in_row,
                              std::size_t kw, TapRange rw) {
        const T wv = w[tap];
        if (wv == T(0)) return;
        // Output column ow reads input column ow * sw + kw - pw.
        T* o = out + out_row + rw.lo;
        const T* x = in + (in_row + rw.lo * sw + kw - pw);
        const std::size_t n = rw.hi - rw.lo;
        if (sw == 1) {
          for (std::size_t j = 0; j < n; ++j) o[j] += wv * x[j];
        } else {
          for (std::size_t j = 0; j < n; ++j) o[j] += wv * x[j * sw];
        }
      });
    }
  }
}

template <typename T>
void conv_backward_input(const ConvGeometry& g, std::size_t cin, std::size_t cout,
                         const T* grad_output, const T* weight, T* grad_input) {
  const std::size_t in_plane = g.in_size();
  const std::size_t out_plane = g.out_size();
  const std::size_t taps = g.kernel_size();
  const std::size_t sw = g.stride[2];
  const std::size_t pw = g.pad[2];
  for (std::size_t ci = 0; ci < cin; ++ci) {
    T* gin = grad_input + ci * in_plane;
    for (std::size_t co = 0; co < cout; ++co) {
      const T* gout = grad_output + co * out_plane;
      const T* w = weight + (co * cin + ci) * taps;
      for_each_tap_row(g, [&](std::size_t tap, std::size_t out_row, std::size_t in_row,
                              std::size_t kw, TapRange rw) {
        const T wv = w[tap];
        if (wv == T(0)) return;
        const T* go = gout + out_row + rw.lo;
        T* x = gin + (in_row + rw.lo * sw + kw - pw);
        const std::size_t n = rw.hi - rw.lo;
        if (sw == 1) {
          for (std::size_t j = 0; j < n; ++j) x[j] += wv * go[j];
        } else {
          for (std::size_t j = 0; j < n; ++j) x[j * sw] += wv * go[j];
        }
      });
    }
  }
}

template <typename T>
void conv_backward_weight(const ConvGeometry& g, std::size_t cin, std::size_t cout,
                          const T* grad_output, const T* input, T* grad_weight) {
  const std::size_t in_plane = g.in_size();
  const std::size_t out_plane = g.out_size();
  const std::size_t taps = g.kernel_size();
  const std::size_t sw = g.stride[2];
  const std::size_t pw = g.pad[2];
  for (std::size_t co = 0; co < cout; ++co) {
    const T* gout = grad_output + co * out_plane;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* in = input + ci * in_plane;
      T* gw = grad_weight + (co * cin + ci) * taps;
      for_each_tap_row(g, [&](std::size_t tap, std::size_t out_row, std::size_t in_row,
                              std::size_t kw, TapRange rw) {
        const T* go = gout + out_row + rw.lo;
        const T* x = in + (in_row + rw.lo * sw + kw - pw);
        const std::size_t n = rw.hi - rw.lo;
        T acc = T(0);
        if (sw == 1) {
          for (std::size_t j = 0; j < n; ++j) acc += go[j] * x[j];
        } else {
          for (std::size_t j = 0; j < n; ++j) acc += go[j] * x[j * sw];
        }
        gw[tap] += acc;
      });
    }
  }
}

}  // namespace synctrack::nn::detail

#endif  // SYNCTRACK_SRC_NN_CONV_KERNELS_HPP_
