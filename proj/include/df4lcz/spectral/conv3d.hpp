#pragma once

#include <algorithm>
#include <array>
#include <cstring>
#include <string>
#include <vector>

#include "df4lcz/errors.hpp"
#include "df4lcz/nn/tensor.hpp"

namespace df4lcz {

/// Stride and zero padding per data axis (x, y, z).
struct Conv3dGeometry {
  std::array<std::size_t, 3> stride{1, 1, 1};
  std::array<std::size_t, 3> padding{0, 0, 0};

  /// "Same" padding for odd kernels: output extent is ceil(in / stride).
  static Conv3dGeometry same(std::size_t kernel, std::size_t stride) {
    const std::size_t p = kernel / 2;
    return {{stride, stride, stride}, {p, p, p}};
  }
};

inline std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (stride == 0) throw DimensionError("conv3d: stride must be >= 1");
  if (in + 2 * pad < kernel) {
    throw DimensionError("conv3d: kernel extent " + std::to_string(kernel) + " exceeds padded input extent " +
                         std::to_string(in + 2 * pad));
  }
  return (in + 2 * pad - kernel) / stride + 1;
}

namespace detail {

struct ConvDims {
  std::size_t batch, in[3], cin, k[3], cout, out[3];
  std::size_t positions() const { return out[0] * out[1] * out[2]; }
  std::size_t patch() const { return k[0] * k[1] * k[2] * cin; }
  std::size_t in_volume() const { return in[0] * in[1] * in[2] * cin; }
};

template <class T>
ConvDims conv_dims(const BasicTensor<T>& x, const BasicTensor<T>& kernel, const Conv3dGeometry& g) {
  if (x.rank() != 5) throw DimensionError("conv3d: input must be [B x X x Y x Z x C_in], got " + shape_str(x.shape()));
  if (kernel.rank() != 5) {
    throw DimensionError("conv3d: kernel must be [H x W x C x C_in x C_out], got " + shape_str(kernel.shape()));
  }
  if (kernel.dim(3) != x.dim(4)) {
    throw DimensionError("conv3d: kernel " + shape_str(kernel.shape()) + " expects " +
                         std::to_string(kernel.dim(3)) + " input channels, input " + shape_str(x.shape()) +
                         " has " + std::to_string(x.dim(4)));
  }
  ConvDims d{};
  d.batch = x.dim(0);
  d.cin = x.dim(4);
  d.cout = kernel.dim(4);
  for (int a = 0; a < 3; ++a) {
    d.in[a] = x.dim(1 + a);
    d.k[a] = kernel.dim(a);
    d.out[a] = conv_output_extent(d.in[a], d.k[a], g.stride[a], g.padding[a]);
  }
  return d;
}

/// Gathers the receptive fields of output rows [ox0, ox1) of one sample into
/// a [positions x patch] matrix. Column order (kh, kw, kd, c_in) matches the
/// kernel's row-major layout.
template <class T>
void im2col(const T* x, const ConvDims& d, const Conv3dGeometry& g, std::size_t ox0, std::size_t ox1, T* cols) {
  const std::size_t run = d.k[2] * d.cin;
  const long nz = static_cast<long>(d.in[2]);
  T* row = cols;
  for (std::size_t ox = ox0; ox < ox1; ++ox) {
    for (std::size_t oy = 0; oy < d.out[1]; ++oy) {
      for (std::size_t oz = 0; oz < d.out[2]; ++oz) {
        T* dst = row;
        const long z0 = static_cast<long>(oz * g.stride[2]) - static_cast<long>(g.padding[2]);
        const bool z_inside = z0 >= 0 && z0 + static_cast<long>(d.k[2]) <= nz;
        for (std::size_t kh = 0; kh < d.k[0]; ++kh) {
          const long ix = static_cast<long>(ox * g.stride[0] + kh) - static_cast<long>(g.padding[0]);
          if (ix < 0 || ix >= static_cast<long>(d.in[0])) {
            std::fill(dst, dst + d.k[1] * run, T{0});
            dst += d.k[1] * run;
            continue;
          }
          for (std::size_t kw = 0; kw < d.k[1]; ++kw) {
            const long iy = static_cast<long>(oy * g.stride[1] + kw) - static_cast<long>(g.padding[1]);
            if (iy < 0 || iy >= static_cast<long>(d.in[1])) {
              std::fill(dst, dst + run, T{0});
              dst += run;
              continue;
            }
            const T* line = x + (static_cast<std::size_t>(ix) * d.in[1] + static_cast<std::size_t>(iy)) * d.in[2] * d.cin;
            if (z_inside) {
              std::copy(line + z0 * static_cast<long>(d.cin), line + z0 * static_cast<long>(d.cin) + run, dst);
              dst += run;
              continue;
            }
            for (std::size_t kd = 0; kd < d.k[2]; ++kd, dst += d.cin) {
              const long iz = z0 + static_cast<long>(kd);
              if (iz < 0 || iz >= nz) {
                std::fill(dst, dst + d.cin, T{0});
              } else {
                std::copy(line + iz * static_cast<long>(d.cin), line + (iz + 1) * static_cast<long>(d.cin), dst);
              }
            }
          }
        }
        row += d.patch();
      }
    }
  }
}

/// Scatter-add inverse of im2col over output rows [ox0, ox1).
template <class T>
void col2im(const T* cols, const ConvDims& d, const Conv3dGeometry& g, std::size_t ox0, std::size_t ox1, T* dx) {
  const std::size_t run = d.k[2] * d.cin;
  const long nz = static_cast<long>(d.in[2]);
  const T* row = cols;
  for (std::size_t ox = ox0; ox < ox1; ++ox) {
    for (std::size_t oy = 0; oy < d.out[1]; ++oy) {
      for (std::size_t oz = 0; oz < d.out[2]; ++oz, row += d.patch()) {
        const T* src = row;
        const long z0 = static_cast<long>(oz * g.stride[2]) - static_cast<long>(g.padding[2]);
        const bool z_inside = z0 >= 0 && z0 + static_cast<long>(d.k[2]) <= nz;
        for (std::size_t kh = 0; kh < d.k[0]; ++kh) {
          const long ix = static_cast<long>(ox * g.stride[0] + kh) - static_cast<long>(g.padding[0]);
          if (ix < 0 || ix >= static_cast<long>(d.in[0])) {
            src += d.k[1] * run;
            continue;
          }
          for (std::size_t kw = 0; kw < d.k[1]; ++kw, src += run) {
            const long iy = static_cast<long>(oy * g.stride[1] + kw) - static_cast<long>(g.padding[1]);
            if (iy < 0 || iy >= static_cast<long>(d.in[1])) continue;
            T* line = dx + (static_cast<std::size_t>(ix) * d.in[1] + static_cast<std::size_t>(iy)) * d.in[2] * d.cin;
            if (z_inside) {
              T* dst = line + z0 * static_cast<long>(d.cin);
              for (std::size_t i = 0; i < run; ++i) dst[i] += src[i];
              continue;
            }
            for (std::size_t kd = 0; kd < d.k[2]; ++kd) {
              const long iz = z0 + static_cast<long>(kd);
              if (iz < 0 || iz >= nz) continue;
              T* dst = line + iz * static_cast<long>(d.cin);
              for (std::size_t c = 0; c < d.cin; ++c) dst[c] += src[kd * d.cin + c];
            }
          }
        }
      }
    }
  }
}

/// Output x-rows per tile, sized so one tile of im2col columns stays near 128 KiB.
template <class T>
std::size_t tile_rows(const ConvDims& d) {
  const std::size_t per_row = d.out[1] * d.out[2] * d.patch() * sizeof(T);
  return std::clamp<std::size_t>((std::size_t{128} << 10) / std::max<std::size_t>(per_row, 1), 1, d.out[0]);
}

}  // namespace detail

/// 3D cross-correlation over channels-last cubes:
///   y[b, x, y, z, j] = bias[j] + sum_{h,w,c,m} k[h, w, c, m, j] * in[b, x*s+h-p, y*s+w-p, z*s+c-p, m]
/// No activation is applied.
template <class T>
BasicTensor<T> conv3d_forward(const BasicTensor<T>& x, const BasicTensor<T>& kernel, const BasicTensor<T>& bias,
                              const Conv3dGeometry& g) {
  const auto d = detail::conv_dims(x, kernel, g);
  if (bias.rank() != 1 || bias.dim(0) != d.cout) {
    throw DimensionError("conv3d: bias " + shape_str(bias.shape()) + " does not match " + std::to_string(d.cout) +
                         " output channels");
  }
  BasicTensor<T> y({d.batch, d.out[0], d.out[1], d.out[2], d.cout});
  const std::size_t P = d.positions(), K = d.patch(), plane = d.out[1] * d.out[2], tile = detail::tile_rows<T>(d);
  std::vector<T> cols(tile * plane * K);
  ConstMatrixMap<T> wm(kernel.raw(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(d.cout));
  auto bm = as_row_vector(bias);
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t ox = 0; ox < d.out[0]; ox += tile) {
      const std::size_t ox1 = std::min(ox + tile, d.out[0]);
      const auto rows = static_cast<Eigen::Index>((ox1 - ox) * plane);
      detail::im2col(x.raw() + b * d.in_volume(), d, g, ox, ox1, cols.data());
      ConstMatrixMap<T> cm(cols.data(), rows, static_cast<Eigen::Index>(K));
      MatrixMap<T> ym(y.raw() + (b * P + ox * plane) * d.cout, rows, static_cast<Eigen::Index>(d.cout));
      ym.noalias() = cm * wm;
      ym.rowwise() += bm;
    }
  }
  return y;
}

/// Accumulates kernel and bias gradients; writes the input gradient into `dx`
/// when it is non-null.
template <class T>
void conv3d_backward(const BasicTensor<T>& x, const BasicTensor<T>& kernel, const Conv3dGeometry& g,
                     const BasicTensor<T>& dy, BasicTensor<T>* dx, BasicTensor<T>& dkernel, BasicTensor<T>& dbias) {
  const auto d = detail::conv_dims(x, kernel, g);
  const Shape expected{d.batch, d.out[0], d.out[1], d.out[2], d.cout};
  if (dy.shape() != expected) {
    throw DimensionError("conv3d backward: upstream " + shape_str(dy.shape()) + ", expected " + shape_str(expected));
  }
  const std::size_t P = d.positions(), K = d.patch(), plane = d.out[1] * d.out[2], tile = detail::tile_rows<T>(d);
  std::vector<T> cols(tile * plane * K), dcols;
  if (dx) {
    *dx = BasicTensor<T>(x.shape());
    dcols.resize(tile * plane * K);
  }
  ConstMatrixMap<T> wm(kernel.raw(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(d.cout));
  MatrixMap<T> dwm(dkernel.raw(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(d.cout));
  auto dbm = as_row_vector(dbias);
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t ox = 0; ox < d.out[0]; ox += tile) {
      const std::size_t ox1 = std::min(ox + tile, d.out[0]);
      const auto rows = static_cast<Eigen::Index>((ox1 - ox) * plane);
      detail::im2col(x.raw() + b * d.in_volume(), d, g, ox, ox1, cols.data());
      ConstMatrixMap<T> cm(cols.data(), rows, static_cast<Eigen::Index>(K));
      ConstMatrixMap<T> dym(dy.raw() + (b * P + ox * plane) * d.cout, rows, static_cast<Eigen::Index>(d.cout));
      dwm.noalias() += cm.transpose() * dym;
      dbm += dym.colwise().sum();
      if (dx) {
        MatrixMap<T> dcm(dcols.data(), rows, static_cast<Eigen::Index>(K));
        dcm.noalias() = dym * wm.transpose();
        detail::col2im(dcols.data(), d, g, ox, ox1, dx->raw() + b * d.in_volume());
      }
    }
  }
}

}  // namespace df4lcz
