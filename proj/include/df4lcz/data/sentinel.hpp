#pragma once

#include <algorithm>
#include <string>

#include "df4lcz/errors.hpp"
#include "df4lcz/nn/tensor.hpp"
#include "df4lcz/spectral/resnet3d.hpp"

namespace df4lcz {

/// Level-2A reflectance scale: DN / 10000.
inline constexpr double kReflectanceScale = 10000.0;

/// Digital numbers to reflectance in [0, 1], clamped above.
inline Tensor dn_to_reflectance(const Tensor& dn, double scale = kReflectanceScale) {
  if (!(scale > 0.0)) throw DomainError("reflectance scale must be positive");
  Tensor out(dn.shape());
  for (std::size_t i = 0; i < dn.size(); ++i) {
    const float v = dn[i];
    if (!(v >= 0.0f)) throw InputError("negative or NaN digital number " + std::to_string(v) + " at " + std::to_string(i));
    out[i] = static_cast<float>(std::min(1.0, static_cast<double>(v) / scale));
  }
  return out;
}

/// A raw 32 x 32 x 10 DN patch as a validated reflectance patch.
inline SpectralPatch normalize_sentinel(const Tensor& dn, double scale = kReflectanceScale) {
  const Shape expected{kSentinelPatch, kSentinelPatch, kSentinelBands};
  if (dn.shape() != expected) {
    throw DimensionError("sentinel patch must be " + shape_str(expected) + ", got " + shape_str(dn.shape()));
  }
  return SpectralPatch::from_tensor(dn_to_reflectance(dn, scale));
}

}  // namespace df4lcz
