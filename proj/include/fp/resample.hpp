#pragma once

#include "fp/image.hpp"

namespace fp {

// Inverse-mapped bilinear resampling under a rigid transform; out-of-support
// pixels take `fill`. The output raster has the input's dimensions.
GrayImage apply_rigid(const GrayImage& img, const RigidTransform& t, double fill = 255.0);

// Orientation variant: resampled angles are shifted by t.dtheta and wrapped
// back into [0, pi). Interpolation runs on the doubled-angle vector
// (cos 2theta, sin 2theta); a pixel stays valid when at least half the
// bilinear weight comes from valid source pixels.
OrientationField apply_rigid(const OrientationField& of, const RigidTransform& t);

// Mask variant: bilinear on {0,1} then >= 0.5.
BinaryMask apply_rigid(const BinaryMask& mask, const RigidTransform& t);

GrayImage resize_bilinear(const GrayImage& img, int new_w, int new_h);
OrientationField resize_bilinear(const OrientationField& of, int new_w, int new_h);

// Plane variant used by tensor code; row-major w x h single channel.
std::vector<float> resize_bilinear_plane(const std::vector<float>& plane, int w, int h, int new_w,
                                         int new_h);

// Bilinear lookup with constant fill outside the support. Exact at integer
// coordinates.
double sample_bilinear(const GrayImage& img, double x, double y, double fill);

}  // namespace fp
