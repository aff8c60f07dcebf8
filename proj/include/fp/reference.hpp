#pragma once

#include "fp/align.hpp"
#include "fp/image.hpp"

namespace fp::ref {

// Serial reference implementations kept for testing and for the kernel
// benchmark. Each reimplements its operation by the most literal route
// available, independent of the optimized code paths in fp::.

// Literal triple loop: for every pixel, walk the 17x17 window and accumulate
// the structure sums from freshly computed 3x3 Sobel gradients.
QualityMap coherence_quality_map(const GrayImage& img);

OrientationField estimate_orientation_field(const GrayImage& img, const BinaryMask& roi);

// Element-level route: resample Q with apply_rigid, partition both fields
// about P's raster center with hex_partition, pair elements by axial
// coordinate.
double alignment_cost(const OrientationField& p, const OrientationField& q,
                      const RigidTransform& t, double side = 12.0);

// Seven nested loops, no blocking, no clipping tricks.
void conv2d_naive(const float* in, int n, int ci, int h, int w, const float* weight,
                  const float* bias, int co, int k, int pad, float* out);
void conv2d_naive(const double* in, int n, int ci, int h, int w, const double* weight,
                  const double* bias, int co, int k, int pad, double* out);

}  // namespace fp::ref
