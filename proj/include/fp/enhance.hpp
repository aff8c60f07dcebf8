#pragma once

#include <vector>

#include "fp/image.hpp"

namespace fp {

// Even-symmetric Gabor filter steered by the local ridge orientation, then
// binarized at the mean response. Pixels with invalid orientation come back
// as background (255). ridge_freq is in cycles/pixel and must lie in
// (0.05, 0.25); ~1/8 suits 500 dpi ridges.
GrayImage gabor_enhance(const GrayImage& img, const OrientationField& of, double ridge_freq,
                        int workers = 1);

// Quadrature (even + odd) Gabor energy at the ridge frequency, normalized by
// the envelope mass. High on ridge texture, near zero on smooth shading and
// blank paper; drives ROI segmentation.
QualityMap ridge_band_energy(const GrayImage& img, const OrientationField& of, double ridge_freq,
                             int workers = 1);

// Morphological thinning of a binary {0,255} image (ridges = 0) down to a
// one-pixel-wide 8-connected skeleton. Idempotent.
GrayImage skeletonize(const GrayImage& binary);

// Crossing-number minutiae on a thinned skeleton: CN=1 ridge endings, CN=3
// bifurcations. Directions come from the orientation field, reliabilities
// from the mean quality in a 17x17 neighborhood. Minutiae within 8 px of the
// ROI border are discarded; the result is sorted by reliability descending,
// ties broken by (y, x).
std::vector<Minutia> extract_minutiae(const GrayImage& skeleton, const OrientationField& of,
                                      const QualityMap& q);

}  // namespace fp
