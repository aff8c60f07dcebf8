#pragma once

#include <vector>

#include "fp/image.hpp"

namespace fp {

// Truncated 2-D Fourier regularization of an orientation field. Two
// coefficient vectors of length (2k+1)^2 fit the doubled-angle component
// surfaces cos(2 theta) and sin(2 theta) over the field's valid pixels.
struct FomfeModel {
    int order = 0;  // k
    int width = 0;
    int height = 0;
    std::vector<double> coeff_cos;
    std::vector<double> coeff_sin;
    double residual = 0.0;  // mean squared fit residual in doubled-angle space

    int basis_size() const { return (2 * order + 1) * (2 * order + 1); }
};

// Dominant ridge orientation from the structure tensor over a 17x17
// neighborhood, using 3x3 Sobel gradients. The orientation is perpendicular
// to the dominant gradient direction. Pixels outside the ROI or with a
// zero-energy neighborhood come back invalid.
OrientationField estimate_orientation_field(const GrayImage& img, const BinaryMask& roi,
                                            int workers = 1);

// Orientation coherence sqrt((Gxx - Gyy)^2 + 4 Gxy^2) / (Gxx + Gyy) with the
// structure sums taken over a 17x17 window; 0 where the denominator vanishes.
QualityMap coherence_quality_map(const GrayImage& img, int workers = 1);

BinaryMask quality_mask(const QualityMap& q, double threshold = 0.9);

FomfeModel fomfe_fit(const OrientationField& of, int order);
OrientationField fomfe_eval(const FomfeModel& m, const BinaryMask& region);

}  // namespace fp
