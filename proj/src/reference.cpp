#include "fp/reference.hpp"

#include <cmath>
#include <limits>

#include "fp/resample.hpp"

namespace fp::ref {

namespace {

// Sobel at (x, y); zero when the 3x3 stencil leaves the image.
void sobel_at(const GrayImage& img, int x, int y, double& gx, double& gy) {
    gx = gy = 0.0;
    if (x < 1 || x >= img.width - 1 || y < 1 || y >= img.height - 1) return;
    const double p00 = img.at(x - 1, y - 1), p10 = img.at(x, y - 1), p20 = img.at(x + 1, y - 1);
    const double p01 = img.at(x - 1, y), p21 = img.at(x + 1, y);
    const double p02 = img.at(x - 1, y + 1), p12 = img.at(x, y + 1), p22 = img.at(x + 1, y + 1);
    gx = (p20 + 2.0 * p21 + p22) - (p00 + 2.0 * p01 + p02);
    gy = (p02 + 2.0 * p12 + p22) - (p00 + 2.0 * p10 + p20);
}

struct Sums {
    double gxx = 0.0, gyy = 0.0, gxy = 0.0;
};

Sums window_sums_at(const GrayImage& img, int cx, int cy) {
    Sums s;
    for (int dy = -8; dy <= 8; ++dy) {
        for (int dx = -8; dx <= 8; ++dx) {
            const int x = cx + dx, y = cy + dy;
            if (x < 1 || x >= img.width - 1 || y < 1 || y >= img.height - 1) continue;
            double gx, gy;
            sobel_at(img, x, y, gx, gy);
            s.gxx += gx * gx;
            s.gyy += gy * gy;
            s.gxy += gx * gy;
        }
    }
    return s;
}

}  // namespace

QualityMap coherence_quality_map(const GrayImage& img) {
    QualityMap q(img.width, img.height, 0.0);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const Sums s = window_sums_at(img, x, y);
            const double denom = s.gxx + s.gyy;
            if (denom <= 0.0) continue;
            double v = std::sqrt((s.gxx - s.gyy) * (s.gxx - s.gyy) + 4.0 * s.gxy * s.gxy) / denom;
            if (v > 1.0) v = 1.0;
            q.at(x, y) = v;
        }
    }
    return q;
}

OrientationField estimate_orientation_field(const GrayImage& img, const BinaryMask& roi) {
    OrientationField of(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (!roi.at(x, y)) continue;
            const Sums s = window_sums_at(img, x, y);
            if (s.gxx + s.gyy <= 0.0) continue;
            const double phi = 0.5 * std::atan2(2.0 * s.gxy, s.gxx - s.gyy);
            of.angle(x, y) = wrap_orientation(phi + kPi / 2.0);
            of.validity.set(x, y, true);
        }
    }
    return of;
}

double alignment_cost(const OrientationField& p, const OrientationField& q,
                      const RigidTransform& t, double side) {
    const OrientationField q_aligned = apply_rigid(q, t);
    const Vec2 center{(p.width - 1) / 2.0, (p.height - 1) / 2.0};
    const HexPartition part_p = hex_partition(p, center, side);
    const HexPartition part_q = hex_partition(q_aligned, center, side);

    double sum = 0.0;
    int n = 0;
    for (const HexElement& ep : part_p.elements) {
        if (!ep.valid) continue;
        const HexElement* eq = part_q.find(ep.q, ep.r);
        if (!eq || !eq->valid) continue;
        sum += orientation_distance(ep.avg_orientation, eq->avg_orientation);
        ++n;
    }
    if (n < 5) return std::numeric_limits<double>::infinity();
    return sum / n;
}

namespace {

template <typename T>
void conv2d_naive_impl(const T* in, int n, int ci, int h, int w, const T* weight, const T* bias,
                       int co, int k, int pad, T* out) {
    const int oh = h + 2 * pad - k + 1;
    const int ow = w + 2 * pad - k + 1;
    for (int b = 0; b < n; ++b)
        for (int oc = 0; oc < co; ++oc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    T acc = bias[oc];
                    for (int ic = 0; ic < ci; ++ic)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int iy = oy + ky - pad;
                                const int ix = ox + kx - pad;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                acc += weight[((static_cast<std::size_t>(oc) * ci + ic) * k + ky) *
                                                  k +
                                              kx] *
                                       in[((static_cast<std::size_t>(b) * ci + ic) * h + iy) * w +
                                          ix];
                            }
                    out[((static_cast<std::size_t>(b) * co + oc) * oh + oy) * ow + ox] = acc;
                }
}

}  // namespace

void conv2d_naive(const float* in, int n, int ci, int h, int w, const float* weight,
                  const float* bias, int co, int k, int pad, float* out) {
    conv2d_naive_impl(in, n, ci, h, w, weight, bias, co, k, pad, out);
}

void conv2d_naive(const double* in, int n, int ci, int h, int w, const double* weight,
                  const double* bias, int co, int k, int pad, double* out) {
    conv2d_naive_impl(in, n, ci, h, w, weight, bias, co, k, pad, out);
}

}  // namespace fp::ref
