#include "fp/enhance.hpp"

#include <algorithm>
#include <cmath>

#include "fp/errors.hpp"
#include "fp/parallel.hpp"

namespace fp {

namespace {

constexpr int kGaborHalf = 6;          // 13x13 kernels
constexpr int kGaborOrientations = 48;

struct GaborBank {
    std::vector<std::vector<double>> kernels;       // even part, per orientation
    std::vector<std::vector<double>> odd_kernels;   // quadrature pair
    double envelope_mass = 0.0;

    GaborBank(double freq, double sigma) {
        const int size = 2 * kGaborHalf + 1;
        kernels.resize(kGaborOrientations);
        odd_kernels.resize(kGaborOrientations);
        for (int k = 0; k < kGaborOrientations; ++k) {
            // Ridge orientation of this bin; the wave travels across ridges.
            const double theta = kPi * k / kGaborOrientations;
            const double wave = theta + kPi / 2.0;
            const double c = std::cos(wave), s = std::sin(wave);
            std::vector<double>& ker = kernels[k];
            std::vector<double>& odd = odd_kernels[k];
            ker.resize(static_cast<std::size_t>(size) * size);
            odd.resize(ker.size());
            double sum = 0.0, mass = 0.0;
            for (int dy = -kGaborHalf; dy <= kGaborHalf; ++dy) {
                for (int dx = -kGaborHalf; dx <= kGaborHalf; ++dx) {
                    const double xr = dx * c + dy * s;
                    const double env = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                    const double v = env * std::cos(2.0 * kPi * freq * xr);
                    ker[(dy + kGaborHalf) * size + (dx + kGaborHalf)] = v;
                    odd[(dy + kGaborHalf) * size + (dx + kGaborHalf)] =
                        env * std::sin(2.0 * kPi * freq * xr);
                    sum += v;
                    mass += env;
                }
            }
            envelope_mass = mass;
            // remove the DC component so flat regions give zero response
            const double mean = sum / (size * size);
            for (double& v : ker) v -= mean;
        }
    }

    int bin_for(double angle) const {
        int k = static_cast<int>(std::floor(wrap_orientation(angle) * kGaborOrientations / kPi));
        return std::min(k, kGaborOrientations - 1);
    }
};

}  // namespace

GrayImage gabor_enhance(const GrayImage& img, const OrientationField& of, double ridge_freq,
                        int workers) {
    if (!(ridge_freq > 0.05 && ridge_freq < 0.25))
        throw InputError("ridge frequency must lie in (0.05, 0.25)");
    const double sigma = 0.5 / ridge_freq;
    GaborBank bank(ridge_freq, sigma);

    std::vector<double> response(img.size(), 0.0);
    std::vector<std::uint8_t> has_response(img.size(), 0);
    parallel_for(img.height, workers, [&](std::int64_t yy) {
        const int y = static_cast<int>(yy);
        for (int x = 0; x < img.width; ++x) {
            if (!of.valid(x, y)) continue;
            const std::vector<double>& ker = bank.kernels[bank.bin_for(of.angle(x, y))];
            double acc = 0.0;
            for (int dy = -kGaborHalf; dy <= kGaborHalf; ++dy) {
                const int py = y + dy;
                if (py < 0 || py >= img.height) continue;  // background contributes 0
                for (int dx = -kGaborHalf; dx <= kGaborHalf; ++dx) {
                    const int px = x + dx;
                    if (px < 0 || px >= img.width) continue;
                    acc += ker[(dy + kGaborHalf) * (2 * kGaborHalf + 1) + (dx + kGaborHalf)] *
                           (255.0 - img.at(px, py));
                }
            }
            response[static_cast<std::size_t>(y) * img.width + x] = acc;
            has_response[static_cast<std::size_t>(y) * img.width + x] = 1;
        }
    });

    double mean = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < response.size(); ++i) {
        if (has_response[i]) {
            mean += response[i];
            ++n;
        }
    }
    GrayImage out(img.width, img.height, 255);
    out.dpi = img.dpi;
    if (n == 0) return out;
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < response.size(); ++i)
        if (has_response[i]) out.data[i] = response[i] > mean ? 0 : 255;
    return out;
}

QualityMap ridge_band_energy(const GrayImage& img, const OrientationField& of, double ridge_freq,
                             int workers) {
    if (!(ridge_freq > 0.05 && ridge_freq < 0.25))
        throw InputError("ridge frequency must lie in (0.05, 0.25)");
    const double sigma = 0.5 / ridge_freq;
    GaborBank bank(ridge_freq, sigma);
    const int size = 2 * kGaborHalf + 1;

    QualityMap energy(img.width, img.height, 0.0);
    parallel_for(img.height, workers, [&](std::int64_t yy) {
        const int y = static_cast<int>(yy);
        for (int x = 0; x < img.width; ++x) {
            if (!of.valid(x, y)) continue;
            const int bin = bank.bin_for(of.angle(x, y));
            const std::vector<double>& even = bank.kernels[bin];
            const std::vector<double>& odd = bank.odd_kernels[bin];
            double ev = 0.0, od = 0.0;
            for (int dy = -kGaborHalf; dy <= kGaborHalf; ++dy) {
                const int py = y + dy;
                if (py < 0 || py >= img.height) continue;
                for (int dx = -kGaborHalf; dx <= kGaborHalf; ++dx) {
                    const int px = x + dx;
                    if (px < 0 || px >= img.width) continue;
                    const double v = 255.0 - img.at(px, py);
                    const std::size_t k = static_cast<std::size_t>(dy + kGaborHalf) * size +
                                          (dx + kGaborHalf);
                    ev += even[k] * v;
                    od += odd[k] * v;
                }
            }
            const double e = std::hypot(ev, od) / (bank.envelope_mass * 255.0);
            energy.at(x, y) = std::min(e, 1.0);
        }
    });
    return energy;
}

namespace {

inline bool is_ridge(const GrayImage& img, int x, int y) {
    return img.in_bounds(x, y) && img.at(x, y) == 0;
}

// Zhang-Suen sub-iteration; returns deletions performed.
int thin_pass(GrayImage& img, int step) {
    std::vector<std::pair<int, int>> to_clear;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (!is_ridge(img, x, y)) continue;
            // neighbors p2..p9 clockwise starting north
            const bool p2 = is_ridge(img, x, y - 1);
            const bool p3 = is_ridge(img, x + 1, y - 1);
            const bool p4 = is_ridge(img, x + 1, y);
            const bool p5 = is_ridge(img, x + 1, y + 1);
            const bool p6 = is_ridge(img, x, y + 1);
            const bool p7 = is_ridge(img, x - 1, y + 1);
            const bool p8 = is_ridge(img, x - 1, y);
            const bool p9 = is_ridge(img, x - 1, y - 1);
            const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
            if (b < 2 || b > 6) continue;
            const bool seq[8] = {p2, p3, p4, p5, p6, p7, p8, p9};
            int transitions = 0;
            for (int i = 0; i < 8; ++i)
                if (!seq[i] && seq[(i + 1) % 8]) ++transitions;
            if (transitions != 1) continue;
            if (step == 0) {
                if ((p2 && p4 && p6) || (p4 && p6 && p8)) continue;
            } else {
                if ((p2 && p4 && p8) || (p2 && p6 && p8)) continue;
            }
            to_clear.emplace_back(x, y);
        }
    }
    for (auto [x, y] : to_clear) img.at(x, y) = 255;
    return static_cast<int>(to_clear.size());
}

}  // namespace

GrayImage skeletonize(const GrayImage& binary) {
    for (std::uint8_t v : binary.data)
        if (v != 0 && v != 255) throw InputError("skeletonize expects a binary {0,255} image");
    GrayImage img = binary;
    while (thin_pass(img, 0) + thin_pass(img, 1) > 0) {
    }
    return img;
}

std::vector<Minutia> extract_minutiae(const GrayImage& skeleton, const OrientationField& of,
                                      const QualityMap& q) {
    constexpr int kBorder = 8;
    std::vector<Minutia> out;
    for (int y = 0; y < skeleton.height; ++y) {
        for (int x = 0; x < skeleton.width; ++x) {
            if (!is_ridge(skeleton, x, y)) continue;
            const int p[8] = {
                is_ridge(skeleton, x, y - 1),     is_ridge(skeleton, x + 1, y - 1),
                is_ridge(skeleton, x + 1, y),     is_ridge(skeleton, x + 1, y + 1),
                is_ridge(skeleton, x, y + 1),     is_ridge(skeleton, x - 1, y + 1),
                is_ridge(skeleton, x - 1, y),     is_ridge(skeleton, x - 1, y - 1)};
            int cn2 = 0;
            for (int i = 0; i < 8; ++i) cn2 += std::abs(p[i] - p[(i + 1) % 8]);
            const int cn = cn2 / 2;
            if (cn != 1 && cn != 3) continue;

            // drop anything within 8 px of the ROI border or image edge
            bool interior = true;
            for (int dy = -kBorder; dy <= kBorder && interior; ++dy)
                for (int dx = -kBorder; dx <= kBorder && interior; ++dx) {
                    const int px = x + dx, py = y + dy;
                    if (!of.in_bounds(px, py) || !of.valid(px, py)) interior = false;
                }
            if (!interior) continue;

            Minutia m;
            m.x = x;
            m.y = y;
            m.direction = of.angle(x, y);  // in [0, pi) subset of [0, 2pi)
            m.kind = cn == 1 ? MinutiaKind::RidgeEnding : MinutiaKind::Bifurcation;

            double rel = 0.0;
            int n = 0;
            for (int dy = -8; dy <= 8; ++dy)
                for (int dx = -8; dx <= 8; ++dx) {
                    const int px = x + dx, py = y + dy;
                    if (px < 0 || px >= q.width || py < 0 || py >= q.height) continue;
                    rel += q.at(px, py);
                    ++n;
                }
            m.reliability = n > 0 ? rel / n : 0.0;
            out.push_back(m);
        }
    }
    std::sort(out.begin(), out.end(), [](const Minutia& a, const Minutia& b) {
        if (a.reliability != b.reliability) return a.reliability > b.reliability;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });
    return out;
}

}  // namespace fp
