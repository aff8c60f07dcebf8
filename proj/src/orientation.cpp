#include "fp/orientation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "fp/errors.hpp"
#include "fp/parallel.hpp"

namespace fp {

namespace {

constexpr int kWindow = 17;
constexpr int kHalf = kWindow / 2;

// Sobel gradients, defined on the 1-pixel inset interior; zero elsewhere.
struct Gradients {
    int width = 0, height = 0;
    std::vector<double> gx, gy;
    double at_x(int x, int y) const { return gx[static_cast<std::size_t>(y) * width + x]; }
    double at_y(int x, int y) const { return gy[static_cast<std::size_t>(y) * width + x]; }
};

Gradients sobel(const GrayImage& img) {
    Gradients g;
    g.width = img.width;
    g.height = img.height;
    g.gx.assign(img.size(), 0.0);
    g.gy.assign(img.size(), 0.0);
    for (int y = 1; y < img.height - 1; ++y) {
        for (int x = 1; x < img.width - 1; ++x) {
            const double p00 = img.at(x - 1, y - 1), p10 = img.at(x, y - 1), p20 = img.at(x + 1, y - 1);
            const double p01 = img.at(x - 1, y), p21 = img.at(x + 1, y);
            const double p02 = img.at(x - 1, y + 1), p12 = img.at(x, y + 1), p22 = img.at(x + 1, y + 1);
            g.gx[static_cast<std::size_t>(y) * g.width + x] =
                (p20 + 2.0 * p21 + p22) - (p00 + 2.0 * p01 + p02);
            g.gy[static_cast<std::size_t>(y) * g.width + x] =
                (p02 + 2.0 * p12 + p22) - (p00 + 2.0 * p10 + p20);
        }
    }
    return g;
}

struct StructureSums {
    double gxx = 0.0, gyy = 0.0, gxy = 0.0;
};

// Window sums clipped to the gradient-defined interior.
StructureSums window_sums(const Gradients& g, int cx, int cy) {
    StructureSums s;
    const int x_lo = std::max(1, cx - kHalf), x_hi = std::min(g.width - 2, cx + kHalf);
    const int y_lo = std::max(1, cy - kHalf), y_hi = std::min(g.height - 2, cy + kHalf);
    for (int y = y_lo; y <= y_hi; ++y) {
        for (int x = x_lo; x <= x_hi; ++x) {
            const double gx = g.at_x(x, y), gy = g.at_y(x, y);
            s.gxx += gx * gx;
            s.gyy += gy * gy;
            s.gxy += gx * gy;
        }
    }
    return s;
}

}  // namespace

OrientationField estimate_orientation_field(const GrayImage& img, const BinaryMask& roi,
                                            int workers) {
    if (img.width <= 0 || img.height <= 0) throw InputError("empty image");
    Gradients g = sobel(img);
    OrientationField of(img.width, img.height);
    parallel_for(img.height, workers, [&](std::int64_t y) {
        for (int x = 0; x < img.width; ++x) {
            if (!roi.at(x, static_cast<int>(y))) continue;
            StructureSums s = window_sums(g, x, static_cast<int>(y));
            if (s.gxx + s.gyy <= 0.0) continue;
            // Dominant gradient direction, then rotate a quarter turn to get
            // the ridge direction.
            const double phi = 0.5 * std::atan2(2.0 * s.gxy, s.gxx - s.gyy);
            of.angle(x, static_cast<int>(y)) = wrap_orientation(phi + kPi / 2.0);
            of.validity.set(x, static_cast<int>(y), true);
        }
    });
    return of;
}

QualityMap coherence_quality_map(const GrayImage& img, int workers) {
    if (img.width < kWindow || img.height < kWindow)
        throw InputError("coherence needs at least a 17x17 image");
    Gradients g = sobel(img);
    QualityMap q(img.width, img.height, 0.0);
    parallel_for(img.height, workers, [&](std::int64_t y) {
        for (int x = 0; x < img.width; ++x) {
            StructureSums s = window_sums(g, x, static_cast<int>(y));
            const double denom = s.gxx + s.gyy;
            if (denom <= 0.0) continue;
            const double num =
                std::sqrt((s.gxx - s.gyy) * (s.gxx - s.gyy) + 4.0 * s.gxy * s.gxy);
            double v = num / denom;
            if (v > 1.0) v = 1.0;
            q.at(x, static_cast<int>(y)) = v;
        }
    });
    return q;
}

BinaryMask quality_mask(const QualityMap& q, double threshold) {
    if (threshold < 0.0 || threshold > 1.0)
        throw InputError("quality threshold must lie in [0, 1]");
    BinaryMask mask(q.width, q.height);
    for (std::size_t i = 0; i < q.data.size(); ++i) mask.data[i] = q.data[i] >= threshold ? 1 : 0;
    return mask;
}

namespace {

// Per-axis Fourier features: [1, cos(w u), sin(w u), cos(2 w u), ...].
void axis_basis(double u, double omega, int order, double* out) {
    out[0] = 1.0;
    for (int m = 1; m <= order; ++m) {
        out[2 * m - 1] = std::cos(m * omega * u);
        out[2 * m] = std::sin(m * omega * u);
    }
}

}  // namespace

FomfeModel fomfe_fit(const OrientationField& of, int order) {
    if (order < 1) throw InputError("FOMFE order must be >= 1");
    const int axis = 2 * order + 1;
    const int n_basis = axis * axis;

    std::size_t n_valid = of.validity.count();
    if (n_valid < static_cast<std::size_t>(n_basis))
        throw PipelineError("fomfe", "too few valid pixels for order " + std::to_string(order));

    const double omega_x = 2.0 * kPi / of.width;
    const double omega_y = 2.0 * kPi / of.height;

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_basis, n_basis);
    Eigen::VectorXd rhs_c = Eigen::VectorXd::Zero(n_basis);
    Eigen::VectorXd rhs_s = Eigen::VectorXd::Zero(n_basis);

    std::vector<double> bx(axis), by(axis), phi(n_basis);
    for (int y = 0; y < of.height; ++y) {
        axis_basis(y, omega_y, order, by.data());
        for (int x = 0; x < of.width; ++x) {
            if (!of.valid(x, y)) continue;
            axis_basis(x, omega_x, order, bx.data());
            for (int j = 0; j < axis; ++j)
                for (int i = 0; i < axis; ++i) phi[j * axis + i] = by[j] * bx[i];
            const double a2 = 2.0 * of.angle(x, y);
            const double tc = std::cos(a2), ts = std::sin(a2);
            for (int j = 0; j < n_basis; ++j) {
                rhs_c[j] += phi[j] * tc;
                rhs_s[j] += phi[j] * ts;
                for (int i = j; i < n_basis; ++i) a(j, i) += phi[j] * phi[i];
            }
        }
    }
    for (int j = 0; j < n_basis; ++j)
        for (int i = 0; i < j; ++i) a(j, i) = a(i, j);
    a.diagonal().array() += 1e-8;  // Tikhonov damping for near-degenerate masks

    Eigen::LDLT<Eigen::MatrixXd> solver(a);
    if (solver.info() != Eigen::Success)
        throw PipelineError("fomfe", "rank-deficient normal equations");
    Eigen::VectorXd cc = solver.solve(rhs_c);
    Eigen::VectorXd cs = solver.solve(rhs_s);

    FomfeModel m;
    m.order = order;
    m.width = of.width;
    m.height = of.height;
    m.coeff_cos.assign(cc.data(), cc.data() + n_basis);
    m.coeff_sin.assign(cs.data(), cs.data() + n_basis);

    double sq = 0.0;
    for (int y = 0; y < of.height; ++y) {
        axis_basis(y, omega_y, order, by.data());
        for (int x = 0; x < of.width; ++x) {
            if (!of.valid(x, y)) continue;
            axis_basis(x, omega_x, order, bx.data());
            double fc = 0.0, fs = 0.0;
            for (int j = 0; j < axis; ++j)
                for (int i = 0; i < axis; ++i) {
                    const double p = by[j] * bx[i];
                    fc += p * m.coeff_cos[j * axis + i];
                    fs += p * m.coeff_sin[j * axis + i];
                }
            const double a2 = 2.0 * of.angle(x, y);
            const double dc = fc - std::cos(a2), ds = fs - std::sin(a2);
            sq += dc * dc + ds * ds;
        }
    }
    m.residual = sq / static_cast<double>(n_valid);
    return m;
}

OrientationField fomfe_eval(const FomfeModel& m, const BinaryMask& region) {
    OrientationField of(region.width, region.height);
    const int axis = 2 * m.order + 1;
    const double omega_x = 2.0 * kPi / m.width;
    const double omega_y = 2.0 * kPi / m.height;
    std::vector<double> bx(axis), by(axis);
    for (int y = 0; y < region.height; ++y) {
        axis_basis(y, omega_y, m.order, by.data());
        for (int x = 0; x < region.width; ++x) {
            if (!region.at(x, y)) continue;
            axis_basis(x, omega_x, m.order, bx.data());
            double fc = 0.0, fs = 0.0;
            for (int j = 0; j < axis; ++j) {
                double rc = 0.0, rs = 0.0;
                for (int i = 0; i < axis; ++i) {
                    rc += bx[i] * m.coeff_cos[j * axis + i];
                    rs += bx[i] * m.coeff_sin[j * axis + i];
                }
                fc += by[j] * rc;
                fs += by[j] * rs;
            }
            of.angle(x, y) = wrap_orientation(0.5 * std::atan2(fs, fc));
            of.validity.set(x, y, true);
        }
    }
    return of;
}

}  // namespace fp
