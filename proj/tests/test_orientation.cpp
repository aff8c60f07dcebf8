#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fp/errors.hpp"
#include "fp/orientation.hpp"
#include "fp/reference.hpp"

using namespace fp;

namespace {

GrayImage stripes(int w, int h, double angle, double period = 8.0) {
    // ridge orientation `angle`: intensity varies along the perpendicular
    GrayImage img(w, h);
    const double nx = std::cos(angle + kPi / 2.0), ny = std::sin(angle + kPi / 2.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(x, y) = static_cast<std::uint8_t>(
                128 + 100 * std::sin(2.0 * kPi * (x * nx + y * ny) / period));
    return img;
}

GrayImage random_image(int w, int h, std::uint64_t seed) {
    GrayImage img(w, h);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(byte(rng));
    return img;
}

}  // namespace

TEST_CASE("coherence equals the triple-loop oracle on random images") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        GrayImage img = random_image(32, 32, 100 + seed);
        QualityMap fast = coherence_quality_map(img, 2);
        QualityMap slow = ref::coherence_quality_map(img);
        double max_err = 0.0;
        for (std::size_t i = 0; i < fast.data.size(); ++i) {
            max_err = std::max(max_err, std::fabs(fast.data[i] - slow.data[i]));
            CHECK(fast.data[i] >= 0.0);
            CHECK(fast.data[i] <= 1.0);
        }
        CHECK(max_err <= 1e-10);
    }
}

TEST_CASE("parallel stripes give near-perfect interior coherence") {
    GrayImage img = stripes(64, 64, kPi / 2.0);
    QualityMap q = coherence_quality_map(img);
    for (int y = 10; y < 54; ++y)
        for (int x = 10; x < 54; ++x) CHECK(q.at(x, y) >= 0.99);
}

TEST_CASE("isotropic structure gives zero coherence") {
    // gxx == gyy and gxy == 0 by symmetry at the center of a radially
    // symmetric pattern; check the analytic degenerate case instead with a
    // checkerboard whose window sums balance
    GrayImage img(33, 33);
    for (int y = 0; y < 33; ++y)
        for (int x = 0; x < 33; ++x) img.at(x, y) = ((x + y) % 2) ? 255 : 0;
    // diagonal checkerboard: gradients alternate so Gxy sums cancel and the
    // numerator collapses; quality should be tiny at the center
    QualityMap q = coherence_quality_map(img);
    CHECK(q.at(16, 16) <= 0.05);

    GrayImage flat(33, 33, 128);
    QualityMap qf = coherence_quality_map(flat);
    CHECK(qf.at(16, 16) == 0.0);  // denominator guard
}

TEST_CASE("coherence is invariant to constant intensity offsets") {
    GrayImage img = random_image(32, 32, 9);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(40 + (v % 150));
    GrayImage shifted = img;
    for (auto& v : shifted.data) v = static_cast<std::uint8_t>(v + 20);
    QualityMap a = coherence_quality_map(img);
    QualityMap b = coherence_quality_map(shifted);
    for (std::size_t i = 0; i < a.data.size(); ++i)
        CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-12));
}

TEST_CASE("orientation estimation matches analytic stripe direction") {
    BinaryMask roi(64, 64, true);

    GrayImage vertical = stripes(64, 64, kPi / 2.0);
    OrientationField of = estimate_orientation_field(vertical, roi);
    for (int y = 12; y < 52; ++y)
        for (int x = 12; x < 52; ++x) {
            REQUIRE(of.valid(x, y));
            CHECK(orientation_distance(of.angle(x, y), kPi / 2.0) < 0.05);
        }

    GrayImage diag = stripes(64, 64, kPi / 4.0);
    OrientationField of45 = estimate_orientation_field(diag, roi);
    for (int y = 12; y < 52; ++y)
        for (int x = 12; x < 52; ++x) CHECK(orientation_distance(of45.angle(x, y), kPi / 4.0) < 0.05);

    GrayImage flat(64, 64, 77);
    OrientationField none = estimate_orientation_field(flat, roi);
    CHECK(none.validity.count() == 0);
}

TEST_CASE("optimized and reference orientation estimates agree") {
    GrayImage img = random_image(48, 48, 21);
    BinaryMask roi(48, 48, true);
    OrientationField a = estimate_orientation_field(img, roi, 2);
    OrientationField b = ref::estimate_orientation_field(img, roi);
    for (std::size_t i = 0; i < a.angles.size(); ++i) {
        CHECK(a.validity.data[i] == b.validity.data[i]);
        if (a.validity.data[i]) CHECK(orientation_distance(a.angles[i], b.angles[i]) < 1e-9);
    }
}

TEST_CASE("quality mask thresholding") {
    QualityMap q(3, 1);
    q.data = {0.89, 0.9, 0.91};
    BinaryMask m = quality_mask(q, 0.9);
    CHECK_FALSE(m.at(0, 0));
    CHECK(m.at(1, 0));
    CHECK(m.at(2, 0));

    QualityMap ones(4, 4, 1.0);
    CHECK(quality_mask(ones).count() == 16);
    QualityMap zeros(4, 4, 0.0);
    CHECK(quality_mask(zeros).count() == 0);
    CHECK_THROWS_AS(quality_mask(ones, 1.5), InputError);
}

namespace {

OrientationField constant_field(int w, int h, double angle) {
    OrientationField of(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            of.angle(x, y) = angle;
            of.validity.set(x, y, true);
        }
    return of;
}

// Smooth synthetic field with a closed form, used for inpainting checks.
double smooth_angle(int x, int y, int w, int h) {
    return wrap_orientation(0.8 + 0.5 * std::sin(2.0 * kPi * x / w) +
                            0.4 * std::cos(2.0 * kPi * y / h));
}

// Hand-rolled least squares on the same basis via Gaussian elimination;
// independent of the Eigen-backed implementation.
double lsq_residual_oracle(const OrientationField& of, int order) {
    const int axis = 2 * order + 1;
    const int nb = axis * axis;
    const double wx = 2.0 * kPi / of.width, wy = 2.0 * kPi / of.height;
    auto basis = [&](int x, int y, std::vector<double>& phi) {
        std::vector<double> bx(axis), by(axis);
        bx[0] = by[0] = 1.0;
        for (int m = 1; m <= order; ++m) {
            bx[2 * m - 1] = std::cos(m * wx * x);
            bx[2 * m] = std::sin(m * wx * x);
            by[2 * m - 1] = std::cos(m * wy * y);
            by[2 * m] = std::sin(m * wy * y);
        }
        for (int j = 0; j < axis; ++j)
            for (int i = 0; i < axis; ++i) phi[j * axis + i] = by[j] * bx[i];
    };
    std::vector<double> a(static_cast<std::size_t>(nb) * nb, 0.0), rc(nb, 0.0), rs(nb, 0.0),
        phi(nb);
    long n = 0;
    for (int y = 0; y < of.height; ++y)
        for (int x = 0; x < of.width; ++x) {
            if (!of.valid(x, y)) continue;
            basis(x, y, phi);
            const double c = std::cos(2 * of.angle(x, y)), s = std::sin(2 * of.angle(x, y));
            for (int j = 0; j < nb; ++j) {
                rc[j] += phi[j] * c;
                rs[j] += phi[j] * s;
                for (int i = 0; i < nb; ++i) a[static_cast<std::size_t>(j) * nb + i] += phi[j] * phi[i];
            }
            ++n;
        }
    for (int j = 0; j < nb; ++j) a[static_cast<std::size_t>(j) * nb + j] += 1e-8;
    // solve two systems by Gaussian elimination with partial pivoting
    auto solve = [&](std::vector<double> m, std::vector<double> b) {
        for (int col = 0; col < nb; ++col) {
            int piv = col;
            for (int r = col + 1; r < nb; ++r)
                if (std::fabs(m[static_cast<std::size_t>(r) * nb + col]) >
                    std::fabs(m[static_cast<std::size_t>(piv) * nb + col]))
                    piv = r;
            for (int c2 = 0; c2 < nb; ++c2)
                std::swap(m[static_cast<std::size_t>(col) * nb + c2],
                          m[static_cast<std::size_t>(piv) * nb + c2]);
            std::swap(b[col], b[piv]);
            const double d = m[static_cast<std::size_t>(col) * nb + col];
            for (int r = 0; r < nb; ++r) {
                if (r == col) continue;
                const double f = m[static_cast<std::size_t>(r) * nb + col] / d;
                for (int c2 = col; c2 < nb; ++c2)
                    m[static_cast<std::size_t>(r) * nb + c2] -=
                        f * m[static_cast<std::size_t>(col) * nb + c2];
                b[r] -= f * b[col];
            }
        }
        for (int r = 0; r < nb; ++r) b[r] /= m[static_cast<std::size_t>(r) * nb + r];
        return b;
    };
    std::vector<double> cc = solve(a, rc), cs = solve(a, rs);
    double sq = 0.0;
    for (int y = 0; y < of.height; ++y)
        for (int x = 0; x < of.width; ++x) {
            if (!of.valid(x, y)) continue;
            basis(x, y, phi);
            double fc = 0.0, fs = 0.0;
            for (int j = 0; j < nb; ++j) {
                fc += phi[j] * cc[j];
                fs += phi[j] * cs[j];
            }
            const double dc = fc - std::cos(2 * of.angle(x, y));
            const double ds = fs - std::sin(2 * of.angle(x, y));
            sq += dc * dc + ds * ds;
        }
    return sq / static_cast<double>(n);
}

}  // namespace

TEST_CASE("fomfe reproduces constant fields exactly") {
    OrientationField of = constant_field(40, 40, kPi / 3.0);
    FomfeModel m = fomfe_fit(of, 2);
    BinaryMask all(40, 40, true);
    OrientationField back = fomfe_eval(m, all);
    for (std::size_t i = 0; i < back.angles.size(); ++i)
        CHECK(orientation_distance(back.angles[i], kPi / 3.0) < 1e-8);
}

TEST_CASE("fomfe residual beats input noise and matches the normal-equation oracle") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> noise(-0.2, 0.2);
    OrientationField of(48, 48);
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x) {
            of.angle(x, y) = wrap_orientation(1.0 + noise(rng));
            of.validity.set(x, y, true);
        }
    FomfeModel m = fomfe_fit(of, 4);

    // doubled-angle noise variance around the circular mean
    double sc = 0.0, ss = 0.0;
    for (double a : of.angles) {
        sc += std::cos(2 * a);
        ss += std::sin(2 * a);
    }
    sc /= of.angles.size();
    ss /= of.angles.size();
    double var = 0.0;
    for (double a : of.angles) {
        const double dc = std::cos(2 * a) - sc, ds = std::sin(2 * a) - ss;
        var += dc * dc + ds * ds;
    }
    var /= of.angles.size();
    CHECK(m.residual < var);

    const double oracle = lsq_residual_oracle(of, 2);
    FomfeModel m2 = fomfe_fit(of, 2);
    CHECK(m2.residual == doctest::Approx(oracle).epsilon(1e-6));
}

TEST_CASE("fomfe residual is non-increasing in the order") {
    OrientationField of(40, 40);
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 40; ++x) {
            of.angle(x, y) = smooth_angle(x, y, 40, 40);
            of.validity.set(x, y, true);
        }
    const double r2 = fomfe_fit(of, 2).residual;
    const double r3 = fomfe_fit(of, 3).residual;
    const double r4 = fomfe_fit(of, 4).residual;
    CHECK(r3 <= r2 + 1e-10);
    CHECK(r4 <= r3 + 1e-10);
}

TEST_CASE("fomfe inpaints a masked hole") {
    OrientationField of(64, 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            of.angle(x, y) = smooth_angle(x, y, 64, 64);
            const bool hole = x >= 24 && x < 40 && y >= 24 && y < 40;
            of.validity.set(x, y, !hole);
        }
    FomfeModel m = fomfe_fit(of, 4);
    BinaryMask hole(64, 64, false);
    for (int y = 24; y < 40; ++y)
        for (int x = 24; x < 40; ++x) hole.set(x, y, true);
    OrientationField filled = fomfe_eval(m, hole);
    for (int y = 24; y < 40; ++y)
        for (int x = 24; x < 40; ++x) {
            REQUIRE(filled.valid(x, y));
            CHECK(orientation_distance(filled.angle(x, y), smooth_angle(x, y, 64, 64)) < 0.1);
            CHECK(filled.angle(x, y) >= 0.0);
            CHECK(filled.angle(x, y) < kPi);
        }

    BinaryMask empty(64, 64, false);
    OrientationField nothing = fomfe_eval(m, empty);
    CHECK(nothing.validity.count() == 0);
}

TEST_CASE("fomfe rejects degenerate masks") {
    OrientationField of(32, 32);  // no valid pixels at all
    CHECK_THROWS_AS(fomfe_fit(of, 4), PipelineError);
}
