#pragma once

#include <cmath>

namespace fp {

inline constexpr double kPi = 3.14159265358979323846;

// Wrap an angle into [0, pi). Ridge orientations are pi-periodic.
inline double wrap_orientation(double a) {
    a = std::fmod(a, kPi);
    if (a < 0.0) a += kPi;
    if (a >= kPi) a -= kPi;  // fmod can land exactly on pi after the add
    return a;
}

// Signed pi-periodic difference, wrapped into (-pi/2, pi/2].
inline double wrap_signed_half_pi(double d) {
    d = std::fmod(d, kPi);
    if (d > kPi / 2.0) d -= kPi;
    if (d <= -kPi / 2.0) d += kPi;
    return d;
}

// lambda(a, b) = min(|a-b|, pi-|a-b|), the unsigned pi-periodic distance.
// Range [0, pi/2].
inline double orientation_distance(double a, double b) {
    double d = std::fabs(a - b);
    d = std::fmod(d, kPi);
    return std::min(d, kPi - d);
}

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

// Rigid 2-D map: v -> R(dtheta) * (v - c) + c + (dx, dy), rotating about the
// stated center c. dtheta in radians, counterclockwise in image coordinates
// (y down), translation in pixels.
struct RigidTransform {
    double dx = 0.0;
    double dy = 0.0;
    double dtheta = 0.0;
    double cx = 0.0;
    double cy = 0.0;

    static RigidTransform identity() { return {}; }

    Vec2 apply(double x, double y) const {
        const double c = std::cos(dtheta), s = std::sin(dtheta);
        const double rx = x - cx, ry = y - cy;
        return {c * rx - s * ry + cx + dx, s * rx + c * ry + cy + dy};
    }

    RigidTransform inverse() const {
        const double c = std::cos(dtheta), s = std::sin(dtheta);
        // d' = -R(-dtheta) * d
        RigidTransform t;
        t.dtheta = -dtheta;
        t.cx = cx;
        t.cy = cy;
        t.dx = -(c * dx + s * dy);
        t.dy = -(-s * dx + c * dy);
        return t;
    }

    // this after other: v -> this(other(v)).
    RigidTransform compose(const RigidTransform& other) const {
        RigidTransform t;
        t.dtheta = dtheta + other.dtheta;
        t.cx = cx;
        t.cy = cy;
        // Image of the center under the composite fixes the translation.
        Vec2 mid = other.apply(cx, cy);
        Vec2 m = apply(mid.x, mid.y);
        t.dx = m.x - cx;
        t.dy = m.y - cy;
        return t;
    }

    // Same map re-parameterized about a different rotation center.
    RigidTransform with_center(double ncx, double ncy) const {
        RigidTransform t;
        t.dtheta = dtheta;
        t.cx = ncx;
        t.cy = ncy;
        Vec2 m = apply(ncx, ncy);
        t.dx = m.x - ncx;
        t.dy = m.y - ncy;
        return t;
    }
};

}  // namespace fp
