#include "fp/resample.hpp"

#include <algorithm>
#include <cmath>

#include "fp/errors.hpp"
#include "fp/parallel.hpp"

namespace fp {

namespace {

struct BilinearTaps {
    int x0, y0, x1, y1;
    double fx, fy;
    bool inside;
};

inline BilinearTaps taps_for(double x, double y, int w, int h) {
    BilinearTaps t{};
    t.inside = x >= 0.0 && y >= 0.0 && x <= w - 1.0 && y <= h - 1.0;
    if (!t.inside) return t;
    t.x0 = static_cast<int>(std::floor(x));
    t.y0 = static_cast<int>(std::floor(y));
    if (t.x0 > w - 2) t.x0 = w - 2;
    if (t.y0 > h - 2) t.y0 = h - 2;
    if (t.x0 < 0) t.x0 = 0;
    if (t.y0 < 0) t.y0 = 0;
    t.x1 = t.x0 + 1;
    t.y1 = t.y0 + 1;
    t.fx = x - t.x0;
    t.fy = y - t.y0;
    return t;
}

// Half-pixel-center source coordinate; exact identity when sizes match.
inline double src_coord(int dst, int dst_size, int src_size) {
    if (dst_size == src_size) return dst;
    const double scale = static_cast<double>(src_size) / dst_size;
    return (dst + 0.5) * scale - 0.5;
}

}  // namespace

double sample_bilinear(const GrayImage& img, double x, double y, double fill) {
    if (img.width == 1 && img.height == 1) return img.data[0];
    BilinearTaps t = taps_for(x, y, img.width, img.height);
    if (!t.inside) return fill;
    const double a = img.at(t.x0, t.y0), b = img.at(t.x1, t.y0);
    const double c = img.at(t.x0, t.y1), d = img.at(t.x1, t.y1);
    const double top = a + t.fx * (b - a);
    const double bot = c + t.fx * (d - c);
    return top + t.fy * (bot - top);
}

GrayImage apply_rigid(const GrayImage& img, const RigidTransform& t, double fill) {
    GrayImage out(img.width, img.height);
    out.dpi = img.dpi;
    const RigidTransform inv = t.inverse();
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            Vec2 src = inv.apply(x, y);
            double v = sample_bilinear(img, src.x, src.y, fill);
            double r = std::nearbyint(v);
            out.at(x, y) = static_cast<std::uint8_t>(r < 0 ? 0 : (r > 255 ? 255 : r));
        }
    }
    return out;
}

OrientationField apply_rigid(const OrientationField& of, const RigidTransform& t) {
    OrientationField out(of.width, of.height);
    const RigidTransform inv = t.inverse();
    for (int y = 0; y < of.height; ++y) {
        for (int x = 0; x < of.width; ++x) {
            Vec2 src = inv.apply(x, y);
            BilinearTaps tp = taps_for(src.x, src.y, of.width, of.height);
            if (!tp.inside) continue;
            const double w00 = (1.0 - tp.fx) * (1.0 - tp.fy);
            const double w10 = tp.fx * (1.0 - tp.fy);
            const double w01 = (1.0 - tp.fx) * tp.fy;
            const double w11 = tp.fx * tp.fy;
            double vc = 0.0, vs = 0.0, wsum = 0.0;
            auto tap = [&](int px, int py, double w) {
                if (w == 0.0 || !of.valid(px, py)) return;
                const double a2 = 2.0 * of.angle(px, py);
                vc += w * std::cos(a2);
                vs += w * std::sin(a2);
                wsum += w;
            };
            tap(tp.x0, tp.y0, w00);
            tap(tp.x1, tp.y0, w10);
            tap(tp.x0, tp.y1, w01);
            tap(tp.x1, tp.y1, w11);
            if (wsum < 0.5) continue;
            const double ang = 0.5 * std::atan2(vs, vc) + t.dtheta;
            out.angle(x, y) = wrap_orientation(ang);
            out.validity.set(x, y, true);
        }
    }
    return out;
}

BinaryMask apply_rigid(const BinaryMask& mask, const RigidTransform& t) {
    GrayImage tmp(mask.width, mask.height);
    for (std::size_t i = 0; i < tmp.size(); ++i) tmp.data[i] = mask.data[i] ? 255 : 0;
    GrayImage warped = apply_rigid(tmp, t, 0.0);
    BinaryMask out(mask.width, mask.height);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = warped.data[i] >= 128 ? 1 : 0;
    return out;
}

GrayImage resize_bilinear(const GrayImage& img, int new_w, int new_h) {
    if (new_w < 1 || new_h < 1) throw InputError("resize target must be at least 1x1");
    GrayImage out(new_w, new_h);
    out.dpi = img.dpi;
    for (int y = 0; y < new_h; ++y) {
        const double sy = src_coord(y, new_h, img.height);
        for (int x = 0; x < new_w; ++x) {
            const double sx = src_coord(x, new_w, img.width);
            double v = sample_bilinear(img, std::clamp(sx, 0.0, img.width - 1.0),
                                       std::clamp(sy, 0.0, img.height - 1.0), 255.0);
            double r = std::nearbyint(v);
            out.at(x, y) = static_cast<std::uint8_t>(r < 0 ? 0 : (r > 255 ? 255 : r));
        }
    }
    return out;
}

OrientationField resize_bilinear(const OrientationField& of, int new_w, int new_h) {
    if (new_w < 1 || new_h < 1) throw InputError("resize target must be at least 1x1");
    OrientationField out(new_w, new_h);
    for (int y = 0; y < new_h; ++y) {
        const double sy = std::clamp(src_coord(y, new_h, of.height), 0.0, of.height - 1.0);
        for (int x = 0; x < new_w; ++x) {
            const double sx = std::clamp(src_coord(x, new_w, of.width), 0.0, of.width - 1.0);
            BilinearTaps tp = taps_for(sx, sy, of.width, of.height);
            if (!tp.inside) continue;
            const double w00 = (1.0 - tp.fx) * (1.0 - tp.fy);
            const double w10 = tp.fx * (1.0 - tp.fy);
            const double w01 = (1.0 - tp.fx) * tp.fy;
            const double w11 = tp.fx * tp.fy;
            double vc = 0.0, vs = 0.0, wsum = 0.0;
            auto tap = [&](int px, int py, double w) {
                if (w == 0.0 || !of.valid(px, py)) return;
                const double a2 = 2.0 * of.angle(px, py);
                vc += w * std::cos(a2);
                vs += w * std::sin(a2);
                wsum += w;
            };
            tap(tp.x0, tp.y0, w00);
            tap(tp.x1, tp.y0, w10);
            tap(tp.x0, tp.y1, w01);
            tap(tp.x1, tp.y1, w11);
            if (wsum < 0.5) continue;
            out.angle(x, y) = wrap_orientation(0.5 * std::atan2(vs, vc));
            out.validity.set(x, y, true);
        }
    }
    return out;
}

std::vector<float> resize_bilinear_plane(const std::vector<float>& plane, int w, int h, int new_w,
                                         int new_h) {
    if (new_w < 1 || new_h < 1) throw InputError("resize target must be at least 1x1");
    std::vector<float> out(static_cast<std::size_t>(new_w) * new_h);
    for (int y = 0; y < new_h; ++y) {
        const double sy = std::clamp(src_coord(y, new_h, h), 0.0, h - 1.0);
        const int y0 = std::min(static_cast<int>(sy), h - (h > 1 ? 2 : 1));
        const double fy = sy - y0;
        const int y1 = h > 1 ? y0 + 1 : y0;
        for (int x = 0; x < new_w; ++x) {
            const double sx = std::clamp(src_coord(x, new_w, w), 0.0, w - 1.0);
            const int x0 = std::min(static_cast<int>(sx), w - (w > 1 ? 2 : 1));
            const double fx = sx - x0;
            const int x1 = w > 1 ? x0 + 1 : x0;
            const double a = plane[static_cast<std::size_t>(y0) * w + x0];
            const double b = plane[static_cast<std::size_t>(y0) * w + x1];
            const double c = plane[static_cast<std::size_t>(y1) * w + x0];
            const double d = plane[static_cast<std::size_t>(y1) * w + x1];
            const double top = a + fx * (b - a);
            const double bot = c + fx * (d - c);
            out[static_cast<std::size_t>(y) * new_w + x] = static_cast<float>(top + fy * (bot - top));
        }
    }
    return out;
}

}  // namespace fp
