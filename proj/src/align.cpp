#include "fp/align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "fp/parallel.hpp"

namespace fp {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

inline std::int64_t pack_qr(int q, int r) {
    return (static_cast<std::int64_t>(q) << 32) ^ (static_cast<std::int64_t>(r) & 0xffffffffLL);
}

// Pixel offset from the anchor -> axial cell, cube rounding.
inline void axial_for(double dx, double dy, double side, int& q_out, int& r_out) {
    const double qf = (kSqrt3 / 3.0 * dx - dy / 3.0) / side;
    const double rf = (2.0 / 3.0 * dy) / side;
    double x = qf, z = rf, y = -x - z;
    double rx = std::round(x), ry = std::round(y), rz = std::round(z);
    const double ex = std::fabs(rx - x), ey = std::fabs(ry - y), ez = std::fabs(rz - z);
    if (ex > ey && ex > ez)
        rx = -ry - rz;
    else if (ey > ez)
        ry = -rx - rz;
    else
        rz = -rx - ry;
    q_out = static_cast<int>(rx);
    r_out = static_cast<int>(rz);
}

struct CellAccum {
    double sum_cos = 0.0, sum_sin = 0.0;
    int valid = 0, total = 0;
};

// Fixed neighbor order E, NE, NW, W, SW, SE in axial coordinates.
constexpr int kNeighborQ[6] = {1, 1, 0, -1, -1, 0};
constexpr int kNeighborR[6] = {0, -1, -1, 0, 1, 1};

}  // namespace

const HexElement* HexPartition::find(int q, int r) const {
    auto it = index.find(pack_qr(q, r));
    return it == index.end() ? nullptr : &elements[it->second];
}

HexPartition hex_partition(const OrientationField& of, Vec2 center, double side) {
    HexPartition part;
    part.center = center;
    part.side = side;

    std::unordered_map<std::int64_t, CellAccum> cells;
    cells.reserve(static_cast<std::size_t>(of.width) * of.height / (side * side * 2.0) + 8);
    for (int y = 0; y < of.height; ++y) {
        for (int x = 0; x < of.width; ++x) {
            int q, r;
            axial_for(x - center.x, y - center.y, side, q, r);
            CellAccum& c = cells[pack_qr(q, r)];
            ++c.total;
            if (of.valid(x, y)) {
                ++c.valid;
                const double a2 = 2.0 * of.angle(x, y);
                c.sum_cos += std::cos(a2);
                c.sum_sin += std::sin(a2);
            }
        }
    }

    part.elements.reserve(cells.size());
    for (const auto& [key, acc] : cells) {
        HexElement e;
        e.q = static_cast<int>(key >> 32);
        e.r = static_cast<int>(static_cast<std::int32_t>(key & 0xffffffffLL));
        e.valid_pixels = acc.valid;
        e.total_pixels = acc.total;
        e.valid = acc.valid > 0 && 2 * acc.valid >= acc.total;
        if (e.valid) e.avg_orientation = wrap_orientation(0.5 * std::atan2(acc.sum_sin, acc.sum_cos));
        part.elements.push_back(e);
    }
    std::sort(part.elements.begin(), part.elements.end(), [](const HexElement& a, const HexElement& b) {
        return a.r != b.r ? a.r < b.r : a.q < b.q;
    });
    for (std::size_t i = 0; i < part.elements.size(); ++i)
        part.index[pack_qr(part.elements[i].q, part.elements[i].r)] = static_cast<int>(i);
    return part;
}

std::optional<HexFeatureVector> minutia_feature_vector(const HexPartition& part) {
    const HexElement* center = part.find(0, 0);
    if (!center || !center->valid) return std::nullopt;
    HexFeatureVector fv;
    for (int i = 0; i < 6; ++i) {
        const HexElement* n = part.find(kNeighborQ[i], kNeighborR[i]);
        if (!n || !n->valid) return std::nullopt;
        fv.rel[i] = wrap_signed_half_pi(center->avg_orientation - n->avg_orientation);
    }
    return fv;
}

std::vector<std::pair<int, int>> candidate_pairs(const std::vector<HexFeatureVector>& fvs_latent,
                                                 const std::vector<HexFeatureVector>& fvs_ref,
                                                 double keep_fraction) {
    std::vector<std::pair<int, int>> kept;
    if (fvs_latent.empty() || fvs_ref.empty()) return kept;

    struct Scored {
        double dist;
        int i, j;
    };
    std::vector<Scored> all;
    all.reserve(fvs_latent.size() * fvs_ref.size());
    for (int i = 0; i < static_cast<int>(fvs_latent.size()); ++i) {
        for (int j = 0; j < static_cast<int>(fvs_ref.size()); ++j) {
            double sq = 0.0;
            for (int k = 0; k < 6; ++k) {
                const double d = orientation_distance(fvs_latent[i].rel[k], fvs_ref[j].rel[k]);
                sq += d * d;
            }
            all.push_back({std::sqrt(sq), i, j});
        }
    }
    const std::size_t keep = static_cast<std::size_t>(
        std::ceil(keep_fraction * static_cast<double>(all.size())));
    std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    kept.reserve(keep);
    for (std::size_t k = 0; k < keep && k < all.size(); ++k) kept.emplace_back(all[k].i, all[k].j);
    return kept;
}

OrientPlanes OrientPlanes::from(const OrientationField& of) {
    OrientPlanes p;
    p.width = of.width;
    p.height = of.height;
    p.cos2.resize(of.angles.size());
    p.sin2.resize(of.angles.size());
    p.valid.resize(of.angles.size());
    for (std::size_t i = 0; i < of.angles.size(); ++i) {
        p.cos2[i] = std::cos(2.0 * of.angles[i]);
        p.sin2[i] = std::sin(2.0 * of.angles[i]);
        p.valid[i] = of.validity.data[i];
    }
    return p;
}

namespace {

constexpr int kMinOverlapElements = 5;

// Core cost: tile P's raster about its center, average P and the
// inverse-mapped Q per cell, mean lambda over co-valid cells.
double cost_with_planes(const OrientationField& p, const OrientPlanes& q,
                        const RigidTransform& t, double side) {
    const Vec2 center{(p.width - 1) / 2.0, (p.height - 1) / 2.0};
    const RigidTransform inv = t.inverse();
    const double rc = std::cos(2.0 * t.dtheta), rs = std::sin(2.0 * t.dtheta);

    std::unordered_map<std::int64_t, CellAccum> cells_p, cells_q;
    for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) {
            int cq, cr;
            axial_for(x - center.x, y - center.y, side, cq, cr);
            const std::int64_t key = pack_qr(cq, cr);

            CellAccum& ap = cells_p[key];
            ++ap.total;
            if (p.valid(x, y)) {
                ++ap.valid;
                const double a2 = 2.0 * p.angle(x, y);
                ap.sum_cos += std::cos(a2);
                ap.sum_sin += std::sin(a2);
            }

            CellAccum& aq = cells_q[key];
            ++aq.total;
            const Vec2 src = inv.apply(x, y);
            if (src.x >= 0.0 && src.y >= 0.0 && src.x <= q.width - 1.0 && src.y <= q.height - 1.0) {
                int x0 = std::min(static_cast<int>(src.x), q.width - 2);
                int y0 = std::min(static_cast<int>(src.y), q.height - 2);
                if (x0 < 0) x0 = 0;
                if (y0 < 0) y0 = 0;
                const double fx = src.x - x0, fy = src.y - y0;
                const double w[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
                const std::size_t i00 = static_cast<std::size_t>(y0) * q.width + x0;
                const std::size_t idx[4] = {i00, i00 + 1, i00 + q.width, i00 + q.width + 1};
                double vc = 0.0, vs = 0.0, wsum = 0.0;
                for (int k = 0; k < 4; ++k) {
                    if (w[k] == 0.0 || !q.valid[idx[k]]) continue;
                    vc += w[k] * q.cos2[idx[k]];
                    vs += w[k] * q.sin2[idx[k]];
                    wsum += w[k];
                }
                if (wsum >= 0.5) {
                    ++aq.valid;
                    // normalize the sampled vector (the resampled field stores
                    // an angle, not a magnitude), then rotate by 2*dtheta
                    const double norm = std::hypot(vc, vs);
                    if (norm > 0.0) {
                        vc /= norm;
                        vs /= norm;
                    } else {
                        vc = 1.0;
                        vs = 0.0;
                    }
                    aq.sum_cos += rc * vc - rs * vs;
                    aq.sum_sin += rs * vc + rc * vs;
                }
            }
        }
    }

    double sum = 0.0;
    int n = 0;
    for (const auto& [key, ap] : cells_p) {
        if (!(ap.valid > 0 && 2 * ap.valid >= ap.total)) continue;
        auto it = cells_q.find(key);
        if (it == cells_q.end()) continue;
        const CellAccum& aq = it->second;
        if (!(aq.valid > 0 && 2 * aq.valid >= aq.total)) continue;
        const double pa = wrap_orientation(0.5 * std::atan2(ap.sum_sin, ap.sum_cos));
        const double qa = wrap_orientation(0.5 * std::atan2(aq.sum_sin, aq.sum_cos));
        sum += orientation_distance(pa, qa);
        ++n;
    }
    if (n < kMinOverlapElements) return std::numeric_limits<double>::infinity();
    return sum / n;
}

}  // namespace

double alignment_cost(const OrientationField& p, const OrientationField& q,
                      const RigidTransform& t, double side) {
    return cost_with_planes(p, OrientPlanes::from(q), t, side);
}

std::vector<AnchorFeature> minutia_anchor_features(const OrientationField& of,
                                                   const std::vector<Minutia>& minutiae,
                                                   double side) {
    std::vector<AnchorFeature> out;
    for (const Minutia& m : minutiae) {
        HexPartition part = hex_partition(of, {m.x, m.y}, side);
        auto fv = minutia_feature_vector(part);
        if (!fv) continue;
        out.push_back({{m.x, m.y}, m.direction, *fv});
    }
    return out;
}

std::vector<AnchorFeature> random_anchor_features(const OrientationField& of, std::uint64_t seed,
                                                  int count, double side) {
    std::vector<AnchorFeature> out;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> dx(0, of.width - 1), dy(0, of.height - 1);
    const int max_attempts = count * 64;
    for (int attempt = 0; attempt < max_attempts && static_cast<int>(out.size()) < count;
         ++attempt) {
        const int x = dx(rng), y = dy(rng);
        if (!of.valid(x, y)) continue;
        HexPartition part = hex_partition(of, {static_cast<double>(x), static_cast<double>(y)}, side);
        auto fv = minutia_feature_vector(part);
        if (!fv) continue;
        const HexElement* center = part.find(0, 0);
        out.push_back({{static_cast<double>(x), static_cast<double>(y)}, center->avg_orientation, *fv});
    }
    return out;
}

std::optional<AlignmentResult> align_from_anchors(const OrientationField& p,
                                                  const OrientationField& q,
                                                  const std::vector<AnchorFeature>& anchors_p,
                                                  const std::vector<AnchorFeature>& anchors_q,
                                                  const AlignConfig& cfg) {
    if (anchors_p.empty() || anchors_q.empty()) return std::nullopt;

    std::vector<HexFeatureVector> fvs_p, fvs_q;
    fvs_p.reserve(anchors_p.size());
    fvs_q.reserve(anchors_q.size());
    for (const auto& a : anchors_p) fvs_p.push_back(a.fv);
    for (const auto& a : anchors_q) fvs_q.push_back(a.fv);
    const std::vector<std::pair<int, int>> pairs = candidate_pairs(fvs_p, fvs_q, cfg.keep_fraction);
    if (pairs.empty()) return std::nullopt;

    const OrientPlanes planes_q = OrientPlanes::from(q);
    std::vector<RigidTransform> transforms(pairs.size());
    std::vector<double> costs(pairs.size());
    parallel_for(static_cast<std::int64_t>(pairs.size()), cfg.workers, [&](std::int64_t i) {
        const AnchorFeature& ap = anchors_p[pairs[i].first];
        const AnchorFeature& aq = anchors_q[pairs[i].second];
        RigidTransform t;
        // Anchor directions are 2pi-periodic for minutiae; orientation fields
        // only resolve rotation mod pi, so reduce the difference accordingly.
        t.dtheta = wrap_signed_half_pi(ap.dir - aq.dir);
        t.cx = aq.pos.x;
        t.cy = aq.pos.y;
        t.dx = ap.pos.x - aq.pos.x;
        t.dy = ap.pos.y - aq.pos.y;
        transforms[i] = t;
        costs[i] = cost_with_planes(p, planes_q, t, cfg.side);
    });

    int best = -1;
    for (std::size_t i = 0; i < costs.size(); ++i)
        if (std::isfinite(costs[i]) && (best < 0 || costs[i] < costs[best])) best = static_cast<int>(i);
    if (best < 0) return std::nullopt;
    return AlignmentResult{transforms[best], costs[best], best};
}

std::optional<AlignmentResult> mdlo_align(const OrientationField& p, const OrientationField& q,
                                          const std::vector<Minutia>& minutiae_p,
                                          const std::vector<Minutia>& minutiae_q,
                                          const AlignConfig& cfg) {
    return align_from_anchors(p, q, minutia_anchor_features(p, minutiae_p, cfg.side),
                              minutia_anchor_features(q, minutiae_q, cfg.side), cfg);
}

std::optional<AlignmentResult> dlo_align(const OrientationField& p, const OrientationField& q,
                                         std::uint64_t seed, const AlignConfig& cfg) {
    // Both sides draw from the same seed so identical fields get identical
    // anchor sets.
    return align_from_anchors(p, q, random_anchor_features(p, seed, cfg.dlo_anchors, cfg.side),
                              random_anchor_features(q, seed, cfg.dlo_anchors, cfg.side), cfg);
}

}  // namespace fp
