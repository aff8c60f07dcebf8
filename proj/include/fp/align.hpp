#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "fp/image.hpp"

namespace fp {

// Pointy-top hexagonal tiling in axial coordinates (q, r), anchored at an
// arbitrary pixel. Per-element circular average orientation in doubled-angle
// space; an element is valid only when at least half of its in-bounds pixels
// carry a valid orientation.
struct HexElement {
    int q = 0;
    int r = 0;
    double avg_orientation = 0.0;  // [0, pi)
    int valid_pixels = 0;
    int total_pixels = 0;
    bool valid = false;
};

struct HexPartition {
    Vec2 center;
    double side = 12.0;
    std::vector<HexElement> elements;          // sorted by (r, q)
    std::unordered_map<std::int64_t, int> index;  // packed (q, r) -> element

    const HexElement* find(int q, int r) const;
};

HexPartition hex_partition(const OrientationField& of, Vec2 center, double side = 12.0);

// Relative orientations of the anchor element against its six neighbors, in
// the fixed order E, NE, NW, W, SW, SE; entries in (-pi/2, pi/2].
struct HexFeatureVector {
    std::array<double, 6> rel{};
};

// Empty when the central element or any neighbor is invalid.
std::optional<HexFeatureVector> minutia_feature_vector(const HexPartition& part);

// All cross pairs scored by pi-periodic Euclidean distance over the six
// entries; the smallest ceil(keep_fraction * |L| * |R|) survive, ties broken
// by lexicographic index.
std::vector<std::pair<int, int>> candidate_pairs(const std::vector<HexFeatureVector>& fvs_latent,
                                                 const std::vector<HexFeatureVector>& fvs_ref,
                                                 double keep_fraction = 0.20);

// Mean lambda(p, q') over overlapping valid hexagonal elements of P and the
// transformed Q, tiled about P's raster center; +inf when fewer than 5
// element pairs overlap.
double alignment_cost(const OrientationField& p, const OrientationField& q,
                      const RigidTransform& t, double side = 12.0);

// Doubled-angle planes of an orientation field, precomputed once per field so
// candidate evaluation does not redo the trigonometry.
struct OrientPlanes {
    int width = 0, height = 0;
    std::vector<double> cos2, sin2;
    std::vector<std::uint8_t> valid;

    static OrientPlanes from(const OrientationField& of);
};

// An alignment anchor: minutia position + direction for M-DLO, random valid
// point + central element orientation for DLO.
struct AnchorFeature {
    Vec2 pos;
    double dir = 0.0;
    HexFeatureVector fv;
};

struct AlignmentResult {
    RigidTransform transform;
    double cost = 0.0;
    int candidate = -1;  // index into the surviving candidate list
};

struct AlignConfig {
    double side = 12.0;
    double keep_fraction = 0.20;
    int dlo_anchors = 16;
    int workers = 1;
};

// Anchor features for each minutia that yields a full 7-element neighborhood.
std::vector<AnchorFeature> minutia_anchor_features(const OrientationField& of,
                                                   const std::vector<Minutia>& minutiae,
                                                   double side = 12.0);

// Seeded random valid anchor points with their hexagon features.
std::vector<AnchorFeature> random_anchor_features(const OrientationField& of, std::uint64_t seed,
                                                  int count, double side = 12.0);

// Candidate evaluation shared by M-DLO and DLO: pairs anchors by feature
// similarity, derives one rigid transform per pair, keeps the cheapest.
std::optional<AlignmentResult> align_from_anchors(const OrientationField& p,
                                                  const OrientationField& q,
                                                  const std::vector<AnchorFeature>& anchors_p,
                                                  const std::vector<AnchorFeature>& anchors_q,
                                                  const AlignConfig& cfg = {});

std::optional<AlignmentResult> mdlo_align(const OrientationField& p, const OrientationField& q,
                                          const std::vector<Minutia>& minutiae_p,
                                          const std::vector<Minutia>& minutiae_q,
                                          const AlignConfig& cfg = {});

std::optional<AlignmentResult> dlo_align(const OrientationField& p, const OrientationField& q,
                                         std::uint64_t seed, const AlignConfig& cfg = {});

}  // namespace fp
