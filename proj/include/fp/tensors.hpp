#pragma once

#include <optional>
#include <vector>

#include "fp/image.hpp"

namespace fp {

enum class TensorKind { FIT, OFT };
enum class MacroMethod { A, B };

// Pair tensor over the overlap bounding box. FIT carries 2 planes (latent
// image, reference image scaled to [0,1]); OFT carries 4 planes
// (cos 2theta, sin 2theta per fingerprint). Order 2 swaps the per-fingerprint
// channel groups of order 1.
struct PairTensor {
    TensorKind kind = TensorKind::FIT;
    int order = 1;
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;  // channel-major planes

    float at(int c, int x, int y) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    float& at(int c, int x, int y) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    const float* plane(int c) const {
        return data.data() + static_cast<std::size_t>(c) * height * width;
    }
};

struct PairTensorSet {
    PairTensor fit1, fit2, oft1, oft2;
    BinaryMask mask_latent, mask_reference;  // good-quality masks in tensor frame
};

// One side of a pair in a shared frame: raster, orientation field, the
// segmentation ROI, and the good-quality mask used for patch gating.
struct FingerprintInput {
    GrayImage image;
    OrientationField orientation;
    BinaryMask roi;
    BinaryMask quality;
};

// Transforms the reference into latent coordinates, crops everything to the
// bounding box of the union of the two ROIs, and builds all four tensors;
// the good-quality masks ride along in the same frame. Empty union -> nullopt.
std::optional<PairTensorSet> build_pair_tensors(const FingerprintInput& latent,
                                                const FingerprintInput& reference,
                                                const RigidTransform& t);

struct Patch {
    TensorKind kind = TensorKind::FIT;
    int order = 1;
    int size = 0;
    int x0 = 0, y0 = 0;  // top-left in tensor frame; (-1,-1) for the whole-tensor resize
    int channels = 0;
    std::vector<float> data;
    bool is_resized_whole() const { return x0 < 0; }
};

struct MacroPatch {
    MacroMethod method = MacroMethod::A;
    int size = 0;       // atomic patch size
    int x0 = 0, y0 = 0;  // central atomic top-left
    std::vector<Patch> atomics;  // 9 entries, (dy, dx) row-major
};

inline int macro_offset(MacroMethod m) { return m == MacroMethod::A ? 16 : 32; }

// Top-left corners of all fully contained windows at the given stride,
// row-major.
std::vector<std::pair<int, int>> patch_grid(int width, int height, int patch, int stride = 16);

// Central atomic top-left corners for which all nine atomic windows fit.
std::vector<std::pair<int, int>> macro_grid(int width, int height, int patch, MacroMethod method,
                                            int stride = 16);

// All sliding-window patches; for size 192 the whole-tensor resize is
// appended so the full overlap is always represented.
std::vector<Patch> crop_patches(const PairTensor& tensor, int size, int stride = 16);

std::vector<MacroPatch> crop_macro_patches(const PairTensor& tensor, int size, MacroMethod method,
                                           int stride = 16);

// Training-time gate for FIT patches: kept iff strictly more than `frac` of
// the patch area lies in the overlap of the two good-quality masks. OFT
// patches are never gated; routing them here is a contract violation.
std::vector<Patch> quality_gate_patches(const std::vector<Patch>& patches, const BinaryMask& mask_l,
                                        const BinaryMask& mask_r, double frac = 0.75);

// Macro gate: kept iff strictly more than four atomic patches individually
// clear the 75% overlap rule.
std::vector<MacroPatch> quality_gate_macro(const std::vector<MacroPatch>& macros,
                                           const BinaryMask& mask_l, const BinaryMask& mask_r,
                                           double frac = 0.75);

// Evaluation-time padding: embeds the tensor top-left into a canvas of at
// least size x size. FIT fills with 1.0 (white), OFT with the (1, 0)
// doubled-angle vector per fingerprint.
PairTensor pad_to(const PairTensor& tensor, int size);
BinaryMask pad_mask_to(const BinaryMask& mask, int size);

// Copies one window out of a tensor (shared by tests and the eval path).
Patch extract_patch(const PairTensor& tensor, int size, int x0, int y0);

// The whole tensor resized to size x size (the extra patch appended for the
// 192 networks). OFT doubled-angle pairs are renormalized after blending.
Patch resize_whole_patch(const PairTensor& tensor, int size);

// Fraction of a size x size window covered by the overlap of the two masks.
double mask_overlap_fraction(const BinaryMask& a, const BinaryMask& b, int x0, int y0, int size);

}  // namespace fp
