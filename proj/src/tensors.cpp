#include "fp/tensors.hpp"

#include <algorithm>
#include <cmath>

#include "fp/errors.hpp"
#include "fp/resample.hpp"

namespace fp {

namespace {

struct Box {
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // inclusive
    bool empty() const { return x1 < x0 || y1 < y0; }
    int width() const { return x1 - x0 + 1; }
    int height() const { return y1 - y0 + 1; }
};

Box union_bbox(const BinaryMask& a, const BinaryMask& b) {
    Box box{a.width, a.height, -1, -1};
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x)
            if (a.at(x, y) || b.at(x, y)) {
                box.x0 = std::min(box.x0, x);
                box.y0 = std::min(box.y0, y);
                box.x1 = std::max(box.x1, x);
                box.y1 = std::max(box.y1, y);
            }
    return box;
}

void fill_image_plane(PairTensor& t, int channel, const GrayImage& img, const Box& box) {
    for (int y = 0; y < t.height; ++y)
        for (int x = 0; x < t.width; ++x)
            t.at(channel, x, y) = static_cast<float>(img.at(box.x0 + x, box.y0 + y) / 255.0);
}

void fill_orientation_planes(PairTensor& t, int channel, const OrientationField& of,
                             const Box& box) {
    for (int y = 0; y < t.height; ++y)
        for (int x = 0; x < t.width; ++x) {
            const int sx = box.x0 + x, sy = box.y0 + y;
            if (of.valid(sx, sy)) {
                const double a2 = 2.0 * of.angle(sx, sy);
                t.at(channel, x, y) = static_cast<float>(std::cos(a2));
                t.at(channel + 1, x, y) = static_cast<float>(std::sin(a2));
            } else {
                t.at(channel, x, y) = 1.0f;  // theta = 0 convention for invalid pixels
                t.at(channel + 1, x, y) = 0.0f;
            }
        }
}

// Order-2 tensors swap the two per-fingerprint channel groups.
PairTensor swap_groups(const PairTensor& t) {
    PairTensor out = t;
    out.order = t.order == 1 ? 2 : 1;
    const int group = t.channels / 2;
    const std::size_t plane = static_cast<std::size_t>(t.width) * t.height;
    for (int c = 0; c < group; ++c) {
        std::copy_n(t.data.begin() + static_cast<std::ptrdiff_t>((group + c) * plane), plane,
                    out.data.begin() + static_cast<std::ptrdiff_t>(c * plane));
        std::copy_n(t.data.begin() + static_cast<std::ptrdiff_t>(c * plane), plane,
                    out.data.begin() + static_cast<std::ptrdiff_t>((group + c) * plane));
    }
    return out;
}

BinaryMask crop_mask(const BinaryMask& m, const Box& box) {
    BinaryMask out(box.width(), box.height());
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) out.set(x, y, m.at(box.x0 + x, box.y0 + y));
    return out;
}

}  // namespace

std::optional<PairTensorSet> build_pair_tensors(const FingerprintInput& latent,
                                                const FingerprintInput& reference,
                                                const RigidTransform& t) {
    if (!std::isfinite(t.dx) || !std::isfinite(t.dy) || !std::isfinite(t.dtheta))
        throw InputError("non-finite alignment transform");

    GrayImage ref_img = apply_rigid(reference.image, t, 255.0);
    OrientationField ref_of = apply_rigid(reference.orientation, t);
    BinaryMask ref_roi = apply_rigid(reference.roi, t);
    BinaryMask ref_quality = apply_rigid(reference.quality, t);

    // Reference rasters now live in latent coordinates; everything is cropped
    // to the union of the two ROIs.
    Box box = union_bbox(latent.roi, ref_roi);
    if (box.empty()) return std::nullopt;

    PairTensorSet set;
    const int w = box.width(), h = box.height();

    set.fit1.kind = TensorKind::FIT;
    set.fit1.order = 1;
    set.fit1.width = w;
    set.fit1.height = h;
    set.fit1.channels = 2;
    set.fit1.data.assign(static_cast<std::size_t>(2) * w * h, 0.0f);
    fill_image_plane(set.fit1, 0, latent.image, box);
    fill_image_plane(set.fit1, 1, ref_img, box);
    set.fit2 = swap_groups(set.fit1);

    set.oft1.kind = TensorKind::OFT;
    set.oft1.order = 1;
    set.oft1.width = w;
    set.oft1.height = h;
    set.oft1.channels = 4;
    set.oft1.data.assign(static_cast<std::size_t>(4) * w * h, 0.0f);
    fill_orientation_planes(set.oft1, 0, latent.orientation, box);
    fill_orientation_planes(set.oft1, 2, ref_of, box);
    set.oft2 = swap_groups(set.oft1);

    set.mask_latent = crop_mask(latent.quality, box);
    set.mask_reference = crop_mask(ref_quality, box);
    return set;
}

std::vector<std::pair<int, int>> patch_grid(int width, int height, int patch, int stride) {
    std::vector<std::pair<int, int>> grid;
    if (width < patch || height < patch) return grid;
    for (int y = 0; y + patch <= height; y += stride)
        for (int x = 0; x + patch <= width; x += stride) grid.emplace_back(x, y);
    return grid;
}

std::vector<std::pair<int, int>> macro_grid(int width, int height, int patch, MacroMethod method,
                                            int stride) {
    std::vector<std::pair<int, int>> grid;
    const int off = macro_offset(method);
    for (int y = off; y + patch + off <= height; y += stride)
        for (int x = off; x + patch + off <= width; x += stride) grid.emplace_back(x, y);
    return grid;
}

Patch extract_patch(const PairTensor& tensor, int size, int x0, int y0) {
    Patch p;
    p.kind = tensor.kind;
    p.order = tensor.order;
    p.size = size;
    p.x0 = x0;
    p.y0 = y0;
    p.channels = tensor.channels;
    p.data.resize(static_cast<std::size_t>(tensor.channels) * size * size);
    std::size_t k = 0;
    for (int c = 0; c < tensor.channels; ++c) {
        const float* plane = tensor.plane(c);
        for (int y = 0; y < size; ++y) {
            const float* row = plane + static_cast<std::size_t>(y0 + y) * tensor.width + x0;
            std::copy_n(row, size, p.data.begin() + static_cast<std::ptrdiff_t>(k));
            k += size;
        }
    }
    return p;
}

Patch resize_whole_patch(const PairTensor& tensor, int size) {
    Patch p;
    p.kind = tensor.kind;
    p.order = tensor.order;
    p.size = size;
    p.x0 = -1;
    p.y0 = -1;
    p.channels = tensor.channels;
    p.data.resize(static_cast<std::size_t>(tensor.channels) * size * size);
    const std::size_t plane_sz = static_cast<std::size_t>(size) * size;
    for (int c = 0; c < tensor.channels; ++c) {
        std::vector<float> src(tensor.plane(c),
                               tensor.plane(c) + static_cast<std::size_t>(tensor.width) * tensor.height);
        std::vector<float> dst = resize_bilinear_plane(src, tensor.width, tensor.height, size, size);
        std::copy(dst.begin(), dst.end(), p.data.begin() + static_cast<std::ptrdiff_t>(c * plane_sz));
    }
    if (tensor.kind == TensorKind::OFT) {
        // renormalize each doubled-angle pair after interpolation
        for (int g = 0; g < tensor.channels / 2; ++g) {
            float* pc = p.data.data() + static_cast<std::size_t>(2 * g) * plane_sz;
            float* ps = p.data.data() + static_cast<std::size_t>(2 * g + 1) * plane_sz;
            for (std::size_t i = 0; i < plane_sz; ++i) {
                const double n = std::hypot(static_cast<double>(pc[i]), static_cast<double>(ps[i]));
                if (n > 1e-8) {
                    pc[i] = static_cast<float>(pc[i] / n);
                    ps[i] = static_cast<float>(ps[i] / n);
                } else {
                    pc[i] = 1.0f;
                    ps[i] = 0.0f;
                }
            }
        }
    }
    return p;
}

std::vector<Patch> crop_patches(const PairTensor& tensor, int size, int stride) {
    std::vector<Patch> out;
    for (auto [x, y] : patch_grid(tensor.width, tensor.height, size, stride))
        out.push_back(extract_patch(tensor, size, x, y));
    if (size == 192) out.push_back(resize_whole_patch(tensor, size));
    return out;
}

std::vector<MacroPatch> crop_macro_patches(const PairTensor& tensor, int size, MacroMethod method,
                                           int stride) {
    std::vector<MacroPatch> out;
    const int off = macro_offset(method);
    for (auto [x, y] : macro_grid(tensor.width, tensor.height, size, method, stride)) {
        MacroPatch m;
        m.method = method;
        m.size = size;
        m.x0 = x;
        m.y0 = y;
        m.atomics.reserve(9);
        for (int dy = -off; dy <= off; dy += off)
            for (int dx = -off; dx <= off; dx += off)
                m.atomics.push_back(extract_patch(tensor, size, x + dx, y + dy));
        out.push_back(std::move(m));
    }
    return out;
}

double mask_overlap_fraction(const BinaryMask& a, const BinaryMask& b, int x0, int y0, int size) {
    int inside = 0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            if (a.at(x0 + x, y0 + y) && b.at(x0 + x, y0 + y)) ++inside;
    return static_cast<double>(inside) / (static_cast<double>(size) * size);
}

std::vector<Patch> quality_gate_patches(const std::vector<Patch>& patches, const BinaryMask& mask_l,
                                        const BinaryMask& mask_r, double frac) {
    std::vector<Patch> kept;
    for (const Patch& p : patches) {
        if (p.kind == TensorKind::OFT)
            throw InputError("quality gating applies to FIT patches only");
        if (p.is_resized_whole()) {  // whole-overlap view always participates
            kept.push_back(p);
            continue;
        }
        if (mask_overlap_fraction(mask_l, mask_r, p.x0, p.y0, p.size) > frac) kept.push_back(p);
    }
    return kept;
}

std::vector<MacroPatch> quality_gate_macro(const std::vector<MacroPatch>& macros,
                                           const BinaryMask& mask_l, const BinaryMask& mask_r,
                                           double frac) {
    std::vector<MacroPatch> kept;
    for (const MacroPatch& m : macros) {
        if (!m.atomics.empty() && m.atomics.front().kind == TensorKind::OFT)
            throw InputError("quality gating applies to FIT macro-patches only");
        int qualifying = 0;
        for (const Patch& a : m.atomics)
            if (mask_overlap_fraction(mask_l, mask_r, a.x0, a.y0, a.size) > frac) ++qualifying;
        if (qualifying > 4) kept.push_back(m);
    }
    return kept;
}

PairTensor pad_to(const PairTensor& tensor, int size) {
    if (tensor.width >= size && tensor.height >= size) return tensor;
    PairTensor out;
    out.kind = tensor.kind;
    out.order = tensor.order;
    out.width = std::max(tensor.width, size);
    out.height = std::max(tensor.height, size);
    out.channels = tensor.channels;
    out.data.assign(static_cast<std::size_t>(out.channels) * out.width * out.height, 0.0f);
    for (int c = 0; c < out.channels; ++c) {
        float fill;
        if (tensor.kind == TensorKind::FIT)
            fill = 1.0f;  // 255 scaled
        else
            fill = (c % 2 == 0) ? 1.0f : 0.0f;  // (cos, sin) of theta = 0
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x) out.at(c, x, y) = fill;
        for (int y = 0; y < tensor.height; ++y)
            for (int x = 0; x < tensor.width; ++x) out.at(c, x, y) = tensor.at(c, x, y);
    }
    return out;
}

BinaryMask pad_mask_to(const BinaryMask& mask, int size) {
    if (mask.width >= size && mask.height >= size) return mask;
    BinaryMask out(std::max(mask.width, size), std::max(mask.height, size), false);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) out.set(x, y, mask.at(x, y));
    return out;
}

}  // namespace fp
