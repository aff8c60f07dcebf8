#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fp/errors.hpp"
#include "fp/tensors.hpp"

using namespace fp;

namespace {

FingerprintInput random_input(int w, int h, std::uint64_t seed, bool full_mask = true) {
    std::mt19937_64 rng(seed);
    FingerprintInput in;
    in.image = GrayImage(w, h);
    for (auto& v : in.image.data) v = static_cast<std::uint8_t>(rng() % 256);
    in.orientation = OrientationField(w, h);
    std::uniform_real_distribution<double> u(0.0, kPi);
    for (std::size_t i = 0; i < in.orientation.angles.size(); ++i) {
        in.orientation.angles[i] = u(rng);
        in.orientation.validity.data[i] = true;
    }
    in.roi = BinaryMask(w, h, full_mask);
    in.quality = in.roi;
    return in;
}

PairTensor random_tensor(TensorKind kind, int w, int h, std::uint64_t seed) {
    PairTensor t;
    t.kind = kind;
    t.order = 1;
    t.width = w;
    t.height = h;
    t.channels = kind == TensorKind::FIT ? 2 : 4;
    t.data.resize(static_cast<std::size_t>(t.channels) * w * h);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (auto& v : t.data) v = u(rng);
    return t;
}

}  // namespace

TEST_CASE("pair tensors: self pair, channel swap, unit-norm OFT") {
    FingerprintInput in = random_input(96, 80, 7);
    auto set = build_pair_tensors(in, in, RigidTransform::identity());
    REQUIRE(set.has_value());

    // identical inputs with identity transform: FIT channels match exactly
    CHECK(set->fit1.width == 96);
    CHECK(set->fit1.height == 80);
    for (int y = 0; y < 80; ++y)
        for (int x = 0; x < 96; ++x) CHECK(set->fit1.at(0, x, y) == set->fit1.at(1, x, y));

    // order 2 is a bit-exact channel-group swap of order 1
    for (int y = 0; y < 80; ++y)
        for (int x = 0; x < 96; ++x) {
            CHECK(set->fit2.at(0, x, y) == set->fit1.at(1, x, y));
            CHECK(set->fit2.at(1, x, y) == set->fit1.at(0, x, y));
            for (int c = 0; c < 2; ++c) {
                CHECK(set->oft2.at(c, x, y) == set->oft1.at(c + 2, x, y));
                CHECK(set->oft2.at(c + 2, x, y) == set->oft1.at(c, x, y));
            }
        }

    // cos^2 + sin^2 = 1 on every valid pixel
    for (int y = 0; y < 80; ++y)
        for (int x = 0; x < 96; ++x) {
            const double n = set->oft1.at(0, x, y) * set->oft1.at(0, x, y) +
                             set->oft1.at(1, x, y) * set->oft1.at(1, x, y);
            CHECK(n == doctest::Approx(1.0).epsilon(1e-6));
        }
}

TEST_CASE("pair tensors crop to the union bounding box and detect empty overlap") {
    FingerprintInput a = random_input(100, 100, 1, false);
    FingerprintInput b = random_input(100, 100, 2, false);
    for (int y = 10; y < 30; ++y)
        for (int x = 20; x < 50; ++x) a.roi.set(x, y, true);
    for (int y = 40; y < 70; ++y)
        for (int x = 30; x < 60; ++x) b.roi.set(x, y, true);
    a.quality = a.roi;
    b.quality = b.roi;

    auto set = build_pair_tensors(a, b, RigidTransform::identity());
    REQUIRE(set.has_value());
    CHECK(set->fit1.width == 40);   // x in [20, 60)
    CHECK(set->fit1.height == 60);  // y in [10, 70)
    CHECK(set->mask_latent.width == 40);

    FingerprintInput empty_a = random_input(64, 64, 3, false);
    FingerprintInput empty_b = random_input(64, 64, 4, false);
    CHECK_FALSE(build_pair_tensors(empty_a, empty_b, RigidTransform::identity()).has_value());

    RigidTransform bad;
    bad.dx = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(build_pair_tensors(a, b, bad), InputError);
}

TEST_CASE("patch grids match the closed form on random dimensions") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> dim(20, 300);
    const int sizes[6] = {32, 48, 64, 80, 96, 192};
    for (int trial = 0; trial < 50; ++trial) {
        const int w = dim(rng), h = dim(rng);
        for (int j : sizes) {
            const auto grid = patch_grid(w, h, j, 16);
            const std::size_t expect =
                (w >= j && h >= j)
                    ? static_cast<std::size_t>((w - j) / 16 + 1) * ((h - j) / 16 + 1)
                    : 0;
            CHECK(grid.size() == expect);
        }
    }

    CHECK(patch_grid(64, 64, 64).size() == 1);
    CHECK(patch_grid(96, 96, 64).size() == 9);
}

TEST_CASE("crop_patches appends the whole-tensor resize for size 192") {
    PairTensor t = random_tensor(TensorKind::FIT, 224, 208, 3);
    auto patches = crop_patches(t, 192);
    const std::size_t grid = patch_grid(224, 208, 192).size();
    CHECK(patches.size() == grid + 1);
    CHECK(patches.back().is_resized_whole());
    CHECK(patches.back().size == 192);

    // the resize alone survives on tensors smaller than the window
    PairTensor small = random_tensor(TensorKind::FIT, 100, 90, 4);
    auto only_resize = crop_patches(small, 192);
    CHECK(only_resize.size() == 1);
    CHECK(only_resize[0].is_resized_whole());

    // a random tensor's sliding patches match exhaustive enumeration
    PairTensor r = random_tensor(TensorKind::OFT, 120, 100, 5);
    auto got = crop_patches(r, 48);
    std::size_t k = 0;
    for (int y = 0; y + 48 <= 100; y += 16)
        for (int x = 0; x + 48 <= 120; x += 16, ++k) {
            REQUIRE(k < got.size());
            CHECK(got[k].x0 == x);
            CHECK(got[k].y0 == y);
            for (int c = 0; c < 4; ++c)
                for (int yy = 0; yy < 48; ++yy)
                    for (int xx = 0; xx < 48; ++xx)
                        CHECK(got[k].data[(static_cast<std::size_t>(c) * 48 + yy) * 48 + xx] ==
                              r.at(c, x + xx, y + yy));
        }
    CHECK(got.size() == k);
}

TEST_CASE("macro-patch centers realize the two offset sets") {
    PairTensor t = random_tensor(TensorKind::FIT, 200, 200, 6);

    auto macros_a = crop_macro_patches(t, 32, MacroMethod::A);
    REQUIRE(!macros_a.empty());
    for (const auto& m : macros_a) {
        REQUIRE(m.atomics.size() == 9);
        int a = 0;
        for (int dy = -16; dy <= 16; dy += 16)
            for (int dx = -16; dx <= 16; dx += 16, ++a) {
                CHECK(m.atomics[a].x0 == m.x0 + dx);
                CHECK(m.atomics[a].y0 == m.y0 + dy);
            }
    }

    // offset-set arithmetic: a macro whose central atomic is centered at c
    // has atomic centers {c-16, c, c+16} under method A (and +-32 under B);
    // with the center-(100,100) arithmetic that means {84, 100, 116}
    {
        const MacroPatch& m = macros_a.front();
        const int c = m.x0 + 16;  // atomic center of a 32-wide window
        std::vector<int> centers;
        for (int a = 0; a < 9; ++a) centers.push_back(m.atomics[a].x0 + 16);
        std::sort(centers.begin(), centers.end());
        centers.erase(std::unique(centers.begin(), centers.end()), centers.end());
        CHECK(centers == std::vector<int>{c - 16, c, c + 16});
    }

    auto macros_b = crop_macro_patches(t, 32, MacroMethod::B);
    for (const auto& m : macros_b) {
        int a = 0;
        for (int dy = -32; dy <= 32; dy += 32)
            for (int dx = -32; dx <= 32; dx += 32, ++a) CHECK(m.atomics[a].x0 == m.x0 + dx);
    }

    // tensor exactly (j + 64) square with method B -> exactly one macro-patch
    PairTensor tight = random_tensor(TensorKind::FIT, 48 + 64, 48 + 64, 7);
    CHECK(crop_macro_patches(tight, 48, MacroMethod::B).size() == 1);
}

TEST_CASE("quality gates use strict thresholds and a counting oracle") {
    PairTensor t = random_tensor(TensorKind::FIT, 96, 96, 8);

    BinaryMask all(96, 96, true);
    auto patches = crop_patches(t, 32);
    CHECK(quality_gate_patches(patches, all, all).size() == patches.size());

    // exactly 75% overlap is dropped (strict >)
    BinaryMask partial(96, 96, false);
    // patch at (0,0): rows 0..23 of 32 = 75%
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 96; ++x) partial.set(x, y, true);
    std::vector<Patch> one{extract_patch(t, 32, 0, 0)};
    CHECK(quality_gate_patches(one, partial, all).empty());
    // one more row crosses the threshold
    for (int x = 0; x < 96; ++x) partial.set(x, 24, true);
    CHECK(quality_gate_patches(one, partial, all).size() == 1);

    // random masks equal the per-pixel counting oracle
    std::mt19937_64 rng(13);
    BinaryMask ml(96, 96), mr(96, 96);
    for (auto& v : ml.data) v = rng() % 2;
    for (auto& v : mr.data) v = rng() % 2;
    auto kept = quality_gate_patches(patches, ml, mr);
    std::size_t expect = 0;
    for (const auto& p : patches) {
        int inside = 0;
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                inside += (ml.at(p.x0 + x, p.y0 + y) && mr.at(p.x0 + x, p.y0 + y)) ? 1 : 0;
        if (inside > 0.75 * 32 * 32) ++expect;
    }
    CHECK(kept.size() == expect);

    // OFT patches must never be routed through the gate
    PairTensor oft = random_tensor(TensorKind::OFT, 96, 96, 9);
    auto oft_patches = crop_patches(oft, 32);
    CHECK_THROWS_AS(quality_gate_patches(oft_patches, ml, mr), InputError);
}

TEST_CASE("macro gate needs strictly more than four qualifying atomics") {
    PairTensor t = random_tensor(TensorKind::FIT, 160, 160, 10);
    BinaryMask all(160, 160, true);
    auto macros = crop_macro_patches(t, 32, MacroMethod::A);
    REQUIRE(!macros.empty());
    CHECK(quality_gate_macro(macros, all, all).size() == macros.size());

    // build a mask qualifying exactly 4 atomics of the first macro, then 5
    const MacroPatch& m = macros.front();
    BinaryMask partial(160, 160, false);
    for (int a = 0; a < 4; ++a)
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                partial.set(m.atomics[a].x0 + x, m.atomics[a].y0 + y, true);
    std::vector<MacroPatch> first{m};
    CHECK(quality_gate_macro(first, partial, all).empty());
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            partial.set(m.atomics[4].x0 + x, m.atomics[4].y0 + y, true);
    CHECK(quality_gate_macro(first, partial, all).size() == 1);

    // gating monotonicity: growing the masks never drops a kept patch
    std::mt19937_64 rng(17);
    BinaryMask ml(160, 160), mr(160, 160);
    for (auto& v : ml.data) v = rng() % 2;
    for (auto& v : mr.data) v = rng() % 2;
    auto kept_small = quality_gate_macro(macros, ml, mr);
    BinaryMask grown = ml;
    for (auto& v : grown.data) v = v | (rng() % 2);
    auto kept_big = quality_gate_macro(macros, grown, mr);
    for (const auto& ks : kept_small) {
        bool still = false;
        for (const auto& kb : kept_big) still = still || (kb.x0 == ks.x0 && kb.y0 == ks.y0);
        CHECK(still);
    }
}

TEST_CASE("evaluation padding embeds top-left with the stated fills") {
    PairTensor t = random_tensor(TensorKind::FIT, 40, 40, 12);
    PairTensor padded = pad_to(t, 64);
    CHECK(padded.width == 64);
    CHECK(padded.height == 64);
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 40; ++x)
            for (int c = 0; c < 2; ++c) CHECK(padded.at(c, x, y) == t.at(c, x, y));
    for (int c = 0; c < 2; ++c) {
        CHECK(padded.at(c, 50, 10) == 1.0f);
        CHECK(padded.at(c, 10, 50) == 1.0f);
    }

    PairTensor oft = random_tensor(TensorKind::OFT, 40, 40, 13);
    PairTensor opad = pad_to(oft, 64);
    CHECK(opad.at(0, 50, 50) == 1.0f);
    CHECK(opad.at(1, 50, 50) == 0.0f);
    CHECK(opad.at(2, 50, 50) == 1.0f);
    CHECK(opad.at(3, 50, 50) == 0.0f);

    // large tensors come back unchanged
    PairTensor big = random_tensor(TensorKind::FIT, 100, 100, 14);
    PairTensor same = pad_to(big, 64);
    CHECK(same.data == big.data);

    // embedding inverse: pad then crop at the origin recovers the original
    Patch back = extract_patch(padded, 40, 0, 0);
    std::size_t k = 0;
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 40; ++y)
            for (int x = 0; x < 40; ++x, ++k) CHECK(back.data[k] == t.at(c, x, y));
}

TEST_CASE("channel-swap symmetry propagates through patch cropping") {
    FingerprintInput a = random_input(120, 120, 21);
    FingerprintInput b = random_input(120, 120, 22);
    auto set = build_pair_tensors(a, b, RigidTransform::identity());
    REQUIRE(set.has_value());
    auto p1 = crop_patches(set->fit1, 64);
    auto p2 = crop_patches(set->fit2, 64);
    REQUIRE(p1.size() == p2.size());
    const std::size_t plane = 64 * 64;
    for (std::size_t i = 0; i < p1.size(); ++i)
        for (std::size_t k = 0; k < plane; ++k) {
            CHECK(p1[i].data[k] == p2[i].data[plane + k]);
            CHECK(p1[i].data[plane + k] == p2[i].data[k]);
        }
}
