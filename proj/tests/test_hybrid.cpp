#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "fp/errors.hpp"
#include "fp/net/hybrid.hpp"
#include "fp/net/layers.hpp"

using namespace fp;
using namespace fp::net;
namespace fs = std::filesystem;

namespace {

PairTensorSet random_tensor_set(int w, int h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u01(0.0f, 1.0f);
    std::uniform_real_distribution<double> ang(0.0, kPi);

    PairTensorSet set;
    auto fill_fit = [&](PairTensor& t, int order) {
        t.kind = TensorKind::FIT;
        t.order = order;
        t.width = w;
        t.height = h;
        t.channels = 2;
        t.data.resize(static_cast<std::size_t>(2) * w * h);
        for (auto& v : t.data) v = u01(rng);
    };
    fill_fit(set.fit1, 1);
    set.fit2 = set.fit1;
    set.fit2.order = 2;
    const std::size_t plane = static_cast<std::size_t>(w) * h;
    std::copy(set.fit1.data.begin(), set.fit1.data.begin() + plane, set.fit2.data.begin() + plane);
    std::copy(set.fit1.data.begin() + plane, set.fit1.data.end(), set.fit2.data.begin());

    set.oft1.kind = TensorKind::OFT;
    set.oft1.order = 1;
    set.oft1.width = w;
    set.oft1.height = h;
    set.oft1.channels = 4;
    set.oft1.data.resize(static_cast<std::size_t>(4) * w * h);
    for (int g = 0; g < 2; ++g)
        for (std::size_t i = 0; i < plane; ++i) {
            const double a = 2.0 * ang(rng);
            set.oft1.data[(2 * g) * plane + i] = static_cast<float>(std::cos(a));
            set.oft1.data[(2 * g + 1) * plane + i] = static_cast<float>(std::sin(a));
        }
    set.oft2 = set.oft1;
    set.oft2.order = 2;
    std::copy(set.oft1.data.begin(), set.oft1.data.begin() + 2 * plane,
              set.oft2.data.begin() + 2 * plane);
    std::copy(set.oft1.data.begin() + 2 * plane, set.oft1.data.end(), set.oft2.data.begin());

    set.mask_latent = BinaryMask(w, h, true);
    set.mask_reference = BinaryMask(w, h, true);
    return set;
}

PairTensorSet swapped_roles(const PairTensorSet& set) {
    PairTensorSet out;
    out.fit1 = set.fit2;
    out.fit1.order = 1;
    out.fit2 = set.fit1;
    out.fit2.order = 2;
    out.oft1 = set.oft2;
    out.oft1.order = 1;
    out.oft2 = set.oft1;
    out.oft2.order = 2;
    out.mask_latent = set.mask_reference;
    out.mask_reference = set.mask_latent;
    return out;
}

}  // namespace

TEST_CASE("ensemble bindings: 24 models, 8 cCNN + 16 pCNN, fixed sizes") {
    auto all = ablation_model_specs("M");
    REQUIRE(all.size() == 24);
    int ccnn = 0, pcnn = 0, fit = 0;
    for (const auto& m : all) {
        (m.is_pcnn() ? pcnn : ccnn)++;
        fit += m.kind == TensorKind::FIT ? 1 : 0;
    }
    CHECK(ccnn == 8);
    CHECK(pcnn == 16);
    CHECK(fit == 12);
    CHECK(all[0].patch_size == 64);   // cCNN_1
    CHECK(all[6].patch_size == 192);  // cCNN_4
    CHECK(all[8].patch_size == 32);   // pCNN_5
    CHECK(all[23].patch_size == 96);  // pCNN_8,4
    CHECK(all[8].method == MacroMethod::A);
    CHECK(all[9].method == MacroMethod::B);
    CHECK(all[8].kind == TensorKind::FIT);
    CHECK(all[10].kind == TensorKind::OFT);
}

TEST_CASE("ablation subsets match the experiment definitions") {
    CHECK(ablation_model_specs("M").size() == 24);

    auto half = ablation_model_specs("M-Half");
    CHECK(half.size() == 12);
    for (const auto& m : half) {
        CHECK(m.id.network != 1);
        CHECK(m.id.network != 3);
        CHECK(m.id.network != 5);
        CHECK(m.id.network != 7);
    }

    auto c_only = ablation_model_specs("M-C");
    CHECK(c_only.size() == 8);
    for (const auto& m : c_only) CHECK_FALSE(m.is_pcnn());

    auto f_only = ablation_model_specs("M-F");
    CHECK(f_only.size() == 12);
    for (const auto& m : f_only) CHECK(m.kind == TensorKind::FIT);

    CHECK_THROWS_AS(ablation_model_specs("M-X"), InputError);
}

TEST_CASE("hybrid model construction wires channels and architectures") {
    auto hm = make_hybrid_model<float>("M", 8, 16, 3);
    REQUIRE(hm.models.size() == 24);
    CHECK(hm.rbm.inputs == 24);
    CHECK(hm.rbm.hidden == 16);
    for (const auto& m : hm.models) {
        CHECK(m.net.input_channels == (m.spec.kind == TensorKind::FIT ? 2 : 4));
        if (m.spec.is_pcnn())
            CHECK(m.net.arch == 3);
        else
            CHECK(m.net.arch == (m.spec.patch_size == 192 ? 2 : 1));
    }

    auto mc = make_hybrid_model<float>("M-C", 8, 16, 3);
    CHECK(mc.rbm.inputs == 8);
}

TEST_CASE("constant networks pool to their constant probability") {
    auto hm = make_hybrid_model<float>("M", 8, 16, 5);
    PairTensorSet set = random_tensor_set(80, 72, 9);

    // zero weights except a final-FC bias: every patch scores sigmoid(b)
    CnnModel<float>& m = hm.models[0];  // cCNN_1,1 FIT 64
    for (auto& layer : m.weights.w) std::fill(layer.begin(), layer.end(), 0.0f);
    for (auto& layer : m.weights.b) std::fill(layer.begin(), layer.end(), 0.0f);
    int final_fc = -1;
    for (std::size_t i = 0; i < m.net.layers.size(); ++i)
        if (m.net.layers[i].type == LayerType::FullyConnected && m.net.layers[i].units == 2)
            final_fc = static_cast<int>(i);
    REQUIRE(final_fc >= 0);
    m.weights.b[final_fc][1] = 0.7f;

    const double p = 1.0 / (1.0 + std::exp(-0.7));
    CHECK(model_output(m, set) == doctest::Approx(p).epsilon(1e-6));
    CHECK(model_order_output(m, set, 1) == doctest::Approx(p).epsilon(1e-6));
    CHECK(model_order_output(m, set, 2) == doctest::Approx(p).epsilon(1e-6));
}

TEST_CASE("model output is the mean of its two order outputs") {
    auto hm = make_hybrid_model<float>("M", 8, 16, 7);
    PairTensorSet set = random_tensor_set(96, 96, 11);
    for (const auto& m : hm.models) {
        const double a = model_order_output(m, set, 1);
        const double b = model_order_output(m, set, 2);
        CHECK(model_output(m, set) == doctest::Approx(0.5 * (a + b)).epsilon(1e-12));
    }
}

TEST_CASE("swapping fingerprint roles leaves every pooled output unchanged") {
    auto hm = make_hybrid_model<float>("M", 8, 16, 13);
    PairTensorSet set = random_tensor_set(88, 96, 17);
    PairTensorSet swapped = swapped_roles(set);

    std::vector<double> x1 = ensemble_outputs(hm, set, 1);
    std::vector<double> x2 = ensemble_outputs(hm, swapped, 1);
    REQUIRE(x1.size() == x2.size());
    for (std::size_t i = 0; i < x1.size(); ++i) CHECK(x1[i] == x2[i]);
    CHECK(hybrid_score(hm, set, 1) == hybrid_score(hm, swapped, 1));
}

TEST_CASE("hybrid score composes pooled outputs with the rbm posterior") {
    auto hm = make_hybrid_model<float>("M", 8, 4, 19);
    PairTensorSet set = random_tensor_set(72, 72, 21);

    // neutral RBM except the class offset: score = e / (e + 1)
    std::fill(hm.rbm.w.begin(), hm.rbm.w.end(), 0.0);
    std::fill(hm.rbm.u.begin(), hm.rbm.u.end(), 0.0);
    hm.rbm.t = {0.0, 1.0};
    CHECK(hybrid_score(hm, set, 1) ==
          doctest::Approx(std::exp(1.0) / (std::exp(1.0) + 1.0)).epsilon(1e-9));

    // scores always live in [0, 1]
    std::mt19937_64 rng(23);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& v : hm.rbm.w) v = g(rng);
    for (auto& v : hm.rbm.u) v = g(rng);
    const double s = hybrid_score(hm, set, 1);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
}

TEST_CASE("worker count never changes ensemble outputs") {
    auto hm = make_hybrid_model<float>("M", 8, 8, 29);
    PairTensorSet set = random_tensor_set(100, 90, 31);
    std::vector<double> seq = ensemble_outputs(hm, set, 1);
    std::vector<double> par = ensemble_outputs(hm, set, 8);
    REQUIRE(seq.size() == par.size());
    for (std::size_t i = 0; i < seq.size(); ++i) CHECK(seq[i] == par[i]);
}

TEST_CASE("memoized macro evaluation equals the naive per-macro route") {
    auto hm = make_hybrid_model<float>("M", 8, 8, 37);
    PairTensorSet set = random_tensor_set(120, 110, 41);

    for (const auto& m : hm.models) {
        if (!m.spec.is_pcnn()) continue;
        for (int order = 1; order <= 2; ++order) {
            const PairTensor& raw = m.spec.kind == TensorKind::FIT
                                        ? (order == 1 ? set.fit1 : set.fit2)
                                        : (order == 1 ? set.oft1 : set.oft2);
            const int off = macro_offset(m.spec.method);
            const PairTensor padded = pad_to(raw, m.spec.patch_size + 2 * off);
            auto macros = crop_macro_patches(padded, m.spec.patch_size, m.spec.method);
            REQUIRE(!macros.empty());
            double sum = 0.0;
            for (const auto& macro : macros) {
                TensorND<float> batch(
                    {9, padded.channels, m.spec.patch_size, m.spec.patch_size});
                float* dst = batch.ptr();
                for (const Patch& a : macro.atomics)
                    for (float v : a.data) *dst++ = v;
                TensorND<float> out = net_forward(m.net, m.weights, batch);
                sum += out.data[1];
            }
            const double naive = sum / static_cast<double>(macros.size());
            CHECK(model_order_output(m, set, order) == doctest::Approx(naive).epsilon(1e-6));
        }
        break;  // one pCNN model suffices; the loop body is size-independent
    }
}

TEST_CASE("ccnn evaluation equals the naive sliding-window route") {
    auto hm = make_hybrid_model<float>("M", 8, 8, 43);
    PairTensorSet set = random_tensor_set(120, 110, 47);
    const CnnModel<float>& m = hm.models[2];  // cCNN_2,1 FIT 80
    REQUIRE(!m.spec.is_pcnn());

    const PairTensor padded = pad_to(set.fit1, m.spec.patch_size);
    auto patches = crop_patches(padded, m.spec.patch_size);
    double sum = 0.0;
    for (const auto& p : patches) {
        TensorND<float> one({1, padded.channels, m.spec.patch_size, m.spec.patch_size});
        std::copy(p.data.begin(), p.data.end(), one.data.begin());
        TensorND<float> out = net_forward(m.net, m.weights, one);
        sum += out.data[1];
    }
    CHECK(model_order_output(m, set, 1) ==
          doctest::Approx(sum / static_cast<double>(patches.size())).epsilon(1e-6));
}

TEST_CASE("training sample enumeration respects gating and the 192 resize") {
    PairTensorSet set = random_tensor_set(100, 100, 51);
    auto all = ablation_model_specs("M");

    // FIT cCNN 64: full masks keep everything
    auto samples = enumerate_training_samples(all[0], set, 0, true);
    const std::size_t per_order = patch_grid(100, 100, 64).size();
    CHECK(samples.size() == 2 * per_order);

    // halving the mask overlap drops gated samples but never OFT ones
    PairTensorSet masked = set;
    masked.mask_latent = BinaryMask(100, 100, false);
    for (int y = 0; y < 50; ++y)
        for (int x = 0; x < 100; ++x) masked.mask_latent.set(x, y, true);
    auto gated = enumerate_training_samples(all[0], masked, 0, true);
    CHECK(gated.size() < samples.size());
    auto oft = enumerate_training_samples(all[1], masked, 0, true);
    CHECK(oft.size() == 2 * per_order);

    // cCNN_4 (192) streams only the whole-tensor resize on a 100x100 tensor
    auto resized = enumerate_training_samples(all[6], set, 0, true);
    REQUIRE(resized.size() == 2);
    CHECK(resized[0].resized);

    // gather_batch shapes: pCNN batches carry 9 atomics per sample
    auto hm = make_hybrid_model<float>("M", 8, 8, 53);
    std::vector<const PairTensorSet*> pairs{&set};
    auto macro_samples = enumerate_training_samples(all[8], set, 0, true);
    REQUIRE(!macro_samples.empty());
    TensorND<float> batch =
        gather_batch(hm.models[8], pairs, macro_samples, 0, std::min<std::size_t>(3, macro_samples.size()));
    CHECK(batch.dim(0) == 9 * static_cast<int>(std::min<std::size_t>(3, macro_samples.size())));
    CHECK(batch.dim(1) == 2);
    CHECK(batch.dim(2) == 32);
}

TEST_CASE("model serialization round-trips scores and bytes") {
    auto hm = make_hybrid_model<float>("M-C", 8, 8, 59);
    hm.phase1_done = true;
    PairTensorSet set = random_tensor_set(84, 84, 61);
    const double score_before = hybrid_score(hm, set, 1);

    const std::string dir = (fs::temp_directory_path() / "fpid_model_test").string();
    fs::remove_all(dir);
    save_hybrid_model(hm, dir);
    auto loaded = load_hybrid_model(dir);
    CHECK(loaded.models.size() == hm.models.size());
    CHECK(loaded.ablation == "M-C");
    CHECK(loaded.phase1_done);
    CHECK(hybrid_score(loaded, set, 1) == doctest::Approx(score_before).epsilon(1e-6));

    // saving the loaded model reproduces the files byte for byte
    const std::string dir2 = dir + "_resave";
    fs::remove_all(dir2);
    save_hybrid_model(loaded, dir2);
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        std::ifstream a(e.path(), std::ios::binary), b(dir2 + "/" + name, std::ios::binary);
        std::string sa((std::istreambuf_iterator<char>(a)), {});
        std::string sb((std::istreambuf_iterator<char>(b)), {});
        CHECK(sa == sb);
    }

    CHECK_THROWS_AS(load_hybrid_model("/nonexistent/model"), InputError);
}
