#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fp/errors.hpp"
#include "fp/pipeline.hpp"
#include "fp/resample.hpp"
#include "fp/synth.hpp"

using namespace fp;
namespace fs = std::filesystem;

namespace {

PreprocessConfig toy_config() {
    PreprocessConfig cfg;
    return cfg;
}

GalleryIndex tiny_gallery(int n, std::uint64_t seed, const PreprocessConfig& cfg) {
    std::vector<std::pair<std::string, GrayImage>> refs;
    for (int i = 0; i < n; ++i) {
        Finger f = synthesize_finger(derive_seed(seed, i), 256, 256, 48.0);
        char id[16];
        std::snprintf(id, sizeof(id), "f%03d", i);
        refs.emplace_back(id, f.s);
    }
    return build_gallery(refs, cfg, 1);
}

}  // namespace

TEST_CASE("self pair aligns near identity with near-identical FIT channels") {
    PreprocessConfig cfg = toy_config();
    Finger f = synthesize_finger(101, 256, 256, 48.0);
    ImageFeatures feats = preprocess_image(f.f, cfg);
    PairArtifacts art = preprocess_pair(feats, feats, cfg);

    RigidTransform t = art.alignment.transform.with_center(127.5, 127.5);
    CHECK(std::fabs(t.dx) <= 2.0);
    CHECK(std::fabs(t.dy) <= 2.0);
    CHECK(std::fabs(wrap_signed_half_pi(t.dtheta)) <= 2.0 * kPi / 180.0);

    double diff = 0.0;
    const std::size_t plane =
        static_cast<std::size_t>(art.tensors.fit1.width) * art.tensors.fit1.height;
    for (std::size_t i = 0; i < plane; ++i)
        diff += std::fabs(art.tensors.fit1.data[i] - art.tensors.fit1.data[plane + i]);
    diff = diff / plane * 255.0;
    CHECK(diff < 5.0);
}

TEST_CASE("a known impression transform is recovered within M-DLO tolerances") {
    PreprocessConfig cfg = toy_config();
    SyntheticRolled master = generate_synthetic_rolled(103, 256, 256, 48.0);

    RigidTransform truth;
    truth.dx = 10.0;
    truth.dy = -10.0;
    truth.dtheta = 10.0 * kPi / 180.0;
    truth.cx = truth.cy = 127.5;
    // reference = latent moved by truth^-1, so mapping it back equals truth
    GrayImage reference = apply_rigid(master.image, truth.inverse(), 255.0);

    ImageFeatures lf = preprocess_image(master.image, cfg);
    ImageFeatures rf = preprocess_image(reference, cfg);
    PairArtifacts art = preprocess_pair(lf, rf, cfg);
    RigidTransform got = art.alignment.transform.with_center(127.5, 127.5);
    CHECK(std::fabs(got.dx - truth.dx) <= 6.0);
    CHECK(std::fabs(got.dy - truth.dy) <= 6.0);
    CHECK(std::fabs(wrap_signed_half_pi(got.dtheta - truth.dtheta)) <= 5.0 * kPi / 180.0);
}

TEST_CASE("blank latent fails with the minutiae/fallback-DLO stage") {
    PreprocessConfig cfg = toy_config();
    GrayImage blank(256, 256, 255);
    Finger f = synthesize_finger(105, 256, 256, 48.0);
    try {
        preprocess_pair(blank, f.s, cfg);
        FAIL("expected a pipeline failure");
    } catch (const PipelineError& e) {
        CHECK(e.stage_name == "minutiae/fallback-DLO");
    }
}

TEST_CASE("identify ranks deterministically for any worker count") {
    PreprocessConfig cfg = toy_config();
    GalleryIndex gallery = tiny_gallery(4, 7, cfg);
    auto model = net::make_hybrid_model<float>("M", 8, 8, 5);

    Finger probe_finger = synthesize_finger(derive_seed(7, 1), 256, 256, 48.0);
    ImageFeatures probe = preprocess_image(probe_finger.f, cfg);

    auto seq = identify(probe, gallery, model, cfg, 1);
    auto par = identify(probe, gallery, model, cfg, 8);
    REQUIRE(seq.size() == 4);
    REQUIRE(par.size() == 4);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        CHECK(seq[i].id == par[i].id);
        CHECK(seq[i].score == par[i].score);
    }
    for (std::size_t i = 1; i < seq.size(); ++i) CHECK(seq[i - 1].score >= seq[i].score);

    // single-entry gallery: the mate is trivially rank 1
    GalleryIndex one = tiny_gallery(1, 7, cfg);
    auto only = identify(probe, one, model, cfg, 1);
    CHECK(rank_of(only, "f000") == 1);

    GalleryIndex empty;
    CHECK_THROWS_AS(identify(probe, empty, model, cfg, 1), InputError);
}

TEST_CASE("cmc counting matches hand calculations and a brute-force oracle") {
    auto ranked = [](std::initializer_list<std::pair<const char*, double>> rows) {
        std::vector<ScoredReference> v;
        for (auto [id, s] : rows) v.push_back({id, s, false});
        return v;
    };

    // mates at ranks {1, 2, 2} of 3 probes -> rates (1/3, 1, 1)
    std::vector<std::vector<ScoredReference>> results{
        ranked({{"a", 0.9}, {"b", 0.5}, {"c", 0.1}}),
        ranked({{"a", 0.9}, {"b", 0.5}, {"c", 0.1}}),
        ranked({{"b", 0.9}, {"c", 0.5}, {"a", 0.1}}),
    };
    CmcCurve curve = cmc(results, {"a", "b", "c"});
    REQUIRE(curve.rate.size() == 3);
    CHECK(curve.rate[0] == doctest::Approx(1.0 / 3.0));
    CHECK(curve.rate[1] == doctest::Approx(1.0));
    CHECK(curve.rate[2] == doctest::Approx(1.0));
    for (std::size_t k = 1; k < curve.rate.size(); ++k)
        CHECK(curve.rate[k] >= curve.rate[k - 1]);

    // mate always rank 1
    CmcCurve ones = cmc({results[0]}, {"a"});
    for (double r : ones.rate) CHECK(r == 1.0);

    // random score matrices vs a brute-force rank counter
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int probes = 12, entries = 9;
    std::vector<std::vector<ScoredReference>> rand_results(probes);
    std::vector<std::string> mates(probes);
    std::vector<std::vector<double>> scores(probes, std::vector<double>(entries));
    for (int p = 0; p < probes; ++p) {
        std::vector<ScoredReference> row(entries);
        for (int e = 0; e < entries; ++e) {
            row[e].id = std::string(1, static_cast<char>('a' + e));
            row[e].score = scores[p][e] = u(rng);
        }
        std::sort(row.begin(), row.end(), [](const ScoredReference& a, const ScoredReference& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.id < b.id;
        });
        rand_results[p] = row;
        mates[p] = std::string(1, static_cast<char>('a' + static_cast<int>(rng() % entries)));
    }
    CmcCurve got = cmc(rand_results, mates);
    for (std::size_t k = 0; k < got.rate.size(); ++k) {
        int hits = 0;
        for (int p = 0; p < probes; ++p) {
            const int mate_idx = mates[p][0] - 'a';
            int better = 0;
            for (int e = 0; e < entries; ++e)
                if (scores[p][e] > scores[p][mate_idx] ||
                    (scores[p][e] == scores[p][mate_idx] && e < mate_idx))
                    ++better;
            if (better < static_cast<int>(k + 1)) ++hits;
        }
        CHECK(got.rate[k] == doctest::Approx(static_cast<double>(hits) / probes));
    }

    CHECK_THROWS_AS(cmc(results, {"a", "b", "zzz"}), InputError);

    const std::string csv = (fs::temp_directory_path() / "fpid_cmc.csv").string();
    save_cmc_csv(curve, csv);
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "rank,rate");
}

TEST_CASE("zero alignment noise preserves the rank") {
    PreprocessConfig cfg = toy_config();
    GalleryIndex gallery = tiny_gallery(3, 11, cfg);
    auto model = net::make_hybrid_model<float>("M", 8, 8, 7);
    Finger probe_finger = synthesize_finger(derive_seed(11, 2), 256, 256, 48.0);
    ImageFeatures probe = preprocess_image(probe_finger.f, cfg);

    PerturbResult res =
        perturb_alignment_check(probe, gallery, model, cfg, "f002", RigidTransform::identity(), 1);
    CHECK(res.rank_before == res.rank_after);

    // extreme noise must degrade gracefully, never crash
    RigidTransform wild;
    wild.dx = 100;
    wild.dy = -100;
    PerturbResult rough =
        perturb_alignment_check(probe, gallery, model, cfg, "f002", wild, 1);
    CHECK(rough.rank_after >= 1);
    CHECK(rough.rank_after <= 3);
}

TEST_CASE("feature-map dumps write contact sheets and validate layer indices") {
    PreprocessConfig cfg = toy_config();
    Finger f = synthesize_finger(201, 256, 256, 48.0);
    ImageFeatures lf = preprocess_image(f.f, cfg);
    ImageFeatures rf = preprocess_image(f.s, cfg);
    PairArtifacts art = preprocess_pair(lf, rf, cfg);
    auto model = net::make_hybrid_model<float>("M", 8, 8, 9);

    const std::string dir = (fs::temp_directory_path() / "fpid_features").string();
    fs::remove_all(dir);
    auto written = dump_feature_maps(model, art.tensors, {4, 1}, {0, 1}, dir);
    REQUIRE(written.size() == 2);
    for (const auto& path : written) CHECK(fs::exists(path));

    CHECK_THROWS_AS(dump_feature_maps(model, art.tensors, {4, 1}, {99}, dir), InputError);
    CHECK_THROWS_AS(dump_feature_maps(model, art.tensors, {9, 9}, {0}, dir), InputError);
    CHECK(mean_layer_activation(model, art.tensors, {4, 1}, 0) > 0.0);
}
