#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "fp/errors.hpp"
#include "fp/io.hpp"
#include "fp/parallel.hpp"
#include "fp/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOpts {
    std::uint64_t seed = 1;
    int workers = 0;  // 0 = hardware default
    std::string config_path;
    std::string debug_dir;
};

std::map<std::string, std::string> load_config_file(const std::string& path) {
    std::map<std::string, std::string> kv;
    if (path.empty()) return kv;
    std::ifstream in(path);
    if (!in) throw fp::InputError("cannot open config file: " + path);
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
        if (!key.empty()) kv[key] = val;
    }
    return kv;
}

void apply_config(const std::map<std::string, std::string>& kv, fp::PreprocessConfig& pre,
                  fp::net::TrainConfig& train) {
    auto geti = [&](const char* k, int& out) {
        if (auto it = kv.find(k); it != kv.end()) out = std::stoi(it->second);
    };
    auto getd = [&](const char* k, double& out) {
        if (auto it = kv.find(k); it != kv.end()) out = std::stod(it->second);
    };
    auto getb = [&](const char* k, bool& out) {
        if (auto it = kv.find(k); it != kv.end()) out = it->second == "1" || it->second == "true";
    };
    getd("gabor_freq", pre.gabor_freq);
    getd("quality_threshold", pre.quality_threshold);
    getd("ridge_energy_threshold", pre.ridge_energy_threshold);
    geti("fomfe_order", pre.fomfe_order);
    getd("hex_side", pre.hex_side);
    geti("max_minutiae", pre.max_minutiae);
    geti("dlo_anchors", pre.dlo_anchors);

    geti("width_base", train.width_base);
    geti("fc_width", train.fc_width);
    getd("dropout", train.dropout);
    geti("rbm_hidden", train.rbm_hidden);
    getd("lr_cnn", train.lr_cnn);
    getd("momentum", train.momentum);
    geti("batch", train.batch);
    geti("epochs_cnn", train.epochs_cnn);
    getd("lr_rbm", train.lr_rbm);
    geti("rbm_batch", train.rbm_batch);
    geti("epochs_rbm", train.epochs_rbm);
    getd("lr_joint", train.lr_joint);
    geti("epochs_joint", train.epochs_joint);
    getb("freeze_rbm_in_joint", train.freeze_rbm_in_joint);
    geti("max_patches_per_model_order", train.max_patches_per_model_order);
}

json transform_json(const fp::RigidTransform& t, double cx, double cy, double cost) {
    const fp::RigidTransform c = t.with_center(cx, cy);
    return json{{"dx", c.dx},
                {"dy", c.dy},
                {"dtheta_deg", c.dtheta * 180.0 / fp::kPi},
                {"cost", cost}};
}

std::vector<std::pair<std::string, fp::GrayImage>> load_reference_dir(const std::string& dir) {
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string ext = e.path().extension().string();
        if (ext == ".png" || ext == ".pgm") paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw fp::InputError("no .png/.pgm images in " + dir);
    std::vector<std::pair<std::string, fp::GrayImage>> out;
    for (const auto& p : paths) out.emplace_back(fs::path(p).stem().string(), fp::load_image(p));
    return out;
}

std::string probe_mate_id(const std::string& stem) {
    const auto sep = stem.find("__");
    return sep == std::string::npos ? stem : stem.substr(0, sep);
}

fp::net::ModelId parse_model_id(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw fp::InputError("--model-id wants \"network,index\"");
    return {std::stoi(s.substr(0, comma)), std::stoi(s.substr(comma + 1))};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Latent fingerprint identification pipeline"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "global RNG seed");
    app.add_option("--workers", g.workers, "worker count (0 = hardware)");
    app.add_option("--config", g.config_path, "key=value config file");
    app.add_option("--debug-dir", g.debug_dir, "dump intermediate artifacts here");

    // ---- synth-dataset ----
    auto* synth_cmd = app.add_subcommand("synth-dataset", "generate a synthetic training dataset");
    int fingers = 50, image_size = 256, noise_images = 16;
    double roi_radius = 0.0, noise_lo = 0.2, noise_hi = 0.8;
    std::string out_dir, noise_dir;
    synth_cmd->add_option("--fingers", fingers, "number of synthetic fingers");
    synth_cmd->add_option("--out", out_dir, "output directory")->required();
    synth_cmd->add_option("--noise-dir", noise_dir, "directory of user noise images");
    synth_cmd->add_option("--image-size", image_size, "print size in pixels (>= 256)");
    synth_cmd->add_option("--roi-radius", roi_radius, "ridge disc radius (0 = default)");
    synth_cmd->add_option("--noise-lo", noise_lo, "minimum noise intensity");
    synth_cmd->add_option("--noise-hi", noise_hi, "maximum noise intensity");

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "train the hybrid model on a dataset");
    std::string dataset_path, model_out, ablation = "M";
    int width_base = 16, cap = 0;
    train_cmd->add_option("--dataset", dataset_path, "dataset manifest.json")->required();
    train_cmd->add_option("--out", model_out, "model output directory")->required();
    train_cmd->add_option("--ablation", ablation, "M, M-Half, M-C, or M-F");
    train_cmd->add_option("--width-base", width_base, "base channel width");
    train_cmd->add_option("--patch-cap", cap, "max patches per model/order/pair (0 = all)");

    // ---- identify ----
    auto* id_cmd = app.add_subcommand("identify", "rank a gallery against one probe");
    std::string model_dir, gallery_dir, probe_path;
    int top_k = 0;
    id_cmd->add_option("--model", model_dir, "trained model directory")->required();
    id_cmd->add_option("--gallery", gallery_dir, "directory of reference images")->required();
    id_cmd->add_option("--probe", probe_path, "probe latent image")->required();
    id_cmd->add_option("--top", top_k, "print only the best K");

    // ---- evaluate ----
    auto* eval_cmd = app.add_subcommand("evaluate", "closed-set identification, CMC as CSV");
    std::string probes_dir, cmc_out = "cmc.csv";
    eval_cmd->add_option("--model", model_dir, "trained model directory")->required();
    eval_cmd->add_option("--gallery", gallery_dir, "directory of reference images")->required();
    eval_cmd->add_option("--probes", probes_dir,
                         "directory of probes named <mateid>__*.png")->required();
    eval_cmd->add_option("--out", cmc_out, "CMC CSV path");

    // ---- align ----
    auto* align_cmd = app.add_subcommand("align", "M-DLO alignment of two fingerprints");
    std::string latent_path, reference_path;
    align_cmd->add_option("--latent", latent_path, "latent image")->required();
    align_cmd->add_option("--reference", reference_path, "reference image")->required();

    // ---- match-pair ----
    auto* match_cmd = app.add_subcommand("match-pair", "score one latent/reference pair");
    match_cmd->add_option("--model", model_dir, "trained model directory")->required();
    match_cmd->add_option("--latent", latent_path, "latent image")->required();
    match_cmd->add_option("--reference", reference_path, "reference image")->required();

    // ---- dump-features ----
    auto* dump_cmd = app.add_subcommand("dump-features", "write layer activation contact sheets");
    std::string model_id_str = "4,1", layers_str = "0,1";
    dump_cmd->add_option("--model", model_dir, "trained model directory")->required();
    dump_cmd->add_option("--latent", latent_path, "latent image")->required();
    dump_cmd->add_option("--reference", reference_path, "reference image")->required();
    dump_cmd->add_option("--model-id", model_id_str, "ensemble member, e.g. 4,1");
    dump_cmd->add_option("--layers", layers_str, "comma-separated layer indices");
    dump_cmd->add_option("--out", out_dir, "output directory")->required();

    // ---- bench ----
    auto* bench_cmd = app.add_subcommand("bench", "gallery scoring throughput, 1 vs N workers");
    int bench_entries = 32;
    bench_cmd->add_option("--model", model_dir, "trained model directory (untrained if omitted)");
    bench_cmd->add_option("--entries", bench_entries, "gallery size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        fp::PreprocessConfig pre;
        fp::net::TrainConfig tcfg;
        apply_config(load_config_file(g.config_path), pre, tcfg);
        pre.seed = g.seed;
        tcfg.seed = g.seed;
        const int workers = g.workers > 0 ? g.workers : fp::default_workers();
        tcfg.workers = workers;

        if (*synth_cmd) {
            if (fingers < 2) throw fp::InputError("--fingers must be >= 2");
            std::vector<fp::Finger> all(fingers);
            fp::parallel_for(fingers, workers, [&](std::int64_t i) {
                all[i] = fp::synthesize_finger(fp::derive_seed(g.seed, i), image_size, image_size,
                                               roi_radius);
            });
            std::vector<fp::GrayImage> bank =
                noise_dir.empty()
                    ? fp::make_noise_bank(fp::derive_seed(g.seed, 0x6e6f), noise_images, image_size,
                                          image_size)
                    : fp::load_noise_bank(noise_dir);
            fp::DatasetConfig dc;
            dc.seed = g.seed;
            dc.noise_lo = noise_lo;
            dc.noise_hi = noise_hi;
            dc.workers = workers;
            fp::DatasetManifest m = fp::build_dataset(all, bank, dc, out_dir);
            json summary = {{"fingers", fingers},
                            {"pairs", m.entries.size()},
                            {"manifest", out_dir + "/manifest.json"}};
            std::cout << summary.dump(2) << "\n";
        } else if (*train_cmd) {
            tcfg.width_base = width_base;
            tcfg.ablation = ablation;
            if (cap > 0) tcfg.max_patches_per_model_order = cap;
            fp::DatasetManifest manifest = fp::load_manifest(dataset_path);
            std::vector<std::string> notes;
            auto pairs = fp::prepare_training_pairs(manifest, pre, workers, &notes);
            for (const auto& n : notes) std::cerr << "note: " << n << "\n";
            fp::net::TrainLog log;
            fp::net::HybridModel<float> model = fp::net::train_hybrid(pairs, tcfg, &log);
            fp::net::save_hybrid_model(model, model_out);
            json j = {{"models", model.models.size()},
                      {"pairs", pairs.size()},
                      {"phase2_loss", log.phase2_loss},
                      {"phase3_loss", log.phase3_loss},
                      {"out", model_out}};
            std::cout << j.dump(2) << "\n";
        } else if (*id_cmd) {
            fp::net::HybridModel<float> model = fp::net::load_hybrid_model(model_dir);
            fp::GalleryIndex gallery = fp::build_gallery(load_reference_dir(gallery_dir), pre, workers);
            fp::ImageFeatures probe = fp::preprocess_image(fp::load_image(probe_path), pre);
            auto ranked = fp::identify(probe, gallery, model, pre, workers);
            json rows = json::array();
            const std::size_t n = top_k > 0 ? std::min<std::size_t>(top_k, ranked.size())
                                            : ranked.size();
            for (std::size_t i = 0; i < n; ++i)
                rows.push_back({{"rank", i + 1},
                                {"id", ranked[i].id},
                                {"score", ranked[i].failed ? -1.0 : ranked[i].score}});
            std::cout << rows.dump(2) << "\n";
        } else if (*eval_cmd) {
            fp::net::HybridModel<float> model = fp::net::load_hybrid_model(model_dir);
            fp::GalleryIndex gallery = fp::build_gallery(load_reference_dir(gallery_dir), pre, workers);
            auto probes = load_reference_dir(probes_dir);
            std::vector<std::vector<fp::ScoredReference>> results(probes.size());
            std::vector<std::string> mates(probes.size());
            for (std::size_t i = 0; i < probes.size(); ++i) {
                fp::ImageFeatures pf = fp::preprocess_image(probes[i].second, pre);
                results[i] = fp::identify(pf, gallery, model, pre, workers);
                mates[i] = probe_mate_id(probes[i].first);
                std::cerr << "probe " << (i + 1) << "/" << probes.size() << " rank "
                          << fp::rank_of(results[i], mates[i]) << "\n";
            }
            fp::CmcCurve curve = fp::cmc(results, mates);
            fp::save_cmc_csv(curve, cmc_out);
            json j = {{"probes", curve.probes},
                      {"rank1", curve.rate.empty() ? 0.0 : curve.rate[0]},
                      {"rank5", curve.rate.size() >= 5 ? curve.rate[4] : curve.rate.back()},
                      {"cmc", cmc_out}};
            std::cout << j.dump(2) << "\n";
        } else if (*align_cmd) {
            fp::GrayImage latent = fp::load_image(latent_path);
            fp::PairArtifacts art = fp::preprocess_pair(latent, fp::load_image(reference_path),
                                                        pre, g.debug_dir);
            std::cout << transform_json(art.alignment.transform, (latent.width - 1) / 2.0,
                                        (latent.height - 1) / 2.0, art.alignment.cost)
                             .dump(2)
                      << "\n";
        } else if (*match_cmd) {
            fp::net::HybridModel<float> model = fp::net::load_hybrid_model(model_dir);
            fp::GrayImage latent = fp::load_image(latent_path);
            fp::PairArtifacts art = fp::preprocess_pair(latent, fp::load_image(reference_path),
                                                        pre, g.debug_dir);
            if (!g.debug_dir.empty()) {
                fp::save_patch_contact_sheet(art.tensors.fit1, 64,
                                             g.debug_dir + "/fit1_patches_64.png");
                fp::save_patch_contact_sheet(art.tensors.oft1, 64,
                                             g.debug_dir + "/oft1_patches_64.png");
            }
            const double score = fp::net::hybrid_score(model, art.tensors, workers);
            json j = {{"score", score},
                      {"transform",
                       transform_json(art.alignment.transform, (latent.width - 1) / 2.0,
                                      (latent.height - 1) / 2.0, art.alignment.cost)}};
            std::cout << j.dump(2) << "\n";
        } else if (*dump_cmd) {
            fp::net::HybridModel<float> model = fp::net::load_hybrid_model(model_dir);
            fp::PairArtifacts art = fp::preprocess_pair(fp::load_image(latent_path),
                                                        fp::load_image(reference_path), pre,
                                                        g.debug_dir);
            std::vector<int> layers;
            std::stringstream ss(layers_str);
            for (std::string tok; std::getline(ss, tok, ',');) layers.push_back(std::stoi(tok));
            auto written = fp::dump_feature_maps(model, art.tensors, parse_model_id(model_id_str),
                                                 layers, out_dir);
            json j = json::array();
            for (const auto& w : written) j.push_back(w);
            std::cout << j.dump(2) << "\n";
        } else if (*bench_cmd) {
            fp::net::HybridModel<float> model =
                model_dir.empty()
                    ? fp::net::make_hybrid_model<float>("M", 8, 16, g.seed)
                    : fp::net::load_hybrid_model(model_dir);
            // synthetic gallery and probe
            std::vector<std::pair<std::string, fp::GrayImage>> refs;
            for (int i = 0; i < bench_entries; ++i) {
                fp::Finger f = fp::synthesize_finger(fp::derive_seed(g.seed, i), 256, 256, 0.0);
                char id[16];
                std::snprintf(id, sizeof(id), "f%03d", i);
                refs.emplace_back(id, f.s);
            }
            fp::GalleryIndex gallery = fp::build_gallery(refs, pre, workers);
            fp::Finger probe_finger = fp::synthesize_finger(fp::derive_seed(g.seed, 0), 256, 256, 0.0);
            fp::ImageFeatures probe = fp::preprocess_image(probe_finger.f, pre);
            fp::BenchResult r = fp::bench_identify(probe, gallery, model, pre, workers);
            std::printf("gallery entries : %d\n", r.entries);
            std::printf("sequential      : %.4f s/pair\n", r.seq_seconds_per_pair);
            std::printf("%2d workers      : %.4f s/pair\n", r.workers, r.par_seconds_per_pair);
            std::printf("speedup         : %.2fx\n", r.speedup);
            json j = {{"entries", r.entries},
                      {"workers", r.workers},
                      {"seq_seconds_per_pair", r.seq_seconds_per_pair},
                      {"par_seconds_per_pair", r.par_seconds_per_pair},
                      {"speedup", r.speedup}};
            std::cout << j.dump(2) << "\n";
        }
        return 0;
    } catch (const fp::InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const fp::PipelineError& e) {
        std::cerr << "pipeline failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
