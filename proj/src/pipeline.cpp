#include "fp/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <unordered_map>

#include "fp/enhance.hpp"
#include "fp/errors.hpp"
#include "fp/io.hpp"
#include "fp/parallel.hpp"
#include "fp/resample.hpp"

namespace fp {

namespace {

// Largest 4-connected component; keeps clutter specks out of the ROI.
BinaryMask largest_component(const BinaryMask& mask) {
    BinaryMask out(mask.width, mask.height);
    std::vector<int> label(mask.data.size(), -1);
    int best_label = -1;
    std::size_t best_size = 0;
    int next = 0;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < mask.data.size(); ++start) {
        if (!mask.data[start] || label[start] >= 0) continue;
        std::size_t size = 0;
        stack.push_back(start);
        label[start] = next;
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            ++size;
            const int x = static_cast<int>(i % mask.width);
            const int y = static_cast<int>(i / mask.width);
            const int nx[4] = {x - 1, x + 1, x, x};
            const int ny[4] = {y, y, y - 1, y + 1};
            for (int k = 0; k < 4; ++k) {
                if (nx[k] < 0 || nx[k] >= mask.width || ny[k] < 0 || ny[k] >= mask.height)
                    continue;
                const std::size_t j = static_cast<std::size_t>(ny[k]) * mask.width + nx[k];
                if (mask.data[j] && label[j] < 0) {
                    label[j] = next;
                    stack.push_back(j);
                }
            }
        }
        if (size > best_size) {
            best_size = size;
            best_label = next;
        }
        ++next;
    }
    if (best_label >= 0)
        for (std::size_t i = 0; i < out.data.size(); ++i)
            out.data[i] = label[i] == best_label ? 1 : 0;
    return out;
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
    BinaryMask out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            bool hit = false;
            for (int dy = -radius; dy <= radius && !hit; ++dy)
                for (int dx = -radius; dx <= radius && !hit; ++dx) {
                    const int px = x + dx, py = y + dy;
                    if (px >= 0 && px < mask.width && py >= 0 && py < mask.height &&
                        mask.at(px, py))
                        hit = true;
                }
            out.set(x, y, hit);
        }
    return out;
}

GrayImage box_blur3(const GrayImage& img) {
    GrayImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            int sum = 0, n = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int px = x + dx, py = y + dy;
                    if (px < 0 || px >= img.width || py < 0 || py >= img.height) continue;
                    sum += img.at(px, py);
                    ++n;
                }
            out.at(x, y) = static_cast<std::uint8_t>((sum + n / 2) / n);
        }
    return out;
}

// Box majority vote smoothing for the segmentation mask.
BinaryMask majority_filter(const BinaryMask& mask, int radius) {
    BinaryMask out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            int inside = 0, total = 0;
            for (int dy = -radius; dy <= radius; ++dy)
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int px = x + dx, py = y + dy;
                    if (px < 0 || px >= mask.width || py < 0 || py >= mask.height) continue;
                    ++total;
                    inside += mask.at(px, py) ? 1 : 0;
                }
            out.set(x, y, 2 * inside >= total);
        }
    }
    return out;
}

}  // namespace

ImageFeatures preprocess_image(const GrayImage& img, const PreprocessConfig& cfg) {
    ImageFeatures f;

    BinaryMask full(img.width, img.height, true);
    OrientationField raw_of = estimate_orientation_field(img, full);
    f.enhanced = gabor_enhance(img, raw_of, cfg.gabor_freq);

    // ROI = where the image carries energy in the ridge band; smooth shading
    // and clutter noise fall out here
    QualityMap energy = ridge_band_energy(img, raw_of, cfg.gabor_freq);
    f.roi = largest_component(majority_filter(quality_mask(energy, cfg.ridge_energy_threshold), 4));
    for (std::size_t i = 0; i < f.enhanced.size(); ++i)
        if (!f.roi.data[i]) f.enhanced.data[i] = 255;

    // the binarized enhancement has staircase edges; a light blur restores
    // gradient alignment before the coherence measure
    f.quality_map = coherence_quality_map(box_blur3(f.enhanced));
    for (std::size_t i = 0; i < f.quality_map.data.size(); ++i)
        if (!f.roi.data[i]) f.quality_map.data[i] = 0.0;
    // majority vote fills the speckle holes the threshold leaves at minutiae
    // and high-curvature spots
    f.quality = majority_filter(quality_mask(f.quality_map, cfg.quality_threshold), 3);

    OrientationField enhanced_of = estimate_orientation_field(f.enhanced, f.roi);
    OrientationField anchor_field;
    try {
        // fit on the ROI bounding box (plus margin) so the Fourier periods
        // match the print extent instead of the full frame
        int x0 = img.width, y0 = img.height, x1 = -1, y1 = -1;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                if (f.roi.at(x, y)) {
                    x0 = std::min(x0, x);
                    y0 = std::min(y0, y);
                    x1 = std::max(x1, x);
                    y1 = std::max(y1, y);
                }
        if (x1 < x0) throw PipelineError("fomfe", "empty ROI");
        const int margin = 16;
        x0 = std::max(0, x0 - margin);
        y0 = std::max(0, y0 - margin);
        x1 = std::min(img.width - 1, x1 + margin);
        y1 = std::min(img.height - 1, y1 + margin);
        const int cw = x1 - x0 + 1, ch = y1 - y0 + 1;

        OrientationField cropped(cw, ch);
        for (int y = 0; y < ch; ++y)
            for (int x = 0; x < cw; ++x) {
                cropped.angle(x, y) = enhanced_of.angle(x0 + x, y0 + y);
                cropped.validity.set(x, y, enhanced_of.valid(x0 + x, y0 + y));
            }
        FomfeModel fomfe = fomfe_fit(cropped, cfg.fomfe_order);

        BinaryMask crop_roi(cw, ch), crop_ext(cw, ch);
        BinaryMask roi_ext = dilate(f.roi, cfg.anchor_margin);
        for (int y = 0; y < ch; ++y)
            for (int x = 0; x < cw; ++x) {
                crop_roi.set(x, y, f.roi.at(x0 + x, y0 + y));
                crop_ext.set(x, y, roi_ext.at(x0 + x, y0 + y));
            }
        OrientationField fitted = fomfe_eval(fomfe, crop_roi);
        OrientationField fitted_ext = fomfe_eval(fomfe, crop_ext);

        f.orientation = OrientationField(img.width, img.height);
        anchor_field = OrientationField(img.width, img.height);
        for (int y = 0; y < ch; ++y)
            for (int x = 0; x < cw; ++x) {
                if (fitted.valid(x, y)) {
                    f.orientation.angle(x0 + x, y0 + y) = fitted.angle(x, y);
                    f.orientation.validity.set(x0 + x, y0 + y, true);
                }
                if (fitted_ext.valid(x, y)) {
                    anchor_field.angle(x0 + x, y0 + y) = fitted_ext.angle(x, y);
                    anchor_field.validity.set(x0 + x, y0 + y, true);
                }
            }
    } catch (const PipelineError&) {
        // degenerate mask; fall back to the raw estimate so downstream stages
        // can still report a clean alignment failure
        f.orientation = enhanced_of;
        anchor_field = enhanced_of;
    }

    f.minutiae = extract_minutiae(skeletonize(f.enhanced), f.orientation, f.quality_map);
    if (static_cast<int>(f.minutiae.size()) > cfg.max_minutiae)
        f.minutiae.resize(cfg.max_minutiae);
    f.anchors = minutia_anchor_features(anchor_field, f.minutiae, cfg.hex_side);
    return f;
}

PairArtifacts preprocess_pair(const ImageFeatures& latent, const ImageFeatures& reference,
                              const PreprocessConfig& cfg) {
    AlignConfig acfg;
    acfg.side = cfg.hex_side;
    acfg.dlo_anchors = cfg.dlo_anchors;

    PairArtifacts out;
    auto aligned = align_from_anchors(latent.orientation, reference.orientation, latent.anchors,
                                      reference.anchors, acfg);
    if (!aligned) {
        out.used_fallback_dlo = true;
        aligned = dlo_align(latent.orientation, reference.orientation, cfg.seed, acfg);
    }
    if (!aligned) throw PipelineError("minutiae/fallback-DLO", "alignment failed");
    out.alignment = *aligned;

    FingerprintInput lat{latent.enhanced, latent.orientation, latent.roi, latent.quality};
    FingerprintInput ref{reference.enhanced, reference.orientation, reference.roi,
                         reference.quality};
    auto tensors = build_pair_tensors(lat, ref, out.alignment.transform);
    if (!tensors) throw PipelineError("tensors", "empty overlap between masks");
    out.tensors = std::move(*tensors);
    return out;
}

PairArtifacts preprocess_pair(const GrayImage& latent, const GrayImage& reference,
                              const PreprocessConfig& cfg, const std::string& debug_dir) {
    ImageFeatures lf = preprocess_image(latent, cfg);
    ImageFeatures rf = preprocess_image(reference, cfg);
    if (!debug_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(debug_dir);
        save_png(lf.enhanced, debug_dir + "/latent_enhanced.png");
        save_png(rf.enhanced, debug_dir + "/reference_enhanced.png");
        save_mask(lf.roi, debug_dir + "/latent_roi.pgm");
        save_mask(rf.roi, debug_dir + "/reference_roi.pgm");
        save_orientation_field(lf.orientation, debug_dir + "/latent_of.bin");
        save_orientation_field(rf.orientation, debug_dir + "/reference_of.bin");
        save_minutiae(lf.minutiae, debug_dir + "/latent_minutiae.json");
        save_minutiae(rf.minutiae, debug_dir + "/reference_minutiae.json");
    }
    return preprocess_pair(lf, rf, cfg);
}

namespace {

std::string hash_config(const PreprocessConfig& cfg) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%g|%g|%g|%d|%g|%d|%llu|%d", cfg.gabor_freq,
                  cfg.quality_threshold, cfg.ridge_energy_threshold, cfg.fomfe_order,
                  cfg.hex_side, cfg.max_minutiae, static_cast<unsigned long long>(cfg.seed),
                  cfg.dlo_anchors);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char* p = buf; *p; ++p) {
        h ^= static_cast<unsigned char>(*p);
        h *= 0x100000001b3ULL;
    }
    char out[24];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

}  // namespace

GalleryIndex build_gallery(const std::vector<std::pair<std::string, GrayImage>>& references,
                           const PreprocessConfig& cfg, int workers) {
    GalleryIndex index;
    index.params_hash = hash_config(cfg);
    index.entries.resize(references.size());
    parallel_for(static_cast<std::int64_t>(references.size()), workers, [&](std::int64_t i) {
        index.entries[i].id = references[i].first;
        index.entries[i].features = preprocess_image(references[i].second, cfg);
    });
    for (std::size_t i = 1; i < index.entries.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (index.entries[i].id == index.entries[j].id)
                throw InputError("duplicate gallery id: " + index.entries[i].id);
    return index;
}

std::vector<ScoredReference> identify(const ImageFeatures& probe, const GalleryIndex& gallery,
                                      const net::HybridModel<float>& model,
                                      const PreprocessConfig& cfg, int workers) {
    if (gallery.entries.empty()) throw InputError("empty gallery");
    std::vector<ScoredReference> scored(gallery.entries.size());
    parallel_for(static_cast<std::int64_t>(gallery.entries.size()), workers, [&](std::int64_t i) {
        ScoredReference& s = scored[i];
        s.id = gallery.entries[i].id;
        try {
            PairArtifacts art = preprocess_pair(probe, gallery.entries[i].features, cfg);
            s.score = net::hybrid_score(model, art.tensors, 1);
        } catch (const PipelineError&) {
            s.score = -std::numeric_limits<double>::infinity();
            s.failed = true;
        }
    });
    std::sort(scored.begin(), scored.end(), [](const ScoredReference& a, const ScoredReference& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    return scored;
}

int rank_of(const std::vector<ScoredReference>& ranked, const std::string& mate_id) {
    for (std::size_t i = 0; i < ranked.size(); ++i)
        if (ranked[i].id == mate_id) return static_cast<int>(i) + 1;
    throw InputError("mate id not present in ranked list: " + mate_id);
}

CmcCurve cmc(const std::vector<std::vector<ScoredReference>>& results,
             const std::vector<std::string>& mate_ids) {
    if (results.size() != mate_ids.size())
        throw InputError("results/mates size mismatch in cmc()");
    CmcCurve curve;
    curve.probes = static_cast<int>(results.size());
    std::size_t max_rank = 0;
    for (const auto& r : results) max_rank = std::max(max_rank, r.size());
    std::vector<int> rank_hits(max_rank + 1, 0);
    for (std::size_t p = 0; p < results.size(); ++p) {
        const int r = rank_of(results[p], mate_ids[p]);  // throws when absent
        rank_hits[static_cast<std::size_t>(r)]++;
    }
    curve.rate.resize(max_rank);
    int cum = 0;
    for (std::size_t k = 1; k <= max_rank; ++k) {
        cum += rank_hits[k];
        curve.rate[k - 1] = static_cast<double>(cum) / static_cast<double>(curve.probes);
    }
    return curve;
}

void save_cmc_csv(const CmcCurve& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    out << "rank,rate\n";
    for (std::size_t k = 0; k < curve.rate.size(); ++k)
        out << (k + 1) << "," << curve.rate[k] << "\n";
}

PerturbResult perturb_alignment_check(const ImageFeatures& probe, const GalleryIndex& gallery,
                                      const net::HybridModel<float>& model,
                                      const PreprocessConfig& cfg, const std::string& mate_id,
                                      const RigidTransform& noise, int workers) {
    std::vector<ScoredReference> before = identify(probe, gallery, model, cfg, workers);
    PerturbResult res;
    res.rank_before = rank_of(before, mate_id);

    const GalleryEntry* mate = nullptr;
    for (const auto& e : gallery.entries)
        if (e.id == mate_id) mate = &e;
    if (!mate) throw InputError("mate id not in gallery: " + mate_id);

    double noised_score = -std::numeric_limits<double>::infinity();
    try {
        PairArtifacts art = preprocess_pair(probe, mate->features, cfg);
        RigidTransform noised =
            noise.with_center((probe.enhanced.width - 1) / 2.0, (probe.enhanced.height - 1) / 2.0)
                .compose(art.alignment.transform);
        FingerprintInput lat{probe.enhanced, probe.orientation, probe.roi, probe.quality};
        FingerprintInput ref{mate->features.enhanced, mate->features.orientation,
                             mate->features.roi, mate->features.quality};
        auto tensors = build_pair_tensors(lat, ref, noised);
        if (tensors) noised_score = net::hybrid_score(model, *tensors, 1);
    } catch (const PipelineError&) {
    }

    std::vector<ScoredReference> after = before;
    for (auto& s : after)
        if (s.id == mate_id) {
            s.score = noised_score;
            s.failed = !std::isfinite(noised_score);
        }
    std::sort(after.begin(), after.end(), [](const ScoredReference& a, const ScoredReference& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    res.rank_after = rank_of(after, mate_id);
    return res;
}

namespace {

const net::CnnModel<float>& find_model(const net::HybridModel<float>& model, net::ModelId id) {
    for (const auto& m : model.models)
        if (m.spec.id.network == id.network && m.spec.id.index == id.index) return m;
    throw InputError("model " + std::to_string(id.network) + "," + std::to_string(id.index) +
                     " not in this ensemble");
}

// Centered representative patch of the order-1 tensor for feature dumps.
net::TensorND<float> representative_patch(const net::CnnModel<float>& m,
                                          const PairTensorSet& tensors) {
    const PairTensor& raw =
        m.spec.kind == TensorKind::FIT ? tensors.fit1 : tensors.oft1;
    const int j = m.spec.patch_size;
    if (!m.spec.is_pcnn() && j == 192) {
        Patch whole = resize_whole_patch(raw, j);
        net::TensorND<float> t({1, raw.channels, j, j});
        std::copy(whole.data.begin(), whole.data.end(), t.data.begin());
        return t;
    }
    const PairTensor padded = pad_to(raw, j);
    const int x0 = ((padded.width - j) / 2 / 16) * 16;
    const int y0 = ((padded.height - j) / 2 / 16) * 16;
    net::TensorND<float> t({1, padded.channels, j, j});
    Patch p = extract_patch(padded, j, x0, y0);
    std::copy(p.data.begin(), p.data.end(), t.data.begin());
    return t;
}

GrayImage tile_channels(const net::TensorND<float>& act) {
    const int c = act.dim(1), h = act.dim(2), w = act.dim(3);
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(c))));
    const int rows = (c + cols - 1) / cols;
    const int gap = 2;
    GrayImage sheet(cols * (w + gap) + gap, rows * (h + gap) + gap, 32);
    for (int ch = 0; ch < c; ++ch) {
        const float* plane = act.ptr() + static_cast<std::size_t>(ch) * h * w;
        float lo = plane[0], hi = plane[0];
        for (int i = 1; i < h * w; ++i) {
            lo = std::min(lo, plane[i]);
            hi = std::max(hi, plane[i]);
        }
        const float scale = hi > lo ? 255.0f / (hi - lo) : 0.0f;
        const int ox = gap + (ch % cols) * (w + gap);
        const int oy = gap + (ch / cols) * (h + gap);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const float v = (plane[y * w + x] - lo) * scale;
                sheet.at(ox + x, oy + y) = static_cast<std::uint8_t>(std::clamp(v, 0.0f, 255.0f));
            }
    }
    return sheet;
}

}  // namespace

void save_patch_contact_sheet(const PairTensor& tensor, int patch_size, const std::string& path) {
    const PairTensor padded = pad_to(tensor, patch_size);
    auto grid = patch_grid(padded.width, padded.height, patch_size);
    if (grid.empty()) throw InputError("tensor yields no patches at this size");
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(grid.size()))));
    const int rows = (static_cast<int>(grid.size()) + cols - 1) / cols;
    const int gap = 2;
    GrayImage sheet(cols * (patch_size + gap) + gap, rows * (patch_size + gap) + gap, 32);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const int ox = gap + (static_cast<int>(k) % cols) * (patch_size + gap);
        const int oy = gap + (static_cast<int>(k) / cols) * (patch_size + gap);
        for (int y = 0; y < patch_size; ++y)
            for (int x = 0; x < patch_size; ++x) {
                const float v = padded.at(0, grid[k].first + x, grid[k].second + y);
                sheet.at(ox + x, oy + y) =
                    static_cast<std::uint8_t>(std::clamp(v * 255.0f, 0.0f, 255.0f));
            }
    }
    save_png(sheet, path);
}

std::vector<std::string> dump_feature_maps(const net::HybridModel<float>& model,
                                           const PairTensorSet& tensors, net::ModelId id,
                                           const std::vector<int>& layers,
                                           const std::string& out_dir) {
    const net::CnnModel<float>& m = find_model(model, id);
    const net::NetworkSpec& spec_net = m.net;
    for (int l : layers)
        if (l < 0 || l >= static_cast<int>(spec_net.layers.size()))
            throw InputError("layer index " + std::to_string(l) + " out of range (network has " +
                             std::to_string(spec_net.layers.size()) + " layers)");

    net::TensorND<float> input = representative_patch(m, tensors);
    net::ForwardCache<float> cache;
    net::net_forward(spec_net, m.weights, input, false, 0, &cache);

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::vector<std::string> written;
    for (int l : layers) {
        const net::TensorND<float>& act = cache.acts[static_cast<std::size_t>(l) + 1];
        GrayImage sheet;
        if (act.shape.size() == 4) {
            sheet = tile_channels(act);
        } else {
            const int f = static_cast<int>(act.count());
            net::TensorND<float> as4(std::vector<int>{1, 1, 1, f});
            as4.data = act.data;
            sheet = tile_channels(as4);
        }
        const std::string path = out_dir + "/" + m.spec.name() + "_layer" + std::to_string(l) +
                                 std::string("_") + net::layer_type_name(spec_net.layers[l].type) +
                                 ".png";
        save_png(sheet, path);
        written.push_back(path);
    }
    return written;
}

double mean_layer_activation(const net::HybridModel<float>& model, const PairTensorSet& tensors,
                             net::ModelId id, int layer) {
    const net::CnnModel<float>& m = find_model(model, id);
    if (layer < 0 || layer >= static_cast<int>(m.net.layers.size()))
        throw InputError("layer index out of range");
    net::TensorND<float> input = representative_patch(m, tensors);
    net::ForwardCache<float> cache;
    net::net_forward(m.net, m.weights, input, false, 0, &cache);
    const auto& act = cache.acts[static_cast<std::size_t>(layer) + 1];
    double sum = 0.0;
    for (float v : act.data) sum += std::fabs(static_cast<double>(v));
    return act.data.empty() ? 0.0 : sum / static_cast<double>(act.data.size());
}

std::vector<net::TrainingPair> prepare_training_pairs(const DatasetManifest& manifest,
                                                      const PreprocessConfig& cfg, int workers,
                                                      std::vector<std::string>* notes) {
    // preprocess each unique image once
    std::vector<std::string> paths;
    std::unordered_map<std::string, int> path_index;
    for (const auto& e : manifest.entries) {
        for (const std::string& p : {e.latent_path, e.reference_path}) {
            if (path_index.emplace(p, static_cast<int>(paths.size())).second) paths.push_back(p);
        }
    }
    std::vector<ImageFeatures> features(paths.size());
    parallel_for(static_cast<std::int64_t>(paths.size()), workers, [&](std::int64_t i) {
        features[i] = preprocess_image(load_image(paths[i]), cfg);
    });

    std::vector<net::TrainingPair> pairs(manifest.entries.size());
    std::vector<std::uint8_t> ok(manifest.entries.size(), 0);
    parallel_for(static_cast<std::int64_t>(manifest.entries.size()), workers, [&](std::int64_t i) {
        const DatasetEntry& e = manifest.entries[i];
        try {
            PairArtifacts art = preprocess_pair(features[path_index.at(e.latent_path)],
                                                features[path_index.at(e.reference_path)], cfg);
            pairs[i].tensors = std::move(art.tensors);
            pairs[i].label = e.pair_label == PairLabel::Genuine ? 1 : 0;
            pairs[i].split = e.split;
            ok[i] = 1;
        } catch (const PipelineError&) {
        }
    });

    std::vector<net::TrainingPair> out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (ok[i])
            out.push_back(std::move(pairs[i]));
        else if (notes)
            notes->push_back("skipped unalignable pair: " + manifest.entries[i].latent_path);
    }
    return out;
}

BenchResult bench_identify(const ImageFeatures& probe, const GalleryIndex& gallery,
                           const net::HybridModel<float>& model, const PreprocessConfig& cfg,
                           int workers) {
    using clock = std::chrono::steady_clock;
    BenchResult res;
    res.entries = static_cast<int>(gallery.entries.size());
    res.workers = workers;

    const auto t0 = clock::now();
    auto seq = identify(probe, gallery, model, cfg, 1);
    const auto t1 = clock::now();
    auto par = identify(probe, gallery, model, cfg, workers);
    const auto t2 = clock::now();

    for (std::size_t i = 0; i < seq.size(); ++i)
        if (seq[i].id != par[i].id || seq[i].score != par[i].score)
            throw PipelineError("bench", "worker-count-dependent ranking detected");

    res.seq_seconds_per_pair =
        std::chrono::duration<double>(t1 - t0).count() / std::max(1, res.entries);
    res.par_seconds_per_pair =
        std::chrono::duration<double>(t2 - t1).count() / std::max(1, res.entries);
    res.speedup = res.par_seconds_per_pair > 0.0
                      ? res.seq_seconds_per_pair / res.par_seconds_per_pair
                      : 0.0;
    return res;
}

}  // namespace fp
