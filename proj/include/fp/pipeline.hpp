#pragma once

#include <string>
#include <vector>

#include "fp/align.hpp"
#include "fp/image.hpp"
#include "fp/net/hybrid.hpp"
#include "fp/net/train.hpp"
#include "fp/orientation.hpp"
#include "fp/synth.hpp"
#include "fp/tensors.hpp"

namespace fp {

struct PreprocessConfig {
    double gabor_freq = 0.125;      // ~8 px ridge period at 500 dpi
    double quality_threshold = 0.9;  // good-quality masks
    double ridge_energy_threshold = 0.04;  // ROI cut on ridge-band energy
    int fomfe_order = 4;
    double hex_side = 12.0;
    int max_minutiae = 32;
    int anchor_margin = 28;  // ROI dilation for hexagon features at the edge
    std::uint64_t seed = 1;  // DLO fallback anchor seed
    int dlo_anchors = 16;
};

// Everything identify needs per fingerprint, computed once.
struct ImageFeatures {
    GrayImage enhanced;
    OrientationField orientation;  // FOMFE-regularized over the ROI
    BinaryMask roi;
    BinaryMask quality;  // coherence >= quality_threshold on the enhanced image
    QualityMap quality_map;
    std::vector<Minutia> minutiae;
    std::vector<AnchorFeature> anchors;  // hexagon features cached per minutia
};

ImageFeatures preprocess_image(const GrayImage& img, const PreprocessConfig& cfg);

struct PairArtifacts {
    PairTensorSet tensors;
    AlignmentResult alignment;
    bool used_fallback_dlo = false;
};

// M-DLO alignment (DLO fallback when no minutia anchor survives), then tensor
// construction. Throws PipelineError with the failing stage name.
PairArtifacts preprocess_pair(const ImageFeatures& latent, const ImageFeatures& reference,
                              const PreprocessConfig& cfg);
PairArtifacts preprocess_pair(const GrayImage& latent, const GrayImage& reference,
                              const PreprocessConfig& cfg, const std::string& debug_dir = "");

struct GalleryEntry {
    std::string id;
    ImageFeatures features;
};

struct GalleryIndex {
    std::vector<GalleryEntry> entries;
    std::string params_hash;
};

GalleryIndex build_gallery(const std::vector<std::pair<std::string, GrayImage>>& references,
                           const PreprocessConfig& cfg, int workers = 1);

struct ScoredReference {
    std::string id;
    double score = 0.0;
    bool failed = false;  // preprocessing failed; scored as -inf
};

// hybrid_score against every entry, descending, ties by id; identical output
// for every worker count.
std::vector<ScoredReference> identify(const ImageFeatures& probe, const GalleryIndex& gallery,
                                      const net::HybridModel<float>& model,
                                      const PreprocessConfig& cfg, int workers = 1);

// 1-based rank of the mate in a ranked list.
int rank_of(const std::vector<ScoredReference>& ranked, const std::string& mate_id);

struct CmcCurve {
    std::vector<double> rate;  // rate[k] = identification rate at rank k+1
    int probes = 0;
};

CmcCurve cmc(const std::vector<std::vector<ScoredReference>>& results,
             const std::vector<std::string>& mate_ids);

void save_cmc_csv(const CmcCurve& curve, const std::string& path);

struct PerturbResult {
    int rank_before = 0;
    int rank_after = 0;
};

// Appendix-D style robustness probe: the mate pair's alignment gets the noise
// transform composed on top, its score is recomputed, and the list re-ranks.
PerturbResult perturb_alignment_check(const ImageFeatures& probe, const GalleryIndex& gallery,
                                      const net::HybridModel<float>& model,
                                      const PreprocessConfig& cfg, const std::string& mate_id,
                                      const RigidTransform& noise, int workers = 1);

// Debug dump: the sliding-window patches of one tensor tiled into a PNG
// contact sheet (channel 0 of each patch).
void save_patch_contact_sheet(const PairTensor& tensor, int patch_size, const std::string& path);

// Per-channel activation contact sheets for the requested layers of one
// model, evaluated on a centered patch of the pair. Returns written paths.
std::vector<std::string> dump_feature_maps(const net::HybridModel<float>& model,
                                           const PairTensorSet& tensors, net::ModelId id,
                                           const std::vector<int>& layers,
                                           const std::string& out_dir);

// Mean activation magnitude of one layer on the centered patch (feature-map
// polarity checks in tests).
double mean_layer_activation(const net::HybridModel<float>& model, const PairTensorSet& tensors,
                             net::ModelId id, int layer);

// Loads the manifest's images, preprocesses them once each, aligns every
// listed pair, and returns training-ready tensors. Pairs whose alignment
// fails are skipped (latents can defeat preprocessing; training must not
// abort).
std::vector<net::TrainingPair> prepare_training_pairs(const DatasetManifest& manifest,
                                                      const PreprocessConfig& cfg,
                                                      int workers = 1,
                                                      std::vector<std::string>* notes = nullptr);

struct BenchResult {
    int entries = 0;
    int workers = 0;
    double seq_seconds_per_pair = 0.0;
    double par_seconds_per_pair = 0.0;
    double speedup = 0.0;
};

// Times identify() with one worker and with `workers`; same ranked output is
// asserted internally.
BenchResult bench_identify(const ImageFeatures& probe, const GalleryIndex& gallery,
                           const net::HybridModel<float>& model, const PreprocessConfig& cfg,
                           int workers);

}  // namespace fp
