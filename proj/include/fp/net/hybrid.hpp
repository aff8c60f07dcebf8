#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fp/net/network.hpp"
#include "fp/net/rbm.hpp"
#include "fp/tensors.hpp"

namespace fp::net {

// Fig-3 style naming: networks 1..4 are cCNNs over patch sizes
// {64, 80, 96, 192}; networks 5..8 are pCNNs over atomic sizes
// {32, 48, 64, 96}. Model index within a cCNN network: 1 = FIT, 2 = OFT.
// Within a pCNN network: 1 = FIT/A, 2 = FIT/B, 3 = OFT/A, 4 = OFT/B.
struct ModelId {
    int network = 1;
    int index = 1;
};

struct ModelSpec {
    ModelId id;
    TensorKind kind = TensorKind::FIT;
    MacroMethod method = MacroMethod::A;  // pCNN only
    int patch_size = 64;

    bool is_pcnn() const { return id.network >= 5; }
    std::string name() const;
};

int ccnn_size_for_network(int network);  // 1..4
int pcnn_size_for_network(int network);  // 5..8

// Model subsets for the ablation configurations M, M-Half, M-C, M-F.
std::vector<ModelSpec> ablation_model_specs(const std::string& name);

template <typename T>
struct CnnModel {
    ModelSpec spec;
    NetworkSpec net;
    NetWeights<T> weights;
};

template <typename T>
struct HybridModel {
    std::vector<CnnModel<T>> models;  // canonical (network, index) order
    RbmParams rbm;
    std::uint64_t seed = 0;
    int width_base = 16;
    std::string ablation = "M";
    bool phase1_done = false, phase2_done = false, phase3_done = false;
};

template <typename T>
HybridModel<T> make_hybrid_model(const std::string& ablation, int width_base, int rbm_hidden,
                                 std::uint64_t seed, int fc_width = 128, double dropout = 0.5);

// Eval-mode pooled output of one model: per order, every patch (or
// macro-patch) of the model's stream runs through the network and the match
// probabilities are averaged; the two order outputs are then averaged into
// one scalar. Tensors smaller than the required window are padded first.
template <typename T>
double model_output(const CnnModel<T>& model, const PairTensorSet& tensors);

// Eval output for a single stacking order (1 or 2).
template <typename T>
double model_order_output(const CnnModel<T>& model, const PairTensorSet& tensors, int order);

// All pooled scalars in canonical model order. Parallel across
// (model, order) tasks with a deterministic gather.
template <typename T>
std::vector<double> ensemble_outputs(const HybridModel<T>& model, const PairTensorSet& tensors,
                                     int workers = 1);

template <typename T>
double hybrid_score(const HybridModel<T>& model, const PairTensorSet& tensors, int workers = 1);

// One training sample of a model's patch stream: a window (cCNN) or a macro
// center (pCNN) in one stacking order of one pair.
struct TrainSample {
    int pair_index = 0;
    int order = 1;
    int x0 = 0, y0 = 0;
    bool resized = false;  // cCNN 192 whole-tensor resize
};

// Enumerates a model's training stream on one pair: sliding windows (plus the
// 192 whole-resize) for cCNNs, macro centers for pCNNs. FIT streams are
// quality-gated; OFT streams are not.
std::vector<TrainSample> enumerate_training_samples(const ModelSpec& spec,
                                                    const PairTensorSet& tensors, int pair_index,
                                                    bool gated);

// Materializes network input for samples[begin, end). cCNN batches are
// (B, c, j, j); pCNN batches are (B*9, c, j, j) with each macro's atomics
// contiguous in (dy, dx) row-major order.
template <typename T>
TensorND<T> gather_batch(const CnnModel<T>& model,
                         const std::vector<const PairTensorSet*>& pairs,
                         const std::vector<TrainSample>& samples, std::size_t begin,
                         std::size_t end);

void save_hybrid_model(const HybridModel<float>& model, const std::string& dir);
HybridModel<float> load_hybrid_model(const std::string& dir);

}  // namespace fp::net
