#pragma once

#include <string>
#include <vector>

#include "fp/net/hybrid.hpp"
#include "fp/synth.hpp"

namespace fp::net {

struct TrainConfig {
    int width_base = 16;
    int fc_width = 128;
    double dropout = 0.5;
    int rbm_hidden = 64;

    double lr_cnn = 0.01;      // phase 1: plain SGD with momentum
    double momentum = 0.9;
    int batch = 64;
    int epochs_cnn = 3;

    double lr_rbm = 0.05;      // phase 2
    int rbm_batch = 16;
    int epochs_rbm = 30;

    double lr_joint = 0.001;   // phase 3
    int epochs_joint = 3;
    bool freeze_rbm_in_joint = false;

    std::uint64_t seed = 1;
    int workers = 1;
    // Training-time cap on each model's stream per (pair, order); 0 = full.
    // The cap keeps desk-scale runs tractable; evaluation always uses the
    // full stream.
    int max_patches_per_model_order = 0;

    std::string ablation = "M";
};

struct TrainingPair {
    PairTensorSet tensors;
    int label = 0;  // 1 = genuine
    Split split = Split::CnnTrain;
};

struct TrainLog {
    std::vector<double> phase1_first_bce, phase1_last_bce;  // per model
    double phase2_loss = 0.0;                               // rbm_train loss at end of phase 2
    double phase3_loss = 0.0;                               // same set at end of phase 3
    std::vector<std::string> notes;
};

// Three phases: each CNN trained separately with binary cross-entropy on its
// own patch stream; the RBM trained on the frozen pooled outputs; joint
// fine-tuning that back-propagates the RBM loss through the pooled means into
// every CNN.
HybridModel<float> train_hybrid(const std::vector<TrainingPair>& pairs, const TrainConfig& cfg,
                                TrainLog* log = nullptr);

// Mean RBM loss -log p(y|x) over pairs using eval-mode pooled outputs.
double hybrid_pair_loss(const HybridModel<float>& model, const std::vector<TrainingPair>& pairs,
                        int workers = 1);

}  // namespace fp::net
