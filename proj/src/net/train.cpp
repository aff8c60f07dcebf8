#include "fp/net/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fp/errors.hpp"
#include "fp/parallel.hpp"

namespace fp::net {

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed ^ (salt * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

int model_key(const ModelSpec& s) { return s.id.network * 8 + s.id.index; }

void sgd_step(NetWeights<float>& w, const NetWeights<float>& g, NetWeights<float>& vel, float lr,
              float momentum) {
    for (std::size_t i = 0; i < w.w.size(); ++i) {
        for (std::size_t k = 0; k < w.w[i].size(); ++k) {
            vel.w[i][k] = momentum * vel.w[i][k] - lr * g.w[i][k];
            w.w[i][k] += vel.w[i][k];
        }
        for (std::size_t k = 0; k < w.b[i].size(); ++k) {
            vel.b[i][k] = momentum * vel.b[i][k] - lr * g.b[i][k];
            w.b[i][k] += vel.b[i][k];
        }
    }
}

// Memory-aware batch row cap: activations scale with roughly 12x the input
// plane bytes per sample (x9 atomics for macro models).
std::size_t train_batch_cap(const CnnModel<float>& m, int requested) {
    const int ch = m.spec.kind == TensorKind::FIT ? 2 : 4;
    std::size_t per =
        static_cast<std::size_t>(12) * ch * m.spec.patch_size * m.spec.patch_size * sizeof(float);
    if (m.spec.is_pcnn()) per *= 9;
    const std::size_t budget = 192u << 20;
    return std::clamp<std::size_t>(budget / per, 1, static_cast<std::size_t>(requested));
}

// Capped per-(pair, order) subsample of a model's stream, seeded. A macro
// sample costs nine atomic forwards, so pCNN streams get a third of the cap.
std::vector<TrainSample> capped_samples(const ModelSpec& spec, const PairTensorSet& ts,
                                        int pair_index, bool gated, int cap, std::uint64_t seed) {
    std::vector<TrainSample> all = enumerate_training_samples(spec, ts, pair_index, gated);
    if (cap <= 0) return all;
    if (spec.is_pcnn()) cap = std::max(2, cap / 3);
    std::vector<TrainSample> out;
    for (int order = 1; order <= 2; ++order) {
        std::vector<TrainSample> group;
        for (const auto& s : all)
            if (s.order == order) group.push_back(s);
        if (static_cast<int>(group.size()) > cap) {
            std::mt19937_64 rng(mix(seed, static_cast<std::uint64_t>(pair_index) * 4 + order));
            std::shuffle(group.begin(), group.end(), rng);
            group.resize(cap);
        }
        out.insert(out.end(), group.begin(), group.end());
    }
    return out;
}

struct PhaseOneResult {
    double first_bce = 0.0;
    double last_bce = 0.0;
    bool trained = false;
};

PhaseOneResult train_one_cnn(CnnModel<float>& model,
                             const std::vector<const PairTensorSet*>& pair_ptrs,
                             const std::vector<int>& labels, const std::vector<int>& cnn_pairs,
                             const TrainConfig& cfg) {
    const std::uint64_t mseed = mix(cfg.seed, 0xA000 + model_key(model.spec));
    std::mt19937_64 rng(mseed);

    std::vector<TrainSample> samples;
    for (int pi : cnn_pairs) {
        auto s = capped_samples(model.spec, *pair_ptrs[pi], pi, /*gated=*/true,
                                cfg.max_patches_per_model_order, mseed);
        samples.insert(samples.end(), s.begin(), s.end());
    }
    PhaseOneResult res;
    if (samples.empty()) return res;
    res.trained = true;

    NetWeights<float> vel = zero_like(model.weights);
    const std::size_t rows = train_batch_cap(model, cfg.batch);

    for (int epoch = 0; epoch < cfg.epochs_cnn; ++epoch) {
        std::shuffle(samples.begin(), samples.end(), rng);
        double epoch_loss = 0.0;
        std::size_t epoch_n = 0;
        std::size_t step = 0;
        for (std::size_t base = 0; base < samples.size(); base += rows, ++step) {
            const std::size_t end = std::min(samples.size(), base + rows);
            const std::size_t nb = end - base;
            TensorND<float> batch = gather_batch(model, pair_ptrs, samples, base, end);
            ForwardCache<float> cache;
            TensorND<float> probs = net_forward(model.net, model.weights, batch, true,
                                                mix(mseed, 0xE0000 + epoch * 100000 + step), &cache);

            TensorND<float> grad_logits({static_cast<int>(nb), 2});
            for (std::size_t b = 0; b < nb; ++b) {
                const int label = labels[static_cast<std::size_t>(samples[base + b].pair_index)];
                const double p = std::max(static_cast<double>(probs.data[b * 2 + label]), 1e-12);
                epoch_loss += -std::log(p);
                // d(-log p_label)/d logits = (p - onehot) / batch
                grad_logits.data[b * 2] =
                    (probs.data[b * 2] - (label == 0 ? 1.0f : 0.0f)) / static_cast<float>(nb);
                grad_logits.data[b * 2 + 1] =
                    (probs.data[b * 2 + 1] - (label == 1 ? 1.0f : 0.0f)) / static_cast<float>(nb);
            }
            epoch_n += nb;

            NetWeights<float> grads = zero_like(model.weights);
            net_backward(model.net, model.weights, cache, grad_logits, grads);
            sgd_step(model.weights, grads, vel, static_cast<float>(cfg.lr_cnn),
                     static_cast<float>(cfg.momentum));
        }
        const double mean_loss = epoch_loss / static_cast<double>(std::max<std::size_t>(epoch_n, 1));
        if (!std::isfinite(mean_loss))
            throw PipelineError("train", "phase-1 loss diverged for " + model.spec.name());
        if (epoch == 0) res.first_bce = mean_loss;
        res.last_bce = mean_loss;
    }
    return res;
}

// Per-order sample groups and their eval-mode match probabilities; shared by
// the two phase-3 passes.
struct JointModelState {
    std::vector<TrainSample> samples;  // both orders
    int n_order1 = 0, n_order2 = 0;
    double x = 0.5;  // pooled output on the subset
};

JointModelState joint_forward_x(const CnnModel<float>& model,
                                const std::vector<const PairTensorSet*>& pair_ptrs, int pair_index,
                                const TrainConfig& cfg, std::uint64_t subset_seed) {
    JointModelState st;
    st.samples = capped_samples(model.spec, *pair_ptrs[pair_index], pair_index, /*gated=*/false,
                                cfg.max_patches_per_model_order, subset_seed);
    if (st.samples.empty()) return st;
    for (const auto& s : st.samples) (s.order == 1 ? st.n_order1 : st.n_order2)++;

    const std::size_t rows = train_batch_cap(model, cfg.batch);
    double sum1 = 0.0, sum2 = 0.0;
    for (std::size_t base = 0; base < st.samples.size(); base += rows) {
        const std::size_t end = std::min(st.samples.size(), base + rows);
        TensorND<float> batch = gather_batch(model, pair_ptrs, st.samples, base, end);
        TensorND<float> probs = net_forward(model.net, model.weights, batch);
        for (std::size_t b = 0; b < end - base; ++b) {
            const double p = probs.data[b * 2 + 1];
            (st.samples[base + b].order == 1 ? sum1 : sum2) += p;
        }
    }
    const double m1 = st.n_order1 ? sum1 / st.n_order1 : 0.5;
    const double m2 = st.n_order2 ? sum2 / st.n_order2 : 0.5;
    st.x = 0.5 * (m1 + m2);
    return st;
}

void joint_backward_step(CnnModel<float>& model, NetWeights<float>& vel,
                         const std::vector<const PairTensorSet*>& pair_ptrs,
                         const JointModelState& st, double dl_dx, const TrainConfig& cfg) {
    if (st.samples.empty()) return;
    const std::size_t rows = train_batch_cap(model, cfg.batch);
    NetWeights<float> grads = zero_like(model.weights);
    for (std::size_t base = 0; base < st.samples.size(); base += rows) {
        const std::size_t end = std::min(st.samples.size(), base + rows);
        const std::size_t nb = end - base;
        TensorND<float> batch = gather_batch(model, pair_ptrs, st.samples, base, end);
        ForwardCache<float> cache;
        TensorND<float> probs = net_forward(model.net, model.weights, batch, false, 0, &cache);

        // d x_q / d p_i = 1 / (2 * n_patches in that order)
        TensorND<float> grad_probs({static_cast<int>(nb), 2});
        for (std::size_t b = 0; b < nb; ++b) {
            const int n_o = st.samples[base + b].order == 1 ? st.n_order1 : st.n_order2;
            grad_probs.data[b * 2] = 0.0f;
            grad_probs.data[b * 2 + 1] = static_cast<float>(dl_dx / (2.0 * n_o));
        }
        TensorND<float> grad_logits = softmax_output_grad_to_logits(probs, grad_probs);
        net_backward(model.net, model.weights, cache, grad_logits, grads);
    }
    sgd_step(model.weights, grads, vel, static_cast<float>(cfg.lr_joint),
             static_cast<float>(cfg.momentum));
}

}  // namespace

double hybrid_pair_loss(const HybridModel<float>& model, const std::vector<TrainingPair>& pairs,
                        int workers) {
    if (pairs.empty()) return 0.0;
    std::vector<double> losses(pairs.size());
    parallel_for(static_cast<std::int64_t>(pairs.size()), workers, [&](std::int64_t i) {
        const std::vector<double> x = ensemble_outputs(model, pairs[i].tensors, 1);
        const auto post = rbm_posterior(model.rbm, x.data());
        losses[i] = -std::log(std::max(post[pairs[i].label], 1e-300));
    });
    double sum = 0.0;
    for (double l : losses) sum += l;
    return sum / static_cast<double>(pairs.size());
}

HybridModel<float> train_hybrid(const std::vector<TrainingPair>& pairs, const TrainConfig& cfg,
                                TrainLog* log) {
    std::vector<int> cnn_pairs, rbm_pairs;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        (pairs[i].split == Split::CnnTrain ? cnn_pairs : rbm_pairs).push_back(static_cast<int>(i));
    if (cnn_pairs.empty()) throw PipelineError("train", "cnn_train split is empty");
    if (rbm_pairs.empty()) throw PipelineError("train", "rbm_train split is empty");

    std::vector<const PairTensorSet*> pair_ptrs(pairs.size());
    std::vector<int> labels(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        pair_ptrs[i] = &pairs[i].tensors;
        labels[i] = pairs[i].label;
    }

    HybridModel<float> model = make_hybrid_model<float>(cfg.ablation, cfg.width_base,
                                                        cfg.rbm_hidden, cfg.seed, cfg.fc_width,
                                                        cfg.dropout);
    const std::size_t n_models = model.models.size();

    // ---- phase 1: each CNN separately, binary cross-entropy ----
    std::vector<PhaseOneResult> results(n_models);
    parallel_for(static_cast<std::int64_t>(n_models), cfg.workers, [&](std::int64_t m) {
        results[m] = train_one_cnn(model.models[m], pair_ptrs, labels, cnn_pairs, cfg);
    });
    if (log) {
        log->phase1_first_bce.resize(n_models);
        log->phase1_last_bce.resize(n_models);
        for (std::size_t m = 0; m < n_models; ++m) {
            log->phase1_first_bce[m] = results[m].first_bce;
            log->phase1_last_bce[m] = results[m].last_bce;
            if (!results[m].trained)
                log->notes.push_back("no phase-1 samples for " + model.models[m].spec.name());
        }
    }
    model.phase1_done = true;

    // ---- phase 2: RBM on frozen pooled outputs ----
    std::vector<std::vector<double>> xs(rbm_pairs.size());
    std::vector<int> ys(rbm_pairs.size());
    parallel_for(static_cast<std::int64_t>(rbm_pairs.size()), cfg.workers, [&](std::int64_t k) {
        xs[k] = ensemble_outputs(model, pairs[static_cast<std::size_t>(rbm_pairs[k])].tensors, 1);
        ys[k] = labels[static_cast<std::size_t>(rbm_pairs[k])];
    });

    {
        std::mt19937_64 rng(mix(cfg.seed, 0xB000));
        RbmGrads vel = rbm_zero_grads(model.rbm);
        std::vector<int> order(rbm_pairs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        for (int epoch = 0; epoch < cfg.epochs_rbm; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t base = 0; base < order.size();
                 base += static_cast<std::size_t>(cfg.rbm_batch)) {
                const std::size_t end =
                    std::min(order.size(), base + static_cast<std::size_t>(cfg.rbm_batch));
                std::vector<std::vector<double>> bx;
                std::vector<int> by;
                for (std::size_t k = base; k < end; ++k) {
                    bx.push_back(xs[static_cast<std::size_t>(order[k])]);
                    by.push_back(ys[static_cast<std::size_t>(order[k])]);
                }
                RbmGrads g = rbm_zero_grads(model.rbm);
                const double loss = rbm_loss_and_grad(model.rbm, bx, by, g);
                if (!std::isfinite(loss)) throw PipelineError("train", "phase-2 loss diverged");
                rbm_sgd_step(model.rbm, g, vel, cfg.lr_rbm, cfg.momentum);
            }
        }
        RbmGrads scratch = rbm_zero_grads(model.rbm);
        const double end_loss = rbm_loss_and_grad(model.rbm, xs, ys, scratch);
        if (log) log->phase2_loss = end_loss;
    }
    model.phase2_done = true;

    // ---- phase 3: joint fine-tuning ----
    {
        std::vector<NetWeights<float>> vels(n_models);
        for (std::size_t m = 0; m < n_models; ++m) vels[m] = zero_like(model.models[m].weights);
        RbmGrads rbm_vel = rbm_zero_grads(model.rbm);

        std::vector<int> order(rbm_pairs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = rbm_pairs[i];

        for (int epoch = 0; epoch < cfg.epochs_joint; ++epoch) {
            std::mt19937_64 rng(mix(cfg.seed, 0xC000 + epoch));
            std::shuffle(order.begin(), order.end(), rng);
            for (int pi : order) {
                std::vector<JointModelState> states(n_models);
                parallel_for(static_cast<std::int64_t>(n_models), cfg.workers, [&](std::int64_t m) {
                    states[m] = joint_forward_x(
                        model.models[m], pair_ptrs, pi, cfg,
                        mix(cfg.seed, 0xD000 + static_cast<std::uint64_t>(pi) * 64 + m));
                });
                std::vector<double> x(n_models);
                for (std::size_t m = 0; m < n_models; ++m) x[m] = states[m].x;

                std::vector<double> dx(n_models, 0.0);
                RbmGrads rbm_g = rbm_zero_grads(model.rbm);
                const double loss =
                    rbm_input_gradient(model.rbm, x.data(), labels[pi], dx.data(), &rbm_g);
                if (!std::isfinite(loss)) throw PipelineError("train", "phase-3 loss diverged");

                parallel_for(static_cast<std::int64_t>(n_models), cfg.workers, [&](std::int64_t m) {
                    joint_backward_step(model.models[m], vels[m], pair_ptrs, states[m], dx[m], cfg);
                });
                if (!cfg.freeze_rbm_in_joint)
                    rbm_sgd_step(model.rbm, rbm_g, rbm_vel, cfg.lr_joint, cfg.momentum);
            }
        }
        if (log) {
            std::vector<TrainingPair> rbm_set;
            for (int pi : rbm_pairs) rbm_set.push_back(pairs[static_cast<std::size_t>(pi)]);
            log->phase3_loss = hybrid_pair_loss(model, rbm_set, cfg.workers);
        }
    }
    model.phase3_done = true;
    return model;
}

}  // namespace fp::net
