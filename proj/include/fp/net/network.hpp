#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fp/net/tensor.hpp"

namespace fp::net {

enum class LayerType { Conv, Relu, MaxPool, FullyConnected, Dropout, Softmax, CombineConv };

struct LayerSpec {
    LayerType type = LayerType::Conv;
    int kernel = 0;        // Conv / CombineConv
    int out_channels = 0;  // Conv / CombineConv
    int pad = 0;           // Conv
    int units = 0;         // FullyConnected
    double rate = 0.0;     // Dropout
};

// Architecture I/II: conv(3x3, pad 1) + relu + maxpool blocks until the
// spatial extent is <= 12, an adaptive unpadded conv down to 1x1, then
// FC -> dropout -> FC(2) -> softmax. Architecture II is the same rule at
// 192 input, which yields exactly one more conv+pool block than size 96.
// Architecture III wraps the architecture-I stack for its atomic size and
// appends a 3x3 convolution over the 3x3x2 map of the nine atomic softmax
// outputs, followed by a final softmax.
struct NetworkSpec {
    int arch = 1;  // 1, 2, or 3
    int input_size = 0;
    int input_channels = 0;
    int width_base = 16;
    std::vector<LayerSpec> layers;
    int sub_layer_count = 0;  // arch 3: leading layers forming the atomic sub-network

    bool is_macro() const { return arch == 3; }
};

NetworkSpec build_network(int arch, int input_size, int input_channels, int width_base,
                          int fc_width = 128, double dropout_rate = 0.5);

// Parameter blocks parallel to spec.layers (empty for parameter-free layers).
template <typename T>
struct NetWeights {
    std::vector<std::vector<T>> w;
    std::vector<std::vector<T>> b;

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& v : w) n += v.size();
        for (const auto& v : b) n += v.size();
        return n;
    }
};

template <typename T>
NetWeights<T> init_weights(const NetworkSpec& spec, std::mt19937_64& rng);

template <typename T>
NetWeights<T> zero_like(const NetWeights<T>& proto);

// Activation cache kept by training-mode forwards for the backward pass.
template <typename T>
struct ForwardCache {
    std::vector<TensorND<T>> acts;                 // acts[0] = input, acts[i+1] = layer i output
    std::vector<std::vector<std::int32_t>> pool_argmax;
    std::vector<std::vector<std::uint8_t>> dropout_mask;
};

// Runs the network. For architecture III the input batch holds nine atomic
// patches per macro-patch, shape (n*9, c, j, j) with each macro's atomics
// contiguous in (dy, dx) row-major order; the output is (n, 2).
// In eval mode dropout is the identity and `cache` may be null.
template <typename T>
TensorND<T> net_forward(const NetworkSpec& spec, const NetWeights<T>& weights,
                        const TensorND<T>& input, bool train_mode = false,
                        std::uint64_t dropout_seed = 0, ForwardCache<T>* cache = nullptr);

// Backward pass from the gradient on the final pre-softmax logits (n, 2).
// Seeding at the logits keeps cross-entropy gradients finite for saturated
// probabilities. Returns the gradient wrt the input batch when
// grad_input != nullptr.
template <typename T>
void net_backward(const NetworkSpec& spec, const NetWeights<T>& weights,
                  const ForwardCache<T>& cache, const TensorND<T>& grad_logits,
                  NetWeights<T>& grad_weights, TensorND<T>* grad_input = nullptr);

// Converts an upstream gradient on the softmax *output* probabilities into
// the equivalent gradient on its input logits.
template <typename T>
TensorND<T> softmax_output_grad_to_logits(const TensorND<T>& probs, const TensorND<T>& grad_probs);

// Shape bookkeeping (spatial extent and channels after each layer).
struct LayerShape {
    int channels = 0;
    int height = 0;
    int width = 0;
    int features = 0;  // for FC stages; 0 while spatial
};
std::vector<LayerShape> layer_shapes(const NetworkSpec& spec);

const char* layer_type_name(LayerType t);

}  // namespace fp::net
