#include "fp/net/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fp/net/layers.hpp"

namespace fp::net {

namespace {

constexpr int kMaxWidth = 128;
constexpr int kAdaptiveStop = 12;

bool arch1_size(int s) { return s == 32 || s == 48 || s == 64 || s == 80 || s == 96; }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed ^ (salt * 0x9e3779b97f4a7c15ULL + 0x165667b19e3779f9ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

const char* layer_type_name(LayerType t) {
    switch (t) {
        case LayerType::Conv: return "conv";
        case LayerType::Relu: return "relu";
        case LayerType::MaxPool: return "maxpool";
        case LayerType::FullyConnected: return "fc";
        case LayerType::Dropout: return "dropout";
        case LayerType::Softmax: return "softmax";
        case LayerType::CombineConv: return "combine_conv";
    }
    return "?";
}

NetworkSpec build_network(int arch, int input_size, int input_channels, int width_base,
                          int fc_width, double dropout_rate) {
    NetworkSpec spec;
    spec.arch = arch;
    spec.input_size = input_size;
    spec.input_channels = input_channels;
    spec.width_base = width_base;

    if (arch == 1 && !arch1_size(input_size))
        throw std::invalid_argument("architecture I does not support input size " +
                                    std::to_string(input_size));
    if (arch == 2 && input_size != 192)
        throw std::invalid_argument("architecture II expects 192x192 input");
    if (arch == 3 && !(input_size == 32 || input_size == 48 || input_size == 64 || input_size == 96))
        throw std::invalid_argument("architecture III does not support atomic size " +
                                    std::to_string(input_size));

    auto conv_blocks = [&](std::vector<LayerSpec>& layers) {
        int extent = input_size;
        int block = 0;
        while (extent > kAdaptiveStop) {
            const int ch = std::min(width_base << block, kMaxWidth);
            layers.push_back({LayerType::Conv, 3, ch, 1, 0, 0.0});
            layers.push_back({LayerType::Relu});
            layers.push_back({LayerType::MaxPool});
            extent /= 2;
            ++block;
        }
        // adaptive final conv, kernel = remaining extent, no padding, no relu
        const int ch = std::min(width_base << block, kMaxWidth);
        layers.push_back({LayerType::Conv, extent, ch, 0, 0, 0.0});
        return block;
    };

    conv_blocks(spec.layers);
    spec.layers.push_back({LayerType::FullyConnected, 0, 0, 0, fc_width, 0.0});
    spec.layers.push_back({LayerType::Dropout, 0, 0, 0, 0, dropout_rate});
    spec.layers.push_back({LayerType::FullyConnected, 0, 0, 0, 2, 0.0});
    spec.layers.push_back({LayerType::Softmax});

    if (arch == 3) {
        spec.sub_layer_count = static_cast<int>(spec.layers.size());
        spec.layers.push_back({LayerType::CombineConv, 3, 2, 0, 0, 0.0});
        spec.layers.push_back({LayerType::Softmax});
    }
    return spec;
}

std::vector<LayerShape> layer_shapes(const NetworkSpec& spec) {
    std::vector<LayerShape> shapes;
    LayerShape cur{spec.input_channels, spec.input_size, spec.input_size, 0};
    shapes.push_back(cur);
    const int n_layers = static_cast<int>(spec.layers.size());
    for (int i = 0; i < n_layers; ++i) {
        const LayerSpec& l = spec.layers[i];
        switch (l.type) {
            case LayerType::Conv:
                cur.height = cur.height + 2 * l.pad - l.kernel + 1;
                cur.width = cur.width + 2 * l.pad - l.kernel + 1;
                cur.channels = l.out_channels;
                break;
            case LayerType::Relu:
            case LayerType::Dropout:
                break;
            case LayerType::MaxPool:
                cur.height /= 2;
                cur.width /= 2;
                break;
            case LayerType::FullyConnected:
                cur.features = l.units;
                cur.channels = 0;
                cur.height = cur.width = 0;
                break;
            case LayerType::Softmax:
                if (cur.features == 0) {
                    cur.features = cur.channels * std::max(1, cur.height * cur.width);
                    cur.channels = 0;
                    cur.height = cur.width = 0;
                }
                if (spec.arch == 3 && i == spec.sub_layer_count - 1) {
                    // nine atomic softmax outputs reshape into a 3x3x2 map
                    cur = LayerShape{2, 3, 3, 0};
                }
                break;
            case LayerType::CombineConv:
                cur.height = cur.height - l.kernel + 1;
                cur.width = cur.width - l.kernel + 1;
                cur.channels = l.out_channels;
                break;
        }
        shapes.push_back(cur);
    }
    return shapes;
}

namespace {

// Input feature count seen by a parametric layer.
struct ParamShape {
    int w_count = 0;
    int b_count = 0;
    int fan_in = 0;
};

std::vector<ParamShape> param_shapes(const NetworkSpec& spec) {
    std::vector<ParamShape> out(spec.layers.size());
    std::vector<LayerShape> shapes = layer_shapes(spec);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        const LayerShape& in = shapes[i];
        if (l.type == LayerType::Conv || l.type == LayerType::CombineConv) {
            const int ci = in.channels;
            out[i].w_count = l.out_channels * ci * l.kernel * l.kernel;
            out[i].b_count = l.out_channels;
            out[i].fan_in = ci * l.kernel * l.kernel;
        } else if (l.type == LayerType::FullyConnected) {
            const int fi = in.features > 0 ? in.features : in.channels * in.height * in.width;
            out[i].w_count = l.units * fi;
            out[i].b_count = l.units;
            out[i].fan_in = fi;
        }
    }
    return out;
}

}  // namespace

template <typename T>
NetWeights<T> init_weights(const NetworkSpec& spec, std::mt19937_64& rng) {
    NetWeights<T> w;
    w.w.resize(spec.layers.size());
    w.b.resize(spec.layers.size());
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::vector<ParamShape> ps = param_shapes(spec);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        if (ps[i].w_count == 0) continue;
        const double stddev = std::sqrt(2.0 / ps[i].fan_in);
        w.w[i].resize(ps[i].w_count);
        w.b[i].assign(ps[i].b_count, T(0));
        for (auto& v : w.w[i]) v = static_cast<T>(gauss(rng) * stddev);
    }
    return w;
}

template <typename T>
NetWeights<T> zero_like(const NetWeights<T>& proto) {
    NetWeights<T> g;
    g.w.resize(proto.w.size());
    g.b.resize(proto.b.size());
    for (std::size_t i = 0; i < proto.w.size(); ++i) {
        g.w[i].assign(proto.w[i].size(), T(0));
        g.b[i].assign(proto.b[i].size(), T(0));
    }
    return g;
}

namespace {

// Rearranges (n*9, 2) sub-network outputs into the (n, 2, 3, 3) map.
template <typename T>
TensorND<T> atomics_to_map(const TensorND<T>& sub_out) {
    const int n9 = sub_out.dim(0);
    const int n = n9 / 9;
    TensorND<T> map({n, 2, 3, 3});
    for (int m = 0; m < n; ++m)
        for (int a = 0; a < 9; ++a)
            for (int c = 0; c < 2; ++c)
                map.data[((static_cast<std::size_t>(m) * 2 + c) * 3 + a / 3) * 3 + a % 3] =
                    sub_out.data[static_cast<std::size_t>(m * 9 + a) * 2 + c];
    return map;
}

template <typename T>
TensorND<T> map_to_atomics(const TensorND<T>& map_grad) {
    const int n = map_grad.dim(0);
    TensorND<T> out({n * 9, 2});
    for (int m = 0; m < n; ++m)
        for (int a = 0; a < 9; ++a)
            for (int c = 0; c < 2; ++c)
                out.data[static_cast<std::size_t>(m * 9 + a) * 2 + c] =
                    map_grad.data[((static_cast<std::size_t>(m) * 2 + c) * 3 + a / 3) * 3 + a % 3];
    return out;
}

}  // namespace

template <typename T>
TensorND<T> net_forward(const NetworkSpec& spec, const NetWeights<T>& weights,
                        const TensorND<T>& input, bool train_mode, std::uint64_t dropout_seed,
                        ForwardCache<T>* cache) {
    const int n_layers = static_cast<int>(spec.layers.size());
    if (cache) {
        cache->acts.assign(static_cast<std::size_t>(n_layers) + 1, TensorND<T>{});
        cache->pool_argmax.assign(n_layers, {});
        cache->dropout_mask.assign(n_layers, {});
        cache->acts[0] = input;
    }

    TensorND<T> cur = input;
    for (int i = 0; i < n_layers; ++i) {
        const LayerSpec& l = spec.layers[i];
        TensorND<T> next;
        switch (l.type) {
            case LayerType::Conv: {
                const int n = cur.dim(0), c = cur.dim(1), h = cur.dim(2), w = cur.dim(3);
                const int oh = h + 2 * l.pad - l.kernel + 1;
                const int ow = w + 2 * l.pad - l.kernel + 1;
                next = TensorND<T>({n, l.out_channels, oh, ow});
                conv2d_forward(cur.ptr(), n, c, h, w, weights.w[i].data(), weights.b[i].data(),
                               l.out_channels, l.kernel, l.pad, next.ptr());
                break;
            }
            case LayerType::CombineConv: {
                TensorND<T> map = atomics_to_map(cur);
                const int n = map.dim(0);
                next = TensorND<T>({n, l.out_channels, 1, 1});
                conv2d_forward(map.ptr(), n, 2, 3, 3, weights.w[i].data(), weights.b[i].data(),
                               l.out_channels, l.kernel, 0, next.ptr());
                break;
            }
            case LayerType::Relu: {
                next = TensorND<T>(cur.shape);
                relu_forward(cur.ptr(), cur.count(), next.ptr());
                break;
            }
            case LayerType::MaxPool: {
                const int n = cur.dim(0), c = cur.dim(1), h = cur.dim(2), w = cur.dim(3);
                next = TensorND<T>({n, c, h / 2, w / 2});
                std::vector<std::int32_t> argmax(next.count());
                maxpool2_forward(cur.ptr(), n, c, h, w, next.ptr(), argmax.data());
                if (cache) cache->pool_argmax[i] = std::move(argmax);
                break;
            }
            case LayerType::FullyConnected: {
                const int n = cur.dim(0);
                const int fi = static_cast<int>(cur.count()) / n;
                next = TensorND<T>({n, l.units});
                fc_forward(cur.ptr(), n, fi, weights.w[i].data(), weights.b[i].data(), l.units,
                           next.ptr());
                break;
            }
            case LayerType::Dropout: {
                next = TensorND<T>(cur.shape);
                if (train_mode && l.rate > 0.0) {
                    std::vector<std::uint8_t> mask(cur.count());
                    dropout_forward(cur.ptr(), cur.count(), l.rate,
                                    mix_seed(dropout_seed, static_cast<std::uint64_t>(i)),
                                    next.ptr(), mask.data());
                    if (cache) cache->dropout_mask[i] = std::move(mask);
                } else {
                    next.data = cur.data;
                }
                break;
            }
            case LayerType::Softmax: {
                const int n = cur.dim(0);
                const int classes = static_cast<int>(cur.count()) / n;
                next = TensorND<T>({n, classes});
                softmax_forward(cur.ptr(), n, classes, next.ptr());
                break;
            }
        }
        cur = std::move(next);
        if (cache) cache->acts[static_cast<std::size_t>(i) + 1] = cur;
    }
    return cur;
}

template <typename T>
TensorND<T> softmax_output_grad_to_logits(const TensorND<T>& probs, const TensorND<T>& grad_probs) {
    TensorND<T> out(probs.shape);
    const int n = probs.dim(0);
    const int classes = static_cast<int>(probs.count()) / n;
    softmax_backward(probs.ptr(), grad_probs.ptr(), n, classes, out.ptr());
    return out;
}

template <typename T>
void net_backward(const NetworkSpec& spec, const NetWeights<T>& weights,
                  const ForwardCache<T>& cache, const TensorND<T>& grad_logits,
                  NetWeights<T>& grad_weights, TensorND<T>* grad_input) {
    const int n_layers = static_cast<int>(spec.layers.size());
    if (spec.layers.back().type != LayerType::Softmax)
        throw std::logic_error("network must end in softmax");

    // gradient seeded on the logits: skip the final softmax layer
    TensorND<T> grad = grad_logits;
    for (int i = n_layers - 2; i >= 0; --i) {
        const LayerSpec& l = spec.layers[i];
        const TensorND<T>& in = cache.acts[i];
        TensorND<T> grad_prev;
        switch (l.type) {
            case LayerType::Conv: {
                const int n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
                grad_prev = TensorND<T>(in.shape);
                conv2d_backward(in.ptr(), n, c, h, w, weights.w[i].data(), l.out_channels,
                                l.kernel, l.pad, grad.ptr(),
                                (i == 0 && !grad_input) ? nullptr : grad_prev.ptr(),
                                grad_weights.w[i].data(), grad_weights.b[i].data());
                break;
            }
            case LayerType::CombineConv: {
                TensorND<T> map = atomics_to_map(in);
                TensorND<T> grad_map(map.shape);
                const int n = map.dim(0);
                conv2d_backward(map.ptr(), n, 2, 3, 3, weights.w[i].data(), l.out_channels,
                                l.kernel, 0, grad.ptr(), grad_map.ptr(), grad_weights.w[i].data(),
                                grad_weights.b[i].data());
                grad_prev = map_to_atomics(grad_map);
                break;
            }
            case LayerType::Relu: {
                grad_prev = TensorND<T>(in.shape);
                relu_backward(in.ptr(), grad.ptr(), in.count(), grad_prev.ptr());
                break;
            }
            case LayerType::MaxPool: {
                const int n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
                grad_prev = TensorND<T>(in.shape);
                maxpool2_backward_planes(cache.pool_argmax[i].data(), grad.ptr(), n * c,
                                         static_cast<std::size_t>(h / 2) * (w / 2),
                                         static_cast<std::size_t>(h) * w, grad_prev.ptr());
                break;
            }
            case LayerType::FullyConnected: {
                const int n = in.dim(0);
                const int fi = static_cast<int>(in.count()) / n;
                grad_prev = TensorND<T>(in.shape);
                fc_backward(in.ptr(), n, fi, weights.w[i].data(), l.units, grad.ptr(),
                            grad_prev.ptr(), grad_weights.w[i].data(), grad_weights.b[i].data());
                break;
            }
            case LayerType::Dropout: {
                grad_prev = TensorND<T>(in.shape);
                if (!cache.dropout_mask[i].empty()) {
                    dropout_backward(cache.dropout_mask[i].data(), grad.ptr(), in.count(), l.rate,
                                     grad_prev.ptr());
                } else {
                    grad_prev.data = grad.data;
                }
                break;
            }
            case LayerType::Softmax: {
                // interior softmax (architecture III sub-network output)
                const TensorND<T>& out = cache.acts[i + 1];
                const int n = out.dim(0);
                const int classes = static_cast<int>(out.count()) / n;
                grad_prev = TensorND<T>(in.shape);
                softmax_backward(out.ptr(), grad.ptr(), n, classes, grad_prev.ptr());
                break;
            }
        }
        grad = std::move(grad_prev);
    }
    if (grad_input) *grad_input = std::move(grad);
}

#define FP_INSTANTIATE_NET(T)                                                                   \
    template NetWeights<T> init_weights<T>(const NetworkSpec&, std::mt19937_64&);               \
    template NetWeights<T> zero_like<T>(const NetWeights<T>&);                                  \
    template TensorND<T> net_forward<T>(const NetworkSpec&, const NetWeights<T>&,               \
                                        const TensorND<T>&, bool, std::uint64_t,                \
                                        ForwardCache<T>*);                                      \
    template void net_backward<T>(const NetworkSpec&, const NetWeights<T>&,                     \
                                  const ForwardCache<T>&, const TensorND<T>&, NetWeights<T>&,   \
                                  TensorND<T>*);                                                \
    template TensorND<T> softmax_output_grad_to_logits<T>(const TensorND<T>&, const TensorND<T>&);

FP_INSTANTIATE_NET(float)
FP_INSTANTIATE_NET(double)
#undef FP_INSTANTIATE_NET

}  // namespace fp::net
