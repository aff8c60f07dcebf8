#include "fp/net/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "fp/errors.hpp"
#include "fp/net/layers.hpp"
#include "fp/parallel.hpp"

namespace fp::net {

namespace {

constexpr int kStride = 16;

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed ^ (salt * 0x9e3779b97f4a7c15ULL + 0xd6e8feb86659fd93ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

const PairTensor& tensor_for(const PairTensorSet& ts, TensorKind kind, int order) {
    if (kind == TensorKind::FIT) return order == 1 ? ts.fit1 : ts.fit2;
    return order == 1 ? ts.oft1 : ts.oft2;
}

NetworkSpec sub_network(const NetworkSpec& spec) {
    NetworkSpec sub = spec;
    sub.arch = 1;
    sub.layers.assign(spec.layers.begin(), spec.layers.begin() + spec.sub_layer_count);
    sub.sub_layer_count = 0;
    return sub;
}

template <typename T>
NetWeights<T> sub_weights(const NetWeights<T>& w, int count) {
    NetWeights<T> sub;
    sub.w.assign(w.w.begin(), w.w.begin() + count);
    sub.b.assign(w.b.begin(), w.b.begin() + count);
    return sub;
}

template <typename T>
std::size_t batch_rows_for(int channels, int size) {
    const std::size_t bytes_per = static_cast<std::size_t>(channels) * size * size * sizeof(T);
    const std::size_t budget = 4u << 20;
    return std::clamp<std::size_t>(budget / std::max<std::size_t>(bytes_per, 1), 1, 64);
}

// Copies one window of the tensor into a batch slot.
template <typename T>
void copy_window(const PairTensor& t, int size, int x0, int y0, T* dst) {
    for (int c = 0; c < t.channels; ++c) {
        const float* plane = t.plane(c);
        for (int y = 0; y < size; ++y) {
            const float* row = plane + static_cast<std::size_t>(y0 + y) * t.width + x0;
            for (int x = 0; x < size; ++x) *dst++ = static_cast<T>(row[x]);
        }
    }
}

template <typename T>
void copy_patch_data(const Patch& p, T* dst) {
    for (float v : p.data) *dst++ = static_cast<T>(v);
}

}  // namespace

std::string ModelSpec::name() const {
    std::string base = is_pcnn() ? "pCNN" : "cCNN";
    return base + "_" + std::to_string(id.network) + "," + std::to_string(id.index);
}

int ccnn_size_for_network(int network) {
    static constexpr int sizes[4] = {64, 80, 96, 192};
    return sizes[network - 1];
}

int pcnn_size_for_network(int network) {
    static constexpr int sizes[4] = {32, 48, 64, 96};
    return sizes[network - 5];
}

std::vector<ModelSpec> ablation_model_specs(const std::string& name) {
    std::vector<ModelSpec> all;
    for (int n = 1; n <= 4; ++n) {
        for (int i = 1; i <= 2; ++i) {
            ModelSpec m;
            m.id = {n, i};
            m.kind = i == 1 ? TensorKind::FIT : TensorKind::OFT;
            m.patch_size = ccnn_size_for_network(n);
            all.push_back(m);
        }
    }
    for (int n = 5; n <= 8; ++n) {
        for (int i = 1; i <= 4; ++i) {
            ModelSpec m;
            m.id = {n, i};
            m.kind = i <= 2 ? TensorKind::FIT : TensorKind::OFT;
            m.method = (i % 2 == 1) ? MacroMethod::A : MacroMethod::B;
            m.patch_size = pcnn_size_for_network(n);
            all.push_back(m);
        }
    }

    if (name == "M" || name.empty()) return all;
    std::vector<ModelSpec> out;
    if (name == "M-Half") {
        // drop cCNN_1, cCNN_3, pCNN_5, pCNN_7 with all their models
        for (const auto& m : all)
            if (m.id.network != 1 && m.id.network != 3 && m.id.network != 5 && m.id.network != 7)
                out.push_back(m);
    } else if (name == "M-C") {
        for (const auto& m : all)
            if (!m.is_pcnn()) out.push_back(m);
    } else if (name == "M-F") {
        for (const auto& m : all)
            if (m.kind == TensorKind::FIT) out.push_back(m);
    } else {
        throw InputError("unknown ablation configuration: " + name);
    }
    return out;
}

template <typename T>
HybridModel<T> make_hybrid_model(const std::string& ablation, int width_base, int rbm_hidden,
                                 std::uint64_t seed, int fc_width, double dropout) {
    HybridModel<T> hm;
    hm.seed = seed;
    hm.width_base = width_base;
    hm.ablation = ablation.empty() ? "M" : ablation;
    for (const ModelSpec& spec : ablation_model_specs(hm.ablation)) {
        CnnModel<T> m;
        m.spec = spec;
        const int channels = spec.kind == TensorKind::FIT ? 2 : 4;
        const int arch = spec.is_pcnn() ? 3 : (spec.patch_size == 192 ? 2 : 1);
        m.net = build_network(arch, spec.patch_size, channels, width_base, fc_width, dropout);
        std::mt19937_64 rng(mix(seed, static_cast<std::uint64_t>(spec.id.network * 8 + spec.id.index)));
        m.weights = init_weights<T>(m.net, rng);
        hm.models.push_back(std::move(m));
    }
    std::mt19937_64 rbm_rng(mix(seed, 0x5b3));
    hm.rbm = rbm_init(rbm_hidden, static_cast<int>(hm.models.size()), rbm_rng);
    return hm;
}

template <typename T>
double model_order_output(const CnnModel<T>& model, const PairTensorSet& tensors, int order) {
    const ModelSpec& spec = model.spec;
    const PairTensor& raw = tensor_for(tensors, spec.kind, order);

    double sum = 0.0;
    std::size_t count = 0;

    if (!spec.is_pcnn()) {
        const int j = spec.patch_size;
        const PairTensor t = pad_to(raw, j);
        auto grid = patch_grid(t.width, t.height, j, kStride);
        const std::size_t rows = batch_rows_for<T>(t.channels, j);
        for (std::size_t base = 0; base < grid.size(); base += rows) {
            const std::size_t nb = std::min(rows, grid.size() - base);
            TensorND<T> batch({static_cast<int>(nb), t.channels, j, j});
            for (std::size_t b = 0; b < nb; ++b)
                copy_window(t, j, grid[base + b].first, grid[base + b].second,
                            batch.ptr() + b * static_cast<std::size_t>(t.channels) * j * j);
            TensorND<T> out =
                net_forward(model.net, model.weights, batch);
            for (std::size_t b = 0; b < nb; ++b) sum += static_cast<double>(out.data[b * 2 + 1]);
            count += nb;
        }
        if (j == 192) {
            Patch whole = resize_whole_patch(raw, j);
            TensorND<T> batch({1, t.channels, j, j});
            copy_patch_data(whole, batch.ptr());
            TensorND<T> out = net_forward(model.net, model.weights, batch);
            sum += static_cast<double>(out.data[1]);
            ++count;
        }
        return count ? sum / static_cast<double>(count) : 0.5;
    }

    // pCNN: forward every distinct atomic window once, then combine per macro.
    const int j = spec.patch_size;
    const int off = macro_offset(spec.method);
    const int span = j + 2 * off;
    const PairTensor t = pad_to(raw, span);
    auto macros = macro_grid(t.width, t.height, j, spec.method, kStride);
    if (macros.empty()) return 0.5;

    std::vector<std::pair<int, int>> atomics;
    atomics.reserve(macros.size() * 9);
    for (auto [mx, my] : macros)
        for (int dy = -off; dy <= off; dy += off)
            for (int dx = -off; dx <= off; dx += off) atomics.emplace_back(mx + dx, my + dy);
    std::sort(atomics.begin(), atomics.end());
    atomics.erase(std::unique(atomics.begin(), atomics.end()), atomics.end());

    const NetworkSpec sub = sub_network(model.net);
    const NetWeights<T> subw = sub_weights(model.weights, model.net.sub_layer_count);

    std::vector<std::array<T, 2>> probs(atomics.size());
    const std::size_t rows = batch_rows_for<T>(t.channels, j);
    for (std::size_t base = 0; base < atomics.size(); base += rows) {
        const std::size_t nb = std::min(rows, atomics.size() - base);
        TensorND<T> batch({static_cast<int>(nb), t.channels, j, j});
        for (std::size_t b = 0; b < nb; ++b)
            copy_window(t, j, atomics[base + b].first, atomics[base + b].second,
                        batch.ptr() + b * static_cast<std::size_t>(t.channels) * j * j);
        TensorND<T> out = net_forward(sub, subw, batch);
        for (std::size_t b = 0; b < nb; ++b)
            probs[base + b] = {out.data[b * 2], out.data[b * 2 + 1]};
    }

    auto atomic_index = [&](int x, int y) {
        auto it = std::lower_bound(atomics.begin(), atomics.end(), std::make_pair(x, y));
        return static_cast<std::size_t>(it - atomics.begin());
    };

    const int ci = model.net.sub_layer_count;  // combine conv layer index
    const LayerSpec& combine = model.net.layers[ci];
    for (auto [mx, my] : macros) {
        TensorND<T> map({1, 2, 3, 3});
        int a = 0;
        for (int dy = -off; dy <= off; dy += off)
            for (int dx = -off; dx <= off; dx += off, ++a) {
                const std::size_t idx = atomic_index(mx + dx, my + dy);
                map.data[static_cast<std::size_t>(0) * 9 + (a / 3) * 3 + a % 3] = probs[idx][0];
                map.data[static_cast<std::size_t>(1) * 9 + (a / 3) * 3 + a % 3] = probs[idx][1];
            }
        TensorND<T> logits({1, 2, 1, 1});
        conv2d_forward(map.ptr(), 1, 2, 3, 3, model.weights.w[ci].data(),
                       model.weights.b[ci].data(), combine.out_channels, combine.kernel, 0,
                       logits.ptr());
        TensorND<T> pm({1, 2});
        softmax_forward(logits.ptr(), 1, 2, pm.ptr());
        sum += static_cast<double>(pm.data[1]);
        ++count;
    }
    return sum / static_cast<double>(count);
}

template <typename T>
double model_output(const CnnModel<T>& model, const PairTensorSet& tensors) {
    return 0.5 * (model_order_output(model, tensors, 1) + model_order_output(model, tensors, 2));
}

template <typename T>
std::vector<double> ensemble_outputs(const HybridModel<T>& model, const PairTensorSet& tensors,
                                     int workers) {
    const std::size_t n = model.models.size();
    std::vector<double> per_order(n * 2, 0.0);
    parallel_for(static_cast<std::int64_t>(n * 2), workers, [&](std::int64_t task) {
        const std::size_t m = static_cast<std::size_t>(task) / 2;
        const int order = static_cast<int>(task % 2) + 1;
        per_order[task] = model_order_output(model.models[m], tensors, order);
    });
    std::vector<double> out(n);
    for (std::size_t m = 0; m < n; ++m) out[m] = 0.5 * (per_order[m * 2] + per_order[m * 2 + 1]);
    return out;
}

template <typename T>
double hybrid_score(const HybridModel<T>& model, const PairTensorSet& tensors, int workers) {
    const std::vector<double> x = ensemble_outputs(model, tensors, workers);
    return rbm_posterior(model.rbm, x.data())[1];
}

std::vector<TrainSample> enumerate_training_samples(const ModelSpec& spec,
                                                    const PairTensorSet& tensors, int pair_index,
                                                    bool gated) {
    std::vector<TrainSample> out;
    const bool gate = gated && spec.kind == TensorKind::FIT;
    for (int order = 1; order <= 2; ++order) {
        const PairTensor& t = tensor_for(tensors, spec.kind, order);
        if (!spec.is_pcnn()) {
            const int j = spec.patch_size;
            for (auto [x, y] : patch_grid(t.width, t.height, j, kStride)) {
                if (gate &&
                    mask_overlap_fraction(tensors.mask_latent, tensors.mask_reference, x, y, j) <=
                        0.75)
                    continue;
                out.push_back({pair_index, order, x, y, false});
            }
            if (j == 192) out.push_back({pair_index, order, 0, 0, true});
        } else {
            const int j = spec.patch_size;
            const int off = macro_offset(spec.method);
            for (auto [x, y] : macro_grid(t.width, t.height, j, spec.method, kStride)) {
                if (gate) {
                    int qualifying = 0;
                    for (int dy = -off; dy <= off; dy += off)
                        for (int dx = -off; dx <= off; dx += off)
                            if (mask_overlap_fraction(tensors.mask_latent, tensors.mask_reference,
                                                      x + dx, y + dy, j) > 0.75)
                                ++qualifying;
                    if (qualifying <= 4) continue;
                }
                out.push_back({pair_index, order, x, y, false});
            }
        }
    }
    return out;
}

template <typename T>
TensorND<T> gather_batch(const CnnModel<T>& model,
                         const std::vector<const PairTensorSet*>& pairs,
                         const std::vector<TrainSample>& samples, std::size_t begin,
                         std::size_t end) {
    const ModelSpec& spec = model.spec;
    const int j = spec.patch_size;
    const int channels = spec.kind == TensorKind::FIT ? 2 : 4;
    const std::size_t n = end - begin;
    const std::size_t slot = static_cast<std::size_t>(channels) * j * j;

    if (!spec.is_pcnn()) {
        TensorND<T> batch({static_cast<int>(n), channels, j, j});
        for (std::size_t i = 0; i < n; ++i) {
            const TrainSample& s = samples[begin + i];
            const PairTensor& t = tensor_for(*pairs[s.pair_index], spec.kind, s.order);
            if (s.resized) {
                Patch whole = resize_whole_patch(t, j);
                copy_patch_data(whole, batch.ptr() + i * slot);
            } else {
                copy_window(t, j, s.x0, s.y0, batch.ptr() + i * slot);
            }
        }
        return batch;
    }

    const int off = macro_offset(spec.method);
    TensorND<T> batch({static_cast<int>(n * 9), channels, j, j});
    for (std::size_t i = 0; i < n; ++i) {
        const TrainSample& s = samples[begin + i];
        const PairTensor& t = tensor_for(*pairs[s.pair_index], spec.kind, s.order);
        int a = 0;
        for (int dy = -off; dy <= off; dy += off)
            for (int dx = -off; dx <= off; dx += off, ++a)
                copy_window(t, j, s.x0 + dx, s.y0 + dy, batch.ptr() + (i * 9 + a) * slot);
    }
    return batch;
}

namespace {

void write_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_floats(std::ofstream& out, const std::vector<float>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
}

void read_floats(std::ifstream& in, std::vector<float>& v) {
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
}

std::string model_file_name(const ModelSpec& spec) {
    std::string base = spec.is_pcnn() ? "pcnn" : "ccnn";
    return base + "_" + std::to_string(spec.id.network) + "_" + std::to_string(spec.id.index) +
           ".bin";
}

int fc_width_of(const NetworkSpec& net) {
    for (const auto& l : net.layers)
        if (l.type == LayerType::FullyConnected && l.units != 2) return l.units;
    return 128;
}

double dropout_of(const NetworkSpec& net) {
    for (const auto& l : net.layers)
        if (l.type == LayerType::Dropout) return l.rate;
    return 0.5;
}

}  // namespace

void save_hybrid_model(const HybridModel<float>& model, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    nlohmann::json manifest;
    manifest["format"] = "fpid-hybrid-1";
    manifest["seed"] = model.seed;
    manifest["width_base"] = model.width_base;
    manifest["ablation"] = model.ablation;
    manifest["rbm_hidden"] = model.rbm.hidden;
    manifest["phases"] = {model.phase1_done, model.phase2_done, model.phase3_done};
    manifest["size_bindings"] = {{"ccnn", {64, 80, 96, 192}}, {"pcnn", {32, 48, 64, 96}}};
    nlohmann::json files = nlohmann::json::array();

    for (const auto& m : model.models) {
        const std::string file = model_file_name(m.spec);
        files.push_back(file);

        nlohmann::json header;
        header["model"] = {{"network", m.spec.id.network}, {"index", m.spec.id.index}};
        header["kind"] = m.spec.kind == TensorKind::FIT ? "FIT" : "OFT";
        header["method"] = m.spec.method == MacroMethod::A ? "A" : "B";
        header["patch_size"] = m.spec.patch_size;
        header["arch"] = m.net.arch;
        header["input_channels"] = m.net.input_channels;
        header["width_base"] = m.net.width_base;
        header["fc_width"] = fc_width_of(m.net);
        header["dropout"] = dropout_of(m.net);
        header["dtype"] = "float32";
        header["endianness"] = "little";
        nlohmann::json shapes = nlohmann::json::array();
        for (std::size_t i = 0; i < m.weights.w.size(); ++i)
            shapes.push_back({m.weights.w[i].size(), m.weights.b[i].size()});
        header["shapes"] = shapes;

        const std::string body = header.dump();
        std::ofstream out(dir + "/" + file, std::ios::binary);
        if (!out) throw InputError("cannot write " + dir + "/" + file);
        out.write("FPW1", 4);
        write_u32(out, static_cast<std::uint32_t>(body.size()));
        out.write(body.data(), static_cast<std::streamsize>(body.size()));
        for (std::size_t i = 0; i < m.weights.w.size(); ++i) {
            write_floats(out, m.weights.w[i]);
            write_floats(out, m.weights.b[i]);
        }
    }
    manifest["models"] = files;
    manifest["rbm"] = "rbm.bin";

    {
        nlohmann::json header = {{"hidden", model.rbm.hidden},
                                 {"inputs", model.rbm.inputs},
                                 {"dtype", "float32"},
                                 {"endianness", "little"}};
        const std::string body = header.dump();
        std::ofstream out(dir + "/rbm.bin", std::ios::binary);
        out.write("FPR1", 4);
        write_u32(out, static_cast<std::uint32_t>(body.size()));
        out.write(body.data(), static_cast<std::streamsize>(body.size()));
        auto dump = [&](const std::vector<double>& v) {
            std::vector<float> f(v.begin(), v.end());
            write_floats(out, f);
        };
        dump(model.rbm.w);
        dump(model.rbm.u);
        dump(model.rbm.r);
        dump(model.rbm.s);
        dump(model.rbm.t);
    }

    std::ofstream mf(dir + "/manifest.json");
    mf << manifest.dump(2) << "\n";
}

HybridModel<float> load_hybrid_model(const std::string& dir) {
    std::ifstream mf(dir + "/manifest.json");
    if (!mf) throw InputError("cannot open model manifest in " + dir);
    nlohmann::json manifest = nlohmann::json::parse(mf);

    HybridModel<float> model;
    model.seed = manifest.value("seed", std::uint64_t{0});
    model.width_base = manifest.value("width_base", 16);
    model.ablation = manifest.value("ablation", "M");
    if (manifest.contains("phases")) {
        model.phase1_done = manifest["phases"][0].get<bool>();
        model.phase2_done = manifest["phases"][1].get<bool>();
        model.phase3_done = manifest["phases"][2].get<bool>();
    }

    for (const auto& file : manifest.at("models")) {
        std::ifstream in(dir + "/" + file.get<std::string>(), std::ios::binary);
        if (!in) throw InputError("cannot open model file " + file.get<std::string>());
        char magic[4];
        in.read(magic, 4);
        if (std::memcmp(magic, "FPW1", 4) != 0) throw InputError("bad model file magic");
        const std::uint32_t len = read_u32(in);
        std::string body(len, '\0');
        in.read(body.data(), len);
        nlohmann::json header = nlohmann::json::parse(body);

        CnnModel<float> m;
        m.spec.id = {header.at("model").at("network").get<int>(),
                     header.at("model").at("index").get<int>()};
        m.spec.kind = header.at("kind") == "FIT" ? TensorKind::FIT : TensorKind::OFT;
        m.spec.method = header.at("method") == "A" ? MacroMethod::A : MacroMethod::B;
        m.spec.patch_size = header.at("patch_size").get<int>();
        m.net = build_network(header.at("arch").get<int>(), m.spec.patch_size,
                              header.at("input_channels").get<int>(),
                              header.at("width_base").get<int>(), header.at("fc_width").get<int>(),
                              header.at("dropout").get<double>());
        m.weights.w.resize(m.net.layers.size());
        m.weights.b.resize(m.net.layers.size());
        const auto& shapes = header.at("shapes");
        if (shapes.size() != m.net.layers.size()) throw InputError("model shape list mismatch");
        for (std::size_t i = 0; i < m.net.layers.size(); ++i) {
            m.weights.w[i].resize(shapes[i][0].get<std::size_t>());
            m.weights.b[i].resize(shapes[i][1].get<std::size_t>());
            read_floats(in, m.weights.w[i]);
            read_floats(in, m.weights.b[i]);
        }
        if (!in) throw InputError("truncated model file");
        model.models.push_back(std::move(m));
    }

    {
        std::ifstream in(dir + "/rbm.bin", std::ios::binary);
        if (!in) throw InputError("cannot open rbm.bin in " + dir);
        char magic[4];
        in.read(magic, 4);
        if (std::memcmp(magic, "FPR1", 4) != 0) throw InputError("bad rbm file magic");
        const std::uint32_t len = read_u32(in);
        std::string body(len, '\0');
        in.read(body.data(), len);
        nlohmann::json header = nlohmann::json::parse(body);
        model.rbm.hidden = header.at("hidden").get<int>();
        model.rbm.inputs = header.at("inputs").get<int>();
        auto load = [&](std::vector<double>& v, std::size_t count) {
            std::vector<float> f(count);
            read_floats(in, f);
            v.assign(f.begin(), f.end());
        };
        load(model.rbm.w, static_cast<std::size_t>(model.rbm.hidden) * model.rbm.inputs);
        load(model.rbm.u, static_cast<std::size_t>(model.rbm.hidden) * 2);
        load(model.rbm.r, model.rbm.inputs);
        load(model.rbm.s, model.rbm.hidden);
        load(model.rbm.t, 2);
        if (!in) throw InputError("truncated rbm file");
    }
    return model;
}

#define FP_INSTANTIATE_HYBRID(T)                                                                \
    template HybridModel<T> make_hybrid_model<T>(const std::string&, int, int, std::uint64_t,  \
                                                 int, double);                                  \
    template double model_output<T>(const CnnModel<T>&, const PairTensorSet&);                 \
    template double model_order_output<T>(const CnnModel<T>&, const PairTensorSet&, int);      \
    template std::vector<double> ensemble_outputs<T>(const HybridModel<T>&,                    \
                                                     const PairTensorSet&, int);               \
    template double hybrid_score<T>(const HybridModel<T>&, const PairTensorSet&, int);         \
    template TensorND<T> gather_batch<T>(const CnnModel<T>&,                                   \
                                         const std::vector<const PairTensorSet*>&,             \
                                         const std::vector<TrainSample>&, std::size_t,         \
                                         std::size_t);

FP_INSTANTIATE_HYBRID(float)
FP_INSTANTIATE_HYBRID(double)
#undef FP_INSTANTIATE_HYBRID

}  // namespace fp::net
