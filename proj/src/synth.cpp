#include "fp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "fp/errors.hpp"
#include "fp/io.hpp"
#include "fp/orientation.hpp"
#include "fp/parallel.hpp"
#include "fp/resample.hpp"

namespace fp {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 over seed ^ golden-ratio-scrambled index
    std::uint64_t z = seed ^ (index * 0x9e3779b97f4a7c15ULL + 0xbf58476d1ce4e5b9ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

DistortionParams sample_distortion_params(std::mt19937_64& rng, int image_width,
                                          int image_height) {
    if (image_height <= 0) image_height = image_width;
    const double b = image_width / 2.0;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

    DistortionParams p;
    p.l = uniform(0.5, 2.0);
    p.theta = uniform(0.0, 5.0);
    p.ax = uniform(-15.0, 15.0);
    p.ay = uniform(-15.0, 15.0);
    p.orx = uniform(image_width / 4.0, 3.0 * image_width / 4.0);
    p.ory = uniform(image_height / 4.0, 3.0 * image_height / 4.0);
    p.oex = uniform(image_width / 4.0, 3.0 * image_width / 4.0);
    p.oey = uniform(image_height / 4.0, 3.0 * image_height / 4.0);
    p.sx = uniform(0.2 * b, 0.6 * b);
    p.sy = uniform(0.2 * b, 1.2 * b);
    return p;
}

double ellipse_distance(Vec2 v, const DistortionParams& params) {
    const double dx = (v.x - params.oex) / params.sx;
    const double dy = (v.y - params.oey) / params.sy;
    return std::sqrt(dx * dx + dy * dy) - 1.0;
}

double transition(double f_value, double l) {
    if (f_value < 0.0) return 0.0;
    if (f_value < l) return 0.5 * (1.0 - std::cos(kPi * f_value / l));
    return 1.0;
}

Vec2 displacement(Vec2 v, const DistortionParams& params) {
    const double rad = params.theta * kPi / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    const double rx = v.x - params.orx, ry = v.y - params.ory;
    // R_theta = [cos sin; -sin cos]
    const double tx = c * rx + s * ry + params.orx + params.ax;
    const double ty = -s * rx + c * ry + params.ory + params.ay;
    return {tx - v.x, ty - v.y};
}

GrayImage plastic_distort(const GrayImage& img, const DistortionParams& params) {
    GrayImage out(img.width, img.height);
    out.dpi = img.dpi;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            // invert v' = v + D(v) g(f(v), l) by fixed-point iteration
            Vec2 v{static_cast<double>(x), static_cast<double>(y)};
            for (int it = 0; it < 5; ++it) {
                const Vec2 d = displacement(v, params);
                const double g = transition(ellipse_distance(v, params), params.l);
                v = {x - d.x * g, y - d.y * g};
            }
            const double val = sample_bilinear(img, v.x, v.y, 255.0);
            const double r = std::nearbyint(val);
            out.at(x, y) = static_cast<std::uint8_t>(r < 0 ? 0 : (r > 255 ? 255 : r));
        }
    }
    return out;
}

GrayImage composite_noise(const GrayImage& fp_img, const GrayImage& noise, double intensity) {
    if (intensity < 0.2 || intensity > 0.8)
        throw InputError("noise intensity must lie in [0.2, 0.8]");
    GrayImage n = (noise.width == fp_img.width && noise.height == fp_img.height)
                      ? noise
                      : resize_bilinear(noise, fp_img.width, fp_img.height);
    GrayImage out(fp_img.width, fp_img.height);
    out.dpi = fp_img.dpi;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = (1.0 - intensity) * fp_img.data[i] + intensity * n.data[i];
        const double r = std::nearbyint(v);
        out.data[i] = static_cast<std::uint8_t>(r < 0 ? 0 : (r > 255 ? 255 : r));
    }
    return out;
}

namespace {

constexpr int kSynthGaborHalf = 6;
constexpr int kSynthOrientations = 64;

// Even Gabor bank with the DC removed; used only for ridge synthesis.
std::vector<std::vector<double>> synth_gabor_bank(double freq, double sigma) {
    const int size = 2 * kSynthGaborHalf + 1;
    std::vector<std::vector<double>> bank(kSynthOrientations);
    for (int k = 0; k < kSynthOrientations; ++k) {
        const double theta = kPi * k / kSynthOrientations;
        const double wave = theta + kPi / 2.0;
        const double c = std::cos(wave), s = std::sin(wave);
        auto& ker = bank[k];
        ker.resize(static_cast<std::size_t>(size) * size);
        double sum = 0.0;
        for (int dy = -kSynthGaborHalf; dy <= kSynthGaborHalf; ++dy)
            for (int dx = -kSynthGaborHalf; dx <= kSynthGaborHalf; ++dx) {
                const double xr = dx * c + dy * s;
                const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma)) *
                                 std::cos(2.0 * kPi * freq * xr);
                ker[(dy + kSynthGaborHalf) * size + (dx + kSynthGaborHalf)] = v;
                sum += v;
            }
        const double mean = sum / (size * size);
        for (double& v : ker) v -= mean;
    }
    return bank;
}

}  // namespace

SyntheticRolled generate_synthetic_rolled(std::uint64_t seed, int width, int height,
                                          double roi_radius) {
    if (width < 256 || height < 256)
        throw InputError("synthetic rolled prints need dimensions >= 256");
    if (roi_radius <= 0.0) roi_radius = 0.26 * std::min(width, height);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Random smooth master orientation field from low-order Fourier surfaces.
    const int order = 2;
    const int axis = 2 * order + 1;
    FomfeModel model;
    model.order = order;
    model.width = width;
    model.height = height;
    model.coeff_cos.resize(axis * axis);
    model.coeff_sin.resize(axis * axis);
    auto freq_of = [](int idx) { return idx == 0 ? 0 : (idx + 1) / 2; };
    for (int j = 0; j < axis; ++j)
        for (int i = 0; i < axis; ++i) {
            const int f = freq_of(j) + freq_of(i);
            const double scale = f == 0 ? 1.0 : 1.2 / (1.0 + f);
            model.coeff_cos[j * axis + i] = scale * gauss(rng);
            model.coeff_sin[j * axis + i] = scale * gauss(rng);
        }

    BinaryMask full(width, height, true);
    OrientationField of = fomfe_eval(model, full);

    // Ridge pattern: iterated oriented filtering of white noise.
    const double freq = 1.0 / 8.0;
    auto bank = synth_gabor_bank(freq, 4.0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> field(static_cast<std::size_t>(width) * height);
    for (double& v : field) v = u(rng);

    std::vector<double> next(field.size());
    const int size = 2 * kSynthGaborHalf + 1;
    for (int iter = 0; iter < 3; ++iter) {
        double rms = 0.0;
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                int bin = static_cast<int>(
                    std::floor(wrap_orientation(of.angle(x, y)) * kSynthOrientations / kPi));
                bin = std::min(bin, kSynthOrientations - 1);
                const auto& ker = bank[bin];
                double acc = 0.0;
                for (int dy = -kSynthGaborHalf; dy <= kSynthGaborHalf; ++dy) {
                    const int py = y + dy;
                    if (py < 0 || py >= height) continue;
                    const double* row = field.data() + static_cast<std::size_t>(py) * width;
                    const double* krow = ker.data() + (dy + kSynthGaborHalf) * size;
                    for (int dx = -kSynthGaborHalf; dx <= kSynthGaborHalf; ++dx) {
                        const int px = x + dx;
                        if (px < 0 || px >= width) continue;
                        acc += krow[dx + kSynthGaborHalf] * row[px];
                    }
                }
                next[static_cast<std::size_t>(y) * width + x] = acc;
                rms += acc * acc;
            }
        }
        rms = std::sqrt(rms / next.size()) + 1e-12;
        for (std::size_t i = 0; i < field.size(); ++i)
            field[i] = std::clamp(next[i] / rms, -3.0, 3.0);
    }

    SyntheticRolled out;
    out.image = GrayImage(width, height, 255);
    out.orientation = OrientationField(width, height);
    const double cx = (width - 1) / 2.0, cy = (height - 1) / 2.0;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double dist = std::hypot(x - cx, y - cy);
            if (dist > roi_radius) continue;
            out.image.at(x, y) = field[static_cast<std::size_t>(y) * width + x] > 0.0 ? 0 : 255;
            out.orientation.angle(x, y) = of.angle(x, y);
            out.orientation.validity.set(x, y, true);
        }
    return out;
}

Finger synthesize_finger(std::uint64_t seed, int width, int height, double roi_radius) {
    Finger fg;
    SyntheticRolled master = generate_synthetic_rolled(seed, width, height, roi_radius);
    fg.f = master.image;
    fg.of_f = master.orientation;

    std::mt19937_64 rng(derive_seed(seed, 0x1235813));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    RigidTransform jitter;
    jitter.dx = -6.0 + 12.0 * u01(rng);
    jitter.dy = -6.0 + 12.0 * u01(rng);
    jitter.dtheta = (-4.0 + 8.0 * u01(rng)) * kPi / 180.0;
    jitter.cx = (width - 1) / 2.0;
    jitter.cy = (height - 1) / 2.0;
    fg.s = apply_rigid(fg.f, jitter, 255.0);
    fg.of_s = apply_rigid(fg.of_f, jitter);
    return fg;
}

namespace {

// Low-frequency value noise upsampled from a coarse grid.
std::vector<double> smooth_noise(std::mt19937_64& rng, int width, int height, int cells) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const int gw = cells + 2, gh = cells + 2;
    std::vector<double> grid(static_cast<std::size_t>(gw) * gh);
    for (double& v : grid) v = u01(rng);
    std::vector<double> out(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double gx = static_cast<double>(x) / width * cells;
            const double gy = static_cast<double>(y) / height * cells;
            const int x0 = static_cast<int>(gx), y0 = static_cast<int>(gy);
            const double fx = gx - x0, fy = gy - y0;
            auto g = [&](int xx, int yy) { return grid[static_cast<std::size_t>(yy) * gw + xx]; };
            const double top = g(x0, y0) + fx * (g(x0 + 1, y0) - g(x0, y0));
            const double bot = g(x0, y0 + 1) + fx * (g(x0 + 1, y0 + 1) - g(x0, y0 + 1));
            out[static_cast<std::size_t>(y) * width + x] = top + fy * (bot - top);
        }
    return out;
}

}  // namespace

GrayImage generate_noise_texture(std::uint64_t seed, int width, int height) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_int_distribution<int> kind_pick(0, 3);
    const int kind = kind_pick(rng);

    GrayImage out(width, height, 255);
    switch (kind) {
        case 0: {  // low-frequency shading
            auto n = smooth_noise(rng, width, height, 4);
            for (std::size_t i = 0; i < out.size(); ++i)
                out.data[i] = static_cast<std::uint8_t>(80.0 + 175.0 * n[i]);
            break;
        }
        case 1: {  // dark blotches on light background
            auto n = smooth_noise(rng, width, height, 8);
            for (std::size_t i = 0; i < out.size(); ++i) {
                const double v = n[i];
                out.data[i] = v > 0.62 ? static_cast<std::uint8_t>(40 + 60 * (1.0 - v)) : 230;
            }
            break;
        }
        case 2: {  // line clutter
            const int lines = 6 + static_cast<int>(u01(rng) * 10);
            for (int li = 0; li < lines; ++li) {
                double x0 = u01(rng) * width, y0 = u01(rng) * height;
                double x1 = u01(rng) * width, y1 = u01(rng) * height;
                const int steps = static_cast<int>(std::hypot(x1 - x0, y1 - y0)) + 1;
                const int thick = 1 + static_cast<int>(u01(rng) * 2.0);
                const std::uint8_t shade = static_cast<std::uint8_t>(20 + u01(rng) * 80);
                for (int s = 0; s <= steps; ++s) {
                    const int px = static_cast<int>(x0 + (x1 - x0) * s / steps);
                    const int py = static_cast<int>(y0 + (y1 - y0) * s / steps);
                    for (int dy = -thick; dy <= thick; ++dy)
                        for (int dx = -thick; dx <= thick; ++dx)
                            if (out.in_bounds(px + dx, py + dy)) out.at(px + dx, py + dy) = shade;
                }
            }
            break;
        }
        default: {  // text-like strokes in rows
            for (int row = 12; row < height - 12; row += 24 + static_cast<int>(u01(rng) * 16)) {
                int x = 6 + static_cast<int>(u01(rng) * 20);
                while (x < width - 12) {
                    const int len = 4 + static_cast<int>(u01(rng) * 10);
                    const int lift = static_cast<int>(u01(rng) * 5) - 2;
                    for (int s = 0; s < len && x + s < width; ++s) {
                        const int py = row + lift + static_cast<int>(2.5 * std::sin(s * 0.9));
                        if (out.in_bounds(x + s, py)) out.at(x + s, py) = 30;
                        if (out.in_bounds(x + s, py + 1)) out.at(x + s, py + 1) = 60;
                    }
                    x += len + 3 + static_cast<int>(u01(rng) * 6);
                }
            }
            break;
        }
    }
    return out;
}

std::vector<GrayImage> make_noise_bank(std::uint64_t seed, int count, int width, int height) {
    std::vector<GrayImage> bank(count);
    for (int i = 0; i < count; ++i) bank[i] = generate_noise_texture(derive_seed(seed, i), width, height);
    return bank;
}

std::vector<GrayImage> load_noise_bank(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string ext = e.path().extension().string();
        if (ext == ".png" || ext == ".pgm") paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw InputError("no .png/.pgm noise images in " + dir);
    std::vector<GrayImage> bank;
    bank.reserve(paths.size());
    for (const auto& p : paths) bank.push_back(load_image(p));
    return bank;
}

namespace {

std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Content-addressed path relative to the dataset root, so manifests stay
// byte-identical wherever the dataset lands.
std::string content_relpath(const GrayImage& img) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(img.data)));
    return "images/" + std::string(buf, 2) + "/" + std::string(buf) + ".png";
}

const char* to_string(PairLabel l) { return l == PairLabel::Genuine ? "genuine" : "impostor"; }
const char* to_string(Split s) { return s == Split::CnnTrain ? "cnn_train" : "rbm_train"; }

}  // namespace

void save_manifest(const DatasetManifest& m, const std::string& path) {
    nlohmann::json j;
    j["seed"] = m.seed;
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : m.entries) {
        entries.push_back({{"latent_path", e.latent_path},
                           {"reference_path", e.reference_path},
                           {"finger_id", e.finger_id},
                           {"impression_label", std::string(1, e.impression)},
                           {"pair_label", to_string(e.pair_label)},
                           {"split", to_string(e.split)}});
    }
    j["entries"] = std::move(entries);
    std::ofstream out(path);
    if (!out) throw InputError("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open manifest: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    DatasetManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    const std::string root = std::filesystem::path(path).parent_path().string();
    auto resolve = [&root](const std::string& p) {
        return (!p.empty() && p.front() == '/') || root.empty() ? p : root + "/" + p;
    };
    for (const auto& je : j.at("entries")) {
        DatasetEntry e;
        e.latent_path = resolve(je.at("latent_path").get<std::string>());
        e.reference_path = resolve(je.at("reference_path").get<std::string>());
        e.finger_id = je.at("finger_id").get<int>();
        e.impression = je.at("impression_label").get<std::string>().at(0);
        e.pair_label =
            je.at("pair_label") == "impostor" ? PairLabel::Impostor : PairLabel::Genuine;
        e.split = je.at("split") == "rbm_train" ? Split::RbmTrain : Split::CnnTrain;
        m.entries.push_back(e);
    }
    return m;
}

DatasetManifest build_dataset(const std::vector<Finger>& fingers,
                              const std::vector<GrayImage>& noise_bank,
                              const DatasetConfig& cfg, const std::string& out_dir) {
    if (fingers.size() < 2) throw InputError("dataset needs at least 2 fingers");
    if (noise_bank.empty()) throw InputError("noise bank is empty");
    namespace fs = std::filesystem;
    fs::create_directories(out_dir + "/images");

    const int n = static_cast<int>(fingers.size());
    struct Latent {
        GrayImage image;
        int finger = 0;
        char impression = 'f';
    };
    std::vector<Latent> latents(static_cast<std::size_t>(n) * 2);

    // one derived stream per latent sample
    parallel_for(2 * n, cfg.workers, [&](std::int64_t idx) {
        const int finger = static_cast<int>(idx / 2);
        const char impression = (idx % 2 == 0) ? 'f' : 's';
        const GrayImage& src = impression == 'f' ? fingers[finger].f : fingers[finger].s;
        std::mt19937_64 rng(derive_seed(cfg.seed, 0x10000 + idx));
        DistortionParams params = sample_distortion_params(rng, src.width, src.height);
        GrayImage distorted = plastic_distort(src, params);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        const std::size_t pick =
            std::min(noise_bank.size() - 1,
                     static_cast<std::size_t>(u01(rng) * static_cast<double>(noise_bank.size())));
        const GrayImage& noise = noise_bank[pick];
        if (cfg.window_hi > 0.0) {
            // latents show a limited finger area; outside the visibility
            // window only background remains
            const double dim = std::min(src.width, src.height);
            const double radius =
                dim * (cfg.window_lo + (cfg.window_hi - cfg.window_lo) * u01(rng));
            const double jitter = dim * cfg.window_jitter;
            const double wx = (src.width - 1) / 2.0 + (2.0 * u01(rng) - 1.0) * jitter;
            const double wy = (src.height - 1) / 2.0 + (2.0 * u01(rng) - 1.0) * jitter;
            for (int y = 0; y < distorted.height; ++y)
                for (int x = 0; x < distorted.width; ++x)
                    if (std::hypot(x - wx, y - wy) > radius) distorted.at(x, y) = 255;
        }
        const double intensity = cfg.noise_lo + (cfg.noise_hi - cfg.noise_lo) * u01(rng);
        latents[idx] = {composite_noise(distorted, noise, intensity), finger, impression};
    });

    // write unique images once; manifest entries hold dataset-relative paths
    auto write_image = [&](const GrayImage& img) {
        const std::string rel = content_relpath(img);
        const std::string path = out_dir + "/" + rel;
        fs::create_directories(fs::path(path).parent_path());
        if (!fs::exists(path)) save_png(img, path);
        return rel;
    };

    std::vector<std::string> rolled_f(n), rolled_s(n);
    for (int i = 0; i < n; ++i) {
        rolled_f[i] = write_image(fingers[i].f);
        rolled_s[i] = write_image(fingers[i].s);
    }

    std::mt19937_64 rng(derive_seed(cfg.seed, 0xdead));
    std::vector<DatasetEntry> entries;
    for (const Latent& lat : latents) {
        const std::string latent_path = write_image(lat.image);
        DatasetEntry genuine;
        genuine.latent_path = latent_path;
        // latent from f pairs with rolled s and vice versa
        genuine.reference_path = lat.impression == 'f' ? rolled_s[lat.finger] : rolled_f[lat.finger];
        genuine.finger_id = lat.finger;
        genuine.impression = lat.impression;
        genuine.pair_label = PairLabel::Genuine;
        entries.push_back(genuine);

        std::uniform_int_distribution<int> other(0, n - 2);
        int mate = other(rng);
        if (mate >= lat.finger) ++mate;
        std::uniform_int_distribution<int> imp(0, 1);
        DatasetEntry impostor = genuine;
        impostor.reference_path = imp(rng) == 0 ? rolled_f[mate] : rolled_s[mate];
        impostor.pair_label = PairLabel::Impostor;
        entries.push_back(impostor);
    }

    // 80/20 split at pair granularity
    std::vector<int> perm(entries.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t n_cnn = static_cast<std::size_t>(
        std::llround(cfg.split_cnn * static_cast<double>(entries.size())));
    for (std::size_t k = 0; k < perm.size(); ++k)
        entries[perm[k]].split = k < n_cnn ? Split::CnnTrain : Split::RbmTrain;

    DatasetManifest manifest;
    manifest.seed = cfg.seed;
    manifest.entries = std::move(entries);
    save_manifest(manifest, out_dir + "/manifest.json");
    // callers get usable paths; the file on disk keeps relative ones
    for (auto& e : manifest.entries) {
        e.latent_path = out_dir + "/" + e.latent_path;
        e.reference_path = out_dir + "/" + e.reference_path;
    }
    return manifest;
}

}  // namespace fp
