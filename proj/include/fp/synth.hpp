#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fp/image.hpp"

namespace fp {

// Plastic distortion parameters. theta is in degrees; the ellipse semi-axes
// are in pixels with b = half the image width bounding their ranges.
struct DistortionParams {
    double l = 1.0;          // skin plasticity, [0.5, 2]
    double theta = 0.0;      // rotation angle in degrees, [0, 5]
    double ax = 0.0, ay = 0.0;  // displacement, [-15, 15] each
    double orx = 0.0, ory = 0.0;  // rotation center
    double oex = 0.0, oey = 0.0;  // ellipse center
    double sx = 1.0, sy = 1.0;    // semi-axes, [0.2b, 0.6b] and [0.2b, 1.2b]
};

DistortionParams sample_distortion_params(std::mt19937_64& rng, int image_width,
                                          int image_height = -1);

// f(v) = sqrt((v - oe)^T A^-1 (v - oe)) - 1 with A = diag(sx^2, sy^2).
double ellipse_distance(Vec2 v, const DistortionParams& params);

// Gradual transition g: 0 inside the ellipse, raised-cosine ramp on
// 0 < f < l, 1 outside.
double transition(double f_value, double l);

// Torsion + traction displacement (R_theta (v - or) + or + a) - v.
Vec2 displacement(Vec2 v, const DistortionParams& params);

// Warp by v -> v + displacement(v) * g(f(v), l), realized by inverse mapping
// with 5 fixed-point iterations per output pixel and bilinear sampling;
// out-of-source pixels are filled with 255.
GrayImage plastic_distort(const GrayImage& img, const DistortionParams& params);

// clamp((1 - intensity) * fp + intensity * noise); the noise image is resized
// to the fingerprint's dimensions first. intensity must lie in [0.2, 0.8].
GrayImage composite_noise(const GrayImage& fp_img, const GrayImage& noise, double intensity);

// Procedural rolled print: a random smooth orientation field (low-order
// Fourier coefficients from seeded Gaussians) drives iterative oriented
// filtering of white noise at ridge frequency 1/8, producing a binary ridge
// pattern within a centered disc plus its ground-truth orientation field.
// roi_radius <= 0 picks 0.26 * min(width, height).
struct SyntheticRolled {
    GrayImage image;
    OrientationField orientation;
};
SyntheticRolled generate_synthetic_rolled(std::uint64_t seed, int width, int height,
                                          double roi_radius = 0.0);

// One synthetic finger: impression f is the master print, impression s a
// small seeded rigid jitter of it.
struct Finger {
    GrayImage f, s;
    OrientationField of_f, of_s;
};
Finger synthesize_finger(std::uint64_t seed, int width, int height, double roi_radius = 0.0);

// Procedural noise textures: low-frequency shading, blotches, line clutter,
// text-like strokes.
GrayImage generate_noise_texture(std::uint64_t seed, int width, int height);
std::vector<GrayImage> make_noise_bank(std::uint64_t seed, int count, int width, int height);
std::vector<GrayImage> load_noise_bank(const std::string& dir);

enum class PairLabel { Genuine, Impostor };
enum class Split { CnnTrain, RbmTrain };

struct DatasetEntry {
    std::string latent_path;
    std::string reference_path;
    int finger_id = 0;
    char impression = 'f';  // impression the latent derives from
    PairLabel pair_label = PairLabel::Genuine;
    Split split = Split::CnnTrain;
};

struct DatasetManifest {
    std::uint64_t seed = 0;
    std::vector<DatasetEntry> entries;
};

void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

struct DatasetConfig {
    std::uint64_t seed = 1;
    double noise_lo = 0.2, noise_hi = 0.8;
    double split_cnn = 0.8;  // fraction of pairs that train the CNNs
    // Latents show only part of the finger: a visibility window of radius
    // window_lo..window_hi (fractions of min(width, height)) at a jittered
    // center; everything outside is background noise. 0 disables occlusion.
    double window_lo = 0.16, window_hi = 0.215;
    double window_jitter = 0.08;
    int workers = 1;
};

// Builds latents from both impressions of every finger, pairs them per the
// f/s cross rule plus one non-mate impostor per latent, splits 80/20 at pair
// granularity, and writes PNGs into a content-addressed layout under out_dir.
DatasetManifest build_dataset(const std::vector<Finger>& fingers,
                              const std::vector<GrayImage>& noise_bank,
                              const DatasetConfig& cfg, const std::string& out_dir);

// Derived per-sample stream so parallel synthesis stays reproducible.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace fp
