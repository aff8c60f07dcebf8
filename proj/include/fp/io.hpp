#pragma once

#include <string>
#include <vector>

#include "fp/image.hpp"

namespace fp {

// Reads an 8-bit grayscale PNG or binary PGM (P5, maxval 255), dispatching
// on file content. Color or 16-bit inputs are rejected, never converted.
GrayImage load_image(const std::string& path);
void save_image(const GrayImage& img, const std::string& path);

GrayImage load_pgm(const std::string& path);
void save_pgm(const GrayImage& img, const std::string& path);
GrayImage load_png(const std::string& path);
void save_png(const GrayImage& img, const std::string& path);

// Masks travel as PGM with {0, 255}.
BinaryMask load_mask(const std::string& path);
void save_mask(const BinaryMask& mask, const std::string& path);

// Orientation fields: raw float32 little-endian grid at <path>, JSON sidecar
// at <path>.json with {width, height, encoding:"radians_mod_pi"}, validity
// mask at <path>.mask.pgm.
void save_orientation_field(const OrientationField& of, const std::string& path);
OrientationField load_orientation_field(const std::string& path);

// Minutiae as a JSON array of {x, y, direction, kind, reliability}.
void save_minutiae(const std::vector<Minutia>& minutiae, const std::string& path);
std::vector<Minutia> load_minutiae(const std::string& path);

}  // namespace fp
