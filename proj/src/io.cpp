#include "fp/io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include <nlohmann/json.hpp>

#include "fp/errors.hpp"

namespace fp {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool has_png_signature(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file: " + path);
    unsigned char sig[8] = {};
    in.read(reinterpret_cast<char*>(sig), 8);
    return in.gcount() >= 8 && !png_sig_cmp(sig, 0, 8);
}

}  // namespace

GrayImage load_image(const std::string& path) {
    if (has_png_signature(path)) return load_png(path);
    return load_pgm(path);
}

void save_image(const GrayImage& img, const std::string& path) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".pgm") == 0)
        save_pgm(img, path);
    else
        save_png(img, path);
}

GrayImage load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file: " + path);

    auto next_token = [&in, &path]() {
        std::string tok;
        char c;
        while (in.get(c)) {
            if (c == '#') {  // comment to end of line
                while (in.get(c) && c != '\n') {
                }
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!tok.empty()) break;
                continue;
            }
            tok.push_back(c);
        }
        if (tok.empty()) throw InputError("truncated PGM header: " + path);
        return tok;
    };

    if (next_token() != "P5") throw InputError("not a binary PGM (P5): " + path);
    int w = std::stoi(next_token());
    int h = std::stoi(next_token());
    int maxval = std::stoi(next_token());
    if (w <= 0 || h <= 0) throw InputError("bad PGM dimensions: " + path);
    if (maxval != 255)
        throw InputError("unsupported PGM bit depth (maxval " + std::to_string(maxval) +
                         "): " + path);

    GrayImage img(w, h);
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.size()))
        throw InputError("truncated PGM data: " + path);
    return img;
}

void save_pgm(const GrayImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write file: " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.size()));
    if (!out) throw InputError("short write: " + path);
}

GrayImage load_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw InputError("cannot open file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw InputError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw InputError("libpng init failed");
    }

    GrayImage img;
    std::string error;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InputError("corrupt PNG: " + path);
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    if (color_type != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InputError("non-grayscale PNG rejected (color type " +
                         std::to_string(color_type) + "): " + path);
    }
    if (bit_depth != 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InputError("unsupported PNG bit depth " + std::to_string(bit_depth) + ": " + path);
    }

    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.data.resize(static_cast<std::size_t>(img.width) * img.height);

    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) rows[y] = img.data.data() + static_cast<std::size_t>(y) * img.width;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void save_png(const GrayImage& img, const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw InputError("cannot write file: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) throw InputError("libpng init failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw InputError("PNG write failed: " + path);
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.data.data() + static_cast<std::size_t>(y) * img.width);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

BinaryMask load_mask(const std::string& path) {
    GrayImage img = load_pgm(path);
    BinaryMask mask(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i) mask.data[i] = img.data[i] >= 128 ? 1 : 0;
    return mask;
}

void save_mask(const BinaryMask& mask, const std::string& path) {
    GrayImage img(mask.width, mask.height);
    for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = mask.data[i] ? 255 : 0;
    save_pgm(img, path);
}

void save_orientation_field(const OrientationField& of, const std::string& path) {
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw InputError("cannot write file: " + path);
        for (double a : of.angles) {
            float f = static_cast<float>(a);
            out.write(reinterpret_cast<const char*>(&f), sizeof(float));
        }
    }
    nlohmann::json meta = {
        {"width", of.width}, {"height", of.height}, {"encoding", "radians_mod_pi"}};
    std::ofstream meta_out(path + ".json");
    meta_out << meta.dump(2) << "\n";
    save_mask(of.validity, path + ".mask.pgm");
}

OrientationField load_orientation_field(const std::string& path) {
    std::ifstream meta_in(path + ".json");
    if (!meta_in) throw InputError("missing sidecar: " + path + ".json");
    nlohmann::json meta = nlohmann::json::parse(meta_in);
    if (meta.at("encoding") != "radians_mod_pi")
        throw InputError("unknown orientation encoding in " + path + ".json");

    OrientationField of(meta.at("width").get<int>(), meta.at("height").get<int>());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file: " + path);
    for (double& a : of.angles) {
        float f = 0.0f;
        in.read(reinterpret_cast<char*>(&f), sizeof(float));
        a = f;
    }
    if (!in) throw InputError("truncated orientation grid: " + path);
    of.validity = load_mask(path + ".mask.pgm");
    return of;
}

void save_minutiae(const std::vector<Minutia>& minutiae, const std::string& path) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Minutia& m : minutiae) {
        arr.push_back({{"x", m.x},
                       {"y", m.y},
                       {"direction", m.direction},
                       {"kind", m.kind == MinutiaKind::RidgeEnding ? "ridge-ending" : "bifurcation"},
                       {"reliability", m.reliability}});
    }
    std::ofstream out(path);
    if (!out) throw InputError("cannot write file: " + path);
    out << arr.dump(2) << "\n";
}

std::vector<Minutia> load_minutiae(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open file: " + path);
    nlohmann::json arr = nlohmann::json::parse(in);
    std::vector<Minutia> out;
    for (const auto& j : arr) {
        Minutia m;
        m.x = j.at("x").get<double>();
        m.y = j.at("y").get<double>();
        m.direction = j.at("direction").get<double>();
        m.kind = j.at("kind") == "bifurcation" ? MinutiaKind::Bifurcation : MinutiaKind::RidgeEnding;
        m.reliability = j.at("reliability").get<double>();
        out.push_back(m);
    }
    return out;
}

}  // namespace fp
