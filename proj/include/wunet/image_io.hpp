// Image file I/O: 8-bit PNG (via libpng) and binary PGM/PPM (P5/P6,
// maxval 255). Loading sniffs the format from the file magic; saving picks
// the container from the file extension.
#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <png.h>

#include "wunet/core.hpp"

namespace wunet {

inline uint8_t quantize_byte(float v) {
    v = std::clamp(v, 0.0f, 1.0f);
    // round half up
    int b = static_cast<int>(std::floor(v * 255.0f + 0.5f));
    return static_cast<uint8_t>(std::min(b, 255));
}

namespace detail {

inline ImageTensor from_bytes(int channels, int height, int width, const std::vector<uint8_t>& bytes) {
    ImageTensor img(channels, height, width);
    // interleaved bytes -> channel-major floats
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < channels; ++c)
                img.at(c, y, x) =
                    bytes[(static_cast<size_t>(y) * width + x) * channels + c] / 255.0f;
    return img;
}

inline std::vector<uint8_t> to_bytes(const ImageTensor& img) {
    std::vector<uint8_t> bytes(img.size());
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                bytes[(static_cast<size_t>(y) * img.width + x) * img.channels + c] =
                    quantize_byte(img.at(c, y, x));
    return bytes;
}

inline ImageTensor load_png(const std::string& path) {
    png_image im;
    std::memset(&im, 0, sizeof(im));
    im.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&im, path.c_str()))
        fail(ErrorCode::CorruptData, path + ": " + im.message);

    // 16-bit sources map to the linear formats
    if (im.format & PNG_FORMAT_FLAG_LINEAR) {
        png_image_free(&im);
        fail(ErrorCode::UnsupportedFormat, path + ": 16-bit PNG not supported");
    }
    bool color = (im.format & PNG_FORMAT_FLAG_COLOR) != 0;
    int channels = color ? 3 : 1;
    im.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

    int width = static_cast<int>(im.width);
    int height = static_cast<int>(im.height);
    std::vector<uint8_t> pixels(static_cast<size_t>(width) * height * channels);
    if (!png_image_finish_read(&im, nullptr, pixels.data(), 0, nullptr)) {
        std::string msg = im.message;
        png_image_free(&im);
        fail(ErrorCode::CorruptData, path + ": " + msg);
    }
    return from_bytes(channels, height, width, pixels);
}

inline void save_png(const ImageTensor& img, const std::string& path) {
    png_image im;
    std::memset(&im, 0, sizeof(im));
    im.version = PNG_IMAGE_VERSION;
    im.width = static_cast<png_uint_32>(img.width);
    im.height = static_cast<png_uint_32>(img.height);
    im.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;

    std::vector<uint8_t> bytes = to_bytes(img);
    if (!png_image_write_to_file(&im, path.c_str(), 0, bytes.data(), 0, nullptr)) {
        std::string msg = im.message;
        png_image_free(&im);
        fail(ErrorCode::IoFailure, path + ": " + msg);
    }
}

// PNM header token: skips whitespace and '#' comments.
inline std::string pnm_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
        } else if (!std::isspace(ch)) {
            tok.push_back(static_cast<char>(ch));
            while ((ch = in.peek()) != EOF && !std::isspace(ch)) tok.push_back(static_cast<char>(in.get()));
            return tok;
        }
    }
    return tok;
}

inline ImageTensor load_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::MissingFile, path);

    std::string magic = pnm_token(in);
    int channels;
    if (magic == "P5")
        channels = 1;
    else if (magic == "P6")
        channels = 3;
    else if (magic == "P2" || magic == "P3")
        fail(ErrorCode::UnsupportedFormat, path + ": ASCII PNM not supported");
    else
        fail(ErrorCode::UnsupportedFormat, path + ": unknown PNM magic");

    int width = 0, height = 0, maxval = 0;
    try {
        width = std::stoi(pnm_token(in));
        height = std::stoi(pnm_token(in));
        maxval = std::stoi(pnm_token(in));
    } catch (const std::exception&) {
        fail(ErrorCode::CorruptData, path + ": bad PNM header");
    }
    if (width <= 0 || height <= 0) fail(ErrorCode::CorruptData, path + ": bad PNM dimensions");
    if (maxval != 255) fail(ErrorCode::UnsupportedFormat, path + ": only maxval 255 supported");
    in.get();  // single whitespace after maxval

    std::vector<uint8_t> bytes(static_cast<size_t>(width) * height * channels);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
        fail(ErrorCode::CorruptData, path + ": truncated PNM payload");
    return from_bytes(channels, height, width, bytes);
}

inline void save_pnm(const ImageTensor& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoFailure, "cannot open for writing: " + path);
    out << (img.channels == 1 ? "P5" : "P6") << "\n"
        << img.width << " " << img.height << "\n255\n";
    std::vector<uint8_t> bytes = to_bytes(img);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::IoFailure, "write failed: " + path);
}

}  // namespace detail

inline ImageTensor load_image(const std::string& path) {
    if (!std::filesystem::exists(path)) fail(ErrorCode::MissingFile, path);

    std::ifstream probe(path, std::ios::binary);
    char head[2] = {0, 0};
    probe.read(head, 2);
    probe.close();

    if (head[0] == 'P' && (head[1] == '5' || head[1] == '6' || head[1] == '2' || head[1] == '3'))
        return detail::load_pnm(path);
    if (static_cast<unsigned char>(head[0]) == 0x89 && head[1] == 'P') return detail::load_png(path);
    fail(ErrorCode::UnsupportedFormat, path + ": unrecognized image format");
}

inline void save_image(const ImageTensor& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3)
        fail(ErrorCode::UnsupportedFormat, "only 1- or 3-channel images can be saved");
    std::string ext = std::filesystem::path(path).extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(c));
    if (ext == ".png") {
        detail::save_png(img, path);
    } else if (ext == ".pgm") {
        if (img.channels != 1) fail(ErrorCode::UnsupportedFormat, "PGM requires a 1-channel image");
        detail::save_pnm(img, path);
    } else if (ext == ".ppm") {
        if (img.channels != 3) fail(ErrorCode::UnsupportedFormat, "PPM requires a 3-channel image");
        detail::save_pnm(img, path);
    } else {
        fail(ErrorCode::UnsupportedFormat, "unsupported output extension: " + ext);
    }
}

}  // namespace wunet
