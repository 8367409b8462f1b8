// Dataset ingestion and splitting. A manifest is deterministic: files are
// ordered lexicographically by name and the content hash covers names and
// bytes of every decodable image, so the same directory always produces the
// same manifest.
#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "wunet/image_io.hpp"
#include "wunet/imageops.hpp"
#include "wunet/rng.hpp"

namespace wunet {

struct DatasetManifest {
    std::filesystem::path root;
    std::vector<std::string> files;  // lexicographic by filename
    std::vector<size_t> train_indices;
    std::vector<size_t> val_indices;
    uint64_t content_hash = 0;
    std::vector<std::string> decode_failures;  // candidates that would not decode
};

inline uint64_t fnv1a64(const unsigned char* data, size_t n,
                        uint64_t h = 1469598103934665603ULL) {
    for (size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 1099511628211ULL;
    }
    return h;
}

namespace detail {

inline bool has_image_extension(const std::filesystem::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e == ".png" || e == ".pgm" || e == ".ppm" || e == ".pnm";
}

}  // namespace detail

/// Scans a flat directory of images. Files that fail to decode are listed in
/// decode_failures rather than silently dropped; the hash covers only the
/// decodable files.
inline DatasetManifest ingest(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root))
        fail(ErrorCode::MissingFile, "dataset root is not a directory: " + root.string());

    std::vector<std::string> candidates;
    for (const auto& entry : std::filesystem::directory_iterator(root))
        if (entry.is_regular_file() && detail::has_image_extension(entry.path()))
            candidates.push_back(entry.path().filename().string());
    if (candidates.empty())
        fail(ErrorCode::EmptyDirectory, "no image files in " + root.string());
    std::sort(candidates.begin(), candidates.end());

    DatasetManifest m;
    m.root = root;
    uint64_t h = 1469598103934665603ULL;
    for (const auto& name : candidates) {
        std::filesystem::path p = root / name;
        try {
            load_image(p);
        } catch (const Error&) {
            m.decode_failures.push_back(name);
            continue;
        }
        std::ifstream is(p, std::ios::binary);
        std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                         std::istreambuf_iterator<char>());
        h = fnv1a64(reinterpret_cast<const unsigned char*>(name.data()), name.size(), h);
        unsigned char zero = 0;
        h = fnv1a64(&zero, 1, h);
        h = fnv1a64(bytes.data(), bytes.size(), h);
        m.files.push_back(name);
    }
    if (m.files.empty())
        fail(ErrorCode::EmptyDataset, "no decodable images in " + root.string());
    m.content_hash = h;
    return m;
}

/// Seeded shuffle then partition: ceil(n * val_fraction) validation images,
/// capped at n-1 so both sides stay non-empty. Index sets come out sorted.
inline DatasetManifest split(const DatasetManifest& manifest, double val_fraction, uint64_t seed) {
    if (!(val_fraction > 0.0) || !(val_fraction < 1.0))
        fail(ErrorCode::ConfigInvalid, "val_fraction must be in (0,1)");
    size_t n = manifest.files.size();
    if (n < 2) fail(ErrorCode::TooFewImages, "need at least 2 images to split");

    size_t n_val = static_cast<size_t>(std::ceil(val_fraction * static_cast<double>(n)));
    n_val = std::min(n_val, n - 1);

    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);

    DatasetManifest out = manifest;
    out.val_indices.assign(idx.begin(), idx.begin() + static_cast<long>(n_val));
    out.train_indices.assign(idx.begin() + static_cast<long>(n_val), idx.end());
    std::sort(out.val_indices.begin(), out.val_indices.end());
    std::sort(out.train_indices.begin(), out.train_indices.end());
    return out;
}

/// Loads one manifest image converted to the requested channel count.
inline ImageTensor load_dataset_image(const DatasetManifest& m, size_t index,
                                      int target_channels) {
    ImageTensor img = load_image(m.root / m.files.at(index));
    if (img.channels == target_channels) return img;
    if (img.channels == 1) return promote_channels(img, target_channels);
    if (target_channels == 1) return mean_to_single_channel(img);
    fail(ErrorCode::ShapeMismatch,
         "cannot convert " + std::to_string(img.channels) + "-channel image to " +
             std::to_string(target_channels) + " channels: " + m.files.at(index));
}

}  // namespace wunet
