// Core types shared by the whole library: error codes, the channel-major
// float image tensor, and a few small numeric helpers.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace wunet {

enum class ErrorCode {
    MissingFile,
    UnsupportedFormat,
    CorruptData,
    IoFailure,
    PadTooLarge,
    PatchTooLarge,
    OddDimension,
    DimMismatch,
    ShapeMismatch,
    EmptyInput,
    NumericFault,
    EmptyDataset,
    BatchTooLarge,
    VersionMismatch,
    ChecksumMismatch,
    EmptyDirectory,
    DecodeFailure,
    TooFewImages,
    ImageTooSmall,
    ConfigInvalid,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorCode::CorruptData: return "CorruptData";
        case ErrorCode::IoFailure: return "IoFailure";
        case ErrorCode::PadTooLarge: return "PadTooLarge";
        case ErrorCode::PatchTooLarge: return "PatchTooLarge";
        case ErrorCode::OddDimension: return "OddDimension";
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::NumericFault: return "NumericFault";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::BatchTooLarge: return "BatchTooLarge";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
        case ErrorCode::EmptyDirectory: return "EmptyDirectory";
        case ErrorCode::DecodeFailure: return "DecodeFailure";
        case ErrorCode::TooFewImages: return "TooFewImages";
        case ErrorCode::ImageTooSmall: return "ImageTooSmall";
        case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

/// Channel-major, row-major float image. Values are expected to lie in [0,1]
/// after load or clamp; intermediate math may leave that range.
struct ImageTensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;  // length channels*height*width

    ImageTensor() = default;
    ImageTensor(int c, int h, int w, float fill = 0.0f)
        : channels(c), height(h), width(w),
          data(static_cast<size_t>(c) * h * w, fill) {}
    ImageTensor(int c, int h, int w, std::vector<float> values)
        : channels(c), height(h), width(w), data(std::move(values)) {
        if (data.size() != static_cast<size_t>(c) * h * w)
            fail(ErrorCode::ShapeMismatch, "data length does not match C*H*W");
    }

    size_t size() const { return data.size(); }

    float& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    float at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }

    float* plane(int c) { return data.data() + static_cast<size_t>(c) * height * width; }
    const float* plane(int c) const { return data.data() + static_cast<size_t>(c) * height * width; }

    bool same_shape(const ImageTensor& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
};

inline void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* where) {
    if (!a.same_shape(b))
        fail(ErrorCode::ShapeMismatch, std::string(where) + ": tensors have different shapes");
}

inline bool all_finite(const std::vector<float>& v) {
    for (float x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline void clamp01(ImageTensor& img) {
    for (float& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
}

inline double sum_squares(const std::vector<float>& v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    return s;
}

}  // namespace wunet
