// Experiment orchestration: ingest + split a dataset, train one model per
// fusion preset (with a checkpoint cache keyed by the training-relevant
// config hash), evaluate model/baseline/noisy on the validation split, and
// emit CSV + Markdown reports plus clean|noisy|denoised triptych images.
#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "wunet/baseline.hpp"
#include "wunet/checkpoint.hpp"
#include "wunet/dataset.hpp"
#include "wunet/metrics.hpp"
#include "wunet/synth.hpp"
#include "wunet/train.hpp"

namespace wunet {

struct DatasetRef {
    std::string name;
    std::filesystem::path root;
};

struct ExperimentSpec {
    DatasetRef dataset;
    NoiseSpec noise;
    std::vector<FusionConfig> presets;  // evaluated in listed order
    TrainConfig train;
    ModelConfig model;  // fusion field is overridden per preset
    MetricsConfig metrics;
    double val_fraction = 0.25;
    uint64_t split_seed = 1;
    int triptych_count = 2;

    void validate() const {
        if (dataset.name.empty() || dataset.root.empty())
            fail(ErrorCode::ConfigInvalid, "experiment needs a dataset name and root");
        if (presets.empty()) fail(ErrorCode::ConfigInvalid, "experiment needs at least one preset");
        noise.validate();
        train.validate();
        model.validate();
        metrics.validate();
        for (const auto& p : presets) p.validate();
        if (!(val_fraction > 0.0) || !(val_fraction < 1.0))
            fail(ErrorCode::ConfigInvalid, "val_fraction must be in (0,1)");
        if (triptych_count < 0) fail(ErrorCode::ConfigInvalid, "triptych_count must be >= 0");
    }
};

struct ReportRow {
    std::string dataset;
    std::optional<FusionConfig> fusion;  // empty for baseline/noisy rows
    std::string method;
    double mean_psnr_db = 0.0;
    int infinite_psnr_count = 0;
    double mean_ssim = 0.0;
};

struct ExperimentResult {
    std::vector<ReportRow> rows;
    std::filesystem::path csv_path;
    std::filesystem::path markdown_path;
    std::vector<std::filesystem::path> triptychs;
};

namespace detail {

inline std::string trim_number(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

inline std::string noise_description(const NoiseSpec& n) {
    std::ostringstream os;
    switch (n.kind) {
        case NoiseKind::Gaussian: os << "gaussian"; break;
        case NoiseKind::StampOverlay: os << "stamp"; break;
        case NoiseKind::Composite: os << "composite"; break;
    }
    os << " sigma=" << trim_number(n.sigma);
    if (n.kind != NoiseKind::Gaussian) os << " stamps=" << n.stamp_count;
    os << " seed=" << n.seed;
    return os.str();
}

// Hash over every training-relevant field; any change invalidates the cache.
inline uint64_t training_cache_key(const ExperimentSpec& spec, const FusionConfig& preset,
                                   uint64_t dataset_hash) {
    ModelConfig m = spec.model;
    m.fusion = preset;
    nlohmann::json j = {{"model", model_config_json(m)},
                        {"train", train_config_json(spec.train)},
                        {"noise",
                         {{"kind", static_cast<int>(spec.noise.kind)},
                          {"sigma", spec.noise.sigma},
                          {"stamp_count", spec.noise.stamp_count},
                          {"seed", spec.noise.seed}}},
                        {"dataset_hash", dataset_hash},
                        {"val_fraction", spec.val_fraction},
                        {"split_seed", spec.split_seed}};
    std::string s = j.dump();
    return fnv1a64(reinterpret_cast<const unsigned char*>(s.data()), s.size());
}

inline std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// clean | noisy | denoised side by side with a thin white divider.
inline ImageTensor make_triptych(const ImageTensor& clean, const ImageTensor& noisy,
                                 const ImageTensor& denoised) {
    require_same_shape(clean, noisy, "triptych");
    require_same_shape(clean, denoised, "triptych");
    const int gap = 4;
    ImageTensor out(clean.channels, clean.height, clean.width * 3 + 2 * gap, 1.0f);
    const ImageTensor* panels[3] = {&clean, &noisy, &denoised};
    for (int p = 0; p < 3; ++p) {
        int x0 = p * (clean.width + gap);
        for (int c = 0; c < clean.channels; ++c)
            for (int y = 0; y < clean.height; ++y)
                for (int x = 0; x < clean.width; ++x)
                    out.at(c, y, x0 + x) = panels[p]->at(c, y, x);
    }
    return out;
}

inline std::string stem_of(const std::string& filename) {
    return std::filesystem::path(filename).stem().string();
}

}  // namespace detail

inline std::string fusion_label(const FusionConfig& f) {
    return detail::trim_number(f.alpha) + "/" + detail::trim_number(f.beta);
}

/// Report CSV text: `dataset,alpha,beta,method,psnr_db,ssim` with blank
/// alpha/beta cells on baseline and noisy rows.
inline std::string report_csv(const std::vector<ReportRow>& rows) {
    std::ostringstream os;
    os << "dataset,alpha,beta,method,psnr_db,ssim\n";
    for (const auto& r : rows) {
        os << r.dataset << ',';
        if (r.fusion)
            os << detail::trim_number(r.fusion->alpha) << ',' << detail::trim_number(r.fusion->beta);
        else
            os << ',';
        os << ',' << r.method << ',' << detail::format_fixed(r.mean_psnr_db, 4) << ','
           << detail::format_fixed(r.mean_ssim, 6) << '\n';
    }
    return os.str();
}

inline std::string report_markdown(const std::vector<ReportRow>& rows, const NoiseSpec& noise) {
    std::ostringstream os;
    os << "Noise: " << detail::noise_description(noise) << "\n\n";
    os << "| Dataset | alpha/beta | Method | PSNR/SSIM |\n|---|---|---|---|\n";
    for (const auto& r : rows) {
        os << "| " << r.dataset << " | " << (r.fusion ? fusion_label(*r.fusion) : "-") << " | "
           << r.method << " | " << psnr_ssim_cell({false, r.mean_psnr_db}, r.mean_ssim);
        if (r.infinite_psnr_count > 0) os << " (" << r.infinite_psnr_count << " inf)";
        os << " |\n";
    }
    return os.str();
}

/// Runs the full experiment. Reuses cached checkpoints when the
/// training-relevant config is unchanged, so a rerun with the same spec is
/// bitwise identical.
inline ExperimentResult run_experiment(const ExperimentSpec& spec,
                                       const std::filesystem::path& out_dir,
                                       std::ostream* progress = nullptr) {
    spec.validate();
    std::filesystem::create_directories(out_dir);

    DatasetManifest manifest = ingest(spec.dataset.root);
    if (progress && !manifest.decode_failures.empty())
        for (const auto& f : manifest.decode_failures)
            (*progress) << "warning: undecodable image skipped: " << f << "\n";
    manifest = split(manifest, spec.val_fraction, spec.split_seed);

    std::vector<ImageTensor> train_images;
    for (size_t i : manifest.train_indices)
        train_images.push_back(load_dataset_image(manifest, i, spec.model.in_channels));
    std::vector<ImageTensor> patches = make_training_patches(train_images, spec.train);

    std::vector<ImageTensor> val_clean, val_noisy;
    std::vector<std::string> val_names;
    for (size_t i : manifest.val_indices) {
        ImageTensor x = load_dataset_image(manifest, i, spec.model.in_channels);
        NoiseSpec per_image = spec.noise;
        per_image.seed = derive_seed(spec.noise.seed, 0x7000 + i);
        val_noisy.push_back(add_noise(x, per_image));
        val_clean.push_back(std::move(x));
        val_names.push_back(manifest.files[i]);
    }

    ExperimentResult result;
    auto add_row = [&](const std::optional<FusionConfig>& fusion, const std::string& method,
                       const std::vector<ImageTensor>& candidates) {
        std::vector<EvalPair> pairs;
        for (size_t i = 0; i < val_clean.size(); ++i)
            pairs.push_back({val_names[i], val_clean[i], candidates[i]});
        MetricsReport rep = evaluate_set(pairs, spec.metrics);
        result.rows.push_back({spec.dataset.name, fusion, method, rep.mean_psnr_db,
                               rep.infinite_psnr_count, rep.mean_ssim});
    };

    std::filesystem::path cache_root = out_dir / "cache";
    std::filesystem::path triptych_dir = out_dir / "triptychs";
    int n_trip = std::min<int>(spec.triptych_count, static_cast<int>(val_clean.size()));
    if (n_trip > 0) std::filesystem::create_directories(triptych_dir);

    auto emit_triptychs = [&](const std::string& method, const std::vector<ImageTensor>& den) {
        for (int i = 0; i < n_trip; ++i) {
            ImageTensor t = detail::make_triptych(val_clean[static_cast<size_t>(i)],
                                                  val_noisy[static_cast<size_t>(i)],
                                                  den[static_cast<size_t>(i)]);
            std::filesystem::path p =
                triptych_dir / (detail::stem_of(val_names[static_cast<size_t>(i)]) + "_" + method + ".png");
            save_image(t, p.string());
            result.triptychs.push_back(p);
        }
    };

    for (const auto& preset : spec.presets) {
        ModelConfig mc = spec.model;
        mc.fusion = preset;

        uint64_t key = detail::training_cache_key(spec, preset, manifest.content_hash);
        std::filesystem::path run_dir = cache_root / detail::hex64(key);
        std::filesystem::path ckpt_path = run_dir / "model.ckpt";

        Model model(mc);
        if (std::filesystem::exists(ckpt_path)) {
            if (progress) (*progress) << "cache hit for preset " << fusion_label(preset) << "\n";
            apply_checkpoint(load_checkpoint(ckpt_path), model);
        } else {
            if (progress) (*progress) << "training preset " << fusion_label(preset) << "\n";
            train(model, patches, spec.train, run_dir, progress);
        }

        std::vector<ImageTensor> denoised;
        for (const auto& y : val_noisy) denoised.push_back(model.denoise(y));
        std::string method = "fused_unet_a" + detail::trim_number(preset.alpha) + "b" +
                             detail::trim_number(preset.beta);
        add_row(preset, method, denoised);
        emit_triptychs(method, denoised);
    }

    std::vector<ImageTensor> base_out;
    for (const auto& y : val_noisy) base_out.push_back(baseline_wavelet_threshold(y, spec.noise.sigma));
    add_row(std::nullopt, "wavelet_threshold", base_out);
    emit_triptychs("wavelet_threshold", base_out);

    add_row(std::nullopt, "noisy", val_noisy);

    result.csv_path = out_dir / "report.csv";
    result.markdown_path = out_dir / "report.md";
    {
        std::ofstream os(result.csv_path, std::ios::trunc);
        if (!os) fail(ErrorCode::IoFailure, "cannot write " + result.csv_path.string());
        os << report_csv(result.rows);
    }
    {
        std::ofstream os(result.markdown_path, std::ios::trunc);
        if (!os) fail(ErrorCode::IoFailure, "cannot write " + result.markdown_path.string());
        os << report_markdown(result.rows, spec.noise);
    }
    return result;
}

// ---------------------------------------------------------------------------
// JSON experiment spec (unknown keys are errors)
// ---------------------------------------------------------------------------

namespace detail {

inline void require_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                         const char* where) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok)
            fail(ErrorCode::ConfigInvalid,
                 std::string("unknown key \"") + key + "\" in " + where);
    }
}

inline NoiseKind noise_kind_from_name(const std::string& s) {
    if (s == "gaussian") return NoiseKind::Gaussian;
    if (s == "stamp") return NoiseKind::StampOverlay;
    if (s == "composite") return NoiseKind::Composite;
    fail(ErrorCode::ConfigInvalid, "unknown noise kind: " + s);
}

}  // namespace detail

inline ExperimentSpec experiment_spec_from_json(const nlohmann::json& j) {
    detail::require_keys(j,
                         {"dataset", "noise", "presets", "train", "model", "metrics",
                          "val_fraction", "split_seed", "triptych_count"},
                         "experiment spec");
    ExperimentSpec spec;

    const auto& d = j.at("dataset");
    detail::require_keys(d, {"name", "root"}, "dataset");
    spec.dataset.name = d.at("name").get<std::string>();
    spec.dataset.root = d.at("root").get<std::string>();

    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        detail::require_keys(n, {"kind", "sigma", "stamp_count", "seed"}, "noise");
        if (n.contains("kind"))
            spec.noise.kind = detail::noise_kind_from_name(n.at("kind").get<std::string>());
        if (n.contains("sigma")) spec.noise.sigma = n.at("sigma").get<float>();
        if (n.contains("stamp_count")) spec.noise.stamp_count = n.at("stamp_count").get<int>();
        if (n.contains("seed")) spec.noise.seed = n.at("seed").get<uint64_t>();
    }

    if (j.contains("presets")) {
        for (const auto& p : j.at("presets")) {
            if (!p.is_array() || p.size() != 2)
                fail(ErrorCode::ConfigInvalid, "each preset must be a [alpha, beta] pair");
            spec.presets.push_back({p.at(0).get<float>(), p.at(1).get<float>()});
        }
    } else {
        spec.presets = {{1.0f, 1.0f}, {0.7f, 0.3f}, {0.3f, 0.7f}};
    }

    if (j.contains("train")) {
        const auto& t = j.at("train");
        detail::require_keys(t,
                             {"batch_size", "epochs", "lr_init", "lr_min", "warmup_fraction",
                              "sigma", "seed", "patch_size", "patches_per_image",
                              "checkpoint_every"},
                             "train");
        if (t.contains("batch_size")) spec.train.batch_size = t.at("batch_size").get<int>();
        if (t.contains("epochs")) spec.train.epochs = t.at("epochs").get<int>();
        if (t.contains("lr_init")) spec.train.lr_init = t.at("lr_init").get<double>();
        if (t.contains("lr_min")) spec.train.lr_min = t.at("lr_min").get<double>();
        if (t.contains("warmup_fraction"))
            spec.train.warmup_fraction = t.at("warmup_fraction").get<double>();
        if (t.contains("sigma")) spec.train.sigma = t.at("sigma").get<float>();
        if (t.contains("seed")) spec.train.seed = t.at("seed").get<uint64_t>();
        if (t.contains("patch_size")) spec.train.patch_size = t.at("patch_size").get<int>();
        if (t.contains("patches_per_image"))
            spec.train.patches_per_image = t.at("patches_per_image").get<int>();
        if (t.contains("checkpoint_every"))
            spec.train.checkpoint_every = t.at("checkpoint_every").get<int>();
    }
    // eval noise defaults to the training noise level unless given explicitly
    if (!j.contains("noise") || !j.at("noise").contains("sigma"))
        spec.noise.sigma = spec.train.sigma;

    if (j.contains("model")) {
        const auto& m = j.at("model");
        detail::require_keys(m, {"in_channels", "base_channels", "depth", "seed", "basis_policy"},
                             "model");
        if (m.contains("in_channels")) spec.model.in_channels = m.at("in_channels").get<int>();
        if (m.contains("base_channels"))
            spec.model.base_channels = m.at("base_channels").get<int>();
        if (m.contains("depth")) spec.model.depth = m.at("depth").get<int>();
        if (m.contains("seed")) spec.model.seed = m.at("seed").get<uint64_t>();
        if (m.contains("basis_policy")) {
            const auto& b = m.at("basis_policy");
            detail::require_keys(b, {"kind", "seed"}, "basis_policy");
            spec.model.basis_policy.kind =
                detail::basis_policy_from_name(b.at("kind").get<std::string>());
            if (b.contains("seed")) spec.model.basis_policy.seed = b.at("seed").get<uint64_t>();
        }
    }

    if (j.contains("metrics")) {
        const auto& m = j.at("metrics");
        detail::require_keys(m, {"max_i", "ssim_window", "ssim_sigma", "ssim_global"}, "metrics");
        if (m.contains("max_i")) spec.metrics.max_i = m.at("max_i").get<double>();
        if (m.contains("ssim_window")) spec.metrics.ssim_window = m.at("ssim_window").get<int>();
        if (m.contains("ssim_sigma")) spec.metrics.ssim_sigma = m.at("ssim_sigma").get<double>();
        if (m.contains("ssim_global")) spec.metrics.ssim_global = m.at("ssim_global").get<bool>();
    }

    if (j.contains("val_fraction")) spec.val_fraction = j.at("val_fraction").get<double>();
    if (j.contains("split_seed")) spec.split_seed = j.at("split_seed").get<uint64_t>();
    if (j.contains("triptych_count")) spec.triptych_count = j.at("triptych_count").get<int>();
    return spec;
}

inline ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) fail(ErrorCode::MissingFile, "cannot open experiment spec: " + path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ConfigInvalid, std::string("bad experiment spec JSON: ") + e.what());
    }
    return experiment_spec_from_json(j);
}

}  // namespace wunet
