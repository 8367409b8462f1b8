// wunet command line front end.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric fault,
// 4 self-test failure.  Machine-readable output goes to stdout as key=value
// lines; diagnostics go to stderr.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "wunet/wunet.hpp"

namespace fs = std::filesystem;

namespace {

int map_error(const wunet::Error& e) {
    switch (e.code()) {
        case wunet::ErrorCode::NumericFault:
            return 3;
        case wunet::ErrorCode::ConfigInvalid:
            return 1;
        default:
            return 2;
    }
}

// Normalised form for "same file" checks on paths that may not exist yet.
fs::path normal_path(const std::string& p) {
    std::error_code ec;
    fs::path abs = fs::absolute(p, ec);
    if (ec) return fs::path(p).lexically_normal();
    return abs.lexically_normal();
}

bool same_path(const std::string& a, const std::string& b) {
    if (normal_path(a) == normal_path(b)) return true;
    std::error_code ec;
    if (fs::exists(a, ec) && fs::exists(b, ec)) {
        bool eq = fs::equivalent(a, b, ec);
        if (!ec && eq) return true;
    }
    return false;
}

wunet::BasisPolicyKind basis_kind_from_name(const std::string& name) {
    if (name == "per_input") return wunet::BasisPolicyKind::PerInput;
    if (name == "identity") return wunet::BasisPolicyKind::Identity;
    if (name == "fixed_random") return wunet::BasisPolicyKind::FixedRandom;
    wunet::fail(wunet::ErrorCode::ConfigInvalid,
                "unknown basis policy '" + name +
                    "' (expected per_input, identity or fixed_random)");
}

wunet::ImageTensor load_as_channels(const std::string& path, int channels) {
    wunet::ImageTensor img = wunet::load_image(path);
    if (img.channels == channels) return img;
    if (img.channels == 1) return wunet::promote_channels(img, channels);
    if (channels == 1) return wunet::mean_to_single_channel(img);
    wunet::fail(wunet::ErrorCode::ShapeMismatch,
                "cannot convert " + std::to_string(img.channels) +
                    "-channel image to " + std::to_string(channels) +
                    " channels: " + path);
}

struct TrainArgs {
    std::string data_dir;
    std::string out_dir;
    std::string config_file;
    std::string resume_path;
    std::string basis_policy;
    double alpha = 1.0;
    double beta = 1.0;
    double sigma = 0.0;
    double lr_init = 0.0;
    double lr_min = 0.0;
    double warmup = 0.0;
    double val_fraction = 0.2;
    int epochs = 0;
    int batch_size = 0;
    int patch_size = 0;
    int patches_per_image = 0;
    int checkpoint_every = 0;
    int channels = 0;
    int base_channels = 0;
    int depth = 0;
    std::uint64_t seed = 0;
    std::uint64_t model_seed = 0;
    std::uint64_t basis_seed = 0;
    std::uint64_t split_seed = 1;
};

int cmd_train(const TrainArgs& a, const CLI::App& sub) {
    wunet::TrainConfig tcfg;
    wunet::ModelConfig mcfg;
    double val_fraction = 0.2;
    std::uint64_t split_seed = 1;

    if (!a.config_file.empty()) {
        auto overlay = wunet::ConfigOverlay::from_file(a.config_file);
        overlay.apply_int("train.batch_size", tcfg.batch_size);
        overlay.apply_int("train.epochs", tcfg.epochs);
        overlay.apply_double("train.lr_init", tcfg.lr_init);
        overlay.apply_double("train.lr_min", tcfg.lr_min);
        overlay.apply_double("train.warmup_fraction", tcfg.warmup_fraction);
        overlay.apply_float("train.sigma", tcfg.sigma);
        overlay.apply_u64("train.seed", tcfg.seed);
        overlay.apply_int("train.patch_size", tcfg.patch_size);
        overlay.apply_int("train.patches_per_image", tcfg.patches_per_image);
        overlay.apply_int("train.checkpoint_every", tcfg.checkpoint_every);
        overlay.apply_int("model.in_channels", mcfg.in_channels);
        overlay.apply_int("model.base_channels", mcfg.base_channels);
        overlay.apply_int("model.depth", mcfg.depth);
        overlay.apply_u64("model.seed", mcfg.seed);
        overlay.apply("model.basis_policy", [&](const std::string& v) {
            mcfg.basis_policy.kind = basis_kind_from_name(v);
        });
        overlay.apply_u64("model.basis_seed", mcfg.basis_policy.seed);
        overlay.apply_float("fusion.alpha", mcfg.fusion.alpha);
        overlay.apply_float("fusion.beta", mcfg.fusion.beta);
        overlay.apply_double("split.val_fraction", val_fraction);
        overlay.apply_u64("split.seed", split_seed);
        overlay.finish();
    }

    auto passed = [&](const std::string& flag) { return sub.count(flag) > 0; };
    if (passed("--alpha")) mcfg.fusion.alpha = static_cast<float>(a.alpha);
    if (passed("--beta")) mcfg.fusion.beta = static_cast<float>(a.beta);
    if (passed("--sigma")) tcfg.sigma = static_cast<float>(a.sigma);
    if (passed("--epochs")) tcfg.epochs = a.epochs;
    if (passed("--seed")) tcfg.seed = a.seed;
    if (passed("--batch-size")) tcfg.batch_size = a.batch_size;
    if (passed("--patch-size")) tcfg.patch_size = a.patch_size;
    if (passed("--patches-per-image")) tcfg.patches_per_image = a.patches_per_image;
    if (passed("--checkpoint-every")) tcfg.checkpoint_every = a.checkpoint_every;
    if (passed("--lr-init")) tcfg.lr_init = a.lr_init;
    if (passed("--lr-min")) tcfg.lr_min = a.lr_min;
    if (passed("--warmup-fraction")) tcfg.warmup_fraction = a.warmup;
    if (passed("--channels")) mcfg.in_channels = a.channels;
    if (passed("--base-channels")) mcfg.base_channels = a.base_channels;
    if (passed("--depth")) mcfg.depth = a.depth;
    if (passed("--model-seed")) mcfg.seed = a.model_seed;
    if (passed("--basis-policy")) mcfg.basis_policy.kind = basis_kind_from_name(a.basis_policy);
    if (passed("--basis-seed")) mcfg.basis_policy.seed = a.basis_seed;
    if (passed("--val-fraction")) val_fraction = a.val_fraction;
    if (passed("--split-seed")) split_seed = a.split_seed;

    tcfg.validate();
    mcfg.validate();

    auto manifest = wunet::ingest(a.data_dir);
    for (const auto& name : manifest.decode_failures)
        std::cerr << "warning: skipping undecodable " << name << "\n";
    manifest = wunet::split(manifest, val_fraction, split_seed);

    std::vector<wunet::ImageTensor> train_images;
    train_images.reserve(manifest.train_indices.size());
    for (std::size_t idx : manifest.train_indices)
        train_images.push_back(
            wunet::load_dataset_image(manifest, idx, mcfg.in_channels));
    auto patches = wunet::make_training_patches(train_images, tcfg);
    std::cerr << "training on " << patches.size() << " patches from "
              << train_images.size() << " images\n";

    std::optional<wunet::Checkpoint> resume;
    std::optional<wunet::Model> model;
    if (!a.resume_path.empty()) {
        resume = wunet::load_checkpoint(a.resume_path);
        if (!wunet::detail::same_model_config(resume->model, mcfg))
            wunet::fail(wunet::ErrorCode::ConfigInvalid,
                        "model flags disagree with the resumed checkpoint");
        model.emplace(wunet::build_model_from_checkpoint(*resume));
    } else {
        model.emplace(mcfg);
    }

    auto result = wunet::train(*model, patches, tcfg, a.out_dir, &std::cerr,
                               resume ? &*resume : nullptr);

    std::cout << "checkpoint=" << result.checkpoint_path.string() << "\n";
    std::cout << "loss_csv=" << result.loss_csv_path.string() << "\n";
    if (!result.epoch_losses.empty()) {
        std::cout << "first_epoch_loss=" << result.epoch_losses.front() << "\n";
        std::cout << "final_epoch_loss=" << result.epoch_losses.back() << "\n";
    }
    std::cout << "global_step=" << result.global_step << "\n";
    return 0;
}

struct DenoiseArgs {
    std::string model_path;
    std::string input_path;
    std::string output_path;
    std::string reference_path;
};

int cmd_denoise(const DenoiseArgs& a) {
    if (same_path(a.input_path, a.output_path))
        wunet::fail(wunet::ErrorCode::ConfigInvalid,
                    "--out must not be the same file as --in");
    if (!a.reference_path.empty() && same_path(a.input_path, a.reference_path))
        wunet::fail(wunet::ErrorCode::ConfigInvalid,
                    "--reference must not be the same file as --in");

    auto ck = wunet::load_checkpoint(a.model_path);
    wunet::Model model = wunet::build_model_from_checkpoint(ck);

    wunet::ImageTensor noisy =
        load_as_channels(a.input_path, model.config().in_channels);
    wunet::ImageTensor denoised = model.denoise(noisy);
    wunet::save_image(denoised, a.output_path);
    std::cout << "out=" << a.output_path << "\n";

    if (!a.reference_path.empty()) {
        wunet::ImageTensor ref =
            load_as_channels(a.reference_path, model.config().in_channels);
        wunet::require_same_shape(ref, denoised, "denoise reference");
        wunet::MetricsConfig mcfg;
        auto p = wunet::psnr(ref, denoised, mcfg);
        std::cout << "psnr_db=" << wunet::detail::format_psnr(p, 6) << "\n";
        std::cout << "ssim=" << wunet::ssim(ref, denoised, mcfg) << "\n";
    }
    return 0;
}

struct EvalArgs {
    std::string model_path;
    std::string data_dir;
    std::string report_dir;
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a) {
    if (!(a.sigma > 0.0))
        wunet::fail(wunet::ErrorCode::ConfigInvalid, "--sigma must be > 0");

    auto ck = wunet::load_checkpoint(a.model_path);
    wunet::Model model = wunet::build_model_from_checkpoint(ck);
    const int channels = model.config().in_channels;

    auto manifest = wunet::ingest(a.data_dir);
    for (const auto& name : manifest.decode_failures)
        std::cerr << "warning: skipping undecodable " << name << "\n";

    std::vector<wunet::EvalPair> pairs;
    pairs.reserve(manifest.files.size());
    for (std::size_t i = 0; i < manifest.files.size(); ++i) {
        wunet::ImageTensor clean = wunet::load_dataset_image(manifest, i, channels);
        wunet::ImageTensor noisy = wunet::add_gaussian_noise(
            clean, static_cast<float>(a.sigma), wunet::derive_seed(a.seed, i));
        pairs.push_back({manifest.files[i], std::move(clean),
                         model.denoise(noisy)});
    }

    wunet::MetricsConfig mcfg;
    auto report = wunet::evaluate_set(pairs, mcfg);

    fs::create_directories(a.report_dir);
    fs::path csv_path = fs::path(a.report_dir) / "eval.csv";
    fs::path md_path = fs::path(a.report_dir) / "eval.md";
    {
        std::ofstream csv(csv_path);
        csv << report.to_csv();
        std::ofstream md(md_path);
        md << report.to_markdown();
    }

    std::cout << "csv=" << csv_path.string() << "\n";
    std::cout << "markdown=" << md_path.string() << "\n";
    std::cout << "images=" << report.rows.size() << "\n";
    std::cout << "mean_psnr_db=" << report.mean_psnr_db << "\n";
    std::cout << "infinite_psnr_count=" << report.infinite_psnr_count << "\n";
    std::cout << "mean_ssim=" << report.mean_ssim << "\n";
    return 0;
}

struct ReportArgs {
    std::string spec_file;
    std::string out_dir;
};

int cmd_report(const ReportArgs& a) {
    auto spec = wunet::load_experiment_spec(a.spec_file);
    auto result = wunet::run_experiment(spec, a.out_dir, &std::cerr);
    std::cout << "report_csv=" << result.csv_path.string() << "\n";
    std::cout << "report_md=" << result.markdown_path.string() << "\n";
    std::cout << "rows=" << result.rows.size() << "\n";
    std::cout << "triptychs=" << result.triptychs.size() << "\n";
    return 0;
}

struct SynthArgs {
    std::string out_dir;
    std::string kind = "signature";
    int count = 8;
    int height = 96;
    int width = 96;
    int channels = 3;
    std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a) {
    wunet::SynthKind kind;
    if (a.kind == "smooth")
        kind = wunet::SynthKind::Smooth;
    else if (a.kind == "signature")
        kind = wunet::SynthKind::Signature;
    else
        wunet::fail(wunet::ErrorCode::ConfigInvalid,
                    "unknown synth kind '" + a.kind +
                        "' (expected smooth or signature)");
    if (a.count <= 0)
        wunet::fail(wunet::ErrorCode::ConfigInvalid, "--count must be > 0");
    wunet::write_synth_dataset(a.out_dir, kind, a.count, a.channels, a.height,
                               a.width, a.seed);
    std::cout << "dir=" << a.out_dir << "\n";
    std::cout << "count=" << a.count << "\n";
    return 0;
}

int cmd_selftest() {
    auto checks = wunet::run_selftests();
    bool all_ok = true;
    for (const auto& c : checks) {
        std::cout << c.name << " " << (c.passed ? "pass" : "FAIL") << " "
                  << c.detail << "\n";
        all_ok = all_ok && c.passed;
    }
    std::cout << "selftest=" << (all_ok ? "pass" : "fail") << "\n";
    return all_ok ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fused wavelet/PCA U-Net denoiser"};
    app.require_subcommand(1);
    int rc = 0;

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "train a denoiser on an image directory");
    train->add_option("--data", ta.data_dir, "directory of clean training images")->required();
    train->add_option("--out", ta.out_dir, "output directory for checkpoints and logs")->required();
    train->add_option("--config", ta.config_file, "key=value config file");
    train->add_option("--resume", ta.resume_path, "checkpoint to resume from");
    train->add_option("--alpha", ta.alpha, "wavelet branch weight");
    train->add_option("--beta", ta.beta, "PCA branch weight");
    train->add_option("--sigma", ta.sigma, "training noise sigma in [0,1] scale");
    train->add_option("--epochs", ta.epochs, "number of training epochs");
    train->add_option("--seed", ta.seed, "training seed");
    train->add_option("--batch-size", ta.batch_size, "patches per step");
    train->add_option("--patch-size", ta.patch_size, "square patch side");
    train->add_option("--patches-per-image", ta.patches_per_image, "patches sampled per image");
    train->add_option("--checkpoint-every", ta.checkpoint_every, "epochs between periodic checkpoints");
    train->add_option("--lr-init", ta.lr_init, "peak learning rate");
    train->add_option("--lr-min", ta.lr_min, "floor learning rate");
    train->add_option("--warmup-fraction", ta.warmup, "fraction of steps spent warming up");
    train->add_option("--channels", ta.channels, "image channels the model consumes");
    train->add_option("--base-channels", ta.base_channels, "channel width of the first stage");
    train->add_option("--depth", ta.depth, "number of down/upsampling stages");
    train->add_option("--model-seed", ta.model_seed, "weight initialisation seed");
    train->add_option("--basis-policy", ta.basis_policy, "per_input, identity or fixed_random");
    train->add_option("--basis-seed", ta.basis_seed, "seed for the fixed_random basis");
    train->add_option("--val-fraction", ta.val_fraction, "fraction of images held out");
    train->add_option("--split-seed", ta.split_seed, "train/val split seed");
    train->callback([&] { rc = cmd_train(ta, *train); });

    DenoiseArgs da;
    auto* den = app.add_subcommand("denoise", "denoise a single image");
    den->add_option("--model", da.model_path, "checkpoint file")->required();
    den->add_option("--in", da.input_path, "noisy input image")->required();
    den->add_option("--out", da.output_path, "where to write the denoised image")->required();
    den->add_option("--reference", da.reference_path, "clean reference for metrics");
    den->callback([&] { rc = cmd_denoise(da); });

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a directory");
    ev->add_option("--model", ea.model_path, "checkpoint file")->required();
    ev->add_option("--data", ea.data_dir, "directory of clean images")->required();
    ev->add_option("--sigma", ea.sigma, "noise sigma applied before denoising")->required();
    ev->add_option("--report", ea.report_dir, "directory for eval.csv and eval.md")->required();
    ev->add_option("--seed", ea.seed, "noise seed");
    ev->callback([&] { rc = cmd_eval(ea); });

    ReportArgs ra;
    auto* rep = app.add_subcommand("report", "run an experiment spec end to end");
    rep->add_option("--spec", ra.spec_file, "experiment spec JSON")->required();
    rep->add_option("--out", ra.out_dir, "output directory")->required();
    rep->callback([&] { rc = cmd_report(ra); });

    SynthArgs sa;
    auto* sy = app.add_subcommand("synth", "write a synthetic image dataset");
    sy->add_option("--out", sa.out_dir, "output directory")->required();
    sy->add_option("--kind", sa.kind, "smooth or signature");
    sy->add_option("--count", sa.count, "number of images");
    sy->add_option("--height", sa.height, "image height");
    sy->add_option("--width", sa.width, "image width");
    sy->add_option("--channels", sa.channels, "image channels");
    sy->add_option("--seed", sa.seed, "generation seed");
    sy->callback([&] { rc = cmd_synth(sa); });

    auto* st = app.add_subcommand("selftest", "run built-in numerical self checks");
    st->callback([&] { rc = cmd_selftest(); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const wunet::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return map_error(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return rc;
}
