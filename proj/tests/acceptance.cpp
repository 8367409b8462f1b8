#include <catch_amalgamated.hpp>

#include <chrono>
#include <iostream>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "wunet/wunet.hpp"

#include "test_util.hpp"

// Acceptance gate. Each case prints exactly one
//   ACCEPTANCE <n> <name>: PASS|FAIL (<measurements>)
// line before asserting, so a full run always yields nine verdict lines.

namespace fs = std::filesystem;
using namespace wunet;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 3) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

std::string fmt_sci(double v) {
    std::ostringstream os;
    os << std::scientific << std::setprecision(2) << v;
    return os.str();
}

void verdict(int idx, const std::string& name, bool pass, const std::string& detail) {
    std::cout << "ACCEPTANCE " << idx << " " << name << ": " << (pass ? "PASS" : "FAIL") << " ("
              << detail << ")" << std::endl;
}

ImageTensor random_image(int c, int h, int w, uint64_t seed) {
    ImageTensor x(c, h, w);
    Rng rng(seed);
    for (auto& v : x.data) v = static_cast<float>(rng.next_double());
    return x;
}

// Max over leaf elements of |analytic - central FD| / max(1, |analytic|, |FD|).
// The graph is rebuilt from the same leaves on every evaluation.
double max_fd_relerr(const std::vector<VarPtr>& leaves,
                     const std::function<VarPtr(Tape&)>& build, double h) {
    for (const auto& l : leaves) std::fill(l->grad.begin(), l->grad.end(), 0.0f);
    Tape tape;
    VarPtr loss = build(tape);
    tape.backward(loss);

    double worst = 0.0;
    for (const auto& l : leaves) {
        for (size_t i = 0; i < l->value.size(); ++i) {
            float keep = l->value[i];
            l->value[i] = keep + static_cast<float>(h);
            Tape tp;
            double lp = build(tp)->value[0];
            l->value[i] = keep - static_cast<float>(h);
            Tape tm;
            double lm = build(tm)->value[0];
            l->value[i] = keep;
            double fd = (lp - lm) / (2.0 * h);
            double an = l->grad[i];
            double rel = std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

std::vector<float> random_values(size_t n, uint64_t seed, float lo, float hi) {
    Rng rng(seed);
    std::vector<float> v(n);
    for (auto& x : v) x = lo + (hi - lo) * static_cast<float>(rng.next_double());
    return v;
}

// Training run shared by the smoke and ablation cases: four training images,
// one held out, identical everything except the fusion coefficients.
struct SmokeOutcome {
    std::vector<double> epoch_losses;
    size_t patch_count = 0;
    double noisy_db = 0.0;
    double denoised_db = 0.0;
    double secs = 0.0;
};

const SmokeOutcome& smoke_outcome(float alpha, float beta) {
    static std::map<std::pair<float, float>, SmokeOutcome> cache;
    auto key = std::make_pair(alpha, beta);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    auto t0 = Clock::now();
    std::vector<ImageTensor> imgs;
    for (int i = 0; i < 5; ++i)
        imgs.push_back(synth_image(SynthKind::Smooth, 3, 64, 64, derive_seed(7, i)));
    std::vector<ImageTensor> train_set(imgs.begin(), imgs.begin() + 4);

    TrainConfig tc;  // batch 4, sigma 25/255, patch 32, 4 patches/image
    tc.epochs = 20;
    tc.lr_init = 1e-2;
    tc.lr_min = 1e-4;
    tc.seed = 2;

    ModelConfig mc;
    mc.base_channels = 8;
    mc.depth = 2;
    mc.seed = 2;
    mc.fusion.alpha = alpha;
    mc.fusion.beta = beta;
    Model model(mc);

    auto patches = make_training_patches(train_set, tc);
    fs::path out = testutil::scratch_dir("acc-smoke");
    TrainResult res = train(model, patches, tc, out);

    SmokeOutcome o;
    o.epoch_losses = res.epoch_losses;
    o.patch_count = patches.size();
    const ImageTensor& clean = imgs[4];
    ImageTensor noisy = add_gaussian_noise(clean, tc.sigma, derive_seed(7, 99));
    o.noisy_db = psnr(clean, noisy).db;
    o.denoised_db = psnr(clean, model.denoise(noisy)).db;
    o.secs = seconds_since(t0);
    fs::remove_all(out);
    return cache.emplace(key, std::move(o)).first->second;
}

}  // namespace

TEST_CASE("acceptance 1 transform roundtrip") {
    auto t0 = Clock::now();
    double max_err = 0.0, max_energy_dev = 0.0;
    for (int i = 0; i < 100; ++i) {
        ImageTensor x = random_image(3, 64, 64, derive_seed(300, static_cast<uint64_t>(i)));
        SubbandStack s = dwt2(x);
        ImageTensor back = idwt2(s);
        for (size_t j = 0; j < x.data.size(); ++j)
            max_err = std::max(max_err, static_cast<double>(std::abs(back.data[j] - x.data[j])));
        double ex = sum_squares(x.data);
        double es = sum_squares(s.data);
        max_energy_dev = std::max(max_energy_dev, std::abs(es - ex) / ex);
    }
    double secs = seconds_since(t0);

    bool pass = max_err <= 1e-6 && max_energy_dev <= 1e-5 && secs < 5.0;
    verdict(1, "transform_roundtrip", pass,
            "max_abs_err=" + fmt_sci(max_err) + ", max_energy_dev=" + fmt_sci(max_energy_dev) +
                ", secs=" + fmt(secs, 2));
    REQUIRE(max_err <= 1e-6);
    REQUIRE(max_energy_dev <= 1e-5);
    REQUIRE(secs < 5.0);
}

TEST_CASE("acceptance 2 pca basis") {
    // Two-point-pair sample whose top singular value is known in closed form:
    // scatter diag(10, 0), so sigma_1 = sqrt(10).
    std::vector<float> samples = {1, 0, -1, 0, 2, 0, -2, 0};
    PcaBasis oracle = fit_pca(samples, 4, 2, 1);
    double sv_err = std::abs(oracle.singular_values[0] - std::sqrt(10.0));

    ImageTensor x = random_image(3, 8, 8, 301);
    PcaBasis basis = fit_pca_from_tensor(x);
    double ortho = 0.0;
    for (int r = 0; r < basis.rank; ++r)
        for (int c = 0; c < basis.rank; ++c) {
            double dot = 0.0;
            for (int k = 0; k < basis.dim; ++k)
                dot += static_cast<double>(basis.b(r, k)) * static_cast<double>(basis.b(c, k));
            ortho = std::max(ortho, std::abs(dot - (r == c ? 1.0 : 0.0)));
        }

    ImageTensor back = pca_reconstruct(pca_project(x, basis), basis);
    double recon = 0.0;
    for (size_t j = 0; j < x.data.size(); ++j)
        recon = std::max(recon, static_cast<double>(std::abs(back.data[j] - x.data[j])));

    bool pass = sv_err <= 1e-6 && ortho <= 1e-5 && recon <= 1e-5;
    verdict(2, "pca_basis", pass,
            "sigma_err=" + fmt_sci(sv_err) + ", orthonormality_err=" + fmt_sci(ortho) +
                ", reconstruction_err=" + fmt_sci(recon));
    REQUIRE(sv_err <= 1e-6);
    REQUIRE(ortho <= 1e-5);
    REQUIRE(recon <= 1e-5);
}

TEST_CASE("acceptance 3 gradient check") {
    auto t0 = Clock::now();
    const double h = 1e-2;
    double per_op = 0.0;
    std::string worst_op = "none";
    auto track = [&](const char* name, double err) {
        if (err > per_op) {
            per_op = err;
            worst_op = name;
        }
    };

    {
        auto x = make_var({2, 4, 5}, random_values(40, 401, 0.2f, 0.8f));
        std::vector<float> kv(3 * 2 * 3 * 3);
        Rng rng(402);
        for (auto& v : kv) v = static_cast<float>(rng.normal(0.0, 0.3));
        auto k = make_var({3, 2, 3, 3}, kv);
        auto b = make_var({3}, random_values(3, 403, -0.2f, 0.2f));
        track("conv2d", max_fd_relerr({x, k, b}, [&](Tape& t) {
            auto r = ad::conv2d(t, x, k, b);
            return ad::sum_squared_error(t, r, std::vector<float>(r->size(), 0.3f));
        }, h));
    }
    {
        // Inputs at least 0.35 from the kink so the FD stencil stays one-sided.
        std::vector<float> xv = random_values(24, 404, 0.35f, 1.0f);
        Rng rng(405);
        for (auto& v : xv)
            if (rng.next_double() < 0.5) v = -v;
        auto x = make_var({2, 3, 4}, xv);
        track("relu", max_fd_relerr({x}, [&](Tape& t) {
            auto r = ad::relu(t, x);
            return ad::sum_squared_error(t, r, std::vector<float>(r->size(), 0.25f));
        }, h));
    }
    {
        auto a = make_var({2, 3, 3}, random_values(18, 406, -0.8f, 0.8f));
        auto b = make_var({1, 3, 3}, random_values(9, 407, -0.8f, 0.8f));
        track("concat_channels", max_fd_relerr({a, b}, [&](Tape& t) {
            auto r = ad::concat_channels(t, a, b);
            return ad::sum_squared_error(t, r, std::vector<float>(r->size(), 0.2f));
        }, h));
    }
    {
        auto a = make_var({2, 3, 3}, random_values(18, 408, -0.8f, 0.8f));
        auto b = make_var({2, 3, 3}, random_values(18, 409, -0.8f, 0.8f));
        track("add_scaled", max_fd_relerr({a, b}, [&](Tape& t) {
            auto r = ad::add_scaled(t, a, b, 0.7f, 0.3f);
            return ad::sum_squared_error(t, r, std::vector<float>(r->size(), 0.1f));
        }, h));
    }
    {
        auto x = make_var({2, 3, 3}, random_values(18, 410, -0.8f, 0.8f));
        track("scale", max_fd_relerr({x}, [&](Tape& t) {
            auto r = ad::scale(t, x, 1.3f);
            return ad::sum_squared_error(t, r, std::vector<float>(r->size(), 0.2f));
        }, h));
    }
    {
        auto x = make_var({2, 4, 4}, random_values(32, 411, -0.8f, 0.8f));
        track("dwt", max_fd_relerr({x}, [&](Tape& t) {
            auto r = ad::dwt_node(t, x);
            return ad::sum_squared_error(t, r, std::vector<float>(r->size(), 0.1f));
        }, h));
    }
    {
        auto s = make_var({8, 2, 2}, random_values(32, 412, -0.8f, 0.8f));
        track("idwt", max_fd_relerr({s}, [&](Tape& t) {
            auto r = ad::idwt_node(t, s);
            return ad::sum_squared_error(t, r, std::vector<float>(r->size(), 0.1f));
        }, h));
    }
    {
        auto basis = std::make_shared<const PcaBasis>(
            fit_pca_from_tensor(random_image(2, 4, 4, 413)));
        auto x = make_var({2, 4, 4}, random_values(32, 414, -0.8f, 0.8f));
        track("pca_project", max_fd_relerr({x}, [&](Tape& t) {
            auto r = ad::pca_node(t, x, basis);
            return ad::sum_squared_error(t, r, std::vector<float>(r->size(), 0.1f));
        }, h));
    }
    {
        auto r = make_var({2, 3, 3}, random_values(18, 415, -0.8f, 0.8f));
        track("sum_squared_error", max_fd_relerr({r}, [&](Tape& t) {
            return ad::sum_squared_error(t, r, std::vector<float>(r->size(), 0.4f));
        }, h));
    }
    {
        auto a = make_var({2, 2}, random_values(4, 416, -0.8f, 0.8f));
        auto b = make_var({3}, random_values(3, 417, -0.8f, 0.8f));
        track("add_scalars", max_fd_relerr({a, b}, [&](Tape& t) {
            auto la = ad::sum_squared_error(t, a, std::vector<float>(a->size(), 0.1f));
            auto lb = ad::sum_squared_error(t, b, std::vector<float>(b->size(), 0.2f));
            return ad::add_scalars(t, {la, lb});
        }, h));
    }

    // End to end through a depth-1 model. The basis is fixed (not refit per
    // input) because the per-input refit is outside the gradient by design:
    // a finite difference through a refitting model would measure basis
    // drift terms the backward pass deliberately treats as constant.
    // Positive biases and small kernels keep ReLU inputs away from the kink.
    ModelConfig mc;
    mc.in_channels = 1;
    mc.base_channels = 2;
    mc.depth = 1;
    mc.seed = 3;
    mc.basis_policy = BasisPolicy::fixed_random(11);
    Model model(mc);
    Rng prng(418);
    std::vector<VarPtr> leaves;
    for (auto& item : model.params().items) {
        for (auto& v : item.tensor->value)
            v = item.kind == ParamKind::Kernel
                    ? static_cast<float>(prng.normal(0.0, 0.05))
                    : static_cast<float>(0.35 + 0.3 * prng.next_double());
        leaves.push_back(item.tensor);
    }
    auto x = make_var({1, 8, 8}, random_values(64, 419, 0.3f, 0.7f));
    leaves.push_back(x);
    double e2e = max_fd_relerr(leaves, [&](Tape& t) {
        auto r = model.forward(t, x);
        return ad::sum_squared_error(t, r, std::vector<float>(r->size(), 0.3f));
    }, 1e-3);

    double secs = seconds_since(t0);
    bool pass = per_op <= 1e-3 && e2e <= 5e-3 && secs < 30.0;
    verdict(3, "gradient_check", pass,
            "per_op_max=" + fmt_sci(per_op) + " (" + worst_op + "), e2e_max=" + fmt_sci(e2e) +
                ", secs=" + fmt(secs, 2));
    REQUIRE(per_op <= 1e-3);
    REQUIRE(e2e <= 5e-3);
    REQUIRE(secs < 30.0);
}

TEST_CASE("acceptance 4 metric identities") {
    double p = psnr_from_mse(0.01, 1.0).db;
    double p_err = std::abs(p - 20.0);

    ImageTensor x = random_image(3, 32, 32, 420);
    double self_err = std::abs(ssim(x, x) - 1.0);

    ImageTensor zeros(1, 32, 32, 0.0f);
    ImageTensor ones(1, 32, 32, 1.0f);
    MetricsConfig global;
    global.ssim_global = true;
    // mu 0 vs 1, zero variance: SSIM collapses to c1 / (mu^2 + c1).
    double want = 1e-4 / 1.0001;
    double const_err = std::abs(ssim(zeros, ones, global) - want);

    bool pass = p_err <= 1e-12 && self_err <= 1e-9 && const_err <= 1e-9;
    verdict(4, "metric_identities", pass,
            "psnr(mse=0.01)=" + fmt(p, 12) + ", ssim_self_err=" + fmt_sci(self_err) +
                ", ssim_const_err=" + fmt_sci(const_err));
    REQUIRE(p_err <= 1e-12);
    REQUIRE(self_err <= 1e-9);
    REQUIRE(const_err <= 1e-9);
}

TEST_CASE("acceptance 5 training smoke") {
    const SmokeOutcome& o = smoke_outcome(1.0f, 1.0f);
    double ratio = o.epoch_losses.back() / o.epoch_losses.front();
    double gain = o.denoised_db - o.noisy_db;

    bool pass = o.patch_count == 16 && o.epoch_losses.size() == 20 && ratio < 0.5 &&
                gain >= 1.0 && o.secs < 300.0;
    verdict(5, "training_smoke", pass,
            "patches=" + std::to_string(o.patch_count) + ", loss_ratio=" + fmt(ratio) +
                ", noisy=" + fmt(o.noisy_db, 2) + "dB, denoised=" + fmt(o.denoised_db, 2) +
                "dB, gain=" + fmt(gain, 2) + "dB, secs=" + fmt(o.secs, 1));
    REQUIRE(o.patch_count == 16);
    REQUIRE(o.epoch_losses.size() == 20);
    REQUIRE(ratio < 0.5);
    REQUIRE(gain >= 1.0);
    REQUIRE(o.secs < 300.0);
}

TEST_CASE("acceptance 6 fusion ablation") {
    const SmokeOutcome& dwt_only = smoke_outcome(1.0f, 0.0f);
    const SmokeOutcome& fused = smoke_outcome(1.0f, 1.0f);

    bool pass = dwt_only.denoised_db > dwt_only.noisy_db && fused.denoised_db > fused.noisy_db;
    verdict(6, "fusion_ablation", pass,
            "noisy=" + fmt(fused.noisy_db, 2) + "dB, a1b0=" + fmt(dwt_only.denoised_db, 2) +
                "dB, a1b1=" + fmt(fused.denoised_db, 2) + "dB");
    REQUIRE(dwt_only.denoised_db > dwt_only.noisy_db);
    REQUIRE(fused.denoised_db > fused.noisy_db);
}

TEST_CASE("acceptance 7 threshold baseline") {
    ImageTensor clean = synth_image(SynthKind::Smooth, 3, 64, 64, 77);
    float sigma = 25.0f / 255.0f;
    ImageTensor noisy = add_gaussian_noise(clean, sigma, derive_seed(77, 1));
    ImageTensor restored = baseline_wavelet_threshold(noisy, sigma);

    double noisy_db = psnr(clean, noisy).db;
    double base_db = psnr(clean, restored).db;
    bool pass = base_db > noisy_db;
    verdict(7, "threshold_baseline", pass,
            "noisy=" + fmt(noisy_db, 2) + "dB, thresholded=" + fmt(base_db, 2) + "dB");
    REQUIRE(base_db > noisy_db);
}

TEST_CASE("acceptance 8 reproducibility") {
    fs::path data = testutil::scratch_dir("acc-repro-data");
    fs::path work = testutil::scratch_dir("acc-repro-work");
    auto synth = testutil::run_cli("synth --out " + data.string() +
                                   " --kind smooth --count 4 --height 48 --width 48 --seed 9");
    REQUIRE(synth.exit_code == 0);

    const std::string flags = " --epochs 4 --base-channels 4 --depth 1 --seed 2"
                              " --checkpoint-every 2 --patch-size 24 --lr-init 1e-3";
    fs::path a = work / "a", b = work / "b", c = work / "c";
    auto ra = testutil::run_cli("train --data " + data.string() + " --out " + a.string() + flags);
    auto rb = testutil::run_cli("train --data " + data.string() + " --out " + b.string() + flags);
    auto rc = testutil::run_cli("train --data " + data.string() + " --out " + c.string() + flags +
                                " --resume " + (a / "model_epoch2.ckpt").string());
    INFO(ra.err);
    INFO(rc.err);
    REQUIRE(ra.exit_code == 0);
    REQUIRE(rb.exit_code == 0);
    REQUIRE(rc.exit_code == 0);

    bool rerun_same = testutil::same_bytes(a / "model.ckpt", b / "model.ckpt");
    bool resume_same = testutil::same_bytes(a / "model.ckpt", c / "model.ckpt");
    bool pass = rerun_same && resume_same;
    verdict(8, "reproducibility", pass,
            std::string("rerun_bitwise=") + (rerun_same ? "yes" : "no") +
                ", resume_bitwise=" + (resume_same ? "yes" : "no"));
    REQUIRE(rerun_same);
    REQUIRE(resume_same);

    fs::remove_all(data);
    fs::remove_all(work);
}

TEST_CASE("acceptance 9 report shape") {
    fs::path data = testutil::scratch_dir("acc-report-data");
    fs::path work = testutil::scratch_dir("acc-report-work");
    write_synth_dataset(data, SynthKind::Smooth, 4, 3, 48, 48, 9);

    // No "presets" key: the report must fall back to the standard coefficient
    // sweep (1,1), (0.7,0.3), (0.3,0.7).
    fs::path spec = work / "spec.json";
    {
        std::ofstream os(spec, std::ios::binary);
        os << "{\n"
              "  \"dataset\": {\"name\": \"acc\", \"root\": \"" << data.string() << "\"},\n"
              "  \"noise\": {\"seed\": 5},\n"
              "  \"train\": {\"epochs\": 1, \"batch_size\": 2, \"patch_size\": 24,\n"
              "              \"patches_per_image\": 2, \"checkpoint_every\": 0,\n"
              "              \"lr_init\": 1e-3, \"seed\": 2},\n"
              "  \"model\": {\"base_channels\": 4, \"depth\": 1, \"seed\": 2},\n"
              "  \"val_fraction\": 0.25,\n"
              "  \"triptych_count\": 1\n"
              "}\n";
    }
    fs::path out = work / "report";
    auto run = testutil::run_cli("report --spec " + spec.string() + " --out " + out.string());
    INFO(run.err);
    REQUIRE(run.exit_code == 0);

    auto lines = testutil::file_lines(out / "report.csv");
    bool header_ok = !lines.empty() && lines[0] == "dataset,alpha,beta,method,psnr_db,ssim";
    bool rows_ok = lines.size() == 6;
    auto row_has = [&](size_t i, const std::string& prefix) {
        return lines.size() > i && lines[i].rfind(prefix, 0) == 0;
    };
    bool methods_ok = row_has(1, "acc,1,1,fused_unet_a1b1,") &&
                      row_has(2, "acc,0.7,0.3,fused_unet_a0.7b0.3,") &&
                      row_has(3, "acc,0.3,0.7,fused_unet_a0.3b0.7,") &&
                      row_has(4, "acc,,,wavelet_threshold,") && row_has(5, "acc,,,noisy,");

    // Markdown table cells carry the combined "PSNR/SSIM" form, e.g. 27.43/0.9105.
    std::string md = testutil::slurp(out / "report.md");
    bool cells_ok = std::regex_search(md, std::regex(R"(\d+\.\d{2}/0\.\d{4})"));

    bool pass = header_ok && rows_ok && methods_ok && cells_ok;
    verdict(9, "report_shape", pass,
            std::string("rows=") + std::to_string(lines.empty() ? 0 : lines.size() - 1) +
                ", header=" + (header_ok ? "ok" : "bad") +
                ", methods=" + (methods_ok ? "ok" : "bad") +
                ", psnr_ssim_cells=" + (cells_ok ? "ok" : "missing"));
    REQUIRE(header_ok);
    REQUIRE(rows_ok);
    REQUIRE(methods_ok);
    REQUIRE(cells_ok);

    fs::remove_all(data);
    fs::remove_all(work);
}
