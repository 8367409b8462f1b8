// The training loop: seeded shuffling, per-sample noise synthesis, batched
// forward/backward over the tape, Adam with the warmup+cosine schedule,
// per-epoch loss CSV, and periodic + final checkpoints. Fully deterministic:
// (seed, config, patches) decide every parameter value at every step, and a
// resumed run is bitwise identical to an uninterrupted one.
#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <vector>

#include "wunet/checkpoint.hpp"
#include "wunet/imageops.hpp"
#include "wunet/model.hpp"
#include "wunet/optim.hpp"

namespace wunet {

/// Mean over all elements of (r - (y - x))^2 across the batch.
inline double residual_loss(const std::vector<ImageTensor>& r, const std::vector<ImageTensor>& y,
                            const std::vector<ImageTensor>& x) {
    if (r.empty() || r.size() != y.size() || r.size() != x.size())
        fail(ErrorCode::ShapeMismatch, "residual_loss: batch lists must be non-empty and equal-sized");
    double acc = 0.0;
    size_t elems = 0;
    for (size_t i = 0; i < r.size(); ++i) {
        require_same_shape(r[i], y[i], "residual_loss");
        require_same_shape(r[i], x[i], "residual_loss");
        for (size_t j = 0; j < r[i].size(); ++j) {
            double d = static_cast<double>(r[i].data[j]) -
                       (static_cast<double>(y[i].data[j]) - x[i].data[j]);
            acc += d * d;
        }
        elems += r[i].size();
    }
    return acc / static_cast<double>(elems);
}

/// Up to patches_per_image seeded random patches per image, non-overlapping
/// grid positions. Images smaller than the patch size contribute nothing.
inline std::vector<ImageTensor> make_training_patches(const std::vector<ImageTensor>& images,
                                                      const TrainConfig& cfg) {
    std::vector<ImageTensor> patches;
    for (size_t i = 0; i < images.size(); ++i) {
        const auto& img = images[i];
        if (std::min(img.height, img.width) < cfg.patch_size) continue;
        auto all = extract_patches(img, cfg.patch_size, cfg.patch_size,
                                   derive_seed(cfg.seed, 0x9000 + i));
        size_t take = std::min(static_cast<size_t>(cfg.patches_per_image), all.size());
        for (size_t k = 0; k < take; ++k) patches.push_back(std::move(all[k]));
    }
    if (patches.empty()) fail(ErrorCode::EmptyDataset, "no usable training patches");
    return patches;
}

struct TrainResult {
    std::filesystem::path checkpoint_path;
    std::filesystem::path loss_csv_path;
    std::vector<double> epoch_losses;  // one entry per epoch run by this call
    int64_t global_step = 0;
};

namespace detail {

// Fields that shape the math; checkpoint_every is deliberately excluded.
inline bool same_training_schedule(const TrainConfig& a, const TrainConfig& b) {
    return a.batch_size == b.batch_size && a.epochs == b.epochs && a.lr_init == b.lr_init &&
           a.lr_min == b.lr_min && a.warmup_fraction == b.warmup_fraction && a.sigma == b.sigma &&
           a.seed == b.seed && a.patch_size == b.patch_size &&
           a.patches_per_image == b.patches_per_image;
}

inline bool same_model_config(const ModelConfig& a, const ModelConfig& b) {
    return a.in_channels == b.in_channels && a.base_channels == b.base_channels &&
           a.depth == b.depth && a.seed == b.seed && a.fusion.alpha == b.fusion.alpha &&
           a.fusion.beta == b.fusion.beta && a.basis_policy.kind == b.basis_policy.kind &&
           a.basis_policy.seed == b.basis_policy.seed;
}

}  // namespace detail

/// Trains in place. `patches` are clean images of identical shape; noisy
/// inputs are synthesized per sample, fresh each epoch, from the master
/// seed. With `resume`, the model must already hold the checkpoint's
/// parameters and training continues from its epoch counter.
inline TrainResult train(Model& model, const std::vector<ImageTensor>& patches,
                         const TrainConfig& cfg, const std::filesystem::path& out_dir,
                         std::ostream* progress = nullptr, const Checkpoint* resume = nullptr) {
    cfg.validate();
    if (patches.empty()) fail(ErrorCode::EmptyDataset, "no training patches");
    if (static_cast<size_t>(cfg.batch_size) > patches.size())
        fail(ErrorCode::BatchTooLarge, "batch_size exceeds the number of training patches");
    for (const auto& p : patches)
        if (p.channels != model.config().in_channels)
            fail(ErrorCode::ShapeMismatch, "patch channel count does not match the model");

    const int64_t n = static_cast<int64_t>(patches.size());
    const int64_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const int64_t total_steps = steps_per_epoch * cfg.epochs;

    AdamState adam = AdamState::for_params(model.params());
    Rng rng(cfg.seed);
    int start_epoch = 0;
    int64_t global_step = 0;

    if (resume) {
        if (!detail::same_model_config(resume->model, model.config()))
            fail(ErrorCode::ConfigInvalid, "resume: model config does not match checkpoint");
        if (!detail::same_training_schedule(resume->train, cfg))
            fail(ErrorCode::ConfigInvalid, "resume: training config does not match checkpoint");
        if (resume->epoch > cfg.epochs)
            fail(ErrorCode::ConfigInvalid, "resume: checkpoint is past the requested epoch count");
        if (resume->global_step != static_cast<int64_t>(resume->epoch) * steps_per_epoch)
            fail(ErrorCode::ConfigInvalid, "resume: step counter does not match this dataset");
        if (!resume->adam.matches(model.params()))
            fail(ErrorCode::ShapeMismatch, "resume: optimizer state does not match parameters");
        adam = resume->adam;
        rng.deserialize(resume->rng_state);
        start_epoch = resume->epoch;
        global_step = resume->global_step;
    }

    std::filesystem::create_directories(out_dir);
    TrainResult result;
    result.loss_csv_path = out_dir / "loss.csv";
    result.checkpoint_path = out_dir / "model.ckpt";

    std::ofstream csv(result.loss_csv_path, std::ios::trunc);
    if (!csv) fail(ErrorCode::IoFailure, "cannot write " + result.loss_csv_path.string());
    csv << "epoch,step,lr,loss\n";

    std::vector<size_t> order(static_cast<size_t>(n));

    const int c = patches[0].channels, h = patches[0].height, w = patches[0].width;

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        // Identity before every shuffle: the epoch's sample order must be a
        // pure function of the rng state so resumed runs replay it exactly.
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        double epoch_sse = 0.0;
        size_t epoch_elems = 0;
        double lr = 0.0;

        for (int64_t s = 0; s < steps_per_epoch; ++s) {
            size_t lo = static_cast<size_t>(s) * cfg.batch_size;
            size_t hi = std::min(lo + cfg.batch_size, static_cast<size_t>(n));

            Tape tape;
            model.params().zero_grad();
            std::vector<VarPtr> sses;
            size_t batch_elems = 0;
            for (size_t bi = lo; bi < hi; ++bi) {
                const ImageTensor& x = patches[order[bi]];
                ImageTensor y = add_gaussian_noise(x, cfg.sigma, rng.next_u64());
                VarPtr yv = make_var({c, h, w}, y.data, /*requires_grad=*/false);
                VarPtr r = model.forward(tape, yv);
                std::vector<float> target(y.size());
                for (size_t j = 0; j < target.size(); ++j) target[j] = y.data[j] - x.data[j];
                sses.push_back(ad::sum_squared_error(tape, r, std::move(target)));
                batch_elems += y.size();
            }
            VarPtr loss = ad::scale(tape, ad::add_scalars(tape, sses),
                                    1.0f / static_cast<float>(batch_elems));
            tape.backward(loss);

            lr = lr_at(global_step, total_steps, cfg);
            adam_step(model.params(), adam, lr);
            global_step += 1;

            epoch_sse += static_cast<double>(loss->value[0]) * static_cast<double>(batch_elems);
            epoch_elems += batch_elems;
        }

        double epoch_loss = epoch_sse / static_cast<double>(epoch_elems);
        result.epoch_losses.push_back(epoch_loss);
        csv << (epoch + 1) << ',' << global_step << ',' << std::setprecision(12) << lr << ','
            << std::setprecision(9) << epoch_loss << '\n';
        if (progress)
            (*progress) << "epoch " << (epoch + 1) << "/" << cfg.epochs << " loss "
                        << std::setprecision(6) << epoch_loss << " lr " << std::setprecision(4)
                        << lr << "\n";

        bool last = epoch + 1 == cfg.epochs;
        if (!last && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
            Checkpoint ck = make_checkpoint(model, cfg, adam, rng, epoch + 1, global_step);
            save_checkpoint(ck, out_dir / ("model_epoch" + std::to_string(epoch + 1) + ".ckpt"));
        }
    }

    Checkpoint final_ck = make_checkpoint(model, cfg, adam, rng, cfg.epochs, global_step);
    save_checkpoint(final_ck, result.checkpoint_path);
    result.global_step = global_step;
    return result;
}

}  // namespace wunet
