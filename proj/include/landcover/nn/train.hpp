#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "landcover/dataset.hpp"
#include "landcover/nn/checkpoint.hpp"
#include "landcover/nn/loss.hpp"
#include "landcover/nn/optim.hpp"

namespace landcover::nn {

/// Packs normalized tiles into an (N,4,32,32) batch.
template <class T>
Tensor<T> make_batch(std::span<const Tile* const> tiles, const BandStats& stats,
                     std::optional<std::uint16_t> nodata = std::nullopt) {
    Tensor<T> x(Shape{tiles.size(), kBands, kTileSize, kTileSize});
    for (std::size_t i = 0; i < tiles.size(); ++i) normalize_into<T>(*tiles[i], stats, x.sample(i), nodata);
    return x;
}

inline int argmax_row(std::span<const float> row) {
    int best = 0;
    for (std::size_t k = 1; k < row.size(); ++k)
        if (row[k] > row[best]) best = static_cast<int>(k);
    return best;
}

/// Eval-mode class predictions, `batch_size` tiles per forward pass. Every
/// per-sample computation is independent of the batch it sits in, so the
/// result does not depend on batch_size.
inline std::vector<int> predict(Model<float>& model, std::span<const Tile* const> tiles, const BandStats& stats,
                                std::size_t batch_size, std::optional<std::uint16_t> nodata = std::nullopt) {
    if (batch_size == 0) fail(ErrorCode::InvalidArgument, "batch size must be >= 1");
    std::vector<int> out;
    out.reserve(tiles.size());
    for (std::size_t lo = 0; lo < tiles.size(); lo += batch_size) {
        const std::size_t hi = std::min(tiles.size(), lo + batch_size);
        const auto logits = model.forward(make_batch<float>(tiles.subspan(lo, hi - lo), stats, nodata), Mode::Eval);
        const std::size_t k = logits.c();
        for (std::size_t i = 0; i < hi - lo; ++i) out.push_back(argmax_row(logits.span().subspan(i * k, k)));
    }
    return out;
}

struct EpochMetrics {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;

    friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

inline constexpr std::string_view kMetricsHeader = "epoch,lr,train_loss,train_acc,val_loss,val_acc";

inline std::string metrics_csv(const std::vector<EpochMetrics>& rows) {
    std::string out(kMetricsHeader);
    out += '\n';
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.lr, r.train_loss, r.train_acc,
                      r.val_loss, r.val_acc);
        out += buf;
    }
    return out;
}

struct TrainResult {
    Checkpoint final_checkpoint;
    Checkpoint best_checkpoint;
    int best_epoch = -1;
    std::vector<EpochMetrics> metrics;
};

namespace detail {

inline std::uint64_t tag(const char (&s)[5]) {
    return static_cast<std::uint64_t>(s[0]) | static_cast<std::uint64_t>(s[1]) << 8 |
           static_cast<std::uint64_t>(s[2]) << 16 | static_cast<std::uint64_t>(s[3]) << 24;
}

} // namespace detail

struct EvalSummary {
    double loss = 0.0;
    double accuracy = 0.0;
};

inline EvalSummary evaluate_split(Model<float>& model, const Manifest& m, std::span<const std::size_t> idx,
                                  const BandStats& stats, std::size_t batch_size, double alpha) {
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t lo = 0; lo < idx.size(); lo += batch_size) {
        const std::size_t hi = std::min(idx.size(), lo + batch_size);
        std::vector<const Tile*> tiles;
        std::vector<int> labels;
        for (std::size_t i = lo; i < hi; ++i) {
            tiles.push_back(&m.samples[idx[i]].tile);
            labels.push_back(static_cast<int>(m.samples[idx[i]].label));
        }
        const auto logits = model.forward(make_batch<float>(tiles, stats), Mode::Eval);
        const auto r = cross_entropy_smoothed(logits, labels, alpha);
        loss_sum += r.loss * static_cast<double>(hi - lo);
        for (std::size_t i = 0; i < labels.size(); ++i) correct += r.predicted[i] == labels[i];
    }
    const double n = static_cast<double>(idx.size());
    return {loss_sum / n, static_cast<double>(correct) / n};
}

/// Seeded single-stream SGD training. Each epoch shuffles the train split,
/// augments every sample from its own (seed, epoch, index) stream, and
/// evaluates the val split without augmentation. Returns the final and the
/// best-val checkpoints plus one metrics row per epoch.
inline TrainResult train(const Manifest& manifest, const ModelConfig& model_cfg, const TrainConfig& cfg,
                         const std::function<void(const EpochMetrics&)>& on_epoch = {},
                         std::optional<double> pixel_size = std::nullopt) {
    cfg.validate();
    const auto train_idx = manifest.indices(Split::Train);
    const auto val_idx = manifest.indices(Split::Val);
    if (cfg.epochs > 0 && (train_idx.empty() || val_idx.empty()))
        fail(ErrorCode::InsufficientSamples, "training needs non-empty train and val splits");
    const BandStats stats = manifest.band_stats;
    if (cfg.epochs > 0) check_stats(stats);

    Model<float> model(model_cfg);
    model.initialize(stream_seed(cfg.seed, detail::tag("init")));
    Sgd<float> opt(cfg.momentum, cfg.weight_decay);

    TrainResult res;
    res.final_checkpoint = snapshot(model, stats, pixel_size, 0, cfg.seed);
    res.best_checkpoint = res.final_checkpoint;
    double best_acc = -1.0;
    const auto batch = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(epoch, cfg);
        std::vector<std::size_t> order = train_idx;
        Rng shuffler(stream_seed(cfg.seed, detail::tag("shuf"), static_cast<std::uint64_t>(epoch)));
        shuffler.shuffle(std::span(order));

        double loss_sum = 0.0;
        std::size_t correct = 0;
        std::size_t batch_no = 0;
        for (std::size_t lo = 0; lo < order.size(); lo += batch, ++batch_no) {
            const std::size_t hi = std::min(order.size(), lo + batch);
            std::vector<Tile> tiles(hi - lo);
            std::vector<int> labels(hi - lo);
            parallel_for(hi - lo, [&](std::size_t i) {
                const std::size_t s = order[lo + i];
                const Tile& src = manifest.samples[s].tile;
                if (cfg.augment) {
                    Rng rng(stream_seed(cfg.seed, detail::tag("augm"), static_cast<std::uint64_t>(epoch), s));
                    tiles[i] = apply_augment(src, draw_augment(rng));
                } else {
                    tiles[i] = src;
                }
                labels[i] = static_cast<int>(manifest.samples[s].label);
            });
            std::vector<const Tile*> ptrs;
            for (const auto& t : tiles) ptrs.push_back(&t);

            model.zero_grad();
            try {
                const auto logits = model.forward(make_batch<float>(ptrs, stats), Mode::Train);
                const auto r = cross_entropy_smoothed(logits, labels, cfg.label_smoothing);
                if (!std::isfinite(r.loss)) fail(ErrorCode::NonFinite, "loss");
                model.backward(r.grad);
                model.release_cache();
                opt.step(model, lr);
                loss_sum += r.loss * static_cast<double>(hi - lo);
                for (std::size_t i = 0; i < labels.size(); ++i) correct += r.predicted[i] == labels[i];
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NonFinite && e.code() != ErrorCode::NonFiniteLogits &&
                    e.code() != ErrorCode::DivergedLoss)
                    throw;
                fail(ErrorCode::DivergedLoss, "epoch " + std::to_string(epoch) + ", batch " +
                                                  std::to_string(batch_no) + ": " + e.what());
            }
        }

        EpochMetrics row;
        row.epoch = epoch;
        row.lr = lr;
        row.train_loss = loss_sum / static_cast<double>(order.size());
        row.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
        const auto val = evaluate_split(model, manifest, val_idx, stats, batch, cfg.label_smoothing);
        row.val_loss = val.loss;
        row.val_acc = val.accuracy;
        res.metrics.push_back(row);
        if (on_epoch) on_epoch(row);

        if (row.val_acc > best_acc) {
            best_acc = row.val_acc;
            res.best_epoch = epoch;
            res.best_checkpoint = snapshot(model, stats, pixel_size, epoch + 1, cfg.seed);
        }
    }
    res.final_checkpoint = snapshot(model, stats, pixel_size, cfg.epochs, cfg.seed, &opt.buffers());
    if (cfg.epochs == 0) res.best_checkpoint = res.final_checkpoint;
    return res;
}

// ---------------------------------------------------------------------------
// Evaluation

using Confusion = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>;  // [true][predicted]

struct EvalResult {
    double accuracy = 0.0;
    Confusion confusion{};
    std::size_t total = 0;
};

inline EvalResult score(std::span<const int> labels, std::span<const int> predicted) {
    if (labels.empty()) fail(ErrorCode::EmptySampleSet, "no samples to evaluate");
    if (labels.size() != predicted.size()) fail(ErrorCode::ShapeMismatch, "one prediction per label required");
    EvalResult r;
    std::size_t diag = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!is_valid_label(labels[i]) || !is_valid_label(predicted[i]))
            fail(ErrorCode::InvalidArgument, "class id outside 0..4");
        ++r.confusion[labels[i]][predicted[i]];
    }
    for (int k = 0; k < kNumClasses; ++k) diag += r.confusion[k][k];
    r.total = labels.size();
    r.accuracy = static_cast<double>(diag) / static_cast<double>(r.total);
    return r;
}

/// Accuracy and confusion matrix of a checkpoint on raw samples; tiles are
/// normalized with the checkpoint's band statistics.
inline EvalResult evaluate(const Checkpoint& ck, std::span<const Sample* const> samples, std::size_t batch_size = 256) {
    if (samples.empty()) fail(ErrorCode::EmptySampleSet, "no samples to evaluate");
    auto model = model_from_checkpoint(ck);
    std::vector<const Tile*> tiles;
    std::vector<int> labels;
    for (const auto* s : samples) {
        tiles.push_back(&s->tile);
        labels.push_back(static_cast<int>(s->label));
    }
    const auto pred = predict(model, tiles, ck.band_stats, batch_size);
    return score(labels, pred);
}

inline EvalResult evaluate(const Checkpoint& ck, const Manifest& m, Split which, std::size_t batch_size = 256) {
    std::vector<const Sample*> ptrs;
    for (auto i : m.indices(which)) ptrs.push_back(&m.samples[i]);
    return evaluate(ck, ptrs, batch_size);
}

} // namespace landcover::nn
