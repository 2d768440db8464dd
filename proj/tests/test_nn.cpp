#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "landcover/check/conv_oracle.hpp"
#include "landcover/check/gradcheck.hpp"
#include "landcover/nn/checkpoint.hpp"
#include "landcover/nn/train.hpp"
#include "landcover/synth.hpp"
#include "support.hpp"

using namespace landcover;
using namespace landcover::nn;
using testing_support::TempDir;

namespace {

ModelConfig tiny_config(Stem stem = Stem::Cifar) {
    ModelConfig c = ModelConfig::preset("compact");
    c.stem = stem;
    c.stage_widths = {4, 8, 8, 16};
    return c;
}

Tensor<float> random_input(Rng& rng, std::size_t n, std::size_t hw = 32) {
    Tensor<float> x(Shape{n, 4, hw, hw});
    for (auto& v : x.vec()) v = static_cast<float>(rng.normal());
    return x;
}

/// Model with populated running statistics, ready for eval.
Model<float> warmed_model(const ModelConfig& cfg, std::uint64_t seed) {
    Model<float> m(cfg);
    m.initialize(seed);
    Rng rng(seed + 1);
    m.forward(random_input(rng, 8), Mode::Train);
    m.release_cache();
    return m;
}

/// Parameter total from the layer formulas: a k x k conv has ci*co*k*k
/// weights, BN has 2 per channel, the head has (in + 1) * classes.
std::size_t expected_parameters(const ModelConfig& c) {
    const std::size_t k0 = c.stem == Stem::Cifar ? 3 : 7;
    std::size_t in = c.stage_widths[0];
    std::size_t total = c.in_channels * in * k0 * k0 + 2 * in;
    for (int s = 0; s < 4; ++s)
        for (int b = 0; b < c.stage_blocks[s]; ++b) {
            const std::size_t w = c.stage_widths[s];
            total += in * w * 9 + 2 * w + w * w * 9 + 2 * w;
            if ((s > 0 && b == 0) || in != w) total += in * w + 2 * w;
            in = w;
        }
    return total + (in + 1) * c.n_classes;
}

Manifest small_synthetic(std::uint64_t seed) { return synth::make_dataset(seed, {60, 20, 20}); }

} // namespace

TEST(Conv, PointwiseIdentityKernel) {
    Conv2d<float> conv(3, 3, 1, 1, 0);
    for (std::size_t c = 0; c < 3; ++c) conv.weight().value.at(c, c, 0, 0) = 1.0f;
    Rng rng(1);
    Tensor<float> x(Shape{2, 3, 5, 7});
    for (auto& v : x.vec()) v = static_cast<float>(rng.normal());
    EXPECT_EQ(conv.forward(x, Mode::Eval), x);
    EXPECT_EQ(conv.forward(x, Mode::Train), x);
}

TEST(Conv, ZeroInputZeroOutput) {
    Conv2d<float> conv(3, 4, 3, 1, 1);
    Rng rng(2);
    for (auto& v : conv.weight().value.vec()) v = static_cast<float>(rng.normal());
    const auto y = conv.forward(Tensor<float>(Shape{2, 3, 8, 8}), Mode::Eval);
    EXPECT_EQ(y.shape(), (Shape{2, 4, 8, 8}));
    for (float v : y.vec()) EXPECT_EQ(v, 0.0f);
}

TEST(Conv, MatchesDirectLoopExactlyInDouble) {
    Rng rng(3);
    Conv2d<double> conv(3, 4, 3, 1, 1);
    conv.weight().value = check::random_tensor(conv.weight().value.shape(), rng);
    const auto x = check::random_tensor(Shape{2, 3, 8, 8}, rng);
    const auto oracle = check::conv2d_naive(x, conv.weight().value, 1, 1);
    EXPECT_EQ(conv.forward(x, Mode::Eval), oracle);
    EXPECT_EQ(conv.forward(x, Mode::Train), oracle);
}

TEST(Conv, OutputSizeAndShapeErrors) {
    Conv2d<float> conv(3, 2, 3, 2, 1);
    EXPECT_EQ(conv.forward(Tensor<float>(Shape{1, 3, 9, 9})).shape(), (Shape{1, 2, 5, 5}));
    EXPECT_CODE(conv.forward(Tensor<float>(Shape{1, 2, 9, 9})), ShapeMismatch);
}

TEST(BatchNorm, StandardizedInputPassesThrough) {
    BatchNorm2d<double> bn(2);
    Tensor<double> x(Shape{2, 2, 1, 2});
    const double v[] = {1, -1, 1, -1};  // per channel: mean 0, biased var 1
    for (std::size_t i = 0; i < 4; ++i) {
        x.at(i / 2, 0, 0, i % 2) = v[i];
        x.at(i / 2, 1, 0, i % 2) = -v[i];
    }
    const auto y = bn.forward(x, Mode::Train);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-5);
}

TEST(BatchNorm, TrainOutputHasUnitMoments) {
    Rng rng(4);
    BatchNorm2d<double> bn(3);
    auto x = check::random_tensor(Shape{4, 3, 5, 5}, rng, 3.0);
    for (auto& v : x.vec()) v += 7.0;
    const auto y = bn.forward(x, Mode::Train);
    for (std::size_t c = 0; c < 3; ++c) {
        double s1 = 0, s2 = 0;
        for (std::size_t n = 0; n < 4; ++n)
            for (std::size_t i = 0; i < 25; ++i) {
                const double v = y[(n * 3 + c) * 25 + i];
                s1 += v;
                s2 += v * v;
            }
        EXPECT_NEAR(s1 / 100, 0.0, 1e-5);
        EXPECT_NEAR(s2 / 100 - (s1 / 100) * (s1 / 100), 1.0, 1e-5);
    }
}

TEST(BatchNorm, RunningStatisticsAndEvalGuard) {
    BatchNorm2d<double> bn(1);
    EXPECT_CODE(bn.forward(Tensor<double>(Shape{1, 1, 2, 2}), Mode::Eval), EvalBeforeStats);
    Tensor<double> x(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
    bn.forward(x, Mode::Train);
    EXPECT_NEAR(bn.running_mean()[0], 0.1 * 2.5, 1e-12);
    EXPECT_NEAR(bn.running_var()[0], 0.9 + 0.1 * (5.0 / 3.0), 1e-12);
    const auto y = bn.forward(x, Mode::Eval);
    EXPECT_NEAR(y[0], (1 - 0.25) / std::sqrt(bn.running_var()[0] + kBnEps), 1e-12);
}

TEST(Block, ZeroedResidualBranchIsRelu) {
    BasicBlock<double> block(3, 3, 1);
    block.visit_params("", [](const std::string&, Param<double>& p) { p.value.zero(); });
    Rng rng(5);
    const auto x = check::random_tensor(Shape{2, 3, 4, 4}, rng);
    const auto y = block.forward(x, Mode::Train);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], std::max(0.0, x[i]));
}

TEST(Block, DownsamplingHalvesSpatialDims) {
    BasicBlock<float> block(4, 8, 2);
    Rng rng(6);
    Tensor<float> x(Shape{2, 4, 32, 32});
    for (auto& v : x.vec()) v = static_cast<float>(rng.normal());
    EXPECT_EQ(block.forward(x, Mode::Train).shape(), (Shape{2, 8, 16, 16}));
}

TEST(Gradients, EveryLayerWithinTolerance) {
    for (const auto& g : check::run_gradient_checks(99, 3)) {
        EXPECT_EQ(g.instances, 3);
        EXPECT_LT(g.worst, 1e-6) << g.layer;
    }
}

TEST(Model, EvalIsBatchInvariantBitwise) {
    auto model = warmed_model(tiny_config(), 7);
    Rng rng(8);
    const auto batch = random_input(rng, 5);
    const auto all = model.forward(batch, Mode::Eval);
    ASSERT_EQ(all.shape(), (Shape{5, 5}));
    for (std::size_t i = 0; i < 5; ++i) {
        Tensor<float> one(Shape{1, 4, 32, 32});
        std::copy(batch.sample(i).begin(), batch.sample(i).end(), one.vec().begin());
        const auto logits = model.forward(one, Mode::Eval);
        for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(logits[k], all[i * 5 + k]);
    }
}

TEST(Model, OutputShapeForAnyBatch) {
    for (auto stem : {Stem::Cifar, Stem::ImageNet}) {
        auto model = warmed_model(tiny_config(stem), 9);
        Rng rng(10);
        for (std::size_t n : {1u, 3u, 17u}) EXPECT_EQ(model.forward(random_input(rng, n), Mode::Eval).shape(), (Shape{n, 5}));
        EXPECT_CODE(model.forward(Tensor<float>(Shape{1, 3, 32, 32}), Mode::Eval), ShapeMismatch);
    }
}

TEST(Model, ParameterCountMatchesFormula) {
    Model<float> compact(ModelConfig::preset("compact"));
    EXPECT_EQ(compact.parameter_count(), expected_parameters(ModelConfig::preset("compact")));
    EXPECT_EQ(compact.parameter_count(), 4901253u);
    Model<float> r34(ModelConfig::preset("r34"));
    EXPECT_EQ(r34.parameter_count(), expected_parameters(ModelConfig::preset("r34")));
    std::size_t from_layout = 0;
    for (const auto& b : param_layout(ModelConfig::preset("r34"))) from_layout += b.shape.numel();
    EXPECT_EQ(from_layout, r34.parameter_count());
}

TEST(Model, EvalIsPureFunction) {
    auto model = warmed_model(tiny_config(), 11);
    Rng rng(12);
    const auto x = random_input(rng, 3);
    EXPECT_EQ(model.forward(x, Mode::Eval), model.forward(x, Mode::Eval));
}

TEST(Loss, SmoothLabels) {
    const auto y = smooth_labels(0, 5, 0.1);
    const std::vector<double> expected{1.0 * (1 - 0.1) + 0.1 / 5, 0.1 / 5, 0.1 / 5, 0.1 / 5, 0.1 / 5};
    EXPECT_EQ(y, expected);
    EXPECT_EQ(y[0], 0.92);
    EXPECT_EQ(y[1], 0.02);
    EXPECT_EQ(smooth_labels(3, 5, 0.0), (std::vector<double>{0, 0, 0, 1, 0}));
    for (double v : smooth_labels(2, 5, 1.0)) EXPECT_EQ(v, 0.2);
    EXPECT_CODE(smooth_labels(5, 5, 0.1), InvalidArgument);
    EXPECT_CODE(smooth_labels(0, 5, 1.5), InvalidArgument);
}

TEST(Loss, UniformLogitsGiveLnK) {
    for (double alpha : {0.0, 0.1, 1.0})
        for (int label = 0; label < 5; ++label) {
            const std::vector<int> labels{label};
            EXPECT_NEAR(cross_entropy_smoothed(Tensor<double>(Shape{1, 5}), labels, alpha).loss,
                        std::log(5.0), 1e-12);
        }
}

TEST(Loss, PeakedLogitsApproachZero) {
    Tensor<double> z(Shape{1, 5});
    z[2] = 60.0;
    const std::vector<int> labels{2};
    const auto r = cross_entropy_smoothed(z, labels, 0.0);
    EXPECT_LT(r.loss, 1e-20);
    EXPECT_EQ(r.predicted[0], 2);
}

TEST(Loss, NonFiniteLogitsRejected) {
    Tensor<float> z(Shape{1, 5});
    z[1] = std::numeric_limits<float>::quiet_NaN();
    const std::vector<int> labels{0};
    EXPECT_CODE(cross_entropy_smoothed(z, labels, 0.1), NonFiniteLogits);
}

TEST(Loss, TiesPredictLowerClass) {
    Tensor<float> z(Shape{1, 5});
    z[1] = 2.0f;
    z[3] = 2.0f;
    const std::vector<int> labels{0};
    EXPECT_EQ(cross_entropy_smoothed(z, labels, 0.1).predicted[0], 1);
    EXPECT_EQ(argmax_row(z.span()), 1);
}

TEST(Sgd, Examples) {
    std::vector<double> w{0.5, -1.0}, g{2.0, 4.0}, buf{0, 0};
    sgd_step<double>(w, g, buf, 0.1, 0.0, 0.0);
    EXPECT_EQ(w, (std::vector<double>{0.5 - 0.1 * 2.0, -1.0 - 0.1 * 4.0}));

    std::vector<double> w2{0.25}, zero{0.0}, b2{0.0};
    sgd_step<double>(w2, zero, b2, 0.1, 0.9, 0.0);
    EXPECT_EQ(w2[0], 0.25);

    std::vector<double> w3{0.0}, one{1.0}, b3{0.0};
    sgd_step<double>(w3, one, b3, 0.1, 0.9, 0.0);
    sgd_step<double>(w3, one, b3, 0.1, 0.9, 0.0);
    EXPECT_NEAR(w3[0], -0.29, 1e-15);

    std::vector<double> w4{2.0}, b4{0.0};
    sgd_step<double>(w4, zero, b4, 0.5, 0.0, 0.1);
    EXPECT_EQ(w4[0], 2.0 - 0.5 * 0.2);

    std::vector<double> shorter{0.0};
    EXPECT_CODE(sgd_step<double>(w, shorter, buf, 0.1, 0.0, 0.0), ShapeMismatch);
}

TEST(Schedule, StepDrops) {
    const TrainConfig cfg;
    EXPECT_EQ(lr_at(0, cfg), 0.1);
    EXPECT_EQ(lr_at(99, cfg), 0.1);
    EXPECT_EQ(lr_at(100, cfg), 0.1 / 10.0);
    EXPECT_EQ(lr_at(199, cfg), 0.1 / 10.0);
    EXPECT_EQ(lr_at(200, cfg), 0.1 / 100.0);
    EXPECT_EQ(lr_at(299, cfg), 0.1 / 100.0);
    TrainConfig flat;
    flat.epochs = 15;
    flat.lr0 = 0.01;
    flat.lr_drop_every = 1000;
    for (int e = 0; e < 15; ++e) EXPECT_EQ(lr_at(e, flat), 0.01);
}

TEST(TrainConfigJson, RejectsUnknownAndInvalid) {
    EXPECT_CODE(train_config_from_json({{"lr", 0.1}}), Config);
    EXPECT_CODE(train_config_from_json({{"batch_size", 0}}), Config);
    EXPECT_CODE(train_config_from_json({{"label_smoothing", 1.5}}), Config);
    const auto c = train_config_from_json({{"epochs", 15}, {"lr0", 0.01}});
    EXPECT_EQ(c.epochs, 15);
    EXPECT_EQ(c.momentum, 0.9);
    EXPECT_EQ(train_config_from_json(to_json(c)).lr0, 0.01);
}

TEST(Train, ZeroEpochsReturnsInitialization) {
    const auto m = small_synthetic(1);
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 5;
    const auto r = train(m, tiny_config(), cfg);
    EXPECT_TRUE(r.metrics.empty());
    Model<float> init(tiny_config());
    init.initialize(stream_seed(5, nn::detail::tag("init")));
    EXPECT_EQ(r.final_checkpoint.params, snapshot(init, m.band_stats).params);
    EXPECT_EQ(r.best_checkpoint, r.final_checkpoint);
}

TEST(Train, BitwiseReproducible) {
    const auto m = small_synthetic(2);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.lr0 = 0.01;
    cfg.seed = 3;
    const auto a = train(m, tiny_config(), cfg);
    const auto b = train(m, tiny_config(), cfg);
    ASSERT_EQ(a.metrics.size(), 2u);
    EXPECT_EQ(metrics_csv(a.metrics), metrics_csv(b.metrics));
    EXPECT_EQ(encode_checkpoint(a.final_checkpoint), encode_checkpoint(b.final_checkpoint));
    EXPECT_EQ(encode_checkpoint(a.best_checkpoint), encode_checkpoint(b.best_checkpoint));
    EXPECT_FALSE(a.final_checkpoint.momentum.empty());
    EXPECT_EQ(metrics_csv(a.metrics).substr(0, kMetricsHeader.size()), kMetricsHeader);
}

TEST(Train, NeedsTrainAndValSplits) {
    auto m = small_synthetic(3);
    for (auto& s : m.splits)
        if (s == Split::Val) s = Split::Test;
    TrainConfig cfg;
    cfg.epochs = 1;
    EXPECT_CODE(train(m, tiny_config(), cfg), InsufficientSamples);
}

TEST(Train, DivergenceReportsBatch) {
    const auto m = small_synthetic(4);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 10;
    cfg.lr0 = 1e30;
    try {
        train(m, tiny_config(), cfg);
        FAIL() << "expected divergence";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DivergedLoss);
        EXPECT_NE(std::string(e.what()).find("batch"), std::string::npos);
    }
}

TEST(Evaluate, ScoreExamples) {
    const std::vector<int> labels{0, 1, 2, 3, 4, 4};
    const auto perfect = score(labels, labels);
    EXPECT_EQ(perfect.accuracy, 1.0);
    for (int t = 0; t < 5; ++t)
        for (int p = 0; p < 5; ++p) {
            if (t != p) {
                EXPECT_EQ(perfect.confusion[t][p], 0u);
            }
        }
    std::vector<int> pred = labels;
    pred[2] = 0;
    const auto one_off = score(labels, pred);
    EXPECT_EQ(one_off.accuracy, 5.0 / 6.0);
    EXPECT_EQ(one_off.confusion[2][0], 1u);
    std::size_t off = 0;
    for (int t = 0; t < 5; ++t)
        for (int p = 0; p < 5; ++p) off += t != p ? one_off.confusion[t][p] : 0;
    EXPECT_EQ(off, 1u);
    EXPECT_CODE(score({}, {}), EmptySampleSet);
}

TEST(Evaluate, CheckpointOnManifestIsDeterministic) {
    const auto m = small_synthetic(5);
    auto model = warmed_model(tiny_config(), 6);
    const auto ck = snapshot(model, m.band_stats);
    const auto a = evaluate(ck, m, Split::Test, 7);
    const auto b = evaluate(ck, m, Split::Test, 256);
    EXPECT_EQ(a.accuracy, b.accuracy);
    EXPECT_EQ(a.confusion, b.confusion);
    EXPECT_EQ(a.total, 20u);
    EXPECT_CODE(evaluate(ck, std::span<const Sample* const>{}), EmptySampleSet);
}

TEST(Checkpoint, RoundTripPreservesOutputsBitwise) {
    TempDir dir;
    auto model = warmed_model(tiny_config(Stem::ImageNet), 13);
    const BandStats stats{{1, 2, 3, 4}, {5, 6, 7, 8}};
    const auto ck = snapshot(model, stats, 0.6, 4, 99);
    save_checkpoint(ck, dir / "m.ckpt");
    const auto loaded = load_checkpoint(dir / "m.ckpt");
    EXPECT_EQ(loaded, ck);
    auto restored = model_from_checkpoint(loaded);
    Rng rng(14);
    const auto x = random_input(rng, 4);
    EXPECT_EQ(restored.forward(x, Mode::Eval), model.forward(x, Mode::Eval));
    EXPECT_EQ(encode_checkpoint(loaded), encode_checkpoint(ck));
}

TEST(Checkpoint, EditedDescriptorIsArchMismatch) {
    auto model = warmed_model(ModelConfig::preset("compact"), 15);
    auto bytes = encode_checkpoint(snapshot(model, BandStats{}));
    const auto pos = bytes.find("[1,1,1,1]");
    ASSERT_NE(pos, std::string::npos);
    bytes.replace(pos, 9, "[3,4,6,3]");
    EXPECT_CODE(decode_checkpoint(bytes), ArchMismatch);
    TempDir dir;
    save_checkpoint(snapshot(model, BandStats{}), dir / "c.ckpt");
    EXPECT_CODE(load_checkpoint(dir / "c.ckpt", ModelConfig::preset("r34")), ArchMismatch);
    Model<float> r34(ModelConfig::preset("r34"));
    EXPECT_CODE(restore(r34, snapshot(model, BandStats{})), ArchMismatch);
}

TEST(Checkpoint, TruncatedFileRejected) {
    auto model = warmed_model(tiny_config(), 16);
    const auto bytes = encode_checkpoint(snapshot(model, BandStats{}));
    EXPECT_CODE(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), HeaderMismatch);
    EXPECT_CODE(decode_checkpoint(bytes.substr(0, 6)), HeaderMismatch);
    EXPECT_CODE(decode_checkpoint(bytes.substr(0, 3)), BadMagic);
    EXPECT_CODE(decode_checkpoint("CNN0" + bytes.substr(4)), BadMagic);
}
