// landcover: command-line driver for the curation / training / mapping
// pipeline. Exit codes: 0 success, 1 domain error, 2 usage or config error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "landcover/analysis.hpp"
#include "landcover/check/gradcheck.hpp"
#include "landcover/dataset.hpp"
#include "landcover/inference.hpp"
#include "landcover/nn/train.hpp"
#include "landcover/run_config.hpp"
#include "landcover/synth.hpp"

namespace fs = std::filesystem;
using namespace landcover;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <class T>
const T& need(const std::optional<T>& v, const char* key) {
    if (!v) fail(ErrorCode::Config, std::string("run config is missing ") + key);
    return *v;
}

void print_counts(const Manifest& m) {
    const auto counts = m.class_counts();
    std::printf("%-16s %10s\n", "Class", "Samples");
    for (int k = 0; k < kNumClasses; ++k) std::printf("%-16s %10zu\n", kClassNames[k].data(), counts[k]);
    std::printf("%-16s %10zu\n", "Total", m.samples.size());
    std::printf("train %zu  val %zu  test %zu\n", m.count(Split::Train), m.count(Split::Val), m.count(Split::Test));
}

// ---------------------------------------------------------------------------

int cmd_curate(const RunConfig& rc) {
    const auto& out = need(rc.io.manifest, "io.manifest");
    const auto& labels = need(rc.io.labels, "io.labels");
    if (rc.io.rasters.empty()) fail(ErrorCode::Config, "run config lists no io.rasters");
    std::vector<fs::path> inputs{labels};
    for (const auto& r : rc.io.rasters) inputs.push_back(r.path);
    validate_paths(inputs, {out});

    std::vector<NamedRaster> rasters;
    for (const auto& r : rc.io.rasters) {
        auto raster = read_r4b(r.path);
        const double t = rc.curation.target_pixel_size;
        if (raster.geo().pixel_size_x != t || raster.geo().pixel_size_y != t) {
            std::cerr << "resampling " << r.id << " to " << t << " units per pixel\n";
            raster = resample(raster, t);
        }
        rasters.push_back({r.id, std::move(raster)});
    }
    const auto polys = read_label_polygons(labels);
    const auto rep = curate(rasters, polys, rc.curation);
    std::cerr << "candidate tiles " << rep.candidate_tiles << ", conflicts " << rep.conflicts << ", ndvi rejected "
              << rep.ndvi_rejected << ", nodata rejected " << rep.nodata_rejected << ", polygons below density "
              << rep.density_rejected << '\n';
    write_manifest(rep.manifest, out, rc.io.tile_file);
    print_counts(rep.manifest);
    return 0;
}

int cmd_split(const RunConfig& rc) {
    const auto& in = need(rc.io.manifest, "io.manifest");
    const auto& out = need(rc.io.split_manifest, "io.split_manifest");
    validate_paths({in}, {out});
    const auto m = split(read_manifest(in), rc.split.seed, rc.split.n_val, rc.split.n_test);
    write_manifest(m, out, rc.io.tile_file);
    print_counts(m);
    return 0;
}

int cmd_train(const RunConfig& rc) {
    const auto in = need(rc.io.training_manifest(), "io.manifest or io.split_manifest");
    const auto& ckpt = need(rc.io.checkpoint, "io.checkpoint");
    std::vector<fs::path> outputs{ckpt};
    if (rc.io.metrics) outputs.push_back(*rc.io.metrics);
    if (rc.io.best_checkpoint) outputs.push_back(*rc.io.best_checkpoint);
    validate_paths({in}, outputs);

    const auto m = read_manifest(in);
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = nn::train(m, rc.model, rc.train, [&](const nn::EpochMetrics& e) {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::fprintf(stderr, "epoch %3d  lr %.4g  train loss %.4f acc %.4f  val loss %.4f acc %.4f  (%.0fs)\n", e.epoch,
                     e.lr, e.train_loss, e.train_acc, e.val_loss, e.val_acc, s);
    }, rc.curation.target_pixel_size);
    nn::save_checkpoint(res.final_checkpoint, ckpt);
    if (rc.io.best_checkpoint) nn::save_checkpoint(res.best_checkpoint, *rc.io.best_checkpoint);
    if (rc.io.metrics) detail::write_file(*rc.io.metrics, nn::metrics_csv(res.metrics));
    if (res.best_epoch >= 0) std::cerr << "best val accuracy at epoch " << res.best_epoch << '\n';
    return 0;
}

int cmd_eval(const fs::path& ckpt_path, const fs::path& manifest_path, const std::string& split_name,
             const std::optional<fs::path>& out) {
    validate_paths({ckpt_path, manifest_path}, out ? std::vector<fs::path>{*out} : std::vector<fs::path>{});
    const auto ck = nn::load_checkpoint(ckpt_path);
    const auto m = read_manifest(manifest_path);
    const auto r = nn::evaluate(ck, m, split_from_string(split_name));
    std::printf("accuracy %.6f over %zu samples\n", r.accuracy, r.total);
    std::printf("%-16s", "true\\pred");
    for (int k = 0; k < kNumClasses; ++k) std::printf(" %8.8s", kClassNames[k].data());
    std::printf("\n");
    for (int t = 0; t < kNumClasses; ++t) {
        std::printf("%-16s", kClassNames[t].data());
        for (int p = 0; p < kNumClasses; ++p) std::printf(" %8zu", r.confusion[t][p]);
        std::printf("\n");
    }
    if (out) {
        nlohmann::json j = {{"split", split_name}, {"accuracy", r.accuracy}, {"total", r.total},
                            {"class_names", kClassNames}, {"confusion", r.confusion}};
        detail::write_file(*out, j.dump(2) + "\n");
    }
    return 0;
}

int cmd_classify(const fs::path& ckpt_path, const fs::path& raster_path, const fs::path& out, bool filter,
                 const std::optional<std::string>& year, std::size_t batch, bool strict) {
    validate_paths({ckpt_path, raster_path}, {out});
    const auto ck = nn::load_checkpoint(ckpt_path);
    ClassifyOptions opt;
    opt.batch_size = batch;
    opt.strict_resolution = strict;
    opt.warn = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
    auto map = classify_raster(read_r4b(raster_path), ck, opt);
    if (filter) map = majority_filter(map);
    map.year_tag = year;
    write_class_map(map, out);
    return 0;
}

int cmd_filter(const fs::path& in, const fs::path& out) {
    validate_paths({in}, {out});
    write_class_map(majority_filter(read_class_map(in)), out);
    return 0;
}

int cmd_render(const fs::path& in, const fs::path& out) {
    validate_paths({in}, {out});
    write_ppm(read_class_map(in), out);
    return 0;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

int cmd_report(const std::string& maps_arg, const std::optional<fs::path>& mask_path, const fs::path& out_dir,
               const std::optional<std::string>& years_arg) {
    const auto names = split_list(maps_arg);
    std::vector<fs::path> inputs(names.begin(), names.end());
    if (mask_path) inputs.push_back(*mask_path);
    validate_paths(inputs, {out_dir / "report.csv"});
    std::vector<ClassMap> maps;
    for (const auto& n : names) maps.push_back(read_class_map(n));
    if (years_arg) {
        const auto years = split_list(*years_arg);
        if (years.size() != maps.size()) throw UsageError("--years needs one tag per map");
        for (std::size_t i = 0; i < maps.size(); ++i) maps[i].year_tag = years[i];
    }
    std::optional<std::vector<Polygon>> mask;
    if (mask_path) mask = read_polygons(*mask_path);
    const auto rep = change_report(maps, mask ? &*mask : nullptr,
                                   mask_path ? std::optional(mask_path->filename().string()) : std::nullopt);
    detail::write_file(out_dir / "report.csv", report_csv(rep));
    detail::write_file(out_dir / "report.svg", render_bars(rep));
    for (const auto& m : maps) write_ppm(m, out_dir / (*m.year_tag + ".ppm"));
    std::cout << report_csv(rep);
    return 0;
}

/// Synthetic acceptance data: balanced signature tiles with fixed splits, a
/// 320x320 scene, its ground-truth layout and a matching run config.
int cmd_synth(const fs::path& out, std::uint64_t seed) {
    validate_paths({}, {out / "manifest.jsonl"});
    const auto m = synth::make_dataset(seed);
    write_manifest(m, out / "manifest.jsonl", "tiles.bin");
    write_r4b(synth::make_scene(seed), out / "scene.r4b");
    auto layout = synth::scene_layout();
    write_class_map(layout, out / "scene_layout.cmap");

    nn::TrainConfig tc;
    tc.batch_size = 128;
    tc.epochs = 15;
    tc.lr0 = 0.01;
    tc.seed = seed;
    nlohmann::json run = {{"curation", {{"target_pixel_size", synth::kSceneTileSize}}},
                          {"model", {{"preset", "compact"}}},
                          {"train", nn::to_json(tc)},
                          {"io",
                           {{"manifest", "manifest.jsonl"},
                            {"checkpoint", "model.ckpt"},
                            {"best_checkpoint", "model.best.ckpt"},
                            {"metrics", "metrics.csv"}}}};
    detail::write_file(out / "run.json", run.dump(2) + "\n");
    print_counts(m);
    return 0;
}

int cmd_selftest(std::uint64_t seed, int instances, int conv_cases) {
    bool ok = true;
    for (const auto& g : check::run_gradient_checks(seed, instances)) {
        const bool pass = g.worst < 1e-6;
        ok = ok && pass;
        std::printf("%-4s gradient %-15s %3d cases, worst relative error %.3g\n", pass ? "PASS" : "FAIL",
                    g.layer.c_str(), g.instances, g.worst);
    }
    Rng rng(stream_seed(seed, 0x434f4e56));
    int match = 0;
    for (int i = 0; i < conv_cases; ++i) match += check::conv_matches_oracle(check::random_conv_case(rng), rng);
    const bool conv_ok = match == conv_cases;
    ok = ok && conv_ok;
    std::printf("%-4s conv oracle %d/%d exact\n", conv_ok ? "PASS" : "FAIL", match, conv_cases);
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Land-cover tile curation, CNN training, mapping and change reports"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Expand all help");

    std::string config;
    std::vector<std::string> overrides;
    auto with_config = [&](CLI::App* sub) {
        sub->add_option("--config", config, "Run configuration JSON")->required();
        sub->add_option("--set", overrides, "Override a config key, e.g. train.epochs=5")->take_all();
    };
    auto* curate_cmd = app.add_subcommand("curate", "Cut labeled tiles from rasters into a manifest");
    with_config(curate_cmd);
    auto* split_cmd = app.add_subcommand("split", "Stratified train/val/test split of a manifest");
    with_config(split_cmd);
    auto* train_cmd = app.add_subcommand("train", "Train a classifier; writes checkpoint and metrics CSV");
    with_config(train_cmd);

    std::string ckpt, manifest, split_name = "test", raster, in, out, maps, years_arg, mask, year;
    std::size_t batch = 64;
    bool do_filter = false, strict = false;
    std::uint64_t seed = 0;
    int instances = 20, conv_cases = 100;

    auto* eval_cmd = app.add_subcommand("eval", "Accuracy and confusion matrix on a manifest split");
    eval_cmd->add_option("--checkpoint", ckpt)->required();
    eval_cmd->add_option("--manifest", manifest)->required();
    eval_cmd->add_option("--split", split_name)->check(CLI::IsMember({"train", "val", "test"}));
    eval_cmd->add_option("--out", out, "Write the result as JSON");

    auto* classify_cmd = app.add_subcommand("classify", "Classify a whole raster into a class map");
    classify_cmd->add_option("--checkpoint", ckpt)->required();
    classify_cmd->add_option("--raster", raster)->required();
    classify_cmd->add_option("--out", out)->required();
    classify_cmd->add_flag("--filter", do_filter, "Apply the 3x3 majority filter");
    classify_cmd->add_option("--year", year, "Year tag stored in the map");
    classify_cmd->add_option("--batch-size", batch)->check(CLI::PositiveNumber);
    classify_cmd->add_flag("--strict-resolution", strict, "Fail when the raster resolution differs from training");

    auto* filter_cmd = app.add_subcommand("filter", "3x3 majority filter on a class map");
    filter_cmd->add_option("--in", in)->required();
    filter_cmd->add_option("--out", out)->required();

    auto* render_cmd = app.add_subcommand("render", "Render a class map as a PPM image");
    render_cmd->add_option("--in", in)->required();
    render_cmd->add_option("--out", out)->required();

    auto* report_cmd = app.add_subcommand("report", "Per-year class distributions, CSV + SVG + PPM");
    report_cmd->add_option("--maps", maps, "Comma-separated class maps in year order")->required();
    report_cmd->add_option("--mask", mask, "GeoJSON polygons restricting the counted cells");
    report_cmd->add_option("--years", years_arg, "Comma-separated year tags overriding the maps' own");
    report_cmd->add_option("--out", out, "Output directory")->required();

    auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic acceptance dataset");
    synth_cmd->add_option("--out", out, "Output directory")->required();
    synth_cmd->add_option("--seed", seed);

    auto* selftest_cmd = app.add_subcommand("selftest", "Gradient and convolution oracle checks");
    selftest_cmd->add_option("--seed", seed);
    selftest_cmd->add_option("--instances", instances)->check(CLI::PositiveNumber);
    selftest_cmd->add_option("--conv-cases", conv_cases)->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    auto opt_path = [](const std::string& s) { return s.empty() ? std::optional<fs::path>{} : std::optional(fs::path(s)); };
    try {
        if (*curate_cmd) return cmd_curate(load_run_config(config, overrides));
        if (*split_cmd) return cmd_split(load_run_config(config, overrides));
        if (*train_cmd) return cmd_train(load_run_config(config, overrides));
        if (*eval_cmd) return cmd_eval(ckpt, manifest, split_name, opt_path(out));
        if (*classify_cmd)
            return cmd_classify(ckpt, raster, out, do_filter, year.empty() ? std::nullopt : std::optional(year), batch,
                                strict);
        if (*filter_cmd) return cmd_filter(in, out);
        if (*render_cmd) return cmd_render(in, out);
        if (*report_cmd)
            return cmd_report(maps, opt_path(mask), out, years_arg.empty() ? std::nullopt : std::optional(years_arg));
        if (*synth_cmd) return cmd_synth(out, seed);
        if (*selftest_cmd) return cmd_selftest(seed, instances, conv_cases);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        return e.code() == ErrorCode::Config ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
