#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sdfscore/eval.hpp"
#include "sdfscore/io.hpp"
#include "sdfscore/run_config.hpp"
#include "sdfscore/sampler.hpp"
#include "sdfscore/score_model.hpp"
#include "sdfscore/sdf.hpp"
#include "sdfscore/training.hpp"

namespace fs = std::filesystem;
using namespace sdfscore;

namespace {

// exit codes: 1 usage, 2 config, 3 io, 4 numeric, 5 internal
constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitInternal = 5;

struct GlobalOpts {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::string out = "out";
    bool force = false;
};

RunConfig load_config(const GlobalOpts& g) {
    RunConfig cfg = g.config_path.empty() ? RunConfig{} : RunConfig::load(g.config_path);
    if (g.seed) cfg.seed = *g.seed;
    return cfg;
}

void prepare_out_dir(const fs::path& dir, bool force) {
    if (fs::exists(dir) && !fs::is_directory(dir)) throw io_error("not a directory: " + dir.string());
    if (fs::is_directory(dir) && !fs::is_empty(dir) && !force)
        throw io_error("output directory not empty (use --force): " + dir.string());
    fs::create_directories(dir);
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

ScoreFn make_score_fn(const ScoreModel& model, const FloatScoreNet* fnet) {
    if (fnet) return [fnet](const Field& m, const Field& x, double s) { return fnet->apply(m, x, s); };
    return [&model](const Field& m, const Field& x, double s) { return model.apply(m, x, s); };
}

int cmd_gen(const GlobalOpts& g, std::optional<int> n_flag, std::optional<int> grid_flag) {
    RunConfig cfg = load_config(g);
    if (n_flag) cfg.n_samples = *n_flag;
    if (grid_flag) cfg.grid = *grid_flag;
    cfg.validate();

    prepare_out_dir(g.out, g.force);
    const double delta = cfg.resolved_delta(cfg.grid, cfg.grid);
    SdfConfig sdf_cfg{delta, cfg.threshold_tau};
    auto samples = generate_synthetic(cfg.n_samples, cfg.grid, cfg.shape_params(), sdf_cfg, Rng(cfg.seed));
    save_dataset(g.out, samples, cfg.grid, delta, cfg.seed, cfg.serialize());
    std::cout << "wrote " << samples.size() << " samples to " << g.out << "\n";
    return 0;
}

int cmd_encode(const GlobalOpts& g, const std::string& mask_path, std::optional<double> delta_flag) {
    RunConfig cfg = load_config(g);
    if (delta_flag) cfg.delta = *delta_flag;
    BinaryMask mask = load_mask_pgm(mask_path);
    const double delta = cfg.resolved_delta(mask.width, mask.height);
    Field sdf = encode_sdf(mask, SdfConfig{delta, cfg.threshold_tau});
    fs::create_directories(g.out);
    fs::path out = fs::path(g.out) / (fs::path(mask_path).stem().string() + ".sdf.bin");
    save_sdf(out, sdf, delta);
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

int cmd_decode(const GlobalOpts& g, const std::string& sdf_path, std::optional<double> tau_flag) {
    RunConfig cfg = load_config(g);
    const double tau = tau_flag ? *tau_flag : cfg.threshold_tau;
    auto [sdf, delta] = load_sdf(sdf_path);
    (void)delta;
    BinaryMask mask = decode_mask(sdf, tau);
    fs::create_directories(g.out);
    fs::path out = fs::path(g.out) / (fs::path(sdf_path).stem().stem().string() + ".mask.pgm");
    save_mask_pgm(out, mask);
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

int cmd_corrupt(const GlobalOpts& g, const std::string& mask_path, std::vector<double> t_list) {
    RunConfig cfg = load_config(g);
    if (t_list.empty()) t_list = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (double t : t_list)
        if (!(t >= 0.0 && t <= 1.0)) throw config_error("corrupt: t values must lie in [0,1]");

    BinaryMask mask = load_mask_pgm(mask_path);
    const double delta = cfg.resolved_delta(mask.width, mask.height);
    Field sdf = encode_sdf(mask, SdfConfig{delta, cfg.threshold_tau});
    Field binary = remap_binary(mask);
    SigmaSchedule sched = cfg.schedule();

    prepare_out_dir(g.out, g.force);
    Rng master(cfg.seed);
    nlohmann::json man;
    man["cmd"] = "corrupt";
    man["seed"] = cfg.seed;
    man["t"] = t_list;
    man["delta"] = delta;
    append_manifest_line(fs::path(g.out) / "manifest.jsonl", man.dump());

    for (size_t i = 0; i < t_list.size(); i++) {
        const double t = t_list[i];
        const double sigma = sched.sigma_at(t);
        struct ModeRef {
            const char* name;
            const Field* m0;
        } modes[2] = {{"sdf", &sdf}, {"binary", &binary}};
        for (const auto& mode : modes) {
            Rng r = master.split(i * 2 + (mode.m0 == &binary ? 1 : 0));
            Field z = r.normal_field(mask.width, mask.height);
            Field mt = perturb(*mode.m0, sigma, z);
            BinaryMask thresholded = decode_mask(mt, cfg.threshold_tau);
            char base[64];
            std::snprintf(base, sizeof(base), "%s_t%02zu", mode.name, i);
            save_sdf(fs::path(g.out) / (std::string(base) + ".sdf.bin"), mt, delta);
            save_mask_pgm(fs::path(g.out) / (std::string(base) + ".mask.pgm"), thresholded);
        }
    }
    std::cout << "wrote corrupted fields for " << t_list.size() << " time points to " << g.out << "\n";
    return 0;
}

int cmd_train(const GlobalOpts& g, const std::string& dataset_dir, std::optional<int> steps_flag,
              std::optional<std::string> mode_flag) {
    RunConfig cfg = load_config(g);
    if (steps_flag) cfg.total_steps = *steps_flag;
    if (mode_flag) cfg.target_mode = *mode_flag;
    cfg.validate();

    auto dataset = load_dataset(dataset_dir);
    if (dataset.empty()) throw io_error("train: dataset is empty: " + dataset_dir);
    const int gw = dataset[0].mask.width, gh = dataset[0].mask.height;
    TrainConfig tc = cfg.train_config(gw, gh);

    prepare_out_dir(g.out, g.force);
    const fs::path ckpt_path = fs::path(g.out) / "checkpoint.scm";
    const fs::path loss_path = fs::path(g.out) / "loss.csv";

    ScoreModelArch arch;
    arch.base_channels = cfg.base_channels;
    arch.sigma_min = cfg.sigma_min;
    arch.sigma_max = cfg.sigma_max;
    Rng init_rng = Rng(cfg.seed).split(UINT64_MAX);
    ScoreModel model = ScoreModel::create(arch, init_rng);

    auto t0 = std::chrono::steady_clock::now();
    TrainResult result = train(dataset, tc, model, [&](int step, double loss) {
        if ((step + 1) % cfg.checkpoint_every == 0) {
            save_checkpoint(ckpt_path, model, nullptr);
            std::cout << "step " << (step + 1) << "/" << tc.total_steps << " loss " << loss << "\n";
        }
    });
    save_checkpoint(ckpt_path, model, &result.adam);
    save_loss_csv(loss_path, result.loss_trace);

    nlohmann::json man;
    man["cmd"] = "train";
    man["seed"] = cfg.seed;
    man["config_hash"] = fnv1a_hash(cfg.serialize());
    man["target_mode"] = cfg.target_mode;
    man["steps"] = tc.total_steps;
    man["final_loss"] = result.loss_trace.back();
    man["elapsed_ms"] = elapsed_ms(t0);
    append_manifest_line(fs::path(g.out) / "manifest.jsonl", man.dump());

    std::cout << "trained " << tc.total_steps << " steps, final loss " << result.loss_trace.back()
              << ", checkpoint " << ckpt_path.string() << "\n";
    return 0;
}

int cmd_sample(const GlobalOpts& g, const std::string& ckpt_path, const std::string& dataset_dir,
               std::optional<int> runs_flag, std::optional<int> limit_flag) {
    RunConfig cfg = load_config(g);
    if (runs_flag) cfg.ensemble_runs = *runs_flag;
    cfg.validate();

    auto [model, adam] = load_checkpoint(ckpt_path);
    (void)adam;
    auto dataset = load_dataset(dataset_dir);
    if (dataset.empty()) throw io_error("sample: dataset is empty: " + dataset_dir);
    int limit = limit_flag ? *limit_flag : int(dataset.size());
    limit = std::min<int>(limit, int(dataset.size()));

    SigmaSchedule sched{model.arch().sigma_min, model.arch().sigma_max};
    SamplerConfig scfg = cfg.sampler_config();
    std::optional<FloatScoreNet> fnet;
    if (cfg.score_precision == "f32") fnet.emplace(model);
    ScoreFn score_fn = make_score_fn(model, fnet ? &*fnet : nullptr);

    prepare_out_dir(g.out, g.force);
    nlohmann::json head;
    head["cmd"] = "sample";
    head["seed"] = cfg.seed;
    head["config_hash"] = fnv1a_hash(cfg.serialize());
    head["checkpoint"] = ckpt_path;
    head["precision"] = cfg.score_precision;
    append_manifest_line(fs::path(g.out) / "manifest.jsonl", head.dump());

    Rng master(cfg.seed);
    const double delta = load_sdf(fs::path(dataset_dir) / (sample_basename(0) + ".sdf.bin")).second;
    for (int i = 0; i < limit; i++) {
        auto t0 = std::chrono::steady_clock::now();
        SampleEnsemble ens = ensemble_sample(score_fn, dataset[i].image, sched, scfg, master.split(i));
        const fs::path dir = fs::path(g.out) / sample_basename(i);
        fs::create_directories(dir);
        for (int j = 0; j < int(ens.samples.size()); j++) {
            char name[32];
            std::snprintf(name, sizeof(name), "run_%03d.sdf.bin", j);
            save_sdf(dir / name, ens.samples[j], delta);
        }
        save_sdf(dir / "mean.sdf.bin", ens.mean, delta);
        save_sdf(dir / "std.sdf.bin", ens.stddev, delta);
        save_mask_pgm(dir / "mmse.pgm", ens.mmse_mask);

        nlohmann::json man;
        man["image"] = sample_basename(i);
        man["runs"] = scfg.ensemble_runs;
        man["predictor_steps"] = scfg.predictor_levels;
        man["corrector_steps"] = scfg.corrector_steps;
        man["corrector_snr"] = scfg.corrector_snr;
        man["threshold_tau"] = scfg.threshold_tau;
        man["zero_score_events"] = ens.zero_score_events;
        man["elapsed_ms"] = elapsed_ms(t0);
        append_manifest_line(fs::path(g.out) / "manifest.jsonl", man.dump());
        std::cout << "sampled " << sample_basename(i) << " (" << scfg.ensemble_runs << " runs)\n";
    }
    return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& pred_dir, const std::string& gt_dir,
             std::optional<int> band_flag) {
    RunConfig cfg = load_config(g);
    if (band_flag) cfg.band = *band_flag;
    cfg.validate();

    std::vector<MetricRow> rows;
    std::vector<MetricRow> single_rows;
    double band_in_sum = 0.0, band_out_sum = 0.0;
    int band_images = 0, band_ordered = 0;
    double rankcorr_sum = 0.0;
    int rankcorr_images = 0;

    for (int i = 0;; i++) {
        const std::string base = sample_basename(i);
        const fs::path gt_mask_p = fs::path(gt_dir) / (base + ".mask.pgm");
        if (!fs::exists(gt_mask_p)) break;
        BinaryMask gt = load_mask_pgm(gt_mask_p);

        fs::path pred_tree = fs::path(pred_dir) / base;
        fs::path pred_mask_p = fs::exists(pred_tree / "mmse.pgm") ? pred_tree / "mmse.pgm"
                                                                  : fs::path(pred_dir) / (base + ".mask.pgm");
        if (!fs::exists(pred_mask_p)) throw io_error("missing prediction for " + base);
        BinaryMask pred = load_mask_pgm(pred_mask_p);
        MetricEntry e = f1_iou(pred, gt);
        rows.push_back({base, e.f1, e.iou});

        const fs::path run0 = pred_tree / "run_000.sdf.bin";
        if (fs::exists(run0)) {
            BinaryMask single = decode_mask(load_sdf(run0).first, cfg.threshold_tau);
            MetricEntry se = f1_iou(single, gt);
            single_rows.push_back({base, se.f1, se.iou});
        }

        const fs::path mean_p = pred_tree / "mean.sdf.bin";
        const fs::path std_p = pred_tree / "std.sdf.bin";
        const fs::path gt_sdf_p = fs::path(gt_dir) / (base + ".sdf.bin");
        if (fs::exists(mean_p) && fs::exists(std_p) && fs::exists(gt_sdf_p)) {
            SampleEnsemble ens;
            ens.mean = load_sdf(mean_p).first;
            ens.stddev = load_sdf(std_p).first;
            ens.mmse_mask = pred;
            auto [gt_sdf, gt_delta] = load_sdf(gt_sdf_p);
            UncertaintyReport rep = uncertainty_maps(ens, gt, gt_sdf, cfg.band);
            band_in_sum += rep.boundary_band_mean_std;
            band_out_sum += rep.far_mean_std;
            band_images++;
            if (rep.boundary_band_mean_std > rep.far_mean_std) band_ordered++;
            rankcorr_sum += rank_correlation(rep.std_field, rep.error_field);
            rankcorr_images++;

            const fs::path analysis = fs::path(g.out) / "analysis";
            fs::create_directories(analysis);
            save_sdf(analysis / (base + ".error.sdf.bin"), rep.error_field, gt_delta);
            save_sdf(analysis / (base + ".std.sdf.bin"), rep.std_field, gt_delta);
            save_mask_pgm(analysis / (base + ".xor.pgm"), rep.xor_field);
        }
    }
    if (rows.empty()) throw io_error("eval: no ground-truth masks found in " + gt_dir);

    fs::create_directories(g.out);
    save_metrics_csv(fs::path(g.out) / "metrics.csv", rows);

    std::vector<MetricEntry> entries;
    for (const MetricRow& r : rows) entries.push_back({r.f1, r.iou});
    MetricReport report = metric_report(entries);

    nlohmann::json j;
    j["aggregation"] = "per_image_then_averaged";
    j["n_images"] = rows.size();
    j["mean_f1"] = report.mean_f1;
    j["mean_iou"] = report.mean_iou;
    if (!single_rows.empty()) {
        double sf = 0.0, si = 0.0;
        for (const MetricRow& r : single_rows) {
            sf += r.f1;
            si += r.iou;
        }
        j["single_sample_mean_f1"] = sf / single_rows.size();
        j["single_sample_mean_iou"] = si / single_rows.size();
    }
    if (band_images > 0) {
        j["band"] = cfg.band;
        j["boundary_band_mean_std"] = band_in_sum / band_images;
        j["far_mean_std"] = band_out_sum / band_images;
        j["band_ordered_fraction"] = double(band_ordered) / band_images;
        j["mean_rank_correlation"] = rankcorr_sum / rankcorr_images;
    }
    std::ofstream rf(fs::path(g.out) / "report.json");
    rf << j.dump(2) << "\n";

    std::cout << "mean F1 " << report.mean_f1 << " mean IoU " << report.mean_iou << " over "
              << rows.size() << " images\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"conditional score-based generative segmentation over SDF masks"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOpts g;
    app.add_option("--config", g.config_path, "run config file (key = value lines)");
    std::optional<uint64_t> seed_flag;
    app.add_option("--seed", seed_flag, "master seed (overrides config)");
    app.add_option("--out", g.out, "output directory");
    app.add_flag("--force", g.force, "allow writing into a non-empty output directory");

    auto* gen = app.add_subcommand("gen", "generate a synthetic paired dataset");
    std::optional<int> gen_n, gen_grid;
    gen->add_option("--n", gen_n, "number of samples");
    gen->add_option("--grid", gen_grid, "grid size (even, 16..128)");

    auto* encode = app.add_subcommand("encode", "binary mask PGM -> truncated normalized SDF raster");
    std::string encode_mask;
    std::optional<double> encode_delta;
    encode->add_option("--mask", encode_mask, "input mask PGM")->required();
    encode->add_option("--delta", encode_delta, "truncation distance in pixels");

    auto* decode = app.add_subcommand("decode", "SDF raster -> binary mask PGM");
    std::string decode_sdf;
    std::optional<double> decode_tau;
    decode->add_option("--sdf", decode_sdf, "input SDF raster")->required();
    decode->add_option("--tau", decode_tau, "decode threshold");

    auto* corrupt = app.add_subcommand("corrupt", "forward-corruption snapshots in sdf and binary modes");
    std::string corrupt_mask;
    std::vector<double> corrupt_t;
    corrupt->add_option("--mask", corrupt_mask, "input mask PGM")->required();
    corrupt->add_option("--t", corrupt_t, "time points in [0,1]")->delimiter(',');

    auto* train_cmd = app.add_subcommand("train", "denoising score matching training");
    std::string train_dataset;
    std::optional<int> train_steps;
    std::optional<std::string> train_mode;
    train_cmd->add_option("--dataset", train_dataset, "dataset directory")->required();
    train_cmd->add_option("--steps", train_steps, "total optimization steps");
    train_cmd->add_option("--mode", train_mode, "target mode: sdf or binary");

    auto* sample_cmd = app.add_subcommand("sample", "predictor-corrector ensemble sampling");
    std::string sample_ckpt, sample_dataset;
    std::optional<int> sample_runs, sample_limit;
    sample_cmd->add_option("--checkpoint", sample_ckpt, "model checkpoint")->required();
    sample_cmd->add_option("--dataset", sample_dataset, "dataset directory with conditioning images")->required();
    sample_cmd->add_option("--runs", sample_runs, "ensemble size R");
    sample_cmd->add_option("--limit", sample_limit, "only sample the first N images");

    auto* eval_cmd = app.add_subcommand("eval", "F1/IoU metrics and uncertainty statistics");
    std::string eval_pred, eval_gt;
    std::optional<int> eval_band;
    eval_cmd->add_option("--pred", eval_pred, "predictions (sample output tree or mask directory)")->required();
    eval_cmd->add_option("--gt", eval_gt, "ground-truth dataset directory")->required();
    eval_cmd->add_option("--band", eval_band, "boundary band width in pixels");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }
    g.seed = seed_flag;

    try {
        if (gen->parsed()) return cmd_gen(g, gen_n, gen_grid);
        if (encode->parsed()) return cmd_encode(g, encode_mask, encode_delta);
        if (decode->parsed()) return cmd_decode(g, decode_sdf, decode_tau);
        if (corrupt->parsed()) return cmd_corrupt(g, corrupt_mask, corrupt_t);
        if (train_cmd->parsed()) return cmd_train(g, train_dataset, train_steps, train_mode);
        if (sample_cmd->parsed()) return cmd_sample(g, sample_ckpt, sample_dataset, sample_runs, sample_limit);
        if (eval_cmd->parsed()) return cmd_eval(g, eval_pred, eval_gt, eval_band);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}
