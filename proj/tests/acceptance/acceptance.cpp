// Acceptance suite: every check prints one pass/fail line and the binary
// exits nonzero if any line failed. Groups: sdf, grad, sampler, corruption,
// e2e (default: all). The e2e pipeline caches its heavy artifacts under the
// work directory keyed by a config hash; cached results are labeled.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "sdfscore/eval.hpp"
#include "sdfscore/io.hpp"
#include "sdfscore/rng.hpp"
#include "sdfscore/sampler.hpp"
#include "sdfscore/score_model.hpp"
#include "sdfscore/sdf.hpp"
#include "sdfscore/sde.hpp"
#include "sdfscore/training.hpp"

using namespace sdfscore;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("criterion %d [%s]: %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) g_failures++;
}

double seconds_since(clk::time_point t0) {
    return std::chrono::duration<double>(clk::now() - t0).count();
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

BinaryMask random_mask(int w, int h, double density, Rng& rng) {
    BinaryMask m(w, h);
    for (auto& v : m.labels) v = rng.uniform01() <= density ? 1 : 0;
    return m;
}

// ---- criteria 1 and 2: SDF oracle equivalence and round-trip ---------------

void run_sdf_group() {
    const auto t0 = clk::now();
    const double deltas[3] = {2.0, 5.0, 8.0};
    Rng rng(1);
    int cases = 0, mismatches = 0, roundtrip_failures = 0;
    for (int trial = 0; trial < 1000; trial++) {
        const int w = 1 + int(rng.next_u64() % 16);
        const int h = 1 + int(rng.next_u64() % 16);
        BinaryMask m;
        if (trial % 100 == 0)
            m = BinaryMask(w, h, 0);
        else if (trial % 100 == 1)
            m = BinaryMask(w, h, 1);
        else
            m = random_mask(w, h, rng.uniform01(), rng);
        for (double delta : deltas) {
            SdfConfig cfg{delta, 3e-3};
            Field fast = encode_sdf(m, cfg);
            Field slow = brute_force_sdf(m, cfg);
            cases++;
            if (std::memcmp(fast.values.data(), slow.values.data(),
                            fast.values.size() * sizeof(double)) != 0)
                mismatches++;
            if (!(decode_mask(fast, 0.0) == m)) roundtrip_failures++;
        }
    }
    const double elapsed = seconds_since(t0);
    report(1, mismatches == 0 && elapsed < 30.0,
           fmt("encode_sdf == brute_force_sdf bitwise on %d cases (%d mismatches), %.1fs (< 30s)",
               cases, mismatches, elapsed));
    report(2, roundtrip_failures == 0,
           fmt("decode(encode(m), 0) == m on the same suite (%d failures)", roundtrip_failures));
}

// ---- criterion 3: gradient check -------------------------------------------

void run_grad_group() {
    const auto t0 = clk::now();
    ScoreModelArch arch;
    arch.base_channels = 8;
    Rng init(2);
    ScoreModel model = ScoreModel::create_fully_random(arch, init);

    Rng data(3);
    Field m0a = data.normal_field(8, 8), xa = data.normal_field(8, 8);
    Field m0b = data.normal_field(8, 8), xb = data.normal_field(8, 8);
    for (double& v : m0a.values) v *= 0.5;
    for (double& v : m0b.values) v *= 0.5;
    std::vector<TrainPair> batch = {{&m0a, &xa}, {&m0b, &xb}};
    const SigmaSchedule sched;
    const Rng fixed(4);

    DsmResult base = loss_and_gradients(model, batch, sched, fixed);
    Rng coord(5);
    int checked = 0;
    double worst = 0.0;
    std::string worst_slot;
    for (const ParamSlot& slot : model.slots()) {
        const size_t n_checks = std::min<size_t>(50, slot.count);
        for (size_t c = 0; c < n_checks; c++) {
            const size_t idx = slot.offset + coord.next_u64() % slot.count;
            const double eps = 1e-5 * std::max(1.0, std::fabs(model.params()[idx]));
            ScoreModel plus = model, minus = model;
            plus.params()[idx] += eps;
            minus.params()[idx] -= eps;
            const double lp = loss_and_gradients(plus, batch, sched, fixed).loss;
            const double lm = loss_and_gradients(minus, batch, sched, fixed).loss;
            const double fd = (lp - lm) / (2.0 * eps);
            const double an = base.grad[idx];
            const double rel = std::fabs(fd - an) / std::max({1e-8, std::fabs(fd), std::fabs(an)});
            if (rel > worst) {
                worst = rel;
                worst_slot = slot.name;
            }
            checked++;
        }
    }
    const double elapsed = seconds_since(t0);
    report(3, worst < 1e-4 && elapsed < 60.0,
           fmt("%d coordinates over %zu tensors, worst relative error %.2e (< 1e-4) in %s, %.1fs (< 60s)",
               checked, model.slots().size(), worst, worst_slot.c_str(), elapsed));
}

// ---- criterion 4 (and the bitwise half of 9): sampler statistics -----------

std::vector<Field> run_analytic_batch(const AnalyticGaussianScore& oracle, const Field& x,
                                      const SamplerConfig& cfg, const SigmaSchedule& sched,
                                      uint64_t master_seed, int runs) {
    std::vector<Field> out(runs);
    ScoreFn fn = [&oracle](const Field& m, const Field&, double s) { return oracle.score(m, s); };
    Rng master(master_seed);
#pragma omp parallel for schedule(dynamic, 16)
    for (int i = 0; i < runs; i++) {
        Rng stream = master.split(uint64_t(i));
        out[i] = sample(fn, x, sched, cfg, stream);
    }
    return out;
}

void run_sampler_group() {
    const auto t0 = clk::now();
    const SigmaSchedule sched{1e-3, 5.0};
    SamplerConfig cfg;
    cfg.predictor_levels = 200;  // the GlaS setting
    cfg.corrector_steps = 1;
    cfg.corrector_snr = 0.15;

    // 16x16 field: on tiny fields the corrector step size couples to the
    // field norms and inflates the variance; the pooled variance carries the
    // 10% band because a per-pixel variance estimate from 2000 runs has ~3%
    // standard error whose maximum over pixels exceeds 10% for an exact
    // sampler.
    Rng mu_rng(6);
    Field mu = mu_rng.normal_field(16, 16);
    for (double& v : mu.values) v *= 0.8;
    const double s2 = 0.04;
    AnalyticGaussianScore oracle{mu, s2};
    Field x(16, 16);

    const int runs = 2000;
    std::vector<Field> first = run_analytic_batch(oracle, x, cfg, sched, 7, runs);

    Field sum(16, 16), sumsq(16, 16);
    for (const Field& s : first)
        for (size_t p = 0; p < s.size(); p++) {
            sum.values[p] += s.values[p];
            sumsq.values[p] += s.values[p] * s.values[p];
        }
    const double target_var = s2 + 1e-6;
    const double se = std::sqrt(target_var / runs);
    double worst_mean_dev = 0.0, pooled_var = 0.0;
    for (size_t p = 0; p < sum.size(); p++) {
        const double mean = sum.values[p] / runs;
        const double var = sumsq.values[p] / runs - mean * mean;
        pooled_var += var;
        worst_mean_dev = std::max(worst_mean_dev, std::fabs(mean - mu.values[p]) / se);
    }
    pooled_var /= double(sum.size());
    const double var_dev = std::fabs(pooled_var - target_var) / target_var;
    const double elapsed = seconds_since(t0);
    report(4, worst_mean_dev < 3.0 && var_dev < 0.10,
           fmt("K=200 J=1 r=0.15, %d samples on 16x16: worst |mean-mu| %.2f s.e. (< 3), pooled var "
               "dev %.1f%% (< 10%%), %.0fs",
               runs, worst_mean_dev, 100.0 * var_dev, elapsed));

    // bitwise reproducibility of the whole batch (criterion 9, sampler part)
    std::vector<Field> second = run_analytic_batch(oracle, x, cfg, sched, 7, runs);
    bool identical = true;
    for (int i = 0; i < runs && identical; i++)
        identical = first[i].values == second[i].values;
    report(9, identical, fmt("criterion 4 rerun with the same master seed is bitwise identical "
                             "(%d samples) [sampler part]", runs));
}

// ---- criterion 7: corruption-process properties -----------------------------

void run_corruption_group() {
    SdfConfig sdf_cfg{5.0, 3e-3};
    auto samples = generate_synthetic(4, 32, ShapeParams{}, sdf_cfg, Rng(8));
    // pick a sample with a reasonable object
    const SyntheticSample* chosen = nullptr;
    for (const auto& s : samples) {
        double fg = 0.0;
        for (auto v : s.mask.labels) fg += v;
        if (fg / double(s.mask.size()) >= 0.05) {
            chosen = &s;
            break;
        }
    }
    const BinaryMask& gt = chosen->mask;
    const Field& sdf = chosen->sdf;
    Field binary = remap_binary(gt);
    const SigmaSchedule sched{1e-3, 5.0};
    const double tau = 3e-3;

    // binary mode at t=1: symmetric gaussian exceedance at sigma_max
    double fraction_sum = 0.0;
    Rng master(9);
    for (int seed = 0; seed < 100; seed++) {
        Rng r = master.split(seed);
        Field z = r.normal_field(gt.width, gt.height);
        BinaryMask corrupted = decode_mask(perturb(binary, sched.sigma_at(1.0), z), tau);
        double fg = 0.0;
        for (auto v : corrupted.labels) fg += v;
        fraction_sum += fg / double(corrupted.size());
    }
    const double mean_fraction = fraction_sum / 100.0;
    const bool binary_ok = mean_fraction >= 0.4 && mean_fraction <= 0.6;

    // sdf mode at t=0.5: flips concentrate within 2px of the boundary
    Field dsq = boundary_distance_sq(gt);
    size_t near_px = 0, far_px = 0;
    for (double d : dsq.values) (d <= 4.0 ? near_px : far_px)++;
    double near_flips = 0.0, far_flips = 0.0;
    Rng master2(10);
    for (int seed = 0; seed < 100; seed++) {
        Rng r = master2.split(seed);
        Field z = r.normal_field(gt.width, gt.height);
        BinaryMask corrupted = decode_mask(perturb(sdf, sched.sigma_at(0.5), z), tau);
        for (size_t i = 0; i < gt.size(); i++) {
            if (corrupted.labels[i] == gt.labels[i]) continue;
            (dsq.values[i] <= 4.0 ? near_flips : far_flips) += 1.0;
        }
    }
    const double near_rate = near_flips / (100.0 * double(near_px));
    const double far_rate = far_flips / (100.0 * double(far_px));
    const bool sdf_ok = near_rate > far_rate;

    report(7, binary_ok && sdf_ok,
           fmt("binary t=1 foreground fraction %.3f in [0.4,0.6]; sdf t=0.5 flip rate near boundary "
               "%.2e > far %.2e (100 seeds)",
               mean_fraction, near_rate, far_rate));
}

// ---- criteria 5, 6, 8 and the e2e part of 9 ---------------------------------

struct PipelineConfig {
    int grid = 32;
    int n_train = 500;
    int n_test = 50;
    double delta = 5.0;
    double tau = 3e-3;
    int total_steps = 20000;
    int batch_size = 8;
    int base_channels = 32;
    uint64_t gen_train_seed = 1001;
    uint64_t gen_test_seed = 1002;
    uint64_t train_seed = 2001;
    uint64_t sample_seed = 3001;
    int ensemble_runs = 16;
    int predictor_levels = 200;
    int corrector_steps = 1;
    double corrector_snr = 0.15;
    int band = 3;

    std::string text() const {
        return fmt("grid=%d n=%d/%d delta=%g tau=%g steps=%d batch=%d base=%d seeds=%llu/%llu/%llu/%llu "
                   "R=%d K=%d J=%d r=%g band=%d",
                   grid, n_train, n_test, delta, tau, total_steps, batch_size, base_channels,
                   (unsigned long long)gen_train_seed, (unsigned long long)gen_test_seed,
                   (unsigned long long)train_seed, (unsigned long long)sample_seed, ensemble_runs,
                   predictor_levels, corrector_steps, corrector_snr, band);
    }
};

TrainConfig make_train_config(const PipelineConfig& p, TargetMode mode) {
    TrainConfig tc;
    tc.batch_size = p.batch_size;
    tc.total_steps = p.total_steps;
    tc.seed = p.train_seed;
    tc.target_mode = mode;
    tc.delta = p.delta;
    return tc;
}

SamplerConfig make_sampler_config(const PipelineConfig& p) {
    return {p.predictor_levels, p.corrector_steps, p.corrector_snr, p.tau, p.ensemble_runs};
}

void ensure_dataset(const fs::path& dir, int n, int grid, double delta, uint64_t seed,
                    const std::string& cfg_text) {
    if (fs::exists(dir / "manifest.json")) return;
    auto samples = generate_synthetic(n, grid, ShapeParams{}, SdfConfig{delta, 3e-3}, Rng(seed));
    save_dataset(dir, samples, grid, delta, seed, cfg_text);
}

// trains (or loads) a model; returns the loss trace through out param
ScoreModel ensure_model(const fs::path& ckpt, const fs::path& loss_csv,
                        const std::vector<SyntheticSample>& dataset, const PipelineConfig& p,
                        TargetMode mode, std::vector<double>* trace_out) {
    if (fs::exists(ckpt)) {
        if (trace_out) {
            std::ifstream f(loss_csv);
            std::string line;
            std::getline(f, line);  // header
            while (std::getline(f, line)) {
                auto comma = line.find(',');
                if (comma != std::string::npos) trace_out->push_back(std::stod(line.substr(comma + 1)));
            }
        }
        auto [model, adam] = load_checkpoint(ckpt);
        return model;
    }
    ScoreModelArch arch;
    arch.base_channels = p.base_channels;
    Rng init = Rng(p.train_seed).split(UINT64_MAX);
    ScoreModel model = ScoreModel::create(arch, init);
    TrainConfig tc = make_train_config(p, mode);
    auto t0 = clk::now();
    TrainResult res = train(dataset, tc, model, [&](int step, double loss) {
        if ((step + 1) % 1000 == 0)
            std::printf("  [train %s] step %d/%d loss %.4f (%.0fs)\n", to_string(mode).c_str(),
                        step + 1, tc.total_steps, loss, seconds_since(t0)),
                std::fflush(stdout);
    });
    save_checkpoint(ckpt, model, &res.adam);
    save_loss_csv(loss_csv, res.loss_trace);
    if (trace_out) *trace_out = res.loss_trace;
    return model;
}

void ensure_samples(const fs::path& dir, const ScoreModel& model,
                    const std::vector<SyntheticSample>& test_set, const PipelineConfig& p) {
    if (fs::exists(dir / "done")) return;
    fs::create_directories(dir);
    FloatScoreNet net(model);
    ScoreFn fn = [&net](const Field& m, const Field& x, double s) { return net.apply(m, x, s); };
    SigmaSchedule sched{model.arch().sigma_min, model.arch().sigma_max};
    SamplerConfig scfg = make_sampler_config(p);
    Rng master(p.sample_seed);
    auto t0 = clk::now();
    for (size_t i = 0; i < test_set.size(); i++) {
        SampleEnsemble ens = ensemble_sample(fn, test_set[i].image, sched, scfg, master.split(i));
        const fs::path sdir = dir / sample_basename(int(i));
        fs::create_directories(sdir);
        for (int j = 0; j < int(ens.samples.size()); j++) {
            char name[32];
            std::snprintf(name, sizeof(name), "run_%03d.sdf.bin", j);
            save_sdf(sdir / name, ens.samples[j], p.delta);
        }
        save_sdf(sdir / "mean.sdf.bin", ens.mean, p.delta);
        save_sdf(sdir / "std.sdf.bin", ens.stddev, p.delta);
        save_mask_pgm(sdir / "mmse.pgm", ens.mmse_mask);
        if ((i + 1) % 10 == 0)
            std::printf("  [sample] %zu/%zu images (%.0fs)\n", i + 1, test_set.size(),
                        seconds_since(t0)),
                std::fflush(stdout);
    }
    std::ofstream(dir / "done") << "ok\n";
}

struct EvalSummary {
    double mmse_iou = 0.0, mmse_f1 = 0.0;
    double single_iou = 0.0, single_f1 = 0.0;
    double band_ordered_fraction = 0.0;
    double mean_rank_corr = 0.0;
};

EvalSummary evaluate_samples(const fs::path& dir, const std::vector<SyntheticSample>& test_set,
                             const PipelineConfig& p) {
    EvalSummary s;
    int band_ordered = 0;
    for (size_t i = 0; i < test_set.size(); i++) {
        const fs::path sdir = dir / sample_basename(int(i));
        const BinaryMask& gt = test_set[i].mask;
        BinaryMask mmse = load_mask_pgm(sdir / "mmse.pgm");
        MetricEntry me = f1_iou(mmse, gt);
        s.mmse_iou += me.iou;
        s.mmse_f1 += me.f1;
        BinaryMask single = decode_mask(load_sdf(sdir / "run_000.sdf.bin").first, p.tau);
        MetricEntry se = f1_iou(single, gt);
        s.single_iou += se.iou;
        s.single_f1 += se.f1;

        SampleEnsemble ens;
        ens.mean = load_sdf(sdir / "mean.sdf.bin").first;
        ens.stddev = load_sdf(sdir / "std.sdf.bin").first;
        ens.mmse_mask = mmse;
        UncertaintyReport rep = uncertainty_maps(ens, gt, test_set[i].sdf, p.band);
        if (rep.boundary_band_mean_std > rep.far_mean_std) band_ordered++;
        s.mean_rank_corr += rank_correlation(rep.std_field, rep.error_field);
    }
    const double n = double(test_set.size());
    s.mmse_iou /= n;
    s.mmse_f1 /= n;
    s.single_iou /= n;
    s.single_f1 /= n;
    s.band_ordered_fraction = band_ordered / n;
    s.mean_rank_corr /= n;
    return s;
}

bool files_identical(const fs::path& a, const fs::path& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb) return false;
    std::vector<char> ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::vector<char> bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    return ba == bb;
}

void run_e2e_group() {
    const PipelineConfig p;
    const fs::path work = ACCEPTANCE_WORK_DIR;
    fs::create_directories(work);

    // invalidate the cache when the pipeline settings change
    const std::string cfg_text = p.text();
    const fs::path meta = work / "meta.txt";
    if (fs::exists(meta)) {
        std::ifstream f(meta);
        std::string stored((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        if (stored != cfg_text) {
            std::printf("  [e2e] pipeline settings changed, clearing the cache\n");
            fs::remove_all(work);
            fs::create_directories(work);
        }
    }
    std::ofstream(meta) << cfg_text;

    std::printf("  [e2e] work dir: %s\n", work.string().c_str());
    ensure_dataset(work / "train_ds", p.n_train, p.grid, p.delta, p.gen_train_seed, cfg_text);
    ensure_dataset(work / "test_ds", p.n_test, p.grid, p.delta, p.gen_test_seed, cfg_text);
    auto train_set = load_dataset(work / "train_ds");
    auto test_set = load_dataset(work / "test_ds");

    std::vector<double> sdf_trace;
    ScoreModel sdf_model = ensure_model(work / "model_sdf.scm", work / "loss_sdf.csv", train_set, p,
                                        TargetMode::sdf, &sdf_trace);
    ensure_samples(work / "samples_sdf", sdf_model, test_set, p);
    EvalSummary sdf_eval = evaluate_samples(work / "samples_sdf", test_set, p);

    // criterion 5: headline desk-scale quality + MMSE ordering + loss bound
    std::vector<double> tail(sdf_trace.end() - std::min<size_t>(1000, sdf_trace.size()),
                             sdf_trace.end());
    std::sort(tail.begin(), tail.end());
    const double median_loss = tail.empty() ? 1e9 : tail[tail.size() / 2];
    const bool c5 = sdf_eval.mmse_iou >= 0.80 && sdf_eval.mmse_f1 >= 0.88 &&
                    sdf_eval.single_iou <= sdf_eval.mmse_iou && median_loss < 0.35;
    report(5, c5,
           fmt("mean IoU %.4f (>= 0.80), mean F1 %.4f (>= 0.88), single-sample IoU %.4f <= MMSE IoU "
               "%.4f, median loss (last 1k steps) %.4f (< 0.35)",
               sdf_eval.mmse_iou, sdf_eval.mmse_f1, sdf_eval.single_iou, sdf_eval.mmse_iou,
               median_loss));

    // criterion 6: binary-target ablation is strictly worse
    ScoreModel bin_model = ensure_model(work / "model_binary.scm", work / "loss_binary.csv",
                                        train_set, p, TargetMode::binary, nullptr);
    ensure_samples(work / "samples_binary", bin_model, test_set, p);
    EvalSummary bin_eval = evaluate_samples(work / "samples_binary", test_set, p);
    report(6, bin_eval.mmse_iou < sdf_eval.mmse_iou,
           fmt("binary-target mean IoU %.4f < sdf-target mean IoU %.4f", bin_eval.mmse_iou,
               sdf_eval.mmse_iou));

    // criterion 8: uncertainty localization
    report(8, sdf_eval.band_ordered_fraction >= 0.90 && sdf_eval.mean_rank_corr > 0.0,
           fmt("boundary-band std > far std on %.0f%% of images (>= 90%%), mean rank corr %.3f (> 0)",
               100.0 * sdf_eval.band_ordered_fraction, sdf_eval.mean_rank_corr));

    // criterion 9 (e2e part): regenerate, retrain and resample bitwise
    const fs::path det_marker = work / "determinism_ok";
    if (fs::exists(det_marker)) {
        report(9, true, "gen/train/sample rerun bitwise identical [e2e part] (cached result)");
        return;
    }
    bool det_ok = true;
    std::string det_detail;

    // gen: byte-identical regeneration
    {
        auto again = generate_synthetic(p.n_test, p.grid, ShapeParams{}, SdfConfig{p.delta, 3e-3},
                                        Rng(p.gen_test_seed));
        const fs::path tmp = work / "regen_test_ds";
        fs::remove_all(tmp);
        save_dataset(tmp, again, p.grid, p.delta, p.gen_test_seed, cfg_text);
        for (const auto& entry : fs::directory_iterator(work / "test_ds")) {
            if (!files_identical(entry.path(), tmp / entry.path().filename())) {
                det_ok = false;
                det_detail = "dataset regeneration differs at " + entry.path().filename().string();
                break;
            }
        }
        fs::remove_all(tmp);
    }

    // train: full rerun reproduces the checkpoint parameters bitwise
    if (det_ok) {
        ScoreModelArch arch;
        arch.base_channels = p.base_channels;
        Rng init = Rng(p.train_seed).split(UINT64_MAX);
        ScoreModel model = ScoreModel::create(arch, init);
        TrainConfig tc = make_train_config(p, TargetMode::sdf);
        auto t0 = clk::now();
        train(train_set, tc, model, [&](int step, double loss) {
            if ((step + 1) % 2000 == 0)
                std::printf("  [retrain determinism] step %d/%d loss %.4f (%.0fs)\n", step + 1,
                            tc.total_steps, loss, seconds_since(t0)),
                    std::fflush(stdout);
        });
        if (model.params() != sdf_model.params()) {
            det_ok = false;
            det_detail = "retrained parameters differ from the checkpoint";
        }
    }

    // sample: rerun the ensembles and compare against the stored rasters
    if (det_ok) {
        FloatScoreNet net(sdf_model);
        ScoreFn fn = [&net](const Field& m, const Field& x, double s) { return net.apply(m, x, s); };
        SigmaSchedule sched{sdf_model.arch().sigma_min, sdf_model.arch().sigma_max};
        SamplerConfig scfg = make_sampler_config(p);
        Rng master(p.sample_seed);
        const fs::path tmp = work / "resample";
        fs::remove_all(tmp);
        fs::create_directories(tmp);
        for (size_t i = 0; i < test_set.size() && det_ok; i++) {
            SampleEnsemble ens = ensemble_sample(fn, test_set[i].image, sched, scfg, master.split(i));
            const fs::path sdir = tmp / sample_basename(int(i));
            fs::create_directories(sdir);
            save_sdf(sdir / "mean.sdf.bin", ens.mean, p.delta);
            save_sdf(sdir / "std.sdf.bin", ens.stddev, p.delta);
            save_mask_pgm(sdir / "mmse.pgm", ens.mmse_mask);
            for (int j = 0; j < int(ens.samples.size()); j++) {
                char name[32];
                std::snprintf(name, sizeof(name), "run_%03d.sdf.bin", j);
                save_sdf(sdir / name, ens.samples[j], p.delta);
            }
            for (const auto& entry : fs::directory_iterator(sdir)) {
                if (!files_identical(entry.path(), work / "samples_sdf" / sample_basename(int(i)) /
                                                       entry.path().filename())) {
                    det_ok = false;
                    det_detail = "resample differs at " + sample_basename(int(i)) + "/" +
                                 entry.path().filename().string();
                    break;
                }
            }
        }
        fs::remove_all(tmp);
    }

    if (det_ok) std::ofstream(det_marker) << "ok\n";
    report(9, det_ok,
           det_ok ? "gen/train/sample rerun bitwise identical [e2e part]" : det_detail);
}

}  // namespace

int main(int argc, char** argv) {
    const std::string group = argc > 1 ? argv[1] : "all";
    const bool all = group == "all";
    if (all || group == "sdf") run_sdf_group();
    if (all || group == "grad") run_grad_group();
    if (all || group == "sampler") run_sampler_group();
    if (all || group == "corruption") run_corruption_group();
    if (all || group == "e2e") run_e2e_group();
    if (g_failures) std::printf("%d criterion check(s) FAILED\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
