#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sdfscore/field.hpp"
#include "sdfscore/score_model.hpp"
#include "sdfscore/training.hpp"

namespace sdfscore {

// 8-bit binary PGM (P5), 0 = background, 255 = foreground.
void save_mask_pgm(const std::filesystem::path& path, const BinaryMask& mask);
BinaryMask load_mask_pgm(const std::filesystem::path& path);

// Grayscale [0,1] fields quantized to 8-bit.
void save_gray_pgm(const std::filesystem::path& path, const Field& img);
Field load_gray_pgm(const std::filesystem::path& path);

// Little-endian f32 raster: magic "SDF1", width u32, height u32, delta f32.
void save_sdf(const std::filesystem::path& path, const Field& sdf, double delta);
std::pair<Field, double> load_sdf(const std::filesystem::path& path);

// Checkpoint: magic "SCM1", u32 descriptor length + canonical text, u64
// parameter count, f64 parameters; optimizer state appended in the same
// layout when present (two moment vectors plus the step counter).
void save_checkpoint(const std::filesystem::path& path, const ScoreModel& model,
                     const AdamState* adam = nullptr);
std::pair<ScoreModel, std::optional<AdamState>> load_checkpoint(const std::filesystem::path& path);

void save_loss_csv(const std::filesystem::path& path, const std::vector<double>& trace);

struct MetricRow {
    std::string image_id;
    double f1 = 0.0;
    double iou = 0.0;
};
void save_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);

// Dataset directory: sample_%05d.mask.pgm / .img.pgm / .sdf.bin + manifest.json
void save_dataset(const std::filesystem::path& dir, const std::vector<SyntheticSample>& samples,
                  int grid, double delta, uint64_t seed, const std::string& config_text);
std::vector<SyntheticSample> load_dataset(const std::filesystem::path& dir);

std::string sample_basename(int index);

// One JSON object per line.
void append_manifest_line(const std::filesystem::path& path, const std::string& json_line);

uint64_t fnv1a_hash(const std::string& text);

}  // namespace sdfscore
