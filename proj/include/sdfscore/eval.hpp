#pragma once

#include <vector>

#include "sdfscore/field.hpp"
#include "sdfscore/sampler.hpp"

namespace sdfscore {

struct MetricEntry {
    double f1 = 0.0;
    double iou = 0.0;
};

struct MetricReport {
    std::vector<MetricEntry> per_image;
    double mean_f1 = 0.0;
    double mean_iou = 0.0;  // per-image metrics averaged, not pixel-pooled
};

// Pixelwise overlap on foreground. Both masks empty scores 1 by convention;
// empty vs non-empty scores 0.
MetricEntry f1_iou(const BinaryMask& pred, const BinaryMask& gt);

MetricReport metric_report(const std::vector<MetricEntry>& entries);

struct UncertaintyReport {
    Field std_field;
    Field error_field;    // |ensemble mean - ground-truth SDF|
    BinaryMask xor_field;  // mmse mask XOR ground-truth mask
    double boundary_band_mean_std = 0.0;
    double far_mean_std = 0.0;
    int band = 0;
};

UncertaintyReport uncertainty_maps(const SampleEnsemble& ens, const BinaryMask& gt_mask,
                                   const Field& gt_sdf, int band);

// Spearman rank correlation with midranks for ties; 0 when either input is
// constant.
double rank_correlation(const Field& a, const Field& b);

}  // namespace sdfscore
