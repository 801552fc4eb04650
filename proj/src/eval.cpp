#include "sdfscore/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sdfscore/sdf.hpp"

namespace sdfscore {

MetricEntry f1_iou(const BinaryMask& pred, const BinaryMask& gt) {
    if (!pred.same_shape(gt)) throw shape_error("f1_iou: mask dimensions differ");
    size_t tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < pred.size(); i++) {
        const bool p = pred.labels[i] == 1, g = gt.labels[i] == 1;
        tp += p && g;
        fp += p && !g;
        fn += !p && g;
    }
    if (tp + fp + fn == 0) return {1.0, 1.0};  // both empty
    MetricEntry e;
    e.iou = double(tp) / double(tp + fp + fn);
    e.f1 = 2.0 * double(tp) / double(2 * tp + fp + fn);
    return e;
}

MetricReport metric_report(const std::vector<MetricEntry>& entries) {
    MetricReport r;
    r.per_image = entries;
    for (const MetricEntry& e : entries) {
        r.mean_f1 += e.f1;
        r.mean_iou += e.iou;
    }
    if (!entries.empty()) {
        r.mean_f1 /= entries.size();
        r.mean_iou /= entries.size();
    }
    return r;
}

UncertaintyReport uncertainty_maps(const SampleEnsemble& ens, const BinaryMask& gt_mask,
                                   const Field& gt_sdf, int band) {
    if (band < 1) throw config_error("uncertainty_maps: band must be >= 1");
    require_same_shape(ens.mean, gt_sdf, "uncertainty_maps");
    if (gt_mask.width != gt_sdf.width || gt_mask.height != gt_sdf.height)
        throw shape_error("uncertainty_maps: mask/field dimensions differ");

    if (ens.mmse_mask.width != gt_mask.width || ens.mmse_mask.height != gt_mask.height)
        throw shape_error("uncertainty_maps: ensemble mmse mask dimensions differ");
    UncertaintyReport rep;
    rep.band = band;
    rep.std_field = ens.stddev;

    rep.error_field = Field(gt_sdf.width, gt_sdf.height);
    for (size_t i = 0; i < rep.error_field.size(); i++)
        rep.error_field.values[i] = std::fabs(ens.mean.values[i] - gt_sdf.values[i]);

    rep.xor_field = BinaryMask(gt_mask.width, gt_mask.height);
    for (size_t i = 0; i < rep.xor_field.size(); i++)
        rep.xor_field.labels[i] = ens.mmse_mask.labels[i] ^ gt_mask.labels[i];

    Field dsq = boundary_distance_sq(gt_mask);
    const double band_sq = double(band) * band;
    double in_sum = 0.0, out_sum = 0.0;
    size_t in_cnt = 0, out_cnt = 0;
    for (size_t i = 0; i < dsq.size(); i++) {
        if (dsq.values[i] <= band_sq) {
            in_sum += rep.std_field.values[i];
            in_cnt++;
        } else {
            out_sum += rep.std_field.values[i];
            out_cnt++;
        }
    }
    rep.boundary_band_mean_std = in_cnt ? in_sum / in_cnt : 0.0;
    rep.far_mean_std = out_cnt ? out_sum / out_cnt : 0.0;
    return rep;
}

namespace {

std::vector<double> midranks(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t(0));
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) j++;
        const double r = 0.5 * (double(i) + double(j)) + 1.0;
        for (size_t k = i; k <= j; k++) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double rank_correlation(const Field& a, const Field& b) {
    require_same_shape(a, b, "rank_correlation");
    std::vector<double> ra = midranks(a.values);
    std::vector<double> rb = midranks(b.values);
    const size_t n = ra.size();
    double ma = 0.0, mb = 0.0;
    for (size_t i = 0; i < n; i++) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (size_t i = 0; i < n; i++) {
        const double da = ra[i] - ma, db = rb[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

}  // namespace sdfscore
