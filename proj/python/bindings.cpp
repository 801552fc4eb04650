#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sdfscore/eval.hpp"
#include "sdfscore/io.hpp"
#include "sdfscore/run_config.hpp"
#include "sdfscore/sampler.hpp"
#include "sdfscore/score_model.hpp"
#include "sdfscore/sdf.hpp"
#include "sdfscore/training.hpp"

namespace py = pybind11;
using namespace sdfscore;

namespace {

BinaryMask mask_from_array(const py::array_t<uint8_t>& arr) {
    if (arr.ndim() != 2) throw shape_error("mask array must be 2-D");
    BinaryMask m(int(arr.shape(1)), int(arr.shape(0)));
    auto r = arr.unchecked<2>();
    for (py::ssize_t y = 0; y < arr.shape(0); y++)
        for (py::ssize_t x = 0; x < arr.shape(1); x++) m.at(int(y), int(x)) = r(y, x);
    validate_mask(m);
    return m;
}

Field field_from_array(const py::array_t<double>& arr) {
    if (arr.ndim() != 2) throw shape_error("field array must be 2-D");
    Field f(int(arr.shape(1)), int(arr.shape(0)));
    auto r = arr.unchecked<2>();
    for (py::ssize_t y = 0; y < arr.shape(0); y++)
        for (py::ssize_t x = 0; x < arr.shape(1); x++) f.at(int(y), int(x)) = r(y, x);
    return f;
}

py::array_t<uint8_t> mask_to_array(const BinaryMask& m) {
    py::array_t<uint8_t> arr({m.height, m.width});
    auto w = arr.mutable_unchecked<2>();
    for (int y = 0; y < m.height; y++)
        for (int x = 0; x < m.width; x++) w(y, x) = m.at(y, x);
    return arr;
}

py::array_t<double> field_to_array(const Field& f) {
    py::array_t<double> arr({f.height, f.width});
    auto w = arr.mutable_unchecked<2>();
    for (int y = 0; y < f.height; y++)
        for (int x = 0; x < f.width; x++) w(y, x) = f.at(y, x);
    return arr;
}

SamplerConfig sampler_config_from_kwargs(int predictor_steps, int corrector_steps,
                                         double corrector_snr, double threshold_tau,
                                         int ensemble_runs) {
    SamplerConfig cfg{predictor_steps, corrector_steps, corrector_snr, threshold_tau, ensemble_runs};
    cfg.validate();
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "conditional score-based generative segmentation over SDF masks";

    py::register_exception<config_error>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<io_error>(m, "IoError", PyExc_IOError);
    py::register_exception<numeric_error>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<shape_error>(m, "ShapeError", PyExc_ValueError);

    m.def(
        "encode_sdf",
        [](const py::array_t<uint8_t>& mask, double delta) {
            return field_to_array(encode_sdf(mask_from_array(mask), SdfConfig{delta, 3e-3}));
        },
        py::arg("mask"), py::arg("delta"),
        "Truncated, normalized signed distance field of a binary mask.");

    m.def(
        "brute_force_sdf",
        [](const py::array_t<uint8_t>& mask, double delta) {
            return field_to_array(brute_force_sdf(mask_from_array(mask), SdfConfig{delta, 3e-3}));
        },
        py::arg("mask"), py::arg("delta"), "Exhaustive-minimization oracle for encode_sdf.");

    m.def(
        "decode_mask",
        [](const py::array_t<double>& sdf, double tau) {
            return mask_to_array(decode_mask(field_from_array(sdf), tau));
        },
        py::arg("sdf"), py::arg("tau") = 3e-3, "Threshold an SDF field back to a binary mask.");

    m.def(
        "boundary_pixels",
        [](const py::array_t<uint8_t>& mask) {
            auto pts = boundary_pixels(mask_from_array(mask));
            py::array_t<int> arr({py::ssize_t(pts.size()), py::ssize_t(2)});
            auto w = arr.mutable_unchecked<2>();
            for (size_t i = 0; i < pts.size(); i++) {
                w(py::ssize_t(i), 0) = pts[i].x;
                w(py::ssize_t(i), 1) = pts[i].y;
            }
            return arr;
        },
        py::arg("mask"), "Boundary pixel coordinates as an (n, 2) array of (x, y).");

    py::class_<SigmaSchedule>(m, "SigmaSchedule")
        .def(py::init<double, double>(), py::arg("sigma_min") = 1e-3, py::arg("sigma_max") = 5.0)
        .def_readonly("sigma_min", &SigmaSchedule::sigma_min)
        .def_readonly("sigma_max", &SigmaSchedule::sigma_max)
        .def("sigma_at", &SigmaSchedule::sigma_at, py::arg("t"))
        .def("ladder", [](const SigmaSchedule& s, int levels) { return make_ladder(s, levels); },
             py::arg("levels"));

    m.def(
        "perturb",
        [](const py::array_t<double>& m0, double sigma, const py::array_t<double>& z) {
            return field_to_array(perturb(field_from_array(m0), sigma, field_from_array(z)));
        },
        py::arg("m0"), py::arg("sigma"), py::arg("z"));

    m.def(
        "dsm_target",
        [](const py::array_t<double>& mt, const py::array_t<double>& m0, double sigma) {
            return field_to_array(dsm_target(field_from_array(mt), field_from_array(m0), sigma));
        },
        py::arg("mt"), py::arg("m0"), py::arg("sigma"));

    py::class_<ScoreModel>(m, "ScoreModel")
        .def_static(
            "create",
            [](int base_channels, double sigma_min, double sigma_max, uint64_t seed) {
                ScoreModelArch arch;
                arch.base_channels = base_channels;
                arch.sigma_min = sigma_min;
                arch.sigma_max = sigma_max;
                Rng rng(seed);
                return ScoreModel::create(arch, rng);
            },
            py::arg("base_channels") = 32, py::arg("sigma_min") = 1e-3, py::arg("sigma_max") = 5.0,
            py::arg("seed") = 0)
        .def_static("load",
                    [](const std::string& path) { return load_checkpoint(path).first; },
                    py::arg("path"))
        .def("save",
             [](const ScoreModel& model, const std::string& path) { save_checkpoint(path, model); },
             py::arg("path"))
        .def_property_readonly("param_count", &ScoreModel::param_count)
        .def_property_readonly("descriptor", [](const ScoreModel& m) { return m.arch().canonical(); })
        .def(
            "apply",
            [](const ScoreModel& model, const py::array_t<double>& mt, const py::array_t<double>& x,
               double sigma) {
                return field_to_array(model.apply(field_from_array(mt), field_from_array(x), sigma));
            },
            py::arg("mt"), py::arg("x"), py::arg("sigma"),
            "Conditional score s(mt, x, sigma) = -zhat/sigma.");

    m.def(
        "generate_synthetic",
        [](int n, int grid, uint64_t seed, double delta) {
            SdfConfig cfg{delta > 0 ? delta : default_delta(grid, grid), 3e-3};
            auto samples = generate_synthetic(n, grid, ShapeParams{}, cfg, Rng(seed));
            py::list out;
            for (const SyntheticSample& s : samples)
                out.append(py::make_tuple(mask_to_array(s.mask), field_to_array(s.sdf),
                                          field_to_array(s.image)));
            return out;
        },
        py::arg("n"), py::arg("grid"), py::arg("seed") = 0, py::arg("delta") = 0.0,
        "List of (mask, sdf, image) tuples.");

    m.def(
        "f1_iou",
        [](const py::array_t<uint8_t>& pred, const py::array_t<uint8_t>& gt) {
            MetricEntry e = f1_iou(mask_from_array(pred), mask_from_array(gt));
            return py::make_tuple(e.f1, e.iou);
        },
        py::arg("pred"), py::arg("gt"));

    m.def(
        "sample_with_model",
        [](const ScoreModel& model, const py::array_t<double>& x, uint64_t seed, int predictor_steps,
           int corrector_steps, double corrector_snr, double threshold_tau, bool f32) {
            SamplerConfig cfg = sampler_config_from_kwargs(predictor_steps, corrector_steps,
                                                           corrector_snr, threshold_tau, 1);
            SigmaSchedule sched{model.arch().sigma_min, model.arch().sigma_max};
            Field img = field_from_array(x);
            Field out;
            // one run is the j = 0 stream of the matching ensemble
            if (f32) {
                FloatScoreNet net(model);
                out = sample([&](const Field& mm, const Field& xx, double s) { return net.apply(mm, xx, s); },
                             img, sched, cfg, Rng(seed).split(0));
            } else {
                out = sample([&](const Field& mm, const Field& xx, double s) { return model.apply(mm, xx, s); },
                             img, sched, cfg, Rng(seed).split(0));
            }
            return field_to_array(out);
        },
        py::arg("model"), py::arg("x"), py::arg("seed") = 0, py::arg("predictor_steps") = 200,
        py::arg("corrector_steps") = 1, py::arg("corrector_snr") = 0.15,
        py::arg("threshold_tau") = 3e-3, py::arg("f32") = true,
        "One predictor-corrector sample (raw SDF field, not thresholded).");

    m.def(
        "ensemble_with_model",
        [](const ScoreModel& model, const py::array_t<double>& x, uint64_t seed, int runs,
           int predictor_steps, int corrector_steps, double corrector_snr, double threshold_tau,
           bool f32) {
            SamplerConfig cfg = sampler_config_from_kwargs(predictor_steps, corrector_steps,
                                                           corrector_snr, threshold_tau, runs);
            SigmaSchedule sched{model.arch().sigma_min, model.arch().sigma_max};
            Field img = field_from_array(x);
            SampleEnsemble ens;
            if (f32) {
                FloatScoreNet net(model);
                ens = ensemble_sample(
                    [&](const Field& mm, const Field& xx, double s) { return net.apply(mm, xx, s); }, img,
                    sched, cfg, Rng(seed));
            } else {
                ens = ensemble_sample(
                    [&](const Field& mm, const Field& xx, double s) { return model.apply(mm, xx, s); }, img,
                    sched, cfg, Rng(seed));
            }
            py::dict out;
            py::list samples;
            for (const Field& s : ens.samples) samples.append(field_to_array(s));
            out["samples"] = samples;
            out["mean"] = field_to_array(ens.mean);
            out["std"] = field_to_array(ens.stddev);
            out["mmse_mask"] = mask_to_array(ens.mmse_mask);
            return out;
        },
        py::arg("model"), py::arg("x"), py::arg("seed") = 0, py::arg("runs") = 16,
        py::arg("predictor_steps") = 200, py::arg("corrector_steps") = 1,
        py::arg("corrector_snr") = 0.15, py::arg("threshold_tau") = 3e-3, py::arg("f32") = true,
        "Ensemble sampling with mean/std/MMSE reductions.");

    m.def(
        "sample_with_analytic_score",
        [](const py::array_t<double>& mu, double s2, uint64_t seed, int predictor_steps,
           int corrector_steps, double corrector_snr, double sigma_min, double sigma_max) {
            SamplerConfig cfg = sampler_config_from_kwargs(predictor_steps, corrector_steps,
                                                           corrector_snr, 3e-3, 1);
            AnalyticGaussianScore oracle{field_from_array(mu), s2};
            SigmaSchedule sched{sigma_min, sigma_max};
            Field x(oracle.mu.width, oracle.mu.height);
            Field out = sample([&](const Field& mm, const Field&, double s) { return oracle.score(mm, s); },
                               x, sched, cfg, Rng(seed).split(0));
            return field_to_array(out);
        },
        py::arg("mu"), py::arg("s2"), py::arg("seed") = 0, py::arg("predictor_steps") = 200,
        py::arg("corrector_steps") = 1, py::arg("corrector_snr") = 0.15, py::arg("sigma_min") = 1e-3,
        py::arg("sigma_max") = 5.0,
        "Predictor-corrector sample from the closed-form gaussian score.");

    m.attr("__version__") = "0.1.0";
}
