// pybind11 surface. Cubes, RGB images, and noise maps cross the boundary as
// numpy arrays in the library's native layouts (channel-outermost, row-major);
// the measurement-side types keep their geometry metadata and are bound as
// small classes.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <vector>

#include "dmdc/classical.hpp"
#include "dmdc/common.hpp"
#include "dmdc/cube.hpp"
#include "dmdc/estimation.hpp"
#include "dmdc/io.hpp"
#include "dmdc/masks.hpp"
#include "dmdc/metrics.hpp"
#include "dmdc/net.hpp"
#include "dmdc/optics.hpp"
#include "dmdc/params.hpp"
#include "dmdc/response.hpp"
#include "dmdc/train.hpp"
#include "dmdc/tv.hpp"

namespace py = pybind11;
using namespace dmdc;

namespace {

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array cube_to_array(const HyperspectralCube& c) {
    py::array_t<double> a({size_t(c.nlam), size_t(c.nx), size_t(c.ny)});
    std::memcpy(a.mutable_data(), c.data.data(), c.data.size() * sizeof(double));
    return a;
}

HyperspectralCube cube_from_array(const DArray& a) {
    if (a.ndim() != 3)
        throw Error("shape", "cube array must be (nlam, nx, ny)");
    HyperspectralCube c(uint32_t(a.shape(1)), uint32_t(a.shape(2)),
                        uint32_t(a.shape(0)));
    std::memcpy(c.data.data(), a.data(), c.data.size() * sizeof(double));
    return c;
}

py::array rgb_to_array(const RGBImage& g) {
    py::array_t<double> a({size_t(3), size_t(g.nx), size_t(g.ny)});
    std::memcpy(a.mutable_data(), g.data.data(), g.data.size() * sizeof(double));
    return a;
}

RGBImage rgb_from_array(const DArray& a) {
    if (a.ndim() != 3 || a.shape(0) != 3)
        throw Error("shape", "rgb array must be (3, nx, ny)");
    RGBImage g(uint32_t(a.shape(1)), uint32_t(a.shape(2)));
    std::memcpy(g.data.data(), a.data(), g.data.size() * sizeof(double));
    return g;
}

py::array noisemap_to_array(const NoiseMap& n) {
    py::array_t<double> a({size_t(n.nlam), size_t(n.nx), size_t(n.ny)});
    std::memcpy(a.mutable_data(), n.data.data(), n.data.size() * sizeof(double));
    return a;
}

NoiseMap noisemap_from_array(const DArray& a) {
    if (a.ndim() != 3)
        throw Error("shape", "noise map array must be (nlam, nx, ny)");
    NoiseMap n(uint32_t(a.shape(1)), uint32_t(a.shape(2)), uint32_t(a.shape(0)));
    std::memcpy(n.data.data(), a.data(), n.data.size() * sizeof(double));
    return n;
}

void raise_on(const std::vector<std::string>& violations, const char* what) {
    if (!violations.empty())
        throw Error("invalid", std::string(what) + ": " + violations.front());
}

std::vector<HyperspectralCube> cubes_from_list(const std::vector<DArray>& arrs) {
    std::vector<HyperspectralCube> out;
    out.reserve(arrs.size());
    for (const auto& a : arrs) out.push_back(cube_from_array(a));
    return out;
}

}  // namespace

PYBIND11_MODULE(_dmdc, m) {
    m.doc() =
        "dual-camera coded-aperture spectral imaging: forward model, masks, "
        "noise estimation, classical and learned reconstruction, metrics, io";

    // library errors keep their category; "io" failures become OSError, the
    // rest ValueError, both with the category visible in the message
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            const std::string msg = e.code() + ": " + e.what();
            if (e.code() == "io")
                PyErr_SetString(PyExc_OSError, msg.c_str());
            else
                PyErr_SetString(PyExc_ValueError, msg.c_str());
        }
    });

    // ---- measurement-side types ----

    py::class_<CodedMask>(m, "CodedMask")
        .def_readonly("nx", &CodedMask::nx)
        .def_readonly("ny", &CodedMask::ny)
        .def_readonly("binary", &CodedMask::binary)
        .def_property_readonly("array",
                               [](const CodedMask& mk) {
                                   py::array_t<double> a(
                                       {size_t(mk.nx), size_t(mk.ny)});
                                   std::memcpy(a.mutable_data(), mk.data.data(),
                                               mk.data.size() * sizeof(double));
                                   return a;
                               })
        .def_static(
            "from_array",
            [](const DArray& a, bool binary) {
                if (a.ndim() != 2)
                    throw Error("shape", "mask array must be (nx, ny)");
                CodedMask mk(uint32_t(a.shape(0)), uint32_t(a.shape(1)));
                std::memcpy(mk.data.data(), a.data(),
                            mk.data.size() * sizeof(double));
                mk.binary = binary;
                raise_on(validate_mask(mk), "mask");
                return mk;
            },
            py::arg("array"), py::arg("binary") = false)
        .def("__repr__", [](const CodedMask& mk) {
            return "CodedMask(" + std::to_string(mk.nx) + "x" +
                   std::to_string(mk.ny) + (mk.binary ? ", binary)" : ")");
        });

    py::class_<CASSIMeasurement>(m, "Measurement")
        .def_readonly("nx", &CASSIMeasurement::nx)
        .def_readonly("wy", &CASSIMeasurement::wy)
        .def_readonly("ny", &CASSIMeasurement::ny)
        .def_readonly("nlam", &CASSIMeasurement::nlam)
        .def_readonly("d", &CASSIMeasurement::d)
        .def_property_readonly("array",
                               [](const CASSIMeasurement& ms) {
                                   py::array_t<double> a(
                                       {size_t(ms.nx), size_t(ms.wy)});
                                   std::memcpy(a.mutable_data(), ms.data.data(),
                                               ms.data.size() * sizeof(double));
                                   return a;
                               })
        .def_static(
            "from_array",
            [](const DArray& a, uint32_t ny, uint32_t nlam, uint32_t d) {
                if (a.ndim() != 2)
                    throw Error("shape", "measurement array must be (nx, wy)");
                CASSIMeasurement ms(uint32_t(a.shape(0)), ny, nlam, d);
                if (size_t(a.shape(1)) != ms.wy)
                    throw Error("shape",
                                "measurement width does not match ny + d*(nlam-1)");
                std::memcpy(ms.data.data(), a.data(),
                            ms.data.size() * sizeof(double));
                raise_on(validate_measurement(ms), "measurement");
                return ms;
            },
            py::arg("array"), py::arg("ny"), py::arg("nlam"), py::arg("d"))
        .def("__repr__", [](const CASSIMeasurement& ms) {
            return "Measurement(" + std::to_string(ms.nx) + "x" +
                   std::to_string(ms.wy) + ", nlam=" + std::to_string(ms.nlam) +
                   ", d=" + std::to_string(ms.d) + ")";
        });

    py::class_<SpectralResponse>(m, "SpectralResponse")
        .def_readonly("nlam", &SpectralResponse::nlam)
        .def_readonly("normalized", &SpectralResponse::normalized)
        .def_property_readonly("array",
                               [](const SpectralResponse& r) {
                                   py::array_t<double> a(
                                       {size_t(3), size_t(r.nlam)});
                                   std::memcpy(a.mutable_data(), r.curves.data(),
                                               r.curves.size() * sizeof(double));
                                   return a;
                               })
        .def_static(
            "from_array",
            [](const DArray& a, bool normalized) {
                if (a.ndim() != 2 || a.shape(0) != 3)
                    throw Error("shape", "response array must be (3, nlam)");
                SpectralResponse r;
                r.nlam = uint32_t(a.shape(1));
                r.curves.assign(a.data(), a.data() + 3 * r.nlam);
                r.normalized = normalized;
                raise_on(validate_response(r), "response");
                return r;
            },
            py::arg("array"), py::arg("normalized") = false)
        .def("__repr__", [](const SpectralResponse& r) {
            return "SpectralResponse(nlam=" + std::to_string(r.nlam) + ")";
        });

    py::class_<ModelParams>(m, "ModelParams")
        .def("names", &ModelParams::names)
        .def("param_count", &ModelParams::param_count)
        .def("has", &ModelParams::has)
        .def("__getitem__",
             [](const ModelParams& p, const std::string& name) {
                 const ParamEntry& e = p.entry(name);
                 std::vector<size_t> shape(e.shape.begin(), e.shape.end());
                 py::array_t<double> a(shape);
                 std::memcpy(a.mutable_data(), e.value.data(),
                             e.value.size() * sizeof(double));
                 return a;
             })
        .def("__repr__", [](const ModelParams& p) {
            return "ModelParams(" + std::to_string(p.entry_count()) +
                   " entries, " + std::to_string(p.param_count()) + " scalars)";
        });

    py::class_<ReconConfig>(m, "ReconConfig")
        .def(py::init<>())
        .def_readwrite("stages", &ReconConfig::stages)
        .def_readwrite("tv_weight", &ReconConfig::tv_weight)
        .def_readwrite("tv_iters", &ReconConfig::tv_iters)
        .def_readwrite("step_size", &ReconConfig::step_size)
        .def_readwrite("rgb_beta", &ReconConfig::rgb_beta)
        .def_readwrite("use_noise_estimate", &ReconConfig::use_noise_estimate)
        .def_readwrite("use_rgb", &ReconConfig::use_rgb);

    py::class_<NetConfig>(m, "NetConfig")
        .def(py::init<>())
        .def_readwrite("stages", &NetConfig::stages)
        .def_readwrite("embed_dim", &NetConfig::embed_dim)
        .def_readwrite("heads", &NetConfig::heads)
        .def_readwrite("window", &NetConfig::window)
        .def_readwrite("with_rgb", &NetConfig::with_rgb)
        .def_readwrite("with_cross", &NetConfig::with_cross)
        .def_readwrite("with_noise_estimator", &NetConfig::with_noise_estimator)
        .def_readwrite("xi", &NetConfig::xi);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("beta1", &TrainConfig::beta1)
        .def_readwrite("beta2", &TrainConfig::beta2)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("halve_every", &TrainConfig::halve_every)
        .def_readwrite("batch", &TrainConfig::batch)
        .def_readwrite("seed", &TrainConfig::seed);

    // ---- scenes and responses ----

    m.def(
        "synth_scene",
        [](uint32_t nx, uint32_t ny, uint32_t nlam, uint32_t blobs,
           uint64_t seed, double smoothness) {
            return cube_to_array(
                synth_scene(SceneSpec{nx, ny, nlam, blobs, seed, smoothness}));
        },
        py::arg("nx"), py::arg("ny"), py::arg("nlam"), py::arg("blobs") = 4,
        py::arg("seed") = 0, py::arg("smoothness") = 1.0,
        "deterministic gaussian-blob scene, values in [0,1]");
    m.def("default_spectral_response", &default_spectral_response,
          py::arg("nlam"), "broad overlapping rgb curves, each summing to 1");
    m.def("partition_response", &partition_response, py::arg("nlam"),
          "curves summing to 1 at every channel (exact energy split)");

    // ---- masks ----

    m.def("template_mask", &template_mask, py::arg("nx"), py::arg("ny"),
          py::arg("open_ratio"), py::arg("seed"));
    m.def("random_mask", &random_mask, py::arg("nx"), py::arg("ny"),
          py::arg("seed"));
    m.def("normal_mask", &normal_mask, py::arg("nx"), py::arg("ny"),
          py::arg("seed"));
    m.def("mask_stats", [](const CodedMask& mk) {
        MaskStats s = mask_stats(mk);
        py::dict d;
        d["open_ratio"] = s.open_ratio;
        d["row_open_variance"] = s.row_open_variance;
        return d;
    });

    // ---- forward optical model ----

    m.def(
        "rgb_project",
        [](const DArray& cube, const SpectralResponse& resp, double sigma,
           uint64_t seed) {
            return rgb_to_array(
                rgb_project(cube_from_array(cube), resp, NoiseSpec{sigma, seed}));
        },
        py::arg("cube"), py::arg("response"), py::arg("sigma") = 0.0,
        py::arg("seed") = 0,
        "half-flux rgb camera image (3, nx, ny) of a cube");
    m.def(
        "cassi_forward",
        [](const DArray& cube, const CodedMask& mk, uint32_t d, double sigma,
           uint64_t seed) {
            return cassi_forward(cube_from_array(cube), mk, d,
                                 NoiseSpec{sigma, seed});
        },
        py::arg("cube"), py::arg("mask"), py::arg("d"), py::arg("sigma") = 0.0,
        py::arg("seed") = 0,
        "mask, shear by d per channel, integrate on the coded detector");
    m.def(
        "cassi_adjoint",
        [](const CASSIMeasurement& ms, const CodedMask& mk) {
            return cube_to_array(cassi_adjoint(ms, mk, ms.d));
        },
        py::arg("measurement"), py::arg("mask"),
        "exact transpose of the noiseless forward");
    m.def(
        "dual_measure",
        [](const DArray& cube, const CodedMask& mk, const SpectralResponse& resp,
           uint32_t d, double sigma, uint64_t seed) {
            DualMeasurement dm = dual_measure(cube_from_array(cube), mk, resp, d,
                                              NoiseSpec{sigma, seed});
            return py::make_tuple(rgb_to_array(dm.rgb), dm.cassi);
        },
        py::arg("cube"), py::arg("mask"), py::arg("response"), py::arg("d"),
        py::arg("sigma") = 0.0, py::arg("seed") = 0,
        "both cameras at once with independent noise streams; returns (rgb, measurement)");
    m.def(
        "dense_operator",
        [](const CodedMask& mk, uint32_t d, uint32_t nlam) {
            std::vector<double> flat = dense_operator(mk, d, mk.nx, mk.ny, nlam);
            const size_t rows = size_t(mk.nx) * (mk.ny + d * (nlam - 1));
            const size_t cols = size_t(mk.nx) * mk.ny * nlam;
            py::array_t<double> a({rows, cols});
            std::memcpy(a.mutable_data(), flat.data(), flat.size() * sizeof(double));
            return a;
        },
        py::arg("mask"), py::arg("d"), py::arg("nlam"),
        "the coded arm as an explicit matrix; small instances only");

    // ---- estimation ----

    m.def(
        "backproject_rgb",
        [](const DArray& rgb, const SpectralResponse& resp) {
            return cube_to_array(backproject_rgb(rgb_from_array(rgb), resp));
        },
        py::arg("rgb"), py::arg("response"),
        "per-pixel smoothness-regularized spectral lift of the rgb image");
    m.def(
        "backproject_cassi",
        [](const CASSIMeasurement& ms, const CodedMask& mk) {
            return cube_to_array(backproject_cassi(ms, mk, ms.d));
        },
        py::arg("measurement"), py::arg("mask"),
        "diagonal-normalized adjoint of the coded arm");
    m.def(
        "rgb_noise_sigma",
        [](const DArray& rgb) { return rgb_noise_sigma(rgb_from_array(rgb)); },
        py::arg("rgb"), "robust noise level read off the uncoded arm");
    m.def(
        "estimate_noise",
        [](const CASSIMeasurement& ms, const DArray& rgb, const CodedMask& mk,
           const SpectralResponse& resp) {
            return noisemap_to_array(
                estimate_noise_analytic(ms, rgb_from_array(rgb), mk, resp, ms.d));
        },
        py::arg("measurement"), py::arg("rgb"), py::arg("mask"),
        py::arg("response"),
        "closed-form per-voxel noise estimate from the two-arm imbalance");

    // ---- reconstruction ----

    m.def(
        "tv_denoise",
        [](const DArray& cube, double tv_weight, int tv_iters) {
            return cube_to_array(
                tv_denoise(cube_from_array(cube), tv_weight, tv_iters));
        },
        py::arg("cube"), py::arg("tv_weight"), py::arg("tv_iters") = 12);
    m.def("default_step_size", &default_step_size, py::arg("mask"), py::arg("d"),
          py::arg("nlam"));
    m.def(
        "reconstruct_classical",
        [](const CASSIMeasurement& ms, const DArray& rgb, const CodedMask& mk,
           const SpectralResponse& resp, const ReconConfig& cfg) {
            return cube_to_array(
                reconstruct_classical(ms, rgb_from_array(rgb), mk, resp, ms.d, cfg));
        },
        py::arg("measurement"), py::arg("rgb"), py::arg("mask"),
        py::arg("response"), py::arg("config") = ReconConfig{},
        "iterative residual back-projection with tv smoothing");
    m.def(
        "classical_stage",
        [](const DArray& x, const CASSIMeasurement& ms, const DArray& rgb,
           const DArray& noise_map, const CodedMask& mk,
           const SpectralResponse& resp, const ReconConfig& cfg) {
            return cube_to_array(classical_stage(
                cube_from_array(x), ms, rgb_from_array(rgb),
                noisemap_from_array(noise_map), mk, resp, ms.d, cfg));
        },
        py::arg("x"), py::arg("measurement"), py::arg("rgb"),
        py::arg("noise_map"), py::arg("mask"), py::arg("response"),
        py::arg("config") = ReconConfig{}, "one refinement of the classical loop");
    m.def(
        "dmdc_forward",
        [](const CASSIMeasurement& ms, const DArray& rgb, const CodedMask& mk,
           ModelParams& p, const NetConfig& cfg, const SpectralResponse& resp) {
            return cube_to_array(
                dmdc_forward(ms, rgb_from_array(rgb), mk, p, cfg, resp));
        },
        py::arg("measurement"), py::arg("rgb"), py::arg("mask"),
        py::arg("params"), py::arg("config"), py::arg("response"),
        "learned unrolled reconstruction with the given weights");
    m.def("init_dmdc_params", &init_dmdc_params, py::arg("config"),
          py::arg("nlam"), py::arg("seed"));

    // ---- training ----

    m.def(
        "train_dmdc",
        [](const std::vector<DArray>& scenes, const std::string& policy,
           const CodedMask& templ, const NetConfig& ncfg, const TrainConfig& tcfg,
           uint32_t d, double sigma, const SpectralResponse& resp,
           uint32_t mask_channels, double mask_threshold) {
            TrainResult r = train_dmdc(cubes_from_list(scenes),
                                       mask_policy_from_name(policy), templ,
                                       ncfg, tcfg, d, sigma, resp, mask_channels,
                                       mask_threshold);
            return py::make_tuple(std::move(r.params), r.epoch_loss, r.epoch_lr);
        },
        py::arg("scenes"), py::arg("policy"), py::arg("mask_template"),
        py::arg("net_config"), py::arg("train_config"), py::arg("d"),
        py::arg("sigma"), py::arg("response"), py::arg("mask_channels") = 8,
        py::arg("mask_threshold") = 0.5,
        "adam training; returns (params, epoch_loss, epoch_lr)");

    // ---- metrics ----

    m.def("psnr", [](const DArray& a, const DArray& b) {
        return psnr(cube_from_array(a), cube_from_array(b));
    });
    m.def("ssim", [](const DArray& a, const DArray& b) {
        return ssim(cube_from_array(a), cube_from_array(b));
    });
    m.def("mrae", [](const DArray& pred, const DArray& truth) {
        return mrae(cube_from_array(pred), cube_from_array(truth));
    });
    m.def("rmse", [](const DArray& a, const DArray& b) {
        return rmse(cube_from_array(a), cube_from_array(b));
    });
    m.def(
        "evaluate",
        [](const DArray& pred, const DArray& truth) {
            MetricReport r = evaluate(cube_from_array(pred), cube_from_array(truth));
            py::dict d;
            d["psnr_db"] = r.psnr_db;
            d["ssim"] = r.ssim;
            d["mrae"] = r.mrae;
            d["rmse"] = r.rmse;
            return d;
        },
        py::arg("pred"), py::arg("truth"));
    m.def(
        "spectral_curve",
        [](const DArray& cube, uint32_t x0, uint32_t y0, uint32_t x1, uint32_t y1) {
            return spectral_curve(cube_from_array(cube), x0, y0, x1, y1);
        },
        py::arg("cube"), py::arg("x0"), py::arg("y0"), py::arg("x1"),
        py::arg("y1"), "per-channel mean over [x0,x1) x [y0,y1)");

    // ---- file formats ----

    m.def("save_cube",
          [](const DArray& cube, const std::string& path) {
              save_cube(cube_from_array(cube), path);
          },
          py::arg("cube"), py::arg("path"));
    m.def("load_cube",
          [](const std::string& path) { return cube_to_array(load_cube(path)); },
          py::arg("path"));
    m.def("save_rgb",
          [](const DArray& rgb, const std::string& path) {
              save_rgb(rgb_from_array(rgb), path);
          },
          py::arg("rgb"), py::arg("path"));
    m.def("load_rgb",
          [](const std::string& path) { return rgb_to_array(load_rgb(path)); },
          py::arg("path"));
    m.def("save_measurement", &save_measurement, py::arg("measurement"),
          py::arg("path"));
    m.def("load_measurement", &load_measurement, py::arg("path"));
    m.def("save_mask", &save_mask, py::arg("mask"), py::arg("path"));
    m.def("load_mask", &load_mask, py::arg("path"));
    m.def("save_params", &save_params, py::arg("path"), py::arg("params"));
    m.def("load_params", &load_params, py::arg("path"));
}
