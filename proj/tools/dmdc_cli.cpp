// Command-line front end: synthesize scenes, simulate the two cameras,
// reconstruct, train, benchmark, and score. Every failure prints a single
// "error: <code>: <message>" line to stderr and exits nonzero.
#include <algorithm>
#include <atomic>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "dmdc/bench.hpp"
#include "dmdc/classical.hpp"
#include "dmdc/common.hpp"
#include "dmdc/estimation.hpp"
#include "dmdc/io.hpp"
#include "dmdc/metrics.hpp"
#include "dmdc/net.hpp"
#include "dmdc/optics.hpp"
#include "dmdc/train.hpp"

namespace fs = std::filesystem;
using namespace dmdc;

namespace {

// ---- small helpers -------------------------------------------------------

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

std::vector<uint64_t> parse_seed_list(const std::string& text) {
    std::vector<uint64_t> out;
    const auto dots = text.find("..");
    try {
        if (dots != std::string::npos) {
            const uint64_t a = std::stoull(text.substr(0, dots));
            const uint64_t b = std::stoull(text.substr(dots + 2));
            require(a <= b, "param", "seed range start exceeds end: " + text);
            require(b - a < 100000, "param", "seed range too large: " + text);
            for (uint64_t s = a; s <= b; ++s) out.push_back(s);
        } else {
            size_t pos = 0;
            while (pos < text.size()) {
                size_t comma = text.find(',', pos);
                if (comma == std::string::npos) comma = text.size();
                out.push_back(std::stoull(text.substr(pos, comma - pos)));
                pos = comma + 1;
            }
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        fail("param", "cannot parse seed list " + text +
                          " (expected a..b or comma-separated integers)");
    }
    require(!out.empty(), "param", "empty seed list");
    return out;
}

void parse_dims(const std::string& text, uint32_t& nx, uint32_t& ny, uint32_t& nl) {
    unsigned a = 0, b = 0, c = 0;
    char extra = 0;
    if (std::sscanf(text.c_str(), "%u,%u,%u%c", &a, &b, &c, &extra) != 3)
        fail("param", "cannot parse dims " + text + " (expected NX,NY,NL)");
    nx = a;
    ny = b;
    nl = c;
}

// runs fn(0..n-1) on `threads` workers; any failure rethrows after join
template <class Fn>
void run_indexed(size_t n, unsigned threads, Fn fn) {
    if (threads <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    const unsigned workers = std::min<size_t>(threads, n);
    for (unsigned t = 0; t < workers; ++t)
        pool.emplace_back([&] {
            while (true) {
                const size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(mu);
                    if (!err) err = std::current_exception();
                    return;
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

std::vector<fs::path> list_suffix_sorted(const std::string& dir,
                                         const std::string& suffix,
                                         const std::string& exclude = "") {
    require(fs::is_directory(dir), "io", "not a directory: " + dir);
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string name = e.path().filename().string();
        if (name.size() < suffix.size() ||
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
            continue;
        if (!exclude.empty() && name.size() >= exclude.size() &&
            name.compare(name.size() - exclude.size(), exclude.size(), exclude) == 0)
            continue;
        out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    require(!out.empty(), "io", "no *" + suffix + " files in " + dir);
    return out;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec && fs::is_directory(dir), "io", "cannot create directory " + dir);
}

// ---- per-subcommand option bags ------------------------------------------

struct SynthOpts {
    std::string dims = "32,32,8";
    uint32_t blobs = 4;
    double smooth = 1.0;
    std::string seeds = "0..9";
    unsigned threads = 1;
    std::string out;
};

struct SimOpts {
    std::string scenes;
    std::string mask = "manual";
    std::string weights;
    uint32_t d = 2;
    double sigma = 0.0;
    double open_ratio = 0.5;
    uint64_t mask_seed = 11;
    uint64_t seed = 0;
    unsigned threads = 1;
    std::string out;
};

struct ReconOpts {
    std::string meas;
    std::string method = "classical";
    std::string weights;
    std::string truth;
    int stages = 30;
    double tv_weight = 0.02;
    int tv_iters = 12;
    double step = 0.0;
    double beta = 0.5;
    bool no_rgb = false;
    bool ne = false;
    uint32_t embed = 16, heads = 2, window = 8;
    bool no_cross = false;
    double xi = 0.5;
    unsigned threads = 1;
    std::string out;
};

struct TrainOpts {
    std::string scenes;
    std::string mask = "manual";
    uint32_t epochs = 50, halve_every = 50, batch = 4;
    double lr = 4e-4, beta1 = 0.9, beta2 = 0.999;
    uint32_t stages = 1, embed = 16, heads = 2, window = 8;
    bool no_rgb = false, no_cross = false, ne = false;
    double xi = 0.5;
    double sigma = 0.0;
    uint32_t d = 2;
    uint64_t seed = 0;
    double open_ratio = 0.5;
    uint64_t mask_seed = 11;
    uint32_t mask_channels = 8;
    double mask_threshold = 0.5;
    std::string loss_csv;
    std::string out;
};

struct BenchOpts {
    std::string dims = "32,32,8";
    uint32_t blobs = 4;
    double smooth = 1.0;
    std::string seeds = "1..10";
    std::string masks = "manual,rand,normal";
    std::string method = "classical";
    std::string weights;
    int stages = 30;
    uint32_t d = 1;
    double sigma = 0.0;
    uint64_t noise_seed = 7;
    double open_ratio = 0.5;
    uint64_t mask_seed = 11;
    double tv_weight = 0.02;
    int tv_iters = 12;
    double step = 0.0;
    double beta = 0.5;
    bool no_rgb = false, no_cross = false, ne = false;
    uint32_t embed = 16, heads = 2, window = 8;
    bool no_fps = false;
    std::string out;
};

struct MetricOpts {
    std::string pred, truth;
    std::string region;
    std::string curve_out;
};

// ---- subcommand bodies ---------------------------------------------------

void run_synth(const SynthOpts& o) {
    SceneSpec spec;
    parse_dims(o.dims, spec.nx, spec.ny, spec.nlam);
    spec.blob_count = o.blobs;
    spec.spectral_smoothness = o.smooth;
    const auto seeds = parse_seed_list(o.seeds);
    ensure_dir(o.out);
    std::vector<std::string> lines(seeds.size());
    run_indexed(seeds.size(), o.threads, [&](size_t i) {
        SceneSpec s = spec;
        s.seed = seeds[i];
        const HyperspectralCube cube = synth_scene(s);
        const std::string path =
            (fs::path(o.out) / ("scene_" + std::to_string(seeds[i]) + ".hsc")).string();
        save_cube(cube, path);
        lines[i] = path;
    });
    for (const auto& l : lines) std::cout << l << "\n";
}

void run_simulate(const SimOpts& o) {
    const MaskPolicy policy = mask_policy_from_name(o.mask);
    if (policy == MaskPolicy::Dynamic)
        require(!o.weights.empty(), "param", "dynamic mask requires --weights");
    ModelParams params;
    if (!o.weights.empty()) params = load_params(o.weights);

    const auto files = list_suffix_sorted(o.scenes, ".hsc", ".recon.hsc");
    ensure_dir(o.out);
    std::mutex params_mu;  // dynamic_mask builds a tape over shared weights
    run_indexed(files.size(), o.threads, [&](size_t i) {
        const HyperspectralCube cube = load_cube(files[i].string());
        const SpectralResponse resp = default_spectral_response(cube.nlam);
        const CodedMask templ =
            template_mask(cube.nx, cube.ny, o.open_ratio, o.mask_seed);
        const uint64_t nbase = derive_seed(o.seed, i);

        CodedMask mask;
        RGBImage yr;
        CASSIMeasurement yc;
        switch (policy) {
            case MaskPolicy::Manual:
                mask = templ;
                break;
            case MaskPolicy::Random:
                mask = random_mask(cube.nx, cube.ny, derive_seed(o.mask_seed, i));
                break;
            case MaskPolicy::Normal:
                mask = normal_mask(cube.nx, cube.ny, derive_seed(o.mask_seed, i));
                break;
            case MaskPolicy::Dynamic:
                break;  // handled below, needs the rgb image first
        }
        if (policy == MaskPolicy::Dynamic) {
            yr = rgb_project(cube, resp, NoiseSpec{o.sigma, derive_seed(nbase, 'R')});
            {
                std::lock_guard<std::mutex> lk(params_mu);
                mask = dynamic_mask(yr, templ, params);
            }
            yc = cassi_forward(cube, mask, o.d,
                               NoiseSpec{o.sigma, derive_seed(nbase, 'C')});
        } else {
            DualMeasurement dual =
                dual_measure(cube, mask, resp, o.d, NoiseSpec{o.sigma, nbase});
            yr = std::move(dual.rgb);
            yc = std::move(dual.cassi);
        }

        std::string stem = files[i].filename().string();
        stem.resize(stem.size() - 4);  // drop ".hsc"
        const fs::path base = fs::path(o.out) / stem;
        save_rgb(yr, base.string() + ".rgb.hsr");
        save_measurement(yc, base.string() + ".meas.hsm");
        save_mask(mask, base.string() + ".mask.hsk");
    });
    std::cout << "simulated " << files.size() << " scenes\n";
}

// A checkpoint holds exactly the entries its training configuration created,
// so a flag mismatch at load time would otherwise surface as a bare "unknown
// parameter" from deep inside the net. Diff against a reference set up front
// and say which flag to fix.
void require_weights_for(const ModelParams& have, const NetConfig& ncfg,
                         uint32_t nlam) {
    const ModelParams want = init_dmdc_params(ncfg, nlam, 0);
    for (size_t i = 0; i < want.entry_count(); ++i) {
        const ParamEntry& e = want.entry_at(i);
        if (!have.has(e.name)) {
            std::string hint = "the network flags must match the training run";
            if (e.name.starts_with("sas."))
                hint = "the checkpoint was trained with --stages 1; pass --stages 1";
            else if (e.name.starts_with("ne."))
                hint = "the checkpoint was trained without --ne; drop --ne";
            else if (e.name.find("cross") != std::string::npos ||
                     e.name.starts_with("das.fuse"))
                hint = "the checkpoint was trained with --no-cross; pass --no-cross";
            else if (e.name.starts_with("rgbinit") ||
                     e.name.starts_with("das.embed_r") ||
                     e.name.starts_with("das.r."))
                hint = "the checkpoint was trained with --no-rgb; pass --no-rgb";
            fail("param", "checkpoint lacks " + e.name + "; " + hint);
        }
        require(have.entry(e.name).shape == e.shape, "param",
                "checkpoint entry " + e.name +
                    " has a different shape; --embed, --heads, --window, and "
                    "the scene channel count must match the training run");
    }
}

void run_reconstruct(const ReconOpts& o) {
    require(o.method == "classical" || o.method == "dmdc", "param",
            "unknown method " + o.method + " (expected classical or dmdc)");
    ModelParams params;
    if (o.method == "dmdc") {
        require(!o.weights.empty(), "param",
                "method dmdc requires --weights with trained parameters");
        params = load_params(o.weights);
    }
    NetConfig ncfg;
    ncfg.stages = uint32_t(std::max(1, o.stages));
    ncfg.embed_dim = o.embed;
    ncfg.heads = o.heads;
    ncfg.window = o.window;
    ncfg.with_rgb = !o.no_rgb;
    ncfg.with_cross = !o.no_cross;
    ncfg.with_noise_estimator = o.ne;
    ncfg.xi = o.xi;
    ReconConfig rcfg;
    rcfg.stages = o.stages;
    rcfg.tv_weight = o.tv_weight;
    rcfg.tv_iters = o.tv_iters;
    rcfg.step_size = o.step;
    rcfg.rgb_beta = o.beta;
    rcfg.use_noise_estimate = o.ne;
    rcfg.use_rgb = !o.no_rgb;

    const std::string suffix = ".meas.hsm";
    const auto files = list_suffix_sorted(o.meas, suffix);
    ensure_dir(o.out);
    std::vector<std::string> lines(files.size());
    std::mutex params_mu;
    run_indexed(files.size(), o.threads, [&](size_t i) {
        std::string stem = files[i].filename().string();
        stem.resize(stem.size() - suffix.size());
        const fs::path dir = files[i].parent_path();
        const CASSIMeasurement yc = load_measurement(files[i].string());
        const CodedMask mask = load_mask((dir / (stem + ".mask.hsk")).string());
        const RGBImage yr = load_rgb((dir / (stem + ".rgb.hsr")).string());
        const SpectralResponse resp = default_spectral_response(yc.nlam);

        HyperspectralCube rec;
        if (o.method == "classical") {
            rec = reconstruct_classical(yc, yr, mask, resp, yc.d, rcfg);
        } else {
            std::lock_guard<std::mutex> lk(params_mu);
            rec = dmdc_forward(yc, yr, mask, params, ncfg, resp);
        }
        save_cube(rec, (fs::path(o.out) / (stem + ".recon.hsc")).string());

        if (!o.truth.empty()) {
            const fs::path tp = fs::path(o.truth) / (stem + ".hsc");
            require(fs::is_regular_file(tp), "io",
                    "missing reference cube " + tp.string());
            const MetricReport r = evaluate(rec, load_cube(tp.string()));
            lines[i] = fmt("%s psnr_db=%.10g ssim=%.10g mrae=%.10g rmse=%.10g",
                           stem.c_str(), r.psnr_db, r.ssim, r.mrae, r.rmse);
        }
    });
    for (const auto& l : lines)
        if (!l.empty()) std::cout << l << "\n";
    std::cout << "reconstructed " << files.size() << " measurements\n";
}

void run_train(const TrainOpts& o) {
    const MaskPolicy policy = mask_policy_from_name(o.mask);
    const auto files = list_suffix_sorted(o.scenes, ".hsc", ".recon.hsc");
    std::vector<HyperspectralCube> scenes;
    scenes.reserve(files.size());
    for (const auto& f : files) scenes.push_back(load_cube(f.string()));

    NetConfig ncfg;
    ncfg.stages = o.stages;
    ncfg.embed_dim = o.embed;
    ncfg.heads = o.heads;
    ncfg.window = o.window;
    ncfg.with_rgb = !o.no_rgb;
    ncfg.with_cross = !o.no_cross;
    ncfg.with_noise_estimator = o.ne;
    ncfg.xi = o.xi;
    TrainConfig tcfg;
    tcfg.lr = o.lr;
    tcfg.beta1 = o.beta1;
    tcfg.beta2 = o.beta2;
    tcfg.epochs = o.epochs;
    tcfg.halve_every = o.halve_every;
    tcfg.batch = o.batch;
    tcfg.seed = o.seed;

    const CodedMask templ =
        template_mask(scenes[0].nx, scenes[0].ny, o.open_ratio, o.mask_seed);
    const SpectralResponse resp = default_spectral_response(scenes[0].nlam);
    TrainResult res = train_dmdc(scenes, policy, templ, ncfg, tcfg, o.d, o.sigma,
                                 resp, o.mask_channels, o.mask_threshold);
    save_params(o.out, res.params);
    if (!o.loss_csv.empty()) {
        std::string csv = "epoch,loss,lr\n";
        for (size_t e = 0; e < res.epoch_loss.size(); ++e)
            csv += fmt("%zu,%.10g,%.10g\n", e + 1, res.epoch_loss[e], res.epoch_lr[e]);
        write_file_atomic(o.loss_csv, csv);
    }
    std::cout << fmt("trained %u epochs, final loss %.10g\n", o.epochs,
                     res.epoch_loss.empty() ? 0.0 : res.epoch_loss.back());
}

void run_bench(const BenchOpts& o) {
    BenchConfig cfg;
    parse_dims(o.dims, cfg.nx, cfg.ny, cfg.nlam);
    cfg.blob_count = o.blobs;
    cfg.spectral_smoothness = o.smooth;
    cfg.scene_seeds = parse_seed_list(o.seeds);
    size_t pos = 0;
    while (pos < o.masks.size()) {
        size_t comma = o.masks.find(',', pos);
        if (comma == std::string::npos) comma = o.masks.size();
        cfg.mask_types.push_back(o.masks.substr(pos, comma - pos));
        pos = comma + 1;
    }
    cfg.method = o.method;
    cfg.d = o.d;
    cfg.sigma = o.sigma;
    cfg.noise_seed = o.noise_seed;
    cfg.open_ratio = o.open_ratio;
    cfg.mask_seed = o.mask_seed;
    cfg.rcfg.stages = o.stages;
    cfg.rcfg.tv_weight = o.tv_weight;
    cfg.rcfg.tv_iters = o.tv_iters;
    cfg.rcfg.step_size = o.step;
    cfg.rcfg.rgb_beta = o.beta;
    cfg.rcfg.use_noise_estimate = o.ne;
    cfg.rcfg.use_rgb = !o.no_rgb;
    cfg.ncfg.stages = uint32_t(std::max(1, o.stages));
    cfg.ncfg.embed_dim = o.embed;
    cfg.ncfg.heads = o.heads;
    cfg.ncfg.window = o.window;
    cfg.ncfg.with_rgb = !o.no_rgb;
    cfg.ncfg.with_cross = !o.no_cross;
    cfg.ncfg.with_noise_estimator = o.ne;
    cfg.fps_probe = !o.no_fps;

    ModelParams params;
    bool has_params = false;
    if (!o.weights.empty()) {
        params = load_params(o.weights);
        has_params = true;
    }
    const bool wants_dynamic =
        std::find(cfg.mask_types.begin(), cfg.mask_types.end(), "dynamic") !=
        cfg.mask_types.end();
    if (wants_dynamic)
        require(has_params, "param", "dynamic mask requires --weights");
    if (cfg.method == "dmdc")
        require(has_params, "param",
                "method dmdc requires --weights with trained parameters");
    if (has_params) cfg.model = &params;

    const BenchResult res = run_benchmark(cfg);
    write_file_atomic(o.out, bench_csv(res));
    if (cfg.fps_probe) std::cout << fmt("fps %.3f\n", res.fps);
    std::cout << "wrote " << o.out << "\n";
}

void run_metrics(const MetricOpts& o) {
    const HyperspectralCube pred = load_cube(o.pred);
    const HyperspectralCube truth = load_cube(o.truth);
    const MetricReport r = evaluate(pred, truth);
    std::cout << fmt("psnr_db=%.10g ssim=%.10g mrae=%.10g rmse=%.10g\n", r.psnr_db,
                     r.ssim, r.mrae, r.rmse);
    if (!o.curve_out.empty()) {
        uint32_t x0 = 0, y0 = 0, x1 = pred.nx, y1 = pred.ny;
        if (!o.region.empty()) {
            unsigned a, b, c, d;
            char extra = 0;
            if (std::sscanf(o.region.c_str(), "%u,%u,%u,%u%c", &a, &b, &c, &d,
                            &extra) != 4)
                fail("param", "cannot parse region " + o.region +
                                  " (expected x0,y0,x1,y1)");
            x0 = a; y0 = b; x1 = c; y1 = d;
        }
        write_file_atomic(o.curve_out,
                          spectral_curve_csv(spectral_curve(pred, x0, y0, x1, y1)));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dual-camera coded-aperture spectral imaging toolkit"};
    app.require_subcommand(1);

    SynthOpts so;
    auto* synth = app.add_subcommand("synth", "synthesize ground-truth cubes");
    synth->set_config("--config");
    synth->add_option("--dims", so.dims, "cube dims NX,NY,NL");
    synth->add_option("--blobs", so.blobs, "gaussian blob count");
    synth->add_option("--smooth", so.smooth, "spectral smoothness factor");
    synth->add_option("--seeds", so.seeds, "seed list: a..b or s1,s2,...");
    synth->add_option("--threads", so.threads, "worker threads");
    synth->add_option("--out", so.out, "output directory")->required();
    synth->callback([&] { run_synth(so); });

    SimOpts mo;
    auto* sim = app.add_subcommand("simulate", "render both camera measurements");
    sim->set_config("--config");
    sim->add_option("--scenes", mo.scenes, "directory of *.hsc cubes")->required();
    sim->add_option("--mask", mo.mask, "manual, rand, normal, or dynamic");
    sim->add_option("--weights", mo.weights, "checkpoint with the mask head");
    sim->add_option("--d", mo.d, "dispersion step in pixels per channel");
    sim->add_option("--sigma", mo.sigma, "gaussian noise level");
    sim->add_option("--open-ratio", mo.open_ratio, "template mask open fraction");
    sim->add_option("--mask-seed", mo.mask_seed, "mask pattern seed");
    sim->add_option("--seed", mo.seed, "noise seed");
    sim->add_option("--threads", mo.threads, "worker threads");
    sim->add_option("--out", mo.out, "output directory")->required();
    sim->callback([&] { run_simulate(mo); });

    ReconOpts ro;
    auto* rec = app.add_subcommand("reconstruct", "recover cubes from measurements");
    rec->set_config("--config");
    rec->add_option("--meas", ro.meas, "directory of *.meas.hsm files")->required();
    rec->add_option("--method", ro.method, "classical or dmdc");
    rec->add_option("--weights", ro.weights, "trained checkpoint (dmdc)");
    rec->add_option("--truth", ro.truth, "directory with reference *.hsc cubes");
    rec->add_option("--stages", ro.stages, "refinement stages");
    rec->add_option("--tv-weight", ro.tv_weight, "tv denoiser weight");
    rec->add_option("--tv-iters", ro.tv_iters, "tv denoiser iterations");
    rec->add_option("--step", ro.step, "gradient step size (0 = auto)");
    rec->add_option("--beta", ro.beta, "rgb anchor strength");
    rec->add_flag("--no-rgb", ro.no_rgb, "ignore the rgb camera");
    rec->add_flag("--ne", ro.ne, "enable noise estimation");
    rec->add_option("--embed", ro.embed, "network embed dim");
    rec->add_option("--heads", ro.heads, "attention heads");
    rec->add_option("--window", ro.window, "spatial attention window");
    rec->add_flag("--no-cross", ro.no_cross, "disable cross attention");
    rec->add_option("--xi", ro.xi, "consistency loss weight");
    rec->add_option("--threads", ro.threads, "worker threads");
    rec->add_option("--out", ro.out, "output directory")->required();
    rec->callback([&] { run_reconstruct(ro); });

    TrainOpts to;
    auto* tr = app.add_subcommand("train", "train the reconstruction network");
    tr->set_config("--config");
    tr->add_option("--scenes", to.scenes, "directory of training cubes")->required();
    tr->add_option("--mask", to.mask, "mask policy: manual, rand, normal, dynamic");
    tr->add_option("--epochs", to.epochs, "training epochs");
    tr->add_option("--halve-every", to.halve_every, "epochs between lr halvings");
    tr->add_option("--batch", to.batch, "scenes per optimizer step");
    tr->add_option("--lr", to.lr, "initial learning rate");
    tr->add_option("--beta1", to.beta1, "adam beta1");
    tr->add_option("--beta2", to.beta2, "adam beta2");
    tr->add_option("--stages", to.stages, "unrolled stages");
    tr->add_option("--embed", to.embed, "embed dim");
    tr->add_option("--heads", to.heads, "attention heads");
    tr->add_option("--window", to.window, "spatial attention window");
    tr->add_flag("--no-rgb", to.no_rgb, "train without the rgb stream");
    tr->add_flag("--no-cross", to.no_cross, "train without cross attention");
    tr->add_flag("--ne", to.ne, "train with the learned noise head");
    tr->add_option("--xi", to.xi, "consistency loss weight");
    tr->add_option("--sigma", to.sigma, "measurement noise during training");
    tr->add_option("--d", to.d, "dispersion step");
    tr->add_option("--seed", to.seed, "training seed");
    tr->add_option("--open-ratio", to.open_ratio, "template mask open fraction");
    tr->add_option("--mask-seed", to.mask_seed, "template mask seed");
    tr->add_option("--mask-channels", to.mask_channels, "mask head width");
    tr->add_option("--mask-threshold", to.mask_threshold, "mask keep threshold");
    tr->add_option("--loss-csv", to.loss_csv, "write epoch,loss,lr trace here");
    tr->add_option("--out", to.out, "checkpoint output path")->required();
    tr->callback([&] { run_train(to); });

    BenchOpts bo;
    auto* be = app.add_subcommand("bench", "benchmark reconstruction quality");
    be->set_config("--config");
    be->add_option("--dims", bo.dims, "cube dims NX,NY,NL");
    be->add_option("--blobs", bo.blobs, "gaussian blob count");
    be->add_option("--smooth", bo.smooth, "spectral smoothness factor");
    be->add_option("--seeds", bo.seeds, "scene seeds: a..b or list");
    be->add_option("--masks", bo.masks, "comma list of mask types");
    be->add_option("--method", bo.method, "classical or dmdc");
    be->add_option("--weights", bo.weights, "trained checkpoint");
    be->add_option("--stages", bo.stages, "refinement stages");
    be->add_option("--d", bo.d, "dispersion step");
    be->add_option("--sigma", bo.sigma, "noise level");
    be->add_option("--noise-seed", bo.noise_seed, "noise seed");
    be->add_option("--open-ratio", bo.open_ratio, "template mask open fraction");
    be->add_option("--mask-seed", bo.mask_seed, "mask seed");
    be->add_option("--tv-weight", bo.tv_weight, "tv weight (classical)");
    be->add_option("--tv-iters", bo.tv_iters, "tv iterations (classical)");
    be->add_option("--step", bo.step, "step size (classical, 0 = auto)");
    be->add_option("--beta", bo.beta, "rgb anchor strength (classical)");
    be->add_flag("--no-rgb", bo.no_rgb, "disable the rgb path");
    be->add_flag("--no-cross", bo.no_cross, "disable cross attention (dmdc)");
    be->add_flag("--ne", bo.ne, "enable noise estimation");
    be->add_option("--embed", bo.embed, "embed dim (dmdc)");
    be->add_option("--heads", bo.heads, "attention heads (dmdc)");
    be->add_option("--window", bo.window, "spatial window (dmdc)");
    be->add_flag("--no-fps", bo.no_fps, "skip the fps probe");
    be->add_option("--out", bo.out, "benchmark csv path")->required();
    be->callback([&] { run_bench(bo); });

    MetricOpts eo;
    auto* me = app.add_subcommand("metrics", "score one cube against another");
    me->set_config("--config");
    me->add_option("--pred", eo.pred, "reconstructed cube")->required();
    me->add_option("--truth", eo.truth, "reference cube")->required();
    me->add_option("--region", eo.region, "curve region x0,y0,x1,y1");
    me->add_option("--curve-out", eo.curve_out, "write channel,value csv here");
    me->callback([&] { run_metrics(eo); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
