#include "dmdc/net.hpp"

#include <cmath>
#include <cstring>

#include "dmdc/common.hpp"
#include "dmdc/estimation.hpp"

namespace dmdc {

using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

constexpr uint32_t kGuideDim = 64;  // width of the RGB lift and the noise head

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Per-entry generator keyed by (seed, name): adding or removing other entries
// never changes this entry's initialization.
void fill_gauss(ParamEntry& e, uint64_t seed, double scale) {
    Rng rng(derive_seed(seed, fnv1a64(e.name)));
    for (double& v : e.value) v = scale * rng.gaussian();
}

void add_linear(ModelParams& p, const std::string& name, uint32_t out,
                uint32_t in, uint64_t seed, double scale = 0.02) {
    fill_gauss(p.add(name + ".w", {out, in}), seed, scale);
    p.add(name + ".b", {out});
}

void add_ln(ModelParams& p, const std::string& name, uint32_t c) {
    ParamEntry& g = p.add(name + ".g", {c});
    std::fill(g.value.begin(), g.value.end(), 1.0);
    p.add(name + ".b", {c});
}

void add_attn_core(ModelParams& p, const std::string& prefix, uint32_t c,
                   uint64_t seed) {
    fill_gauss(p.add(prefix + ".wq", {c, c}), seed, 0.02);
    fill_gauss(p.add(prefix + ".wk", {c, c}), seed, 0.02);
    fill_gauss(p.add(prefix + ".wv", {c, c}), seed, 0.02);
    fill_gauss(p.add(prefix + ".wo", {c, c}), seed, 0.02);
    p.add(prefix + ".bo", {c});
    add_ln(p, prefix + ".lnf", c);
    add_linear(p, prefix + ".ffn.1", 2 * c, c, seed);
    add_linear(p, prefix + ".ffn.2", c, 2 * c, seed);
}

void add_cross_params(ModelParams& p, const std::string& prefix, uint32_t c,
                      uint64_t seed) {
    add_ln(p, prefix + ".lnq", c);
    add_ln(p, prefix + ".lnkv", c);
    add_attn_core(p, prefix, c, seed);
}

void add_spatial_params(ModelParams& p, const std::string& prefix, uint32_t c,
                        uint64_t seed) {
    add_ln(p, prefix + ".ln", c);
    add_attn_core(p, prefix, c, seed);
}

Var lin1x1(Tape& t, ModelParams& p, const std::string& name, Var x) {
    Var w = t.param(p, name + ".w");
    Var b = t.param(p, name + ".b");
    return ad::add_bias_rows(ad::matmul(w, x), b);
}

Var ffn_block(Tape& t, ModelParams& p, const std::string& prefix, Var a) {
    Var h = ad::layer_norm_cols(a, t.param(p, prefix + ".lnf.g"),
                                t.param(p, prefix + ".lnf.b"));
    h = ad::gelu(lin1x1(t, p, prefix + ".ffn.1", h));
    h = lin1x1(t, p, prefix + ".ffn.2", h);
    return ad::add(a, h);
}

// multi-head attention core on already-normalized inputs; `spectral` selects
// channel tokens (scores over rows) vs pixel tokens (scores over columns)
Var attn_channel_tokens(Tape& t, ModelParams& p, const std::string& prefix,
                        Var qn, Var kn, uint32_t heads) {
    const uint32_t c = t.val(qn).dim(0);
    const uint32_t s = t.val(qn).dim(1);
    require(c % heads == 0, "shape", "embed dim must be divisible by heads");
    const uint32_t ch = c / heads;
    Var q = ad::matmul(t.param(p, prefix + ".wq"), qn);
    Var k = ad::matmul(t.param(p, prefix + ".wk"), kn);
    Var v = ad::matmul(t.param(p, prefix + ".wv"), kn);
    std::vector<Var> outs;
    for (uint32_t h = 0; h < heads; ++h) {
        Var qh = ad::slice_rows(q, h * ch, (h + 1) * ch);
        Var kh = ad::slice_rows(k, h * ch, (h + 1) * ch);
        Var vh = ad::slice_rows(v, h * ch, (h + 1) * ch);
        // Gram matrix of channel tokens; embeddings are whole spatial maps
        Var scores = ad::scale(ad::matmul_nt(qh, kh), 1.0 / std::sqrt(double(s)));
        Var attn = ad::softmax_rows(scores);
        outs.push_back(ad::matmul(attn, vh));
    }
    Var o = heads == 1 ? outs[0] : ad::concat_rows(outs);
    return ad::add_bias_rows(ad::matmul(t.param(p, prefix + ".wo"), o),
                             t.param(p, prefix + ".bo"));
}

}  // namespace

// ---- parameter construction ----------------------------------------------

ModelParams init_dmdc_params(const NetConfig& cfg, uint32_t nlam, uint64_t seed) {
    require(nlam >= 2, "param", "network needs nlam >= 2");
    require(cfg.embed_dim >= cfg.heads && cfg.embed_dim % cfg.heads == 0, "param",
            "embed_dim must be a positive multiple of heads");
    require(cfg.stages >= 1, "param", "stage count must be at least 1");
    const uint32_t c = cfg.embed_dim;
    ModelParams p;

    add_linear(p, "das.embed_c", c, nlam, seed);
    add_cross_params(p, "das.c.spec", c, seed);
    add_spatial_params(p, "das.c.spat", c, seed);
    add_linear(p, "das.head", nlam, c, seed, 0.0);  // zero: stage starts as identity
    if (cfg.with_rgb) {
        add_linear(p, "das.embed_r", c, nlam, seed);
        add_cross_params(p, "das.r.spec", c, seed);
        add_spatial_params(p, "das.r.spat", c, seed);
        add_linear(p, "rgbinit.1", kGuideDim, 3, seed);
        add_linear(p, "rgbinit.2", nlam, kGuideDim, seed);
        if (cfg.with_cross) {
            add_cross_params(p, "das.c.cross", c, seed);
            add_cross_params(p, "das.r.cross", c, seed);
            add_cross_params(p, "das.fuse", c, seed);
        }
    }
    if (cfg.stages >= 2) {
        add_linear(p, "sas.embed_c", c, nlam, seed);
        add_spatial_params(p, "sas.spat", c, seed);
        add_linear(p, "sas.head", nlam, c, seed, 0.0);
        if (cfg.with_rgb) {
            add_linear(p, "sas.embed_r", c, nlam, seed);
            if (cfg.with_cross) add_cross_params(p, "sas.cross", c, seed);
        }
    }
    if (cfg.with_noise_estimator) {
        add_linear(p, "ne.up", kGuideDim, nlam, seed);
        fill_gauss(p.add("ne.conv.w", {kGuideDim, kGuideDim, 3, 3}), seed, 0.02);
        p.add("ne.conv.b", {kGuideDim});
        add_linear(p, "ne.down", nlam, kGuideDim, seed);
        p.add("ne.tau", {1}).value[0] = 0.02;
        p.add("ne.eps", {1});
    }
    return p;
}

void add_mask_head_params(ModelParams& p, uint32_t channels, double threshold,
                          uint64_t seed) {
    require(channels >= 1, "param", "mask head needs at least one channel");
    require(threshold > 0.0 && threshold < 1.0, "param",
            "mask threshold must lie in (0, 1)");
    fill_gauss(p.add("maskhead.d1.w", {channels, 3, 3, 3}), seed, 0.02);
    p.add("maskhead.d1.b", {channels});
    fill_gauss(p.add("maskhead.d2.w", {channels, channels, 3, 3}), seed, 0.02);
    p.add("maskhead.d2.b", {channels});
    p.add("maskhead.proj.w", {1, channels});  // zero so the head starts silent
    p.add("maskhead.proj.b", {1});
    ParamEntry& outw = p.add("maskhead.out.w", {1, 1, 3, 3});
    outw.value[4] = -1.0;  // center tap; with keep-if-below this passes the
                           // template through unchanged at initialization
    p.add("maskhead.out.b", {1});
    ParamEntry& cfg = p.add("maskhead.cfg", {2});
    cfg.value[0] = double(channels);
    cfg.value[1] = threshold;
}

double mask_head_threshold(const ModelParams& p) {
    return p.entry("maskhead.cfg").value[1];
}

uint32_t mask_head_channels(const ModelParams& p) {
    return uint32_t(p.entry("maskhead.cfg").value[0]);
}

// ---- attention blocks ----------------------------------------------------

Var cross_ab(Tape& t, Var q, Var kv, ModelParams& p, const std::string& prefix,
             uint32_t heads) {
    Var qn = ad::layer_norm_cols(q, t.param(p, prefix + ".lnq.g"),
                                 t.param(p, prefix + ".lnq.b"));
    Var kn = ad::layer_norm_cols(kv, t.param(p, prefix + ".lnkv.g"),
                                 t.param(p, prefix + ".lnkv.b"));
    Var a = ad::add(q, attn_channel_tokens(t, p, prefix, qn, kn, heads));
    return ffn_block(t, p, prefix, a);
}

Var spectral_ab(Tape& t, Var x, ModelParams& p, const std::string& prefix,
                uint32_t heads) {
    return cross_ab(t, x, x, p, prefix, heads);
}

Var spatial_ab(Tape& t, Var x, ModelParams& p, const std::string& prefix,
               uint32_t heads, uint32_t window, uint32_t H, uint32_t W) {
    const uint32_t c = t.val(x).dim(0);
    const uint32_t s = t.val(x).dim(1);
    require(s == H * W, "shape", "spatial block input must be (C, H*W)");
    require(window >= 1 && H % window == 0 && W % window == 0, "shape",
            "window must divide both spatial dims");
    require(c % heads == 0, "shape", "embed dim must be divisible by heads");
    const uint32_t ch = c / heads;
    const uint32_t tks = window * window;

    Var xn = ad::layer_norm_cols(x, t.param(p, prefix + ".ln.g"),
                                 t.param(p, prefix + ".ln.b"));
    Var q = ad::matmul(t.param(p, prefix + ".wq"), xn);
    Var k = ad::matmul(t.param(p, prefix + ".wk"), xn);
    Var v = ad::matmul(t.param(p, prefix + ".wv"), xn);

    Var merged;
    bool first = true;
    for (uint32_t by = 0; by < H; by += window)
        for (uint32_t bx = 0; bx < W; bx += window) {
            std::vector<uint32_t> cols;
            cols.reserve(tks);
            for (uint32_t dy = 0; dy < window; ++dy)
                for (uint32_t dx = 0; dx < window; ++dx)
                    cols.push_back((by + dy) * W + bx + dx);
            Var qw = ad::gather_cols(q, cols);
            Var kw = ad::gather_cols(k, cols);
            Var vw = ad::gather_cols(v, cols);
            std::vector<Var> outs;
            for (uint32_t h = 0; h < heads; ++h) {
                Var qh = ad::slice_rows(qw, h * ch, (h + 1) * ch);
                Var kh = ad::slice_rows(kw, h * ch, (h + 1) * ch);
                Var vh = ad::slice_rows(vw, h * ch, (h + 1) * ch);
                // pixel tokens: scores compare columns, so the contraction
                // runs over the per-head feature rows
                Var scores =
                    ad::scale(ad::matmul_tn(qh, kh), 1.0 / std::sqrt(double(ch)));
                Var attn = ad::softmax_rows(scores);
                outs.push_back(ad::matmul_nt(vh, attn));
            }
            Var ow = heads == 1 ? outs[0] : ad::concat_rows(outs);
            Var placed = ad::scatter_cols(ow, cols, s);
            merged = first ? placed : ad::add(merged, placed);
            first = false;
        }

    Var y = ad::add_bias_rows(ad::matmul(t.param(p, prefix + ".wo"), merged),
                              t.param(p, prefix + ".bo"));
    Var a = ad::add(x, y);
    return ffn_block(t, p, prefix, a);
}

// ---- stage blocks --------------------------------------------------------

Var das_forward(Tape& t, Var fc, Var fr, ModelParams& p, const NetConfig& cfg,
                uint32_t H, uint32_t W) {
    Var c1 = spectral_ab(t, fc, p, "das.c.spec", cfg.heads);
    Var c2 = spatial_ab(t, c1, p, "das.c.spat", cfg.heads, cfg.window, H, W);
    if (!cfg.with_rgb) return c2;
    require(fr.valid(), "shape", "rgb stream enabled but no rgb features given");
    Var r1 = spectral_ab(t, fr, p, "das.r.spec", cfg.heads);
    Var r2 = spatial_ab(t, r1, p, "das.r.spat", cfg.heads, cfg.window, H, W);
    if (!cfg.with_cross) return ad::add(c2, r2);
    // each stream queries the other's pre-spatial features, then the refined
    // measurement stream queries the refined guidance stream
    Var c3 = cross_ab(t, c2, r1, p, "das.c.cross", cfg.heads);
    Var r3 = cross_ab(t, r2, c1, p, "das.r.cross", cfg.heads);
    return cross_ab(t, c3, r3, p, "das.fuse", cfg.heads);
}

Var sas_forward(Tape& t, Var fc, Var fr, ModelParams& p, const NetConfig& cfg,
                uint32_t H, uint32_t W) {
    Var s1 = spatial_ab(t, fc, p, "sas.spat", cfg.heads, cfg.window, H, W);
    if (!cfg.with_rgb) return s1;
    require(fr.valid(), "shape", "rgb stream enabled but no rgb features given");
    if (!cfg.with_cross) return ad::add(s1, fr);
    return cross_ab(t, s1, fr, p, "sas.cross", cfg.heads);
}

// ---- guidance and noise heads --------------------------------------------

Var rgb_init(Tape& t, Var rgb, ModelParams& p, uint32_t nlam) {
    require(t.val(rgb).shape.size() == 2 && t.val(rgb).dim(0) == 3, "shape",
            "rgb_init expects a (3, S) input");
    (void)nlam;
    Var h = ad::gelu(lin1x1(t, p, "rgbinit.1", rgb));
    return lin1x1(t, p, "rgbinit.2", h);
}

Var learned_noise_estimate(Tape& t, Var xc, Var xr, ModelParams& p, uint32_t nx,
                           uint32_t ny) {
    const uint32_t nlam = t.val(xc).dim(0);
    Var tau = t.param(p, "ne.tau");
    auto branch = [&](Var x) {
        Var flat = ad::reshape(x, {nlam, nx * ny});
        Var h = lin1x1(t, p, "ne.up", flat);
        h = ad::reshape(h, {kGuideDim, nx, ny});
        h = ad::gelu(ad::conv3x3(h, t.param(p, "ne.conv.w"),
                                 t.param(p, "ne.conv.b"), 1, ad::Pad::Zero));
        h = ad::reshape(h, {kGuideDim, nx * ny});
        h = lin1x1(t, p, "ne.down", h);
        return ad::soft_shrink(ad::reshape(h, {nlam, nx, ny}), tau);
    };
    // shared weights make the head exactly antisymmetric in its two inputs
    Var diff = ad::sub(branch(xc), branch(xr));
    return ad::add_scalar_var(diff, t.param(p, "ne.eps"));
}

// ---- full reconstruction graph -------------------------------------------

namespace {

// diagonal normalizer snapshot for the current mask value; gradients do not
// flow through it
std::vector<double> bp_denominator(const Tensor& maskv, uint32_t d, uint32_t nlam) {
    const uint32_t nx = maskv.dim(0), ny = maskv.dim(1);
    CodedMask m;
    m.nx = nx;
    m.ny = ny;
    m.binary = false;
    m.data = maskv.v;
    HyperspectralCube ones(nx, ny, nlam, 1.0);
    CASSIMeasurement f = cassi_forward(ones, m, d, NoiseSpec{});
    HyperspectralCube den = cassi_adjoint(f, m, d);
    std::vector<double> out = den.data;
    for (double& v : out) v += 1e-6;
    return out;
}

}  // namespace

Var dmdc_forward_graph(Tape& t, Var yc, Var mask, const RGBImage& yr, uint32_t d,
                       ModelParams& p, const NetConfig& cfg,
                       const SpectralResponse& resp) {
    const uint32_t nx = t.val(mask).dim(0), ny = t.val(mask).dim(1);
    const uint32_t nlam = resp.nlam;
    require(t.val(yc).shape.size() == 2 && t.val(yc).dim(0) == nx &&
                t.val(yc).dim(1) == ny + d * (nlam - 1),
            "shape", "measurement dims inconsistent with mask, d, response");
    require(yr.nx == nx && yr.ny == ny, "shape",
            "rgb image dims must match the mask");
    const uint32_t s = nx * ny;

    const std::vector<double> den = bp_denominator(t.val(mask), d, nlam);
    auto bp = [&](Var y2d) {
        return ad::div_const(ad::cassi_adjoint_op(y2d, mask, d, nlam), den);
    };

    Var yce = yc;
    if (cfg.with_noise_estimator) {
        Var bc = bp(yc);
        HyperspectralCube brc = backproject_rgb(yr, resp);
        Tensor brt({nlam, nx, ny});
        brt.v = brc.data;
        Var br = t.constant(std::move(brt));
        Var nm = learned_noise_estimate(t, bc, br, p, nx, ny);
        yce = ad::sub(yc, ad::cassi_forward_op(nm, mask, d));
    }

    Var x = bp(yce);

    Var rf;  // lifted rgb guidance, shared by every stage
    if (cfg.with_rgb) {
        Tensor rt({3, s});
        rt.v = yr.data;
        rf = rgb_init(t, t.constant(std::move(rt)), p, nlam);
    }

    for (uint32_t k = 1; k <= cfg.stages; ++k) {
        const std::string pre = (k == 1) ? "das" : "sas";
        Var r = ad::sub(yce, ad::cassi_forward_op(x, mask, d));
        Var u = ad::reshape(bp(r), {nlam, s});
        Var fc = lin1x1(t, p, pre + ".embed_c", u);
        Var fre;
        if (cfg.with_rgb) fre = lin1x1(t, p, pre + ".embed_r", rf);
        Var g = (k == 1) ? das_forward(t, fc, fre, p, cfg, nx, ny)
                         : sas_forward(t, fc, fre, p, cfg, nx, ny);
        Var delta = ad::reshape(lin1x1(t, p, pre + ".head", g), {nlam, nx, ny});
        x = ad::add(x, delta);
    }
    return ad::clamp01(x);
}

HyperspectralCube dmdc_forward(const CASSIMeasurement& yc, const RGBImage& yr,
                               const CodedMask& mask, ModelParams& p,
                               const NetConfig& cfg, const SpectralResponse& resp) {
    auto bad = validate_measurement(yc);
    require(bad.empty(), "invalid", "invalid measurement: " + (bad.empty() ? "" : bad.front()));
    require(mask.nx == yc.nx && mask.ny == yc.ny, "shape",
            "mask dims must match the measurement");
    require(resp.nlam == yc.nlam, "shape",
            "response channel count must match the measurement");
    Tape t;
    Tensor yt({yc.nx, yc.wy});
    yt.v = yc.data;
    Tensor mt({mask.nx, mask.ny});
    mt.v = mask.data;
    Var out = dmdc_forward_graph(t, t.constant(std::move(yt)),
                                 t.constant(std::move(mt)), yr, yc.d, p, cfg, resp);
    HyperspectralCube cube(yc.nx, yc.ny, yc.nlam);
    cube.data = t.val(out).v;
    return cube;
}

Var loss_fn(Tape& t, Var x_out, const HyperspectralCube& truth, Var mask,
            uint32_t d, Var x_in, double xi) {
    require(t.val(x_out).shape.size() == 3, "shape", "loss input must be a cube");
    Tensor tt({truth.nlam, truth.nx, truth.ny});
    tt.v = truth.data;
    Var l1 = ad::sse(x_out, t.constant(std::move(tt)));
    Var fwd = ad::cassi_forward_op(x_out, mask, d);
    Var l2 = ad::sse(fwd, x_in);
    return ad::add(l1, ad::scale(l2, xi));
}

// ---- dynamic mask --------------------------------------------------------

Var mask_probs_graph(Tape& t, Var rgb3, const CodedMask& templ, ModelParams& p) {
    const Tensor& rv = t.val(rgb3);
    require(rv.shape.size() == 3 && rv.dim(0) == 3, "shape",
            "mask head input must be (3, H, W)");
    const uint32_t H = rv.dim(1), W = rv.dim(2);
    require(H % 4 == 0 && W % 4 == 0, "shape",
            "mask head needs spatial dims divisible by 4");
    require(templ.nx == H && templ.ny == W, "shape",
            "template dims must match the rgb image");

    Var h = ad::gelu(ad::conv3x3(rgb3, t.param(p, "maskhead.d1.w"),
                                 t.param(p, "maskhead.d1.b"), 2, ad::Pad::Zero));
    h = ad::gelu(ad::conv3x3(h, t.param(p, "maskhead.d2.w"),
                             t.param(p, "maskhead.d2.b"), 2, ad::Pad::Zero));
    h = ad::upsample_nearest(h, 4);
    const uint32_t ch = t.val(h).dim(0);
    h = ad::reshape(h, {ch, H * W});
    Var u = lin1x1(t, p, "maskhead.proj", h);
    u = ad::reshape(u, {1, H, W});

    Tensor tt({1, H, W});
    tt.v = templ.data;
    Var summed = ad::add(u, t.constant(std::move(tt)));
    Var logits = ad::conv3x3(summed, t.param(p, "maskhead.out.w"),
                             t.param(p, "maskhead.out.b"), 1, ad::Pad::Replicate);
    return ad::sigmoid(logits);
}

Var mask_from_probs(Var probs, double threshold) {
    // keep-if-below: low keep probability of noise means keep the pixel open.
    // Ties (p exactly at threshold) close the pixel.
    return ad::binarize_less(probs, threshold);
}

CodedMask dynamic_mask(const RGBImage& rgb, const CodedMask& templ, ModelParams& p,
                       std::vector<double>* prob_out) {
    Tape t;
    Tensor rt({3, rgb.nx, rgb.ny});
    rt.v = rgb.data;
    Var probs = mask_probs_graph(t, t.constant(std::move(rt)), templ, p);
    Var mv = mask_from_probs(probs, mask_head_threshold(p));
    if (prob_out != nullptr) *prob_out = t.val(probs).v;
    CodedMask out;
    out.nx = rgb.nx;
    out.ny = rgb.ny;
    out.binary = true;
    out.data = t.val(mv).v;
    return out;
}

}  // namespace dmdc
