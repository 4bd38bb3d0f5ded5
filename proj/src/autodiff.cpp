#include "dmdc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "dmdc/common.hpp"

namespace dmdc::ad {

namespace {

constexpr double kLnEps = 1e-5;       // layer norm variance floor
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require(a.shape == b.shape, "shape",
            std::string(op) + " operands must have identical shapes");
}

void check_same_tape(Var a, Var b, const char* op) {
    require(a.tape == b.tape, "shape",
            std::string(op) + " operands must live on the same tape");
}

// attach a backward closure to a freshly emitted node
template <class F>
Var with_back(Tape& t, Tensor val, F&& make) {
    Var y = t.emit(std::move(val), nullptr);
    t.node(y.id).back = make(y.id);
    return y;
}

}  // namespace

Var Tape::emit(Tensor val, std::function<void(Tape&)> back) {
    Node n;
    n.grad = Tensor(val.shape, 0.0);
    n.val = std::move(val);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{this, int(nodes_.size()) - 1};
}

Var Tape::constant(Tensor t) { return emit(std::move(t), nullptr); }

Var Tape::input(Tensor t) { return emit(std::move(t), nullptr); }

Var Tape::param(ModelParams& params, const std::string& name) {
    if (bound_ == nullptr) bound_ = &params;
    require(bound_ == &params, "param",
            "a tape can bind parameters from only one ModelParams");
    auto it = param_cache_.find(name);
    if (it != param_cache_.end()) return Var{this, it->second};
    const ParamEntry& e = params.entry(name);
    Tensor t(e.shape);
    t.v = e.value;
    Var v = emit(std::move(t), nullptr);
    param_cache_[name] = v.id;
    return v;
}

void Tape::flush_param_grads() {
    if (bound_ == nullptr) return;
    for (const auto& [name, id] : param_cache_) {
        ParamEntry& e = bound_->entry(name);
        const Tensor& g = nodes_[size_t(id)].grad;
        for (size_t i = 0; i < e.grad.size(); ++i) e.grad[i] += g.v[i];
    }
}

void Tape::backward(Var root) {
    require(root.tape == this, "shape", "backward root is not on this tape");
    require(nodes_[size_t(root.id)].val.numel() == 1, "shape",
            "backward requires a scalar root");
    nodes_[size_t(root.id)].grad.v[0] = 1.0;
    for (int i = root.id; i >= 0; --i) {
        if (nodes_[size_t(i)].back) nodes_[size_t(i)].back(*this);
    }
}

// ---- elementwise ---------------------------------------------------------

Var add(Var a, Var b) {
    check_same_tape(a, b, "add");
    Tape& t = *a.tape;
    check_same_shape(t.val(a), t.val(b), "add");
    Tensor out = t.val(a);
    for (size_t i = 0; i < out.numel(); ++i) out.v[i] += t.val(b).v[i];
    return with_back(t, std::move(out), [a, b](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            Tensor& ga = tp.grad(a);
            Tensor& gb = tp.grad(b);
            for (size_t i = 0; i < g.numel(); ++i) {
                ga.v[i] += g.v[i];
                gb.v[i] += g.v[i];
            }
        };
    });
}

Var sub(Var a, Var b) {
    check_same_tape(a, b, "sub");
    Tape& t = *a.tape;
    check_same_shape(t.val(a), t.val(b), "sub");
    Tensor out = t.val(a);
    for (size_t i = 0; i < out.numel(); ++i) out.v[i] -= t.val(b).v[i];
    return with_back(t, std::move(out), [a, b](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            Tensor& ga = tp.grad(a);
            Tensor& gb = tp.grad(b);
            for (size_t i = 0; i < g.numel(); ++i) {
                ga.v[i] += g.v[i];
                gb.v[i] -= g.v[i];
            }
        };
    });
}

Var mul(Var a, Var b) {
    check_same_tape(a, b, "mul");
    Tape& t = *a.tape;
    check_same_shape(t.val(a), t.val(b), "mul");
    Tensor out = t.val(a);
    for (size_t i = 0; i < out.numel(); ++i) out.v[i] *= t.val(b).v[i];
    return with_back(t, std::move(out), [a, b](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            const Tensor& av = tp.val(a);
            const Tensor& bv = tp.val(b);
            Tensor& ga = tp.grad(a);
            Tensor& gb = tp.grad(b);
            for (size_t i = 0; i < g.numel(); ++i) {
                ga.v[i] += bv.v[i] * g.v[i];
                gb.v[i] += av.v[i] * g.v[i];
            }
        };
    });
}

Var scale(Var a, double s) {
    Tape& t = *a.tape;
    Tensor out = t.val(a);
    for (double& x : out.v) x *= s;
    return with_back(t, std::move(out), [a, s](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            Tensor& ga = tp.grad(a);
            for (size_t i = 0; i < g.numel(); ++i) ga.v[i] += s * g.v[i];
        };
    });
}

Var neg(Var a) { return scale(a, -1.0); }

Var add_scalar_var(Var a, Var s) {
    check_same_tape(a, s, "add_scalar_var");
    Tape& t = *a.tape;
    require(t.val(s).numel() == 1, "shape", "add_scalar_var needs a scalar");
    Tensor out = t.val(a);
    const double sv = t.val(s).v[0];
    for (double& x : out.v) x += sv;
    return with_back(t, std::move(out), [a, s](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            Tensor& ga = tp.grad(a);
            double acc = 0.0;
            for (size_t i = 0; i < g.numel(); ++i) {
                ga.v[i] += g.v[i];
                acc += g.v[i];
            }
            tp.grad(s).v[0] += acc;
        };
    });
}

Var div_const(Var a, const std::vector<double>& d) {
    Tape& t = *a.tape;
    require(t.val(a).numel() == d.size(), "shape",
            "div_const divisor length mismatch");
    Tensor out = t.val(a);
    for (size_t i = 0; i < out.numel(); ++i) out.v[i] /= d[i];
    return with_back(t, std::move(out), [a, d](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            Tensor& ga = tp.grad(a);
            for (size_t i = 0; i < g.numel(); ++i) ga.v[i] += g.v[i] / d[i];
        };
    });
}

Var sigmoid(Var a) {
    Tape& t = *a.tape;
    Tensor out = t.val(a);
    for (double& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
    return with_back(t, std::move(out), [a](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            const Tensor& y = tp.node(yi).val;
            Tensor& ga = tp.grad(a);
            for (size_t i = 0; i < g.numel(); ++i)
                ga.v[i] += y.v[i] * (1.0 - y.v[i]) * g.v[i];
        };
    });
}

Var gelu(Var a) {
    Tape& t = *a.tape;
    Tensor out = t.val(a);
    for (double& x : out.v) x = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    return with_back(t, std::move(out), [a](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            const Tensor& x = tp.val(a);
            Tensor& ga = tp.grad(a);
            for (size_t i = 0; i < g.numel(); ++i) {
                const double xi = x.v[i];
                const double cdf = 0.5 * (1.0 + std::erf(xi * kInvSqrt2));
                const double pdf = kInvSqrt2Pi * std::exp(-0.5 * xi * xi);
                ga.v[i] += (cdf + xi * pdf) * g.v[i];
            }
        };
    });
}

Var clamp01(Var a) {
    Tape& t = *a.tape;
    Tensor out = t.val(a);
    for (double& x : out.v) x = std::clamp(x, 0.0, 1.0);
    return with_back(t, std::move(out), [a](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            const Tensor& x = tp.val(a);
            Tensor& ga = tp.grad(a);
            // pass-through on the closed interval so boundary values keep
            // a descent direction
            for (size_t i = 0; i < g.numel(); ++i)
                if (x.v[i] >= 0.0 && x.v[i] <= 1.0) ga.v[i] += g.v[i];
        };
    });
}

Var soft_shrink(Var a, Var tau) {
    check_same_tape(a, tau, "soft_shrink");
    Tape& t = *a.tape;
    require(t.val(tau).numel() == 1, "shape", "soft_shrink threshold is scalar");
    const double tv = std::max(t.val(tau).v[0], 0.0);
    Tensor out = t.val(a);
    for (double& x : out.v) {
        if (x > tv)
            x -= tv;
        else if (x < -tv)
            x += tv;
        else
            x = 0.0;
    }
    return with_back(t, std::move(out), [a, tau, tv](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            const Tensor& x = tp.val(a);
            Tensor& ga = tp.grad(a);
            double gt = 0.0;
            for (size_t i = 0; i < g.numel(); ++i) {
                if (x.v[i] > tv) {
                    ga.v[i] += g.v[i];
                    gt -= g.v[i];
                } else if (x.v[i] < -tv) {
                    ga.v[i] += g.v[i];
                    gt += g.v[i];
                }
            }
            // the effective threshold max(tau, 0) is flat in tau when tau <= 0
            if (tp.val(tau).v[0] > 0.0) tp.grad(tau).v[0] += gt;
        };
    });
}

Var binarize_less(Var a, double threshold) {
    Tape& t = *a.tape;
    Tensor out = t.val(a);
    for (double& x : out.v) x = (x < threshold) ? 1.0 : 0.0;
    return with_back(t, std::move(out), [a](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            Tensor& ga = tp.grad(a);
            // straight-through surrogate is 1 - a, hence the sign flip
            for (size_t i = 0; i < g.numel(); ++i) ga.v[i] -= g.v[i];
        };
    });
}

// ---- reductions ----------------------------------------------------------

Var sum(Var a) {
    Tape& t = *a.tape;
    double s = 0.0;
    for (double x : t.val(a).v) s += x;
    Tensor out({1});
    out.v[0] = s;
    return with_back(t, std::move(out), [a](int yi) {
        return [=](Tape& tp) {
            const double g = tp.node(yi).grad.v[0];
            Tensor& ga = tp.grad(a);
            for (double& x : ga.v) x += g;
        };
    });
}

Var sse(Var a, Var b) {
    check_same_tape(a, b, "sse");
    Tape& t = *a.tape;
    check_same_shape(t.val(a), t.val(b), "sse");
    double s = 0.0;
    for (size_t i = 0; i < t.val(a).numel(); ++i) {
        const double d = t.val(a).v[i] - t.val(b).v[i];
        s += d * d;
    }
    Tensor out({1});
    out.v[0] = s;
    return with_back(t, std::move(out), [a, b](int yi) {
        return [=](Tape& tp) {
            const double g = tp.node(yi).grad.v[0];
            const Tensor& av = tp.val(a);
            const Tensor& bv = tp.val(b);
            Tensor& ga = tp.grad(a);
            Tensor& gb = tp.grad(b);
            for (size_t i = 0; i < av.numel(); ++i) {
                const double d = 2.0 * (av.v[i] - bv.v[i]) * g;
                ga.v[i] += d;
                gb.v[i] -= d;
            }
        };
    });
}

// ---- linear algebra ------------------------------------------------------

namespace {

void require_2d(const Tensor& t, const char* op) {
    require(t.shape.size() == 2, "shape", std::string(op) + " needs 2-D operands");
}

// C += A(m,k) * B(k,n), plain row-major accumulation
void mm_acc(const double* A, const double* B, double* C, size_t m, size_t k,
            size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* Ai = A + i * k;
        double* Ci = C + i * n;
        for (size_t p = 0; p < k; ++p) {
            const double a = Ai[p];
            if (a == 0.0) continue;
            const double* Bp = B + p * n;
            for (size_t j = 0; j < n; ++j) Ci[j] += a * Bp[j];
        }
    }
}

// C += A^T(m,k from A k,m) * B(k,n)
void mm_tn_acc(const double* A, const double* B, double* C, size_t k, size_t m,
               size_t n) {
    for (size_t p = 0; p < k; ++p) {
        const double* Ap = A + p * m;
        const double* Bp = B + p * n;
        for (size_t i = 0; i < m; ++i) {
            const double a = Ap[i];
            if (a == 0.0) continue;
            double* Ci = C + i * n;
            for (size_t j = 0; j < n; ++j) Ci[j] += a * Bp[j];
        }
    }
}

// C += A(m,k) * B^T(k,n from B n,k)
void mm_nt_acc(const double* A, const double* B, double* C, size_t m, size_t k,
               size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* Ai = A + i * k;
        double* Ci = C + i * n;
        for (size_t j = 0; j < n; ++j) {
            const double* Bj = B + j * k;
            double s = 0.0;
            for (size_t p = 0; p < k; ++p) s += Ai[p] * Bj[p];
            Ci[j] += s;
        }
    }
}

}  // namespace

Var matmul(Var a, Var b) {
    check_same_tape(a, b, "matmul");
    Tape& t = *a.tape;
    require_2d(t.val(a), "matmul");
    require_2d(t.val(b), "matmul");
    const uint32_t m = t.val(a).dim(0), k = t.val(a).dim(1);
    const uint32_t k2 = t.val(b).dim(0), n = t.val(b).dim(1);
    require(k == k2, "shape", "matmul inner dimensions disagree");
    Tensor out({m, n});
    mm_acc(t.val(a).v.data(), t.val(b).v.data(), out.v.data(), m, k, n);
    return with_back(t, std::move(out), [a, b, m, k, n](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            // dA = G B^T, dB = A^T G
            mm_nt_acc(g.v.data(), tp.val(b).v.data(), tp.grad(a).v.data(), m, n, k);
            mm_tn_acc(tp.val(a).v.data(), g.v.data(), tp.grad(b).v.data(), m, k, n);
        };
    });
}

Var matmul_tn(Var a, Var b) {
    check_same_tape(a, b, "matmul_tn");
    Tape& t = *a.tape;
    require_2d(t.val(a), "matmul_tn");
    require_2d(t.val(b), "matmul_tn");
    const uint32_t k = t.val(a).dim(0), m = t.val(a).dim(1);
    const uint32_t k2 = t.val(b).dim(0), n = t.val(b).dim(1);
    require(k == k2, "shape", "matmul_tn inner dimensions disagree");
    Tensor out({m, n});
    mm_tn_acc(t.val(a).v.data(), t.val(b).v.data(), out.v.data(), k, m, n);
    return with_back(t, std::move(out), [a, b, m, k, n](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            // C = A^T B: dA = B G^T, dB = A G
            mm_nt_acc(tp.val(b).v.data(), g.v.data(), tp.grad(a).v.data(), k, n, m);
            mm_acc(tp.val(a).v.data(), g.v.data(), tp.grad(b).v.data(), k, m, n);
        };
    });
}

Var matmul_nt(Var a, Var b) {
    check_same_tape(a, b, "matmul_nt");
    Tape& t = *a.tape;
    require_2d(t.val(a), "matmul_nt");
    require_2d(t.val(b), "matmul_nt");
    const uint32_t m = t.val(a).dim(0), k = t.val(a).dim(1);
    const uint32_t n = t.val(b).dim(0), k2 = t.val(b).dim(1);
    require(k == k2, "shape", "matmul_nt inner dimensions disagree");
    Tensor out({m, n});
    mm_nt_acc(t.val(a).v.data(), t.val(b).v.data(), out.v.data(), m, k, n);
    return with_back(t, std::move(out), [a, b, m, k, n](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            // C = A B^T: dA = G B, dB = G^T A
            mm_acc(g.v.data(), tp.val(b).v.data(), tp.grad(a).v.data(), m, n, k);
            mm_tn_acc(g.v.data(), tp.val(a).v.data(), tp.grad(b).v.data(), m, n, k);
        };
    });
}

Var softmax_rows(Var a) {
    Tape& t = *a.tape;
    require_2d(t.val(a), "softmax_rows");
    const uint32_t m = t.val(a).dim(0), n = t.val(a).dim(1);
    Tensor out = t.val(a);
    for (uint32_t i = 0; i < m; ++i) {
        double* row = out.v.data() + size_t(i) * n;
        double mx = row[0];
        for (uint32_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        for (uint32_t j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - mx);
            s += row[j];
        }
        for (uint32_t j = 0; j < n; ++j) row[j] /= s;
    }
    return with_back(t, std::move(out), [a, m, n](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            const Tensor& y = tp.node(yi).val;
            Tensor& ga = tp.grad(a);
            for (uint32_t i = 0; i < m; ++i) {
                const double* yr = y.v.data() + size_t(i) * n;
                const double* gr = g.v.data() + size_t(i) * n;
                double dot = 0.0;
                for (uint32_t j = 0; j < n; ++j) dot += yr[j] * gr[j];
                double* gar = ga.v.data() + size_t(i) * n;
                for (uint32_t j = 0; j < n; ++j)
                    gar[j] += yr[j] * (gr[j] - dot);
            }
        };
    });
}

Var layer_norm_cols(Var a, Var gamma, Var beta) {
    check_same_tape(a, gamma, "layer_norm_cols");
    check_same_tape(a, beta, "layer_norm_cols");
    Tape& t = *a.tape;
    require_2d(t.val(a), "layer_norm_cols");
    const uint32_t m = t.val(a).dim(0), n = t.val(a).dim(1);
    require(t.val(gamma).numel() == m && t.val(beta).numel() == m, "shape",
            "layer_norm_cols affine params must have one entry per row");
    Tensor out({m, n});
    Tensor xhat({m, n});
    std::vector<double> inv_sd(n);
    const Tensor& x = t.val(a);
    for (uint32_t j = 0; j < n; ++j) {
        double mu = 0.0;
        for (uint32_t i = 0; i < m; ++i) mu += x.v[size_t(i) * n + j];
        mu /= m;
        double var = 0.0;
        for (uint32_t i = 0; i < m; ++i) {
            const double d = x.v[size_t(i) * n + j] - mu;
            var += d * d;
        }
        var /= m;
        inv_sd[j] = 1.0 / std::sqrt(var + kLnEps);
        for (uint32_t i = 0; i < m; ++i) {
            const double h = (x.v[size_t(i) * n + j] - mu) * inv_sd[j];
            xhat.v[size_t(i) * n + j] = h;
            out.v[size_t(i) * n + j] =
                t.val(gamma).v[i] * h + t.val(beta).v[i];
        }
    }
    // keep xhat and inv_sd alive for the backward pass
    auto xh = std::make_shared<Tensor>(std::move(xhat));
    auto isd = std::make_shared<std::vector<double>>(std::move(inv_sd));
    return with_back(t, std::move(out), [a, gamma, beta, m, n, xh, isd](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            const Tensor& gm = tp.val(gamma);
            Tensor& ga = tp.grad(a);
            Tensor& gg = tp.grad(gamma);
            Tensor& gb = tp.grad(beta);
            for (uint32_t j = 0; j < n; ++j) {
                double mean_gh = 0.0, mean_ghx = 0.0;
                for (uint32_t i = 0; i < m; ++i) {
                    const double gh = g.v[size_t(i) * n + j] * gm.v[i];
                    mean_gh += gh;
                    mean_ghx += gh * xh->v[size_t(i) * n + j];
                }
                mean_gh /= m;
                mean_ghx /= m;
                for (uint32_t i = 0; i < m; ++i) {
                    const size_t k = size_t(i) * n + j;
                    const double gh = g.v[k] * gm.v[i];
                    ga.v[k] += (*isd)[j] * (gh - mean_gh - xh->v[k] * mean_ghx);
                    gg.v[i] += g.v[k] * xh->v[k];
                    gb.v[i] += g.v[k];
                }
            }
        };
    });
}

Var add_bias_rows(Var a, Var bias) {
    check_same_tape(a, bias, "add_bias_rows");
    Tape& t = *a.tape;
    require_2d(t.val(a), "add_bias_rows");
    const uint32_t m = t.val(a).dim(0), n = t.val(a).dim(1);
    require(t.val(bias).numel() == m, "shape",
            "add_bias_rows needs one bias per row");
    Tensor out = t.val(a);
    for (uint32_t i = 0; i < m; ++i)
        for (uint32_t j = 0; j < n; ++j)
            out.v[size_t(i) * n + j] += t.val(bias).v[i];
    return with_back(t, std::move(out), [a, bias, m, n](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            Tensor& ga = tp.grad(a);
            Tensor& gb = tp.grad(bias);
            for (uint32_t i = 0; i < m; ++i) {
                double s = 0.0;
                for (uint32_t j = 0; j < n; ++j) {
                    ga.v[size_t(i) * n + j] += g.v[size_t(i) * n + j];
                    s += g.v[size_t(i) * n + j];
                }
                gb.v[i] += s;
            }
        };
    });
}

Var reshape(Var a, std::vector<uint32_t> shape) {
    Tape& t = *a.tape;
    size_t n = 1;
    for (uint32_t d : shape) n *= d;
    require(n == t.val(a).numel(), "shape", "reshape must preserve element count");
    Tensor out;
    out.shape = std::move(shape);
    out.v = t.val(a).v;
    return with_back(t, std::move(out), [a](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            Tensor& ga = tp.grad(a);
            for (size_t i = 0; i < g.numel(); ++i) ga.v[i] += g.v[i];
        };
    });
}

Var slice_rows(Var a, uint32_t r0, uint32_t r1) {
    Tape& t = *a.tape;
    require_2d(t.val(a), "slice_rows");
    const uint32_t m = t.val(a).dim(0), n = t.val(a).dim(1);
    require(r0 < r1 && r1 <= m, "shape", "slice_rows range out of bounds");
    Tensor out({r1 - r0, n});
    std::copy(t.val(a).v.begin() + size_t(r0) * n,
              t.val(a).v.begin() + size_t(r1) * n, out.v.begin());
    return with_back(t, std::move(out), [a, r0, n](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            Tensor& ga = tp.grad(a);
            for (size_t i = 0; i < g.numel(); ++i)
                ga.v[size_t(r0) * n + i] += g.v[i];
        };
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    require(!parts.empty(), "shape", "concat_rows needs at least one part");
    Tape& t = *parts[0].tape;
    uint32_t m = 0;
    const uint32_t n = t.val(parts[0]).dim(1);
    for (Var p : parts) {
        check_same_tape(parts[0], p, "concat_rows");
        require_2d(t.val(p), "concat_rows");
        require(t.val(p).dim(1) == n, "shape", "concat_rows column mismatch");
        m += t.val(p).dim(0);
    }
    Tensor out({m, n});
    size_t off = 0;
    for (Var p : parts) {
        std::copy(t.val(p).v.begin(), t.val(p).v.end(), out.v.begin() + off);
        off += t.val(p).numel();
    }
    return with_back(t, std::move(out), [parts](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            size_t off = 0;
            for (Var p : parts) {
                Tensor& gp = tp.grad(p);
                for (size_t i = 0; i < gp.numel(); ++i) gp.v[i] += g.v[off + i];
                off += gp.numel();
            }
        };
    });
}

Var gather_cols(Var a, const std::vector<uint32_t>& idx) {
    Tape& t = *a.tape;
    require_2d(t.val(a), "gather_cols");
    const uint32_t m = t.val(a).dim(0), n = t.val(a).dim(1);
    for (uint32_t j : idx)
        require(j < n, "shape", "gather_cols index out of range");
    const uint32_t k = uint32_t(idx.size());
    Tensor out({m, k});
    for (uint32_t i = 0; i < m; ++i)
        for (uint32_t j = 0; j < k; ++j)
            out.v[size_t(i) * k + j] = t.val(a).v[size_t(i) * n + idx[j]];
    return with_back(t, std::move(out), [a, idx, m, n, k](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            Tensor& ga = tp.grad(a);
            for (uint32_t i = 0; i < m; ++i)
                for (uint32_t j = 0; j < k; ++j)
                    ga.v[size_t(i) * n + idx[j]] += g.v[size_t(i) * k + j];
        };
    });
}

Var scatter_cols(Var a, const std::vector<uint32_t>& idx, uint32_t ncols) {
    Tape& t = *a.tape;
    require_2d(t.val(a), "scatter_cols");
    const uint32_t m = t.val(a).dim(0), k = t.val(a).dim(1);
    require(k == idx.size(), "shape", "scatter_cols index count mismatch");
    for (uint32_t j : idx)
        require(j < ncols, "shape", "scatter_cols index out of range");
    Tensor out({m, ncols});
    for (uint32_t i = 0; i < m; ++i)
        for (uint32_t j = 0; j < k; ++j)
            out.v[size_t(i) * ncols + idx[j]] = t.val(a).v[size_t(i) * k + j];
    return with_back(t, std::move(out), [a, idx, m, k, ncols](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            Tensor& ga = tp.grad(a);
            for (uint32_t i = 0; i < m; ++i)
                for (uint32_t j = 0; j < k; ++j)
                    ga.v[size_t(i) * k + j] += g.v[size_t(i) * ncols + idx[j]];
        };
    });
}

// ---- conv / resampling ---------------------------------------------------

Var conv3x3(Var x, Var w, Var b, int stride, Pad pad) {
    check_same_tape(x, w, "conv3x3");
    check_same_tape(x, b, "conv3x3");
    Tape& t = *x.tape;
    const Tensor& xv = t.val(x);
    const Tensor& wv = t.val(w);
    require(xv.shape.size() == 3, "shape", "conv3x3 input must be (C,H,W)");
    require(wv.shape.size() == 4 && wv.dim(2) == 3 && wv.dim(3) == 3, "shape",
            "conv3x3 weight must be (Co,Ci,3,3)");
    require(stride == 1 || stride == 2, "shape", "conv3x3 stride must be 1 or 2");
    const uint32_t ci = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    const uint32_t co = wv.dim(0);
    require(wv.dim(1) == ci, "shape", "conv3x3 channel mismatch");
    require(t.val(b).numel() == co, "shape", "conv3x3 bias length mismatch");
    const uint32_t Ho = (H + 2 - 3) / uint32_t(stride) + 1;
    const uint32_t Wo = (W + 2 - 3) / uint32_t(stride) + 1;
    const bool rep = (pad == Pad::Replicate);

    auto src_index = [rep](int v, uint32_t limit) -> int {
        if (v >= 0 && v < int(limit)) return v;
        if (!rep) return -1;
        return v < 0 ? 0 : int(limit) - 1;
    };

    Tensor out({co, Ho, Wo});
    for (uint32_t o = 0; o < co; ++o) {
        const double bias = t.val(b).v[o];
        for (uint32_t oy = 0; oy < Ho; ++oy)
            for (uint32_t ox = 0; ox < Wo; ++ox) {
                double s = bias;
                for (uint32_t i = 0; i < ci; ++i)
                    for (int ky = 0; ky < 3; ++ky) {
                        const int iy = src_index(int(oy) * stride + ky - 1, H);
                        if (iy < 0) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ix = src_index(int(ox) * stride + kx - 1, W);
                            if (ix < 0) continue;
                            s += wv.v[((size_t(o) * ci + i) * 3 + ky) * 3 + kx] *
                                 xv.v[(size_t(i) * H + iy) * W + ix];
                        }
                    }
                out.v[(size_t(o) * Ho + oy) * Wo + ox] = s;
            }
    }
    return with_back(t, std::move(out),
                     [x, w, b, stride, ci, H, W, co, Ho, Wo, src_index](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            const Tensor& xv2 = tp.val(x);
            const Tensor& wv2 = tp.val(w);
            Tensor& gx = tp.grad(x);
            Tensor& gw = tp.grad(w);
            Tensor& gb = tp.grad(b);
            for (uint32_t o = 0; o < co; ++o)
                for (uint32_t oy = 0; oy < Ho; ++oy)
                    for (uint32_t ox = 0; ox < Wo; ++ox) {
                        const double go = g.v[(size_t(o) * Ho + oy) * Wo + ox];
                        if (go == 0.0) continue;
                        gb.v[o] += go;
                        for (uint32_t i = 0; i < ci; ++i)
                            for (int ky = 0; ky < 3; ++ky) {
                                const int iy = src_index(int(oy) * stride + ky - 1, H);
                                if (iy < 0) continue;
                                for (int kx = 0; kx < 3; ++kx) {
                                    const int ix = src_index(int(ox) * stride + kx - 1, W);
                                    if (ix < 0) continue;
                                    const size_t wi =
                                        ((size_t(o) * ci + i) * 3 + ky) * 3 + kx;
                                    const size_t xi = (size_t(i) * H + iy) * W + ix;
                                    gx.v[xi] += wv2.v[wi] * go;
                                    gw.v[wi] += xv2.v[xi] * go;
                                }
                            }
                    }
        };
    });
}

Var upsample_nearest(Var x, int factor) {
    Tape& t = *x.tape;
    const Tensor& xv = t.val(x);
    require(xv.shape.size() == 3, "shape", "upsample input must be (C,H,W)");
    require(factor >= 1, "shape", "upsample factor must be positive");
    const uint32_t c = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    const uint32_t f = uint32_t(factor);
    Tensor out({c, H * f, W * f});
    for (uint32_t ch = 0; ch < c; ++ch)
        for (uint32_t y = 0; y < H * f; ++y)
            for (uint32_t z = 0; z < W * f; ++z)
                out.v[(size_t(ch) * H * f + y) * W * f + z] =
                    xv.v[(size_t(ch) * H + y / f) * W + z / f];
    return with_back(t, std::move(out), [x, c, H, W, f](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            Tensor& gx = tp.grad(x);
            for (uint32_t ch = 0; ch < c; ++ch)
                for (uint32_t y = 0; y < H * f; ++y)
                    for (uint32_t z = 0; z < W * f; ++z)
                        gx.v[(size_t(ch) * H + y / f) * W + z / f] +=
                            g.v[(size_t(ch) * H * f + y) * W * f + z];
        };
    });
}

// ---- optical model ops ---------------------------------------------------

Var cassi_forward_op(Var x, Var mask, uint32_t d) {
    check_same_tape(x, mask, "cassi_forward_op");
    Tape& t = *x.tape;
    const Tensor& xv = t.val(x);
    const Tensor& mv = t.val(mask);
    require(xv.shape.size() == 3, "shape", "cube must be (nlam,nx,ny)");
    require(mv.shape.size() == 2, "shape", "mask must be (nx,ny)");
    const uint32_t nlam = xv.dim(0), nx = xv.dim(1), ny = xv.dim(2);
    require(mv.dim(0) == nx && mv.dim(1) == ny, "shape",
            "mask does not match cube spatial dims");
    const uint32_t wy = ny + d * (nlam - 1);
    Tensor out({nx, wy});
    for (uint32_t l = 0; l < nlam; ++l)
        for (uint32_t ix = 0; ix < nx; ++ix)
            for (uint32_t iy = 0; iy < ny; ++iy)
                out.v[size_t(ix) * wy + iy + d * l] +=
                    0.5 * mv.v[size_t(ix) * ny + iy] *
                    xv.v[(size_t(l) * nx + ix) * ny + iy];
    return with_back(t, std::move(out), [x, mask, d, nlam, nx, ny, wy](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            const Tensor& xv2 = tp.val(x);
            const Tensor& mv2 = tp.val(mask);
            Tensor& gx = tp.grad(x);
            Tensor& gm = tp.grad(mask);
            for (uint32_t l = 0; l < nlam; ++l)
                for (uint32_t ix = 0; ix < nx; ++ix)
                    for (uint32_t iy = 0; iy < ny; ++iy) {
                        const double gy = g.v[size_t(ix) * wy + iy + d * l];
                        const size_t xi = (size_t(l) * nx + ix) * ny + iy;
                        const size_t mi = size_t(ix) * ny + iy;
                        gx.v[xi] += 0.5 * mv2.v[mi] * gy;
                        gm.v[mi] += 0.5 * xv2.v[xi] * gy;
                    }
        };
    });
}

Var cassi_adjoint_op(Var y, Var mask, uint32_t d, uint32_t nlam) {
    check_same_tape(y, mask, "cassi_adjoint_op");
    Tape& t = *y.tape;
    const Tensor& yv = t.val(y);
    const Tensor& mv = t.val(mask);
    require(yv.shape.size() == 2, "shape", "measurement must be (nx,wy)");
    require(mv.shape.size() == 2, "shape", "mask must be (nx,ny)");
    const uint32_t nx = yv.dim(0), wy = yv.dim(1);
    const uint32_t ny = mv.dim(1);
    require(mv.dim(0) == nx, "shape", "mask rows must match measurement rows");
    require(nlam >= 1 && wy == ny + d * (nlam - 1), "shape",
            "measurement width inconsistent with mask, d, nlam");
    Tensor out({nlam, nx, ny});
    for (uint32_t l = 0; l < nlam; ++l)
        for (uint32_t ix = 0; ix < nx; ++ix)
            for (uint32_t iy = 0; iy < ny; ++iy)
                out.v[(size_t(l) * nx + ix) * ny + iy] =
                    0.5 * mv.v[size_t(ix) * ny + iy] *
                    yv.v[size_t(ix) * wy + iy + d * l];
    return with_back(t, std::move(out), [y, mask, d, nlam, nx, ny, wy](int yi) {
        return [=](Tape& tp) {
            const Tensor& g = tp.node(yi).grad;
            const Tensor& yv2 = tp.val(y);
            const Tensor& mv2 = tp.val(mask);
            Tensor& gy = tp.grad(y);
            Tensor& gm = tp.grad(mask);
            for (uint32_t l = 0; l < nlam; ++l)
                for (uint32_t ix = 0; ix < nx; ++ix)
                    for (uint32_t iy = 0; iy < ny; ++iy) {
                        const double gx = g.v[(size_t(l) * nx + ix) * ny + iy];
                        const size_t mi = size_t(ix) * ny + iy;
                        const size_t yi2 = size_t(ix) * wy + iy + d * l;
                        gy.v[yi2] += 0.5 * mv2.v[mi] * gx;
                        gm.v[mi] += 0.5 * yv2.v[yi2] * gx;
                    }
        };
    });
}

}  // namespace dmdc::ad
