// Reverse-mode autodiff over dense double tensors. A Tape owns the graph;
// ops append nodes whose backward closures accumulate into parent gradients.
// Closures capture node indices, never pointers, so the node vector may grow.
#pragma once
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dmdc/masks.hpp"
#include "dmdc/params.hpp"

namespace dmdc::ad {

struct Tensor {
    std::vector<uint32_t> shape;
    std::vector<double> v;

    Tensor() = default;
    Tensor(std::vector<uint32_t> s, double fill = 0.0) : shape(std::move(s)) {
        size_t n = 1;
        for (uint32_t d : shape) n *= d;
        v.assign(n, fill);
    }
    size_t numel() const { return v.size(); }
    uint32_t dim(size_t i) const { return shape[i]; }
};

class Tape;

struct Var {
    Tape* tape = nullptr;
    int id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

class Tape {
public:
    struct Node {
        Tensor val;
        Tensor grad;
        std::function<void(Tape&)> back;  // may be empty for leaves
    };

    // leaves
    Var constant(Tensor t);
    Var input(Tensor t);  // like constant but callers may read its grad
    // parameter leaf bound to a ModelParams entry; cached per name so shared
    // weights accumulate into one node
    Var param(ModelParams& params, const std::string& name);

    // after backward(), adds every cached parameter node's grad into the
    // bound ModelParams gradient slots
    void flush_param_grads();

    void backward(Var root);  // root must be scalar

    Node& node(int id) { return nodes_[size_t(id)]; }
    const Node& node(int id) const { return nodes_[size_t(id)]; }
    Tensor& val(Var v) { return nodes_[size_t(v.id)].val; }
    Tensor& grad(Var v) { return nodes_[size_t(v.id)].grad; }
    size_t size() const { return nodes_.size(); }

    Var emit(Tensor val, std::function<void(Tape&)> back);

private:
    std::vector<Node> nodes_;
    ModelParams* bound_ = nullptr;
    std::unordered_map<std::string, int> param_cache_;
};

// ---- elementwise & scalar ----
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var neg(Var a);
Var add_scalar_var(Var a, Var s);      // broadcast scalar variable
Var div_const(Var a, const std::vector<double>& d);
Var sigmoid(Var a);
Var gelu(Var a);
Var clamp01(Var a);
Var soft_shrink(Var a, Var tau);       // tau: scalar param, effective max(tau,0)
// y = (a < threshold) ? 1 : 0; gradient flows straight through the soft
// surrogate 1 - a, i.e. upstream grads are negated
Var binarize_less(Var a, double threshold);

// ---- reductions / loss ----
Var sum(Var a);
Var sse(Var a, Var b);                 // sum of squared differences, scalar

// ---- linear algebra (2D) ----
Var matmul(Var a, Var b);              // (m,k)(k,n)
Var matmul_tn(Var a, Var b);           // A^T B: (k,m)(k,n) -> (m,n)
Var matmul_nt(Var a, Var b);           // A B^T: (m,k)(n,k) -> (m,n)
Var softmax_rows(Var a);
Var layer_norm_cols(Var a, Var gamma, Var beta);  // normalize each column over rows
Var add_bias_rows(Var a, Var bias);    // bias[r] added across row r
Var reshape(Var a, std::vector<uint32_t> shape);
Var slice_rows(Var a, uint32_t r0, uint32_t r1);
Var concat_rows(const std::vector<Var>& parts);
Var gather_cols(Var a, const std::vector<uint32_t>& idx);
Var scatter_cols(Var a, const std::vector<uint32_t>& idx, uint32_t ncols);

// ---- conv / resampling (shapes C,H,W) ----
enum class Pad { Zero, Replicate };
Var conv3x3(Var x, Var w, Var b, int stride, Pad pad);  // w: (Co,Ci,3,3), b: (Co)
Var upsample_nearest(Var x, int factor);

// ---- optical model ops ----
// y = sum_l shear_d(1/2 M . x_l); x: (nlam,nx,ny), mask: (nx,ny) -> (nx,wy)
Var cassi_forward_op(Var x, Var mask, uint32_t d);
// x_l = 1/2 M . unshear_d(y); y: (nx,wy) -> (nlam,nx,ny)
Var cassi_adjoint_op(Var y, Var mask, uint32_t d, uint32_t nlam);

}  // namespace dmdc::ad
