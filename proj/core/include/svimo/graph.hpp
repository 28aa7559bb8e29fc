#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "svimo/nn_param.hpp"
#include "svimo/tensor.hpp"

namespace svimo {

class Graph;

// Handle to a node in a Graph tape.
struct Var {
    Graph* g = nullptr;
    int id = -1;
    const Tensor& val() const;
};

// Reverse-mode tape. A fresh Graph is built per forward pass; backward()
// walks the tape once and accumulates into Param::grad sinks.
class Graph {
public:
    Var leaf(Tensor value);                 // constant, no grad tracking
    Var use(Param& p);                      // parameter leaf (memoized per graph)

    // elementwise
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double c);
    Var add_const(Var a, double c);
    Var abs(Var a);
    Var gelu(Var a);
    Var silu(Var a);

    // [M,K] x [K,N]
    Var matmul(Var a, Var b);
    // [M,K] x [N,K]^T -> [M,N]
    Var matmul_nt(Var a, Var b);

    // x: [R,C], v: [C]
    Var row_add(Var x, Var v);
    Var row_mul(Var x, Var v);

    Var layernorm(Var x, double eps);       // per row of [R,C], no affine
    Var softmax_rows(Var x);

    Var concat_rows(const std::vector<Var>& parts);
    Var slice_rows(Var x, int64_t r0, int64_t r1);
    Var concat_cols(const std::vector<Var>& parts);
    Var slice_cols(Var x, int64_t c0, int64_t c1);

    Var reshape(Var x, std::vector<int64_t> shape);
    Var tile_rows(Var x, int64_t times);    // stack `times` copies of [R,C]
    Var gather_rows(Var table, const std::vector<int64_t>& ids);

    Var sum(Var x);                         // -> [1]
    Var mean(Var x);                        // -> [1]
    Var mse(Var a, Var b);                  // mean((a-b)^2) -> [1]

    // patch x patch spatial blocks of [T,H,W,C] -> [T*(H/p)*(W/p), p*p*C]
    Var patchify(Var x, int64_t p);
    Var unpatchify(Var x, int64_t t, int64_t h, int64_t w, int64_t c, int64_t p);

    // im2col over [T,H,W,C] with zero padding -> [To*Ho*Wo, kt*kh*kw*C]
    Var im2col3d(Var x, int kt, int kh, int kw, int st, int sh, int sw, int pt, int ph, int pw);

    // halved symmetric mean squared nearest-neighbor distance, [P,3] x [Q,3]
    Var chamfer_pair(Var a, Var b);

    Var detach(Var a);

    void backward(Var loss);

    const Tensor& value(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }
    const Tensor& grad(Var v) const { return nodes_[static_cast<size_t>(v.id)].grad; }
    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool needs_grad = false;
        std::vector<int> parents;
        std::function<void(Graph&, Node&)> backprop;
        Param* param = nullptr;
    };

    friend struct Var;

    int add_node(Tensor value, std::vector<int> parents, std::function<void(Graph&, Node&)> backprop);
    Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
    Tensor& grad_buf(int id);

    std::vector<Node> nodes_;
    std::unordered_map<const Param*, int> param_nodes_;
};

inline const Tensor& Var::val() const { return g->value(*this); }

}  // namespace svimo
