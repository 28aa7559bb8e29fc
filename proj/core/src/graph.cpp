#include "svimo/graph.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "svimo/errors.hpp"

namespace svimo {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

CMapMat as_cmat(const Tensor& t, int64_t rows, int64_t cols) {
    return CMapMat(t.data(), rows, cols);
}

MapMat as_mat(Tensor& t, int64_t rows, int64_t cols) {
    return MapMat(t.data(), rows, cols);
}

void require_rank2(const Tensor& t, const char* what) {
    if (t.rank() != 2) throw ShapeError(std::string(what) + ": expected rank-2, got " + t.shape_str());
}

}  // namespace

int Graph::add_node(Tensor value, std::vector<int> parents,
                    std::function<void(Graph&, Node&)> backprop) {
    Node n;
    n.value = std::move(value);
    n.parents = std::move(parents);
    for (int p : n.parents) {
        if (nodes_[static_cast<size_t>(p)].needs_grad) n.needs_grad = true;
    }
    n.backprop = n.needs_grad ? std::move(backprop) : nullptr;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Graph::grad_buf(int id) {
    Node& n = node(id);
    if (n.grad.numel() == 0) n.grad = Tensor(n.value.shape());
    return n.grad;
}

Var Graph::leaf(Tensor value) {
    int id = add_node(std::move(value), {}, nullptr);
    return {this, id};
}

Var Graph::use(Param& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return {this, it->second};
    Node n;
    n.value = p.value;
    n.needs_grad = true;
    n.param = &p;
    nodes_.push_back(std::move(n));
    int id = static_cast<int>(nodes_.size()) - 1;
    param_nodes_[&p] = id;
    return {this, id};
}

Var Graph::add(Var a, Var b) {
    check_same_shape(a.val(), b.val(), "add");
    Tensor out = a.val();
    const Tensor& bv = b.val();
    for (int64_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
    int ia = a.id, ib = b.id;
    int id = add_node(std::move(out), {ia, ib}, [ia, ib](Graph& g, Node& self) {
        for (int pid : {ia, ib}) {
            if (!g.node(pid).needs_grad) continue;
            Tensor& pg = g.grad_buf(pid);
            for (int64_t i = 0; i < pg.numel(); ++i) pg[i] += self.grad[i];
        }
    });
    return {this, id};
}

Var Graph::sub(Var a, Var b) {
    check_same_shape(a.val(), b.val(), "sub");
    Tensor out = a.val();
    const Tensor& bv = b.val();
    for (int64_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
    int ia = a.id, ib = b.id;
    int id = add_node(std::move(out), {ia, ib}, [ia, ib](Graph& g, Node& self) {
        if (g.node(ia).needs_grad) {
            Tensor& pg = g.grad_buf(ia);
            for (int64_t i = 0; i < pg.numel(); ++i) pg[i] += self.grad[i];
        }
        if (g.node(ib).needs_grad) {
            Tensor& pg = g.grad_buf(ib);
            for (int64_t i = 0; i < pg.numel(); ++i) pg[i] -= self.grad[i];
        }
    });
    return {this, id};
}

Var Graph::mul(Var a, Var b) {
    check_same_shape(a.val(), b.val(), "mul");
    Tensor out = a.val();
    const Tensor& bv = b.val();
    for (int64_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
    int ia = a.id, ib = b.id;
    int id = add_node(std::move(out), {ia, ib}, [ia, ib](Graph& g, Node& self) {
        if (g.node(ia).needs_grad) {
            Tensor& pg = g.grad_buf(ia);
            const Tensor& bv2 = g.node(ib).value;
            for (int64_t i = 0; i < pg.numel(); ++i) pg[i] += self.grad[i] * bv2[i];
        }
        if (g.node(ib).needs_grad) {
            Tensor& pg = g.grad_buf(ib);
            const Tensor& av2 = g.node(ia).value;
            for (int64_t i = 0; i < pg.numel(); ++i) pg[i] += self.grad[i] * av2[i];
        }
    });
    return {this, id};
}

Var Graph::scale(Var a, double c) {
    Tensor out = a.val();
    for (int64_t i = 0; i < out.numel(); ++i) out[i] *= c;
    int ia = a.id;
    int id = add_node(std::move(out), {ia}, [ia, c](Graph& g, Node& self) {
        if (!g.node(ia).needs_grad) return;
        Tensor& pg = g.grad_buf(ia);
        for (int64_t i = 0; i < pg.numel(); ++i) pg[i] += self.grad[i] * c;
    });
    return {this, id};
}

Var Graph::add_const(Var a, double c) {
    Tensor out = a.val();
    for (int64_t i = 0; i < out.numel(); ++i) out[i] += c;
    int ia = a.id;
    int id = add_node(std::move(out), {ia}, [ia](Graph& g, Node& self) {
        if (!g.node(ia).needs_grad) return;
        Tensor& pg = g.grad_buf(ia);
        for (int64_t i = 0; i < pg.numel(); ++i) pg[i] += self.grad[i];
    });
    return {this, id};
}

Var Graph::abs(Var a) {
    Tensor out = a.val();
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::fabs(out[i]);
    int ia = a.id;
    int id = add_node(std::move(out), {ia}, [ia](Graph& g, Node& self) {
        if (!g.node(ia).needs_grad) return;
        Tensor& pg = g.grad_buf(ia);
        const Tensor& av = g.node(ia).value;
        for (int64_t i = 0; i < pg.numel(); ++i) {
            double s = av[i] > 0.0 ? 1.0 : (av[i] < 0.0 ? -1.0 : 0.0);
            pg[i] += self.grad[i] * s;
        }
    });
    return {this, id};
}

Var Graph::gelu(Var a) {
    static const double kC = std::sqrt(2.0 / M_PI);
    static const double kA = 0.044715;
    Tensor out = a.val();
    for (int64_t i = 0; i < out.numel(); ++i) {
        double x = out[i];
        out[i] = 0.5 * x * (1.0 + std::tanh(kC * (x + kA * x * x * x)));
    }
    int ia = a.id;
    int id = add_node(std::move(out), {ia}, [ia](Graph& g, Node& self) {
        if (!g.node(ia).needs_grad) return;
        Tensor& pg = g.grad_buf(ia);
        const Tensor& av = g.node(ia).value;
        for (int64_t i = 0; i < pg.numel(); ++i) {
            double x = av[i];
            double u = kC * (x + kA * x * x * x);
            double th = std::tanh(u);
            double d = 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kC * (1.0 + 3.0 * kA * x * x);
            pg[i] += self.grad[i] * d;
        }
    });
    return {this, id};
}

Var Graph::silu(Var a) {
    Tensor out = a.val();
    for (int64_t i = 0; i < out.numel(); ++i) {
        double x = out[i];
        out[i] = x / (1.0 + std::exp(-x));
    }
    int ia = a.id;
    int id = add_node(std::move(out), {ia}, [ia](Graph& g, Node& self) {
        if (!g.node(ia).needs_grad) return;
        Tensor& pg = g.grad_buf(ia);
        const Tensor& av = g.node(ia).value;
        for (int64_t i = 0; i < pg.numel(); ++i) {
            double x = av[i];
            double s = 1.0 / (1.0 + std::exp(-x));
            pg[i] += self.grad[i] * (s * (1.0 + x * (1.0 - s)));
        }
    });
    return {this, id};
}

Var Graph::matmul(Var a, Var b) {
    require_rank2(a.val(), "matmul a");
    require_rank2(b.val(), "matmul b");
    int64_t m = a.val().dim(0), k = a.val().dim(1), k2 = b.val().dim(0), n = b.val().dim(1);
    if (k != k2) throw ShapeError("matmul: inner dims " + a.val().shape_str() + " x " + b.val().shape_str());
    Tensor out({m, n});
    as_mat(out, m, n).noalias() = as_cmat(a.val(), m, k) * as_cmat(b.val(), k, n);
    int ia = a.id, ib = b.id;
    int id = add_node(std::move(out), {ia, ib}, [ia, ib, m, k, n](Graph& g, Node& self) {
        CMapMat dC = as_cmat(self.grad, m, n);
        if (g.node(ia).needs_grad) {
            MapMat dA = as_mat(g.grad_buf(ia), m, k);
            dA.noalias() += dC * as_cmat(g.node(ib).value, k, n).transpose();
        }
        if (g.node(ib).needs_grad) {
            MapMat dB = as_mat(g.grad_buf(ib), k, n);
            dB.noalias() += as_cmat(g.node(ia).value, m, k).transpose() * dC;
        }
    });
    return {this, id};
}

Var Graph::matmul_nt(Var a, Var b) {
    require_rank2(a.val(), "matmul_nt a");
    require_rank2(b.val(), "matmul_nt b");
    int64_t m = a.val().dim(0), k = a.val().dim(1), n = b.val().dim(0), k2 = b.val().dim(1);
    if (k != k2) throw ShapeError("matmul_nt: inner dims " + a.val().shape_str() + " x " + b.val().shape_str() + "^T");
    Tensor out({m, n});
    as_mat(out, m, n).noalias() = as_cmat(a.val(), m, k) * as_cmat(b.val(), n, k).transpose();
    int ia = a.id, ib = b.id;
    int id = add_node(std::move(out), {ia, ib}, [ia, ib, m, k, n](Graph& g, Node& self) {
        CMapMat dC = as_cmat(self.grad, m, n);
        if (g.node(ia).needs_grad) {
            MapMat dA = as_mat(g.grad_buf(ia), m, k);
            dA.noalias() += dC * as_cmat(g.node(ib).value, n, k);
        }
        if (g.node(ib).needs_grad) {
            MapMat dB = as_mat(g.grad_buf(ib), n, k);
            dB.noalias() += dC.transpose() * as_cmat(g.node(ia).value, m, k);
        }
    });
    return {this, id};
}

Var Graph::row_add(Var x, Var v) {
    require_rank2(x.val(), "row_add x");
    int64_t r = x.val().dim(0), c = x.val().dim(1);
    if (v.val().numel() != c) throw ShapeError("row_add: vector length " + v.val().shape_str());
    Tensor out = x.val();
    const Tensor& vv = v.val();
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j) out[i * c + j] += vv[j];
    int ix = x.id, iv = v.id;
    int id = add_node(std::move(out), {ix, iv}, [ix, iv, r, c](Graph& g, Node& self) {
        if (g.node(ix).needs_grad) {
            Tensor& pg = g.grad_buf(ix);
            for (int64_t i = 0; i < pg.numel(); ++i) pg[i] += self.grad[i];
        }
        if (g.node(iv).needs_grad) {
            Tensor& pg = g.grad_buf(iv);
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < c; ++j) pg[j] += self.grad[i * c + j];
        }
    });
    return {this, id};
}

Var Graph::row_mul(Var x, Var v) {
    require_rank2(x.val(), "row_mul x");
    int64_t r = x.val().dim(0), c = x.val().dim(1);
    if (v.val().numel() != c) throw ShapeError("row_mul: vector length " + v.val().shape_str());
    Tensor out = x.val();
    const Tensor& vv = v.val();
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j) out[i * c + j] *= vv[j];
    int ix = x.id, iv = v.id;
    int id = add_node(std::move(out), {ix, iv}, [ix, iv, r, c](Graph& g, Node& self) {
        if (g.node(ix).needs_grad) {
            Tensor& pg = g.grad_buf(ix);
            const Tensor& vv2 = g.node(iv).value;
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < c; ++j) pg[i * c + j] += self.grad[i * c + j] * vv2[j];
        }
        if (g.node(iv).needs_grad) {
            Tensor& pg = g.grad_buf(iv);
            const Tensor& xv = g.node(ix).value;
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < c; ++j) pg[j] += self.grad[i * c + j] * xv[i * c + j];
        }
    });
    return {this, id};
}

Var Graph::layernorm(Var x, double eps) {
    require_rank2(x.val(), "layernorm");
    int64_t r = x.val().dim(0), c = x.val().dim(1);
    Tensor out({r, c});
    Tensor stats({r, 2});  // mean, rstd per row
    const Tensor& xv = x.val();
    for (int64_t i = 0; i < r; ++i) {
        double m = 0.0;
        for (int64_t j = 0; j < c; ++j) m += xv[i * c + j];
        m /= static_cast<double>(c);
        double var = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            double d = xv[i * c + j] - m;
            var += d * d;
        }
        var /= static_cast<double>(c);
        double rstd = 1.0 / std::sqrt(var + eps);
        stats[i * 2] = m;
        stats[i * 2 + 1] = rstd;
        for (int64_t j = 0; j < c; ++j) out[i * c + j] = (xv[i * c + j] - m) * rstd;
    }
    int ix = x.id;
    int id = add_node(std::move(out), {ix},
                      [ix, r, c, stats = std::move(stats)](Graph& g, Node& self) {
                          if (!g.node(ix).needs_grad) return;
                          Tensor& pg = g.grad_buf(ix);
                          const Tensor& xv2 = g.node(ix).value;
                          for (int64_t i = 0; i < r; ++i) {
                              double m = stats[i * 2], rstd = stats[i * 2 + 1];
                              double dmean = 0.0, dnormmean = 0.0;
                              for (int64_t j = 0; j < c; ++j) {
                                  double norm = (xv2[i * c + j] - m) * rstd;
                                  double dn = self.grad[i * c + j];
                                  dmean += dn;
                                  dnormmean += dn * norm;
                              }
                              dmean /= static_cast<double>(c);
                              dnormmean /= static_cast<double>(c);
                              for (int64_t j = 0; j < c; ++j) {
                                  double norm = (xv2[i * c + j] - m) * rstd;
                                  double dn = self.grad[i * c + j];
                                  pg[i * c + j] += (dn - dmean - norm * dnormmean) * rstd;
                              }
                          }
                      });
    return {this, id};
}

Var Graph::softmax_rows(Var x) {
    require_rank2(x.val(), "softmax_rows");
    int64_t r = x.val().dim(0), c = x.val().dim(1);
    Tensor out({r, c});
    const Tensor& xv = x.val();
    for (int64_t i = 0; i < r; ++i) {
        double mx = xv[i * c];
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, xv[i * c + j]);
        double z = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            double e = std::exp(xv[i * c + j] - mx);
            out[i * c + j] = e;
            z += e;
        }
        for (int64_t j = 0; j < c; ++j) out[i * c + j] /= z;
    }
    int ix = x.id;
    int id = add_node(std::move(out), {ix}, [ix, r, c](Graph& g, Node& self) {
        if (!g.node(ix).needs_grad) return;
        Tensor& pg = g.grad_buf(ix);
        const Tensor& y = self.value;
        for (int64_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (int64_t j = 0; j < c; ++j) dot += self.grad[i * c + j] * y[i * c + j];
            for (int64_t j = 0; j < c; ++j)
                pg[i * c + j] += y[i * c + j] * (self.grad[i * c + j] - dot);
        }
    });
    return {this, id};
}

Var Graph::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: empty");
    int64_t c = parts[0].val().dim(1), rows = 0;
    std::vector<int> ids;
    for (const Var& p : parts) {
        require_rank2(p.val(), "concat_rows");
        if (p.val().dim(1) != c) throw ShapeError("concat_rows: column mismatch");
        rows += p.val().dim(0);
        ids.push_back(p.id);
    }
    Tensor out({rows, c});
    int64_t off = 0;
    for (const Var& p : parts) {
        const Tensor& v = p.val();
        std::copy(v.data(), v.data() + v.numel(), out.data() + off);
        off += v.numel();
    }
    int id = add_node(std::move(out), ids, [ids, c](Graph& g, Node& self) {
        int64_t off2 = 0;
        for (int pid : ids) {
            int64_t n = g.node(pid).value.numel();
            if (g.node(pid).needs_grad) {
                Tensor& pg = g.grad_buf(pid);
                for (int64_t i = 0; i < n; ++i) pg[i] += self.grad[off2 + i];
            }
            off2 += n;
        }
    });
    return {this, id};
}

Var Graph::slice_rows(Var x, int64_t r0, int64_t r1) {
    require_rank2(x.val(), "slice_rows");
    int64_t r = x.val().dim(0), c = x.val().dim(1);
    if (r0 < 0 || r1 > r || r0 > r1) throw ShapeError("slice_rows: bad range");
    Tensor out({r1 - r0, c});
    std::copy(x.val().data() + r0 * c, x.val().data() + r1 * c, out.data());
    int ix = x.id;
    int id = add_node(std::move(out), {ix}, [ix, r0, c](Graph& g, Node& self) {
        if (!g.node(ix).needs_grad) return;
        Tensor& pg = g.grad_buf(ix);
        for (int64_t i = 0; i < self.grad.numel(); ++i) pg[r0 * c + i] += self.grad[i];
    });
    return {this, id};
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: empty");
    int64_t r = parts[0].val().dim(0), cols = 0;
    std::vector<int> ids;
    std::vector<int64_t> widths;
    for (const Var& p : parts) {
        require_rank2(p.val(), "concat_cols");
        if (p.val().dim(0) != r) throw ShapeError("concat_cols: row mismatch");
        cols += p.val().dim(1);
        widths.push_back(p.val().dim(1));
        ids.push_back(p.id);
    }
    Tensor out({r, cols});
    int64_t coff = 0;
    for (const Var& p : parts) {
        const Tensor& v = p.val();
        int64_t w = v.dim(1);
        for (int64_t i = 0; i < r; ++i)
            std::copy(v.data() + i * w, v.data() + (i + 1) * w, out.data() + i * cols + coff);
        coff += w;
    }
    int id = add_node(std::move(out), ids, [ids, widths, r, cols](Graph& g, Node& self) {
        int64_t coff2 = 0;
        for (size_t k = 0; k < ids.size(); ++k) {
            int64_t w = widths[k];
            if (g.node(ids[k]).needs_grad) {
                Tensor& pg = g.grad_buf(ids[k]);
                for (int64_t i = 0; i < r; ++i)
                    for (int64_t j = 0; j < w; ++j) pg[i * w + j] += self.grad[i * cols + coff2 + j];
            }
            coff2 += w;
        }
    });
    return {this, id};
}

Var Graph::slice_cols(Var x, int64_t c0, int64_t c1) {
    require_rank2(x.val(), "slice_cols");
    int64_t r = x.val().dim(0), c = x.val().dim(1);
    if (c0 < 0 || c1 > c || c0 > c1) throw ShapeError("slice_cols: bad range");
    int64_t w = c1 - c0;
    Tensor out({r, w});
    for (int64_t i = 0; i < r; ++i)
        std::copy(x.val().data() + i * c + c0, x.val().data() + i * c + c1, out.data() + i * w);
    int ix = x.id;
    int id = add_node(std::move(out), {ix}, [ix, c0, c, w, r](Graph& g, Node& self) {
        if (!g.node(ix).needs_grad) return;
        Tensor& pg = g.grad_buf(ix);
        for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < w; ++j) pg[i * c + c0 + j] += self.grad[i * w + j];
    });
    return {this, id};
}

Var Graph::reshape(Var x, std::vector<int64_t> shape) {
    Tensor out = x.val().reshaped(std::move(shape));
    int ix = x.id;
    int id = add_node(std::move(out), {ix}, [ix](Graph& g, Node& self) {
        if (!g.node(ix).needs_grad) return;
        Tensor& pg = g.grad_buf(ix);
        for (int64_t i = 0; i < pg.numel(); ++i) pg[i] += self.grad[i];
    });
    return {this, id};
}

Var Graph::tile_rows(Var x, int64_t times) {
    require_rank2(x.val(), "tile_rows");
    int64_t r = x.val().dim(0), c = x.val().dim(1);
    Tensor out({r * times, c});
    for (int64_t k = 0; k < times; ++k)
        std::copy(x.val().data(), x.val().data() + r * c, out.data() + k * r * c);
    int ix = x.id;
    int id = add_node(std::move(out), {ix}, [ix, times, r, c](Graph& g, Node& self) {
        if (!g.node(ix).needs_grad) return;
        Tensor& pg = g.grad_buf(ix);
        for (int64_t k = 0; k < times; ++k)
            for (int64_t i = 0; i < r * c; ++i) pg[i] += self.grad[k * r * c + i];
    });
    return {this, id};
}

Var Graph::gather_rows(Var table, const std::vector<int64_t>& ids) {
    require_rank2(table.val(), "gather_rows");
    int64_t v = table.val().dim(0), d = table.val().dim(1);
    Tensor out({static_cast<int64_t>(ids.size()), d});
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= v) throw ShapeError("gather_rows: id out of range");
        std::copy(table.val().data() + ids[i] * d, table.val().data() + (ids[i] + 1) * d,
                  out.data() + static_cast<int64_t>(i) * d);
    }
    int it = table.id;
    int id = add_node(std::move(out), {it}, [it, ids, d](Graph& g, Node& self) {
        if (!g.node(it).needs_grad) return;
        Tensor& pg = g.grad_buf(it);
        for (size_t i = 0; i < ids.size(); ++i)
            for (int64_t j = 0; j < d; ++j)
                pg[ids[i] * d + j] += self.grad[static_cast<int64_t>(i) * d + j];
    });
    return {this, id};
}

Var Graph::sum(Var x) {
    double s = 0.0;
    for (int64_t i = 0; i < x.val().numel(); ++i) s += x.val()[i];
    int ix = x.id;
    int id = add_node(Tensor({1}, {s}), {ix}, [ix](Graph& g, Node& self) {
        if (!g.node(ix).needs_grad) return;
        Tensor& pg = g.grad_buf(ix);
        for (int64_t i = 0; i < pg.numel(); ++i) pg[i] += self.grad[0];
    });
    return {this, id};
}

Var Graph::mean(Var x) {
    int64_t n = x.val().numel();
    if (n == 0) throw ShapeError("mean of empty tensor");
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) s += x.val()[i];
    s /= static_cast<double>(n);
    int ix = x.id;
    int id = add_node(Tensor({1}, {s}), {ix}, [ix, n](Graph& g, Node& self) {
        if (!g.node(ix).needs_grad) return;
        Tensor& pg = g.grad_buf(ix);
        double d = self.grad[0] / static_cast<double>(n);
        for (int64_t i = 0; i < pg.numel(); ++i) pg[i] += d;
    });
    return {this, id};
}

Var Graph::mse(Var a, Var b) {
    Var d = sub(a, b);
    return mean(mul(d, d));
}

Var Graph::patchify(Var x, int64_t p) {
    const Tensor& xv = x.val();
    if (xv.rank() != 4) throw ShapeError("patchify expects [T,H,W,C], got " + xv.shape_str());
    int64_t t = xv.dim(0), h = xv.dim(1), w = xv.dim(2), c = xv.dim(3);
    if (h % p != 0 || w % p != 0) throw ShapeError("patchify: spatial dims not divisible by patch");
    int64_t hb = h / p, wb = w / p;
    Tensor out({t * hb * wb, p * p * c});
    for (int64_t ti = 0; ti < t; ++ti)
        for (int64_t by = 0; by < hb; ++by)
            for (int64_t bx = 0; bx < wb; ++bx) {
                int64_t tok = (ti * hb + by) * wb + bx;
                for (int64_t dy = 0; dy < p; ++dy)
                    for (int64_t dx = 0; dx < p; ++dx) {
                        const double* src = xv.data() + ((ti * h + by * p + dy) * w + bx * p + dx) * c;
                        double* dst = out.data() + tok * (p * p * c) + (dy * p + dx) * c;
                        std::copy(src, src + c, dst);
                    }
            }
    int ix = x.id;
    int id = add_node(std::move(out), {ix}, [ix, t, h, w, c, p, hb, wb](Graph& g, Node& self) {
        if (!g.node(ix).needs_grad) return;
        Tensor& pg = g.grad_buf(ix);
        for (int64_t ti = 0; ti < t; ++ti)
            for (int64_t by = 0; by < hb; ++by)
                for (int64_t bx = 0; bx < wb; ++bx) {
                    int64_t tok = (ti * hb + by) * wb + bx;
                    for (int64_t dy = 0; dy < p; ++dy)
                        for (int64_t dx = 0; dx < p; ++dx) {
                            const double* src = self.grad.data() + tok * (p * p * c) + (dy * p + dx) * c;
                            double* dst = pg.data() + ((ti * h + by * p + dy) * w + bx * p + dx) * c;
                            for (int64_t k = 0; k < c; ++k) dst[k] += src[k];
                        }
                }
    });
    return {this, id};
}

Var Graph::unpatchify(Var x, int64_t t, int64_t h, int64_t w, int64_t c, int64_t p) {
    const Tensor& xv = x.val();
    require_rank2(xv, "unpatchify");
    int64_t hb = h / p, wb = w / p;
    if (xv.dim(0) != t * hb * wb || xv.dim(1) != p * p * c) {
        throw ShapeError("unpatchify: token grid mismatch " + xv.shape_str());
    }
    Tensor out({t, h, w, c});
    for (int64_t ti = 0; ti < t; ++ti)
        for (int64_t by = 0; by < hb; ++by)
            for (int64_t bx = 0; bx < wb; ++bx) {
                int64_t tok = (ti * hb + by) * wb + bx;
                for (int64_t dy = 0; dy < p; ++dy)
                    for (int64_t dx = 0; dx < p; ++dx) {
                        const double* src = xv.data() + tok * (p * p * c) + (dy * p + dx) * c;
                        double* dst = out.data() + ((ti * h + by * p + dy) * w + bx * p + dx) * c;
                        std::copy(src, src + c, dst);
                    }
            }
    int ix = x.id;
    int id = add_node(std::move(out), {ix}, [ix, t, h, w, c, p, hb, wb](Graph& g, Node& self) {
        if (!g.node(ix).needs_grad) return;
        Tensor& pg = g.grad_buf(ix);
        for (int64_t ti = 0; ti < t; ++ti)
            for (int64_t by = 0; by < hb; ++by)
                for (int64_t bx = 0; bx < wb; ++bx) {
                    int64_t tok = (ti * hb + by) * wb + bx;
                    for (int64_t dy = 0; dy < p; ++dy)
                        for (int64_t dx = 0; dx < p; ++dx) {
                            const double* src = self.grad.data() + ((ti * h + by * p + dy) * w + bx * p + dx) * c;
                            double* dst = pg.data() + tok * (p * p * c) + (dy * p + dx) * c;
                            for (int64_t k = 0; k < c; ++k) dst[k] += src[k];
                        }
                }
    });
    return {this, id};
}

Var Graph::im2col3d(Var x, int kt, int kh, int kw, int st, int sh, int sw, int pt, int ph, int pw) {
    const Tensor& xv = x.val();
    if (xv.rank() != 4) throw ShapeError("im2col3d expects [T,H,W,C], got " + xv.shape_str());
    int64_t t = xv.dim(0), h = xv.dim(1), w = xv.dim(2), c = xv.dim(3);
    int64_t to = (t + 2 * pt - kt) / st + 1;
    int64_t ho = (h + 2 * ph - kh) / sh + 1;
    int64_t wo = (w + 2 * pw - kw) / sw + 1;
    if (to <= 0 || ho <= 0 || wo <= 0) throw ShapeError("im2col3d: kernel larger than padded input");
    int64_t cols = static_cast<int64_t>(kt) * kh * kw * c;
    Tensor out({to * ho * wo, cols});
    struct ColMap {
        int64_t t, h, w, c, to, ho, wo, cols;
        int kt, kh, kw, st, sh, sw, pt, ph, pw;
        // walk = true copies image -> columns, false scatters columns -> image
        void run(const double* img, double* col, double* img_grad, const double* col_grad) const {
            bool gather = img != nullptr;
            for (int64_t ot = 0; ot < to; ++ot)
                for (int64_t oy = 0; oy < ho; ++oy)
                    for (int64_t ox = 0; ox < wo; ++ox) {
                        int64_t row = (ot * ho + oy) * wo + ox;
                        for (int dt = 0; dt < kt; ++dt) {
                            int64_t it = ot * st - pt + dt;
                            if (it < 0 || it >= t) continue;
                            for (int dy = 0; dy < kh; ++dy) {
                                int64_t iy = oy * sh - ph + dy;
                                if (iy < 0 || iy >= h) continue;
                                for (int dx = 0; dx < kw; ++dx) {
                                    int64_t ix2 = ox * sw - pw + dx;
                                    if (ix2 < 0 || ix2 >= w) continue;
                                    int64_t coff = row * cols + ((static_cast<int64_t>(dt) * kh + dy) * kw + dx) * c;
                                    int64_t ioff = ((it * h + iy) * w + ix2) * c;
                                    if (gather) {
                                        for (int64_t k = 0; k < c; ++k) col[coff + k] = img[ioff + k];
                                    } else {
                                        for (int64_t k = 0; k < c; ++k) img_grad[ioff + k] += col_grad[coff + k];
                                    }
                                }
                            }
                        }
                    }
        }
    };
    ColMap map{t, h, w, c, to, ho, wo, cols, kt, kh, kw, st, sh, sw, pt, ph, pw};
    map.run(xv.data(), out.data(), nullptr, nullptr);
    int ix = x.id;
    int id = add_node(std::move(out), {ix}, [ix, map](Graph& g, Node& self) {
        if (!g.node(ix).needs_grad) return;
        Tensor& pg = g.grad_buf(ix);
        map.run(nullptr, nullptr, pg.data(), self.grad.data());
    });
    return {this, id};
}

Var Graph::chamfer_pair(Var a, Var b) {
    const Tensor& av = a.val();
    const Tensor& bv = b.val();
    if (av.rank() != 2 || av.dim(1) != 3 || bv.rank() != 2 || bv.dim(1) != 3) {
        throw ShapeError("chamfer_pair expects [P,3] and [Q,3]");
    }
    int64_t p = av.dim(0), q = bv.dim(0);
    if (p == 0 || q == 0) throw ShapeError("chamfer_pair: empty point set");
    std::vector<int64_t> nn_ab(static_cast<size_t>(p)), nn_ba(static_cast<size_t>(q));
    auto sqdist = [](const double* x, const double* y) {
        double d0 = x[0] - y[0], d1 = x[1] - y[1], d2 = x[2] - y[2];
        return d0 * d0 + d1 * d1 + d2 * d2;
    };
    double term_a = 0.0;
    for (int64_t i = 0; i < p; ++i) {
        double best = sqdist(av.data() + i * 3, bv.data());
        int64_t bj = 0;
        for (int64_t j = 1; j < q; ++j) {
            double d = sqdist(av.data() + i * 3, bv.data() + j * 3);
            if (d < best) {  // ties keep the lowest index
                best = d;
                bj = j;
            }
        }
        nn_ab[static_cast<size_t>(i)] = bj;
        term_a += best;
    }
    double term_b = 0.0;
    for (int64_t j = 0; j < q; ++j) {
        double best = sqdist(av.data(), bv.data() + j * 3);
        int64_t bi = 0;
        for (int64_t i = 1; i < p; ++i) {
            double d = sqdist(av.data() + i * 3, bv.data() + j * 3);
            if (d < best) {
                best = d;
                bi = i;
            }
        }
        nn_ba[static_cast<size_t>(j)] = bi;
        term_b += best;
    }
    double value = 0.5 * (term_a / static_cast<double>(p) + term_b / static_cast<double>(q));
    int ia = a.id, ib = b.id;
    int id = add_node(Tensor({1}, {value}), {ia, ib},
                      [ia, ib, p, q, nn_ab = std::move(nn_ab), nn_ba = std::move(nn_ba)](Graph& g, Node& self) {
                          double up = self.grad[0];
                          const Tensor& av2 = g.node(ia).value;
                          const Tensor& bv2 = g.node(ib).value;
                          double wa = up / static_cast<double>(p);  // 0.5 * 2/p
                          double wb = up / static_cast<double>(q);
                          Tensor* da = g.node(ia).needs_grad ? &g.grad_buf(ia) : nullptr;
                          Tensor* db = g.node(ib).needs_grad ? &g.grad_buf(ib) : nullptr;
                          for (int64_t i = 0; i < p; ++i) {
                              int64_t j = nn_ab[static_cast<size_t>(i)];
                              for (int64_t k = 0; k < 3; ++k) {
                                  double d = av2[i * 3 + k] - bv2[j * 3 + k];
                                  if (da) (*da)[i * 3 + k] += wa * d;
                                  if (db) (*db)[j * 3 + k] -= wa * d;
                              }
                          }
                          for (int64_t j = 0; j < q; ++j) {
                              int64_t i = nn_ba[static_cast<size_t>(j)];
                              for (int64_t k = 0; k < 3; ++k) {
                                  double d = av2[i * 3 + k] - bv2[j * 3 + k];
                                  if (da) (*da)[i * 3 + k] += wb * d;
                                  if (db) (*db)[j * 3 + k] -= wb * d;
                              }
                          }
                      });
    return {this, id};
}

Var Graph::detach(Var a) {
    return leaf(a.val());
}

void Graph::backward(Var loss) {
    if (loss.val().numel() != 1) throw ShapeError("backward expects a scalar loss");
    Node& ln = node(loss.id);
    if (!ln.needs_grad) return;  // nothing trainable upstream
    grad_buf(loss.id)[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = node(id);
        if (!n.needs_grad || n.grad.numel() == 0) continue;
        if (n.param != nullptr) {
            Tensor& pg = n.param->grad;
            for (int64_t i = 0; i < pg.numel(); ++i) pg[i] += n.grad[i];
        } else if (n.backprop) {
            n.backprop(*this, n);
        }
    }
}

}  // namespace svimo
