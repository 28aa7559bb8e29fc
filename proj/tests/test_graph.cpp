#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "svimo/graph.hpp"
#include "svimo/nn.hpp"
#include "svimo/rng.hpp"

using namespace svimo;

TEST_CASE("elementwise ops match finite differences") {
    RngStream rng(7, "test");
    ParamStore store;
    Param& p = store.create("x", {3, 4});
    init_normal(p, rng, 0.8);
    Tensor other = rng.normal_tensor({3, 4});

    // probe weights keep the scalarization well-conditioned (a pure mean of
    // squares is nearly flat through layernorm)
    auto check = [&](const char* name, std::function<Var(Graph&, Var)> op) {
        store.zero_grads();
        auto scalarize = [&](Graph& g, Var y) {
            Tensor w = Tensor(y.val().shape());
            for (int64_t i = 0; i < w.numel(); ++i) w[i] = 0.3 + 0.1 * static_cast<double>(i % 7);
            return g.add(g.mean(g.mul(y, y)), g.mean(g.mul(y, g.leaf(std::move(w)))));
        };
        {
            Graph g2;
            Var loss = scalarize(g2, op(g2, g2.use(p)));
            g2.backward(loss);
        }
        auto res = oracle::grad_check(
            p.value, p.grad,
            [&]() {
                Graph g3;
                return scalarize(g3, op(g3, g3.use(p))).val()[0];
            },
            1e-6);
        INFO(name);
        CHECK(res.max_rel_err < 1e-5);
    };

    check("add", [&](Graph& g, Var x) { return g.add(x, g.leaf(other)); });
    check("sub", [&](Graph& g, Var x) { return g.sub(g.leaf(other), x); });
    check("mul", [&](Graph& g, Var x) { return g.mul(x, g.leaf(other)); });
    check("scale", [&](Graph& g, Var x) { return g.scale(x, -1.7); });
    check("add_const", [&](Graph& g, Var x) { return g.add_const(x, 0.3); });
    check("gelu", [&](Graph& g, Var x) { return g.gelu(x); });
    check("silu", [&](Graph& g, Var x) { return g.silu(x); });
    check("abs", [&](Graph& g, Var x) { return g.abs(x); });
    check("layernorm", [&](Graph& g, Var x) { return g.layernorm(x, 1e-6); });
    check("softmax", [&](Graph& g, Var x) { return g.softmax_rows(x); });
    check("reshape", [&](Graph& g, Var x) { return g.reshape(x, {4, 3}); });
    check("tile", [&](Graph& g, Var x) { return g.tile_rows(x, 3); });
    check("slice_rows", [&](Graph& g, Var x) { return g.slice_rows(x, 1, 3); });
    check("slice_cols", [&](Graph& g, Var x) { return g.slice_cols(x, 1, 4); });
}

TEST_CASE("matmul family matches finite differences") {
    RngStream rng(11, "test");
    ParamStore store;
    Param& a = store.create("a", {3, 5});
    Param& b = store.create("b", {5, 4});
    Param& bt = store.create("bt", {4, 5});
    init_normal(a, rng, 0.6);
    init_normal(b, rng, 0.6);
    init_normal(bt, rng, 0.6);

    auto run = [&](Param& target, std::function<double(Graph&)> build) {
        store.zero_grads();
        Graph g;
        double v = build(g);
        (void)v;
        g.backward(Var{&g, static_cast<int>(g.size()) - 1});
        auto res = oracle::grad_check(target.value, target.grad,
                                      [&]() {
                                          Graph g3;
                                          return build(g3);
                                      },
                                      1e-6);
        CHECK(res.max_rel_err < 1e-6);
    };

    run(a, [&](Graph& g) { return g.mean(g.matmul(g.use(a), g.use(b))).val()[0]; });
    run(b, [&](Graph& g) { return g.mean(g.matmul(g.use(a), g.use(b))).val()[0]; });
    run(a, [&](Graph& g) { return g.mean(g.matmul_nt(g.use(a), g.use(bt))).val()[0]; });
    run(bt, [&](Graph& g) { return g.mean(g.matmul_nt(g.use(a), g.use(bt))).val()[0]; });
}

TEST_CASE("row ops, gather, concat, patchify round out the op set") {
    RngStream rng(13, "test");
    ParamStore store;
    Param& x = store.create("x", {4, 6});
    Param& v = store.create("v", {6});
    init_normal(x, rng, 0.5);
    init_normal(v, rng, 0.5);

    auto run = [&](Param& target, std::function<double(Graph&)> build) {
        store.zero_grads();
        Graph g;
        double val = build(g);
        (void)val;
        g.backward(Var{&g, static_cast<int>(g.size()) - 1});
        auto res = oracle::grad_check(target.value, target.grad,
                                      [&]() {
                                          Graph g2;
                                          return build(g2);
                                      },
                                      1e-6);
        CHECK(res.max_rel_err < 1e-6);
    };

    run(v, [&](Graph& g) { return g.mean(g.row_add(g.use(x), g.use(v))).val()[0]; });
    run(x, [&](Graph& g) {
        Var y = g.row_mul(g.use(x), g.use(v));
        return g.mean(g.mul(y, y)).val()[0];
    });
    run(v, [&](Graph& g) {
        Var y = g.row_mul(g.use(x), g.use(v));
        return g.mean(g.mul(y, y)).val()[0];
    });
    run(x, [&](Graph& g) {
        Var c = g.concat_rows({g.use(x), g.leaf(Tensor::zeros({2, 6}))});
        Var d = g.concat_cols({c, g.leaf(Tensor::full({6, 2}, 0.5))});
        return g.mean(g.mul(d, d)).val()[0];
    });
    run(x, [&](Graph& g) {
        Var got = g.gather_rows(g.use(x), {1, 1, 3, 0});
        return g.mean(g.mul(got, got)).val()[0];
    });
    run(x, [&](Graph& g) {
        Var grid = g.reshape(g.use(x), {1, 2, 4, 3});  // [T,H,W,C]
        Var toks = g.patchify(grid, 2);
        Var back = g.unpatchify(toks, 1, 2, 4, 3, 2);
        return g.mean(g.mul(back, back)).val()[0];
    });
    run(x, [&](Graph& g) {
        Var grid = g.reshape(g.use(x), {1, 2, 4, 3});
        Var cols = g.im2col3d(grid, 3, 3, 3, 1, 2, 2, 1, 1, 1);
        return g.mean(g.mul(cols, cols)).val()[0];
    });
}

TEST_CASE("patchify/unpatchify are exact inverses with one-hot locality") {
    RngStream rng(17, "test");
    Tensor grid = rng.normal_tensor({2, 4, 6, 5});
    Graph g;
    Var toks = g.patchify(g.leaf(grid), 2);
    Var back = g.unpatchify(toks, 2, 4, 6, 5, 2);
    for (int64_t i = 0; i < grid.numel(); ++i) CHECK(back.val()[i] == grid[i]);

    // a one-hot token perturbation must land in exactly one 2x2 spatial block
    Tensor toks2 = toks.val();
    toks2[static_cast<int64_t>(7) * toks2.dim(1) + 3] += 1.0;
    Graph g2;
    Var back2 = g2.unpatchify(g2.leaf(toks2), 2, 4, 6, 5, 2);
    int64_t changed = 0;
    for (int64_t i = 0; i < grid.numel(); ++i) {
        if (back2.val()[i] != back.val()[i]) ++changed;
    }
    CHECK(changed == 1);
}

TEST_CASE("chamfer node gradient matches finite differences") {
    RngStream rng(19, "test");
    ParamStore store;
    Param& a = store.create("a", {5, 3});
    Param& b = store.create("b", {4, 3});
    init_normal(a, rng, 1.0);
    init_normal(b, rng, 1.0);
    auto build = [&](Graph& g) { return g.chamfer_pair(g.use(a), g.use(b)).val()[0]; };
    {
        Graph g;
        build(g);
        g.backward(Var{&g, static_cast<int>(g.size()) - 1});
    }
    for (Param* p : {&a, &b}) {
        auto res = oracle::grad_check(p->value, p->grad,
                                      [&]() {
                                          Graph g2;
                                          return build(g2);
                                      },
                                      1e-6);
        CHECK(res.max_rel_err < 1e-6);
    }
}

TEST_CASE("detach stops gradients exactly") {
    RngStream rng(23, "test");
    ParamStore store;
    Param& x = store.create("x", {2, 2});
    init_normal(x, rng, 1.0);
    Graph g;
    Var loss = g.mean(g.detach(g.use(x)));
    g.backward(loss);
    CHECK(x.grad.max_abs() == 0.0);
}

TEST_CASE("softmax rows sum to one") {
    RngStream rng(29, "test");
    Graph g;
    Var y = g.softmax_rows(g.leaf(rng.normal_tensor({6, 9}, 3.0)));
    for (int64_t i = 0; i < 6; ++i) {
        double s = 0.0;
        for (int64_t j = 0; j < 9; ++j) s += y.val()[i * 9 + j];
        CHECK(std::fabs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("attention helper is permutation-equivariant over tokens") {
    RngStream rng(31, "test");
    ParamStore store;
    AttentionLayer attn = make_attention(store, "attn", 8, 2, rng, 0.3);
    Tensor x = rng.normal_tensor({5, 8});
    Graph g1;
    Var out1 = attention(g1, g1.leaf(x), g1.leaf(x), attn);
    // swap rows 1 and 3
    Tensor xp = x;
    for (int64_t c = 0; c < 8; ++c) std::swap(xp[1 * 8 + c], xp[3 * 8 + c]);
    Graph g2;
    Var out2 = attention(g2, g2.leaf(xp), g2.leaf(xp), attn);
    for (int64_t c = 0; c < 8; ++c) {
        CHECK(std::fabs(out1.val()[1 * 8 + c] - out2.val()[3 * 8 + c]) < 1e-10);
        CHECK(std::fabs(out1.val()[3 * 8 + c] - out2.val()[1 * 8 + c]) < 1e-10);
        CHECK(std::fabs(out1.val()[0 * 8 + c] - out2.val()[0 * 8 + c]) < 1e-10);
    }
}

TEST_CASE("sinusoidal embedding of t=0 alternates zeros and ones") {
    Tensor e = sinusoidal_embedding(0, 8);
    for (int64_t i = 0; i < 8; i += 2) {
        CHECK(e[i] == 0.0);
        CHECK(e[i + 1] == 1.0);
    }
}

TEST_CASE("rng streams are independent and serializable") {
    RngStream a(42, "data");
    RngStream b(42, "diffusion-noise");
    CHECK(a.uniform() != b.uniform());

    RngStream c(42, "data");
    c.uniform();  // align with a
    std::string state = c.serialize();
    double expect1 = c.normal();
    double expect2 = c.normal();
    RngStream d(0, "data");
    d.deserialize(state);
    CHECK(d.normal() == expect1);
    CHECK(d.normal() == expect2);
}
