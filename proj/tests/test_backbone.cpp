#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "svimo/backbone.hpp"
#include "svimo/vocab.hpp"

using namespace svimo;

namespace {

BackboneConfig tiny_config(int n_blocks = 2) {
    BackboneConfig cfg;
    cfg.shapes.N = 3;
    cfg.shapes.H = 8;
    cfg.shapes.W = 8;
    cfg.shapes.rh = 2;
    cfg.shapes.rw = 2;
    cfg.shapes.rn = 2;
    cfg.shapes.patch = 2;
    cfg.shapes.L_text = 4;
    cfg.shapes.d_model = 16;
    cfg.shapes.d_latent = cfg.shapes.lossless_latent_dim();
    cfg.n_blocks = n_blocks;
    cfg.heads = 2;
    cfg.d_time = 16;
    cfg.ffn_mult = 2;
    cfg.vocab_size = PromptVocab::grammar_vocab().size();
    cfg.schedule_T = 100;
    return cfg;
}

struct Fixture {
    BackboneConfig cfg;
    RngStream init;
    SViMoModel model;
    RngStream data;
    Tensor z_v, z_m, guidance, z_i;
    std::vector<int64_t> ids;

    explicit Fixture(int n_blocks = 2, uint64_t seed = 21)
        : cfg(tiny_config(n_blocks)),
          init(seed, "init"),
          model(cfg, init),
          data(seed, "data"),
          z_v(data.normal_tensor({cfg.shapes.lat_t(), cfg.shapes.lat_h(), cfg.shapes.lat_w(), cfg.shapes.d_latent})),
          z_m(data.normal_tensor(z_v.shape())),
          guidance(data.normal_tensor(z_v.shape())),
          z_i(data.normal_tensor({1, cfg.shapes.lat_h(), cfg.shapes.lat_w(), cfg.shapes.d_latent})),
          ids(PromptVocab::grammar_vocab().tokenize("left hand uses the box", cfg.shapes.L_text)) {}
};

void randomize_params(ParamStore& store, uint64_t seed, double stddev = 0.05) {
    RngStream rng(seed, "randomize");
    store.for_each([&](Param& p) { rng.fill_normal(p.value, stddev); });
}

}  // namespace

TEST_CASE("embed_time is deterministic and separates timesteps") {
    Fixture f;
    Graph g1, g2;
    Var a = f.model.embed_time(g1, 5);
    Var b = f.model.embed_time(g2, 5);
    for (int64_t i = 0; i < a.val().numel(); ++i) CHECK(a.val()[i] == b.val()[i]);

    // freshly initialized weights keep distinct t values apart
    std::vector<double> norms;
    for (int64_t t = 0; t < f.cfg.schedule_T; t += 7) {
        Graph g;
        Var e = f.model.embed_time(g, t);
        double n = 0.0;
        for (int64_t i = 0; i < e.val().numel(); ++i) n += e.val()[i] * e.val()[i];
        norms.push_back(std::sqrt(n));
    }
    double spread = 0.0;
    for (size_t i = 1; i < norms.size(); ++i) spread = std::max(spread, std::fabs(norms[i] - norms[0]));
    CHECK(spread > 0.0);
    CHECK_THROWS_AS(
        [&] {
            Graph g;
            f.model.embed_time(g, f.cfg.schedule_T);
        }(),
        ShapeError);
}

TEST_CASE("embed_text: padding, determinism, positional isolation, OOV") {
    Fixture f;
    PromptVocab vocab = PromptVocab::grammar_vocab();

    Graph g;
    Var empty = f.model.embed_text(g, vocab.tokenize("", f.cfg.shapes.L_text));
    // every row equals pad embedding + its positional row
    const Tensor& table = f.model.params().get("text.table").value;
    const Tensor& pos = f.model.params().get("text.pos").value;
    int64_t d = f.cfg.shapes.d_model;
    for (int64_t i = 0; i < f.cfg.shapes.L_text; ++i)
        for (int64_t c = 0; c < d; ++c) {
            CHECK(empty.val()[i * d + c] == table[0 * d + c] + pos[i * d + c]);
        }

    Graph g1, g2;
    Var t1 = f.model.embed_text(g1, vocab.tokenize("left hand uses the", f.cfg.shapes.L_text));
    Var t2 = f.model.embed_text(g2, vocab.tokenize("left hand uses the", f.cfg.shapes.L_text));
    for (int64_t i = 0; i < t1.val().numel(); ++i) CHECK(t1.val()[i] == t2.val()[i]);

    Graph g3;
    Var t3 = f.model.embed_text(g3, vocab.tokenize("right hand uses the", f.cfg.shapes.L_text));
    for (int64_t i = 0; i < f.cfg.shapes.L_text; ++i) {
        bool differs = false;
        for (int64_t c = 0; c < d; ++c) {
            if (t1.val()[i * d + c] != t3.val()[i * d + c]) differs = true;
        }
        CHECK(differs == (i == 0));  // grids differ only at the changed token
    }

    CHECK_THROWS_WITH_AS(static_cast<void>(vocab.tokenize("left hand grabs", 8)),
                         doctest::Contains("grabs"), ConfigError);
}

TEST_CASE("embed_video: token count, bias-plus-position at zeros, linear response") {
    Fixture f;
    TokenBudget budget = token_budget(f.cfg.shapes);
    Graph g;
    Var toks = f.model.embed_video(g, g.leaf(f.z_v), g.leaf(f.z_i));
    CHECK(toks.val().dim(0) == budget.video);
    CHECK(toks.val().dim(1) == f.cfg.shapes.d_model);

    // zero latent and zero image: tokens are the patch bias plus positions
    Graph gz;
    Var zt = f.model.embed_video(gz, gz.leaf(Tensor(f.z_v.shape())), gz.leaf(Tensor(f.z_i.shape())));
    const Tensor& bias = f.model.params().get("video.patch.bias").value;
    const Tensor& pt = f.model.params().get("video.pos_t").value;
    const Tensor& ph = f.model.params().get("video.pos_h").value;
    const Tensor& pw = f.model.params().get("video.pos_w").value;
    int64_t d = f.cfg.shapes.d_model;
    int64_t th = f.cfg.shapes.lat_h() / f.cfg.shapes.patch;
    int64_t tw = f.cfg.shapes.lat_w() / f.cfg.shapes.patch;
    for (int64_t tok = 0; tok < budget.video; ++tok) {
        int64_t ti = tok / (th * tw), rem = tok % (th * tw), by = rem / tw, bx = rem % tw;
        for (int64_t c = 0; c < d; ++c) {
            double want = bias[c] + pt[ti * d + c] + ph[by * d + c] + pw[bx * d + c];
            CHECK(zt.val()[tok * d + c] == doctest::Approx(want).epsilon(1e-12));
        }
    }

    // doubling z_t_V changes tokens by exactly the linear video response
    Graph ga, gb, gc;
    Var t_z = f.model.embed_video(ga, ga.leaf(f.z_v), ga.leaf(f.z_i));
    Tensor doubled = f.z_v;
    for (int64_t i = 0; i < doubled.numel(); ++i) doubled[i] *= 2.0;
    Var t_2z = f.model.embed_video(gb, gb.leaf(doubled), gb.leaf(f.z_i));
    Var t_0 = f.model.embed_video(gc, gc.leaf(Tensor(f.z_v.shape())), gc.leaf(f.z_i));
    for (int64_t i = 0; i < t_z.val().numel(); ++i) {
        double lhs = t_2z.val()[i] - t_z.val()[i];
        double rhs = t_z.val()[i] - t_0.val()[i];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    }
}

TEST_CASE("embed_motion: token count, zero guidance path, channel-role asymmetry") {
    Fixture f;
    TokenBudget budget = token_budget(f.cfg.shapes);
    Graph g;
    Var toks = f.model.embed_motion(g, g.leaf(f.z_m), g.leaf(f.guidance));
    CHECK(toks.val().dim(0) == budget.motion);
    CHECK(toks.val().all_finite());

    Graph gz;
    Var no_guid = f.model.embed_motion(gz, gz.leaf(f.z_m), gz.leaf(Tensor(f.z_m.shape())));
    CHECK(no_guid.val().all_finite());

    Graph gs;
    Var swapped = f.model.embed_motion(gs, gs.leaf(f.guidance), gs.leaf(f.z_m));
    bool any_diff = false;
    for (int64_t i = 0; i < toks.val().numel(); ++i) {
        if (std::fabs(toks.val()[i] - swapped.val()[i]) > 1e-12) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("zero-initialized gates make a 4-block stack the exact identity") {
    Fixture f(4);
    Graph g;
    Var e_t = f.model.embed_time(g, 3);
    Var text = f.model.embed_text(g, f.ids);
    Var video = f.model.embed_video(g, g.leaf(f.z_v), g.leaf(f.z_i));
    Var motion = f.model.embed_motion(g, g.leaf(f.z_m), g.leaf(f.guidance));
    Var tokens = g.concat_rows({text, video, motion});
    Tensor before = tokens.val();
    Var out = tokens;
    for (int b = 0; b < 4; ++b) out = f.model.dit_block(g, b, out, e_t);
    double max_dev = 0.0;
    for (int64_t i = 0; i < before.numel(); ++i) {
        max_dev = std::max(max_dev, std::fabs(out.val()[i] - before[i]));
    }
    CHECK(max_dev == 0.0);
}

TEST_CASE("dit_block is equivariant to permuting two video tokens") {
    Fixture f(1);
    randomize_params(f.model.params(), 77);
    TokenSpans spans = f.model.spans();
    RngStream rng(5, "tokens");
    Tensor tokens = rng.normal_tensor({spans.total(), f.cfg.shapes.d_model});

    Graph g1;
    Var e1 = f.model.embed_time(g1, 9);
    Var out1 = f.model.dit_block(g1, 0, g1.leaf(tokens), e1);

    int64_t a = spans.video_begin() + 1, b = spans.video_begin() + 5;
    Tensor permuted = tokens;
    for (int64_t c = 0; c < f.cfg.shapes.d_model; ++c) {
        std::swap(permuted[a * f.cfg.shapes.d_model + c], permuted[b * f.cfg.shapes.d_model + c]);
    }
    Graph g2;
    Var e2 = f.model.embed_time(g2, 9);
    Var out2 = f.model.dit_block(g2, 0, g2.leaf(permuted), e2);

    for (int64_t i = 0; i < spans.total(); ++i) {
        int64_t src = i == a ? b : (i == b ? a : i);
        for (int64_t c = 0; c < f.cfg.shapes.d_model; ++c) {
            CHECK(std::fabs(out2.val()[i * f.cfg.shapes.d_model + c] -
                            out1.val()[src * f.cfg.shapes.d_model + c]) < 1e-10);
        }
    }
}

TEST_CASE("cross-modal attention moves video signal into motion tokens") {
    Fixture f(1);
    randomize_params(f.model.params(), 78);
    TokenSpans spans = f.model.spans();
    RngStream rng(6, "tokens");
    Tensor tokens = rng.normal_tensor({spans.total(), f.cfg.shapes.d_model});

    Tensor mask({spans.total(), spans.total()});
    auto modality = [&](int64_t i) {
        if (i < spans.video_begin()) return 0;
        if (i < spans.motion_begin()) return 1;
        return 2;
    };
    for (int64_t i = 0; i < spans.total(); ++i)
        for (int64_t j = 0; j < spans.total(); ++j) {
            mask[i * spans.total() + j] = modality(i) == modality(j) ? 0.0 : -1e30;
        }

    Graph g1;
    ForwardOptions full_opts;
    Var out_full = f.model.dit_block(g1, 0, g1.leaf(tokens), f.model.embed_time(g1, 2), full_opts);
    Graph g2;
    ForwardOptions masked_opts;
    masked_opts.attn_mask = &mask;
    Var out_masked = f.model.dit_block(g2, 0, g2.leaf(tokens), f.model.embed_time(g2, 2), masked_opts);

    double motion_delta = 0.0;
    for (int64_t i = spans.motion_begin(); i < spans.total(); ++i)
        for (int64_t c = 0; c < f.cfg.shapes.d_model; ++c) {
            motion_delta = std::max(motion_delta,
                                    std::fabs(out_full.val()[i * f.cfg.shapes.d_model + c] -
                                              out_masked.val()[i * f.cfg.shapes.d_model + c]));
        }
    CHECK(motion_delta > 1e-9);
}

TEST_CASE("attention rows sum to one for every head through the full forward") {
    Fixture f;
    randomize_params(f.model.params(), 79);
    Graph g;
    std::vector<Tensor> probes;
    ForwardOptions opts;
    opts.attn_probe = &probes;
    f.model.forward(g, f.z_v, f.z_m, f.guidance, f.ids, f.z_i, 11, opts);
    REQUIRE(probes.size() == static_cast<size_t>(f.cfg.n_blocks * f.cfg.heads));
    for (const Tensor& attn : probes) {
        for (int64_t i = 0; i < attn.dim(0); ++i) {
            double s = 0.0;
            for (int64_t j = 0; j < attn.dim(1); ++j) s += attn[i * attn.dim(1) + j];
            CHECK(std::fabs(s - 1.0) < 1e-5);
        }
    }
}

TEST_CASE("project_out: shapes, bias-only at zero tokens, patch locality") {
    Fixture f;
    Graph g;
    Var e_t = f.model.embed_time(g, 1);
    Tensor zero_tokens({f.model.spans().total(), f.cfg.shapes.d_model});
    auto [zv, zm] = f.model.project_out(g, g.leaf(zero_tokens), e_t);
    CHECK(zv.val().shape() == f.z_v.shape());
    CHECK(zm.val().shape() == f.z_m.shape());
    // zero tokens + zero-init output modulation: bias-only, constant per channel
    const Tensor& bias = f.model.params().get("out_video.proj.bias").value;
    int64_t p = f.cfg.shapes.patch, c = f.cfg.shapes.d_latent;
    for (int64_t i = 0; i < zv.val().numel(); ++i) {
        int64_t ch = i % c;
        int64_t x = (i / c) % f.cfg.shapes.lat_w();
        int64_t y = (i / (c * f.cfg.shapes.lat_w())) % f.cfg.shapes.lat_h();
        int64_t pidx = ((y % p) * p + (x % p)) * c + ch;
        CHECK(zv.val()[i] == bias[pidx]);
    }

    // one-hot token perturbation lands in exactly one patch block of one slot
    Tensor one_hot = zero_tokens;
    int64_t tok = f.model.spans().video_begin() + 3;
    one_hot[tok * f.cfg.shapes.d_model + 2] = 1.0;
    Graph g2;
    auto [zv2, zm2] = f.model.project_out(g2, g2.leaf(one_hot), f.model.embed_time(g2, 1));
    int64_t changed_blocks = 0;
    int64_t th = f.cfg.shapes.lat_h() / p, tw = f.cfg.shapes.lat_w() / p;
    for (int64_t ti = 0; ti < f.cfg.shapes.lat_t(); ++ti)
        for (int64_t by = 0; by < th; ++by)
            for (int64_t bx = 0; bx < tw; ++bx) {
                bool changed = false;
                for (int64_t dy = 0; dy < p; ++dy)
                    for (int64_t dx = 0; dx < p; ++dx)
                        for (int64_t ch = 0; ch < c; ++ch) {
                            int64_t idx = ((ti * f.cfg.shapes.lat_h() + by * p + dy) * f.cfg.shapes.lat_w() +
                                           bx * p + dx) * c + ch;
                            if (zv2.val()[idx] != zv.val()[idx]) changed = true;
                        }
                if (changed) ++changed_blocks;
            }
    CHECK(changed_blocks == 1);
    for (int64_t i = 0; i < zm2.val().numel(); ++i) CHECK(zm2.val()[i] == zm.val()[i]);
}

TEST_CASE("svimo_forward is pure and stable on pure-noise inputs") {
    Fixture f;
    randomize_params(f.model.params(), 80);
    Graph g1, g2;
    auto [av, am] = f.model.forward(g1, f.z_v, f.z_m, f.guidance, f.ids, f.z_i, f.cfg.schedule_T - 1);
    auto [bv, bm] = f.model.forward(g2, f.z_v, f.z_m, f.guidance, f.ids, f.z_i, f.cfg.schedule_T - 1);
    CHECK(av.val().all_finite());
    CHECK(am.val().all_finite());
    for (int64_t i = 0; i < av.val().numel(); ++i) CHECK(av.val()[i] == bv.val()[i]);
    for (int64_t i = 0; i < am.val().numel(); ++i) CHECK(am.val()[i] == bm.val()[i]);
}

TEST_CASE("svimo_loss values and batch symmetry") {
    Fixture f;
    RngStream rng(3, "loss");
    Tensor z0v = rng.normal_tensor(f.z_v.shape());
    Tensor z0m = rng.normal_tensor(f.z_m.shape());
    CHECK(svimo_loss_value(z0v, z0m, z0v, z0m) == 0.0);

    Tensor off_v = z0v, off_m = z0m;
    for (int64_t i = 0; i < off_v.numel(); ++i) off_v[i] += 1.0;
    for (int64_t i = 0; i < off_m.numel(); ++i) off_m[i] += 1.0;
    CHECK(svimo_loss_value(off_v, off_m, z0v, z0m) == doctest::Approx(2.0).epsilon(1e-12));

    // permuting batch elements leaves the batch-mean loss unchanged
    Tensor a_v = rng.normal_tensor(f.z_v.shape()), a_m = rng.normal_tensor(f.z_m.shape());
    Tensor b_v = rng.normal_tensor(f.z_v.shape()), b_m = rng.normal_tensor(f.z_m.shape());
    double fwd = 0.5 * (svimo_loss_value(a_v, a_m, z0v, z0m) + svimo_loss_value(b_v, b_m, z0v, z0m));
    double rev = 0.5 * (svimo_loss_value(b_v, b_m, z0v, z0m) + svimo_loss_value(a_v, a_m, z0v, z0m));
    CHECK(fwd == rev);
}

TEST_CASE("gradients reach every weight group after one training step") {
    Fixture f(2, 33);
    AdamOptimizer opt({1e-3, 0.9, 0.999, 1e-8, 0});
    RngStream rng(4, "targets");
    Tensor z0v = rng.normal_tensor(f.z_v.shape());
    Tensor z0m = rng.normal_tensor(f.z_m.shape());

    auto step = [&]() {
        f.model.params().zero_grads();
        Graph g;
        auto [zv, zm] = f.model.forward(g, f.z_v, f.z_m, f.guidance, f.ids, f.z_i, 7);
        Var loss = svimo_loss(g, zv, zm, z0v, z0m);
        g.backward(loss);
    };
    step();
    opt.step({&f.model.params()});
    step();
    f.model.params().for_each([&](Param& p) {
        INFO(p.name);
        CHECK(p.grad.max_abs() > 0.0);
    });
}

TEST_CASE("analytic gradients match central finite differences on a weight sample") {
    Fixture f(1, 44);
    randomize_params(f.model.params(), 81);
    RngStream rng(5, "targets");
    Tensor z0v = rng.normal_tensor(f.z_v.shape());
    Tensor z0m = rng.normal_tensor(f.z_m.shape());

    auto loss_value = [&]() {
        Graph g;
        auto [zv, zm] = f.model.forward(g, f.z_v, f.z_m, f.guidance, f.ids, f.z_i, 3);
        return svimo_loss(g, zv, zm, z0v, z0m).val()[0];
    };
    f.model.params().zero_grads();
    {
        Graph g;
        auto [zv, zm] = f.model.forward(g, f.z_v, f.z_m, f.guidance, f.ids, f.z_i, 3);
        g.backward(svimo_loss(g, zv, zm, z0v, z0m));
    }
    for (const char* name : {"block0.attn.q.weight", "block0.mod_motion.weight",
                             "video.patch.weight", "out_motion.proj.weight",
                             "time.l1.weight", "block0.ffn.in.weight"}) {
        Param& p = f.model.params().get(name);
        int64_t stride = std::max<int64_t>(1, p.value.numel() / 24);
        auto res = oracle::grad_check(p.value, p.grad, loss_value, 1e-5, stride);
        INFO(name);
        CHECK(res.max_rel_err < 1e-4);
    }
}
