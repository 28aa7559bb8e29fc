#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "svimo/codec.hpp"
#include "svimo/rng.hpp"

using namespace svimo;

namespace {

ShapeConfig desk_shapes() {
    ShapeConfig s;
    s.N = 9;
    s.H = 32;
    s.W = 48;
    s.rh = 4;
    s.rw = 4;
    s.rn = 2;
    s.patch = 2;
    s.L_text = 16;
    s.d_model = 64;
    s.d_latent = s.lossless_latent_dim();
    return s;
}

ShapeConfig paper_shapes() {
    ShapeConfig s;
    s.N = 49;
    s.H = 416;
    s.W = 624;
    s.rh = 8;
    s.rw = 8;
    s.rn = 4;
    s.patch = 2;
    s.L_text = 226;
    s.d_model = 128;
    s.d_latent = s.lossless_latent_dim();
    return s;
}

VideoTensor random_video(const ShapeConfig& s, RngStream& rng) {
    VideoTensor v;
    v.frames = Tensor({s.N, s.H, s.W, 3});
    for (int64_t i = 0; i < v.frames.numel(); ++i) v.frames[i] = rng.uniform();
    return v;
}

}  // namespace

TEST_CASE("paper-scale latent grid and token budget") {
    ShapeConfig s = paper_shapes();
    CHECK(s.lat_t() == 13);
    CHECK(s.lat_h() == 52);
    CHECK(s.lat_w() == 78);
    TokenBudget b = token_budget(s);
    CHECK(b.text == 226);
    CHECK(b.video == 13182);
    CHECK(b.motion == 13182);
    CHECK(b.total == 26590);
}

TEST_CASE("token budget: minimal grid and desk config") {
    ShapeConfig s;
    s.N = 1;
    s.rh = 2;
    s.rw = 2;
    s.rn = 2;
    s.patch = 2;
    s.H = 4;
    s.W = 4;
    s.L_text = 0;
    s.d_latent = s.lossless_latent_dim();
    TokenBudget b = token_budget(s);
    CHECK(b.video == 1);
    CHECK(b.motion == 1);
    CHECK(b.total == 2);

    ShapeConfig d = desk_shapes();
    TokenBudget bd = token_budget(d);
    CHECK(bd.video == 120);  // 5 * 4 * 6
    CHECK(bd.motion == 120);
}

TEST_CASE("token budget is monotone in N, H, W, L_text") {
    ShapeConfig base = desk_shapes();
    TokenBudget b0 = token_budget(base);
    ShapeConfig bigger = base;
    bigger.N += base.rn;
    CHECK(token_budget(bigger).total > b0.total);
    bigger = base;
    bigger.H += base.rh * base.patch;
    CHECK(token_budget(bigger).total > b0.total);
    bigger = base;
    bigger.W += base.rw * base.patch;
    CHECK(token_budget(bigger).total > b0.total);
    bigger = base;
    bigger.L_text += 1;
    CHECK(token_budget(bigger).total == b0.total + 1);
}

TEST_CASE("lossless round-trip is bit-exact") {
    ShapeConfig s = desk_shapes();
    RngStream rng(101, "codec");
    for (int rep = 0; rep < 3; ++rep) {
        VideoTensor v = random_video(s, rng);
        VideoTensor back = decode(encode(v, s), s);
        REQUIRE(back.frames.same_shape(v.frames));
        for (int64_t i = 0; i < v.frames.numel(); ++i) CHECK(back.frames[i] == v.frames[i]);
    }
}

TEST_CASE("decode-encode round-trips a random latent when clamping is off") {
    ShapeConfig s = desk_shapes();
    RngStream rng(102, "codec");
    LatentVideo lat;
    lat.codes = rng.normal_tensor({s.lat_t(), s.lat_h(), s.lat_w(), s.d_latent});
    // pad slots of temporal group 0 cannot round-trip; zero them first
    int64_t c_per_frame = s.rh * s.rw * 3;
    for (int64_t y = 0; y < s.lat_h(); ++y)
        for (int64_t x = 0; x < s.lat_w(); ++x)
            for (int64_t c = c_per_frame; c < s.d_latent; ++c) {
                lat.codes[((0 * s.lat_h() + y) * s.lat_w() + x) * s.d_latent + c] = 0.0;
            }
    VideoTensor v = decode(lat, s, false);
    LatentVideo lat2 = encode(v, s);
    for (int64_t i = 0; i < lat.codes.numel(); ++i) {
        CHECK(std::fabs(lat.codes[i] - lat2.codes[i]) < 1e-7);
    }
}

TEST_CASE("all-zero latent decodes to an all-zero video") {
    ShapeConfig s = desk_shapes();
    LatentVideo lat;
    lat.codes = Tensor({s.lat_t(), s.lat_h(), s.lat_w(), s.d_latent});
    VideoTensor v = decode(lat, s);
    CHECK(v.frames.max_abs() == 0.0);
}

TEST_CASE("constant video yields constant pixel-derived latent channels") {
    ShapeConfig s = desk_shapes();
    VideoTensor v;
    v.frames = Tensor::full({s.N, s.H, s.W, 3}, 0.4);
    LatentVideo lat = encode(v, s);
    int64_t c_per_frame = s.rh * s.rw * 3;
    for (int64_t g = 0; g < s.lat_t(); ++g)
        for (int64_t y = 0; y < s.lat_h(); ++y)
            for (int64_t x = 0; x < s.lat_w(); ++x)
                for (int64_t c = 0; c < s.d_latent; ++c) {
                    double val = lat.codes[((g * s.lat_h() + y) * s.lat_w() + x) * s.d_latent + c];
                    bool pad_slot = g == 0 && c >= c_per_frame;  // frame 0 stands alone
                    CHECK(val == (pad_slot ? 0.0 : 0.4));
                }
}

TEST_CASE("encoding is translation-consistent in pixel values") {
    ShapeConfig s = desk_shapes();
    RngStream rng(103, "codec");
    VideoTensor v = random_video(s, rng);
    LatentVideo lat = encode(v, s);
    VideoTensor shifted = v;
    for (int64_t i = 0; i < shifted.frames.numel(); ++i) shifted.frames[i] += 0.125;
    LatentVideo lat2 = encode(shifted, s);
    int64_t c_per_frame = s.rh * s.rw * 3;
    for (int64_t g = 0; g < s.lat_t(); ++g)
        for (int64_t y = 0; y < s.lat_h(); ++y)
            for (int64_t x = 0; x < s.lat_w(); ++x)
                for (int64_t c = 0; c < s.d_latent; ++c) {
                    int64_t idx = ((g * s.lat_h() + y) * s.lat_w() + x) * s.d_latent + c;
                    bool pad_slot = g == 0 && c >= c_per_frame;
                    double want = pad_slot ? lat.codes[idx] : lat.codes[idx] + 0.125;
                    CHECK(lat2.codes[idx] == doctest::Approx(want).epsilon(1e-12));
                }
}

TEST_CASE("indivisible shapes are rejected") {
    ShapeConfig s = desk_shapes();
    s.N = 10;  // (N-1) % rn != 0
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = desk_shapes();
    s.H = 30;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = desk_shapes();
    s.d_latent = 17;
    CHECK_THROWS_AS(s.validate(), ConfigError);

    s = desk_shapes();
    VideoTensor bad;
    bad.frames = Tensor({s.N, s.H, s.W + 1, 3});
    CHECK_THROWS_AS(encode(bad, s), ShapeError);
}

TEST_CASE("single-frame encode matches the video path") {
    ShapeConfig s = desk_shapes();
    RngStream rng(104, "codec");
    Tensor img({s.H, s.W, 3});
    for (int64_t i = 0; i < img.numel(); ++i) img[i] = rng.uniform();
    LatentVideo li = encode_frame(img, s);
    CHECK(li.codes.dim(0) == 1);
    CHECK(li.codes.dim(3) == s.d_latent);
}

TEST_CASE("learned codec reaches the documented reconstruction target on structured video") {
    ShapeConfig s = desk_shapes();
    RngStream init(7, "codec-init");
    // flat background with a moving uniform square: the kind of structure the
    // synthetic set produces, well inside a 16-dim linear code
    std::vector<VideoTensor> vids;
    for (int v = 0; v < 2; ++v) {
        VideoTensor vid;
        vid.frames = Tensor::full({s.N, s.H, s.W, 3}, 0.5);
        for (int64_t n = 0; n < s.N; ++n) {
            int64_t x0 = 4 + 2 * n + 6 * v;
            for (int64_t y = 8; y < 16; ++y)
                for (int64_t x = x0; x < x0 + 8 && x < s.W; ++x)
                    for (int64_t c = 0; c < 3; ++c)
                        vid.frames[((n * s.H + y) * s.W + x) * 3 + c] = c == 0 ? 0.9 : 0.1;
        }
        vids.push_back(std::move(vid));
    }
    LearnedCodec codec(s, 16, init);
    RngStream train_rng(9, "codec-train");
    codec.train(vids, 4000, 3e-3, train_rng);
    CHECK(codec.reconstruction_mse(vids[0]) < 1e-3);
    LatentVideo lat = codec.encode(vids[0]);
    CHECK(lat.codes.dim(3) == 16);
}
