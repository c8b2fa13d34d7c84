#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "vibe/tinynet.hpp"

using namespace vibe;
using namespace vibe::tinynet;

namespace {

// Straight-line reference implementation, structured independently of the
// library's layout walker: consumes parameters sequentially from a cursor.
std::vector<double> reference_forward(const NetworkSpec& spec, const std::vector<double>& params,
                                      const std::vector<double>& input) {
    std::size_t cur = 0;
    auto take = [&](std::size_t n) {
        const double* p = params.data() + cur;
        cur += n;
        return p;
    };
    // per-beam mixing
    std::vector<std::vector<double>> beams(spec.lidar_beams);
    for (int b = 0; b < spec.lidar_beams; ++b) {
        beams[b].assign(input.begin() + b * spec.lidar_channels,
                        input.begin() + (b + 1) * spec.lidar_channels);
    }
    int width = spec.lidar_channels;
    for (int w : spec.mix_layers) {
        const double* wm = take(static_cast<std::size_t>(w) * width);
        const double* bm = take(w);
        for (auto& beam : beams) {
            std::vector<double> next(w);
            for (int o = 0; o < w; ++o) {
                double acc = bm[o];
                for (int i = 0; i < width; ++i) acc += wm[o * width + i] * beam[i];
                next[o] = std::tanh(acc);
            }
            beam = next;
        }
        width = w;
    }
    std::vector<double> h;
    for (const auto& beam : beams) h.insert(h.end(), beam.begin(), beam.end());
    h.insert(h.end(), input.begin() + spec.lidar_beams * spec.lidar_channels, input.end());
    for (int w : spec.dense_layers) {
        const int in = static_cast<int>(h.size());
        const double* wm = take(static_cast<std::size_t>(w) * in);
        const double* bm = take(w);
        std::vector<double> next(w);
        for (int o = 0; o < w; ++o) {
            double acc = bm[o];
            for (int i = 0; i < in; ++i) acc += wm[o * in + i] * h[i];
            next[o] = std::tanh(acc);
        }
        h = next;
    }
    const int nout = spec.head == Head::gaussian_policy ? 2 : 1;
    const int in = static_cast<int>(h.size());
    const double* wm = take(static_cast<std::size_t>(nout) * in);
    const double* bm = take(nout);
    std::vector<double> out(spec.head == Head::gaussian_policy ? 4 : 1);
    for (int o = 0; o < nout; ++o) {
        double acc = bm[o];
        for (int i = 0; i < in; ++i) acc += wm[o * in + i] * h[i];
        out[o] = acc;
    }
    if (spec.head == Head::gaussian_policy) {
        out[2] = params[cur];
        out[3] = params[cur + 1];
    }
    return out;
}

// Parameter-count oracle: enumerate every weight and bias independently.
std::size_t reference_count(const NetworkSpec& spec) {
    std::size_t n = 0;
    int in = spec.lidar_channels;
    for (int w : spec.mix_layers) {
        n += static_cast<std::size_t>(w) * in + w;
        in = w;
    }
    in = spec.lidar_beams * (spec.mix_layers.empty() ? spec.lidar_channels
                                                     : spec.mix_layers.back()) +
         spec.scalar_inputs;
    for (int w : spec.dense_layers) {
        n += static_cast<std::size_t>(w) * in + w;
        in = w;
    }
    const int nout = spec.head == Head::gaussian_policy ? 2 : 1;
    n += static_cast<std::size_t>(nout) * in + nout;
    if (spec.head == Head::gaussian_policy) n += 2;
    return n;
}

std::vector<double> random_input(const NetworkSpec& spec, Rng& rng) {
    std::vector<double> x(spec.input_dim());
    for (auto& v : x) v = rng.uniform(-1.5, 1.5);
    return x;
}

NetworkSpec small_spec(Head head) {
    NetworkSpec spec;
    spec.lidar_beams = 6;
    spec.lidar_channels = 3;
    spec.mix_layers = {5, 2};
    spec.scalar_inputs = 4;
    spec.dense_layers = {8, 5};
    spec.head = head;
    return spec;
}

}  // namespace

TEST_CASE("forward: zero weights produce a constant head bias") {
    NetworkSpec spec = small_spec(Head::scalar);
    std::vector<double> params(param_count(spec), 0.0);
    params[param_count(spec) - 1] = 0.37;  // head bias is the final parameter
    Rng rng(1);
    const auto a = forward(spec, params, random_input(spec, rng));
    const auto b = forward(spec, params, random_input(spec, rng));
    CHECK(a[0] == doctest::Approx(0.37));
    CHECK(a[0] == b[0]);
}

TEST_CASE("forward: head can pass a scalar input straight through") {
    NetworkSpec spec;
    spec.lidar_beams = 1;
    spec.lidar_channels = 1;
    spec.mix_layers = {1};
    spec.scalar_inputs = 1;
    spec.dense_layers = {};
    spec.head = Head::scalar;
    std::vector<double> params(param_count(spec), 0.0);
    // trunk is [mixed_beam, scalar]; select the scalar with weight 1
    const std::size_t head_w = param_count(spec) - 3;  // w0, w1, bias
    params[head_w + 1] = 1.0;
    for (double v : {0.3, -0.8, 2.5}) {
        const auto out = forward(spec, params, std::vector<double>{0.9, v});
        CHECK(out[0] == doctest::Approx(v));
    }
}

TEST_CASE("forward matches the straight-line reference within 1e-12") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        NetworkSpec spec;
        spec.lidar_beams = 2 + static_cast<int>(rng.uniform_int(6));
        spec.lidar_channels = 1 + static_cast<int>(rng.uniform_int(4));
        spec.mix_layers = {1 + static_cast<int>(rng.uniform_int(6)),
                           1 + static_cast<int>(rng.uniform_int(4))};
        spec.scalar_inputs = static_cast<int>(rng.uniform_int(5));
        spec.dense_layers = {1 + static_cast<int>(rng.uniform_int(10))};
        spec.head = trial % 2 == 0 ? Head::scalar : Head::gaussian_policy;
        std::vector<double> params(param_count(spec));
        for (auto& v : params) v = rng.uniform(-1, 1);
        const auto x = random_input(spec, rng);
        const auto got = forward(spec, params, x);
        const auto want = reference_forward(spec, params, x);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-12);
    }
}

TEST_CASE("forward is deterministic") {
    NetworkSpec spec = small_spec(Head::gaussian_policy);
    Rng rng(3);
    auto params = init_params(spec, rng);
    const auto x = random_input(spec, rng);
    const auto a = forward(spec, params, x);
    const auto b = forward(spec, params, x);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("backward: central-difference gradient check for both heads") {
    for (Head head : {Head::scalar, Head::gaussian_policy}) {
        NetworkSpec spec = small_spec(head);
        Rng rng(17);
        auto params = init_params(spec, rng);
        const auto x = random_input(spec, rng);
        std::vector<double> ograd(spec.output_dim());
        for (auto& v : ograd) v = rng.uniform(-1, 1);

        ForwardCache cache;
        forward(spec, params, x, &cache);
        std::vector<double> grad(params.size(), 0.0);
        backward(spec, params, cache, ograd, grad);

        auto loss = [&](const std::vector<double>& p) {
            const auto out = forward(spec, p, x);
            double acc = 0.0;
            for (std::size_t i = 0; i < out.size(); ++i) acc += ograd[i] * out[i];
            return acc;
        };

        // 20 random parameter directions, h = 1e-5
        for (int dir = 0; dir < 20; ++dir) {
            std::vector<double> d(params.size());
            double dn = 0.0;
            for (auto& v : d) {
                v = rng.normal();
                dn += v * v;
            }
            dn = std::sqrt(dn);
            for (auto& v : d) v /= dn;
            const double h = 1e-5;
            auto pp = params, pm = params;
            for (std::size_t i = 0; i < params.size(); ++i) {
                pp[i] += h * d[i];
                pm[i] -= h * d[i];
            }
            const double fd = (loss(pp) - loss(pm)) / (2 * h);
            double an = 0.0;
            for (std::size_t i = 0; i < params.size(); ++i) an += grad[i] * d[i];
            const double denom = std::max(std::abs(fd), std::abs(an));
            if (denom > 1e-10) CHECK(std::abs(fd - an) / denom < 1e-4);
        }
    }
}

TEST_CASE("backward: zero output gradient and linear scaling") {
    NetworkSpec spec = small_spec(Head::scalar);
    Rng rng(23);
    auto params = init_params(spec, rng);
    const auto x = random_input(spec, rng);
    ForwardCache cache;
    forward(spec, params, x, &cache);

    std::vector<double> zero(params.size(), 0.0);
    backward(spec, params, cache, std::vector<double>{0.0}, zero);
    for (double v : zero) CHECK(v == 0.0);

    std::vector<double> g1(params.size(), 0.0), g2(params.size(), 0.0);
    backward(spec, params, cache, std::vector<double>{1.3}, g1);
    backward(spec, params, cache, std::vector<double>{2.6}, g2);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == doctest::Approx(2.0 * g1[i]));
}

TEST_CASE("param_count matches the enumeration oracle on 20 random specs") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        NetworkSpec spec;
        spec.lidar_beams = 1 + static_cast<int>(rng.uniform_int(64));
        spec.lidar_channels = 1 + static_cast<int>(rng.uniform_int(5));
        spec.mix_layers.clear();
        const int nmix = static_cast<int>(rng.uniform_int(3));
        for (int i = 0; i < nmix; ++i)
            spec.mix_layers.push_back(1 + static_cast<int>(rng.uniform_int(15)));
        spec.scalar_inputs = static_cast<int>(rng.uniform_int(8));
        spec.dense_layers.clear();
        const int ndense = static_cast<int>(rng.uniform_int(3));
        for (int i = 0; i < ndense; ++i)
            spec.dense_layers.push_back(1 + static_cast<int>(rng.uniform_int(64)));
        spec.head = trial % 2 == 0 ? Head::scalar : Head::gaussian_policy;
        CHECK(param_count(spec) == reference_count(spec));
    }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    AdamState st(3);
    std::vector<double> p{1.0, -2.0, 0.5};
    const std::vector<double> g{0.0, 0.0, 0.0};
    adam_step(p, g, st, {});
    CHECK(p[0] == 1.0);
    CHECK(p[1] == -2.0);
    CHECK(p[2] == 0.5);
}

TEST_CASE("adam: first step has closed form") {
    AdamState st(2);
    AdamHyper hy;
    hy.lr = 0.01;
    std::vector<double> p{0.0, 0.0};
    const std::vector<double> g{0.3, -4.0};
    adam_step(p, g, st, hy);
    // bias correction is exact at t=1: update = lr * g / (|g| + eps)
    CHECK(p[0] == doctest::Approx(-hy.lr * g[0] / (std::abs(g[0]) + hy.eps)).epsilon(1e-9));
    CHECK(p[1] == doctest::Approx(-hy.lr * g[1] / (std::abs(g[1]) + hy.eps)).epsilon(1e-9));
}

TEST_CASE("adam: constant gradient moves monotonically against it") {
    AdamState st(1);
    AdamHyper hy;
    hy.lr = 0.003;
    std::vector<double> p{5.0};
    const std::vector<double> g{2.0};
    double prev = p[0];
    for (int k = 0; k < 1000; ++k) {
        adam_step(p, g, st, hy);
        CHECK(p[0] < prev);
        prev = p[0];
    }
}

TEST_CASE("checkpoint: save/load/save is byte identical") {
    NetworkSpec spec = small_spec(Head::gaussian_policy);
    Rng rng(11);
    const auto params = init_params(spec, rng);
    CheckpointMeta meta{42, 7, 123456789ULL};
    const auto bytes = save_checkpoint(spec, params, meta);
    const Checkpoint ck = load_checkpoint(bytes);
    CHECK(ck.spec == spec);
    CHECK(ck.meta.epoch == 42);
    CHECK(ck.meta.horizon == 7);
    CHECK(ck.meta.seed == 123456789ULL);
    const auto bytes2 = save_checkpoint(ck.spec, ck.params, ck.meta);
    REQUIRE(bytes.size() == bytes2.size());
    CHECK(std::memcmp(bytes.data(), bytes2.data(), bytes.size()) == 0);
}

TEST_CASE("checkpoint: corrupted magic, version, truncation") {
    NetworkSpec spec = small_spec(Head::scalar);
    Rng rng(13);
    const auto params = init_params(spec, rng);
    auto bytes = save_checkpoint(spec, params, {});

    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(load_checkpoint(bad), BadMagic);

    auto vbad = bytes;
    vbad[8] = 99;
    CHECK_THROWS_AS(load_checkpoint(vbad), VersionMismatch);

    auto tbad = bytes;
    tbad.resize(tbad.size() - 9);
    CHECK_THROWS_AS(load_checkpoint(tbad), TruncatedFile);
}

TEST_CASE("checkpoint file round trip") {
    NetworkSpec spec = small_spec(Head::scalar);
    Rng rng(29);
    const auto params = init_params(spec, rng);
    const auto path = std::filesystem::temp_directory_path() / "vibe_ckpt_test.bin";
    save_checkpoint_file(path.string(), spec, params, {3, 1, 77});
    const Checkpoint ck = load_checkpoint_file(path.string());
    CHECK(ck.params == params);
    CHECK(ck.meta.seed == 77);
    CHECK(describe(ck).find("parameters:") != std::string::npos);
    std::filesystem::remove(path);
}
