#include "vibe/tinynet.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace vibe::tinynet {

namespace {

struct LayerDims {
    int in = 0, out = 0;
    std::size_t w_off = 0, b_off = 0;  // into the flat parameter vector
};

struct Layout {
    std::vector<LayerDims> mix;
    std::vector<LayerDims> dense;
    LayerDims head;
    std::size_t log_std_off = 0;  // valid for gaussian heads
    std::size_t total = 0;
};

Layout build_layout(const NetworkSpec& spec) {
    Layout lt;
    std::size_t off = 0;
    int in = spec.lidar_channels;
    for (int width : spec.mix_layers) {
        LayerDims d{in, width, off, off + static_cast<std::size_t>(in) * width};
        off = d.b_off + width;
        lt.mix.push_back(d);
        in = width;
    }
    in = spec.trunk_dim();
    for (int width : spec.dense_layers) {
        LayerDims d{in, width, off, off + static_cast<std::size_t>(in) * width};
        off = d.b_off + width;
        lt.dense.push_back(d);
        in = width;
    }
    lt.head = {in, spec.head_out(), off, off + static_cast<std::size_t>(in) * spec.head_out()};
    off = lt.head.b_off + spec.head_out();
    if (spec.head == Head::gaussian_policy) {
        lt.log_std_off = off;
        off += 2;
    }
    lt.total = off;
    return lt;
}

void check_widths(const NetworkSpec& spec) {
    if (spec.lidar_beams < 1 || spec.lidar_channels < 1) {
        throw ShapeMismatch("lidar block must be at least 1x1");
    }
    for (int w : spec.mix_layers)
        if (w < 1) throw ShapeMismatch("mix layer width must be >= 1");
    for (int w : spec.dense_layers)
        if (w < 1) throw ShapeMismatch("dense layer width must be >= 1");
    if (spec.scalar_inputs < 0) throw ShapeMismatch("negative scalar input count");
}

// y = tanh(W x + b)
void affine_tanh(const double* w, const double* b, const double* x, int in, int out, double* y) {
    for (int o = 0; o < out; ++o) {
        double acc = b[o];
        const double* row = w + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) acc += row[i] * x[i];
        y[o] = std::tanh(acc);
    }
}

}  // namespace

std::size_t param_count(const NetworkSpec& spec) {
    check_widths(spec);
    return build_layout(spec).total;
}

std::vector<double> forward(const NetworkSpec& spec, std::span<const double> params,
                            std::span<const double> input, ForwardCache* cache) {
    check_widths(spec);
    const Layout lt = build_layout(spec);
    if (params.size() != lt.total) {
        throw ShapeMismatch("parameter vector has " + std::to_string(params.size()) +
                            " entries, spec needs " + std::to_string(lt.total));
    }
    if (input.size() != static_cast<std::size_t>(spec.input_dim())) {
        throw ShapeMismatch("input has " + std::to_string(input.size()) + " entries, spec needs " +
                            std::to_string(spec.input_dim()));
    }

    const int beams = spec.lidar_beams;
    if (cache) {
        cache->input.assign(input.begin(), input.end());
        cache->mix_act.assign(lt.mix.size(), {});
        cache->dense_act.assign(lt.dense.size(), {});
    }

    // shared per-beam channel mixing
    std::vector<double> cur(input.begin(), input.begin() + beams * spec.lidar_channels);
    int width = spec.lidar_channels;
    for (std::size_t l = 0; l < lt.mix.size(); ++l) {
        const auto& d = lt.mix[l];
        std::vector<double> next(static_cast<std::size_t>(beams) * d.out);
        for (int bm = 0; bm < beams; ++bm) {
            affine_tanh(&params[d.w_off], &params[d.b_off], &cur[static_cast<std::size_t>(bm) * width],
                        d.in, d.out, &next[static_cast<std::size_t>(bm) * d.out]);
        }
        cur = std::move(next);
        width = d.out;
        if (cache) cache->mix_act[l] = cur;
    }

    // flatten + scalars
    std::vector<double> trunk;
    trunk.reserve(spec.trunk_dim());
    trunk.insert(trunk.end(), cur.begin(), cur.end());
    trunk.insert(trunk.end(), input.begin() + beams * spec.lidar_channels, input.end());
    if (cache) cache->trunk = trunk;

    std::vector<double> h = std::move(trunk);
    for (std::size_t l = 0; l < lt.dense.size(); ++l) {
        const auto& d = lt.dense[l];
        std::vector<double> next(d.out);
        affine_tanh(&params[d.w_off], &params[d.b_off], h.data(), d.in, d.out, next.data());
        h = std::move(next);
        if (cache) cache->dense_act[l] = h;
    }

    // linear head
    std::vector<double> out(spec.output_dim());
    for (int o = 0; o < lt.head.out; ++o) {
        double acc = params[lt.head.b_off + o];
        const double* row = &params[lt.head.w_off + static_cast<std::size_t>(o) * lt.head.in];
        for (int i = 0; i < lt.head.in; ++i) acc += row[i] * h[i];
        out[o] = acc;
    }
    if (spec.head == Head::gaussian_policy) {
        out[2] = params[lt.log_std_off];
        out[3] = params[lt.log_std_off + 1];
    }
    if (cache) cache->output = out;
    return out;
}

void backward(const NetworkSpec& spec, std::span<const double> params, const ForwardCache& cache,
              std::span<const double> output_grad, std::span<double> param_grad) {
    const Layout lt = build_layout(spec);
    if (param_grad.size() != lt.total) throw ShapeMismatch("param_grad size mismatch");
    if (output_grad.size() != static_cast<std::size_t>(spec.output_dim())) {
        throw ShapeMismatch("output_grad size mismatch");
    }

    if (spec.head == Head::gaussian_policy) {
        param_grad[lt.log_std_off] += output_grad[2];
        param_grad[lt.log_std_off + 1] += output_grad[3];
    }

    const int beams = spec.lidar_beams;
    const std::vector<double>& head_in = lt.dense.empty() ? cache.trunk : cache.dense_act.back();

    // head
    std::vector<double> g(head_in.size(), 0.0);
    for (int o = 0; o < lt.head.out; ++o) {
        const double go = output_grad[o];
        param_grad[lt.head.b_off + o] += go;
        const double* row = &params[lt.head.w_off + static_cast<std::size_t>(o) * lt.head.in];
        double* wg = &param_grad[lt.head.w_off + static_cast<std::size_t>(o) * lt.head.in];
        for (int i = 0; i < lt.head.in; ++i) {
            wg[i] += go * head_in[i];
            g[i] += go * row[i];
        }
    }

    // dense stack
    for (int l = static_cast<int>(lt.dense.size()) - 1; l >= 0; --l) {
        const auto& d = lt.dense[l];
        const std::vector<double>& act = cache.dense_act[l];
        const std::vector<double>& in_act = (l == 0) ? cache.trunk : cache.dense_act[l - 1];
        std::vector<double> gz(d.out);
        for (int o = 0; o < d.out; ++o) gz[o] = g[o] * (1.0 - act[o] * act[o]);
        std::vector<double> gprev(d.in, 0.0);
        for (int o = 0; o < d.out; ++o) {
            param_grad[d.b_off + o] += gz[o];
            const double* row = &params[d.w_off + static_cast<std::size_t>(o) * d.in];
            double* wg = &param_grad[d.w_off + static_cast<std::size_t>(o) * d.in];
            for (int i = 0; i < d.in; ++i) {
                wg[i] += gz[o] * in_act[i];
                gprev[i] += gz[o] * row[i];
            }
        }
        g = std::move(gprev);
    }

    // split off the scalar inputs (no parameters behind them)
    const int mix_out = beams * spec.mix_out_width();
    std::vector<double> gm(g.begin(), g.begin() + mix_out);

    // mix stack, gradients summed over beams (shared weights)
    for (int l = static_cast<int>(lt.mix.size()) - 1; l >= 0; --l) {
        const auto& d = lt.mix[l];
        const std::vector<double>& act = cache.mix_act[l];
        std::vector<double> gprev(static_cast<std::size_t>(beams) * d.in, 0.0);
        for (int bm = 0; bm < beams; ++bm) {
            const double* a = &act[static_cast<std::size_t>(bm) * d.out];
            const double* in_act = (l == 0)
                                       ? &cache.input[static_cast<std::size_t>(bm) * d.in]
                                       : &cache.mix_act[l - 1][static_cast<std::size_t>(bm) * d.in];
            double* gp = &gprev[static_cast<std::size_t>(bm) * d.in];
            for (int o = 0; o < d.out; ++o) {
                const double gz =
                    gm[static_cast<std::size_t>(bm) * d.out + o] * (1.0 - a[o] * a[o]);
                param_grad[d.b_off + o] += gz;
                const double* row = &params[d.w_off + static_cast<std::size_t>(o) * d.in];
                double* wg = &param_grad[d.w_off + static_cast<std::size_t>(o) * d.in];
                for (int i = 0; i < d.in; ++i) {
                    wg[i] += gz * in_act[i];
                    gp[i] += gz * row[i];
                }
            }
        }
        gm = std::move(gprev);
    }
}

std::vector<double> init_params(const NetworkSpec& spec, Rng& rng, double log_std_init) {
    const Layout lt = build_layout(spec);
    std::vector<double> p(lt.total, 0.0);
    auto fill = [&](const LayerDims& d) {
        const double bound = std::sqrt(6.0 / (d.in + d.out));
        for (std::size_t i = 0; i < static_cast<std::size_t>(d.in) * d.out; ++i) {
            p[d.w_off + i] = rng.uniform(-bound, bound);
        }
    };
    for (const auto& d : lt.mix) fill(d);
    for (const auto& d : lt.dense) fill(d);
    fill(lt.head);
    if (spec.head == Head::gaussian_policy) {
        p[lt.log_std_off] = log_std_init;
        p[lt.log_std_off + 1] = log_std_init;
    }
    return p;
}

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state,
               const AdamHyper& hyper) {
    if (params.size() != grad.size() || params.size() != state.m.size()) {
        throw ShapeMismatch("adam_step size mismatch");
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * grad[i];
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
    }
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'V', 'I', 'B', 'E', 'N', 'E', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

struct Writer {
    std::vector<std::uint8_t> bytes;

    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
};

struct Reader {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;

    void need(std::size_t n) {
        if (pos + n > bytes.size()) throw TruncatedFile("checkpoint ends unexpectedly");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * i);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

}  // namespace

std::vector<std::uint8_t> save_checkpoint(const NetworkSpec& spec, std::span<const double> params,
                                          const CheckpointMeta& meta) {
    if (params.size() != param_count(spec)) {
        throw ShapeMismatch("checkpoint parameter count does not match the spec");
    }
    Writer w;
    w.bytes.insert(w.bytes.end(), kMagic, kMagic + 8);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(spec.head));
    w.u32(static_cast<std::uint32_t>(spec.lidar_beams));
    w.u32(static_cast<std::uint32_t>(spec.lidar_channels));
    w.u32(static_cast<std::uint32_t>(spec.mix_layers.size()));
    for (int v : spec.mix_layers) w.u32(static_cast<std::uint32_t>(v));
    w.u32(static_cast<std::uint32_t>(spec.scalar_inputs));
    w.u32(static_cast<std::uint32_t>(spec.dense_layers.size()));
    for (int v : spec.dense_layers) w.u32(static_cast<std::uint32_t>(v));
    w.u32(meta.epoch);
    w.u32(meta.horizon);
    w.u64(meta.seed);
    w.u64(params.size());
    for (double v : params) w.f64(v);
    return std::move(w.bytes);
}

Checkpoint load_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader r{bytes};
    r.need(8);
    if (std::memcmp(bytes.data(), kMagic, 8) != 0) {
        throw BadMagic("not a vibe network checkpoint");
    }
    r.pos = 8;
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw VersionMismatch("checkpoint version " + std::to_string(version) + ", expected " +
                              std::to_string(kVersion));
    }
    Checkpoint ck;
    ck.spec.head = static_cast<Head>(r.u32());
    ck.spec.lidar_beams = static_cast<int>(r.u32());
    ck.spec.lidar_channels = static_cast<int>(r.u32());
    ck.spec.mix_layers.resize(r.u32());
    for (auto& v : ck.spec.mix_layers) v = static_cast<int>(r.u32());
    ck.spec.scalar_inputs = static_cast<int>(r.u32());
    ck.spec.dense_layers.resize(r.u32());
    for (auto& v : ck.spec.dense_layers) v = static_cast<int>(r.u32());
    ck.meta.epoch = r.u32();
    ck.meta.horizon = r.u32();
    ck.meta.seed = r.u64();
    const std::uint64_t n = r.u64();
    if (n != param_count(ck.spec)) {
        throw TruncatedFile("parameter count does not match the stored spec");
    }
    ck.params.resize(n);
    for (auto& v : ck.params) v = r.f64();
    return ck;
}

void save_checkpoint_file(const std::string& path, const NetworkSpec& spec,
                          std::span<const double> params, const CheckpointMeta& meta) {
    const auto bytes = save_checkpoint(spec, params, meta);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return load_checkpoint(bytes);
}

std::string describe(const Checkpoint& ckpt) {
    std::string s = "head: ";
    s += ckpt.spec.head == Head::gaussian_policy ? "gaussian_policy" : "scalar";
    s += "\nlidar: " + std::to_string(ckpt.spec.lidar_beams) + " beams x " +
         std::to_string(ckpt.spec.lidar_channels) + " channels\nmix:";
    for (int v : ckpt.spec.mix_layers) s += " " + std::to_string(v);
    s += "\nscalar_inputs: " + std::to_string(ckpt.spec.scalar_inputs) + "\ndense:";
    for (int v : ckpt.spec.dense_layers) s += " " + std::to_string(v);
    s += "\nparameters: " + std::to_string(ckpt.params.size());
    s += "\nepoch: " + std::to_string(ckpt.meta.epoch);
    s += "\nhorizon: " + std::to_string(ckpt.meta.horizon);
    s += "\nseed: " + std::to_string(ckpt.meta.seed) + "\n";
    return s;
}

}  // namespace vibe::tinynet
