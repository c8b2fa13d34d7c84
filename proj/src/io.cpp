#include "vibe/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace vibe::io {

using nlohmann::json;

namespace {

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path);
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path);
    return out;
}

}  // namespace

std::vector<tracker::Detection> load_detections_jsonl(const std::string& path) {
    auto in = open_in(path);
    std::vector<tracker::Detection> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        tracker::Detection d;
        d.frame = j.at("frame").get<int>();
        d.cls = object_class_from_string(j.at("class").get<std::string>());
        const auto& bb = j.at("bbox");
        d.bbox = {bb.at(0).get<double>(), bb.at(1).get<double>(), bb.at(2).get<double>(),
                  bb.at(3).get<double>()};
        d.confidence = j.at("confidence").get<double>();
        d.feature = j.at("feature").get<std::vector<double>>();
        out.push_back(std::move(d));
    }
    return out;
}

void save_detections_jsonl(const std::vector<tracker::Detection>& dets, const std::string& path) {
    auto out = open_out(path);
    for (const auto& d : dets) {
        json j;
        j["frame"] = d.frame;
        j["class"] = to_string(d.cls);
        j["bbox"] = {d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2};
        j["confidence"] = d.confidence;
        j["feature"] = d.feature;
        out << j.dump() << "\n";
    }
}

std::vector<tracker::TrackedTrajectory> load_trajectories_jsonl(const std::string& path) {
    auto in = open_in(path);
    std::vector<tracker::TrackedTrajectory> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        tracker::TrackedTrajectory t;
        t.id = j.at("id").get<int>();
        t.cls = object_class_from_string(j.at("class").get<std::string>());
        for (const auto& s : j.at("samples")) {
            t.samples.push_back({s.at("t").get<double>(),
                                 {s.at("x").get<double>(), s.at("y").get<double>()}});
        }
        out.push_back(std::move(t));
    }
    return out;
}

void save_trajectories_jsonl(const std::vector<tracker::TrackedTrajectory>& trajs,
                             const std::string& path) {
    auto out = open_out(path);
    for (const auto& t : trajs) {
        json j;
        j["id"] = t.id;
        j["class"] = to_string(t.cls);
        json samples = json::array();
        for (const auto& s : t.samples) {
            samples.push_back({{"t", s.t}, {"x", s.pos.x}, {"y", s.pos.y}});
        }
        j["samples"] = std::move(samples);
        out << j.dump() << "\n";
    }
}

synth::SplitWindows load_splits(const std::string& path) {
    auto in = open_in(path);
    json j;
    in >> j;
    synth::SplitWindows s;
    s.train_t0 = j.at("train").at("t0").get<double>();
    s.train_t1 = j.at("train").at("t1").get<double>();
    s.val_t0 = j.at("val").at("t0").get<double>();
    s.val_t1 = j.at("val").at("t1").get<double>();
    s.test_t0 = j.at("test").at("t0").get<double>();
    s.test_t1 = j.at("test").at("t1").get<double>();
    return s;
}

void save_splits(const synth::SplitWindows& splits, const std::string& path) {
    json j;
    j["train"] = {{"t0", splits.train_t0}, {"t1", splits.train_t1}};
    j["val"] = {{"t0", splits.val_t0}, {"t1", splits.val_t1}};
    j["test"] = {{"t0", splits.test_t0}, {"t1", splits.test_t1}};
    open_out(path) << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// SHA-256

namespace {

struct Sha256 {
    std::uint32_t h[8] = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                          0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
    std::uint8_t buffer[64];
    std::size_t buffered = 0;
    std::uint64_t total = 0;

    static std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

    void process(const std::uint8_t* p) {
        static const std::uint32_t k[64] = {
            0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
            0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
            0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
            0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
            0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
            0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
            0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
            0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
            0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
            0xc67178f2};
        std::uint32_t w[64];
        for (int i = 0; i < 16; ++i) {
            w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
                   (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
        }
        for (int i = 16; i < 64; ++i) {
            const std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
            const std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16] + s0 + w[i - 7] + s1;
        }
        std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4], f = h[5], g = h[6],
                      hh = h[7];
        for (int i = 0; i < 64; ++i) {
            const std::uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
            const std::uint32_t ch = (e & f) ^ (~e & g);
            const std::uint32_t t1 = hh + s1 + ch + k[i] + w[i];
            const std::uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
            const std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
            const std::uint32_t t2 = s0 + maj;
            hh = g;
            g = f;
            f = e;
            e = d + t1;
            d = c;
            c = b;
            b = a;
            a = t1 + t2;
        }
        h[0] += a;
        h[1] += b;
        h[2] += c;
        h[3] += d;
        h[4] += e;
        h[5] += f;
        h[6] += g;
        h[7] += hh;
    }

    void update(const std::uint8_t* data, std::size_t n) {
        total += n;
        while (n > 0) {
            const std::size_t take = std::min(n, sizeof(buffer) - buffered);
            std::memcpy(buffer + buffered, data, take);
            buffered += take;
            data += take;
            n -= take;
            if (buffered == 64) {
                process(buffer);
                buffered = 0;
            }
        }
    }

    std::string finish() {
        const std::uint64_t bits = total * 8;
        const std::uint8_t one = 0x80;
        update(&one, 1);
        const std::uint8_t zero = 0x00;
        while (buffered != 56) update(&zero, 1);
        std::uint8_t len[8];
        for (int i = 0; i < 8; ++i) len[i] = static_cast<std::uint8_t>(bits >> (56 - 8 * i));
        update(len, 8);
        static const char* hex = "0123456789abcdef";
        std::string out;
        out.reserve(64);
        for (std::uint32_t v : h) {
            for (int i = 28; i >= 0; i -= 4) out.push_back(hex[(v >> i) & 0xf]);
        }
        return out;
    }
};

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    Sha256 s;
    s.update(bytes.data(), bytes.size());
    return s.finish();
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file for hashing: " + path);
    Sha256 s;
    char buf[65536];
    while (in) {
        in.read(buf, sizeof(buf));
        s.update(reinterpret_cast<const std::uint8_t*>(buf),
                 static_cast<std::size_t>(in.gcount()));
    }
    return s.finish();
}

void write_manifest(const Manifest& manifest, const std::string& path) {
    json j;
    j["command"] = manifest.command;
    j["config"] = manifest.config;
    j["inputs"] = manifest.input_hashes;
    j["outputs"] = manifest.outputs;
    j["seed"] = manifest.seed;
    j["version"] = "vibe 0.1.0";
    open_out(path) << j.dump(2) << "\n";
}

}  // namespace vibe::io
