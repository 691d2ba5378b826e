#include <cstdio>
#include <cstring>
#include <vector>

#include "flowdet/errors.hpp"
#include "flowdet/flow.hpp"

namespace flowdet::flow {

namespace {

constexpr char kMagic[8] = {'F', 'D', 'C', 'K', '0', '0', '0', '1'};
constexpr std::uint32_t kVersion = 1;

std::vector<std::pair<std::string, ad::NodePtr>> named_params(const FlowParams& p) {
    std::vector<std::pair<std::string, ad::NodePtr>> out;
    auto push_mlp = [&](const std::string& prefix, const Mlp& mlp) {
        for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
            out.emplace_back(prefix + ".w" + std::to_string(l), mlp.weights[l]);
            out.emplace_back(prefix + ".b" + std::to_string(l), mlp.biases[l]);
        }
    };
    for (std::size_t k = 0; k < p.steps.size(); ++k) {
        std::string s = "step" + std::to_string(k);
        out.emplace_back(s + ".actnorm.s", p.steps[k].actnorm_s);
        out.emplace_back(s + ".actnorm.b", p.steps[k].actnorm_b);
        out.emplace_back(s + ".conv.w", p.steps[k].conv_w);
        push_mlp(s + ".lower.scale", p.steps[k].lower.scale_net);
        push_mlp(s + ".lower.bias", p.steps[k].lower.bias_net);
        push_mlp(s + ".upper.scale", p.steps[k].upper.scale_net);
        push_mlp(s + ".upper.bias", p.steps[k].upper.bias_net);
    }
    out.emplace_back("latent.mu", p.latent_mu);
    out.emplace_back("latent.logvar", p.latent_logvar);
    return out;
}

class Writer {
  public:
    explicit Writer(const std::string& path) : f_(std::fopen(path.c_str(), "wb")) {
        if (!f_) throw FormatError("cannot open checkpoint for writing: " + path, 0);
    }
    ~Writer() {
        if (f_) std::fclose(f_);
    }
    void bytes(const void* p, std::size_t n) { std::fwrite(p, 1, n, f_); }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u16(std::uint16_t v) { bytes(&v, 2); }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }
    void f64(double v) { bytes(&v, 8); }

  private:
    std::FILE* f_;
};

class Reader {
  public:
    explicit Reader(const std::string& path) : f_(std::fopen(path.c_str(), "rb")) {
        if (!f_) throw FormatError("cannot open checkpoint: " + path, 0);
    }
    ~Reader() {
        if (f_) std::fclose(f_);
    }
    void bytes(void* p, std::size_t n) {
        if (std::fread(p, 1, n, f_) != n)
            throw FormatError("checkpoint truncated", offset_);
        offset_ += n;
    }
    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint16_t u16() {
        std::uint16_t v;
        bytes(&v, 2);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        bytes(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        bytes(&v, 8);
        return v;
    }
    double f64() {
        double v;
        bytes(&v, 8);
        return v;
    }
    std::size_t offset() const { return offset_; }

  private:
    std::FILE* f_;
    std::size_t offset_ = 0;
};

std::uint8_t family_code(noise::Family f) {
    switch (f) {
        case noise::Family::kGaussian: return 0;
        case noise::Family::kSas: return 1;
        case noise::Family::kGaussianMixture: return 2;
        case noise::Family::kNakagami: return 3;
    }
    return 255;
}

noise::Family family_from_code(std::uint8_t c, std::size_t offset) {
    switch (c) {
        case 0: return noise::Family::kGaussian;
        case 1: return noise::Family::kSas;
        case 2: return noise::Family::kGaussianMixture;
        case 3: return noise::Family::kNakagami;
    }
    throw FormatError("checkpoint: unknown noise family code", offset);
}

}  // namespace

void save_checkpoint(const FlowParams& params, const CheckpointMeta& meta,
                     const std::string& path) {
    Writer w(path);
    w.bytes(kMagic, 8);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(params.config.k_steps));
    w.u32(static_cast<std::uint32_t>(params.config.dim));
    w.u32(static_cast<std::uint32_t>(params.config.partition_m));
    w.u32(static_cast<std::uint32_t>(params.config.hidden_width));
    w.u32(static_cast<std::uint32_t>(params.config.mlp_depth));
    w.u8(params.actnorm_initialized ? 1 : 0);
    w.u8(family_code(meta.spec.family));
    w.f64(meta.spec.alpha);
    w.f64(meta.spec.sigma);
    w.f64(meta.spec.m);
    w.f64(meta.spec.omega);
    w.u32(static_cast<std::uint32_t>(meta.spec.mixture.size()));
    for (const auto& c : meta.spec.mixture) {
        w.f64(c.weight);
        w.f64(c.mean.real());
        w.f64(c.mean.imag());
        w.f64(c.variance);
    }
    w.u64(meta.train_count);
    w.u64(meta.test_count);
    w.f64(meta.final_nll);
    w.u64(meta.seed);

    auto named = named_params(params);
    w.u32(static_cast<std::uint32_t>(named.size()));
    for (const auto& [name, node] : named) {
        w.u16(static_cast<std::uint16_t>(name.size()));
        w.bytes(name.data(), name.size());
        w.u32(static_cast<std::uint32_t>(node->value.rows()));
        w.u32(static_cast<std::uint32_t>(node->value.cols()));
        for (double v : node->value.values) w.f64(v);
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[8];
    r.bytes(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) throw FormatError("bad checkpoint magic", 0);
    std::uint32_t version = r.u32();
    if (version != kVersion)
        throw FormatError("incompatible checkpoint version " + std::to_string(version) +
                              " (expected " + std::to_string(kVersion) + ")",
                          8);
    FlowConfig cfg;
    cfg.k_steps = r.u32();
    cfg.dim = r.u32();
    cfg.partition_m = r.u32();
    cfg.hidden_width = r.u32();
    cfg.mlp_depth = r.u32();
    bool initialized = r.u8() != 0;

    CheckpointMeta meta;
    meta.spec.family = family_from_code(r.u8(), r.offset());
    meta.spec.alpha = r.f64();
    meta.spec.sigma = r.f64();
    meta.spec.m = r.f64();
    meta.spec.omega = r.f64();
    std::uint32_t ncomp = r.u32();
    for (std::uint32_t i = 0; i < ncomp; ++i) {
        noise::MixtureComponent c;
        c.weight = r.f64();
        double re = r.f64(), im = r.f64();
        c.mean = {re, im};
        c.variance = r.f64();
        meta.spec.mixture.push_back(c);
    }
    meta.train_count = r.u64();
    meta.test_count = r.u64();
    meta.final_nll = r.f64();
    meta.seed = r.u64();

    Checkpoint ck;
    ck.params = init_flow_params(cfg, 0);
    ck.params.actnorm_initialized = initialized;
    ck.meta = meta;

    auto named = named_params(ck.params);
    std::uint32_t count = r.u32();
    if (count != named.size())
        throw FormatError("checkpoint parameter count mismatch", r.offset() - 4);
    for (auto& [name, node] : named) {
        std::uint16_t len = r.u16();
        std::string got(len, '\0');
        r.bytes(got.data(), len);
        if (got != name)
            throw FormatError("checkpoint parameter name mismatch: expected " + name + ", got " + got,
                              r.offset() - len);
        std::uint32_t rows = r.u32();
        std::uint32_t cols = r.u32();
        if (rows != node->value.rows() || cols != node->value.cols())
            throw FormatError("checkpoint parameter shape mismatch for " + name, r.offset() - 8);
        for (double& v : node->value.values) v = r.f64();
    }
    return ck;
}

}  // namespace flowdet::flow
