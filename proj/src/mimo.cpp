#include "flowdet/mimo.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <numbers>

#include "flowdet/errors.hpp"

namespace flowdet::mimo {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kPi = std::numbers::pi;
constexpr char kFrameMagic[8] = {'F', 'D', 'F', 'R', '0', '0', '0', '1'};
constexpr std::uint32_t kFrameFileVersion = 1;

}  // namespace

void MimoScenario::validate() const {
    if (n_tx < 1 || n_rx < 1) throw ParamError("scenario: antenna counts must be >= 1");
    if (constellation_order != 4) throw ParamError("scenario: only QPSK (P=4) is supported");
    // +inf is the exact zero-noise limit.
    if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
        throw ParamError("scenario: snr_db must be a number or +inf");
    noise.validate();
}

cplx qpsk_symbol(int index) {
    int b0 = (index >> 1) & 1;
    int b1 = index & 1;
    return {kInvSqrt2 * (1 - 2 * b0), kInvSqrt2 * (1 - 2 * b1)};
}

std::vector<cplx> qpsk_modulate(std::span<const int> bits) {
    if (bits.size() % 2 != 0) throw ParamError("qpsk_modulate: bit count must be even");
    std::vector<cplx> out(bits.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = qpsk_symbol((bits[2 * i] << 1) | bits[2 * i + 1]);
    return out;
}

int qpsk_slice_index(const cplx& v) {
    int b0 = v.real() >= 0.0 ? 0 : 1;
    int b1 = v.imag() >= 0.0 ? 0 : 1;
    return (b0 << 1) | b1;
}

std::vector<int> qpsk_demap(std::span<const cplx> symbols) {
    std::vector<int> bits(symbols.size() * 2);
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        int s = qpsk_slice_index(symbols[i]);
        bits[2 * i] = (s >> 1) & 1;
        bits[2 * i + 1] = s & 1;
    }
    return bits;
}

double sigma_for_snr(const MimoScenario& sc) {
    double power = static_cast<double>(sc.n_tx) * std::pow(10.0, -sc.snr_db / 10.0);
    return std::sqrt(power / 2.0);
}

noise::NoiseSpec noise_at_snr(const MimoScenario& sc) {
    double power = static_cast<double>(sc.n_tx) * std::pow(10.0, -sc.snr_db / 10.0);
    return sc.noise.scaled_to_power(power);
}

std::vector<cplx> gen_channel(const MimoScenario& sc, std::uint64_t frame_index) {
    std::uint64_t fkey = frame_key(derive_key(sc.seed, kTagFrames), frame_index);
    CounterRng rng(fkey, kTagChannel);
    std::vector<cplx> H(sc.n_rx * sc.n_tx);
    for (std::size_t i = 0; i < H.size(); ++i) {
        double r = std::sqrt(-std::log(rng.uniform(2 * i)));
        double th = 2.0 * kPi * rng.uniform(2 * i + 1);
        H[i] = {r * std::cos(th), r * std::sin(th)};
    }
    return H;
}

Frame gen_frame(const MimoScenario& sc, std::uint64_t frame_index) {
    sc.validate();
    std::size_t n = sc.n_tx, m = sc.n_rx;
    Frame f;
    f.n_tx = n;
    f.n_rx = m;
    f.H = gen_channel(sc, frame_index);

    std::uint64_t fkey = frame_key(derive_key(sc.seed, kTagFrames), frame_index);
    CounterRng sym_rng(fkey, kTagSymbols);
    f.x.resize(n);
    for (std::size_t a = 0; a < n; ++a)
        f.x[a] = qpsk_symbol(static_cast<int>(sym_rng.bits(a) & 3));

    f.w.assign(m, cplx{0.0, 0.0});
    double power = static_cast<double>(n) * std::pow(10.0, -sc.snr_db / 10.0);
    if (power > 0.0) {
        noise::NoiseSpec spec = noise_at_snr(sc);
        CounterRng noise_rng(fkey, kTagNoise);
        noise::sample_noise_elems(spec, noise_rng, 0, f.w);
    }

    f.y.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        cplx acc = f.w[i];
        for (std::size_t j = 0; j < n; ++j) acc += f.H[i * n + j] * f.x[j];
        f.y[i] = acc;
    }
    return f;
}

std::vector<Frame> gen_frames(const MimoScenario& sc, std::size_t count) {
    std::vector<Frame> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(gen_frame(sc, i));
    return out;
}

std::vector<double> realify_matrix(std::span<const cplx> H, std::size_t m, std::size_t n) {
    if (H.size() != m * n) throw ShapeError("realify_matrix: size mismatch");
    std::vector<double> out(4 * m * n);
    std::size_t cols = 2 * n;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double re = H[i * n + j].real();
            double im = H[i * n + j].imag();
            out[i * cols + j] = re;
            out[i * cols + n + j] = -im;
            out[(m + i) * cols + j] = im;
            out[(m + i) * cols + n + j] = re;
        }
    return out;
}

std::vector<double> realify_vector(std::span<const cplx> v) {
    std::vector<double> out(2 * v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = v[i].real();
        out[v.size() + i] = v[i].imag();
    }
    return out;
}

RealizedFrame realify(const Frame& f) {
    RealizedFrame r;
    r.H_bar = realify_matrix(f.H, f.n_rx, f.n_tx);
    r.x_bar = realify_vector(f.x);
    r.y_bar = realify_vector(f.y);
    r.w_bar = realify_vector(f.w);
    return r;
}

std::vector<cplx> CandidateSet::symbols(std::size_t i) const {
    std::vector<cplx> out(n);
    const std::uint8_t* c = candidate(i);
    for (std::size_t a = 0; a < n; ++a) out[a] = qpsk_symbol(c[a]);
    return out;
}

CandidateSet all_candidates(std::size_t n, int p, std::size_t cap) {
    if (p != 4) throw ParamError("all_candidates: only P=4 supported");
    double total_d = std::pow(static_cast<double>(p), static_cast<double>(n));
    if (total_d > static_cast<double>(cap))
        throw ConfigError("enumeration size " + std::to_string(total_d) +
                          " exceeds cap; use a neighborhood detector instead");
    std::size_t total = static_cast<std::size_t>(total_d);
    CandidateSet cs;
    cs.n = n;
    cs.p = p;
    cs.count = total;
    cs.idx.resize(total * n);
    for (std::size_t c = 0; c < total; ++c) {
        std::size_t v = c;
        for (std::size_t a = n; a-- > 0;) {
            cs.idx[c * n + a] = static_cast<std::uint8_t>(v % p);
            v /= p;
        }
    }
    return cs;
}

void write_frame_file(const std::string& path, std::span<const Frame> frames) {
    if (frames.empty()) throw ParamError("write_frame_file: no frames");
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw FormatError("cannot open frame file for writing: " + path, 0);
    unsigned char header[32] = {};
    std::memcpy(header, kFrameMagic, 8);
    std::uint32_t version = kFrameFileVersion;
    std::uint32_t ntx = static_cast<std::uint32_t>(frames[0].n_tx);
    std::uint32_t nrx = static_cast<std::uint32_t>(frames[0].n_rx);
    std::uint64_t count = frames.size();
    std::memcpy(header + 8, &version, 4);
    std::memcpy(header + 12, &ntx, 4);
    std::memcpy(header + 16, &nrx, 4);
    std::memcpy(header + 20, &count, 8);
    std::fwrite(header, 1, 32, f);
    auto put = [&](std::span<const cplx> v) {
        for (const cplx& z : v) {
            double pair[2] = {z.real(), z.imag()};
            std::fwrite(pair, sizeof(double), 2, f);
        }
    };
    for (const Frame& fr : frames) {
        put(fr.H);
        put(fr.x);
        put(fr.w);
        put(fr.y);
    }
    std::fclose(f);
}

std::vector<Frame> read_frame_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw FormatError("cannot open frame file: " + path, 0);
    unsigned char header[32];
    if (std::fread(header, 1, 32, f) != 32) {
        std::fclose(f);
        throw FormatError("frame file truncated in header", 0);
    }
    if (std::memcmp(header, kFrameMagic, 8) != 0) {
        std::fclose(f);
        throw FormatError("bad frame file magic", 0);
    }
    std::uint32_t version, ntx, nrx;
    std::uint64_t count;
    std::memcpy(&version, header + 8, 4);
    std::memcpy(&ntx, header + 12, 4);
    std::memcpy(&nrx, header + 16, 4);
    std::memcpy(&count, header + 20, 8);
    if (version != kFrameFileVersion) {
        std::fclose(f);
        throw FormatError("unsupported frame file version " + std::to_string(version), 8);
    }
    std::vector<Frame> frames(count);
    long offset = 32;
    auto get = [&](std::vector<cplx>& v, std::size_t len) {
        v.resize(len);
        for (std::size_t i = 0; i < len; ++i) {
            double pair[2];
            if (std::fread(pair, sizeof(double), 2, f) != 2) {
                std::fclose(f);
                throw FormatError("frame file truncated in payload", offset);
            }
            v[i] = {pair[0], pair[1]};
            offset += 16;
        }
    };
    for (Frame& fr : frames) {
        fr.n_tx = ntx;
        fr.n_rx = nrx;
        get(fr.H, static_cast<std::size_t>(ntx) * nrx);
        get(fr.x, ntx);
        get(fr.w, nrx);
        get(fr.y, nrx);
    }
    std::fclose(f);
    return frames;
}

}  // namespace flowdet::mimo
