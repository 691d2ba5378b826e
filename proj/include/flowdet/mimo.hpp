#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowdet/noise.hpp"
#include "flowdet/rng.hpp"

namespace flowdet::mimo {

using cplx = std::complex<double>;

struct MimoScenario {
    std::size_t n_tx = 4;
    std::size_t n_rx = 4;
    int constellation_order = 4;  // QPSK
    double snr_db = 20.0;
    noise::NoiseSpec noise;
    std::uint64_t seed = 1;

    void validate() const;
};

// One channel use. y = H*x + w holds exactly as generated.
struct Frame {
    std::vector<cplx> H;  // n_rx x n_tx, row-major
    std::vector<cplx> x;  // n_tx
    std::vector<cplx> w;  // n_rx
    std::vector<cplx> y;  // n_rx
    std::size_t n_tx = 0, n_rx = 0;
};

// Real-valued block form: H_bar = [[Re H, -Im H], [Im H, Re H]],
// vectors stacked as [Re; Im].
struct RealizedFrame {
    std::vector<double> H_bar;  // 2M x 2N, row-major
    std::vector<double> x_bar;  // 2N
    std::vector<double> y_bar;  // 2M
    std::vector<double> w_bar;  // 2M
};

// Gray-mapped unit-energy QPSK. Bit pair (b0, b1) -> ((1-2*b0) + j(1-2*b1))/sqrt(2);
// symbol index s in 0..3 carries bits (s>>1, s&1).
cplx qpsk_symbol(int index);
std::vector<cplx> qpsk_modulate(std::span<const int> bits);
std::vector<int> qpsk_demap(std::span<const cplx> symbols);
int qpsk_slice_index(const cplx& v);

// Noise scale for the scenario's SNR:
// SNR_dB = 10*log10(E||Hx||^2 / (M * 2*sigma^2)) with E||Hx||^2 = M*N, so
// sigma = sqrt(N/2) * 10^(-SNR/20). sigma is the per-real-dimension nominal
// std; for sas it is used as the scale exponent directly.
double sigma_for_snr(const MimoScenario& sc);

// The scenario's noise spec re-scaled to the SNR's nominal power.
noise::NoiseSpec noise_at_snr(const MimoScenario& sc);

// H entries i.i.d. CN(0, 1); deterministic per (seed, frame_index).
std::vector<cplx> gen_channel(const MimoScenario& sc, std::uint64_t frame_index);

Frame gen_frame(const MimoScenario& sc, std::uint64_t frame_index);
std::vector<Frame> gen_frames(const MimoScenario& sc, std::size_t count);

std::vector<double> realify_matrix(std::span<const cplx> H, std::size_t m, std::size_t n);
std::vector<double> realify_vector(std::span<const cplx> v);
RealizedFrame realify(const Frame& f);

// All P^N symbol vectors in lexicographic order (antenna 0 most significant),
// stored as per-antenna constellation indices.
struct CandidateSet {
    std::size_t n = 0;
    int p = 4;
    std::size_t count = 0;
    std::vector<std::uint8_t> idx;  // count x n

    const std::uint8_t* candidate(std::size_t i) const { return idx.data() + i * n; }
    std::vector<cplx> symbols(std::size_t i) const;
};

inline constexpr std::size_t kDefaultEnumerationCap = std::size_t{1} << 20;

CandidateSet all_candidates(std::size_t n, int p, std::size_t cap = kDefaultEnumerationCap);

// Frame container: header then per-frame H, x, w, y as float64 re/im pairs.
// Documented in docs/FORMATS.md.
void write_frame_file(const std::string& path, std::span<const Frame> frames);
std::vector<Frame> read_frame_file(const std::string& path);

}  // namespace flowdet::mimo
