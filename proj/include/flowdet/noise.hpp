#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowdet/errors.hpp"
#include "flowdet/rng.hpp"

namespace flowdet::noise {

using cplx = std::complex<double>;

enum class Family { kGaussian, kSas, kGaussianMixture, kNakagami };

struct MixtureComponent {
    double weight = 0.0;
    cplx mean{0.0, 0.0};
    double variance = 1.0;  // per complex element (E|w - mean|^2)
};

// Descriptor for one i.i.d. complex noise family.
//   gaussian:          sigma = std per real dimension, zero mean
//   sas:               alpha in (0,2], sigma = scale exponent, applied
//                      independently to real and imaginary parts
//   gaussian_mixture:  per-element mixture of complex Gaussians
//   nakagami:          amplitude ~ Nakagami(m, omega), phase uniform
struct NoiseSpec {
    Family family = Family::kGaussian;
    double alpha = 2.0;
    double sigma = 1.0;
    double m = 1.0;
    double omega = 1.0;
    std::vector<MixtureComponent> mixture;

    static NoiseSpec gaussian(double sigma);
    static NoiseSpec sas(double alpha, double sigma);
    static NoiseSpec gaussian_mixture(std::vector<MixtureComponent> comps);
    // Equal mix of CN(-1, 2) and CN(+1, 1) per complex element.
    static NoiseSpec mixture_default();
    static NoiseSpec nakagami(double m, double omega);

    void validate() const;  // throws ParamError
    std::string family_name() const;

    // Nominal power per complex element (exact second moment where it
    // exists; for sas it is 2*sigma^2, the alpha=2 value).
    double nominal_power() const;

    // Same family re-scaled so nominal_power() == power.
    NoiseSpec scaled_to_power(double power) const;
};

struct NoiseBatch {
    std::size_t count = 0;
    std::size_t dim = 0;
    std::vector<cplx> samples;  // count * dim, row-major
    NoiseSpec spec;
    std::uint64_t seed = 0;

    cplx at(std::size_t i, std::size_t d) const { return samples[i * dim + d]; }
};

// Counter budget per complex element; fixed so that sample (i, d) is a pure
// function of (spec, seed, i*dim + d) regardless of batch partitioning.
inline constexpr std::uint64_t kCountersPerElement = 4;

// Core generator: fills `out` with elements elem0 .. elem0+out.size()-1 of
// the stream owned by `rng`.
void sample_noise_elems(const NoiseSpec& spec, const CounterRng& rng, std::uint64_t elem0,
                        std::span<cplx> out);

NoiseBatch sample_noise(const NoiseSpec& spec, std::size_t count, std::size_t dim,
                        std::uint64_t seed);

// Exact log-density of the vector w (sum over i.i.d. elements). Supported:
// gaussian, gaussian_mixture, nakagami, and sas with alpha in {1, 2}.
double log_pdf_analytic(const NoiseSpec& spec, std::span<const cplx> w);

struct QuadratureConfig {
    double abs_tol = 1e-9;
    int points_per_panel = 8;   // Gauss-Legendre order per panel
    int max_refinements = 6;
};

// Density of one real SaS component by numerical inversion of the
// characteristic function. Validation-grade; not used by detectors.
double sas_pdf_numeric(double alpha, double sigma, double w,
                       const QuadratureConfig& cfg = {});

// Component index the sampler would draw for a given element (exposed so
// statistical tests can count selections without re-deriving the stream).
std::size_t mixture_component_index(const NoiseSpec& spec, const CounterRng& rng,
                                    std::uint64_t elem);

// Binary container: 32-byte header (magic FDNZ0001, version, dim, count)
// followed by count*dim little-endian float64 pairs (re, im). Documented in
// docs/FORMATS.md.
void write_noise_file(const std::string& path, const NoiseBatch& batch);
NoiseBatch read_noise_file(const std::string& path);

}  // namespace flowdet::noise
