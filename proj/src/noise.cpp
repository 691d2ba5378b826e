#include "flowdet/noise.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>

#include "flowdet/errors.hpp"
#include "flowdet/special.hpp"

namespace flowdet::noise {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr char kMagic[8] = {'F', 'D', 'N', 'Z', '0', '0', '0', '1'};
constexpr std::uint32_t kNoiseFileVersion = 1;

// Chambers-Mallows-Stuck draw of a standard symmetric alpha-stable variate
// (characteristic function exp(-|t|^alpha)).
double sas_standard(double alpha, double u1, double u2) {
    double v = kPi * (u1 - 0.5);
    double w = -std::log(u2);
    if (std::fabs(alpha - 1.0) < 1e-12) return std::tan(v);
    double av = alpha * v;
    return std::sin(av) / std::pow(std::cos(v), 1.0 / alpha) *
           std::pow(std::cos(v - av) / w, (1.0 - alpha) / alpha);
}

// One standard complex Gaussian draw (unit variance per complex element)
// from two uniforms.
cplx gaussian_pair(double u1, double u2) {
    double r = std::sqrt(-std::log(u1));
    double th = 2.0 * kPi * u2;
    return {r * std::cos(th), r * std::sin(th)};
}

double log_sum_exp(const std::vector<double>& terms) {
    double mx = terms[0];
    for (double t : terms) mx = std::max(mx, t);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double t : terms) s += std::exp(t - mx);
    return mx + std::log(s);
}

}  // namespace

NoiseSpec NoiseSpec::gaussian(double sigma) {
    NoiseSpec s;
    s.family = Family::kGaussian;
    s.sigma = sigma;
    return s;
}

NoiseSpec NoiseSpec::sas(double alpha, double sigma) {
    NoiseSpec s;
    s.family = Family::kSas;
    s.alpha = alpha;
    s.sigma = sigma;
    return s;
}

NoiseSpec NoiseSpec::gaussian_mixture(std::vector<MixtureComponent> comps) {
    NoiseSpec s;
    s.family = Family::kGaussianMixture;
    s.mixture = std::move(comps);
    return s;
}

NoiseSpec NoiseSpec::mixture_default() {
    return gaussian_mixture({{0.5, {-1.0, 0.0}, 2.0}, {0.5, {1.0, 0.0}, 1.0}});
}

NoiseSpec NoiseSpec::nakagami(double m, double omega) {
    NoiseSpec s;
    s.family = Family::kNakagami;
    s.m = m;
    s.omega = omega;
    return s;
}

void NoiseSpec::validate() const {
    switch (family) {
        case Family::kGaussian:
            // sigma == 0 is allowed as the exact zero-noise limit.
            if (sigma < 0.0 || !std::isfinite(sigma))
                throw ParamError("gaussian noise: sigma must be >= 0");
            break;
        case Family::kSas:
            if (!(alpha > 0.0 && alpha <= 2.0))
                throw ParamError("sas noise: alpha must be in (0, 2]");
            if (!(sigma > 0.0)) throw ParamError("sas noise: sigma must be > 0");
            break;
        case Family::kGaussianMixture: {
            if (mixture.empty()) throw ParamError("mixture noise: no components");
            double wsum = 0.0;
            for (const auto& c : mixture) {
                if (!(c.weight > 0.0)) throw ParamError("mixture noise: weights must be > 0");
                if (!(c.variance > 0.0)) throw ParamError("mixture noise: variances must be > 0");
                wsum += c.weight;
            }
            if (std::fabs(wsum - 1.0) > 1e-9)
                throw ParamError("mixture noise: weights must sum to 1");
            break;
        }
        case Family::kNakagami:
            if (!(m >= 0.5)) throw ParamError("nakagami noise: m must be >= 0.5");
            if (!(omega > 0.0)) throw ParamError("nakagami noise: omega must be > 0");
            break;
    }
}

std::string NoiseSpec::family_name() const {
    switch (family) {
        case Family::kGaussian: return "gaussian";
        case Family::kSas: return "sas";
        case Family::kGaussianMixture: return "gaussian_mixture";
        case Family::kNakagami: return "nakagami";
    }
    return "?";
}

double NoiseSpec::nominal_power() const {
    switch (family) {
        case Family::kGaussian: return 2.0 * sigma * sigma;
        case Family::kSas: return 2.0 * sigma * sigma;
        case Family::kGaussianMixture: {
            double p = 0.0;
            for (const auto& c : mixture) p += c.weight * (c.variance + std::norm(c.mean));
            return p;
        }
        case Family::kNakagami: return omega;
    }
    return 0.0;
}

NoiseSpec NoiseSpec::scaled_to_power(double power) const {
    if (!(power >= 0.0)) throw ParamError("scaled_to_power: power must be >= 0");
    NoiseSpec s = *this;
    switch (family) {
        case Family::kGaussian:
        case Family::kSas:
            s.sigma = std::sqrt(power / 2.0);
            break;
        case Family::kGaussianMixture: {
            double c2 = power / nominal_power();
            double c = std::sqrt(c2);
            for (auto& comp : s.mixture) {
                comp.mean *= c;
                comp.variance *= c2;
            }
            break;
        }
        case Family::kNakagami:
            s.omega = power;
            break;
    }
    return s;
}

std::size_t mixture_component_index(const NoiseSpec& spec, const CounterRng& rng,
                                    std::uint64_t elem) {
    double u = rng.uniform(elem * kCountersPerElement);
    double acc = 0.0;
    for (std::size_t k = 0; k < spec.mixture.size(); ++k) {
        acc += spec.mixture[k].weight;
        if (u < acc) return k;
    }
    return spec.mixture.size() - 1;
}

void sample_noise_elems(const NoiseSpec& spec, const CounterRng& rng, std::uint64_t elem0,
                        std::span<cplx> out) {
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t e = elem0 + i;
        std::uint64_t c0 = e * kCountersPerElement;
        switch (spec.family) {
            case Family::kGaussian: {
                if (spec.sigma == 0.0) {
                    out[i] = {0.0, 0.0};
                } else {
                    cplx g = gaussian_pair(rng.uniform(c0), rng.uniform(c0 + 1));
                    out[i] = g * (spec.sigma * std::sqrt(2.0));
                }
                break;
            }
            case Family::kSas: {
                double re = spec.sigma * sas_standard(spec.alpha, rng.uniform(c0), rng.uniform(c0 + 1));
                double im =
                    spec.sigma * sas_standard(spec.alpha, rng.uniform(c0 + 2), rng.uniform(c0 + 3));
                out[i] = {re, im};
                break;
            }
            case Family::kGaussianMixture: {
                std::size_t k = mixture_component_index(spec, rng, e);
                const auto& comp = spec.mixture[k];
                cplx g = gaussian_pair(rng.uniform(c0 + 1), rng.uniform(c0 + 2));
                out[i] = comp.mean + g * std::sqrt(comp.variance);
                break;
            }
            case Family::kNakagami: {
                // A^2 / (omega/m) ~ Gamma(m, 1)
                double g = special::gamma_p_inv(spec.m, rng.uniform(c0));
                double amp = std::sqrt(g * spec.omega / spec.m);
                double th = 2.0 * kPi * rng.uniform(c0 + 1);
                out[i] = {amp * std::cos(th), amp * std::sin(th)};
                break;
            }
        }
    }
}

NoiseBatch sample_noise(const NoiseSpec& spec, std::size_t count, std::size_t dim,
                        std::uint64_t seed) {
    spec.validate();
    if (count < 1 || dim < 1) throw ParamError("sample_noise: count and dim must be >= 1");
    NoiseBatch b;
    b.count = count;
    b.dim = dim;
    b.spec = spec;
    b.seed = seed;
    b.samples.resize(count * dim);
    CounterRng rng(seed, kTagNoise);
    sample_noise_elems(spec, rng, 0, b.samples);
    return b;
}

double log_pdf_analytic(const NoiseSpec& spec, std::span<const cplx> w) {
    spec.validate();
    double total = 0.0;
    switch (spec.family) {
        case Family::kGaussian: {
            if (spec.sigma == 0.0)
                throw UnsupportedDensityError("gaussian density undefined at sigma = 0");
            double v = spec.sigma * spec.sigma;  // per real dimension
            for (const cplx& x : w) total += -std::log(2.0 * kPi * v) - std::norm(x) / (2.0 * v);
            return total;
        }
        case Family::kSas: {
            if (std::fabs(spec.alpha - 2.0) < 1e-12) {
                double v = 2.0 * spec.sigma * spec.sigma;  // per real dimension
                for (const cplx& x : w)
                    total += -std::log(2.0 * kPi * v) - std::norm(x) / (2.0 * v);
                return total;
            }
            if (std::fabs(spec.alpha - 1.0) < 1e-12) {
                double g = spec.sigma;
                for (const cplx& x : w) {
                    total += std::log(g / kPi) - std::log(g * g + x.real() * x.real());
                    total += std::log(g / kPi) - std::log(g * g + x.imag() * x.imag());
                }
                return total;
            }
            throw UnsupportedDensityError("analytic sas density only at alpha in {1, 2}");
        }
        case Family::kGaussianMixture: {
            std::vector<double> terms(spec.mixture.size());
            for (const cplx& x : w) {
                for (std::size_t k = 0; k < spec.mixture.size(); ++k) {
                    const auto& c = spec.mixture[k];
                    terms[k] = std::log(c.weight) - std::log(kPi * c.variance) -
                               std::norm(x - c.mean) / c.variance;
                }
                total += log_sum_exp(terms);
            }
            return total;
        }
        case Family::kNakagami: {
            double lg = std::lgamma(spec.m);
            double base = std::log(2.0) + spec.m * std::log(spec.m / spec.omega) - lg -
                          std::log(2.0 * kPi);
            for (const cplx& x : w) {
                double a2 = std::norm(x);
                if (a2 == 0.0) {
                    if (spec.m > 1.0) return -std::numeric_limits<double>::infinity();
                    if (spec.m < 1.0) return std::numeric_limits<double>::infinity();
                    total += base - spec.m * a2 / spec.omega;
                    continue;
                }
                total += base + (spec.m - 1.0) * std::log(a2) - spec.m * a2 / spec.omega;
            }
            return total;
        }
    }
    throw UnsupportedDensityError("unknown family");
}

void write_noise_file(const std::string& path, const NoiseBatch& batch) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw FormatError("cannot open noise file for writing: " + path, 0);
    unsigned char header[32] = {};
    std::memcpy(header, kMagic, 8);
    std::uint32_t version = kNoiseFileVersion;
    std::uint32_t dim = static_cast<std::uint32_t>(batch.dim);
    std::uint64_t count = batch.count;
    std::memcpy(header + 8, &version, 4);
    std::memcpy(header + 12, &dim, 4);
    std::memcpy(header + 16, &count, 8);
    std::fwrite(header, 1, 32, f);
    for (const cplx& x : batch.samples) {
        double pair[2] = {x.real(), x.imag()};
        std::fwrite(pair, sizeof(double), 2, f);
    }
    std::fclose(f);
}

NoiseBatch read_noise_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw FormatError("cannot open noise file: " + path, 0);
    unsigned char header[32];
    if (std::fread(header, 1, 32, f) != 32) {
        std::fclose(f);
        throw FormatError("noise file truncated in header", 0);
    }
    if (std::memcmp(header, kMagic, 8) != 0) {
        std::fclose(f);
        throw FormatError("bad noise file magic", 0);
    }
    std::uint32_t version, dim;
    std::uint64_t count;
    std::memcpy(&version, header + 8, 4);
    std::memcpy(&dim, header + 12, 4);
    std::memcpy(&count, header + 16, 8);
    if (version != kNoiseFileVersion) {
        std::fclose(f);
        throw FormatError("unsupported noise file version " + std::to_string(version), 8);
    }
    NoiseBatch b;
    b.count = count;
    b.dim = dim;
    b.samples.resize(count * dim);
    for (std::size_t i = 0; i < b.samples.size(); ++i) {
        double pair[2];
        if (std::fread(pair, sizeof(double), 2, f) != 2) {
            std::size_t off = 32 + i * 16;
            std::fclose(f);
            throw FormatError("noise file truncated in payload", off);
        }
        b.samples[i] = {pair[0], pair[1]};
    }
    std::fclose(f);
    return b;
}

}  // namespace flowdet::noise
