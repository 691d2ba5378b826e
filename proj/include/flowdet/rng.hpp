#pragma once

#include <cstdint>

namespace flowdet {

// Counter-based generator built on the SplitMix64 finalizer. Every random
// quantity in the project is a pure function of (seed, stream tag, counter),
// so sub-batches can be generated in any order or on any thread and still
// agree bit for bit. The exact mapping is documented in docs/FORMATS.md.

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t tag) {
    return mix64(seed ^ mix64(tag ^ kGolden));
}

// Stream tags. Values are frozen; changing them changes every sampled bit.
enum StreamTag : std::uint64_t {
    kTagNoise = 0xA7,
    kTagChannel = 0xB3,
    kTagSymbols = 0xC1,
    kTagFrames = 0xD5,
    kTagShuffle = 0xE9,
    kTagParamInit = 0xF1,
    kTagPoint = 0x1010,
};

class CounterRng {
  public:
    CounterRng(std::uint64_t seed, std::uint64_t tag) : key_(derive_key(seed, tag)) {}

    std::uint64_t bits(std::uint64_t counter) const { return mix64(key_ + (counter + 1) * kGolden); }

    // Strictly inside (0, 1); both endpoints unreachable.
    double uniform(std::uint64_t counter) const {
        return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    std::uint64_t key() const { return key_; }

  private:
    std::uint64_t key_;
};

// Per-frame subkey: frames are numbered, each owns an independent key.
constexpr std::uint64_t frame_key(std::uint64_t stream_key, std::uint64_t frame_index) {
    return mix64(stream_key + (frame_index + 1) * kGolden);
}

}  // namespace flowdet
