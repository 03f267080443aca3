#pragma once

#include <array>
#include <cstdint>
#include <random>

namespace hja {

/* Stable stream splitting for studies: one master seed plus task indices
 * give an independent, platform-stable engine seed. */
inline unsigned long derive_seed(unsigned long master, int a, int b = 0, int c = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                      static_cast<std::uint32_t>(c)};
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    return (static_cast<unsigned long>(words[1]) << 32) | words[0];
}

}  // namespace hja
