#include "morph/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace morph::kern {

#if !defined(MORPH_WITH_AVX2)
const Backend* avx2_backend() { return nullptr; }
#endif

#if !defined(MORPH_WITH_NEON)
const Backend* neon_backend() { return nullptr; }
#endif

const Backend& active() {
    static const Backend* chosen = [] {
        const char* force = std::getenv("MORPHKIT_SIMD");
        if (force) {
            if (std::strcmp(force, "scalar") == 0) return &scalar_backend();
            if (std::strcmp(force, "avx2") == 0 && avx2_backend()) return avx2_backend();
            if (std::strcmp(force, "neon") == 0 && neon_backend()) return neon_backend();
        }
        if (const Backend* b = avx2_backend()) return b;
        if (const Backend* b = neon_backend()) return b;
        return &scalar_backend();
    }();
    return *chosen;
}

} // namespace morph::kern
