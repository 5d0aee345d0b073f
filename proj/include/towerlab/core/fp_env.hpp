#pragma once

// Flush-to-zero and denormals-are-zero for the calling thread, restored on
// scope exit. Adam's second moment for zero-gradient parameters otherwise
// decays through the subnormal range, which is very slow on x86.

#if defined(__SSE__) || defined(__x86_64__)
#include <xmmintrin.h>
#define TOWERLAB_HAS_MXCSR 1
#endif

namespace towerlab {

class ScopedFlushDenormals {
 public:
  ScopedFlushDenormals() {
#ifdef TOWERLAB_HAS_MXCSR
    saved_ = _mm_getcsr();
    _mm_setcsr(saved_ | kFlushToZero | kDenormalsAreZero);
#endif
  }
  ~ScopedFlushDenormals() {
#ifdef TOWERLAB_HAS_MXCSR
    _mm_setcsr(saved_);
#endif
  }
  ScopedFlushDenormals(const ScopedFlushDenormals&) = delete;
  ScopedFlushDenormals& operator=(const ScopedFlushDenormals&) = delete;

 private:
  static constexpr unsigned kFlushToZero = 0x8000;
  static constexpr unsigned kDenormalsAreZero = 0x0040;
  unsigned saved_ = 0;
};

}  // namespace towerlab
