#pragma once

#include <vector>

#include "afc/common.hpp"

namespace afc::fft {

// Thin FFTW wrapper. forward: X_k = sum_n x_n exp(-2 pi i k n / N), no
// scaling; inverse includes the 1/N. Plans are cached per size and shared
// across threads.
void forward(std::vector<Complex>& data);
void inverse(std::vector<Complex>& data);

/// Index of frequency bin k in the usual FFT order, for k in [-N/2, N/2).
inline std::size_t bin(long k, std::size_t n)
{
    return static_cast<std::size_t>(k < 0 ? k + static_cast<long>(n) : k);
}

} // namespace afc::fft
