#ifndef GACKAN_FFT_HPP
#define GACKAN_FFT_HPP

#include <complex>
#include <vector>

namespace gackan::dsp {

// In-place iterative radix-2 FFT. Forward matches the DFT definition
// sum x[n] exp(-j 2 pi k n / N); inverse applies the 1/N scaling.
// Throws std::invalid_argument on non-power-of-two lengths.
void fft(std::vector<std::complex<double>>& x, bool inverse = false);

std::vector<std::complex<double>> fft_copy(
    const std::vector<std::complex<double>>& x, bool inverse = false);

}  // namespace gackan::dsp

#endif  // GACKAN_FFT_HPP
