#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

namespace capgrav::fft {

using cplx = std::complex<double>;

namespace detail {

// FFTW planning is not thread safe, execution on distinct arrays is.
// Plans are created once per (size, sign) with FFTW_ESTIMATE so that the
// arithmetic is identical from run to run.
inline fftw_plan plan_for(int n, int sign) {
  static std::mutex mtx;
  static std::map<std::pair<int, int>, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto key = std::make_pair(n, sign);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::vector<cplx> a(n), b(n);
  fftw_plan p = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(a.data()),
                                 reinterpret_cast<fftw_complex*>(b.data()), sign,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  cache.emplace(key, p);
  return p;
}

}  // namespace detail

// out[k] = sum_j in[j] exp(-2 pi i j k / n), unnormalized.
inline std::vector<cplx> forward(const std::vector<cplx>& in) {
  const int n = static_cast<int>(in.size());
  std::vector<cplx> src(in), out(n);
  fftw_execute_dft(detail::plan_for(n, FFTW_FORWARD), reinterpret_cast<fftw_complex*>(src.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

// out[j] = sum_k in[k] exp(+2 pi i j k / n), unnormalized.
inline std::vector<cplx> backward(const std::vector<cplx>& in) {
  const int n = static_cast<int>(in.size());
  std::vector<cplx> src(in), out(n);
  fftw_execute_dft(detail::plan_for(n, FFTW_BACKWARD), reinterpret_cast<fftw_complex*>(src.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

}  // namespace capgrav::fft
