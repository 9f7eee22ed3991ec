#include "kg/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>

#include "kg/errors.hpp"

namespace kg {
namespace fft {
namespace {

struct PlanPair {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

std::mutex g_plan_mutex;
std::map<int, PlanPair>& plan_cache() {
  static std::map<int, PlanPair> cache;
  return cache;
}

// FFTW plan creation is not thread-safe; execution via fftw_execute_dft on
// caller buffers is. Plans are built once per n with FFTW_UNALIGNED so they
// accept any buffer.
PlanPair get_plans(int n) {
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  auto& cache = plan_cache();
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  const std::size_t total = static_cast<std::size_t>(n) * n * n;
  cvec scratch(total);
  auto* ptr = reinterpret_cast<fftw_complex*>(scratch.data());
  PlanPair p;
  p.fwd = fftw_plan_dft_3d(n, n, n, ptr, ptr, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.bwd = fftw_plan_dft_3d(n, n, n, ptr, ptr, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!p.fwd || !p.bwd) throw Error("fft: plan creation failed for n=" + std::to_string(n));
  cache[n] = p;
  return p;
}

void execute(int n, cplx* data, bool forward_dir) {
  PlanPair p = get_plans(n);
  auto* ptr = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(forward_dir ? p.fwd : p.bwd, ptr, ptr);
  const std::size_t total = static_cast<std::size_t>(n) * n * n;
  const double scale = 1.0 / std::pow(static_cast<double>(n), 1.5);
  for (std::size_t i = 0; i < total; ++i) data[i] *= scale;
}

}  // namespace

void forward_raw(int n, cplx* data) { execute(n, data, true); }
void inverse_raw(int n, cplx* data) { execute(n, data, false); }

void forward(ScalarField& f) {
  if (f.space != Space::Position)
    throw InvalidArgument("fft::forward: field already in frequency space");
  forward_raw(f.grid->n, f.v.data());
  f.space = Space::Frequency;
}

void inverse(ScalarField& f) {
  if (f.space != Space::Frequency)
    throw InvalidArgument("fft::inverse: field already in position space");
  inverse_raw(f.grid->n, f.v.data());
  f.space = Space::Position;
}

}  // namespace fft
}  // namespace kg
