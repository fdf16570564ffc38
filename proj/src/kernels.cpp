#include "hsa/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hsa::kernels {

namespace {
// Below this many multiply-adds the fork/join costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 16;
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// --- matmul ----------------------------------------------------------------

void matmul_serial(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d) {
  for (std::size_t i = 0; i < d.m; ++i) {
    double* ci = c.data() + i * d.n;
    for (std::size_t j = 0; j < d.n; ++j) ci[j] = 0.0;
    for (std::size_t p = 0; p < d.k; ++p) {
      const double av = a[i * d.k + p];
      const double* bp = b.data() + p * d.n;
      for (std::size_t j = 0; j < d.n; ++j) ci[j] += av * bp[j];
    }
  }
}

void matmul_omp(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d) {
  const auto m = static_cast<long>(d.m);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < m; ++i) {
    double* ci = c.data() + i * d.n;
    for (std::size_t j = 0; j < d.n; ++j) ci[j] = 0.0;
    for (std::size_t p = 0; p < d.k; ++p) {
      const double av = a[i * d.k + p];
      const double* bp = b.data() + p * d.n;
      for (std::size_t j = 0; j < d.n; ++j) ci[j] += av * bp[j];
    }
  }
}

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d) {
  if (d.m * d.k * d.n >= kParallelWork && d.m > 1) {
    matmul_omp(a, b, c, d);
  } else {
    matmul_serial(a, b, c, d);
  }
}

void matmul_nt_acc_serial(std::span<const double> g, std::span<const double> b, std::span<double> c, MatDims d) {
  for (std::size_t i = 0; i < d.m; ++i) {
    const double* gi = g.data() + i * d.n;
    for (std::size_t p = 0; p < d.k; ++p) {
      const double* bp = b.data() + p * d.n;
      double acc = 0.0;
      for (std::size_t j = 0; j < d.n; ++j) acc += gi[j] * bp[j];
      c[i * d.k + p] += acc;
    }
  }
}

void matmul_nt_acc_omp(std::span<const double> g, std::span<const double> b, std::span<double> c, MatDims d) {
  const auto m = static_cast<long>(d.m);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < m; ++i) {
    const double* gi = g.data() + i * d.n;
    for (std::size_t p = 0; p < d.k; ++p) {
      const double* bp = b.data() + p * d.n;
      double acc = 0.0;
      for (std::size_t j = 0; j < d.n; ++j) acc += gi[j] * bp[j];
      c[i * d.k + p] += acc;
    }
  }
}

void matmul_nt_acc(std::span<const double> g, std::span<const double> b, std::span<double> c, MatDims d) {
  if (d.m * d.k * d.n >= kParallelWork && d.m > 1) {
    matmul_nt_acc_omp(g, b, c, d);
  } else {
    matmul_nt_acc_serial(g, b, c, d);
  }
}

void matmul_tn_acc_serial(std::span<const double> a, std::span<const double> g, std::span<double> c, MatDims d) {
  for (std::size_t p = 0; p < d.k; ++p) {
    double* cp = c.data() + p * d.n;
    for (std::size_t i = 0; i < d.m; ++i) {
      const double av = a[i * d.k + p];
      if (av == 0.0) continue;
      const double* gi = g.data() + i * d.n;
      for (std::size_t j = 0; j < d.n; ++j) cp[j] += av * gi[j];
    }
  }
}

void matmul_tn_acc_omp(std::span<const double> a, std::span<const double> g, std::span<double> c, MatDims d) {
  const auto k = static_cast<long>(d.k);
#pragma omp parallel for schedule(static)
  for (long p = 0; p < k; ++p) {
    double* cp = c.data() + p * d.n;
    for (std::size_t i = 0; i < d.m; ++i) {
      const double av = a[i * d.k + p];
      if (av == 0.0) continue;
      const double* gi = g.data() + i * d.n;
      for (std::size_t j = 0; j < d.n; ++j) cp[j] += av * gi[j];
    }
  }
}

void matmul_tn_acc(std::span<const double> a, std::span<const double> g, std::span<double> c, MatDims d) {
  if (d.m * d.k * d.n >= kParallelWork && d.k > 1) {
    matmul_tn_acc_omp(a, g, c, d);
  } else {
    matmul_tn_acc_serial(a, g, c, d);
  }
}

// --- neighbour aggregation -------------------------------------------------

namespace {
inline void aggregate_one(std::span<const double> h, std::size_t dim, const std::vector<int>& nbr,
                          bool mean, double* out) {
  for (std::size_t c = 0; c < dim; ++c) out[c] = 0.0;
  for (int u : nbr) {
    const double* hu = h.data() + static_cast<std::size_t>(u) * dim;
    for (std::size_t c = 0; c < dim; ++c) out[c] += hu[c];
  }
  if (mean && !nbr.empty()) {
    const double inv = 1.0 / static_cast<double>(nbr.size());
    for (std::size_t c = 0; c < dim; ++c) out[c] *= inv;
  }
}
}  // namespace

void aggregate_neighbors_serial(std::span<const double> h, std::size_t dim,
                                const std::vector<std::vector<int>>& nbr, bool mean,
                                std::span<double> out) {
  for (std::size_t v = 0; v < nbr.size(); ++v) aggregate_one(h, dim, nbr[v], mean, out.data() + v * dim);
}

void aggregate_neighbors_omp(std::span<const double> h, std::size_t dim,
                             const std::vector<std::vector<int>>& nbr, bool mean,
                             std::span<double> out) {
  const auto n = static_cast<long>(nbr.size());
#pragma omp parallel for schedule(static)
  for (long v = 0; v < n; ++v) aggregate_one(h, dim, nbr[v], mean, out.data() + v * dim);
}

void aggregate_neighbors(std::span<const double> h, std::size_t dim,
                         const std::vector<std::vector<int>>& nbr, bool mean, std::span<double> out) {
  if (nbr.size() * dim * 3 >= kParallelWork) {
    aggregate_neighbors_omp(h, dim, nbr, mean, out);
  } else {
    aggregate_neighbors_serial(h, dim, nbr, mean, out);
  }
}

// --- selective scan ---------------------------------------------------------

namespace {
// Channels are scanned in blocks so each step reads contiguous slices of x and delta.
// Within a channel the arithmetic order is fixed, so any blocking gives identical bits.
constexpr std::size_t kScanBlock = 8;

void scan_block(const ScanInputs& in, ScanDims d, std::size_t c0, std::span<double> y, std::span<double> states) {
  const std::size_t s = d.state;
  const std::size_t c1 = std::min(c0 + kScanBlock, d.channels);
  std::vector<double> st((c1 - c0) * s, 0.0);
  for (std::size_t t = 0; t < d.steps; ++t) {
    const double g = in.gamma[t];
    const double* bt = in.b.data() + t * s;
    const double* ct = in.cmat.data() + t * s;
    for (std::size_t c = c0; c < c1; ++c) {
      const double dt = in.delta[t * d.channels + c];
      const double xv = in.x[t * d.channels + c];
      const double* a = in.a.data() + c * s;
      double* sc = st.data() + (c - c0) * s;
      double out = 0.0;
      for (std::size_t j = 0; j < s; ++j) {
        const double decay = std::exp(-dt * a[j] * g);
        sc[j] = decay * sc[j] + dt * bt[j] * xv;
        out += ct[j] * sc[j];
      }
      if (!states.empty()) std::copy(sc, sc + s, states.data() + (t * d.channels + c) * s);
      y[t * d.channels + c] = out + in.skip[c] * xv;
    }
  }
}
}  // namespace

void selective_scan_serial(const ScanInputs& in, ScanDims d, std::span<double> y, std::span<double> states) {
  for (std::size_t c0 = 0; c0 < d.channels; c0 += kScanBlock) scan_block(in, d, c0, y, states);
}

void selective_scan_omp(const ScanInputs& in, ScanDims d, std::span<double> y, std::span<double> states) {
  const auto blocks = static_cast<long>((d.channels + kScanBlock - 1) / kScanBlock);
#pragma omp parallel for schedule(static)
  for (long b = 0; b < blocks; ++b) scan_block(in, d, static_cast<std::size_t>(b) * kScanBlock, y, states);
}

void selective_scan(const ScanInputs& in, ScanDims d, std::span<double> y, std::span<double> states) {
  if (d.steps * d.channels * d.state >= kParallelWork) {
    selective_scan_omp(in, d, y, states);
  } else {
    selective_scan_serial(in, d, y, states);
  }
}

// --- pairwise cosine --------------------------------------------------------

namespace {
std::vector<double> row_norms(std::span<const double> h, std::size_t n, std::size_t dim) {
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < dim; ++c) acc += h[i * dim + c] * h[i * dim + c];
    norms[i] = std::sqrt(acc);
  }
  return norms;
}

inline double row_partial(std::span<const double> h, std::size_t n, std::size_t dim,
                          const std::vector<double>& norms, std::size_t i) {
  double acc = 0.0;
  for (std::size_t j = i + 1; j < n; ++j) {
    if (norms[i] == 0.0 || norms[j] == 0.0) continue;
    double dot = 0.0;
    for (std::size_t c = 0; c < dim; ++c) dot += h[i * dim + c] * h[j * dim + c];
    acc += dot / (norms[i] * norms[j]);
  }
  return acc;
}
}  // namespace

double mean_pairwise_cosine_serial(std::span<const double> h, std::size_t n, std::size_t dim) {
  const auto norms = row_norms(h, n, dim);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += row_partial(h, n, dim, norms, i);
  return total / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

double mean_pairwise_cosine_omp(std::span<const double> h, std::size_t n, std::size_t dim) {
  const auto norms = row_norms(h, n, dim);
  std::vector<double> partial(n, 0.0);
  const auto rows = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < rows; ++i) partial[i] = row_partial(h, n, dim, norms, static_cast<std::size_t>(i));
  double total = 0.0;
  for (double p : partial) total += p;
  return total / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

double mean_pairwise_cosine(std::span<const double> h, std::size_t n, std::size_t dim) {
  if (n * n * dim >= kParallelWork) return mean_pairwise_cosine_omp(h, n, dim);
  return mean_pairwise_cosine_serial(h, n, dim);
}

}  // namespace hsa::kernels
