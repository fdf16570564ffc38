#pragma once

// Data-parallel inner loops. Every kernel has a serial reference and an
// OpenMP version; both accumulate each output element in the same order, so
// their results are bitwise identical. The unsuffixed entry points pick the
// OpenMP path when the work is large enough to amortise the fork.

#include <cstddef>
#include <span>
#include <vector>

namespace hsa::kernels {

struct MatDims {
  std::size_t m, k, n;
};

/// c[m×n] = a[m×k] · b[k×n]  (c overwritten)
void matmul_serial(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d);
void matmul_omp(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d);
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d);

/// c[m×k] += g[m×n] · b[k×n]ᵀ
void matmul_nt_acc_serial(std::span<const double> g, std::span<const double> b, std::span<double> c, MatDims d);
void matmul_nt_acc_omp(std::span<const double> g, std::span<const double> b, std::span<double> c, MatDims d);
void matmul_nt_acc(std::span<const double> g, std::span<const double> b, std::span<double> c, MatDims d);

/// c[k×n] += a[m×k]ᵀ · g[m×n]
void matmul_tn_acc_serial(std::span<const double> a, std::span<const double> g, std::span<double> c, MatDims d);
void matmul_tn_acc_omp(std::span<const double> a, std::span<const double> g, std::span<double> c, MatDims d);
void matmul_tn_acc(std::span<const double> a, std::span<const double> g, std::span<double> c, MatDims d);

/// out[v] = Σ_{u ∈ nbr(v)} h[u] (divided by |nbr(v)| when `mean`; empty sums are 0).
void aggregate_neighbors_serial(std::span<const double> h, std::size_t dim,
                                const std::vector<std::vector<int>>& nbr, bool mean,
                                std::span<double> out);
void aggregate_neighbors_omp(std::span<const double> h, std::size_t dim,
                             const std::vector<std::vector<int>>& nbr, bool mean,
                             std::span<double> out);
void aggregate_neighbors(std::span<const double> h, std::size_t dim,
                         const std::vector<std::vector<int>>& nbr, bool mean, std::span<double> out);

struct ScanDims {
  std::size_t steps, channels, state;
};

/// Diagonal selective scan, one independent recurrence per channel:
///   decay  = exp(-delta[t,c] · a[c,j] · gamma[t])
///   s[c,j] = decay · s[c,j] + delta[t,c] · b[t,j] · x[t,c]
///   y[t,c] = Σ_j cmat[t,j] · s[c,j] + skip[c] · x[t,c]
/// `states` receives s after every step, laid out [t][c][j]; pass an empty span
/// when only y is needed.
struct ScanInputs {
  std::span<const double> x, delta, b, cmat, a, skip, gamma;
};
void selective_scan_serial(const ScanInputs& in, ScanDims d, std::span<double> y, std::span<double> states);
void selective_scan_omp(const ScanInputs& in, ScanDims d, std::span<double> y, std::span<double> states);
void selective_scan(const ScanInputs& in, ScanDims d, std::span<double> y, std::span<double> states);

/// Mean cosine similarity over all unordered row pairs of h[n×dim]; n ≥ 2.
/// Zero rows contribute similarity 0.
double mean_pairwise_cosine_serial(std::span<const double> h, std::size_t n, std::size_t dim);
double mean_pairwise_cosine_omp(std::span<const double> h, std::size_t n, std::size_t dim);
double mean_pairwise_cosine(std::span<const double> h, std::size_t n, std::size_t dim);

int max_threads();

}  // namespace hsa::kernels
