#pragma once

#include <algorithm>
#include <cstddef>

// Row-major dense kernels used by conv2d and matmul. Each writes C in a fixed
// loop order, so results do not depend on anything but the inputs.

namespace sf::kernel {

/// C[M,N] (+)= A[M,K] * B[K,N]
template <class T>
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C,
             bool accumulate) {
  constexpr std::size_t kTile = 512;
  if (!accumulate) std::fill(C, C + M * N, T(0));
  for (std::size_t j0 = 0; j0 < N; j0 += kTile) {
    const std::size_t nj = std::min(kTile, N - j0);
    std::size_t i = 0;
    for (; i + 4 <= M; i += 4) {
      T* c0 = C + (i + 0) * N + j0;
      T* c1 = C + (i + 1) * N + j0;
      T* c2 = C + (i + 2) * N + j0;
      T* c3 = C + (i + 3) * N + j0;
      for (std::size_t k = 0; k < K; ++k) {
        const T a0 = A[(i + 0) * K + k];
        const T a1 = A[(i + 1) * K + k];
        const T a2 = A[(i + 2) * K + k];
        const T a3 = A[(i + 3) * K + k];
        const T* b = B + k * N + j0;
        for (std::size_t j = 0; j < nj; ++j) {
          const T bv = b[j];
          c0[j] += a0 * bv;
          c1[j] += a1 * bv;
          c2[j] += a2 * bv;
          c3[j] += a3 * bv;
        }
      }
    }
    for (; i < M; ++i) {
      T* c = C + i * N + j0;
      for (std::size_t k = 0; k < K; ++k) {
        const T a = A[i * K + k];
        const T* b = B + k * N + j0;
        for (std::size_t j = 0; j < nj; ++j) c[j] += a * b[j];
      }
    }
  }
}

/// C[M,N] (+)= A^T * B, with A stored as [K,M] and B as [K,N].
template <class T>
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C,
             bool accumulate) {
  if (!accumulate) std::fill(C, C + M * N, T(0));
  std::size_t i = 0;
  for (; i + 4 <= M; i += 4) {
    T* c0 = C + (i + 0) * N;
    T* c1 = C + (i + 1) * N;
    T* c2 = C + (i + 2) * N;
    T* c3 = C + (i + 3) * N;
    for (std::size_t k = 0; k < K; ++k) {
      const T a0 = A[k * M + i + 0];
      const T a1 = A[k * M + i + 1];
      const T a2 = A[k * M + i + 2];
      const T a3 = A[k * M + i + 3];
      const T* b = B + k * N;
      for (std::size_t j = 0; j < N; ++j) {
        const T bv = b[j];
        c0[j] += a0 * bv;
        c1[j] += a1 * bv;
        c2[j] += a2 * bv;
        c3[j] += a3 * bv;
      }
    }
  }
  for (; i < M; ++i) {
    T* c = C + i * N;
    for (std::size_t k = 0; k < K; ++k) {
      const T a = A[k * M + i];
      const T* b = B + k * N;
      for (std::size_t j = 0; j < N; ++j) c[j] += a * b[j];
    }
  }
}

template <class T>
inline T dot(const T* a, const T* b, std::size_t n) {
  // eight fixed lanes: vectorizable without reassociation flags
  T acc[8] = {};
  std::size_t p = 0;
  for (; p + 8 <= n; p += 8) {
    for (int l = 0; l < 8; ++l) acc[l] += a[p + l] * b[p + l];
  }
  T s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; p < n; ++p) s += a[p] * b[p];
  return s;
}

/// C[M,N] (+)= A * B^T, with A stored as [M,K] and B as [N,K].
template <class T>
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C,
             bool accumulate) {
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      const T v = dot(A + i * K, B + j * K, K);
      C[i * N + j] = accumulate ? C[i * N + j] + v : v;
    }
  }
}

}  // namespace sf::kernel
