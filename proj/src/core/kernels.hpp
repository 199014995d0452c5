#pragma once

// Dense helpers behind the convolution layers. Row-major throughout;
// every routine accumulates into its output.

#include <cstddef>

namespace conncrack::nn::kernels {

// C[M x N] += A[M x K] * B[K x N]
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* __restrict a,
             const T* __restrict b, T* __restrict c) {
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = a[i * k + p];
            if (av == T{0}) continue;
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[M x N] += A^T * B with A stored K x M, B stored K x N
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* __restrict a,
             const T* __restrict b, T* __restrict c) {
    for (std::size_t p = 0; p < k; ++p) {
        const T* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const T av = a[p * m + i];
            if (av == T{0}) continue;
            T* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[M x N] += A * B^T with A stored M x K, B stored N x K
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* __restrict a,
             const T* __restrict b, T* __restrict c) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T s{0};
            for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            c[i * n + j] += s;
        }
    }
}

struct ConvGeometry {
    std::size_t channels, height, width;   // image side
    std::size_t kernel, stride, padding;
    std::size_t out_h, out_w;              // column side
};

// col[(c*k + ki)*k + kj][oy*out_w + ox] = img[c][oy*s - p + ki][ox*s - p + kj]
template <typename T>
void im2col(const T* img, const ConvGeometry& g, T* col) {
    const std::size_t plane = g.out_h * g.out_w;
    for (std::size_t c = 0; c < g.channels; ++c)
        for (std::size_t ki = 0; ki < g.kernel; ++ki)
            for (std::size_t kj = 0; kj < g.kernel; ++kj) {
                T* dst = col + ((c * g.kernel + ki) * g.kernel + kj) * plane;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.padding);
                    T* drow = dst + oy * g.out_w;
                    if (iy < 0 || iy >= static_cast<long>(g.height)) {
                        for (std::size_t ox = 0; ox < g.out_w; ++ox) drow[ox] = T{0};
                        continue;
                    }
                    const T* srow = img + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.padding);
                        drow[ox] = (ix < 0 || ix >= static_cast<long>(g.width))
                                       ? T{0}
                                       : srow[static_cast<std::size_t>(ix)];
                    }
                }
            }
}

// Adjoint of im2col: scatter-add columns back into the image.
template <typename T>
void col2im(const T* col, const ConvGeometry& g, T* img) {
    const std::size_t plane = g.out_h * g.out_w;
    for (std::size_t c = 0; c < g.channels; ++c)
        for (std::size_t ki = 0; ki < g.kernel; ++ki)
            for (std::size_t kj = 0; kj < g.kernel; ++kj) {
                const T* src = col + ((c * g.kernel + ki) * g.kernel + kj) * plane;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.padding);
                    if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
                    T* drow = img + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
                    const T* srow = src + oy * g.out_w;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.padding);
                        if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
                        drow[static_cast<std::size_t>(ix)] += srow[ox];
                    }
                }
            }
}

} // namespace conncrack::nn::kernels
