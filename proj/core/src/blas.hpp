#pragma once

#include <cblas.h>

#include <Eigen/Core>

namespace weakclr::detail {

// Row-major C = alpha * op(A) * op(B) + beta * C.
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda,
                 const float* b, int ldb, float beta, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans, m, n, k,
                alpha, a, lda, b, ldb, beta, c, ldc);
}

// The double path goes through Eigen: OpenBLAS 0.3.20 dgemm returns wrong
// results on some AVX-512 cores once k is in the thousands.
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
                 const double* b, int ldb, double beta, double* c, int ldc) {
    using Stride = Eigen::OuterStride<>;
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using ColMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
    // A row-major buffer read as column-major is its transpose.
    Eigen::Map<const RowMajor, 0, Stride> a_rm(a, m, k, Stride(lda));
    Eigen::Map<const ColMajor, 0, Stride> a_cm(a, m, k, Stride(lda));
    Eigen::Map<const RowMajor, 0, Stride> b_rm(b, k, n, Stride(ldb));
    Eigen::Map<const ColMajor, 0, Stride> b_cm(b, k, n, Stride(ldb));
    Eigen::Map<RowMajor, 0, Stride> out(c, m, n, Stride(ldc));
    if (beta == 0.0)
        out.setZero();
    else if (beta != 1.0)
        out *= beta;
    if (!trans_a && !trans_b)
        out.noalias() += alpha * a_rm * b_rm;
    else if (!trans_a)
        out.noalias() += alpha * a_rm * b_cm;
    else if (!trans_b)
        out.noalias() += alpha * a_cm * b_rm;
    else
        out.noalias() += alpha * a_cm * b_cm;
}

} // namespace weakclr::detail
