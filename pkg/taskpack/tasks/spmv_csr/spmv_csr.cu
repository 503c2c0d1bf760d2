// Sparse matrix-vector multiply baseline over CSR: one row per thread.
#include <cuda_runtime.h>

__global__ void spmv_csr_kernel(const int* row_ptr, const int* col_idx,
                                const float* values, const float* x, float* y,
                                int rows) {
    int row = blockIdx.x * blockDim.x + threadIdx.x;
    if (row < rows) {
        float sum = 0.0f;
        for (int j = row_ptr[row]; j < row_ptr[row + 1]; ++j)
            sum += values[j] * x[col_idx[j]];
        y[row] = sum;
    }
}

extern "C" void spmv_csr(const int* row_ptr, const int* col_idx,
                         const float* values, const float* x, float* y,
                         int rows) {
    spmv_csr_kernel<<<(rows + 255) / 256, 256>>>(row_ptr, col_idx, values, x, y,
                                                 rows);
    cudaDeviceSynchronize();
}
