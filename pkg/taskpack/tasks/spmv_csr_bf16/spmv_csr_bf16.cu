// BF16 CSR SpMV baseline: bf16 values and vectors, float accumulation.
#include <cuda_runtime.h>
#include <cuda_bf16.h>

__global__ void spmv_csr_bf16_kernel(const int* row_ptr, const int* col_idx,
                                     const __nv_bfloat16* values,
                                     const __nv_bfloat16* x, __nv_bfloat16* y,
                                     int rows) {
    int row = blockIdx.x * blockDim.x + threadIdx.x;
    if (row < rows) {
        float sum = 0.0f;
        for (int j = row_ptr[row]; j < row_ptr[row + 1]; ++j)
            sum += __bfloat162float(values[j]) * __bfloat162float(x[col_idx[j]]);
        y[row] = __float2bfloat16(sum);
    }
}

extern "C" void spmv_csr_bf16(const int* row_ptr, const int* col_idx,
                              const __nv_bfloat16* values,
                              const __nv_bfloat16* x, __nv_bfloat16* y,
                              int rows) {
    spmv_csr_bf16_kernel<<<(rows + 255) / 256, 256>>>(row_ptr, col_idx, values,
                                                      x, y, rows);
    cudaDeviceSynchronize();
}
