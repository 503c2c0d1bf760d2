// Naive dense matrix multiply baseline: one output element per thread.
#include <cuda_runtime.h>

__global__ void matrix_mul_kernel(const float* a, const float* b, float* c,
                                  int m, int k, int n) {
    int row = blockIdx.y * blockDim.y + threadIdx.y;
    int col = blockIdx.x * blockDim.x + threadIdx.x;
    if (row < m && col < n) {
        float sum = 0.0f;
        for (int i = 0; i < k; ++i)
            sum += a[row * k + i] * b[i * n + col];
        c[row * n + col] = sum;
    }
}

extern "C" void matrix_mul(const float* a, const float* b, float* c,
                           int m, int k, int n) {
    dim3 block(16, 16);
    dim3 grid((n + block.x - 1) / block.x, (m + block.y - 1) / block.y);
    matrix_mul_kernel<<<grid, block>>>(a, b, c, m, k, n);
    cudaDeviceSynchronize();
}
