// BF16 dense matrix multiply baseline: bf16 storage, float accumulation.
#include <cuda_runtime.h>
#include <cuda_bf16.h>

__global__ void matrix_mul_bf16_kernel(const __nv_bfloat16* a,
                                       const __nv_bfloat16* b,
                                       __nv_bfloat16* c, int m, int k, int n) {
    int row = blockIdx.y * blockDim.y + threadIdx.y;
    int col = blockIdx.x * blockDim.x + threadIdx.x;
    if (row < m && col < n) {
        float sum = 0.0f;
        for (int i = 0; i < k; ++i)
            sum += __bfloat162float(a[row * k + i]) * __bfloat162float(b[i * n + col]);
        c[row * n + col] = __float2bfloat16(sum);
    }
}

extern "C" void matrix_mul_bf16(const __nv_bfloat16* a, const __nv_bfloat16* b,
                                __nv_bfloat16* c, int m, int k, int n) {
    dim3 block(16, 16);
    dim3 grid((n + block.x - 1) / block.x, (m + block.y - 1) / block.y);
    matrix_mul_bf16_kernel<<<grid, block>>>(a, b, c, m, k, n);
    cudaDeviceSynchronize();
}
