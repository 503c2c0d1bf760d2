// BF16 dot product baseline: bf16 inputs, float accumulation through a
// device-side staging scalar, bf16 result store.
#include <cuda_runtime.h>
#include <cuda_bf16.h>

__global__ void dot_product_bf16_kernel(const __nv_bfloat16* a,
                                        const __nv_bfloat16* b, float* accum,
                                        int n) {
    __shared__ float partial[256];
    int tid = threadIdx.x;
    float value = 0.0f;
    for (int i = blockIdx.x * blockDim.x + tid; i < n; i += gridDim.x * blockDim.x)
        value += __bfloat162float(a[i]) * __bfloat162float(b[i]);
    partial[tid] = value;
    __syncthreads();
    for (int stride = blockDim.x / 2; stride > 0; stride >>= 1) {
        if (tid < stride) partial[tid] += partial[tid + stride];
        __syncthreads();
    }
    if (tid == 0) atomicAdd(accum, partial[0]);
}

__global__ void dot_product_bf16_store_kernel(const float* accum,
                                              __nv_bfloat16* out) {
    out[0] = __float2bfloat16(accum[0]);
}

extern "C" void dot_product_bf16(const __nv_bfloat16* a, const __nv_bfloat16* b,
                                 __nv_bfloat16* out, int n) {
    float* accum = nullptr;
    cudaMalloc(&accum, sizeof(float));
    cudaMemset(accum, 0, sizeof(float));
    int blocks = (n + 255) / 256;
    if (blocks > 1024) blocks = 1024;
    dot_product_bf16_kernel<<<blocks, 256>>>(a, b, accum, n);
    dot_product_bf16_store_kernel<<<1, 1>>>(accum, out);
    cudaDeviceSynchronize();
    cudaFree(accum);
}
