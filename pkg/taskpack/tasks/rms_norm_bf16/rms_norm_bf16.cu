// BF16 row-wise RMS normalization baseline: bf16 storage, float reduction.
#include <cuda_runtime.h>
#include <cuda_bf16.h>

__global__ void rms_norm_bf16_kernel(const __nv_bfloat16* x,
                                     const __nv_bfloat16* w, __nv_bfloat16* y,
                                     int rows, int cols) {
    __shared__ float partial[256];
    __shared__ float inv_rms;
    int row = blockIdx.x;
    int tid = threadIdx.x;
    float accum = 0.0f;
    for (int col = tid; col < cols; col += blockDim.x) {
        float v = __bfloat162float(x[row * cols + col]);
        accum += v * v;
    }
    partial[tid] = accum;
    __syncthreads();
    for (int stride = blockDim.x / 2; stride > 0; stride >>= 1) {
        if (tid < stride) partial[tid] += partial[tid + stride];
        __syncthreads();
    }
    if (tid == 0) inv_rms = rsqrtf(partial[0] / (float)cols + 1e-5f);
    __syncthreads();
    for (int col = tid; col < cols; col += blockDim.x)
        y[row * cols + col] = __float2bfloat16(
            __bfloat162float(x[row * cols + col]) * inv_rms *
            __bfloat162float(w[col]));
}

extern "C" void rms_norm_bf16(const __nv_bfloat16* x, const __nv_bfloat16* w,
                              __nv_bfloat16* y, int rows, int cols) {
    rms_norm_bf16_kernel<<<rows, 256>>>(x, w, y, rows, cols);
    cudaDeviceSynchronize();
}
