// Dot product baseline: per-block shared-memory tree reduction, then an
// atomic accumulation of block partials into the single output element.
#include <cuda_runtime.h>

__global__ void dot_product_kernel(const float* a, const float* b, float* out,
                                   int n) {
    __shared__ float partial[256];
    int tid = threadIdx.x;
    float value = 0.0f;
    for (int i = blockIdx.x * blockDim.x + tid; i < n; i += gridDim.x * blockDim.x)
        value += a[i] * b[i];
    partial[tid] = value;
    __syncthreads();
    for (int stride = blockDim.x / 2; stride > 0; stride >>= 1) {
        if (tid < stride) partial[tid] += partial[tid + stride];
        __syncthreads();
    }
    if (tid == 0) atomicAdd(out, partial[0]);
}

extern "C" void dot_product(const float* a, const float* b, float* out, int n) {
    cudaMemset(out, 0, sizeof(float));
    int blocks = (n + 255) / 256;
    if (blocks > 1024) blocks = 1024;
    dot_product_kernel<<<blocks, 256>>>(a, b, out, n);
    cudaDeviceSynchronize();
}
