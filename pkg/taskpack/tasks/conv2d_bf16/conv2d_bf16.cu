// BF16 3x3 "same" convolution baseline: bf16 storage, float accumulation.
#include <cuda_runtime.h>
#include <cuda_bf16.h>

__global__ void conv2d_bf16_kernel(const __nv_bfloat16* input,
                                   const __nv_bfloat16* kernel,
                                   __nv_bfloat16* output, int height,
                                   int width) {
    int col = blockIdx.x * blockDim.x + threadIdx.x;
    int row = blockIdx.y * blockDim.y + threadIdx.y;
    if (row < height && col < width) {
        float sum = 0.0f;
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                int r = row + dy;
                int c = col + dx;
                if (r >= 0 && r < height && c >= 0 && c < width)
                    sum += __bfloat162float(input[r * width + c]) *
                           __bfloat162float(kernel[(dy + 1) * 3 + (dx + 1)]);
            }
        }
        output[row * width + col] = __float2bfloat16(sum);
    }
}

extern "C" void conv2d_bf16(const __nv_bfloat16* input,
                            const __nv_bfloat16* kernel, __nv_bfloat16* output,
                            int height, int width) {
    dim3 block(16, 16);
    dim3 grid((width + block.x - 1) / block.x, (height + block.y - 1) / block.y);
    conv2d_bf16_kernel<<<grid, block>>>(input, kernel, output, height, width);
    cudaDeviceSynchronize();
}
