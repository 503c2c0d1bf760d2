// 3x3 single-channel 2D convolution baseline with zero "same" padding.
#include <cuda_runtime.h>

__global__ void conv2d_kernel(const float* input, const float* kernel,
                              float* output, int height, int width) {
    int col = blockIdx.x * blockDim.x + threadIdx.x;
    int row = blockIdx.y * blockDim.y + threadIdx.y;
    if (row < height && col < width) {
        float sum = 0.0f;
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                int r = row + dy;
                int c = col + dx;
                if (r >= 0 && r < height && c >= 0 && c < width)
                    sum += input[r * width + c] * kernel[(dy + 1) * 3 + (dx + 1)];
            }
        }
        output[row * width + col] = sum;
    }
}

extern "C" void conv2d(const float* input, const float* kernel, float* output,
                       int height, int width) {
    dim3 block(16, 16);
    dim3 grid((width + block.x - 1) / block.x, (height + block.y - 1) / block.y);
    conv2d_kernel<<<grid, block>>>(input, kernel, output, height, width);
    cudaDeviceSynchronize();
}
