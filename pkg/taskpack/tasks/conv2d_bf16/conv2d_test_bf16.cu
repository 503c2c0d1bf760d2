// BF16 test harness for conv2d_bf16; comparison in float at 2e-2.
#include <cstdio>
#include <cstdlib>
#include <vector>
#include <cuda_runtime.h>
#include <cuda_bf16.h>

#include "common/taskpack_host.h"
#include "common/taskpack_harness.cuh"
#include "common/taskpack_bf16.cuh"
#include "common/taskpack_sizes.h"

#include "conv2d_bf16.cu"

// ===== OPTIMIZED IMPLEMENTATION BEGIN =====
__global__ void conv2d_bf16_kernel_optimized(const __nv_bfloat16* input,
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

extern "C" void conv2d_bf16_optimized(const __nv_bfloat16* input,
                                      const __nv_bfloat16* kernel,
                                      __nv_bfloat16* output, int height,
                                      int width) {
    dim3 block(16, 16);
    dim3 grid((width + block.x - 1) / block.x, (height + block.y - 1) / block.y);
    conv2d_bf16_kernel_optimized<<<grid, block>>>(input, kernel, output, height,
                                                  width);
    cudaDeviceSynchronize();
}
// ===== OPTIMIZED IMPLEMENTATION END =====

static const double kTolerance = 2e-2;

static int run_size(const taskpack::sizes::ConvSize& size, int index) {
    using namespace taskpack;
    const int height = size.height, width = size.width;
    const size_t cells = (size_t)height * width;
    const double scale = reduction_scale(9);
    Bf16Buffer input = quantized_uniform(cells,
                                         sizes::kDataSeed + index * 1000003ULL,
                                         scale);
    Bf16Buffer kernel = quantized_uniform(9,
                                          sizes::kDataSeed + index * 1000003ULL + 1,
                                          scale);

    std::vector<double> reference(cells);
    cpu_conv2d(input.values.data(), kernel.values.data(), reference.data(),
               height, width);

    __nv_bfloat16* d_input = device_copy_bf16(input.bits);
    __nv_bfloat16* d_kernel = device_copy_bf16(kernel.bits);
    __nv_bfloat16* d_out_base = device_alloc<__nv_bfloat16>(cells);
    __nv_bfloat16* d_out_opt = device_alloc<__nv_bfloat16>(cells);

    conv2d_bf16(d_input, d_kernel, d_out_base, height, width);
    TASKPACK_CUDA_CHECK(cudaGetLastError());
    std::vector<float> out = fetch_bf16(d_out_base, cells);
    Mismatch mm;
    if (!compare_outputs(reference.data(), out.data(), cells, kTolerance, &mm)) {
        print_mismatch_json("baseline_self_check", size.label, mm, kTolerance);
        return 2;
    }

    std::vector<double> truth(out.begin(), out.end());
    conv2d_bf16_optimized(d_input, d_kernel, d_out_opt, height, width);
    TASKPACK_CUDA_CHECK(cudaGetLastError());
    out = fetch_bf16(d_out_opt, cells);
    if (!compare_outputs(truth.data(), out.data(), cells, kTolerance, &mm)) {
        print_mismatch_json("optimized_vs_baseline", size.label, mm, kTolerance);
        return 2;
    }

    double base_ms = time_wrapper_ms(
        [&] { conv2d_bf16(d_input, d_kernel, d_out_base, height, width); });
    double opt_ms = time_wrapper_ms(
        [&] { conv2d_bf16_optimized(d_input, d_kernel, d_out_opt, height, width); });
    print_block(size.label, size.complexity, base_ms / opt_ms);

    cudaFree(d_input);
    cudaFree(d_kernel);
    cudaFree(d_out_base);
    cudaFree(d_out_opt);
    return 0;
}

int main(int argc, char** argv) {
    int count = 0;
    const taskpack::sizes::ConvSize* table = taskpack::sizes::conv2d(&count);
    int only = taskpack::selected_size(argc, argv);
    for (int i = 0; i < count; ++i) {
        if (only >= 0 && only != i) continue;
        int rc = run_size(table[i], i);
        if (rc != 0) return rc;
    }
    return 0;
}
