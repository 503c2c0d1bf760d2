// BF16 test harness for rms_norm_bf16; comparison in float at 2e-2.
#include <cstdio>
#include <cstdlib>
#include <vector>
#include <cuda_runtime.h>
#include <cuda_bf16.h>

#include "common/taskpack_host.h"
#include "common/taskpack_harness.cuh"
#include "common/taskpack_bf16.cuh"
#include "common/taskpack_sizes.h"

#include "rms_norm_bf16.cu"

// ===== OPTIMIZED IMPLEMENTATION BEGIN =====
__global__ void rms_norm_bf16_kernel_optimized(const __nv_bfloat16* x,
                                               const __nv_bfloat16* w,
                                               __nv_bfloat16* y, int rows,
                                               int cols) {
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

extern "C" void rms_norm_bf16_optimized(const __nv_bfloat16* x,
                                        const __nv_bfloat16* w, __nv_bfloat16* y,
                                        int rows, int cols) {
    rms_norm_bf16_kernel_optimized<<<rows, 256>>>(x, w, y, rows, cols);
    cudaDeviceSynchronize();
}
// ===== OPTIMIZED IMPLEMENTATION END =====

static const double kTolerance = 2e-2;
static const double kEpsilon = 1e-5;

static int run_size(const taskpack::sizes::RmsSize& size, int index) {
    using namespace taskpack;
    const int rows = size.rows, cols = size.cols;
    const size_t cells = (size_t)rows * cols;
    Bf16Buffer x = quantized_uniform(cells, sizes::kDataSeed + index * 1000003ULL, 1.0);
    Bf16Buffer w = quantized_uniform(cols, sizes::kDataSeed + index * 1000003ULL + 1, 1.0);

    std::vector<double> reference(cells);
    cpu_rms_norm(x.values.data(), w.values.data(), reference.data(), rows, cols,
                 kEpsilon);

    __nv_bfloat16* d_x = device_copy_bf16(x.bits);
    __nv_bfloat16* d_w = device_copy_bf16(w.bits);
    __nv_bfloat16* d_y_base = device_alloc<__nv_bfloat16>(cells);
    __nv_bfloat16* d_y_opt = device_alloc<__nv_bfloat16>(cells);

    rms_norm_bf16(d_x, d_w, d_y_base, rows, cols);
    TASKPACK_CUDA_CHECK(cudaGetLastError());
    std::vector<float> out = fetch_bf16(d_y_base, cells);
    Mismatch mm;
    if (!compare_outputs(reference.data(), out.data(), cells, kTolerance, &mm)) {
        print_mismatch_json("baseline_self_check", size.label, mm, kTolerance);
        return 2;
    }

    std::vector<double> truth(out.begin(), out.end());
    rms_norm_bf16_optimized(d_x, d_w, d_y_opt, rows, cols);
    TASKPACK_CUDA_CHECK(cudaGetLastError());
    out = fetch_bf16(d_y_opt, cells);
    if (!compare_outputs(truth.data(), out.data(), cells, kTolerance, &mm)) {
        print_mismatch_json("optimized_vs_baseline", size.label, mm, kTolerance);
        return 2;
    }

    double base_ms = time_wrapper_ms([&] { rms_norm_bf16(d_x, d_w, d_y_base, rows, cols); });
    double opt_ms = time_wrapper_ms(
        [&] { rms_norm_bf16_optimized(d_x, d_w, d_y_opt, rows, cols); });
    print_block(size.label, size.complexity, base_ms / opt_ms);

    cudaFree(d_x);
    cudaFree(d_w);
    cudaFree(d_y_base);
    cudaFree(d_y_opt);
    return 0;
}

int main(int argc, char** argv) {
    int count = 0;
    const taskpack::sizes::RmsSize* table = taskpack::sizes::rms_norm(&count);
    int only = taskpack::selected_size(argc, argv);
    for (int i = 0; i < count; ++i) {
        if (only >= 0 && only != i) continue;
        int rc = run_size(table[i], i);
        if (rc != 0) return rc;
    }
    return 0;
}
