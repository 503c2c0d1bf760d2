// BF16 test harness for dot_product_bf16; comparison in float at 2e-2.
#include <cstdio>
#include <cstdlib>
#include <vector>
#include <cuda_runtime.h>
#include <cuda_bf16.h>

#include "common/taskpack_host.h"
#include "common/taskpack_harness.cuh"
#include "common/taskpack_bf16.cuh"
#include "common/taskpack_sizes.h"

#include "dot_product_bf16.cu"

// ===== OPTIMIZED IMPLEMENTATION BEGIN =====
__global__ void dot_product_bf16_kernel_optimized(const __nv_bfloat16* a,
                                                  const __nv_bfloat16* b,
                                                  float* accum, int n) {
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

__global__ void dot_product_bf16_store_kernel_optimized(const float* accum,
                                                        __nv_bfloat16* out) {
    out[0] = __float2bfloat16(accum[0]);
}

extern "C" void dot_product_bf16_optimized(const __nv_bfloat16* a,
                                           const __nv_bfloat16* b,
                                           __nv_bfloat16* out, int n) {
    float* accum = nullptr;
    cudaMalloc(&accum, sizeof(float));
    cudaMemset(accum, 0, sizeof(float));
    int blocks = (n + 255) / 256;
    if (blocks > 1024) blocks = 1024;
    dot_product_bf16_kernel_optimized<<<blocks, 256>>>(a, b, accum, n);
    dot_product_bf16_store_kernel_optimized<<<1, 1>>>(accum, out);
    cudaDeviceSynchronize();
    cudaFree(accum);
}
// ===== OPTIMIZED IMPLEMENTATION END =====

static const double kTolerance = 2e-2;

static int run_size(const taskpack::sizes::DotSize& size, int index) {
    using namespace taskpack;
    const int n = size.n;
    const double scale = reduction_scale(n);
    Bf16Buffer a = quantized_uniform(n, sizes::kDataSeed + index * 1000003ULL, scale);
    Bf16Buffer b = quantized_uniform(n, sizes::kDataSeed + index * 1000003ULL + 1, scale);

    double reference = 0.0;
    cpu_dot_product(a.values.data(), b.values.data(), &reference, n);

    __nv_bfloat16* da = device_copy_bf16(a.bits);
    __nv_bfloat16* db = device_copy_bf16(b.bits);
    __nv_bfloat16* dout = device_alloc<__nv_bfloat16>(1);

    dot_product_bf16(da, db, dout, n);
    TASKPACK_CUDA_CHECK(cudaGetLastError());
    std::vector<float> out = fetch_bf16(dout, 1);
    Mismatch mm;
    if (!compare_outputs(&reference, out.data(), 1, kTolerance, &mm)) {
        print_mismatch_json("baseline_self_check", size.label, mm, kTolerance);
        return 2;
    }

    double truth = (double)out[0];
    dot_product_bf16_optimized(da, db, dout, n);
    TASKPACK_CUDA_CHECK(cudaGetLastError());
    out = fetch_bf16(dout, 1);
    if (!compare_outputs(&truth, out.data(), 1, kTolerance, &mm)) {
        print_mismatch_json("optimized_vs_baseline", size.label, mm, kTolerance);
        return 2;
    }

    double base_ms = time_wrapper_ms([&] { dot_product_bf16(da, db, dout, n); });
    double opt_ms = time_wrapper_ms(
        [&] { dot_product_bf16_optimized(da, db, dout, n); });
    print_block(size.label, size.complexity, base_ms / opt_ms);

    cudaFree(da);
    cudaFree(db);
    cudaFree(dout);
    return 0;
}

int main(int argc, char** argv) {
    int count = 0;
    const taskpack::sizes::DotSize* table = taskpack::sizes::dot_product(&count);
    int only = taskpack::selected_size(argc, argv);
    for (int i = 0; i < count; ++i) {
        if (only >= 0 && only != i) continue;
        int rc = run_size(table[i], i);
        if (rc != 0) return rc;
    }
    return 0;
}
