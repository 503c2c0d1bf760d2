// BF16 test harness for matrix_mul_bf16: inputs are quantized to bf16 on the
// host so the CPU reference sees exactly the device data; both sides convert
// to float before differencing, absolute tolerance 2e-2.
#include <cstdio>
#include <cstdlib>
#include <vector>
#include <cuda_runtime.h>
#include <cuda_bf16.h>

#include "common/taskpack_host.h"
#include "common/taskpack_harness.cuh"
#include "common/taskpack_bf16.cuh"
#include "common/taskpack_sizes.h"

#include "matrix_mul_bf16.cu"

// ===== OPTIMIZED IMPLEMENTATION BEGIN =====
__global__ void matrix_mul_bf16_kernel_optimized(const __nv_bfloat16* a,
                                                 const __nv_bfloat16* b,
                                                 __nv_bfloat16* c,
                                                 int m, int k, int n) {
    int row = blockIdx.y * blockDim.y + threadIdx.y;
    int col = blockIdx.x * blockDim.x + threadIdx.x;
    if (row < m && col < n) {
        float sum = 0.0f;
        for (int i = 0; i < k; ++i)
            sum += __bfloat162float(a[row * k + i]) * __bfloat162float(b[i * n + col]);
        c[row * n + col] = __float2bfloat16(sum);
    }
}

extern "C" void matrix_mul_bf16_optimized(const __nv_bfloat16* a,
                                          const __nv_bfloat16* b,
                                          __nv_bfloat16* c, int m, int k, int n) {
    dim3 block(16, 16);
    dim3 grid((n + block.x - 1) / block.x, (m + block.y - 1) / block.y);
    matrix_mul_bf16_kernel_optimized<<<grid, block>>>(a, b, c, m, k, n);
    cudaDeviceSynchronize();
}
// ===== OPTIMIZED IMPLEMENTATION END =====

static const double kTolerance = 2e-2;

static int run_size(const taskpack::sizes::MatmulSize& size, int index) {
    using namespace taskpack;
    const int m = size.m, k = size.k, n = size.n;
    const double scale = reduction_scale(k);
    Bf16Buffer a = quantized_uniform((size_t)m * k,
                                     sizes::kDataSeed + index * 1000003ULL, scale);
    Bf16Buffer b = quantized_uniform((size_t)k * n,
                                     sizes::kDataSeed + index * 1000003ULL + 1, scale);

    std::vector<double> reference((size_t)m * n);
    cpu_matrix_mul(a.values.data(), b.values.data(), reference.data(), m, k, n);

    __nv_bfloat16* da = device_copy_bf16(a.bits);
    __nv_bfloat16* db = device_copy_bf16(b.bits);
    __nv_bfloat16* dc_base = device_alloc<__nv_bfloat16>((size_t)m * n);
    __nv_bfloat16* dc_opt = device_alloc<__nv_bfloat16>((size_t)m * n);

    matrix_mul_bf16(da, db, dc_base, m, k, n);
    TASKPACK_CUDA_CHECK(cudaGetLastError());
    std::vector<float> out = fetch_bf16(dc_base, (size_t)m * n);
    Mismatch mm;
    if (!compare_outputs(reference.data(), out.data(), out.size(), kTolerance, &mm)) {
        print_mismatch_json("baseline_self_check", size.label, mm, kTolerance);
        return 2;
    }

    std::vector<double> truth(out.begin(), out.end());
    matrix_mul_bf16_optimized(da, db, dc_opt, m, k, n);
    TASKPACK_CUDA_CHECK(cudaGetLastError());
    out = fetch_bf16(dc_opt, (size_t)m * n);
    if (!compare_outputs(truth.data(), out.data(), out.size(), kTolerance, &mm)) {
        print_mismatch_json("optimized_vs_baseline", size.label, mm, kTolerance);
        return 2;
    }

    double base_ms = time_wrapper_ms([&] { matrix_mul_bf16(da, db, dc_base, m, k, n); });
    double opt_ms = time_wrapper_ms(
        [&] { matrix_mul_bf16_optimized(da, db, dc_opt, m, k, n); });
    print_block(size.label, size.complexity, base_ms / opt_ms);

    cudaFree(da);
    cudaFree(db);
    cudaFree(dc_base);
    cudaFree(dc_opt);
    return 0;
}

int main(int argc, char** argv) {
    int count = 0;
    const taskpack::sizes::MatmulSize* table = taskpack::sizes::matrix_mul(&count);
    int only = taskpack::selected_size(argc, argv);
    for (int i = 0; i < count; ++i) {
        if (only >= 0 && only != i) continue;
        int rc = run_size(table[i], i);
        if (rc != 0) return rc;
    }
    return 0;
}
