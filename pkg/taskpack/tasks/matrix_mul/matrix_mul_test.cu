// Test harness for matrix_mul: correctness against a CPU reference and the
// ground-truth kernel, then 3 warm-up + 50 timed runs of both wrappers.
// Exit codes: 0 all sizes pass, 2 mismatch (JSON detail on stdout), 3 CUDA
// fault.  Optional argv[1] selects a single size index.
#include <cstdio>
#include <cstdlib>
#include <vector>
#include <cuda_runtime.h>

#include "common/taskpack_host.h"
#include "common/taskpack_harness.cuh"
#include "common/taskpack_sizes.h"

#include "matrix_mul.cu"

// ===== OPTIMIZED IMPLEMENTATION BEGIN =====
__global__ void matrix_mul_kernel_optimized(const float* a, const float* b,
                                            float* c, int m, int k, int n) {
    int row = blockIdx.y * blockDim.y + threadIdx.y;
    int col = blockIdx.x * blockDim.x + threadIdx.x;
    if (row < m && col < n) {
        float sum = 0.0f;
        for (int i = 0; i < k; ++i)
            sum += a[row * k + i] * b[i * n + col];
        c[row * n + col] = sum;
    }
}

extern "C" void matrix_mul_optimized(const float* a, const float* b, float* c,
                                     int m, int k, int n) {
    dim3 block(16, 16);
    dim3 grid((n + block.x - 1) / block.x, (m + block.y - 1) / block.y);
    matrix_mul_kernel_optimized<<<grid, block>>>(a, b, c, m, k, n);
    cudaDeviceSynchronize();
}
// ===== OPTIMIZED IMPLEMENTATION END =====

static const double kTolerance = 1e-5;

static int run_size(const taskpack::sizes::MatmulSize& size, int index) {
    using namespace taskpack;
    const int m = size.m, k = size.k, n = size.n;
    const double scale = reduction_scale(k);
    std::vector<float> ha((size_t)m * k), hb((size_t)k * n);
    fill_uniform(ha.data(), ha.size(), sizes::kDataSeed + index * 1000003ULL, scale);
    fill_uniform(hb.data(), hb.size(), sizes::kDataSeed + index * 1000003ULL + 1, scale);

    std::vector<double> reference((size_t)m * n);
    cpu_matrix_mul(ha.data(), hb.data(), reference.data(), m, k, n);

    float* da = device_copy(ha.data(), ha.size());
    float* db = device_copy(hb.data(), hb.size());
    float* dc_base = device_alloc<float>((size_t)m * n);
    float* dc_opt = device_alloc<float>((size_t)m * n);

    std::vector<float> out((size_t)m * n);
    matrix_mul(da, db, dc_base, m, k, n);
    TASKPACK_CUDA_CHECK(cudaGetLastError());
    TASKPACK_CUDA_CHECK(cudaMemcpy(out.data(), dc_base, out.size() * sizeof(float),
                                   cudaMemcpyDeviceToHost));
    Mismatch mm;
    if (!compare_outputs(reference.data(), out.data(), out.size(), kTolerance, &mm)) {
        print_mismatch_json("baseline_self_check", size.label, mm, kTolerance);
        return 2;
    }

    std::vector<double> truth(out.begin(), out.end());
    matrix_mul_optimized(da, db, dc_opt, m, k, n);
    TASKPACK_CUDA_CHECK(cudaGetLastError());
    TASKPACK_CUDA_CHECK(cudaMemcpy(out.data(), dc_opt, out.size() * sizeof(float),
                                   cudaMemcpyDeviceToHost));
    if (!compare_outputs(truth.data(), out.data(), out.size(), kTolerance, &mm)) {
        print_mismatch_json("optimized_vs_baseline", size.label, mm, kTolerance);
        return 2;
    }

    double base_ms = time_wrapper_ms([&] { matrix_mul(da, db, dc_base, m, k, n); });
    double opt_ms = time_wrapper_ms([&] { matrix_mul_optimized(da, db, dc_opt, m, k, n); });
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
