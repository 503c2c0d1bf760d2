// BF16 test harness for spmv_csr_bf16; comparison in float at 2e-2.
#include <cstdio>
#include <cstdlib>
#include <vector>
#include <cuda_runtime.h>
#include <cuda_bf16.h>

#include "common/taskpack_host.h"
#include "common/taskpack_harness.cuh"
#include "common/taskpack_bf16.cuh"
#include "common/taskpack_sizes.h"

#include "spmv_csr_bf16.cu"

// ===== OPTIMIZED IMPLEMENTATION BEGIN =====
__global__ void spmv_csr_bf16_kernel_optimized(const int* row_ptr,
                                               const int* col_idx,
                                               const __nv_bfloat16* values,
                                               const __nv_bfloat16* x,
                                               __nv_bfloat16* y, int rows) {
    int row = blockIdx.x * blockDim.x + threadIdx.x;
    if (row < rows) {
        float sum = 0.0f;
        for (int j = row_ptr[row]; j < row_ptr[row + 1]; ++j)
            sum += __bfloat162float(values[j]) * __bfloat162float(x[col_idx[j]]);
        y[row] = __float2bfloat16(sum);
    }
}

extern "C" void spmv_csr_bf16_optimized(const int* row_ptr, const int* col_idx,
                                        const __nv_bfloat16* values,
                                        const __nv_bfloat16* x, __nv_bfloat16* y,
                                        int rows) {
    spmv_csr_bf16_kernel_optimized<<<(rows + 255) / 256, 256>>>(
        row_ptr, col_idx, values, x, y, rows);
    cudaDeviceSynchronize();
}
// ===== OPTIMIZED IMPLEMENTATION END =====

static const double kTolerance = 2e-2;

static int run_size(const taskpack::sizes::SpmvSize& size, int index) {
    using namespace taskpack;
    const int rows = size.rows, cols = size.cols, per_row = size.nnz_per_row;
    const size_t nnz = (size_t)rows * per_row;
    const double scale = reduction_scale(per_row);

    std::vector<int> row_ptr(rows + 1), col_idx(nnz);
    build_csr_pattern(rows, cols, per_row, sizes::kDataSeed + index * 1000003ULL,
                      row_ptr.data(), col_idx.data());
    Bf16Buffer values = quantized_uniform(nnz,
                                          sizes::kDataSeed + index * 1000003ULL + 1,
                                          scale);
    Bf16Buffer x = quantized_uniform(cols,
                                     sizes::kDataSeed + index * 1000003ULL + 2,
                                     scale);

    std::vector<double> reference(rows);
    cpu_spmv_csr(row_ptr.data(), col_idx.data(), values.values.data(),
                 x.values.data(), reference.data(), rows);

    int* d_row_ptr = device_copy(row_ptr.data(), row_ptr.size());
    int* d_col_idx = device_copy(col_idx.data(), col_idx.size());
    __nv_bfloat16* d_values = device_copy_bf16(values.bits);
    __nv_bfloat16* d_x = device_copy_bf16(x.bits);
    __nv_bfloat16* d_y_base = device_alloc<__nv_bfloat16>(rows);
    __nv_bfloat16* d_y_opt = device_alloc<__nv_bfloat16>(rows);

    spmv_csr_bf16(d_row_ptr, d_col_idx, d_values, d_x, d_y_base, rows);
    TASKPACK_CUDA_CHECK(cudaGetLastError());
    std::vector<float> out = fetch_bf16(d_y_base, rows);
    Mismatch mm;
    if (!compare_outputs(reference.data(), out.data(), out.size(), kTolerance, &mm)) {
        print_mismatch_json("baseline_self_check", size.label, mm, kTolerance);
        return 2;
    }

    std::vector<double> truth(out.begin(), out.end());
    spmv_csr_bf16_optimized(d_row_ptr, d_col_idx, d_values, d_x, d_y_opt, rows);
    TASKPACK_CUDA_CHECK(cudaGetLastError());
    out = fetch_bf16(d_y_opt, rows);
    if (!compare_outputs(truth.data(), out.data(), out.size(), kTolerance, &mm)) {
        print_mismatch_json("optimized_vs_baseline", size.label, mm, kTolerance);
        return 2;
    }

    double base_ms = time_wrapper_ms(
        [&] { spmv_csr_bf16(d_row_ptr, d_col_idx, d_values, d_x, d_y_base, rows); });
    double opt_ms = time_wrapper_ms([&] {
        spmv_csr_bf16_optimized(d_row_ptr, d_col_idx, d_values, d_x, d_y_opt, rows);
    });
    print_block(size.label, size.complexity, base_ms / opt_ms);

    cudaFree(d_row_ptr);
    cudaFree(d_col_idx);
    cudaFree(d_values);
    cudaFree(d_x);
    cudaFree(d_y_base);
    cudaFree(d_y_opt);
    return 0;
}

int main(int argc, char** argv) {
    int count = 0;
    const taskpack::sizes::SpmvSize* table = taskpack::sizes::spmv_csr(&count);
    int only = taskpack::selected_size(argc, argv);
    for (int i = 0; i < count; ++i) {
        if (only >= 0 && only != i) continue;
        int rc = run_size(table[i], i);
        if (rc != 0) return rc;
    }
    return 0;
}
