// Test harness for spmv_csr; see matrix_mul_test.cu for the contract.
#include <cstdio>
#include <cstdlib>
#include <vector>
#include <cuda_runtime.h>

#include "common/taskpack_host.h"
#include "common/taskpack_harness.cuh"
#include "common/taskpack_sizes.h"

#include "spmv_csr.cu"

// ===== OPTIMIZED IMPLEMENTATION BEGIN =====
__global__ void spmv_csr_kernel_optimized(const int* row_ptr, const int* col_idx,
                                          const float* values, const float* x,
                                          float* y, int rows) {
    int row = blockIdx.x * blockDim.x + threadIdx.x;
    if (row < rows) {
        float sum = 0.0f;
        for (int j = row_ptr[row]; j < row_ptr[row + 1]; ++j)
            sum += values[j] * x[col_idx[j]];
        y[row] = sum;
    }
}

extern "C" void spmv_csr_optimized(const int* row_ptr, const int* col_idx,
                                   const float* values, const float* x, float* y,
                                   int rows) {
    spmv_csr_kernel_optimized<<<(rows + 255) / 256, 256>>>(row_ptr, col_idx,
                                                           values, x, y, rows);
    cudaDeviceSynchronize();
}
// ===== OPTIMIZED IMPLEMENTATION END =====

static const double kTolerance = 1e-5;

static int run_size(const taskpack::sizes::SpmvSize& size, int index) {
    using namespace taskpack;
    const int rows = size.rows, cols = size.cols, per_row = size.nnz_per_row;
    const size_t nnz = (size_t)rows * per_row;
    const double scale = reduction_scale(per_row);

    std::vector<int> row_ptr(rows + 1), col_idx(nnz);
    build_csr_pattern(rows, cols, per_row, sizes::kDataSeed + index * 1000003ULL,
                      row_ptr.data(), col_idx.data());
    std::vector<float> values(nnz), x(cols);
    fill_uniform(values.data(), nnz, sizes::kDataSeed + index * 1000003ULL + 1, scale);
    fill_uniform(x.data(), cols, sizes::kDataSeed + index * 1000003ULL + 2, scale);

    std::vector<double> reference(rows);
    cpu_spmv_csr(row_ptr.data(), col_idx.data(), values.data(), x.data(),
                 reference.data(), rows);

    int* d_row_ptr = device_copy(row_ptr.data(), row_ptr.size());
    int* d_col_idx = device_copy(col_idx.data(), col_idx.size());
    float* d_values = device_copy(values.data(), values.size());
    float* d_x = device_copy(x.data(), x.size());
    float* d_y_base = device_alloc<float>(rows);
    float* d_y_opt = device_alloc<float>(rows);

    std::vector<float> out(rows);
    spmv_csr(d_row_ptr, d_col_idx, d_values, d_x, d_y_base, rows);
    TASKPACK_CUDA_CHECK(cudaGetLastError());
    TASKPACK_CUDA_CHECK(cudaMemcpy(out.data(), d_y_base, rows * sizeof(float),
                                   cudaMemcpyDeviceToHost));
    Mismatch mm;
    if (!compare_outputs(reference.data(), out.data(), out.size(), kTolerance, &mm)) {
        print_mismatch_json("baseline_self_check", size.label, mm, kTolerance);
        return 2;
    }

    std::vector<double> truth(out.begin(), out.end());
    spmv_csr_optimized(d_row_ptr, d_col_idx, d_values, d_x, d_y_opt, rows);
    TASKPACK_CUDA_CHECK(cudaGetLastError());
    TASKPACK_CUDA_CHECK(cudaMemcpy(out.data(), d_y_opt, rows * sizeof(float),
                                   cudaMemcpyDeviceToHost));
    if (!compare_outputs(truth.data(), out.data(), out.size(), kTolerance, &mm)) {
        print_mismatch_json("optimized_vs_baseline", size.label, mm, kTolerance);
        return 2;
    }

    double base_ms = time_wrapper_ms(
        [&] { spmv_csr(d_row_ptr, d_col_idx, d_values, d_x, d_y_base, rows); });
    double opt_ms = time_wrapper_ms(
        [&] { spmv_csr_optimized(d_row_ptr, d_col_idx, d_values, d_x, d_y_opt, rows); });
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
