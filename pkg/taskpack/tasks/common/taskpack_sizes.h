// Single source of truth for every task's size schedule.  The manifests
// mirror these labels and complexities; a consistency test on the
// orchestrator side cross-checks them.
#pragma once

namespace taskpack {
namespace sizes {

constexpr unsigned long long kDataSeed = 0xC0DEC0DEULL;

struct MatmulSize { const char* label; long long complexity; int m, k, n; };
inline const MatmulSize* matrix_mul(int* count) {
    static const MatmulSize table[] = {
        {"M: 32, K: 32, N: 32", 65536LL, 32, 32, 32},
        {"M: 128, K: 128, N: 128", 4194304LL, 128, 128, 128},
        {"M: 512, K: 512, N: 512", 268435456LL, 512, 512, 512},
    };
    *count = 3;
    return table;
}

struct DotSize { const char* label; long long complexity; int n; };
inline const DotSize* dot_product(int* count) {
    static const DotSize table[] = {
        {"N: 256", 512LL, 256},
        {"N: 8192", 16384LL, 8192},
        {"N: 262144", 524288LL, 262144},
    };
    *count = 3;
    return table;
}

struct SpmvSize { const char* label; long long complexity; int rows, cols, nnz_per_row; };
inline const SpmvSize* spmv_csr(int* count) {
    // ~1% density, row-balanced; complexity = 2 * rows * nnz_per_row
    static const SpmvSize table[] = {
        {"Rows: 256, Cols: 256, NNZ: 512", 1024LL, 256, 256, 2},
        {"Rows: 2048, Cols: 2048, NNZ: 40960", 81920LL, 2048, 2048, 20},
        {"Rows: 8192, Cols: 8192, NNZ: 663552", 1327104LL, 8192, 8192, 81},
    };
    *count = 3;
    return table;
}

struct ConvSize { const char* label; long long complexity; int height, width; };
inline const ConvSize* conv2d(int* count) {
    // complexity = H * W * 9 * 2 (3x3 kernel, multiply + add)
    static const ConvSize table[] = {
        {"H: 16, W: 16, K: 3", 4608LL, 16, 16},
        {"H: 128, W: 128, K: 3", 294912LL, 128, 128},
        {"H: 1024, W: 1024, K: 3", 18874368LL, 1024, 1024},
    };
    *count = 3;
    return table;
}

struct RmsSize { const char* label; long long complexity; int rows, cols; };
inline const RmsSize* rms_norm(int* count) {
    // complexity = rows * cols * 3 (square-accumulate, normalize, scale)
    static const RmsSize table[] = {
        {"Rows: 8, Cols: 256", 6144LL, 8, 256},
        {"Rows: 128, Cols: 1024", 393216LL, 128, 1024},
        {"Rows: 1024, Cols: 4096", 12582912LL, 1024, 4096},
    };
    *count = 3;
    return table;
}

}  // namespace sizes
}  // namespace taskpack
