// Host-side helpers shared by every task harness: deterministic input
// generation, bf16 rounding, CPU reference kernels (double accumulation),
// tolerance comparison and the block/mismatch output format.
// Pure C++17, no CUDA constructs: compiles under g++ for the host tests.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <vector>

namespace taskpack {

// splitmix64: tiny, seedable, identical results everywhere
struct Splitmix64 {
    uint64_t state;
    explicit Splitmix64(uint64_t seed) : state(seed) {}
    uint64_t next() {
        state += 0x9E3779B97F4A7C15ull;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    double unit() {  // [0, 1)
        return (double)(next() >> 11) * (1.0 / 9007199254740992.0);
    }
    float uniform(double scale) {  // [-scale, scale)
        return (float)((unit() * 2.0 - 1.0) * scale);
    }
};

inline void fill_uniform(float* data, size_t n, uint64_t seed, double scale) {
    Splitmix64 rng(seed);
    for (size_t i = 0; i < n; ++i) data[i] = rng.uniform(scale);
}

// Keeps reduction outputs O(1) regardless of reduction length, so the bf16
// variants stay inside the absolute comparison tolerance.
inline double reduction_scale(long long reduction_len) {
    return 0.7 * std::pow(3.0 / (double)reduction_len, 0.25);
}

// ---- bf16 (round-to-nearest-even into the top 16 bits of an f32) ----------

inline uint16_t float_to_bf16_bits(float f) {
    uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    bits += 0x7FFFu + ((bits >> 16) & 1u);
    return (uint16_t)(bits >> 16);
}

inline float bf16_bits_to_float(uint16_t half) {
    uint32_t bits = (uint32_t)half << 16;
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    return f;
}

inline float quantize_bf16(float f) {
    return bf16_bits_to_float(float_to_bf16_bits(f));
}

// Host-side staging for the _bf16 harnesses: the device consumes the raw
// bits, the CPU reference consumes the identical quantized floats.
struct Bf16Buffer {
    std::vector<uint16_t> bits;
    std::vector<float> values;
};

inline Bf16Buffer quantized_uniform(size_t n, uint64_t seed, double scale) {
    Bf16Buffer buf;
    buf.bits.resize(n);
    buf.values.resize(n);
    std::vector<float> raw(n);
    fill_uniform(raw.data(), n, seed, scale);
    for (size_t i = 0; i < n; ++i) {
        buf.bits[i] = float_to_bf16_bits(raw[i]);
        buf.values[i] = bf16_bits_to_float(buf.bits[i]);
    }
    return buf;
}

// ---- comparison ------------------------------------------------------------

struct Mismatch {
    long long index = -1;
    double expected = 0.0;
    double actual = 0.0;
    double abs_error = 0.0;
};

// pass iff max |expected - actual| <= tol; records the first offender
inline bool compare_outputs(const double* expected, const float* actual,
                            size_t n, double tol, Mismatch* first) {
    bool pass = true;
    for (size_t i = 0; i < n; ++i) {
        double diff = std::fabs(expected[i] - (double)actual[i]);
        if (diff > tol) {
            if (pass && first) {
                first->index = (long long)i;
                first->expected = expected[i];
                first->actual = (double)actual[i];
                first->abs_error = diff;
            }
            pass = false;
        }
    }
    return pass;
}

// ---- harness output contract ----------------------------------------------

inline int format_block(char* buf, size_t cap, const char* label,
                        long long complexity, double speedup) {
    return std::snprintf(buf, cap,
                         "Test case size: %s. Complexity: %lld\n"
                         "Speedup ratio: %.6g\n=====\n",
                         label, complexity, speedup);
}

inline int format_mismatch_json(char* buf, size_t cap, const char* stage,
                                const char* label, const Mismatch& mm,
                                double tol) {
    return std::snprintf(
        buf, cap,
        "{\"error\": \"mismatch\", \"stage\": \"%s\", \"mismatches\": "
        "{\"size_label\": \"%s\", \"index\": %lld, \"expected\": %.9g, "
        "\"actual\": %.9g, \"abs_error\": %.9g, \"tolerance\": %.3g}}\n",
        stage, label, mm.index, mm.expected, mm.actual, mm.abs_error, tol);
}

inline void print_block(const char* label, long long complexity, double speedup) {
    char buf[512];
    format_block(buf, sizeof(buf), label, complexity, speedup);
    std::fputs(buf, stdout);
}

inline void print_mismatch_json(const char* stage, const char* label,
                                const Mismatch& mm, double tol) {
    char buf[1024];
    format_mismatch_json(buf, sizeof(buf), stage, label, mm, tol);
    std::fputs(buf, stdout);
}

// ---- CPU references (double accumulation) ----------------------------------

inline void cpu_matrix_mul(const float* a, const float* b, double* c,
                           int m, int k, int n) {
    for (int row = 0; row < m; ++row) {
        for (int col = 0; col < n; ++col) {
            double sum = 0.0;
            for (int i = 0; i < k; ++i)
                sum += (double)a[row * k + i] * (double)b[i * n + col];
            c[row * n + col] = sum;
        }
    }
}

inline void cpu_dot_product(const float* a, const float* b, double* out, int n) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += (double)a[i] * (double)b[i];
    out[0] = sum;
}

inline void cpu_spmv_csr(const int* row_ptr, const int* col_idx,
                         const float* values, const float* x, double* y,
                         int rows) {
    for (int row = 0; row < rows; ++row) {
        double sum = 0.0;
        for (int j = row_ptr[row]; j < row_ptr[row + 1]; ++j)
            sum += (double)values[j] * (double)x[col_idx[j]];
        y[row] = sum;
    }
}

// 3x3 kernel, zero-padded "same" convolution, single channel
inline void cpu_conv2d(const float* input, const float* kernel, double* output,
                       int height, int width) {
    for (int row = 0; row < height; ++row) {
        for (int col = 0; col < width; ++col) {
            double sum = 0.0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    int r = row + dy;
                    int c = col + dx;
                    if (r >= 0 && r < height && c >= 0 && c < width)
                        sum += (double)input[r * width + c] *
                               (double)kernel[(dy + 1) * 3 + (dx + 1)];
                }
            }
            output[row * width + col] = sum;
        }
    }
}

inline void cpu_rms_norm(const float* x, const float* w, double* y,
                         int rows, int cols, double eps) {
    for (int row = 0; row < rows; ++row) {
        double accum = 0.0;
        for (int col = 0; col < cols; ++col) {
            double v = x[row * cols + col];
            accum += v * v;
        }
        double inv = 1.0 / std::sqrt(accum / (double)cols + eps);
        for (int col = 0; col < cols; ++col)
            y[row * cols + col] = (double)x[row * cols + col] * inv *
                                  (double)w[col];
    }
}

// CSR pattern used by the spmv task: fixed nonzeros per row (about 1%
// density), columns drawn from the seeded generator (duplicates allowed).
inline void build_csr_pattern(int rows, int cols, int nnz_per_row,
                              uint64_t seed, int* row_ptr, int* col_idx) {
    Splitmix64 rng(seed);
    row_ptr[0] = 0;
    for (int row = 0; row < rows; ++row) {
        for (int j = 0; j < nnz_per_row; ++j)
            col_idx[row * nnz_per_row + j] = (int)(rng.next() % (uint64_t)cols);
        row_ptr[row + 1] = (row + 1) * nnz_per_row;
    }
}

}  // namespace taskpack
