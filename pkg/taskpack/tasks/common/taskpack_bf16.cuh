// Device transfers for the _bf16 harnesses; host-side quantization lives in
// taskpack_host.h so the CPU tests can exercise it without CUDA.
#pragma once

#include <cstdint>
#include <vector>
#include <cuda_runtime.h>
#include <cuda_bf16.h>

#include "taskpack_harness.cuh"
#include "taskpack_host.h"

namespace taskpack {

inline __nv_bfloat16* device_copy_bf16(const std::vector<uint16_t>& bits) {
    __nv_bfloat16* dev = nullptr;
    TASKPACK_CUDA_CHECK(cudaMalloc(&dev, bits.size() * sizeof(uint16_t)));
    TASKPACK_CUDA_CHECK(cudaMemcpy(dev, bits.data(),
                                   bits.size() * sizeof(uint16_t),
                                   cudaMemcpyHostToDevice));
    return dev;
}

inline std::vector<float> fetch_bf16(const __nv_bfloat16* dev, size_t n) {
    std::vector<uint16_t> bits(n);
    TASKPACK_CUDA_CHECK(cudaMemcpy(bits.data(), dev, n * sizeof(uint16_t),
                                   cudaMemcpyDeviceToHost));
    std::vector<float> values(n);
    for (size_t i = 0; i < n; ++i) values[i] = bf16_bits_to_float(bits[i]);
    return values;
}

}  // namespace taskpack
