// CUDA-side harness helpers: error handling with the pack's exit-code
// contract and device-event timing (3 warm-ups, 50 timed runs).
#pragma once

#include <cstdio>
#include <cstdlib>
#include <cuda_runtime.h>

#include "taskpack_host.h"

// exit 3 signals a CUDA fault; the orchestrator re-runs under memcheck
#define TASKPACK_CUDA_CHECK(expr)                                      \
    do {                                                               \
        cudaError_t taskpack_err_ = (expr);                            \
        if (taskpack_err_ != cudaSuccess) {                            \
            std::printf("CUDA error: %s\n",                            \
                        cudaGetErrorString(taskpack_err_));            \
            std::exit(3);                                              \
        }                                                              \
    } while (0)

namespace taskpack {

constexpr int kWarmupRuns = 3;
constexpr int kTimedRuns = 50;

// Average wall time of fn() in milliseconds.  fn is a wrapper call that
// synchronizes internally, so device events bracket the end-to-end cost.
template <typename F>
double time_wrapper_ms(F&& fn) {
    for (int i = 0; i < kWarmupRuns; ++i) fn();
    TASKPACK_CUDA_CHECK(cudaGetLastError());
    TASKPACK_CUDA_CHECK(cudaDeviceSynchronize());
    cudaEvent_t start, stop;
    TASKPACK_CUDA_CHECK(cudaEventCreate(&start));
    TASKPACK_CUDA_CHECK(cudaEventCreate(&stop));
    TASKPACK_CUDA_CHECK(cudaEventRecord(start));
    for (int i = 0; i < kTimedRuns; ++i) fn();
    TASKPACK_CUDA_CHECK(cudaEventRecord(stop));
    TASKPACK_CUDA_CHECK(cudaEventSynchronize(stop));
    float ms = 0.0f;
    TASKPACK_CUDA_CHECK(cudaEventElapsedTime(&ms, start, stop));
    TASKPACK_CUDA_CHECK(cudaEventDestroy(start));
    TASKPACK_CUDA_CHECK(cudaEventDestroy(stop));
    return (double)ms / (double)kTimedRuns;
}

template <typename T>
T* device_copy(const T* host, size_t n) {
    T* dev = nullptr;
    TASKPACK_CUDA_CHECK(cudaMalloc(&dev, n * sizeof(T)));
    TASKPACK_CUDA_CHECK(
        cudaMemcpy(dev, host, n * sizeof(T), cudaMemcpyHostToDevice));
    return dev;
}

template <typename T>
T* device_alloc(size_t n) {
    T* dev = nullptr;
    TASKPACK_CUDA_CHECK(cudaMalloc(&dev, n * sizeof(T)));
    return dev;
}

// Selected size index from argv, or -1 for "run every size".
inline int selected_size(int argc, char** argv) {
    if (argc > 1) return std::atoi(argv[1]);
    return -1;
}

}  // namespace taskpack
