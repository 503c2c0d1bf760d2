"""Agent-driven CUDA kernel optimization loop.

The package is organized around the stages of the optimization loop:

- :mod:`cudapilot.tasks` -- benchmark task manifests and suite discovery
- :mod:`cudapilot.profiling` -- profiler export parsing, threshold
  calibration, bottleneck classification and metric filtering
- :mod:`cudapilot.agents` -- prompt rendering, chat transport, response
  artifact extraction and usage accounting
- :mod:`cudapilot.toolchain` -- compile/run/profile backends (real CUDA
  toolchain and a deterministic mock) and the composite evaluation stage
- :mod:`cudapilot.evaluation` -- scoring, success curves and migration
  analytics
- :mod:`cudapilot.pipeline` -- the iterative plan/code/compile/debug state
  machine with checkpoint/resume
- :mod:`cudapilot.cli` -- command-line surface
"""

__version__ = "0.1.0"
