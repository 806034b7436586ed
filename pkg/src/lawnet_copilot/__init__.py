"""Human-in-the-loop copilot and digital twin for UAV low-altitude networks.

Layers, bottom to top:

  sim        deterministic slot-stepped network simulator
  allocator  per-slot PRB scheduling schemes
  knowledge  typed document store with lexical retrieval
  copilot    intent grammar, HITL protocol machine, task pipelines
  toolkit    gated tool registry (the only write path to the world)
  runtime    live world + command queue + telemetry trace
  metrics    ISR / energy-efficiency / latency from raw traces
  runner     batch experiments, scripted operators, audit replay
  gateway    HTTP + SSE service for the operator console
"""

__version__ = "0.1.0"

from . import sim, allocator, knowledge, metrics

__all__ = ["sim", "allocator", "knowledge", "metrics", "__version__"]
