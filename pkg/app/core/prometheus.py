"""
Prometheus metrics for monitoring solver and experiment performance.
"""
import time
from functools import wraps
from pathlib import Path
from typing import Callable, Union

from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile

REGISTRY = CollectorRegistry()

SOLVER_LATENCY = Histogram(
    "landslide_solver_latency_seconds",
    "Solver wall time in seconds",
    ["solver", "stage"],
    registry=REGISTRY,
)

SOLVER_ITERATIONS = Counter(
    "landslide_solver_iterations",
    "Number of descent iterations performed",
    ["solver"],
    registry=REGISTRY,
)

SOLVER_GRADIENT_NORM = Gauge(
    "landslide_solver_gradient_norm",
    "Gradient norm at the last solver iterate",
    ["solver"],
    registry=REGISTRY,
)

CHECK_COUNT = Counter(
    "landslide_check_count",
    "Number of experiment checks evaluated",
    ["experiment", "outcome"],
    registry=REGISTRY,
)

ERROR_COUNT = Counter(
    "landslide_error_count",
    "Number of errors",
    ["type", "location"],
    registry=REGISTRY,
)


def track_solver_operation(solver: str, stage: str):
    """
    Decorator to track solver latency.

    Args:
        solver: Name of the solver (e.g., "harmonic", "graph_area")
        stage: Stage of the computation (e.g., "solve", "extract")
    """
    def decorator(func: Callable):
        @wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            try:
                return func(*args, **kwargs)
            finally:
                duration = time.perf_counter() - start_time
                SOLVER_LATENCY.labels(solver=solver, stage=stage).observe(duration)
        return wrapper
    return decorator


def record_solver_progress(solver: str, iterations: int, gradient_norm: float):
    """Record iteration count and final gradient norm of a solver run."""
    SOLVER_ITERATIONS.labels(solver=solver).inc(iterations)
    SOLVER_GRADIENT_NORM.labels(solver=solver).set(gradient_norm)


def record_check(experiment: str, passed: bool):
    """Count one evaluated check."""
    CHECK_COUNT.labels(experiment=experiment, outcome="pass" if passed else "fail").inc()


def increment_error_count(error_type: str, location: str = "unknown"):
    """
    Increment the error counter.

    Args:
        error_type: Type of error
        location: Where the error occurred
    """
    ERROR_COUNT.labels(type=error_type, location=location).inc()


def write_metrics(path: Union[str, Path]):
    """Write the registry in the text exposition format."""
    write_to_textfile(str(path), REGISTRY)
