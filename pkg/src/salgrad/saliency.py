"""Gradient-descent saliency: iteratively erase the recognized object.

The image is modified to reduce the logit of the predicted class while a
quadratic penalty clamps every other logit to its original value, so the
background survives.  Negative input gradients are floored, so pixels can
only decrease; the per-pixel decrease after T steps is the raw saliency
map.
"""

import time
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SaliencyParams:
    """Hyperparameters of the gradient-descent saliency loop.

    ``epsilon=None`` triggers a one-time backtracking probe (halve from
    1.0 until the first step decreases the cost).  ``theta=None`` prunes
    at 10% of the pre-normalization maximum.
    """

    gamma: float = 1.0
    epsilon: float | None = None
    iterations: int = 10
    theta: float | None = None

    def __post_init__(self):
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")
        if self.epsilon is not None and not (
            np.isfinite(self.epsilon) and self.epsilon >= 0
        ):
            raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.theta is not None and not (
            np.isfinite(self.theta) and self.theta >= 0
        ):
            raise ValueError(f"theta must be finite and >= 0, got {self.theta}")


@dataclass
class SaliencyRun:
    """Everything produced by one saliency optimization."""

    initial_image: np.ndarray
    final_image: np.ndarray
    label: int
    baseline_logits: np.ndarray
    cost_trace: list[float]
    raw_map: np.ndarray
    epsilon: float
    theta: float
    wall_time: float = field(default=0.0)


def cost(a, o, label, gamma):
    """Partially-clamped objectness cost: a_l plus a quadratic penalty
    keeping every other logit near its baseline value."""
    a = np.asarray(a, dtype=np.float64)
    o = np.asarray(o, dtype=np.float64)
    if a.shape != o.shape:
        raise ValueError(f"logit shapes differ: {a.shape} vs {o.shape}")
    if not 0 <= label < len(a):
        raise ValueError(f"label {label} out of range for {len(a)} classes")
    diff = a - o
    penalty = diff @ diff - diff[label] ** 2
    return float(a[label] + 0.5 * gamma * penalty)


def output_error(a, o, label, gamma):
    """Output-layer error signal of :func:`cost`: 1 at the predicted
    class, gamma * (a_i - o_i) elsewhere."""
    a = np.asarray(a, dtype=np.float64)
    o = np.asarray(o, dtype=np.float64)
    if a.shape != o.shape:
        raise ValueError(f"logit shapes differ: {a.shape} vs {o.shape}")
    if not 0 <= label < len(a):
        raise ValueError(f"label {label} out of range for {len(a)} classes")
    e = gamma * (a - o)
    e[label] = 1.0
    return e


def gd_step(x, grad, epsilon):
    """One floored gradient-descent update: subtract only the positive
    part of the gradient, then clamp at 0 so pixels stay valid."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if x.shape != grad.shape:
        raise ValueError(f"shape mismatch: image {x.shape} vs gradient {grad.shape}")
    if not np.all(np.isfinite(grad)):
        raise ValueError("gradient contains non-finite values")
    return np.maximum(x - epsilon * np.maximum(grad, 0.0), 0.0)


def _trace_for_epsilon(net, x, label, baseline, gamma, eps, iterations):
    x_t = x
    logits = baseline
    trace = [cost(logits, baseline, label, gamma)]
    for _ in range(iterations):
        e = output_error(logits, baseline, label, gamma)
        grad = net.backward_to_input(x_t, e)
        x_t = gd_step(x_t, grad, eps)
        logits = net.forward(x_t)
        trace.append(cost(logits, baseline, label, gamma))
    return trace


def probe_epsilon(
    net, x, label, baseline, gamma, iterations=10, start=1.0, max_halvings=40
):
    """Backtracking learning-rate probe: halve from ``start`` until a dry
    run of the full update loop has a nonincreasing cost trace.

    Probing on the first step alone is not enough: a rate that decreases
    the cost once can still blow it up several steps later.  If no
    candidate yields a monotone trace, the one with the fewest increases
    (ties to the larger rate) is returned.
    """
    eps = float(start)
    best_eps = eps
    best_bad = None
    for _ in range(max_halvings):
        trace = _trace_for_epsilon(net, x, label, baseline, gamma, eps, iterations)
        tol = 1e-9 * max(1.0, abs(trace[0]))
        bad = int(np.sum(np.diff(trace) > tol))
        if bad == 0 and trace[-1] < trace[0]:
            return eps
        if best_bad is None or bad < best_bad:
            best_bad, best_eps = bad, eps
        eps *= 0.5
    return best_eps


def raw_saliency(x0, xT, theta):
    """Channel-mean decrease, pruned by ``theta`` and max-normalized to
    [0, 1].  An all-zero map stays all-zero."""
    x0 = np.asarray(x0, dtype=np.float64)
    xT = np.asarray(xT, dtype=np.float64)
    if x0.shape != xT.shape:
        raise ValueError(f"shape mismatch: {x0.shape} vs {xT.shape}")
    diff = x0 - xT
    if diff.min() < -1e-9:
        raise ValueError("final image exceeds initial image; flooring violated")
    s = np.maximum(diff.mean(axis=2) - theta, 0.0)
    peak = s.max()
    if peak > 0:
        s = s / peak
    return s


def run_saliency(net, image, params=SaliencyParams()):
    """Run the full iterative erase loop and build the raw saliency map.

    The predicted label and baseline logits are fixed at iteration 0; the
    cost trace has ``iterations + 1`` entries (initial cost included).
    """
    t_start = time.perf_counter()
    x = np.asarray(image, dtype=np.float64)
    baseline = net.forward(x)
    label = int(np.argmax(baseline))

    eps = params.epsilon
    if eps is None:
        eps = probe_epsilon(
            net, x, label, baseline, params.gamma, iterations=params.iterations
        )

    x_t = x.copy()
    logits = baseline
    trace = []
    for _ in range(params.iterations):
        trace.append(cost(logits, baseline, label, params.gamma))
        e = output_error(logits, baseline, label, params.gamma)
        grad = net.backward_to_input(x_t, e)
        x_t = gd_step(x_t, grad, eps)
        logits = net.forward(x_t)
    trace.append(cost(logits, baseline, label, params.gamma))

    theta = params.theta
    if theta is None:
        theta = 0.1 * float((x - x_t).mean(axis=2).max())
    s = raw_saliency(x, x_t, theta)

    return SaliencyRun(
        initial_image=x,
        final_image=x_t,
        label=label,
        baseline_logits=baseline,
        cost_trace=trace,
        raw_map=s,
        epsilon=eps,
        theta=theta,
        wall_time=time.perf_counter() - t_start,
    )


def terminal_penalty(net, run):
    """Sum of squared drift of the clamped logits at the end of a run."""
    a = net.forward(run.final_image)
    diff = a - run.baseline_logits
    return float(diff @ diff - diff[run.label] ** 2)
