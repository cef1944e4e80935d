"""Evaluation suite: accuracy, latency, sparsity, energy cost, noise sweep.

Energy cost is the compute count of the spiking network relative to an
iso-architecture non-spiking network:

    E = sum_{i=2..L} S_{i-1} * T * OP_i / sum_{j=2..L} OP_j

with S the mean spiking rate of the layer feeding layer i, T the timesteps
used at inference, and OP the multiply-accumulate count of layer i.  With
direct (analog) input encoding the input layer has no binary spikes; its mean
activation value stands in for S_1.  For first-to-spike models each sample is
simulated only up to its own first output spike, so S * T collapses to
spikes-per-neuron actually emitted, averaged over samples.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .checkpoint import Checkpoint
from .data import Dataset
from .errors import ParameterError
from .inference import run_network
from .network import LayerSpec, NetworkSpec


@dataclass
class MetricsReport:
    accuracy: float
    mean_latency: float
    layer_rates: list            # [input activation rate, then per neuron layer]
    energy_cost: float
    n_samples: int
    mode: str = "first-to-spike"
    horizon: int = 0


def layer_ops(layer: LayerSpec, out_h: int = 0, out_w: int = 0) -> int:
    """Multiply-accumulate count of one layer of the iso-architecture ANN.

    Conv: C_I * K_H * K_W * C_O * O_H * O_W (pass the output spatial dims);
    linear: I_F * O_F; anything else contributes 0.
    """
    if layer.kind == "linear":
        return layer.in_features * layer.out_features
    if layer.kind == "conv":
        if out_h <= 0 or out_w <= 0:
            raise ParameterError("conv layer_ops needs positive output dims")
        return (layer.in_channels * layer.kernel * layer.kernel
                * layer.out_channels * out_h * out_w)
    warnings.warn(f"layer kind {layer.kind!r} contributes no synaptic ops")
    return 0


def _conv_out(size, kernel, stride, pad):
    return (size + 2 * pad - kernel) // stride + 1


def network_op_counts(spec: NetworkSpec, input_hw: tuple | None = None) -> list:
    """OP_i for every weighted layer, tracking spatial dims through the stack."""
    h, w = input_hw if input_hw is not None else (28, 28)
    ops = []
    for layer in spec.layers:
        if layer.kind == "pool":
            h, w = h // layer.window, w // layer.window
        elif layer.kind == "conv":
            h = _conv_out(h, layer.kernel, layer.stride, layer.pad)
            w = _conv_out(w, layer.kernel, layer.stride, layer.pad)
            ops.append(layer_ops(layer, h, w))
        elif layer.kind == "linear":
            ops.append(layer_ops(layer))
    return ops


def energy_cost(layer_rates, horizon: float, layer_op_counts) -> float:
    """E = sum_i S_{i-1} * T * OP_i / sum_j OP_j (rates indexed from the input)."""
    rates = np.asarray(layer_rates, dtype=np.float64)
    ops = np.asarray(layer_op_counts, dtype=np.float64)
    if len(rates) != len(ops):
        raise ParameterError(f"need one feeding rate per weighted layer: "
                             f"{len(rates)} rates vs {len(ops)} op counts")
    total = ops.sum()
    if total == 0:
        raise ParameterError("all layer op counts are zero")
    return float((rates * horizon * (ops / total)).sum())


def evaluate(ckpt: Checkpoint, dataset: Dataset, mode: str = "first-to-spike",
             horizon: int | None = None, batch_size: int = 512,
             seed: int | None = None) -> MetricsReport:
    """Run the test protocol and assemble the tradeoff report.

    First-to-spike mode early-exits per sample; rate mode runs a fixed
    horizon (pass ``horizon`` to override the spec's).  Stochastic draws are
    keyed by ``seed`` (defaults to the checkpoint's training seed).
    """
    if len(dataset) == 0:
        raise ParameterError("empty dataset")
    spec = ckpt.spec
    seed = ckpt.seed if seed is None else seed
    res = run_network(spec, ckpt.params, dataset.images, mode=mode,
                      horizon=horizon, seed=seed, batch_size=batch_size)
    accuracy = float((res.predictions == dataset.labels).mean())
    mean_latency = float(res.latencies.mean())
    total_steps = res.steps.sum()

    # Aggregate binary rates: input activation rate first, then each neuron
    # layer's spikes / (neurons * steps simulated).
    rates = [float(res.synaptic_input_sums[0].sum()
                   / (res.synaptic_input_sizes[0] * total_steps))]
    for sums, size in zip(res.layer_spike_sums, res.layer_sizes):
        rates.append(float(sums.sum() / (size * total_steps)))

    hw = dataset.images.shape[-2:]
    ops = np.asarray(network_op_counts(spec, hw), dtype=np.float64)
    weights = ops / ops.sum()
    # Per-sample energy: spikes-per-neuron feeding each weighted layer,
    # weighted by that layer's share of ANN compute.
    e = np.zeros(len(dataset))
    for w_i, sums, size in zip(weights, res.synaptic_input_sums, res.synaptic_input_sizes):
        e += w_i * sums / size
    return MetricsReport(accuracy=accuracy, mean_latency=mean_latency,
                         layer_rates=rates, energy_cost=float(e.mean()),
                         n_samples=len(dataset), mode=mode,
                         horizon=int(horizon or spec.horizon))


def noise_sweep(ckpt: Checkpoint, dataset: Dataset, variances,
                mode: str | None = None, horizon: int | None = None,
                seed: int = 1234, batch_size: int = 512) -> list:
    """Accuracy under additive elementwise Gaussian input noise.

    Noise with the given variances is added to the normalized input drive,
    redrawn at every timestep (no clipping, so the effective noise power is
    exactly as configured); variance 0 reuses the clean inputs bit-for-bit.
    Per-step redrawing is what lets rate-coded models average perturbations
    out over their horizon while first-to-spike models, which commit at the
    first output spike, cannot.  Returns a list of (variance, accuracy)
    pairs.
    """
    variances = [float(v) for v in variances]
    for v in variances:
        if v < 0:
            raise ParameterError(f"variance must be >= 0, got {v}")
    if mode is None:
        mode = "rate" if ckpt.spec.coding == "rate" else "first-to-spike"
    rows = []
    for vi, var in enumerate(variances):
        res = run_network(ckpt.spec, ckpt.params, dataset.images, mode=mode,
                          horizon=horizon, seed=ckpt.seed, batch_size=batch_size,
                          input_noise_std=np.sqrt(var),
                          noise_seed=seed + vi)
        rows.append((var, float((res.predictions == dataset.labels).mean())))
    return rows


def write_metrics_csv(report: MetricsReport, path, label: str = "model") -> None:
    with open(path, "w") as f:
        f.write("model,mode,accuracy,mean_latency,energy_cost,n_samples\n")
        f.write(f"{label},{report.mode},{report.accuracy:.6f},"
                f"{report.mean_latency:.6f},{report.energy_cost:.6f},{report.n_samples}\n")


def write_rates_csv(report: MetricsReport, path) -> None:
    with open(path, "w") as f:
        f.write("layer_index,rate\n")
        for i, r in enumerate(report.layer_rates):
            f.write(f"{i},{r:.8f}\n")


def write_noise_csv(rows, path) -> None:
    with open(path, "w") as f:
        f.write("variance,accuracy\n")
        for var, acc in rows:
            f.write(f"{var:.6g},{acc:.6f}\n")
