"""A small fully connected score network trained by denoising score matching.

The network ``f`` is unconditional; the score at noise level ``sigma`` is
``f(x) / sigma``. With ``x~ = x + sigma z`` the per-example objective
``0.5 * ||sigma * s(x~, sigma) + (x~ - x) / sigma||^2`` collapses to
``0.5 * ||f(x~) + z||^2``, which is what the loss and its gradient compute.
Each example draws its own scale index uniformly from the schedule.

Gradients are written out by hand (reverse mode over affine layers and an
elementwise activation); everything runs in float64.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import FormatError, InvalidInputError, TrainingDivergedError
from .schedule import NoiseSchedule

CHECKPOINT_MAGIC = b"SCNET\x00\x01\x00"
CHECKPOINT_VERSION = 1


def _silu(a):
    return a * expit(a)


def _silu_grad(a):
    s = expit(a)
    return s * (1.0 + a * (1.0 - s))


def _tanh_grad(a):
    return 1.0 - np.tanh(a) ** 2


ACTIVATIONS = {
    "silu": (_silu, _silu_grad),
    "tanh": (np.tanh, _tanh_grad),
}


class MlpScoreNet:
    """``D -> H -> ... -> H -> D`` with ``depth`` hidden layers; depth 0 is a single affine map.

    ``params`` is the flat list ``[W0, b0, W1, b1, ...]`` with ``W_k`` of
    shape (fan_in, fan_out). Calling :meth:`score` makes the net usable
    wherever the sampler expects a score field.
    """

    def __init__(self, params, activation: str = "silu"):
        if activation not in ACTIVATIONS:
            raise InvalidInputError(f"unknown activation {activation!r}; choose from {sorted(ACTIVATIONS)}")
        params = [np.array(p, dtype=np.float64) for p in params]
        if len(params) < 2 or len(params) % 2:
            raise InvalidInputError("params must alternate weight, bias and hold at least one layer")
        for k in range(0, len(params), 2):
            W, b = params[k], params[k + 1]
            if W.ndim != 2 or b.shape != (W.shape[1],):
                raise InvalidInputError(f"layer {k // 2}: weight {W.shape} and bias {b.shape} disagree")
            if k and W.shape[0] != params[k - 2].shape[1]:
                raise InvalidInputError(f"layer {k // 2} input width {W.shape[0]} != previous output {params[k - 2].shape[1]}")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise InvalidInputError(f"layer {k // 2} has non-finite parameters")
        if params[0].shape[0] != params[-2].shape[1]:
            raise InvalidInputError("input and output widths must both equal D")
        self.params = params
        self.activation = activation

    @classmethod
    def init(cls, D: int, H: int = 128, depth: int = 2, activation: str = "silu", seed: int = 0) -> "MlpScoreNet":
        """Gaussian weights with variance 1/fan_in, zero biases."""
        if D < 1 or H < 1 or depth < 0:
            raise InvalidInputError(f"need D >= 1, H >= 1, depth >= 0; got {D}, {H}, {depth}")
        rng = np.random.default_rng(seed)
        widths = [D] + [H] * depth + [D]
        params = []
        for a, b in zip(widths[:-1], widths[1:]):
            params += [rng.standard_normal((a, b)) / math.sqrt(a), np.zeros(b)]
        return cls(params, activation)

    @property
    def D(self) -> int:
        return self.params[0].shape[0]

    @property
    def dims(self) -> int:
        return self.D

    @property
    def H(self) -> int:
        return self.params[0].shape[1] if self.depth else self.D

    @property
    def depth(self) -> int:
        return len(self.params) // 2 - 1

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def copy(self) -> "MlpScoreNet":
        return MlpScoreNet([p.copy() for p in self.params], self.activation)

    def with_params(self, params) -> "MlpScoreNet":
        return MlpScoreNet(params, self.activation)

    def forward(self, x):
        return unconditional_forward(self, x)

    def score(self, x, sigma):
        return score_forward(self, x, sigma)


def _forward_cache(net: MlpScoreNet, x):
    act = ACTIVATIONS[net.activation][0]
    h = x
    pre = []
    hs = [x]
    n_layers = len(net.params) // 2
    for k in range(n_layers):
        a = h @ net.params[2 * k] + net.params[2 * k + 1]
        if k < n_layers - 1:
            pre.append(a)
            h = act(a)
            hs.append(h)
        else:
            h = a
    return h, pre, hs


def unconditional_forward(net: MlpScoreNet, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.D:
        raise InvalidInputError(f"input width {x.shape[-1]} != net dimension {net.D}")
    single = x.ndim == 1
    out, _, _ = _forward_cache(net, np.atleast_2d(x))
    return out[0] if single else out


def score_forward(net: MlpScoreNet, x, sigma):
    """``f(x) / sigma``."""
    if not sigma > 0:
        raise InvalidInputError(f"sigma must be positive, got {sigma}")
    return unconditional_forward(net, x) / sigma


@dataclass(frozen=True)
class Perturbation:
    """Per-example scale indices (0-based) and standard normal noise."""

    scale_index: np.ndarray
    z: np.ndarray


def draw_perturbation(batch, schedule: NoiseSchedule, rng) -> Perturbation:
    """One uniform scale index and one ``N(0, I)`` vector per example, in that order."""
    rng = np.random.default_rng(rng)
    M, D = np.shape(batch)
    idx = rng.integers(0, schedule.L, size=M)
    z = rng.standard_normal((M, D))
    return Perturbation(idx, z)


def _prepare(net, batch, schedule, rng, perturbation):
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if batch.shape[0] == 0:
        raise InvalidInputError("batch must be nonempty")
    if batch.shape[1] != net.D:
        raise InvalidInputError(f"batch width {batch.shape[1]} != net dimension {net.D}")
    p = perturbation if perturbation is not None else draw_perturbation(batch, schedule, rng)
    sig = schedule.sigmas[p.scale_index][:, None]
    return batch + sig * p.z, p


def dsm_loss(net: MlpScoreNet, batch, schedule: NoiseSchedule, rng=None, *, perturbation=None) -> float:
    """Batch mean of ``0.5 * ||sigma_i s(x~, sigma_i) + (x~ - x) / sigma_i||^2``."""
    xt, p = _prepare(net, batch, schedule, rng, perturbation)
    r = unconditional_forward(net, xt) + p.z
    return 0.5 * float(np.mean(np.sum(r * r, axis=1)))


def dsm_grad(net: MlpScoreNet, batch, schedule: NoiseSchedule, rng=None, *, perturbation=None, return_loss=False):
    """Exact gradient of :func:`dsm_loss` for the same draws, as a list matching ``net.params``."""
    xt, p = _prepare(net, batch, schedule, rng, perturbation)
    out, pre, hs = _forward_cache(net, xt)
    r = out + p.z
    M = xt.shape[0]
    dact = ACTIVATIONS[net.activation][1]
    grads = [None] * len(net.params)
    delta = r / M
    n_layers = len(net.params) // 2
    for k in reversed(range(n_layers)):
        grads[2 * k] = hs[k].T @ delta
        grads[2 * k + 1] = delta.sum(axis=0)
        if k:
            delta = (delta @ net.params[2 * k].T) * dact(pre[k - 1])
    if return_loss:
        return grads, 0.5 * float(np.mean(np.sum(r * r, axis=1)))
    return grads


def adam_step(params, grads, moments, step_count, lr=1e-4, beta1=0.9, beta2=0.999, eps_adam=1e-8):
    """Bias-corrected Adam. ``moments`` is ``(m, v)``; ``step_count`` is the 1-based index of this step.

    Returns ``(new_params, (new_m, new_v))`` without mutating the inputs.
    """
    m_old, v_old = moments
    if not (len(params) == len(grads) == len(m_old) == len(v_old)):
        raise InvalidInputError("params, grads and moments must have equal length")
    if step_count < 1:
        raise InvalidInputError(f"step_count is 1-based, got {step_count}")
    c1 = 1.0 - beta1**step_count
    c2 = 1.0 - beta2**step_count
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, m_old, v_old):
        if p.shape != g.shape or p.shape != m.shape or p.shape != v.shape:
            raise InvalidInputError(f"shape mismatch {p.shape} / {g.shape}")
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        new_p.append(p - lr * (m / c1) / (np.sqrt(v / c2) + eps_adam))
        new_m.append(m)
        new_v.append(v)
    return new_p, (new_m, new_v)


@dataclass
class EmaState:
    params: list
    momentum: float = 0.999

    def __post_init__(self):
        if not 0.0 <= self.momentum <= 1.0:
            raise InvalidInputError(f"momentum must lie in [0, 1], got {self.momentum}")

    @classmethod
    def track(cls, net: MlpScoreNet, momentum: float = 0.999) -> "EmaState":
        return cls([p.copy() for p in net.params], momentum)

    def as_net(self, activation: str = "silu") -> MlpScoreNet:
        return MlpScoreNet([p.copy() for p in self.params], activation)


def ema_update(ema: EmaState, net: MlpScoreNet) -> EmaState:
    """``theta' <- m theta' + (1 - m) theta``."""
    if len(ema.params) != len(net.params) or any(a.shape != b.shape for a, b in zip(ema.params, net.params)):
        raise InvalidInputError("EMA shadow parameters do not match the network")
    m = ema.momentum
    if m == 0.0:
        new = [p.copy() for p in net.params]
    elif m == 1.0:
        new = [p.copy() for p in ema.params]
    else:
        new = [m * e + (1.0 - m) * p for e, p in zip(ema.params, net.params)]
    return EmaState(new, m)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    batch_size: int = 128
    ema_momentum: float = 0.999

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class TrainResult:
    net: MlpScoreNet
    ema: EmaState
    losses: np.ndarray
    iterations: int
    seed: int
    config: TrainConfig = field(default_factory=TrainConfig)


def train(net: MlpScoreNet, data, schedule: NoiseSchedule, config: TrainConfig = TrainConfig(), iterations: int = 1000, seed: int = 0, log_every: int = 0, log=None) -> TrainResult:
    """Minibatch Adam on the DSM objective with an EMA update after every step.

    Minibatches are drawn with replacement. The generator is seeded once
    from ``seed`` and drives, per iteration, the minibatch indices and then
    the perturbation, so the whole run is a function of ``seed``.
    """
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if data.shape[1] != net.D:
        raise InvalidInputError(f"data has dimension {data.shape[1]} but the net expects {net.D}")
    if schedule.D != net.D:
        raise InvalidInputError(f"schedule is for D={schedule.D} but the net expects {net.D}")
    if iterations < 0:
        raise InvalidInputError(f"iterations must be >= 0, got {iterations}")
    rng = np.random.default_rng(seed)
    net = net.copy()
    ema = EmaState.track(net, config.ema_momentum)
    moments = ([np.zeros_like(p) for p in net.params], [np.zeros_like(p) for p in net.params])
    losses = np.empty(iterations)
    for it in range(iterations):
        batch = data[rng.integers(0, data.shape[0], size=config.batch_size)]
        with np.errstate(over="ignore", invalid="ignore"):
            grads, loss = dsm_grad(net, batch, schedule, rng, return_loss=True)
        if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
            raise TrainingDivergedError(f"non-finite loss or gradient at iteration {it + 1}", iteration=it + 1)
        losses[it] = loss
        with np.errstate(over="ignore", invalid="ignore"):
            params, moments = adam_step(net.params, grads, moments, it + 1, config.lr, config.beta1, config.beta2, config.eps_adam)
        if not all(np.all(np.isfinite(p)) for p in params):
            raise TrainingDivergedError(f"non-finite parameters after the update at iteration {it + 1}", iteration=it + 1)
        net.params = params
        ema = ema_update(ema, net)
        if log is not None and log_every and (it + 1) % log_every == 0:
            log(it + 1, float(np.mean(losses[max(0, it + 1 - log_every):it + 1])))
    return TrainResult(net, ema, losses, iterations, seed, config)


def save_checkpoint(path, net: MlpScoreNet, ema: EmaState | None = None, iteration: int = 0, seed: int = 0, **extra) -> Path:
    """Magic bytes, a u64 header length, a JSON header, then raw and EMA parameters as ``<f8``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ema = ema or EmaState.track(net, 1.0)
    header = {
        "version": CHECKPOINT_VERSION,
        "dims": {"D": net.D, "H": net.H, "depth": net.depth},
        "shapes": [list(p.shape) for p in net.params],
        "activation": net.activation,
        "iteration": int(iteration),
        "seed": int(seed),
        "ema_momentum": ema.momentum,
        **extra,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with path.open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for p in list(net.params) + list(ema.params):
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())
    return path


def load_checkpoint(path) -> tuple[MlpScoreNet, EmaState, dict]:
    path = Path(path)
    if not path.exists():
        raise FormatError(f"missing checkpoint {path}")
    raw = path.read_bytes()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not a score-net checkpoint")
    try:
        (n,) = struct.unpack("<Q", raw[8:16])
        header = json.loads(raw[16:16 + n])
    except (struct.error, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt header ({exc})") from exc
    if header.get("version") != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {header.get('version')!r}")
    shapes = [tuple(s) for s in header["shapes"]]
    sizes = [int(np.prod(s)) for s in shapes]
    body = raw[16 + n:]
    if len(body) != 16 * sum(sizes):
        raise FormatError(f"{path}: body has {len(body)} bytes, expected {16 * sum(sizes)}")
    flat = np.frombuffer(body, dtype="<f8").astype(np.float64)
    arrays, off = [], 0
    for s, k in list(zip(shapes, sizes)) * 2:
        arrays.append(flat[off:off + k].reshape(s).copy())
        off += k
    half = len(shapes)
    net = MlpScoreNet(arrays[:half], header["activation"])
    ema = EmaState(arrays[half:], header["ema_momentum"])
    return net, ema, header
