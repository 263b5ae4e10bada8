"""A 2-10-10-2 tanh network that maps one letter trajectory onto another.

The network works point-wise: each ``(x, y)`` sample of an input letter is
pushed through two tanh hidden layers and a linear output layer.  Training
uses hand-written backpropagation and plain stochastic gradient descent with
one whole trajectory pair per step.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .trajectory import Trajectory, resample_by_arclength

log = logging.getLogger(__name__)

INPUT_DIM = 2
HIDDEN = 10
OUTPUT_DIM = 2
DEFAULT_COMMON_LENGTH = 64
DEFAULT_Z_RANGE = (-0.1, 0.1)

FORMAT_NAME = "glyphtrace.mlp"
FORMAT_VERSION = 1

# draw order for initialization, serialization and the flat parameter vector
PARAM_SHAPES = {
    "w1": (INPUT_DIM, HIDDEN),
    "b1": (HIDDEN,),
    "w2": (HIDDEN, HIDDEN),
    "b2": (HIDDEN,),
    "w3": (HIDDEN, OUTPUT_DIM),
    "b3": (OUTPUT_DIM,),
}
N_PARAMETERS = sum(int(np.prod(s)) for s in PARAM_SHAPES.values())


class TrainingDiverged(ArithmeticError):
    def __init__(self, iteration: int, cost: float):
        super().__init__(f"non-finite training cost {cost!r} at iteration {iteration}")
        self.iteration = iteration
        self.cost = cost


@dataclass(frozen=True)
class MlpModel:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    def __post_init__(self):
        for name, shape in PARAM_SHAPES.items():
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([getattr(self, n).ravel() for n in PARAM_SHAPES])

    @classmethod
    def from_vector(cls, vec) -> MlpModel:
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (N_PARAMETERS,):
            raise ValueError(f"expected {N_PARAMETERS} parameters, got {vec.shape}")
        parts, pos = {}, 0
        for name, shape in PARAM_SHAPES.items():
            size = int(np.prod(shape))
            parts[name] = vec[pos:pos + size].reshape(shape)
            pos += size
        return cls(**parts)

    @classmethod
    def zeros(cls) -> MlpModel:
        return cls(**{n: np.zeros(s) for n, s in PARAM_SHAPES.items()})

    def __eq__(self, other):
        if not isinstance(other, MlpModel):
            return NotImplemented
        return all(np.array_equal(getattr(self, n), getattr(other, n)) for n in PARAM_SHAPES)

    __hash__ = None


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.0001
    iterations: int = 10_000
    seed: int = 0
    log_every: int = 100


@dataclass(frozen=True)
class Pair:
    input: Trajectory
    output: Trajectory
    input_index: int
    output_index: int


@dataclass(frozen=True)
class PairDataset:
    pairs: tuple[Pair, ...]
    common_length: int

    def __len__(self) -> int:
        return len(self.pairs)

    def inputs(self) -> np.ndarray:
        return np.stack([p.input.points for p in self.pairs])

    def outputs(self) -> np.ndarray:
        return np.stack([p.output.points for p in self.pairs])

    def index_pairs(self) -> list[tuple[int, int]]:
        return [(p.input_index, p.output_index) for p in self.pairs]


@dataclass
class TrainReport:
    cost_trace: list[float] = field(default_factory=list)
    logged_iterations: list[int] = field(default_factory=list)
    final_cost: float = float("nan")


def build_pairs(letters: Sequence[Trajectory], m: int = DEFAULT_COMMON_LENGTH) -> PairDataset:
    """Every ordered pair of distinct letters, input index major.

    Letters are numbered from 1 in the given order and each one is resampled
    to ``m`` points so samples correspond index to index.
    """
    if len(letters) < 2:
        raise ValueError(f"need at least 2 letters to build pairs, got {len(letters)}")
    resampled = [resample_by_arclength(t, m) for t in letters]
    pairs = tuple(
        Pair(resampled[i], resampled[j], i + 1, j + 1)
        for i in range(len(resampled))
        for j in range(len(resampled))
        if i != j
    )
    return PairDataset(pairs, m)


def split_train_test(d: PairDataset, seed: int = 0) -> tuple[PairDataset, PairDataset]:
    """Hold out a single seed-chosen pair as the test set."""
    if len(d) < 2:
        raise ValueError("need at least 2 pairs to split")
    held = int(np.random.default_rng(seed).integers(len(d)))
    train = tuple(p for i, p in enumerate(d.pairs) if i != held)
    return PairDataset(train, d.common_length), PairDataset((d.pairs[held],), d.common_length)


def init_mlp(seed: int = 0, symmetric: bool = False) -> MlpModel:
    """Weights uniform on [0, 1], biases uniform on [0, 0.1].

    ``symmetric=True`` draws from [-1, 1] and [-0.1, 0.1] instead.
    """
    rng = np.random.default_rng(seed)
    parts = {}
    for name, shape in PARAM_SHAPES.items():
        hi = 1.0 if name.startswith("w") else 0.1
        lo = -hi if symmetric else 0.0
        parts[name] = rng.uniform(lo, hi, size=shape)
    return MlpModel(**parts)


def _forward_cache(model: MlpModel, X: np.ndarray):
    a1 = np.tanh(X @ model.w1 + model.b1)
    a2 = np.tanh(a1 @ model.w2 + model.b2)
    y = a2 @ model.w3 + model.b3
    return a1, a2, y


def forward(model: MlpModel, x) -> np.ndarray:
    """Evaluate the network on one point ``(2,)`` or a batch ``(n, 2)``."""
    return _forward_cache(model, np.asarray(x, dtype=float))[2]


def hidden_activations(model: MlpModel, x) -> tuple[np.ndarray, np.ndarray]:
    a1, a2, _ = _forward_cache(model, np.asarray(x, dtype=float))
    return a1, a2


def train_cost(predicted, actual) -> float:
    """Half the sum of squared coordinate differences."""
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape:
        raise ValueError(f"length mismatch: predicted {p.shape} vs actual {a.shape}")
    return float(np.sum((p - a) ** 2) / 2.0)


def cost_and_gradients(model: MlpModel, X, T) -> tuple[float, dict[str, np.ndarray]]:
    """Train cost of mapping ``X`` onto targets ``T`` and its exact gradient."""
    X = np.asarray(X, dtype=float)
    T = np.asarray(T, dtype=float)
    a1, a2, y = _forward_cache(model, X)
    dy = y - T
    cost = float(np.sum(dy ** 2) / 2.0)

    dz2 = (dy @ model.w3.T) * (1.0 - a2 ** 2)
    dz1 = (dz2 @ model.w2.T) * (1.0 - a1 ** 2)
    grads = {
        "w3": a2.T @ dy,
        "b3": dy.sum(axis=0),
        "w2": a1.T @ dz2,
        "b2": dz2.sum(axis=0),
        "w1": X.T @ dz1,
        "b1": dz1.sum(axis=0),
    }
    return cost, grads


def dataset_cost(model: MlpModel, d: PairDataset) -> float:
    """Train cost summed over every pair of ``d``."""
    X, T = d.inputs(), d.outputs()
    return train_cost(forward(model, X.reshape(-1, INPUT_DIM)), T.reshape(-1, OUTPUT_DIM))


def train(model: MlpModel, d: PairDataset, cfg: TrainConfig = TrainConfig(),
          ) -> tuple[MlpModel, TrainReport]:
    """Stochastic gradient descent, one uniformly drawn pair per iteration.

    The total cost over ``d`` is logged every ``cfg.log_every`` iterations
    and once more after the last step.
    """
    if not cfg.learning_rate >= 0:
        raise ValueError("learning rate must be non-negative")
    if len(d) == 0:
        raise ValueError("empty training set")
    report = TrainReport()
    # overflow is caught by the finiteness checks and reported as TrainingDiverged
    with np.errstate(over="ignore", invalid="ignore"):
        trained = _sgd(model, d, cfg, report)
        report.final_cost = dataset_cost(trained, d)
    if not np.isfinite(report.final_cost):
        raise TrainingDiverged(cfg.iterations, report.final_cost)
    report.cost_trace.append(report.final_cost)
    report.logged_iterations.append(cfg.iterations)
    return trained, report


def _sgd(model: MlpModel, d: PairDataset, cfg: TrainConfig, report: TrainReport) -> MlpModel:
    rng = np.random.default_rng(cfg.seed)
    X, T = d.inputs(), d.outputs()
    params = {n: getattr(model, n).copy() for n in PARAM_SHAPES}
    for it in range(cfg.iterations):
        if it % cfg.log_every == 0:
            total = dataset_cost(MlpModel(**params), d)
            if not np.isfinite(total):
                raise TrainingDiverged(it, total)
            report.cost_trace.append(total)
            report.logged_iterations.append(it)
            log.debug("iteration %d cost %.6g", it, total)
        i = rng.integers(len(X))
        cost, grads = cost_and_gradients(MlpModel(**params), X[i], T[i])
        if not np.isfinite(cost):
            raise TrainingDiverged(it, cost)
        for name, g in grads.items():
            params[name] -= cfg.learning_rate * g
    return MlpModel(**params)


def generate_letter(model: MlpModel, input_letter: Trajectory, m: int | None = None,
                    ) -> Trajectory:
    """Map every point of ``input_letter`` through the network.

    When ``m`` is given the input is first resampled to ``m`` points.  The
    result is tagged for dotted rendering.
    """
    src = resample_by_arclength(input_letter, m) if m is not None else input_letter
    out = forward(model, src.points[:, :2])
    return Trajectory(out, sample_rate_hz=src.sample_rate_hz, label="generated", dotted=True)


def extrude_z(t: Trajectory, seed: int = 0, z_range: tuple[float, float] = DEFAULT_Z_RANGE,
              ) -> Trajectory:
    """Give every 2D point an independent uniform random z in ``z_range``."""
    lo, hi = z_range
    if lo > hi:
        raise ValueError(f"empty z range: low {lo} > high {hi}")
    if t.dims != 2:
        raise ValueError("extrusion expects a 2D trajectory")
    z = np.random.default_rng(seed).uniform(lo, hi, size=len(t))
    return t.with_points(np.column_stack([t.points, z]))


def dump_mlp(model: MlpModel, **metadata) -> str:
    doc = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "metadata": metadata}
    doc.update({n: getattr(model, n).tolist() for n in PARAM_SHAPES})
    return json.dumps(doc, indent=2) + "\n"


def load_mlp(text: str) -> tuple[MlpModel, dict]:
    doc = json.loads(text)
    if doc.get("format") != FORMAT_NAME:
        raise ValueError(f"not a network model file (format={doc.get('format')!r})")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')!r}")
    return MlpModel(**{n: doc[n] for n in PARAM_SHAPES}), dict(doc.get("metadata", {}))


def dump_pairs(d: PairDataset) -> str:
    doc = {
        "format": "glyphtrace.pairs",
        "version": 1,
        "common_length": d.common_length,
        "pairs": [
            {
                "input_index": p.input_index,
                "output_index": p.output_index,
                "input": p.input.points.tolist(),
                "output": p.output.points.tolist(),
            }
            for p in d.pairs
        ],
    }
    return json.dumps(doc) + "\n"


def load_pairs(text: str) -> PairDataset:
    doc = json.loads(text)
    if doc.get("format") != "glyphtrace.pairs":
        raise ValueError("not a pair dataset file")
    pairs = tuple(
        Pair(Trajectory(p["input"]), Trajectory(p["output"]), p["input_index"], p["output_index"])
        for p in doc["pairs"]
    )
    return PairDataset(pairs, doc["common_length"])
