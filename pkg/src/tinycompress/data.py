"""Tennessee Eastman style data: fault catalog, CSV ingestion, surrogate generator, binary tasks.

CSV schema: a header row with ``meas_1 .. meas_52`` and ``faultNumber`` (53
columns, any order), then one sample per row.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linalg import DTYPE, make_rng

log = logging.getLogger(__name__)

N_MEASUREMENTS = 52
FEATURE_NAMES = tuple(f"meas_{i}" for i in range(1, N_MEASUREMENTS + 1))
LABEL_COLUMN = "faultNumber"


@dataclass(frozen=True)
class FaultInfo:
    number: int
    description: str
    type: str  # Normal, Step, RandomVariation, SlowDrift, Sticking or Unknown


FAULT_CATALOG = {
    f.number: f
    for f in [
        FaultInfo(0, "Normal operation", "Normal"),
        FaultInfo(1, "A/C feed ratio, B composition constant (stream 4)", "Step"),
        FaultInfo(2, "B composition, A/C ratio constant (stream 4)", "Step"),
        FaultInfo(3, "D feed temperature (stream 2)", "Step"),
        FaultInfo(4, "Reactor cooling water inlet temperature", "Step"),
        FaultInfo(5, "Condenser cooling water inlet temperature", "Step"),
        FaultInfo(6, "A feed loss (stream 1)", "Step"),
        FaultInfo(7, "C header pressure loss - reduced availability (stream 4)", "Step"),
        FaultInfo(8, "A, B, C feed composition (stream 4)", "RandomVariation"),
        FaultInfo(9, "D feed temperature (stream 2)", "RandomVariation"),
        FaultInfo(10, "C feed temperature (stream 4)", "RandomVariation"),
        FaultInfo(11, "Reactor cooling water inlet temperature", "RandomVariation"),
        FaultInfo(12, "Condenser cooling water inlet temperature", "RandomVariation"),
        FaultInfo(13, "Reaction kinetics", "SlowDrift"),
        FaultInfo(14, "Reactor cooling water valve", "Sticking"),
        FaultInfo(15, "Condenser cooling water valve", "Sticking"),
        *[FaultInfo(n, "Unknown", "Unknown") for n in range(16, 21)],
    ]
}
# no observable change in mean or variance for these, so they are conventionally left out
EXCLUDED_FAULTS = frozenset({3, 9, 15})
INCLUDED_FAULTS = tuple(n for n in FAULT_CATALOG if n not in EXCLUDED_FAULTS)


class ParseError(ValueError):
    pass


class TaskError(ValueError):
    pass


@dataclass
class Dataset:
    features: np.ndarray  # (n_samples, 52) float32
    fault_labels: np.ndarray  # (n_samples,) int
    dropped: int = 0

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=DTYPE)
        self.fault_labels = np.asarray(self.fault_labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[1] != N_MEASUREMENTS:
            raise ValueError(f"expected {N_MEASUREMENTS} features, got shape {self.features.shape}")
        if len(self.fault_labels) != len(self.features):
            raise ValueError("one fault label per sample required")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain NaN or Inf")

    def __len__(self):
        return len(self.fault_labels)

    def counts(self) -> dict[int, int]:
        faults, n = np.unique(self.fault_labels, return_counts=True)
        return dict(zip(faults.tolist(), n.tolist()))


def load_csv(path, drop_excluded: bool = True) -> Dataset:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        expected = set(FEATURE_NAMES) | {LABEL_COLUMN}
        missing = [c for c in (*FEATURE_NAMES, LABEL_COLUMN) if c not in header]
        if missing:
            raise ParseError(f"{path}: missing column(s) {', '.join(missing)}")
        extra = [c for c in header if c not in expected]
        if extra or len(header) != len(expected):
            raise ParseError(f"{path}: unexpected column(s) {', '.join(extra) or 'duplicates'}")
        order = [header.index(name) for name in FEATURE_NAMES]
        label_col = header.index(LABEL_COLUMN)

        feats, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                values = [float(row[j]) for j in order]
            except ValueError:
                j = next(j for j in order if not _is_float(row[j]))
                raise ParseError(f"{path}:{lineno}: column {header[j]!r}: non-numeric value {row[j]!r}") from None
            bad = [header[j] for j, v in zip(order, values) if not np.isfinite(v)]
            if bad:
                raise ParseError(f"{path}:{lineno}: column {bad[0]!r}: non-finite value")
            try:
                fault = int(float(row[label_col]))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: column {LABEL_COLUMN!r}: non-numeric value "
                                 f"{row[label_col]!r}") from None
            if fault not in FAULT_CATALOG or float(row[label_col]) != fault:
                raise ParseError(f"{path}:{lineno}: column {LABEL_COLUMN!r}: unknown fault {row[label_col]!r}")
            feats.append(values)
            labels.append(fault)

    labels = np.array(labels, dtype=np.int64)
    features = np.array(feats, dtype=DTYPE).reshape(-1, N_MEASUREMENTS)
    dropped = 0
    if drop_excluded:
        keep = ~np.isin(labels, list(EXCLUDED_FAULTS))
        dropped = int(np.sum(~keep))
        if dropped:
            log.info("dropped %d rows of excluded faults %s", dropped, sorted(EXCLUDED_FAULTS))
        features, labels = features[keep], labels[keep]
    return Dataset(features, labels, dropped)


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def write_csv(ds: Dataset, path) -> None:
    """Write ``ds`` in the loader's schema; float32 values survive the round trip exactly."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*FEATURE_NAMES, LABEL_COLUMN])
        for row, fault in zip(ds.features, ds.fault_labels):
            w.writerow([f"{v:.9g}" for v in row.tolist()] + [int(fault)])


# -- surrogate generator --------------------------------------------------------------------

STEP_SHIFT = {1: 2.5, 2: 2.5, 4: 2.0, 5: 2.0, 6: 5.0, 7: 3.0}  # in base standard deviations


@dataclass
class FaultSignature:
    fault: int
    type: str
    features: np.ndarray
    shift: np.ndarray = field(default_factory=lambda: np.zeros(0))
    inflation: float = 1.0
    extra_features: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


@dataclass
class SurrogateProcess:
    """Correlated Gaussian base process plus deterministic per-fault signatures."""

    seed: int
    mean: np.ndarray
    mixing: np.ndarray
    signatures: dict[int, FaultSignature]

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.sum(self.mixing ** 2, axis=1))

    @classmethod
    def from_seed(cls, seed: int) -> "SurrogateProcess":
        rng = make_rng(np.random.SeedSequence([seed, 0xBA5E]))
        scales = rng.uniform(0.5, 2.0, N_MEASUREMENTS)
        mixing = np.eye(N_MEASUREMENTS) + 0.25 * rng.standard_normal((N_MEASUREMENTS,) * 2) / np.sqrt(N_MEASUREMENTS)
        mixing *= scales[:, None]
        mean = rng.normal(0.0, 5.0, N_MEASUREMENTS)
        proc = cls(seed, mean, mixing, {})
        proc.signatures = {f: proc._signature(f) for f in FAULT_CATALOG if f != 0}
        return proc

    def _signature(self, fault: int) -> FaultSignature:
        rng = make_rng(np.random.SeedSequence([self.seed, fault]))
        kind = FAULT_CATALOG[fault].type
        feats = np.sort(rng.choice(N_MEASUREMENTS, size=int(rng.integers(4, 8)), replace=False))
        sign = rng.choice([-1.0, 1.0], size=len(feats))
        sd = self.std[feats]
        if kind == "Step":
            return FaultSignature(fault, kind, feats, shift=sign * STEP_SHIFT.get(fault, 2.5) * sd)
        if kind == "RandomVariation":
            # random variation spreads through the plant: inflate a wider subset
            others = np.setdiff1d(np.arange(N_MEASUREMENTS), feats)
            wide = np.sort(np.concatenate([feats, rng.choice(others, size=6, replace=False)]))
            return FaultSignature(fault, kind, wide, inflation=4.0)
        if kind == "SlowDrift":
            return FaultSignature(fault, kind, feats, shift=sign * 5.0 * sd)
        if kind == "Sticking":
            # valve stuck high: measurements pinned two standard deviations out
            return FaultSignature(fault, kind, feats, shift=self.mean[feats] + sign * 2.0 * sd)
        others = np.setdiff1d(np.arange(N_MEASUREMENTS), feats)
        extra = np.sort(rng.choice(others, size=3, replace=False))
        return FaultSignature(fault, kind, feats, shift=sign * 2.0 * sd, inflation=4.0, extra_features=extra)

    def sample(self, fault: int, n: int, rng: np.random.Generator) -> np.ndarray:
        dev = rng.standard_normal((n, N_MEASUREMENTS)) @ self.mixing.T
        if fault == 0:
            return self.mean + dev
        sig = self.signatures[fault]
        x = self.mean + dev
        f = sig.features
        if sig.type == "Step":
            x[:, f] += sig.shift
        elif sig.type == "RandomVariation":
            x[:, f] = self.mean[f] + sig.inflation * dev[:, f]
        elif sig.type == "SlowDrift":
            # drift starts at 30% of its final size so early samples are not pure noise
            ramp = np.linspace(0.3, 1.0, n)[:, None] if n > 1 else np.ones((1, 1))
            x[:, f] += ramp * sig.shift
        elif sig.type == "Sticking":
            x[:, f] = sig.shift
        else:
            x[:, f] += sig.shift
            e = sig.extra_features
            x[:, e] = self.mean[e] + sig.inflation * dev[:, e]
        return x


def synth_te(seed: int = 0, samples_per_fault: int = 200, faults=INCLUDED_FAULTS) -> Dataset:
    """Seeded stand-in for TE data: ``samples_per_fault`` rows for each fault in ``faults``.

    Fault 0 is the base process; each other fault imprints its type's signature
    (step shift, variance inflation, linear drift, clamped features, or a mix for
    the unknown faults) on a fault-specific subset of features.
    """
    if samples_per_fault < 1:
        raise ValueError("samples_per_fault must be at least 1")
    proc = SurrogateProcess.from_seed(seed)
    feats, labels = [], []
    for f in faults:
        if f not in FAULT_CATALOG:
            raise ValueError(f"unknown fault {f}")
        rng = make_rng(np.random.SeedSequence([seed, f, 0x5A3F]))
        feats.append(proc.sample(f, samples_per_fault, rng))
        labels.append(np.full(samples_per_fault, f))
    return Dataset(np.concatenate(feats).astype(DTYPE), np.concatenate(labels))


# -- one-vs-rest tasks ------------------------------------------------------------------------


@dataclass
class BinaryTask:
    """Fault-present (label 1) versus negatives (label 0), split and z-scored on the train part."""

    target_fault: int
    negatives: str
    train_idx: np.ndarray
    test_idx: np.ndarray
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    mean: np.ndarray
    std: np.ndarray

    @property
    def train(self):
        return self.x_train, self.y_train

    @property
    def test(self):
        return self.x_test, self.y_test


def make_binary_task(ds: Dataset, fault: int, split_seed=0, test_fraction: float = 0.25,
                     negatives: str = "normal") -> BinaryTask:
    """Stratified split for one detector.

    ``negatives="normal"`` uses fault-0 rows as the negative class; ``"rest"``
    uses every other retained fault. The fault-0 detector always uses ``"rest"``
    since normal-versus-normal is not a task.
    """
    if fault in EXCLUDED_FAULTS:
        raise TaskError(f"fault {fault} is excluded from detection")
    if negatives not in ("normal", "rest"):
        raise ValueError("negatives must be 'normal' or 'rest'")
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    if fault == 0:
        negatives = "rest"
    labels = ds.fault_labels
    retained = ~np.isin(labels, list(EXCLUDED_FAULTS))
    pos = np.flatnonzero(labels == fault)
    neg = np.flatnonzero((labels == 0) if negatives == "normal" else (retained & (labels != fault)))
    if len(pos) < 2 or len(neg) < 2:
        raise TaskError(f"fault {fault}: need at least two positive and two negative samples")

    rng = make_rng(split_seed)
    train, test = [], []
    for idx in (neg, pos):
        perm = idx[rng.permutation(len(idx))]
        n_test = min(max(int(round(test_fraction * len(idx))), 1), len(idx) - 1)
        test.append(perm[:n_test])
        train.append(perm[n_test:])
    train_idx, test_idx = np.sort(np.concatenate(train)), np.sort(np.concatenate(test))

    x = ds.features.astype(np.float64)
    mean = x[train_idx].mean(axis=0)
    std = x[train_idx].std(axis=0)
    std[std == 0] = 1.0
    y = (labels == fault).astype(np.int64)
    return BinaryTask(
        fault, negatives, train_idx, test_idx,
        ((x[train_idx] - mean) / std).astype(DTYPE), y[train_idx],
        ((x[test_idx] - mean) / std).astype(DTYPE), y[test_idx],
        mean, std,
    )
