"""Datasets, weak-label matrices, task configuration, and LF statistics.

All ingestion and validation lives here.  Arrays are 64-bit (float64 for
features, int64 for labels) and frozen read-only after construction so
bundles can be shared across workers without copies.

File formats
------------
* Features: CSV with ``d`` numeric columns (optional header), or a raw
  little-endian binary with a 16-byte header ``"WSFM" | u32 n | u32 d |
  u32 reserved`` followed by ``n * d`` float64 values.
* Weak labels: integer CSV, ``n`` rows x ``m`` columns, ``-1`` = abstain;
  an optional header row holds LF names.
* Labels: CSV with a single integer column.
* Bundle manifest: JSON object with keys ``train``, ``weak_labels``,
  ``valid_features``, ``valid_labels``, ``valid_weak_labels``,
  ``test_features?``, ``test_labels?``, ``num_classes`` (paths relative to
  the manifest file).
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ABSTAIN = -1

WSFM_MAGIC = b"WSFM"
_WSFM_HEADER = struct.Struct("<4sIII")

VALID_METRICS = ("euclidean", "manhattan", "cosine")
VALID_WEIGHTINGS = ("uniform", "inverse-distance")


class BundleValidationError(ValueError):
    """Raised when input data violates a bundle invariant.

    Messages carry (row, column) coordinates where applicable so users can
    locate the offending entry in their files.
    """


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TaskSpec:
    """Classification task: ``num_classes`` dense labels 0..C-1, abstain = -1."""

    num_classes: int
    abstain_token: int = ABSTAIN

    def __post_init__(self) -> None:
        if self.num_classes < 2:
            raise BundleValidationError(f"num_classes must be >= 2, got {self.num_classes}")
        if 0 <= self.abstain_token < self.num_classes:
            raise BundleValidationError(
                f"abstain_token {self.abstain_token} collides with class labels 0..{self.num_classes - 1}"
            )


@dataclass(frozen=True)
class LabeledSet:
    """Feature matrix paired with ground-truth labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", _freeze(np.asarray(self.features, dtype=np.float64)))
        object.__setattr__(self, "labels", _freeze(np.asarray(self.labels, dtype=np.int64)))
        if self.features.ndim != 2:
            raise BundleValidationError("features must be a 2-D matrix")
        if self.labels.ndim != 1 or len(self.labels) != len(self.features):
            raise BundleValidationError(
                f"label count {len(self.labels)} != feature row count {len(self.features)}"
            )

    def __len__(self) -> int:
        return len(self.features)


@dataclass(frozen=True)
class WeakLabelMatrix:
    """n x m integer matrix of LF outputs; -1 marks abstention."""

    entries: np.ndarray
    lf_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        entries = _freeze(np.asarray(self.entries, dtype=np.int64))
        object.__setattr__(self, "entries", entries)
        if entries.ndim != 2 or entries.shape[1] < 1:
            raise BundleValidationError("weak labels must be a 2-D matrix with at least one column")
        names = tuple(self.lf_names) if self.lf_names else tuple(f"lf_{j}" for j in range(entries.shape[1]))
        if len(names) != entries.shape[1]:
            raise BundleValidationError(
                f"lf_names has {len(names)} entries for {entries.shape[1]} columns"
            )
        object.__setattr__(self, "lf_names", names)

    @property
    def num_rows(self) -> int:
        return self.entries.shape[0]

    @property
    def num_lfs(self) -> int:
        return self.entries.shape[1]

    def active_mask(self) -> np.ndarray:
        return self.entries != ABSTAIN


@dataclass(frozen=True)
class LFSummary:
    """Per-LF statistics; ``accuracy`` is NaN for LFs that never label a validation row."""

    accuracy: np.ndarray
    coverage: np.ndarray
    overlap: np.ndarray
    conflict: np.ndarray
    activation_count: np.ndarray


@dataclass(frozen=True)
class ProxyConfig:
    """Proxy KNN configuration: neighbor count, distance metric, neighbor weighting."""

    k: int = 10
    metric: str = "euclidean"
    weighting: str = "uniform"

    def __post_init__(self) -> None:
        if self.k < 1:
            raise BundleValidationError(f"k must be >= 1, got {self.k}")
        if self.metric not in VALID_METRICS:
            raise BundleValidationError(f"metric must be one of {VALID_METRICS}, got {self.metric!r}")
        if self.weighting not in VALID_WEIGHTINGS:
            raise BundleValidationError(
                f"weighting must be one of {VALID_WEIGHTINGS}, got {self.weighting!r}"
            )


@dataclass(frozen=True)
class SplitBundle:
    """Everything one valuation run needs: train features, weak labels, holdout sets."""

    train_features: np.ndarray
    weak_labels: WeakLabelMatrix
    valid: LabeledSet
    spec: TaskSpec
    valid_weak_labels: WeakLabelMatrix | None = None
    test: LabeledSet | None = None

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "train_features", _freeze(np.asarray(self.train_features, dtype=np.float64))
        )
        _validate_bundle(self)

    @property
    def num_train(self) -> int:
        return self.train_features.shape[0]

    @property
    def num_lfs(self) -> int:
        return self.weak_labels.num_lfs

    @property
    def dim(self) -> int:
        return self.train_features.shape[1]


def _check_features(features: np.ndarray, what: str) -> None:
    if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
        raise BundleValidationError(f"{what}: expected a non-empty 2-D matrix, got shape {features.shape}")
    bad = ~np.isfinite(features)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise BundleValidationError(f"{what}: non-finite value at ({r}, {c})")


def _check_weak_labels(weak: WeakLabelMatrix, spec: TaskSpec, what: str) -> None:
    entries = weak.entries
    bad = (entries != spec.abstain_token) & ((entries < 0) | (entries >= spec.num_classes))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise BundleValidationError(
            f"{what}: class {entries[r, c]} out of range at ({r}, {c}) for num_classes={spec.num_classes}"
        )


def _check_labels(labels: np.ndarray, spec: TaskSpec, what: str) -> None:
    bad = (labels < 0) | (labels >= spec.num_classes)
    if bad.any():
        r = int(np.argwhere(bad)[0][0])
        raise BundleValidationError(
            f"{what}: label {labels[r]} out of range at row {r} for num_classes={spec.num_classes}"
        )


def _validate_bundle(bundle: SplitBundle) -> None:
    _check_features(bundle.train_features, "train features")
    _check_features(bundle.valid.features, "valid features")
    _check_weak_labels(bundle.weak_labels, bundle.spec, "weak labels")
    _check_labels(bundle.valid.labels, bundle.spec, "valid labels")
    n, d = bundle.train_features.shape
    if bundle.weak_labels.num_rows != n:
        raise BundleValidationError(
            f"weak labels have {bundle.weak_labels.num_rows} rows but train has {n}"
        )
    if bundle.valid.features.shape[1] != d:
        raise BundleValidationError(
            f"valid features have dim {bundle.valid.features.shape[1]} but train has dim {d}"
        )
    if bundle.valid_weak_labels is not None:
        _check_weak_labels(bundle.valid_weak_labels, bundle.spec, "valid weak labels")
        if bundle.valid_weak_labels.num_rows != len(bundle.valid):
            raise BundleValidationError(
                f"valid weak labels have {bundle.valid_weak_labels.num_rows} rows "
                f"but valid has {len(bundle.valid)}"
            )
        if bundle.valid_weak_labels.num_lfs != bundle.weak_labels.num_lfs:
            raise BundleValidationError(
                f"valid weak labels have {bundle.valid_weak_labels.num_lfs} columns "
                f"but train weak labels have {bundle.weak_labels.num_lfs}"
            )
    if bundle.test is not None:
        _check_features(bundle.test.features, "test features")
        _check_labels(bundle.test.labels, bundle.spec, "test labels")
        if bundle.test.features.shape[1] != d:
            raise BundleValidationError(
                f"test features have dim {bundle.test.features.shape[1]} but train has dim {d}"
            )


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------


def _looks_numeric(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def load_features(path: str | Path) -> np.ndarray:
    """Load a feature matrix from CSV or WSFM binary (sniffed by magic bytes)."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == WSFM_MAGIC:
        return _load_wsfm(path)
    rows: list[list[float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader):
            if not row:
                continue
            if lineno == 0 and not all(_looks_numeric(tok) for tok in row):
                continue  # header row
            try:
                rows.append([float(tok) for tok in row])
            except ValueError as exc:
                raise BundleValidationError(f"{path}: non-numeric value on line {lineno + 1}: {exc}") from exc
    if not rows:
        raise BundleValidationError(f"{path}: no feature rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise BundleValidationError(f"{path}: ragged rows with widths {sorted(widths)}")
    return np.asarray(rows, dtype=np.float64)


def _load_wsfm(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) < _WSFM_HEADER.size:
        raise BundleValidationError(f"{path}: truncated WSFM header")
    magic, n, d, _reserved = _WSFM_HEADER.unpack_from(raw)
    if magic != WSFM_MAGIC:
        raise BundleValidationError(f"{path}: bad WSFM magic {magic!r}")
    expected = _WSFM_HEADER.size + 8 * n * d
    if len(raw) != expected:
        raise BundleValidationError(f"{path}: expected {expected} bytes for {n}x{d}, got {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8", offset=_WSFM_HEADER.size)
    return data.reshape(n, d).astype(np.float64, copy=True)


def save_features_wsfm(features: np.ndarray, path: str | Path) -> None:
    """Write a feature matrix in the WSFM binary format (bit-exact round trip)."""
    features = np.ascontiguousarray(features, dtype=np.float64)
    n, d = features.shape
    with open(path, "wb") as fh:
        fh.write(_WSFM_HEADER.pack(WSFM_MAGIC, n, d, 0))
        fh.write(features.astype("<f8", copy=False).tobytes())


def load_weak_labels(path: str | Path) -> WeakLabelMatrix:
    """Load an integer weak-label CSV; a non-integer first row is taken as LF names."""
    path = Path(path)
    rows: list[list[int]] = []
    names: tuple[str, ...] = ()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader):
            if not row:
                continue
            if lineno == 0 and not all(_looks_integer(tok) for tok in row):
                names = tuple(tok.strip() for tok in row)
                continue
            try:
                rows.append([int(tok) for tok in row])
            except ValueError as exc:
                raise BundleValidationError(f"{path}: non-integer value on line {lineno + 1}: {exc}") from exc
    if not rows:
        raise BundleValidationError(f"{path}: no weak-label rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise BundleValidationError(f"{path}: ragged rows with widths {sorted(widths)}")
    return WeakLabelMatrix(np.asarray(rows, dtype=np.int64), names)


def _looks_integer(token: str) -> bool:
    try:
        int(token)
        return True
    except ValueError:
        return False


def load_labels(path: str | Path) -> np.ndarray:
    """Load a single-column integer label CSV."""
    path = Path(path)
    out: list[int] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader):
            if not row:
                continue
            if lineno == 0 and not _looks_integer(row[0]):
                continue
            if len(row) != 1:
                raise BundleValidationError(f"{path}: expected one column, got {len(row)} on line {lineno + 1}")
            out.append(int(row[0]))
    if not out:
        raise BundleValidationError(f"{path}: no labels")
    return np.asarray(out, dtype=np.int64)


def save_weak_labels(weak: WeakLabelMatrix, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(weak.lf_names)
        writer.writerows(weak.entries.tolist())


def save_labels(labels: np.ndarray, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for v in labels.tolist():
            writer.writerow([v])


def load_bundle(manifest_path: str | Path) -> SplitBundle:
    """Load and validate a bundle from a JSON manifest.

    Raises :class:`BundleValidationError` with row/column coordinates on
    dimension mismatches, out-of-range labels, or non-finite features.
    """
    manifest_path = Path(manifest_path)
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    base = manifest_path.parent

    def resolve(key: str) -> Path:
        return base / manifest[key]

    required = ["train", "weak_labels", "valid_features", "valid_labels", "num_classes"]
    missing = [k for k in required if k not in manifest]
    if missing:
        raise BundleValidationError(f"{manifest_path}: manifest missing keys {missing}")

    spec = TaskSpec(num_classes=int(manifest["num_classes"]))
    train = load_features(resolve("train"))
    weak = load_weak_labels(resolve("weak_labels"))
    valid = LabeledSet(load_features(resolve("valid_features")), load_labels(resolve("valid_labels")))
    valid_weak = load_weak_labels(resolve("valid_weak_labels")) if manifest.get("valid_weak_labels") else None
    test = None
    if manifest.get("test_features"):
        if not manifest.get("test_labels"):
            raise BundleValidationError(f"{manifest_path}: test_features given without test_labels")
        test = LabeledSet(load_features(resolve("test_features")), load_labels(resolve("test_labels")))
    return SplitBundle(
        train_features=train,
        weak_labels=weak,
        valid=valid,
        spec=spec,
        valid_weak_labels=valid_weak,
        test=test,
    )


def bundle_config(manifest_path: str | Path) -> dict:
    """Return optional proxy-config fields (k, metric, weighting) from a manifest."""
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    return {key: manifest[key] for key in ("k", "metric", "weighting") if key in manifest}


def save_bundle(
    bundle: SplitBundle,
    out_dir: str | Path,
    name: str = "bundle",
    config: ProxyConfig | None = None,
) -> Path:
    """Write a bundle to disk (WSFM features + CSVs) and return the manifest path.

    ``load_bundle(save_bundle(b))`` reproduces ``b`` bit-exactly.  A config,
    when given, is recorded in the manifest as default k/metric/weighting.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"num_classes": bundle.spec.num_classes}
    if config is not None:
        manifest.update({"k": config.k, "metric": config.metric, "weighting": config.weighting})

    save_features_wsfm(bundle.train_features, out_dir / "train.wsfm")
    manifest["train"] = "train.wsfm"
    save_weak_labels(bundle.weak_labels, out_dir / "weak_labels.csv")
    manifest["weak_labels"] = "weak_labels.csv"
    save_features_wsfm(bundle.valid.features, out_dir / "valid_features.wsfm")
    manifest["valid_features"] = "valid_features.wsfm"
    save_labels(bundle.valid.labels, out_dir / "valid_labels.csv")
    manifest["valid_labels"] = "valid_labels.csv"
    if bundle.valid_weak_labels is not None:
        save_weak_labels(bundle.valid_weak_labels, out_dir / "valid_weak_labels.csv")
        manifest["valid_weak_labels"] = "valid_weak_labels.csv"
    if bundle.test is not None:
        save_features_wsfm(bundle.test.features, out_dir / "test_features.wsfm")
        save_labels(bundle.test.labels, out_dir / "test_labels.csv")
        manifest["test_features"] = "test_features.wsfm"
        manifest["test_labels"] = "test_labels.csv"

    manifest_path = out_dir / f"{name}.json"
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path


# ---------------------------------------------------------------------------
# LF statistics
# ---------------------------------------------------------------------------


def lf_summary(
    weak_labels: WeakLabelMatrix,
    valid_weak_labels: WeakLabelMatrix | None = None,
    valid_labels: np.ndarray | None = None,
) -> LFSummary:
    """Per-LF coverage/overlap/conflict on the training matrix and accuracy on validation.

    * coverage: fraction of training rows the LF labels;
    * overlap: fraction of rows where the LF and at least one other LF are both active;
    * conflict: fraction of rows where the LF is active and some other active LF disagrees;
    * accuracy: correct / non-abstain over validation rows, NaN when the LF
      abstains on every validation row.

    ``conflict <= overlap <= coverage`` holds for every LF by construction.
    """
    entries = weak_labels.entries
    n, m = entries.shape
    active = entries != ABSTAIN
    activation_count = active.sum(axis=0)
    coverage = activation_count / n

    active_per_row = active.sum(axis=1)
    others_active = active & (active_per_row[:, None] > 1)
    overlap = others_active.sum(axis=0) / n

    conflict = np.zeros(m, dtype=np.float64)
    multi = active_per_row > 1
    if multi.any():
        sub = entries[multi]
        sub_active = active[multi]
        for j in range(m):
            mine = sub_active[:, j]
            if not mine.any():
                continue
            others = sub_active.copy()
            others[:, j] = False
            disagree = others & (sub != sub[:, j][:, None])
            conflict[j] = (mine & disagree.any(axis=1)).sum() / n

    accuracy = np.full(m, np.nan, dtype=np.float64)
    if valid_weak_labels is not None and valid_labels is not None:
        ventries = valid_weak_labels.entries
        vactive = ventries != ABSTAIN
        hits = (ventries == np.asarray(valid_labels)[:, None]) & vactive
        denom = vactive.sum(axis=0)
        defined = denom > 0
        accuracy[defined] = hits.sum(axis=0)[defined] / denom[defined]

    return LFSummary(
        accuracy=_freeze(accuracy),
        coverage=_freeze(coverage),
        overlap=_freeze(overlap),
        conflict=_freeze(conflict),
        activation_count=_freeze(activation_count.astype(np.int64)),
    )
