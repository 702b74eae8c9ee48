"""Synthetic benchmark data, heavy-tailed noise, CSV loading, standardization.

Synthetic regression functions (three Friedman variants):

    I   (d=5): 10 sin(x1 x2) + 20 (x3 - 1/2)^2 + 10 x4 + 5 x5
    II  (d=4): sqrt(x1^2 + (x2 x3 - 1/(x2 x4))^2)
    III (d=4): arctan((x2 x3 - 1/(x2 x4)) / x1)

Variant I takes the product x1 x2 directly inside the sine (no pi factor)
and samples inputs from U[0,1]^5.  Variants II and III sample
x1 ~ U[0,100], x2 ~ U[40 pi, 500 pi], x3 ~ U[0,1], x4 ~ U[1,11].

Noise families (all symmetric about 0, scale s > 0):

    gaussian  N(0, s^2)
    cauchy    density s / (pi (s^2 + t^2)); sampled as s tan(pi (U - 1/2))
    pareto    magnitude CDF 1 - (1 + t/s)^(-zeta) with random sign, so zeta
              is the tail exponent (the numpy.random.pareto convention) and
              E|eps|^p exists exactly for p < zeta

The noise scale is calibrated against the clean signal so the noise level
is a fixed fraction of the signal level in a moment that exists for the
family: std(eps) = std(f)/3 for gaussian, and the L_p quasinorm
(E|.|^p)^(1/p) identity ||eps||_p = ||f||_p / 3 with p = 1/2 for cauchy
and p = 1/3 for pareto.  Signal moments are estimated by Monte Carlo.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.special import beta as beta_fn

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

PARETO_DEFAULT_SHAPE = 2.01


class FriedmanFunction(Enum):
    I = "I"
    II = "II"
    III = "III"

    @property
    def input_dim(self) -> int:
        return 5 if self is FriedmanFunction.I else 4


class NoiseFamily(Enum):
    GAUSSIAN = "gaussian"
    CAUCHY = "cauchy"
    PARETO = "pareto"


@dataclass(frozen=True)
class NoiseSpec:
    family: NoiseFamily
    scale: float
    shape: float | None = None

    def __post_init__(self) -> None:
        s = float(self.scale)
        if not np.isfinite(s) or s <= 0.0:
            raise ValueError(f"noise scale must be positive and finite, got {self.scale}")
        object.__setattr__(self, "scale", s)
        if self.family is NoiseFamily.PARETO:
            shape = PARETO_DEFAULT_SHAPE if self.shape is None else float(self.shape)
            if not np.isfinite(shape) or shape <= 0.0:
                raise ValueError(f"pareto shape must be positive, got {self.shape}")
            # shape > 1/3 so the calibration moment E|eps|^(1/3) exists
            if shape <= 1.0 / 3.0:
                raise ValueError(f"pareto shape must exceed 1/3, got {shape}")
            object.__setattr__(self, "shape", shape)
        elif self.shape is not None:
            raise ValueError(f"{self.family.value} noise takes no shape parameter")


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    f_true: np.ndarray | None = None
    feature_names: tuple[str, ...] | None = None
    target_name: str | None = None

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError(f"X {X.shape} and y {y.shape} do not align")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.f_true is not None:
            f = np.asarray(self.f_true, dtype=float).ravel()
            if f.shape != y.shape:
                raise ValueError(f"f_true {f.shape} and y {y.shape} do not align")
            object.__setattr__(self, "f_true", f)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


# --- synthetic signal ------------------------------------------------------


def friedman_eval(fn: FriedmanFunction, x):
    """Evaluate the clean signal at one d-vector or a batch of shape (n, d)."""
    X = np.asarray(x, dtype=float)
    scalar = X.ndim == 1
    if scalar:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != fn.input_dim:
        raise ValueError(f"variant {fn.value} expects {fn.input_dim} features, got shape {np.shape(x)}")
    if not np.all(np.isfinite(X)):
        raise ValueError("inputs contain non-finite values")
    if fn is FriedmanFunction.I:
        out = (
            10.0 * np.sin(X[:, 0] * X[:, 1])
            + 20.0 * (X[:, 2] - 0.5) ** 2
            + 10.0 * X[:, 3]
            + 5.0 * X[:, 4]
        )
    else:
        x1, x2, x3, x4 = X[:, 0], X[:, 1], X[:, 2], X[:, 3]
        if np.any(x2 * x4 == 0.0):
            raise ValueError(f"variant {fn.value} is undefined where x2 * x4 = 0")
        t = x2 * x3 - 1.0 / (x2 * x4)
        if fn is FriedmanFunction.II:
            out = np.sqrt(x1 * x1 + t * t)
        else:
            if np.any(x1 == 0.0):
                raise ValueError("variant III is undefined where x1 = 0")
            out = np.arctan(t / x1)
    return float(out[0]) if scalar else out


def sample_inputs(fn: FriedmanFunction, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw n input points from the variant's sampling distribution."""
    if n < 0:
        raise ValueError(f"need n >= 0, got {n}")
    if fn is FriedmanFunction.I:
        return rng.uniform(0.0, 1.0, size=(n, 5))
    cols = [
        rng.uniform(0.0, 100.0, size=n),
        rng.uniform(40.0 * np.pi, 500.0 * np.pi, size=n),
        rng.uniform(0.0, 1.0, size=n),
        rng.uniform(1.0, 11.0, size=n),
    ]
    return np.column_stack(cols)


# --- noise -----------------------------------------------------------------


def sample_noise(spec: NoiseSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw n noise values by inverse-CDF from the generator's uniforms."""
    if n < 0:
        raise ValueError(f"need n >= 0, got {n}")
    s = spec.scale
    if spec.family is NoiseFamily.GAUSSIAN:
        return rng.normal(0.0, s, size=n)
    u = rng.random(n)
    if spec.family is NoiseFamily.CAUCHY:
        return s * np.tan(np.pi * (u - 0.5))
    zeta = spec.shape
    mag = s * ((1.0 - u) ** (-1.0 / zeta) - 1.0)
    sign = 2.0 * rng.integers(0, 2, size=n).astype(float) - 1.0
    return sign * mag


def cauchy_abs_moment(scale: float, p: float) -> float:
    """E|eps|^p for cauchy noise; requires 0 < p < 1."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"cauchy absolute moment exists only for 0 < p < 1, got {p}")
    return scale**p / np.cos(np.pi * p / 2.0)


def pareto_abs_moment(scale: float, zeta: float, p: float) -> float:
    """E|eps|^p for symmetric pareto noise; requires 0 < p < zeta."""
    if not 0.0 < p < zeta:
        raise ValueError(f"pareto absolute moment exists only for 0 < p < zeta, got p={p}")
    return scale**p * zeta * beta_fn(p + 1.0, zeta - p)


def calibrate_scale_from_signal(family: NoiseFamily, f_values) -> NoiseSpec:
    """Solve for the noise scale from clean signal values (see module docs)."""
    f = np.asarray(f_values, dtype=float).ravel()
    if f.size < 2 or not np.all(np.isfinite(f)):
        raise ValueError("signal sample must be finite with at least 2 values")
    if family is NoiseFamily.GAUSSIAN:
        sd = float(f.std())
        if sd <= 0.0:
            raise ValueError("signal is constant; gaussian calibration is degenerate")
        return NoiseSpec(NoiseFamily.GAUSSIAN, sd / 3.0)
    if family is NoiseFamily.CAUCHY:
        m = float(np.mean(np.sqrt(np.abs(f))))
        if m <= 0.0:
            raise ValueError("signal is identically zero; cauchy calibration is degenerate")
        # ||eps||_{1/2} = (E|eps|^{1/2})^2 = 2 s  must equal  (m^2)/3
        return NoiseSpec(NoiseFamily.CAUCHY, m * m / 6.0)
    zeta = PARETO_DEFAULT_SHAPE
    m = float(np.mean(np.abs(f) ** (1.0 / 3.0)))
    if m <= 0.0:
        raise ValueError("signal is identically zero; pareto calibration is degenerate")
    # ||eps||_{1/3} = (E|eps|^{1/3})^3 = s c^3  must equal  (m^3)/3,
    # where c = zeta B(4/3, zeta - 1/3)
    c = zeta * beta_fn(4.0 / 3.0, zeta - 1.0 / 3.0)
    return NoiseSpec(NoiseFamily.PARETO, m**3 / (3.0 * c**3), zeta)


def calibrate_noise_scale(
    family: NoiseFamily,
    fn: FriedmanFunction,
    rng: np.random.Generator,
    mc_samples: int = 10**6,
) -> NoiseSpec:
    """Monte Carlo calibration of the noise scale for a Friedman variant."""
    if mc_samples < 10**5:
        raise ValueError(f"mc_samples must be at least 1e5, got {mc_samples}")
    X = sample_inputs(fn, rng, mc_samples)
    return calibrate_scale_from_signal(family, friedman_eval(fn, X))


def make_synthetic(
    fn: FriedmanFunction,
    noise: NoiseSpec,
    n_train: int,
    n_test: int,
    rng: np.random.Generator,
) -> tuple[Dataset, Dataset]:
    """Sample a noisy training set and a noise-free test set.

    Both carry f_true; for the test set y equals f_true exactly.
    """
    if n_train < 1 or n_test < 1:
        raise ValueError(f"need n_train, n_test >= 1, got {n_train}, {n_test}")
    X_tr = sample_inputs(fn, rng, n_train)
    f_tr = friedman_eval(fn, X_tr)
    eps = sample_noise(noise, rng, n_train)
    train = Dataset(X=X_tr, y=f_tr + eps, f_true=f_tr)
    X_te = sample_inputs(fn, rng, n_test)
    f_te = friedman_eval(fn, X_te)
    test = Dataset(X=X_te, y=f_te.copy(), f_true=f_te)
    return train, test


# --- standardization -------------------------------------------------------


@dataclass(frozen=True)
class Standardizer:
    """Affine feature/response maps fitted on one training split.

    Response fields are identity (mean 0, scale 1) when the response was not
    standardized.  ``constant_features`` lists zero-variance columns whose
    scale was forced to 1.
    """

    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float = 0.0
    y_scale: float = 1.0
    constant_features: tuple[int, ...] = ()
    constant_response: bool = False

    def transform_features(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.x_mean) / self.x_scale

    def transform_response(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_scale

    def inverse_response(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float) * self.y_scale + self.y_mean


def standardize(ds: Dataset, include_response: bool) -> tuple[Dataset, Standardizer]:
    """Center/scale features (and optionally the response) to mean 0, std 1."""
    if ds.n < 2:
        raise ValueError(f"standardization needs at least 2 rows, got {ds.n}")
    x_mean = ds.X.mean(axis=0)
    x_scale = ds.X.std(axis=0)
    constant = tuple(int(j) for j in np.flatnonzero(x_scale == 0.0))
    if constant:
        warnings.warn(f"constant feature columns {constant}: scale forced to 1", stacklevel=2)
        x_scale = np.where(x_scale == 0.0, 1.0, x_scale)
    y_mean, y_scale, const_y = 0.0, 1.0, False
    if include_response:
        y_mean = float(ds.y.mean())
        y_scale = float(ds.y.std())
        if y_scale == 0.0:
            warnings.warn("constant response: scale forced to 1", stacklevel=2)
            y_scale, const_y = 1.0, True
    std = Standardizer(
        x_mean=x_mean,
        x_scale=x_scale,
        y_mean=y_mean,
        y_scale=y_scale,
        constant_features=constant,
        constant_response=const_y,
    )
    f_std = None if ds.f_true is None else (ds.f_true - y_mean) / y_scale
    out = Dataset(
        X=std.transform_features(ds.X),
        y=std.transform_response(ds.y),
        f_true=f_std,
        feature_names=ds.feature_names,
        target_name=ds.target_name,
    )
    return out, std


def split_real(ds: Dataset, train_fraction: float, rng: np.random.Generator) -> tuple[Dataset, Dataset]:
    """Random train/test split by row permutation."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    perm = rng.permutation(ds.n)
    n_tr = int(round(train_fraction * ds.n))
    if n_tr < 1 or n_tr >= ds.n:
        raise ValueError(f"split leaves an empty side: n={ds.n}, train_fraction={train_fraction}")
    def take(idx):
        return Dataset(
            X=ds.X[idx],
            y=ds.y[idx],
            f_true=None if ds.f_true is None else ds.f_true[idx],
            feature_names=ds.feature_names,
            target_name=ds.target_name,
        )
    return take(perm[:n_tr]), take(perm[n_tr:])


# --- CSV -------------------------------------------------------------------


def load_csv(path, target_column: str, delimiter: str = ",") -> Dataset:
    """Load a headed numeric CSV; the named column becomes the response.

    The first row is always treated as the header.  Any unparseable or
    ragged row raises a ValueError naming the offending line.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        names = [c.strip() for c in header]
        if target_column not in names:
            raise ValueError(f"{path}: no column named '{target_column}' (have {names})")
        t_idx = names.index(target_column)
        rows: list[list[float]] = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(names):
                raise ValueError(f"{path}: line {reader.line_num} has {len(row)} fields, expected {len(names)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                bad = next(c for c in row if not _parses_as_float(c))
                raise ValueError(f"{path}: line {reader.line_num}: could not parse {bad!r} as a number") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    keep = [j for j in range(len(names)) if j != t_idx]
    return Dataset(
        X=data[:, keep],
        y=data[:, t_idx],
        feature_names=tuple(names[j] for j in keep),
        target_name=names[t_idx],
    )


def _parses_as_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def write_csv(ds: Dataset, path, delimiter: str = ",") -> None:
    """Write a dataset as a headed CSV, features first, response last."""
    names = list(ds.feature_names or (f"x{j + 1}" for j in range(ds.d)))
    names.append(ds.target_name or "y")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(names)
        for i in range(ds.n):
            writer.writerow([repr(float(v)) for v in ds.X[i]] + [repr(float(ds.y[i]))])


# --- real-data registry ----------------------------------------------------

# expected (rows, features) for the benchmark datasets, keyed by lower-case name
KNOWN_SHAPES = {
    "computer": (209, 10),
    "facebook": (500, 17),
    "housing": (506, 13),
    "yacht": (308, 7),
}


@dataclass(frozen=True)
class RegistryEntry:
    name: str
    path: Path
    target: str
    delimiter: str = ","
    expected_n: int | None = None
    expected_d: int | None = None


def load_registry(path) -> dict[str, RegistryEntry]:
    """Parse a TOML registry mapping dataset names to local CSV files.

    Each table needs ``path`` and ``target``; ``expected_n``/``expected_d``
    override the built-in shape expectations.  Relative CSV paths resolve
    against the registry file's directory.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ValueError(f"{path}: invalid TOML: {exc}") from None
    entries: dict[str, RegistryEntry] = {}
    for name, body in raw.items():
        if not isinstance(body, dict):
            raise ValueError(f"{path}: entry '{name}' must be a table")
        missing = [k for k in ("path", "target") if k not in body]
        if missing:
            raise ValueError(f"{path}: entry '{name}' is missing {missing}")
        known = KNOWN_SHAPES.get(name.lower())
        csv_path = Path(body["path"])
        if not csv_path.is_absolute():
            csv_path = path.parent / csv_path
        entries[name] = RegistryEntry(
            name=name,
            path=csv_path,
            target=str(body["target"]),
            delimiter=str(body.get("delimiter", ",")),
            expected_n=body.get("expected_n", known[0] if known else None),
            expected_d=body.get("expected_d", known[1] if known else None),
        )
    if not entries:
        raise ValueError(f"{path}: registry is empty")
    return entries


def load_real(entry: RegistryEntry) -> Dataset:
    """Load a registry entry and validate its shape when one is expected."""
    ds = load_csv(entry.path, entry.target, entry.delimiter)
    if entry.expected_n is not None and ds.n != entry.expected_n:
        raise ValueError(f"dataset '{entry.name}': expected {entry.expected_n} rows, found {ds.n}")
    if entry.expected_d is not None and ds.d != entry.expected_d:
        raise ValueError(f"dataset '{entry.name}': expected {entry.expected_d} features, found {ds.d}")
    return ds
