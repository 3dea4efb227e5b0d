"""Monte Carlo lab: random matrix ensembles and spectral experiments.

Sampling is reproducible and parallel-safe: every random draw comes from a
counter-based Philox generator keyed by (base_seed, purpose, trial), so a
trial's matrices are bit-identical no matter where or in what order trials
execute.

Conventions.  The invariant Gaussian ensemble of scale sigma has real
diagonal entries of variance sigma^2/N and complex off-diagonal entries
with variance sigma^2/(2N) per component, so its spectrum converges to the
radius-2*sigma semicircle.  The sample-covariance ensemble of ratio c is
(1/n) X X^dagger with X of shape (N, n), n = round(N/c).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .eigen import hermitian_eigenvalues
from .errors import NumericalError, ValidationError
from .measures import (
    Segment,
    SpectralMeasure,
    quantiles,
)
from .report import CriterionRecord, ReportDocument

# purpose identifiers for derived random streams
P_ENTRIES_A = 0
P_ROTATE_A = 1
P_ENTRIES_B = 2
P_ROTATE_B = 3
P_MIX = 4


def stream(base_seed: int, purpose: int, trial: int) -> np.random.Generator:
    """Philox generator for one (seed, purpose, trial) triple."""
    ss = np.random.SeedSequence(entropy=int(base_seed),
                                spawn_key=(int(purpose), int(trial)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class EnsembleSpec:
    """Description of one random-matrix ensemble at fixed dimension."""

    kind: str
    dimension: int
    base_seed: int
    sigma: float = 1.0
    ratio: float = 1.0
    measure: SpectralMeasure | None = None
    field: object = None

    KINDS = ("gue", "fixed_spectrum", "wishart", "shifted_gue")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValidationError(f"unknown ensemble kind {self.kind!r}")
        if self.dimension < 2:
            raise ValidationError("dimension must be at least 2")
        if self.kind in ("gue", "shifted_gue") and self.sigma <= 0:
            raise ValidationError("sigma must be positive")
        if self.kind == "wishart" and self.ratio <= 0:
            raise ValidationError("ratio must be positive")

    @classmethod
    def gue(cls, sigma, dimension, base_seed):
        return cls("gue", dimension, base_seed, sigma=float(sigma))

    @classmethod
    def fixed_spectrum(cls, measure, dimension, base_seed):
        return cls("fixed_spectrum", dimension, base_seed, measure=measure)

    @classmethod
    def wishart(cls, ratio, dimension, base_seed):
        return cls("wishart", dimension, base_seed, ratio=float(ratio))

    @classmethod
    def shifted_gue(cls, sigma, field, dimension, base_seed):
        return cls("shifted_gue", dimension, base_seed, sigma=float(sigma),
                   field=field)


def _gue_matrix(n, sigma, rng):
    diag = rng.standard_normal(n) * (sigma / np.sqrt(n))
    re = rng.standard_normal((n, n))
    im = rng.standard_normal((n, n))
    off = (re + 1j * im) * (sigma / np.sqrt(2.0 * n))
    m = np.zeros((n, n), dtype=complex)
    iu = np.triu_indices(n, 1)
    m[iu] = off[iu]
    m = m + m.conj().T
    m[np.diag_indices(n)] = diag
    return m


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR with the phase convention that the
    triangular factor has positive real diagonal (raw QR is not Haar)."""
    if n < 1:
        raise ValidationError("dimension must be at least 1")
    a = (rng.standard_normal((n, n))
         + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(a)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))
    return q


def _wishart_factor(spec, rng):
    n_cols = int(round(spec.dimension / spec.ratio))
    if n_cols < 1:
        raise ValidationError("ratio too large for this dimension")
    x = (rng.standard_normal((spec.dimension, n_cols))
         + 1j * rng.standard_normal((spec.dimension, n_cols))) / np.sqrt(2.0)
    return x / np.sqrt(n_cols)


def sample_ensemble(spec: EnsembleSpec, trial: int, slot: int = 0) -> np.ndarray:
    """Draw the trial-th matrix of the ensemble; deterministic in
    (base_seed, purpose-derived-from-slot, trial)."""
    p_entries = P_ENTRIES_A if slot == 0 else P_ENTRIES_B
    p_rotate = P_ROTATE_A if slot == 0 else P_ROTATE_B
    n = spec.dimension
    if spec.kind == "gue":
        return _gue_matrix(n, spec.sigma, stream(spec.base_seed, p_entries,
                                                 trial))
    if spec.kind == "shifted_gue":
        m = _gue_matrix(n, spec.sigma, stream(spec.base_seed, p_entries,
                                              trial))
        shifts = spec.sigma ** 2 * spec.field.eigenvalues(n)
        m[np.diag_indices(n)] += shifts
        return m
    if spec.kind == "fixed_spectrum":
        t = quantiles(spec.measure, n)
        u = haar_unitary(n, stream(spec.base_seed, p_rotate, trial))
        m = (u * t) @ u.conj().T
        return 0.5 * (m + m.conj().T)
    if spec.kind == "wishart":
        x = _wishart_factor(spec, stream(spec.base_seed, p_entries, trial))
        m = x @ x.conj().T
        return 0.5 * (m + m.conj().T)
    raise ValidationError(f"unknown ensemble kind {spec.kind!r}")


def _psd_factor(spec: EnsembleSpec, trial: int, slot: int = 0):
    """A factor C with C C^dagger distributed as the (PSD) ensemble."""
    p_entries = P_ENTRIES_A if slot == 0 else P_ENTRIES_B
    p_rotate = P_ROTATE_A if slot == 0 else P_ROTATE_B
    n = spec.dimension
    if spec.kind == "wishart":
        return _wishart_factor(spec, stream(spec.base_seed, p_entries, trial))
    if spec.kind == "fixed_spectrum":
        t = quantiles(spec.measure, n)
        if np.any(t < -1e-12):
            raise ValidationError("factor spectrum must be nonnegative")
        u = haar_unitary(n, stream(spec.base_seed, p_rotate, trial))
        return u * np.sqrt(np.clip(t, 0.0, None))
    raise ValidationError(
        "left factor must be a positive semidefinite family "
        "(wishart or nonnegative fixed_spectrum)"
    )


# -- empirical spectra ---------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalSpectrum:
    """Per-trial sorted eigenvalue arrays, shape (trials, N)."""

    eigenvalues: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.eigenvalues, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValidationError("need at least one trial of eigenvalues")
        if np.any(np.diff(arr, axis=1) < 0):
            raise ValidationError("eigenvalue rows must be sorted ascending")
        object.__setattr__(self, "eigenvalues", arr)

    @property
    def trials(self) -> int:
        return int(self.eigenvalues.shape[0])

    def pooled(self) -> np.ndarray:
        return np.sort(self.eigenvalues.ravel())

    def pooled_moment(self, n: int) -> float:
        return float(np.mean(self.pooled() ** n))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("trial,rank,eigenvalue\n")
            for t, row in enumerate(self.eigenvalues):
                for r, v in enumerate(row):
                    fh.write(f"{t},{r},{v:.17g}\n")

    @classmethod
    def from_csv(cls, path) -> "EmpiricalSpectrum":
        rows = {}
        with open(path) as fh:
            header = fh.readline().strip()
            if header != "trial,rank,eigenvalue":
                raise ValidationError(f"unexpected spectrum header {header!r}")
            for line in fh:
                t, r, v = line.strip().split(",")
                rows.setdefault(int(t), {})[int(r)] = float(v)
        trials = sorted(rows)
        data = [[rows[t][r] for r in sorted(rows[t])] for t in trials]
        return cls(np.asarray(data))


def mc_free_add_experiment(spec1: EnsembleSpec, spec2: EnsembleSpec,
                           trials: int) -> EmpiricalSpectrum:
    """Spectra of M1 + Omega M2 Omega^dagger over independent trials; the
    fresh Haar rotation puts the operands in free position."""
    if spec1.dimension != spec2.dimension:
        raise ValidationError("operand dimensions differ")
    n = spec1.dimension
    out = np.empty((trials, n))
    for t in range(trials):
        m1 = sample_ensemble(spec1, t, slot=0)
        m2 = sample_ensemble(spec2, t, slot=1)
        omega = haar_unitary(n, stream(spec1.base_seed, P_MIX, t))
        total = m1 + omega @ m2 @ omega.conj().T
        out[t] = hermitian_eigenvalues(0.5 * (total + total.conj().T))
    return EmpiricalSpectrum(out)


def mc_free_mul_experiment(spec1: EnsembleSpec, spec2: EnsembleSpec,
                           trials: int) -> EmpiricalSpectrum:
    """Spectra of A^(1/2) U B U^dagger A^(1/2) over independent trials.

    Realized as eig(C^dagger (U B U^dagger) C) for a factor A = C C^dagger,
    which is Hermitian without forming A^(1/2); rank differences against N
    are padded with (or checked as) exact zeros.
    """
    if spec1.dimension != spec2.dimension:
        raise ValidationError("operand dimensions differ")
    n = spec1.dimension
    out = np.empty((trials, n))
    for t in range(trials):
        c = _psd_factor(spec1, t, slot=0)
        b = sample_ensemble(spec2, t, slot=1)
        u = haar_unitary(n, stream(spec1.base_seed, P_MIX, t))
        rotated = u @ b @ u.conj().T
        prod = c.conj().T @ rotated @ c
        lam = hermitian_eigenvalues(0.5 * (prod + prod.conj().T))
        m = lam.size
        if m < n:
            lam = np.sort(np.concatenate([lam, np.zeros(n - m)]))
        elif m > n:
            scale = float(np.max(np.abs(lam))) or 1.0
            drop = np.argsort(np.abs(lam))[:m - n]
            if np.any(np.abs(lam[drop]) > 1e-10 * scale):
                raise NumericalError(
                    "expected structural zeros when trimming the product "
                    "spectrum"
                )
            lam = np.sort(np.delete(lam, drop))
        out[t] = lam
    return EmpiricalSpectrum(out)


def empirical_measure(es: EmpiricalSpectrum, bins: int) -> SpectralMeasure:
    """Pooled histogram as a piecewise-linear density at bin centers.

    Values repeated across trials (structural eigenvalues such as exact
    zeros) become atoms instead of being smeared into a bin.
    """
    if bins < 8:
        raise ValidationError("need at least 8 bins")
    pooled = es.pooled()
    total = pooled.size
    scale = max(1.0, float(np.max(np.abs(pooled))))
    values, counts = np.unique(pooled, return_counts=True)
    atom_cut = max(2 * es.trials, int(0.001 * total) + 1)
    atom_mask = counts >= atom_cut
    atoms = tuple(
        (float(v), c / total) for v, c in zip(values[atom_mask],
                                              counts[atom_mask])
    )
    rest = pooled[~np.isin(pooled, values[atom_mask])]
    if rest.size == 0:
        return SpectralMeasure(atoms=atoms)
    lo, hi = float(rest.min()), float(rest.max())
    if hi - lo < 1e-12 * scale:
        merged = dict(atoms)
        merged[lo] = merged.get(lo, 0.0) + rest.size / total
        return SpectralMeasure(atoms=tuple(merged.items()))
    counts_h, edges = np.histogram(rest, bins=bins, range=(lo, hi))
    centers = 0.5 * (edges[:-1] + edges[1:])
    dens = counts_h / total / np.diff(edges)
    raw = np.trapezoid(dens, centers)
    target = rest.size / total
    seg = Segment(centers, dens * (target / raw))
    return SpectralMeasure(atoms=atoms, segments=(seg,),
                           renorm=target / raw)


# -- verification experiments ----------------------------------------------------


def mc_external_field(sigma: float, field, dimension: int, trials: int,
                      base_seed: int) -> ReportDocument:
    """Estimate the coupled diagonal averages <M_jj> and compare them with
    the completed-square prediction sigma^2 * a_j."""
    if dimension < 8:
        raise ValidationError("dimension must be at least 8")
    t0 = time.perf_counter()
    spec = EnsembleSpec.shifted_gue(sigma, field, dimension, base_seed)
    acc = np.zeros(dimension)
    for t in range(trials):
        acc += np.real(np.diagonal(sample_ensemble(spec, t)))
    estimates = acc / trials
    expected = sigma ** 2 * field.eigenvalues(dimension)
    stderr = sigma / np.sqrt(dimension * trials)
    deviations = np.abs(estimates - expected)
    frac_within = float(np.mean(deviations <= 3.0 * stderr))
    crit = CriterionRecord("fraction_within_3_stderr", frac_within, 0.95,
                           comparator=">=")
    return ReportDocument(
        experiment_id="external_field_diagonal_averages",
        inputs={"sigma": sigma, "dimension": dimension, "trials": trials},
        metrics={
            "max_deviation": float(np.max(deviations)),
            "stderr": float(stderr),
            "fraction_within_3_stderr": frac_within,
        },
        criteria=(crit,),
        wall_time_s=time.perf_counter() - t0,
        seed=base_seed,
    )


def connected_moment_check(sigma: float, dimension: int, trials: int,
                           base_seed: int) -> ReportDocument:
    """Ratio Var(M_11) * N^2 / <tr M^2>, which the planar connected-moment
    relation fixes at 1 for the invariant Gaussian at every N."""
    if trials < 100:
        raise ValidationError("need at least 100 trials")
    t0 = time.perf_counter()
    spec = EnsembleSpec.gue(sigma, dimension, base_seed)
    m11 = np.empty(trials)
    tr2 = np.empty(trials)
    for t in range(trials):
        m = sample_ensemble(spec, t)
        m11[t] = m[0, 0].real
        tr2[t] = float(np.sum(np.abs(m) ** 2))
    var11 = float(np.var(m11, ddof=1))
    mean_tr2 = float(np.mean(tr2))
    ratio = var11 * dimension ** 2 / mean_tr2
    rel_std = np.sqrt(2.0 / (trials - 1))
    crit = CriterionRecord("connected_moment_ratio", ratio, (0.85, 1.15),
                           comparator="in")
    return ReportDocument(
        experiment_id="connected_moment_ratio",
        inputs={"sigma": sigma, "dimension": dimension, "trials": trials},
        metrics={
            "ratio": ratio,
            "ratio_std": ratio * rel_std,
            "var_m11": var11,
            "mean_tr_m2": mean_tr2,
        },
        criteria=(crit,),
        wall_time_s=time.perf_counter() - t0,
        seed=base_seed,
    )
