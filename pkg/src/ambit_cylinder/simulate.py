"""Fourier-Laplace simulation of ambit fields on the cylinder.

Each circle harmonic ``n`` of the noise drives a complex Ornstein-Uhlenbeck
process ``V_n(t, z)`` for every point ``z = z_r + i y`` of a vertical contour.
The field is recovered at each step by a Bromwich-type sum over the contour
weighted by the kernel's Laplace-Fourier transform.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from .geometry import TWO_PI
from .kernels import Kernel
from .levy import CharacteristicQuadruplet, DomainError, InverseGaussianSeed, _as_seed
from .tables import write_csv

__all__ = [
    "SimulationGrid",
    "ComplexOUState",
    "FieldPath",
    "VolatilityFieldSpec",
    "NoiseCache",
    "ConsistencyError",
    "NumericalWarning",
    "FieldSimulator",
    "ChunkResult",
    "noise_increment",
    "evolve_ou",
    "transform_weights",
    "reconstruct_field",
    "simulate_volatility",
    "simulate_field",
    "simulate_paths",
    "truncation_error_bound",
    "write_field_csv",
    "DEFAULT_CHUNK",
    "REALNESS_TOL",
]

DEFAULT_CHUNK = 1000
REALNESS_TOL = 1e-8


class ConsistencyError(RuntimeError):
    """Cached noise does not match the grid it is used with."""


class NumericalWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class SimulationGrid:
    """Time, angle and contour discretisation.

    ``burn_in`` is the simulated time (years) discarded before the ``J``
    recorded steps; ``None`` means ``10 / gamma_decay`` of the kernel.
    ``z_r=None`` means ``-gamma_decay / 2``.
    """

    dt: float = 0.005
    J: int = 200
    H: int = 24
    M_cells: int = 48
    z_r: float | None = None
    z_range: float = 50.0
    dz: float = 0.1
    N: int = 1
    seed: int = 0
    burn_in: float | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError("dt must be > 0")
        if not self.dz > 0:
            raise DomainError("dz must be > 0")
        if self.N < 0 or self.J < 1 or self.H < 1:
            raise DomainError("need N >= 0, J >= 1, H >= 1")
        if self.M_cells < self.H:
            raise DomainError("M_cells must be >= H")
        if not self.z_range > 0:
            raise DomainError("z_range must be > 0")
        if self.z_r is not None and not self.z_r < 0:
            raise DomainError("z_r must be < 0")
        if self.burn_in is not None and self.burn_in < 0:
            raise DomainError("burn_in must be >= 0")

    def resolve(self, kernel: Kernel) -> "SimulationGrid":
        """Fill in kernel-dependent defaults and check the contour abscissa."""
        g = kernel.gamma_decay
        z_r = -0.5 * g if self.z_r is None else self.z_r
        if not -min(g, kernel.abscissa) < z_r < 0:
            raise DomainError(f"z_r={z_r} must lie in (-{min(g, kernel.abscissa)}, 0)")
        burn = 10.0 / g if self.burn_in is None else self.burn_in
        return replace(self, z_r=z_r, burn_in=burn)

    @property
    def harmonics(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    @property
    def angles(self) -> np.ndarray:
        """Output angles ``2 pi l / H``, l = 1..H."""
        return TWO_PI * np.arange(1, self.H + 1) / self.H

    @property
    def cell_angles(self) -> np.ndarray:
        """Right-endpoint angle of each noise cell."""
        return TWO_PI * np.arange(1, self.M_cells + 1) / self.M_cells

    @property
    def cell_area(self) -> float:
        return self.dt * TWO_PI / self.M_cells

    def contour(self) -> tuple[np.ndarray, np.ndarray]:
        """Contour ordinates ``y`` and trapezoid weights on ``[-z_range, z_range]``."""
        if not math.isfinite(self.z_range):
            raise DomainError("contour range must be finite")
        m = 2.0 * self.z_range / self.dz
        k = int(round(m))
        if abs(m - k) > 1e-9 * max(1.0, m):
            raise DomainError("2 * z_range must be a multiple of dz")
        y = np.linspace(-self.z_range, self.z_range, k + 1)
        w = np.full(k + 1, self.dz)
        w[0] = w[-1] = 0.5 * self.dz
        return y, w

    def burn_in_steps(self) -> int:
        if self.burn_in is None:
            raise DomainError("grid not resolved against a kernel")
        return int(math.ceil(self.burn_in / self.dt - 1e-9))

    def record_times(self) -> np.ndarray:
        """Times of the recorded rows, measured from the end of the burn-in."""
        return self.dt * np.arange(1, self.J + 1)

    def to_dict(self) -> dict:
        return {
            "dt_years": self.dt, "steps": self.J, "output_angles": self.H,
            "noise_cells": self.M_cells, "contour_real": self.z_r,
            "contour_range": self.z_range, "contour_step": self.dz,
            "truncation_order": self.N, "seed": self.seed, "burn_in_years": self.burn_in,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationGrid":
        names = {
            "dt_years": "dt", "steps": "J", "output_angles": "H", "noise_cells": "M_cells",
            "contour_real": "z_r", "contour_range": "z_range", "contour_step": "dz",
            "truncation_order": "N", "seed": "seed", "burn_in_years": "burn_in",
        }
        unknown = set(d) - set(names)
        if unknown:
            raise KeyError(f"unknown grid fields: {sorted(unknown)}")
        return cls(**{names[k]: v for k, v in d.items()})


@dataclass
class ComplexOUState:
    """OU lattice ``values[p, n + N, i] = V_n(t, z_r + i y_i)`` for each path ``p``."""

    values: np.ndarray
    t_current: float = 0.0

    @classmethod
    def zeros(cls, n_paths: int, grid: SimulationGrid) -> "ComplexOUState":
        y, _ = grid.contour()
        return cls(np.zeros((n_paths, 2 * grid.N + 1, y.size), dtype=complex))

    def conjugate_defect(self) -> float:
        """``max |V_{-n}(conj z) - conj V_n(z)|``; zero for real noise on a symmetric contour."""
        v = self.values
        return float(np.max(np.abs(v[:, ::-1, ::-1] - np.conj(v)), initial=0.0))


@dataclass(frozen=True)
class VolatilityFieldSpec:
    """Either ``constant`` with ``value`` or ``exp_ig`` with ``kappa``, ``delta``, ``gamma``."""

    kind: str = "constant"
    value: float = 1.0
    kappa: float = 1.0
    delta: float = 4.0
    gamma: float = 4.0

    def __post_init__(self):
        if self.kind == "constant":
            if not self.value > 0:
                raise DomainError("constant volatility must be > 0")
        elif self.kind == "exp_ig":
            if not (self.kappa > 0 and self.delta > 0 and self.gamma > 0):
                raise DomainError("kappa and IG parameters must be > 0")
        else:
            raise DomainError(f"unknown volatility kind {self.kind!r}")

    @property
    def stationary_mean(self) -> float:
        if self.kind == "constant":
            return self.value
        return self.delta / (self.gamma * self.kappa)

    @property
    def second_moment(self) -> float:
        """``E[sigma^2]`` under the stationary law."""
        if self.kind == "constant":
            return self.value ** 2
        var = (self.delta / self.gamma ** 3) / (2.0 * TWO_PI * self.kappa)
        return var + self.stationary_mean ** 2

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        return {"kind": "exp_ig", "kappa": self.kappa, "delta": self.delta, "gamma": self.gamma}

    @classmethod
    def from_dict(cls, d: dict) -> "VolatilityFieldSpec":
        return cls(**d)


@dataclass
class FieldPath:
    """One simulated path: ``values[j, l]`` is the field at ``(times[j], angles[l])``."""

    values: np.ndarray
    grid: SimulationGrid
    volatility: np.ndarray | None = None
    max_imag_residual: float = 0.0

    def __post_init__(self):
        if self.values.shape != (self.grid.J, self.grid.H):
            raise ValueError("field shape does not match the grid")
        if not np.all(np.isfinite(self.values)):
            raise FloatingPointError("non-finite field values")

    @property
    def times(self) -> np.ndarray:
        return self.grid.record_times()


# --- elementary steps --------------------------------------------------------------


def _phase_matrix(grid: SimulationGrid) -> np.ndarray:
    """``exp(i n h_l)`` with shape (M_cells, 2N + 1)."""
    return np.exp(1j * np.outer(grid.cell_angles, grid.harmonics))


@dataclass
class NoiseCache:
    """Per-step cell draws shared by every harmonic."""

    M_cells: int
    draws: dict = field(default_factory=dict)

    def cells(self, j: int, quad, grid: SimulationGrid, rng: np.random.Generator) -> np.ndarray:
        if grid.M_cells != self.M_cells:
            raise ConsistencyError("noise cache was built for a different number of cells")
        if j not in self.draws:
            self.draws[j] = _as_seed(quad).sample(grid.cell_area, rng, size=self.M_cells)
        return self.draws[j]


def noise_increment(quad, grid: SimulationGrid, n: int, j: int, cache: NoiseCache,
                    rng: np.random.Generator, sigma=1.0) -> complex:
    """``sum_l exp(i n h_l) sigma_l L(cell_l)`` for step ``j``, using draws shared through ``cache``."""
    cells = cache.cells(j, quad, grid, rng)
    return complex(np.sum(np.exp(1j * n * grid.cell_angles) * sigma * cells))


def evolve_ou(state: ComplexOUState, increment, z, dt: float) -> ComplexOUState:
    """``V <- exp(z dt) (V + increment)``; ``increment`` broadcasts against the lattice."""
    decay = np.exp(np.asarray(z) * dt)
    return ComplexOUState(decay * (state.values + increment), state.t_current + dt)


def transform_weights(kernel: Kernel, grid: SimulationGrid, orders: int | None = None) -> np.ndarray:
    """Quadrature weights ``w_i K^(z_i, h_l, n) / 2pi`` with shape (H, 2N+1, n_contour).

    Harmonics with ``|n| > orders`` get weight zero, which gives the
    ``orders``-truncated reconstruction on the same lattice.
    """
    y, w = grid.contour()
    z = grid.z_r + 1j * y
    h = grid.angles
    W = np.zeros((grid.H, 2 * grid.N + 1, y.size), dtype=complex)
    keep = grid.N if orders is None else min(orders, grid.N)
    for k, n in enumerate(grid.harmonics):
        if abs(n) <= keep:
            W[:, k, :] = kernel.laplace_fourier(z[None, :], h[:, None], int(n)) * w / TWO_PI
    return W


def reconstruct_field(state: ComplexOUState, kernel: Kernel | None = None, grid: SimulationGrid | None = None,
                      weights: np.ndarray | None = None, tol: float = REALNESS_TOL):
    """Field at the output angles and the relative imaginary residual.

    Returns ``(values, residual)`` with ``values`` of shape (paths, H).
    """
    if weights is None:
        weights = transform_weights(kernel, grid)
    P = state.values.shape[0]
    full = state.values.reshape(P, -1) @ weights.reshape(weights.shape[0], -1).T
    scale = np.max(np.abs(full.real), initial=0.0)
    resid = float(np.max(np.abs(full.imag), initial=0.0) / scale) if scale > 0 else 0.0
    if resid > tol:
        warnings.warn(f"imaginary residual {resid:.3g} exceeds {tol:g}", NumericalWarning, stacklevel=2)
    return full.real, resid


# --- volatility ---------------------------------------------------------------------


def _volatility_series(spec: VolatilityFieldSpec | None, dt: float, steps: int, n_paths: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Spatially uniform volatility at ``t_0 .. t_steps``; shape (paths, steps + 1)."""
    if spec is None or spec.kind == "constant":
        v = 1.0 if spec is None else spec.value
        return np.full((n_paths, steps + 1), v)
    k = spec.kappa
    a = math.exp(-k * dt)
    # weight making the stationary mean exact for any dt
    c = -math.expm1(-k * dt) / (k * dt) / TWO_PI
    seed = InverseGaussianSeed(spec.delta, spec.gamma)
    area = TWO_PI * dt
    pre = int(math.ceil(10.0 / (k * dt)))
    s = np.full(n_paths, spec.stationary_mean)
    for _ in range(pre):
        s = a * s + c * seed.sample(area, rng, size=n_paths)
    out = np.empty((n_paths, steps + 1))
    out[:, 0] = s
    for j in range(steps):
        s = a * s + c * seed.sample(area, rng, size=n_paths)
        out[:, j + 1] = s
    return out


def simulate_volatility(spec: VolatilityFieldSpec, grid: SimulationGrid, rng: np.random.Generator) -> np.ndarray:
    """J x H volatility matrix at the grid's recorded times (all columns equal)."""
    series = _volatility_series(spec, grid.dt, grid.J, 1, rng)[0, 1:]
    return np.repeat(series[:, None], grid.H, axis=1)


# --- engine -------------------------------------------------------------------------


@dataclass
class ChunkResult:
    index: int
    fields: np.ndarray  # (P, J, H)
    volatility: np.ndarray  # (P, J) at recorded times
    truncated: dict  # order -> (P, J, H)
    max_imag_residual: float


class FieldSimulator:
    """Vectorised simulator over batches of independent paths.

    Paths are grouped in chunks of fixed size; chunk ``i`` draws from the
    ``i``-th child of ``SeedSequence(grid.seed)``, so results do not depend
    on the number of worker threads.
    """

    def __init__(self, kernel: Kernel, quad, vol: VolatilityFieldSpec | None = None,
                 grid: SimulationGrid | None = None, drift: float = 0.0,
                 truncations: Sequence[int] = ()):
        seed = _as_seed(quad)
        if abs(seed.mean) > 1e-12:
            raise DomainError(
                "simulation needs a centred seed; centre it and pass the removed mean as drift"
            )
        self.kernel = kernel
        self.seed = seed
        self.vol = vol if vol is not None else VolatilityFieldSpec()
        self.grid = (grid or SimulationGrid()).resolve(kernel)
        self.drift = float(drift)
        g = self.grid
        y, _ = g.contour()
        self.decay = np.exp((g.z_r + 1j * y) * g.dt)
        self.phase = _phase_matrix(g)
        self.weights = transform_weights(kernel, g)
        self.truncations = tuple(int(n) for n in truncations)
        self.trunc_weights = {n: transform_weights(kernel, g, orders=n) for n in self.truncations}

    def _flat(self, W):
        return np.ascontiguousarray(W.reshape(W.shape[0], -1).T)

    def run_chunk(self, index: int, n_paths: int) -> ChunkResult:
        g = self.grid
        vol_ss, noise_ss = np.random.SeedSequence(g.seed, spawn_key=(index,)).spawn(2)
        vol_rng, rng = np.random.default_rng(vol_ss), np.random.default_rng(noise_ss)
        B = g.burn_in_steps()
        total = B + g.J
        sig = _volatility_series(self.vol, g.dt, total, n_paths, vol_rng)
        V = np.zeros((n_paths, 2 * g.N + 1, self.decay.size), dtype=complex)
        Wf = self._flat(self.weights)
        Wt = {n: self._flat(W) for n, W in self.trunc_weights.items()}
        fields = np.empty((n_paths, g.J, g.H))
        trunc = {n: np.empty((n_paths, g.J, g.H)) for n in Wt}
        area = g.cell_area
        resid = 0.0
        for j in range(total):
            cells = self.seed.sample(area, rng, size=(n_paths, g.M_cells))
            if self.drift:
                cells += self.drift * area
            inc = (cells * sig[:, j : j + 1]) @ self.phase  # (P, 2N+1)
            V += inc[:, :, None]
            V *= self.decay
            r = j - B
            if r >= 0:
                flat = V.reshape(n_paths, -1)
                full = flat @ Wf
                scale = np.max(np.abs(full.real), initial=0.0)
                if scale > 0:
                    resid = max(resid, float(np.max(np.abs(full.imag)) / scale))
                fields[:, r, :] = full.real
                for n, W in Wt.items():
                    trunc[n][:, r, :] = (flat @ W).real
        if resid > REALNESS_TOL:
            warnings.warn(f"imaginary residual {resid:.3g} exceeds {REALNESS_TOL:g}", NumericalWarning)
        if not np.all(np.isfinite(fields)):
            raise FloatingPointError("non-finite field values")
        return ChunkResult(index, fields, sig[:, B + 1 :], trunc, resid)

    def chunks(self, n_paths: int, threads: int = 1, chunk_size: int = DEFAULT_CHUNK) -> Iterator[ChunkResult]:
        """Yield chunk results in chunk order."""
        if n_paths < 1:
            raise DomainError("n_paths must be >= 1")
        sizes = [min(chunk_size, n_paths - s) for s in range(0, n_paths, chunk_size)]
        if threads <= 1:
            for i, m in enumerate(sizes):
                yield self.run_chunk(i, m)
            return
        with ThreadPoolExecutor(max_workers=threads) as ex:
            yield from ex.map(self.run_chunk, range(len(sizes)), sizes)


def simulate_paths(kernel: Kernel, quad, vol: VolatilityFieldSpec | None, grid: SimulationGrid,
                   n_paths: int, threads: int = 1, drift: float = 0.0,
                   chunk_size: int = DEFAULT_CHUNK) -> tuple[np.ndarray, np.ndarray]:
    """All paths stacked: fields (P, J, H) and volatility (P, J)."""
    sim = FieldSimulator(kernel, quad, vol, grid, drift=drift)
    parts = list(sim.chunks(n_paths, threads, chunk_size))
    return (np.concatenate([c.fields for c in parts]), np.concatenate([c.volatility for c in parts]))


def simulate_field(kernel: Kernel, quad, vol: VolatilityFieldSpec | None = None,
                   grid: SimulationGrid | None = None) -> FieldPath:
    """Single path; deterministic given ``grid.seed``."""
    sim = FieldSimulator(kernel, quad, vol, grid)
    res = sim.run_chunk(0, 1)
    volm = None
    if sim.vol.kind != "constant":
        volm = np.repeat(res.volatility[0][:, None], sim.grid.H, axis=1)
    return FieldPath(res.fields[0], sim.grid, volm, res.max_imag_residual)


# --- truncation bound ----------------------------------------------------------------


def truncation_error_bound(kernel: Kernel, quad, k_sigma: float, z_r: float, N: int,
                           grid: SimulationGrid | None = None, corrected: bool = False,
                           per_angle: bool = False):
    """Mean-square bound on the error from dropping harmonics ``|n| > N``.

    ``V[L'] k_sigma / (8 pi^2 |z_r|) * sum_{|n|>N} (int |K^(z_r + i y, h, n)| dy)^2``
    with the contour integral taken over the grid's truncated contour (over
    the whole line it diverges for ``alpha <= 1``).  With ``corrected=True``
    the constant is ``1 / (4 pi |z_r|)``, the value a direct second-moment
    computation for this reconstruction gives.  Returns the maximum over the
    grid's output angles, or the per-angle array if ``per_angle``.
    """
    if not z_r < 0:
        raise DomainError("z_r must be < 0")
    if k_sigma < 0:
        raise DomainError("k_sigma must be >= 0")
    grid = grid or SimulationGrid()
    if not math.isfinite(grid.z_range):
        raise DomainError("the contour integral of |K^| diverges over the whole line")
    if not -kernel.abscissa < z_r:
        raise DomainError("z_r beyond the Laplace abscissa")
    support = kernel.fourier_support
    if support is None:
        raise DomainError("kernel has no finite Fourier support; the tail sum cannot be bounded")
    y, w = grid.contour()
    z = z_r + 1j * y
    h = grid.angles
    tail = np.zeros(h.size)
    for n in support:
        if abs(n) > N:
            a = np.abs(kernel.laplace_fourier(z[None, :], h[:, None], int(n))) @ w
            tail += a ** 2
    const = 1.0 / (4.0 * math.pi) if corrected else 1.0 / (8.0 * math.pi ** 2)
    out = _as_seed(quad).variance * k_sigma * const / abs(z_r) * tail
    return out if per_angle else float(np.max(out))


# --- export -------------------------------------------------------------------------


def write_field_csv(path, fp: FieldPath) -> list[str]:
    """Write the field (and the volatility, if any, to ``<stem>_volatility.csv``)."""
    header = ["t"] + [f"theta_{l}" for l in range(1, fp.grid.H + 1)]
    written = [write_csv(path, header, ([t, *row] for t, row in zip(fp.times, fp.values)))]
    if fp.volatility is not None:
        stem, ext = os.path.splitext(os.fspath(path))
        vp = f"{stem}_volatility{ext or '.csv'}"
        written.append(write_csv(vp, header, ([t, *row] for t, row in zip(fp.times, fp.volatility))))
    return written
