"""Empirical verification of the functional inequalities behind the
contraction argument.

Each check evaluates a ratio of norms over a deterministic ensemble of
random band-limited fields and reports the per-sample ratios, their sup
and a pass flag against a configured bound. Sampling uses the
counter-based Philox generator keyed by (seed, sample index), and modes
are enumerated in a resolution-independent order, so an ensemble with a
fixed band carries identical Fourier content on every grid that
resolves it; refinement runs then probe quadrature, not luck.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Mapping, Sequence

import numpy as np

from .littlewood_paley import (
    BesovParams,
    besov_norm,
    build_partition,
    dyadic_block,
    lp_norm,
    sobolev_norm,
)
from .picard import BallSpec, picard_iterate
from .spectral import (
    GridSpec,
    RealField,
    VelocityLaw,
    compute_velocity,
    forward_transform,
    fractional_laplacian,
    gradient,
    inverse_transform,
    riesz_transform,
)
from .transport import Trajectory

__all__ = [
    "EnsembleSpec",
    "CheckReport",
    "PRNG_NAME",
    "sample_field",
    "check_hls",
    "check_cz",
    "check_bernstein",
    "check_embedding",
    "check_l2_conservation",
    "check_uniqueness_gronwall",
    "check_gradvel_bound",
    "default_embedding_chain",
    "hls_ratio",
    "cz_ratio",
    "gradvel_ratio",
]

PRNG_NAME = "philox4x64"


@dataclass(frozen=True)
class EnsembleSpec:
    """Deterministic random-field ensemble: count, seed, grid, spectrum."""

    count: int
    seed: int
    grid: GridSpec
    gamma: float = 2.5
    band: tuple[int, int] | None = None

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"ensemble count must be >= 1, got {self.count}")
        band = self.band if self.band is not None else (1, self.grid.n // 3)
        lo, hi = int(band[0]), int(band[1])
        if lo < 1 or hi < lo:
            raise ValueError(f"band must satisfy 1 <= lo <= hi, got {band}")
        if hi > self.grid.n // 2 - 1:
            raise ValueError(
                f"band upper limit {hi} exceeds resolvable modes of n = {self.grid.n}"
            )
        object.__setattr__(self, "band", (lo, hi))

    def fields(self) -> Iterator[RealField]:
        for i in range(self.count):
            yield sample_field(self.grid, self.seed, i, self.gamma, self.band)

    def describe(self) -> dict:
        return {
            "count": self.count,
            "seed": self.seed,
            "n": self.grid.n,
            "gamma": self.gamma,
            "band": list(self.band),
            "prng": PRNG_NAME,
        }


@lru_cache(maxsize=None)
def _band_modes(band_lo: int, band_hi: int) -> np.ndarray:
    """Half-plane integer modes with band_lo <= |k| <= band_hi, in a
    canonical order independent of any grid."""
    modes = []
    for k1 in range(0, band_hi + 1):
        for k2 in range(-band_hi, band_hi + 1):
            if k1 == 0 and k2 <= 0:
                continue
            r2 = k1 * k1 + k2 * k2
            if band_lo * band_lo <= r2 <= band_hi * band_hi:
                modes.append((k1, k2))
    out = np.asarray(modes, dtype=np.int64)
    out.flags.writeable = False
    return out


def sample_field(
    grid: GridSpec, seed: int, index: int, gamma: float, band: tuple[int, int]
) -> RealField:
    """Random smooth field: amplitudes |k|^(-gamma), independent uniform
    phases, Hermitian-symmetrized, mean zero."""
    modes = _band_modes(int(band[0]), int(band[1]))
    key = np.array([seed % 2**64, index % 2**64], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=len(modes))
    amps = (modes[:, 0].astype(float) ** 2 + modes[:, 1].astype(float) ** 2) ** (
        -gamma / 2.0
    )
    n = grid.n
    coeffs = np.zeros((n, n), dtype=np.complex128)
    c = 0.5 * amps * np.exp(1j * phases)
    i1 = modes[:, 0] % n
    i2 = modes[:, 1] % n
    coeffs[i1, i2] = c
    coeffs[(-modes[:, 0]) % n, (-modes[:, 1]) % n] = np.conj(c)
    return RealField(grid, np.real(np.fft.ifft2(coeffs * (n * n))))


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one inequality check over an ensemble."""

    name: str
    ratios: tuple[float, ...]
    sup_ratio: float
    bound: float
    passed: bool
    metadata: Mapping = field(default_factory=dict)

    @classmethod
    def from_ratios(
        cls, name: str, ratios: Sequence[float], bound: float = math.inf, **metadata
    ) -> "CheckReport":
        ratios = tuple(float(r) for r in ratios)
        sup = max(ratios) if ratios else 0.0
        return cls(
            name=name,
            ratios=ratios,
            sup_ratio=sup,
            bound=bound,
            passed=sup <= bound,
            metadata=dict(metadata),
        )


def hls_ratio(f: RealField, alpha: float) -> float:
    """Fractional-integration gain: smoothing by |k|^-(1-2a) from L^2
    into L^(1/a)."""
    smoothed = inverse_transform(
        fractional_laplacian(forward_transform(f), -(1.0 - 2.0 * alpha))
    )
    return lp_norm(smoothed, 1.0 / alpha) / lp_norm(f, 2.0)


def check_hls(ensemble: EnsembleSpec, alpha: float, bound: float = math.inf) -> CheckReport:
    """Fractional integration from L^2 to L^(1/a), 0 < a < 1/2 strictly."""
    if not 0.0 < alpha < 0.5:
        raise ValueError(
            f"alpha must lie strictly in (0, 1/2) (got {alpha}); at alpha = 1/2 the "
            "smoothing order vanishes and the Riesz-transform bound applies instead"
        )
    ratios = [hls_ratio(f, alpha) for f in ensemble.fields()]
    return CheckReport.from_ratios(
        "hls", ratios, bound, alpha=alpha, p=1.0 / alpha, **ensemble.describe()
    )


def cz_ratio(f: RealField, p: float) -> float:
    """Worse of the two Riesz-transform components in L^p."""
    F = forward_transform(f)
    r1 = inverse_transform(riesz_transform(F, 1))
    r2 = inverse_transform(riesz_transform(F, 2))
    denom = lp_norm(f, p)
    return max(lp_norm(r1, p), lp_norm(r2, p)) / denom


def check_cz(ensemble: EnsembleSpec, p: float, bound: float | None = None) -> CheckReport:
    """Riesz transforms on L^p for 1 < p < infinity."""
    if p <= 1.0 or math.isinf(p):
        raise ValueError(
            f"the Riesz-transform bound needs 1 < p < infinity, got p = {p}"
        )
    if bound is None:
        bound = 1.0 + 1e-12 if p == 2.0 else math.inf
    ratios = [cz_ratio(f, p) for f in ensemble.fields()]
    return CheckReport.from_ratios("cz", ratios, bound, p=p, **ensemble.describe())


def check_bernstein(
    grid: GridSpec,
    j_list: Sequence[int],
    p_pairs: Sequence[tuple[float, float]],
    ensemble: EnsembleSpec | None = None,
    bound: float = math.inf,
) -> CheckReport:
    """Two-sided derivative comparability on rings plus the L^a -> L^b
    gain on balls, for block-filtered random fields.

    The reported ratios are the ring ratios, their reciprocals and the
    ball ratios together, so a finite sup certifies all three families.
    """
    if ensemble is None:
        ensemble = EnsembleSpec(count=50, seed=2023, grid=grid)
    if ensemble.grid != grid:
        raise ValueError("ensemble grid must match the requested grid")
    partition = build_partition(grid)
    for j in j_list:
        if not 0 <= j <= partition.j_max:
            raise ValueError(f"block {j} not resolved on an n = {grid.n} grid")
    for a, b in p_pairs:
        if not (1.0 <= a <= b):
            raise ValueError(f"need 1 <= a <= b, got ({a}, {b})")
    ring, ring_inv, ball = [], [], []
    skipped = []
    for i, f in enumerate(ensemble.fields()):
        ref = lp_norm(f, 2.0)
        for j in j_list:
            fj = dyadic_block(f, j, partition)
            if lp_norm(fj, 2.0) <= 1e-13 * ref:
                skipped.append((i, j))
                continue
            G1, G2 = gradient(forward_transform(fj))
            g1 = inverse_transform(G1)
            g2 = inverse_transform(G2)
            for a, b in p_pairs:
                base = lp_norm(fj, a)
                grad_a = max(lp_norm(g1, a), lp_norm(g2, a))
                r = (grad_a / base) / 2.0**j
                ring.append(r)
                ring_inv.append(1.0 / r)
                gain = 2.0 ** (2.0 * j * (1.0 / a - 1.0 / b))
                ball.append(lp_norm(fj, b) / (gain * base))
    return CheckReport.from_ratios(
        "bernstein",
        ring + ring_inv + ball,
        bound,
        j_list=list(j_list),
        p_pairs=[list(pp) for pp in p_pairs],
        sup_ring=max(ring) if ring else 0.0,
        inf_ring=min(ring) if ring else 0.0,
        sup_ball=max(ball) if ball else 0.0,
        skipped_blocks=skipped,
        **ensemble.describe(),
    )


def _coerce_params(p) -> BesovParams:
    if isinstance(p, BesovParams):
        return p
    return BesovParams(*p)


def _embedding_valid(src: BesovParams, dst: BesovParams) -> bool:
    # composite of the two elementary embeddings in dimension 2
    if dst.p < src.p:
        return False
    s_crit = src.s - 2.0 * (1.0 / src.p - 1.0 / dst.p)
    if dst.s < s_crit:
        return True
    return dst.s == s_crit and dst.q >= src.q


def default_embedding_chain(s: float) -> list[tuple[BesovParams, BesovParams]]:
    """Sobolev into sup-norm scale: (s,2,2) -> (s-1,inf,2) -> (s-1,inf,inf)."""
    a = BesovParams(s, 2.0, 2.0)
    b = BesovParams(s - 1.0, math.inf, 2.0)
    c = BesovParams(s - 1.0, math.inf, math.inf)
    return [(a, b), (b, c)]


def check_embedding(
    ensemble: EnsembleSpec,
    chains: Sequence[tuple],
    bound: float = math.inf,
) -> CheckReport:
    """Ratios target-norm / source-norm for admissible embedding steps."""
    parsed = []
    for src, dst in chains:
        src = _coerce_params(src)
        dst = _coerce_params(dst)
        if not _embedding_valid(src, dst):
            raise ValueError(
                f"no continuous embedding from (s={src.s}, p={src.p}, q={src.q}) "
                f"into (s={dst.s}, p={dst.p}, q={dst.q})"
            )
        parsed.append((src, dst))
    partition = build_partition(ensemble.grid)
    ratios = []
    per_chain: dict[str, float] = {}
    for f in ensemble.fields():
        for src, dst in parsed:
            r = besov_norm(f, dst, partition) / besov_norm(f, src, partition)
            ratios.append(r)
            key = f"{src.s},{src.p},{src.q}->{dst.s},{dst.p},{dst.q}"
            per_chain[key] = max(per_chain.get(key, 0.0), r)
    return CheckReport.from_ratios(
        "embedding", ratios, bound, chain_sups=per_chain, **ensemble.describe()
    )


def check_l2_conservation(
    traj: Trajectory, law: VelocityLaw, bound: float | None = None
) -> CheckReport:
    """Relative drift of the L^2 norm along a trajectory.

    Divergence-free transport conserves it, so the PERP law gets a tight
    default bound; the GRAD law only records the drift.
    """
    l0 = lp_norm(traj.fields[0], 2.0)
    if l0 == 0.0:
        raise ValueError("initial field has zero L^2 norm")
    if bound is None:
        bound = 1e-8 if law is VelocityLaw.PERP else math.inf
    drifts = [abs(lp_norm(f, 2.0) - l0) / l0 for f in traj.fields]
    return CheckReport.from_ratios(
        "l2-conservation", drifts, bound, law=law.value, horizon=traj.horizon
    )


def check_uniqueness_gronwall(
    theta0: RealField,
    delta: RealField,
    alpha: float,
    law: VelocityLaw,
    ball: BallSpec,
    dt: float | None = None,
    tol: float | None = None,
    n_nodes: int = 32,
) -> CheckReport:
    """Continuous dependence on the initial datum.

    Two fixed points are computed from theta0 and theta0 + delta on the
    same ball; the L^2 separation D(t) is fitted against the exponential
    envelope exp(R * integral of the accumulated H^s norms), using the
    base norm for the divergence-free law and the sum of both for the
    compressible one. The reported sup is the fitted rate R.
    """
    if delta.grid != theta0.grid:
        raise ValueError("perturbation grid does not match")
    base_l2 = lp_norm(theta0, 2.0)
    if base_l2 == 0.0:
        raise ValueError("initial datum must be nonzero")
    if lp_norm(delta, 2.0) > 0.01 * base_l2:
        raise ValueError("perturbation too large: need ||delta|| <= 0.01 ||theta0||")
    perturbed = RealField(theta0.grid, theta0.values + delta.values)
    traj1, rep1 = picard_iterate(
        theta0, alpha, law, ball, tol=tol, dt=dt, n_nodes=n_nodes
    )
    traj2, rep2 = picard_iterate(
        perturbed, alpha, law, ball, tol=tol, dt=dt, n_nodes=n_nodes
    )
    if not (rep1.converged and rep2.converged):
        raise RuntimeError(
            "fixed-point iteration did not converge for the "
            f"{'base' if not rep1.converged else 'perturbed'} datum: "
            f"{rep1.message or rep2.message}"
        )
    times = traj1.times
    D = np.array(
        [
            lp_norm(RealField(theta0.grid, f1.values - f2.values), 2.0)
            for f1, f2 in zip(traj1.fields, traj2.fields)
        ]
    )
    if law is VelocityLaw.PERP:
        H = np.array([sobolev_norm(f, ball.s) for f in traj1.fields])
    else:
        H = np.array(
            [
                sobolev_norm(f1, ball.s) + sobolev_norm(f2, ball.s)
                for f1, f2 in zip(traj1.fields, traj2.fields)
            ]
        )
    integrated = np.concatenate(
        [[0.0], np.cumsum(0.5 * (H[1:] + H[:-1]) * np.diff(times))]
    )
    floor = 1e-14
    meta = dict(
        law=law.value,
        alpha=alpha,
        s=ball.s,
        horizon=ball.horizon,
        distances=[float(d) for d in D],
        times=[float(t) for t in times],
        integrated_norms=[float(v) for v in integrated],
        sup_distance=float(np.max(D)),
        iterations=(rep1.iterations, rep2.iterations),
    )
    if D[0] <= floor:
        meta["note"] = "identical initial data; separation stays at solver tolerance"
        return CheckReport.from_ratios("uniqueness-gronwall", [], math.inf, **meta)
    node_rates = [
        float(np.log(D[i] / D[0]) / integrated[i])
        for i in range(1, len(D))
        if integrated[i] > 0.0
    ]
    return CheckReport.from_ratios("uniqueness-gronwall", node_rates, math.inf, **meta)


def gradvel_ratio(f: RealField, alpha: float, s: float) -> float:
    """Sup norm of the compressible velocity gradient against ||f||_{H^s}."""
    u = compute_velocity(f, alpha, VelocityLaw.GRAD)
    worst = 0.0
    for comp in (u.u1, u.u2):
        G1, G2 = gradient(forward_transform(comp))
        worst = max(
            worst,
            lp_norm(inverse_transform(G1), math.inf),
            lp_norm(inverse_transform(G2), math.inf),
        )
    return worst / sobolev_norm(f, s)


def check_gradvel_bound(
    ensemble: EnsembleSpec, alpha: float, s: float, bound: float = math.inf
) -> CheckReport:
    """Velocity-gradient sup norm controlled by the scalar's H^s norm
    (the extra term the compressible contraction estimate needs)."""
    if not s > 1.0 + 2.0 * alpha:
        raise ValueError(f"need s > 1 + 2 alpha = {1.0 + 2.0 * alpha}, got s = {s}")
    ratios = [gradvel_ratio(f, alpha, s) for f in ensemble.fields()]
    return CheckReport.from_ratios(
        "gradvel", ratios, bound, alpha=alpha, s=s, **ensemble.describe()
    )
