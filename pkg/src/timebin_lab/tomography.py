"""Maximum-likelihood tomography of time-bin qubits from HOM anti-bunching counts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.optimize import minimize

from .core import (
    MINUS,
    MINUS_I,
    PLUS,
    PLUS_I,
    T0,
    T1,
    DensityMatrix,
    DimensionError,
    PureState,
    StateLike,
    as_density,
    convex_mixture,
    fidelity,
    random_pure_state,
)
from .hom import CountRecord, HomSetting, NoiseModel, antibunching_probability, simulate_counts

Normalization = Literal["a", "poisson"]

GRAD_TOL = 1e-9
STEP_TOL = 1e-12
N_RESTARTS = 5
_ORTHO_TOL = 1e-9


class TomographyError(ValueError):
    pass


def mub_states() -> list[PureState]:
    """The six qubit MUB states in the order t0, t1, +, -, +i, -i."""
    return [T0, T1, PLUS, MINUS, PLUS_I, MINUS_I]


@dataclass(frozen=True, eq=False)
class MeasurementSchedule:
    settings: tuple[HomSetting, ...]

    def __post_init__(self) -> None:
        settings = tuple(self.settings)
        if not settings:
            raise TomographyError("schedule has no settings")
        dims = {s.reference.dim for s in settings}
        if len(dims) != 1:
            raise DimensionError("schedule references have different dimensions")
        object.__setattr__(self, "settings", settings)

    @classmethod
    def mub(cls, noise: NoiseModel = NoiseModel()) -> "MeasurementSchedule":
        return cls(tuple(HomSetting(ref, 0.0, noise) for ref in mub_states()))

    @property
    def dim(self) -> int:
        return self.settings[0].reference.dim

    def is_informationally_complete(self) -> bool:
        d = self.dim
        projectors = np.array([s.reference.projector().ravel() for s in self.settings])
        return np.linalg.matrix_rank(projectors, tol=1e-9) >= d * d

    def orthogonal_pairs(self) -> list[tuple[int, int]]:
        """Pair every setting with an orthogonal partner (qubit references only)."""
        if self.dim != 2:
            raise TomographyError("orthogonal-pair normalization needs qubit references")
        free = list(range(len(self.settings)))
        pairs = []
        while free:
            i = free.pop(0)
            ref_i = self.settings[i].reference.amplitudes
            match = next(
                (j for j in free if abs(np.vdot(ref_i, self.settings[j].reference.amplitudes)) < _ORTHO_TOL),
                None,
            )
            if match is None:
                raise TomographyError(f"setting {i} has no orthogonal partner in the schedule")
            free.remove(match)
            pairs.append((i, match))
        return pairs


@dataclass(frozen=True, eq=False)
class TomographyResult:
    rho: DensityMatrix
    fidelity_to_target: float
    log_likelihood: float
    iterations: int
    converged: bool
    target: DensityMatrix | None = field(default=None, repr=False)


def born_probabilities(rho: StateLike, schedule: MeasurementSchedule) -> list[float]:
    rho = as_density(rho)
    if rho.dim != schedule.dim:
        raise DimensionError(f"state dim {rho.dim} != schedule dim {schedule.dim}")
    return [antibunching_probability(rho, s.reference, s.noise.visibility) for s in schedule.settings]


# -- parametrization ------------------------------------------------------


def _params_to_t(x: np.ndarray, d: int) -> np.ndarray:
    t = np.zeros((d, d), dtype=np.complex128)
    t[np.diag_indices(d)] = x[:d]
    rows, cols = np.tril_indices(d, -1)
    n_off = rows.size
    t[rows, cols] = x[d : d + n_off] + 1j * x[d + n_off :]
    return t


def _t_to_params(t: np.ndarray) -> np.ndarray:
    d = t.shape[0]
    rows, cols = np.tril_indices(d, -1)
    off = t[rows, cols]
    return np.concatenate([np.real(np.diag(t)), off.real, off.imag])


def _rho_from_t(t: np.ndarray) -> np.ndarray:
    a = t.conj().T @ t
    return a / np.trace(a).real


def _params_from_rho(rho: np.ndarray) -> np.ndarray:
    # rho = T^dag T with T lower triangular: T^dag is the Cholesky factor of reversed-index rho
    d = rho.shape[0]
    reg = rho + 1e-12 * np.eye(d)
    perm = np.arange(d)[::-1]
    lower = np.linalg.cholesky(reg[np.ix_(perm, perm)])
    # rho = P L L^dag P = (P L P)(P L P)^dag; T = (P L P)^dag is lower triangular
    t = (lower[np.ix_(perm, perm)]).conj().T
    return _t_to_params(t)


# -- likelihoods --------------------------------------------------------------


class _Likelihood:
    """Negative log-likelihood in rho and its matrix gradient G (df = Tr[G d rho])."""

    def __init__(self, records: Sequence[CountRecord], schedule: MeasurementSchedule, normalization: Normalization):
        self.normalization = normalization
        self.projectors = np.array([s.reference.projector() for s in schedule.settings])
        self.vis = np.array([s.noise.visibility for s in schedule.settings])
        self.acc = np.array([s.noise.accidental_rate for s in schedule.settings])
        self.mean = np.array([s.noise.mean_counts for s in schedule.settings])
        self.counts = np.array([r.antibunching for r in records], dtype=float)
        self.scale = max(self.counts.sum(), 1.0)
        if normalization == "a":
            pairs = schedule.orthogonal_pairs()
            self.first = np.array([i for i, _ in pairs])
            self.second = np.array([j for _, j in pairs])

    def _overlaps(self, rho: np.ndarray) -> np.ndarray:
        return np.real(np.einsum("kij,ji->k", self.projectors, rho))

    def value_and_grad(self, rho: np.ndarray) -> tuple[float, np.ndarray]:
        q = self._overlaps(rho)
        p = (1.0 - self.vis * q) / 2.0
        if self.normalization == "poisson":
            mu = np.maximum(self.mean * (p + self.acc), 1e-300)
            f = float(np.sum(mu - self.counts * np.log(mu)))
            dmu = self.mean * (-self.vis / 2.0)
            coeff = (1.0 - self.counts / mu) * dmu
            grad = np.einsum("k,kij->ij", coeff, self.projectors)
            return f, grad
        i, j = self.first, self.second
        num = p[i] + self.acc[i]
        den = p[i] + p[j] + self.acc[i] + self.acc[j]
        pi = np.clip(num / den, 1e-300, 1 - 1e-16)
        ci, cj = self.counts[i], self.counts[j]
        f = float(-np.sum(ci * np.log(pi) + cj * np.log1p(-pi)))
        dpi = -ci / pi + cj / (1.0 - pi)
        # d pi = (d num * den - num * d den) / den^2 ; dp_k = -V_k/2 P_k
        dnum = -self.vis[i] / 2.0
        dden_i = -self.vis[i] / 2.0
        dden_j = -self.vis[j] / 2.0
        coeff_i = dpi * (dnum * den - num * dden_i) / den**2
        coeff_j = dpi * (-num * dden_j) / den**2
        grad = np.einsum("k,kij->ij", coeff_i, self.projectors[i]) + np.einsum(
            "k,kij->ij", coeff_j, self.projectors[j]
        )
        return f, grad

    def objective(self, x: np.ndarray, d: int) -> tuple[float, np.ndarray]:
        t = _params_to_t(x, d)
        a = t.conj().T @ t
        tr = np.trace(a).real
        rho = a / tr
        f, g = self.value_and_grad(rho)
        g = (g + g.conj().T) / 2.0
        gp = (g - np.trace(g @ rho).real * np.eye(d)) / tr
        m = gp @ t.conj().T  # df = 2 Re Tr[gp T^dag dT] = 2 Re sum_kl m_lk dT_kl
        dt = 2.0 * m.T  # d/dIm T_kl = 2 Re[i m_lk] = -2 Im m_lk
        rows, cols = np.tril_indices(d, -1)
        grad = np.concatenate([np.real(np.diag(dt)), dt[rows, cols].real, -dt[rows, cols].imag])
        return f / self.scale, grad / self.scale


def _fit_once(lik: _Likelihood, x0: np.ndarray, d: int) -> tuple[np.ndarray, float, int, bool]:
    res = minimize(
        lik.objective,
        x0,
        args=(d,),
        jac=True,
        method="BFGS",
        options={"gtol": GRAD_TOL, "maxiter": 5000, "xrtol": STEP_TOL},
    )
    _, g = lik.objective(res.x, d)
    converged = bool(res.success) or float(np.linalg.norm(g)) < GRAD_TOL
    return res.x, float(res.fun), int(res.nit), converged


def _polish(lik: _Likelihood, rho: np.ndarray, iters: int = 200) -> np.ndarray:
    # Diluted R rho R iteration: monotone on the likelihood, handles rank-deficient optima
    # where the Cholesky parametrization flattens out.
    best_f, _ = lik.value_and_grad(rho)
    for _ in range(iters):
        _, g = lik.value_and_grad(rho)
        g = (g + g.conj().T) / 2.0
        r = -g + np.trace(g @ rho).real * np.eye(rho.shape[0])
        step = 1.0
        improved = False
        while step > 1e-8:
            m = np.eye(rho.shape[0]) + step * r
            cand = m @ rho @ m.conj().T
            cand = cand / np.trace(cand).real
            cand = (cand + cand.conj().T) / 2.0
            f, _ = lik.value_and_grad(cand)
            if f < best_f - 1e-15 * max(1.0, abs(best_f)):
                rho, best_f, improved = cand, f, True
                break
            step /= 2.0
        if not improved:
            break
    return rho


def _project_psd(m: np.ndarray) -> np.ndarray:
    m = (m + m.conj().T) / 2.0
    vals, vecs = np.linalg.eigh(m)
    vals = np.clip(vals, 0.0, None)
    out = (vecs * vals) @ vecs.conj().T
    return out / np.trace(out).real


def mle_reconstruct(
    records: Sequence[CountRecord],
    schedule: MeasurementSchedule,
    normalization: Normalization = "a",
    target: StateLike | None = None,
    seed: int = 0,
) -> TomographyResult:
    """Maximum-likelihood density matrix for the observed anti-bunching counts.

    ``normalization="a"`` profiles out the unknown photon flux of every
    orthogonal reference pair (the Poisson likelihood then reduces to a
    binomial split of each pair's counts), so ``mean_counts`` is not needed.
    ``"poisson"`` treats ``mean_counts`` as the known flux per setting.
    """
    if len(records) != len(schedule.settings):
        raise TomographyError(f"{len(records)} records for {len(schedule.settings)} settings")
    if not schedule.is_informationally_complete():
        raise TomographyError("schedule is not informationally complete")
    if sum(r.antibunching for r in records) == 0:
        raise TomographyError("all anti-bunching counts are zero")
    if normalization not in ("a", "poisson"):
        raise ValueError(f"unknown normalization {normalization!r}")
    d = schedule.dim
    lik = _Likelihood(records, schedule, normalization)

    x0 = _params_from_rho(np.eye(d) / d)
    x, f, nit, converged = _fit_once(lik, x0, d)
    if not converged:
        rng = np.random.default_rng(seed)
        for _ in range(N_RESTARTS):
            start = rng.normal(size=x0.size)
            xr, fr, nr, cr = _fit_once(lik, start, d)
            nit += nr
            if fr < f:
                x, f = xr, fr
            converged = converged or cr
    rho = _polish(lik, _rho_from_t(_params_to_t(x, d)))
    rho = _project_psd(rho)
    f_final, _ = lik.value_and_grad(rho)
    rho_dm = DensityMatrix(rho)
    target_dm = as_density(target) if target is not None else None
    fid = fidelity(target_dm, rho_dm) if target_dm is not None else float("nan")
    return TomographyResult(rho_dm, fid, -f_final, nit, converged, target_dm)


def log_likelihood(
    rho: StateLike, records: Sequence[CountRecord], schedule: MeasurementSchedule, normalization: Normalization = "a"
) -> float:
    """Log-likelihood (up to rho-independent constants) used by ``mle_reconstruct``."""
    f, _ = _Likelihood(records, schedule, normalization).value_and_grad(as_density(rho).matrix)
    return -f


def simulate_records(true_state: StateLike, schedule: MeasurementSchedule, seed: int) -> list[CountRecord]:
    """Seeded counts for every setting; setting i uses seed + i."""
    probs = born_probabilities(true_state, schedule)
    return [simulate_counts(p, s.noise, seed + i, s) for i, (p, s) in enumerate(zip(probs, schedule.settings))]


def expected_records(true_state: StateLike, schedule: MeasurementSchedule) -> list[CountRecord]:
    """Noiseless counts: expected values rounded to integers."""
    probs = born_probabilities(true_state, schedule)
    out = []
    for p, s in zip(probs, schedule.settings):
        n, acc = s.noise.mean_counts, s.noise.accidental_rate
        out.append(CountRecord(int(round(n * (p + acc))), int(round(n * (1 - p + acc))), s))
    return out


def run_tomography(
    true_state: StateLike, schedule: MeasurementSchedule, seed: int, normalization: Normalization = "a"
) -> TomographyResult:
    records = simulate_records(true_state, schedule, seed)
    return mle_reconstruct(records, schedule, normalization, target=true_state, seed=seed)


def state_suite(seed: int = 2024) -> list[tuple[str, DensityMatrix]]:
    """The 48-state tomography suite: 6 MUB + 9 random pure states, then 33 two-state mixtures."""
    rng = np.random.default_rng(seed)
    names = ["t0", "t1", "plus", "minus", "plus_i", "minus_i"]
    suite = [(f"pure_{n}", s.to_density()) for n, s in zip(names, mub_states())]
    for k in range(9):
        suite.append((f"pure_random_{k}", random_pure_state(2, rng).to_density()))
    for k in range(33):
        a = random_pure_state(2, rng)
        b = random_pure_state(2, rng)
        w = float(rng.uniform(0.1, 0.9))
        suite.append((f"mixed_{k}", convex_mixture([(a, w), (b, 1.0 - w)])))
    return suite


def infidelity_curve(
    counts: Sequence[float], n_states: int, visibility: float = 1.0, seed: int = 0
) -> list[float]:
    """Mean reconstruction infidelity over seeded random pure targets, one entry per count level."""
    out = []
    for n in counts:
        schedule = MeasurementSchedule.mub(NoiseModel(visibility=visibility, mean_counts=n))
        infid = []
        for k in range(n_states):
            psi = random_pure_state(2, seed + k)
            infid.append(1.0 - run_tomography(psi, schedule, seed + 1000 * k).fidelity_to_target)
        out.append(float(np.mean(infid)))
    return out


__all__ = [
    "MeasurementSchedule",
    "TomographyError",
    "TomographyResult",
    "born_probabilities",
    "expected_records",
    "infidelity_curve",
    "log_likelihood",
    "mle_reconstruct",
    "mub_states",
    "run_tomography",
    "simulate_records",
    "state_suite",
]

