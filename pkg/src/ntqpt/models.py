"""Collective two-level models: Hamiltonians, parity, order parameters and
coherent initial states.

Bases
-----
* BH: ``|n_L = n>``, ``n = 0..N``.
* LMG: ``|n_t = n>``, ``n = 0..N``.
* Dicke: ``|m> (x) |k>`` with ``m = -J..J`` outer and ``k = 0..n_max`` inner,
  flat index ``(m + J) * (n_max + 1) + k``.

Sign conventions (hbar = 1)
---------------------------
BH    H = -J (aL+ aR + aR+ aL) - (lam / 2N) [nL(nL-1) + nR(nR-1)]
LMG   H = lam t+t - ((1 - lam) / N) (s+t + t+s)^2
Dicke H = w0 Jz + w a+a + (2 lam / sqrt N)(a+ + a) Jx

With these signs the ESQPT sits at ``N (J - lam/4)`` for BH with
``lam < -2J`` (ordered doublets at the top of the spectrum), at ``0`` for LMG
with ``lam < 4/5`` and at ``-w0 N / 2`` for Dicke with ``lam > sqrt(w w0)/2``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg, optimize, stats
from scipy.special import gammaln, xlogy

from .banded import BandedSymmetricMatrix
from .errors import ConfigurationError, PhaseError, TruncationError

TAIL_TOLERANCE = 1e-10
PARAM_TOLERANCE = 1e-10


class Model(str, enum.Enum):
    BH = "BH"
    LMG = "LMG"
    DICKE = "Dicke"

    @classmethod
    def parse(cls, name) -> "Model":
        if isinstance(name, cls):
            return name
        for m in cls:
            if str(name).lower() == m.value.lower():
                return m
        raise ConfigurationError(f"unknown model {name!r}; expected one of BH, LMG, Dicke")


@dataclass(frozen=True)
class ModelSpec:
    """Model choice, couplings and size. ``n_max`` is the Dicke photon cutoff."""

    model: Model
    N: int
    lam: float
    j_hop: float = 1.0
    omega: float = 1.0
    omega0: float = 1.0
    n_max: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "model", Model.parse(self.model))
        if int(self.N) != self.N or self.N < 1:
            raise ConfigurationError(f"N must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "lam", float(self.lam))
        if self.model is Model.DICKE:
            if self.n_max is None:
                object.__setattr__(self, "n_max", 4 * self.N)
            if int(self.n_max) != self.n_max or self.n_max < 1:
                raise ConfigurationError(f"n_max must be a positive integer, got {self.n_max!r}")
            object.__setattr__(self, "n_max", int(self.n_max))
        elif self.n_max is not None:
            raise ConfigurationError(f"n_max is a Dicke-only truncation, not valid for {self.model.value}")

    @property
    def dim(self) -> int:
        if self.model is Model.DICKE:
            return (self.N + 1) * (self.n_max + 1)
        return self.N + 1

    @property
    def basis(self) -> str:
        return {Model.BH: "n_L", Model.LMG: "n_t", Model.DICKE: "m,k"}[self.model]

    def with_lambda(self, lam: float) -> "ModelSpec":
        return replace(self, lam=float(lam))

    def with_n_max(self, n_max: int) -> "ModelSpec":
        return replace(self, n_max=int(n_max))

    def key(self) -> dict:
        """Canonical field dictionary, used for hashing and cache headers."""
        out = {"model": self.model.value, "N": self.N, "lam": self.lam}
        if self.model is Model.BH:
            out["j_hop"] = self.j_hop
        if self.model is Model.DICKE:
            out.update(omega=self.omega, omega0=self.omega0, n_max=self.n_max)
        return out


@dataclass(frozen=True)
class CoherentParams:
    """BH ``(gamma0, gamma1)``, LMG ``(beta,)``, Dicke ``(mu, nu)``."""

    model: Model
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "model", Model.parse(self.model))
        vals = tuple(float(v) for v in self.values)
        expected = {Model.BH: 2, Model.LMG: 1, Model.DICKE: 2}[self.model]
        if len(vals) != expected:
            raise ConfigurationError(f"{self.model.value} coherent state takes {expected} parameters")
        if not all(math.isfinite(v) for v in vals):
            raise ConfigurationError("coherent parameters must be finite reals")
        if self.model is Model.BH and abs(vals[0] ** 2 + vals[1] ** 2 - 1.0) > 1e-12:
            raise ConfigurationError("BH coherent state needs gamma0^2 + gamma1^2 = 1")
        object.__setattr__(self, "values", vals)

    @classmethod
    def bh(cls, gamma0, gamma1):
        return cls(Model.BH, (gamma0, gamma1))

    @classmethod
    def lmg(cls, beta):
        return cls(Model.LMG, (beta,))

    @classmethod
    def dicke(cls, mu, nu):
        return cls(Model.DICKE, (mu, nu))

    def mirrored(self) -> "CoherentParams":
        """Parameters of the parity image ``S |psi>``."""
        v = self.values
        if self.model is Model.BH:
            return CoherentParams.bh(v[1], v[0])
        return CoherentParams(self.model, tuple(-x for x in v))

    def as_dict(self) -> dict:
        names = {Model.BH: ("gamma0", "gamma1"), Model.LMG: ("beta_c",), Model.DICKE: ("mu", "nu_c")}
        return dict(zip(names[self.model], self.values))


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    basis: str
    trunc_deficit: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=float)
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)
        if abs(np.linalg.norm(a) - 1.0) > 1e-10:
            raise ValueError("state vector is not normalized")

    def __len__(self):
        return len(self.amplitudes)


# --------------------------------------------------------------------------
# operators


def _jx_elements(N: int) -> np.ndarray:
    """``<m+1|Jx|m>`` for ``m = -J .. J-1``."""
    J = N / 2
    m = np.arange(N) - J
    return 0.5 * np.sqrt(J * (J + 1) - m * (m + 1))


def build_hamiltonian(spec: ModelSpec) -> BandedSymmetricMatrix:
    N, lam = spec.N, spec.lam
    if spec.model is Model.BH:
        n = np.arange(N + 1, dtype=float)
        diag = -(lam / (2 * N)) * (n * (n - 1) + (N - n) * (N - n - 1))
        hop = -spec.j_hop * np.sqrt((n[:-1] + 1) * (N - n[:-1]))
        return BandedSymmetricMatrix(N + 1, {0: diag, 1: hop})
    if spec.model is Model.LMG:
        n = np.arange(N + 1, dtype=float)
        g = (1.0 - lam) / N
        diag = lam * n - g * ((n + 1) * (N - n) + n * (N - n + 1))
        diags = {0: diag}
        if N >= 2:
            m = n[:-2]
            diags[2] = -g * np.sqrt((m + 1) * (m + 2) * (N - m) * (N - m - 1))
        return BandedSymmetricMatrix(N + 1, diags)

    K = spec.n_max + 1
    dim = spec.dim
    a, k = np.divmod(np.arange(dim), K)
    m = a - N / 2
    diag = spec.omega0 * m + spec.omega * k
    g = 2 * lam / math.sqrt(N)
    jx = np.append(_jx_elements(N), 0.0)[a]
    # (m, k) -> (m+1, k+1)
    up = np.zeros(dim - K - 1)
    ok = (a[: dim - K - 1] < N) & (k[: dim - K - 1] < spec.n_max)
    rows = np.nonzero(ok)[0]
    up[rows] = g * jx[rows] * np.sqrt(k[rows] + 1)
    # (m, k) -> (m+1, k-1)
    down = np.zeros(dim - K + 1)
    ok = (a[: dim - K + 1] < N) & (k[: dim - K + 1] >= 1)
    rows = np.nonzero(ok)[0]
    down[rows] = g * jx[rows] * np.sqrt(k[rows])
    return BandedSymmetricMatrix(dim, {0: diag, K - 1: down, K + 1: up})


def parity_labels(spec: ModelSpec) -> np.ndarray | None:
    """Diagonal of S where S is diagonal in the model basis (LMG, Dicke)."""
    if spec.model is Model.LMG:
        return np.where(np.arange(spec.N + 1) % 2 == 0, 1.0, -1.0)
    if spec.model is Model.DICKE:
        a, k = np.divmod(np.arange(spec.dim), spec.n_max + 1)
        return np.where((a + k) % 2 == 0, 1.0, -1.0)
    return None


def build_parity(spec: ModelSpec) -> BandedSymmetricMatrix:
    """Parity operator S. For BH this is the L<->R swap; its banded storage is
    O(N^2), so the spectral code never builds it."""
    labels = parity_labels(spec)
    if labels is not None:
        return BandedSymmetricMatrix(spec.dim, {0: labels})
    N = spec.N
    diags = {}
    for n in range((N + 2) // 2):
        off = N - 2 * n
        v = np.zeros(N + 1 - off)
        v[n] = 1.0
        diags[off] = v
    return BandedSymmetricMatrix(N + 1, diags)


def build_order_parameter(spec: ModelSpec) -> BandedSymmetricMatrix:
    """Z = nL - nR (BH), s+t + t+s (LMG), Jx (Dicke)."""
    N = spec.N
    if spec.model is Model.BH:
        return BandedSymmetricMatrix(N + 1, {0: 2.0 * np.arange(N + 1) - N})
    if spec.model is Model.LMG:
        n = np.arange(N, dtype=float)
        return BandedSymmetricMatrix(N + 1, {1: np.sqrt((n + 1) * (N - n))})
    K = spec.n_max + 1
    a = np.arange(spec.dim - K) // K
    return BandedSymmetricMatrix(spec.dim, {K: _jx_elements(N)[a]})


# --------------------------------------------------------------------------
# coherent states


def _binomial_amplitudes(N: int, a: float, b: float) -> np.ndarray:
    """Normalized ``sqrt(C(N, n)) a^n b^(N-n)``, evaluated in log space."""
    n = np.arange(N + 1, dtype=float)
    logc = 0.5 * (gammaln(N + 1) - gammaln(n + 1) - gammaln(N - n + 1))
    with np.errstate(divide="ignore"):
        logs = logc + xlogy(n, abs(a)) + xlogy(N - n, abs(b))
    amp = np.exp(logs - logs.max())
    if a < 0:
        amp[1::2] *= -1
    if b < 0:
        amp[(N - np.arange(N + 1)) % 2 == 1] *= -1
    return amp / np.linalg.norm(amp)


def _photon_amplitudes(nu: float, n_max: int) -> tuple[np.ndarray, float]:
    k = np.arange(n_max + 1, dtype=float)
    logs = xlogy(k, abs(nu)) - 0.5 * gammaln(k + 1)
    amp = np.exp(logs - logs.max())
    if nu < 0:
        amp[1::2] *= -1
    tail = float(stats.poisson.sf(n_max, nu * nu)) if nu else 0.0
    return amp / np.linalg.norm(amp), tail


def build_coherent_state(spec: ModelSpec, p: CoherentParams, *, check_truncation: bool = True) -> StateVector:
    """Coherent state projected on the N-particle sector (photon-truncated for Dicke)."""
    if p.model is not spec.model:
        raise ConfigurationError(f"{p.model.value} parameters for a {spec.model.value} model")
    if spec.model is Model.BH:
        g0, g1 = p.values
        return StateVector(_binomial_amplitudes(spec.N, g0, g1), spec.basis)
    if spec.model is Model.LMG:
        return StateVector(_binomial_amplitudes(spec.N, p.values[0], 1.0), spec.basis)
    mu, nu = p.values
    spin = _binomial_amplitudes(spec.N, mu, 1.0)
    photon, tail = _photon_amplitudes(nu, spec.n_max)
    if check_truncation and tail > TAIL_TOLERANCE:
        raise TruncationError(f"n_max={spec.n_max} too small for nu_c={nu:.6g}", tail)
    return StateVector(np.kron(spin, photon), spec.basis, trunc_deficit=tail)


# --------------------------------------------------------------------------
# semiclassics


def semiclassical_critical_coupling(spec: ModelSpec) -> float:
    """Coupling beyond which the ground state breaks parity."""
    if spec.model is Model.BH:
        return 2.0 * spec.j_hop
    if spec.model is Model.LMG:
        return 0.8
    return 0.5 * math.sqrt(spec.omega * spec.omega0)


def ground_state_broken(spec: ModelSpec) -> bool:
    lc = semiclassical_critical_coupling(spec)
    if spec.model is Model.LMG:
        return spec.lam < lc
    return spec.lam > lc


def ordered_side(spec: ModelSpec) -> str | None:
    """Where the parity doublets live relative to E_c: 'below', 'above' or None."""
    if spec.model is Model.BH:
        if spec.lam > 2 * spec.j_hop:
            return "below"
        if spec.lam < -2 * spec.j_hop:
            return "above"
        return None
    return "below" if ground_state_broken(spec) else None


def semiclassical_critical_energy(spec: ModelSpec, per_particle: bool = False) -> float:
    """Absolute ESQPT energy from the mean-field saddle point.

    BH: ``N (J - lam/4)`` for repulsive ``lam < 0`` and ``-N (J + lam/4)`` for
    attractive ``lam > 0``. LMG: 0. Dicke: ``-w0 N / 2``.
    """
    if spec.model is Model.BH:
        e = spec.j_hop - spec.lam / 4 if spec.lam < 0 else -spec.j_hop - spec.lam / 4
    elif spec.model is Model.LMG:
        e = 0.0
    else:
        e = -spec.omega0 / 2
    return e if per_particle else e * spec.N


def mean_field_photon_number(spec: ModelSpec) -> float:
    """Mean-field ``nu_c^2`` of the Dicke ground state at ``spec.lam``."""
    if spec.model is not Model.DICKE or not ground_state_broken(spec):
        return 0.0
    cos_t = spec.omega * spec.omega0 / (4 * spec.lam**2)
    return spec.N * (spec.lam / spec.omega) ** 2 * (1 - cos_t**2)


def exact_ground_energy(spec: ModelSpec) -> float:
    h = build_hamiltonian(spec)
    w = linalg.eig_banded(h.lower_band(), lower=True, eigvals_only=True, select="i", select_range=(0, 0))
    return float(w[0])


def resolve_truncation(spec: ModelSpec, nu_c2: float = 0.0, energy_tol: float = 1e-8,
                       max_doublings: int = 6) -> ModelSpec:
    """Adaptive Dicke cutoff: start at ``4 max(N, ceil(nu_c^2))`` and double until
    the ground energy moves by less than ``energy_tol`` and the coherent tail of
    ``nu_c`` is below the truncation tolerance."""
    if spec.model is not Model.DICKE:
        return spec
    n_max = 4 * max(spec.N, math.ceil(nu_c2))
    current = spec.with_n_max(n_max)
    e_prev = exact_ground_energy(current)
    for _ in range(max_doublings):
        tail = float(stats.poisson.sf(current.n_max, nu_c2)) if nu_c2 else 0.0
        bigger = current.with_n_max(2 * current.n_max)
        e_next = exact_ground_energy(bigger)
        if abs(e_next - e_prev) < energy_tol and tail < TAIL_TOLERANCE:
            return current
        current, e_prev = bigger, e_next
    raise TruncationError(f"no converged cutoff up to n_max={current.n_max}",
                          float(stats.poisson.sf(current.n_max, nu_c2)) if nu_c2 else 0.0)


# --------------------------------------------------------------------------
# variational ground state


@dataclass(frozen=True)
class MeanFieldState:
    params: CoherentParams
    energy: float
    order_parameter: float
    broken: bool

    def __iter__(self):
        yield self.params
        yield self.energy


def _params_from_angles(model: Model, x) -> CoherentParams:
    if model is Model.BH:
        return CoherentParams.bh(math.cos(x[0]), math.sin(x[0]))
    if model is Model.LMG:
        return CoherentParams.lmg(math.tan(x[0] / 2))
    return CoherentParams.dicke(math.tan(x[0] / 2), x[1])


def variational_ground_state(spec: ModelSpec, branch: int = 1, strict: bool = True) -> MeanFieldState:
    """Minimize ``<psi|H|psi>`` over the coherent family on the requested branch.

    The search runs on the ``<O> >= 0`` half of the family; ``branch=-1``
    returns the parity image. With ``strict`` a normal-phase coupling raises
    :class:`PhaseError`.
    """
    if branch not in (1, -1):
        raise ConfigurationError(f"branch must be +1 or -1, got {branch!r}")
    broken = ground_state_broken(spec)
    if strict and not broken:
        raise PhaseError(
            f"{spec.model.value} at lambda={spec.lam:g} is in the normal phase "
            f"(critical coupling {semiclassical_critical_coupling(spec):g})")
    h = build_hamiltonian(spec)

    def energy(x):
        p = _params_from_angles(spec.model, x)
        return h.quadratic(build_coherent_state(spec, p, check_truncation=False).amplitudes)

    if spec.model is Model.DICKE:
        cos_t = min(1.0, spec.omega * spec.omega0 / (4 * spec.lam**2)) if spec.lam else 1.0
        theta0 = math.acos(cos_t)
        nu0 = -(spec.lam * math.sqrt(spec.N) / spec.omega) * math.sin(theta0)
        # keep the simplex off the theta=0 edge so that it can still move
        x0 = [max(theta0, 1e-3), nu0 if theta0 > 0 else -1e-3]
        res = optimize.minimize(energy, x0, method="Nelder-Mead",
                                bounds=[(0.0, math.pi - 1e-9), (None, None)],
                                options={"xatol": PARAM_TOLERANCE, "fatol": 1e-14,
                                         "maxiter": 20000, "maxfev": 40000})
        x = res.x
    else:
        upper = math.pi / 4 if spec.model is Model.BH else math.pi - 1e-9
        res = optimize.minimize_scalar(lambda t: energy([t]), bounds=(0.0, upper), method="bounded",
                                       options={"xatol": PARAM_TOLERANCE})
        x = [res.x]
    params = _params_from_angles(spec.model, x)
    if branch == -1:
        params = params.mirrored()
    psi = build_coherent_state(spec, params).amplitudes
    order = build_order_parameter(spec).quadratic(psi) / spec.N
    return MeanFieldState(params, h.quadratic(psi), order, broken)
