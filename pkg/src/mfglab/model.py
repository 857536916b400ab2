"""Hamiltonian, Legendre conjugate, potential coupling and test functionals.

The model family is deliberately closed-form: trigonometric-polynomial
potential, linear coupling and smoothing kernel, so the Hamiltonian
conjugate, the coupling functional and its flat derivative all evaluate
exactly on the grid (convolutions are done on Fourier coefficients).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mfglab.measures import GridMeasure, TorusGrid

HAMILTONIAN_KINDS = ("quadratic", "anisotropic_quadratic")


@dataclass(frozen=True)
class TrigPoly:
    """Real trigonometric polynomial sum_k c_k cos(2 pi k x) + s_k sin(2 pi k x).

    Stored as a list of (frequency, cos coefficient, sin coefficient) terms.
    """

    terms: tuple = ()

    @staticmethod
    def from_list(terms) -> "TrigPoly":
        out = []
        for k, c, s in terms:
            k = int(k)
            if k < 0:
                raise ValueError(f"frequency must be >= 0, got {k}")
            out.append((k, float(c), float(s)))
        return TrigPoly(tuple(out))

    @property
    def max_freq(self) -> int:
        return max((k for k, _, _ in self.terms), default=0)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        for k, c, s in self.terms:
            w = 2 * np.pi * k * x
            out += c * np.cos(w) + s * np.sin(w)
        return out

    def derivative(self) -> "TrigPoly":
        out = []
        for k, c, s in self.terms:
            w = 2 * np.pi * k
            # d/dx [c cos + s sin] = -c w sin + s w cos
            out.append((k, s * w, -c * w))
        return TrigPoly(tuple(out))

    def coefficient(self, k: int) -> tuple[float, float]:
        c = sum(ci for ki, ci, _ in self.terms if ki == k)
        s = sum(si for ki, _, si in self.terms if ki == k)
        return c, s

    def to_list(self):
        return [[k, c, s] for k, c, s in self.terms]


def measure_fourier(m: GridMeasure, k: int) -> tuple[float, float]:
    """(int cos 2 pi k y dm, int sin 2 pi k y dm), exact for atoms at centers."""
    w = 2 * np.pi * k * m.grid.x
    return float(np.cos(w) @ m.mass), float(np.sin(w) @ m.mass)


@dataclass(frozen=True)
class ModelSpec:
    """A discounted MFG model on the circle.

    Hamiltonian H(x, p) = a(x) p^2 / 2 - V(x), with a == 1 for the
    ``quadratic`` kind; coupling functional
    F(m) = int f dm + (theta/2) int (rho * m)^2 dx + constant.
    The diffusion coefficient ``nu`` multiplies the Laplacian in both
    equations of the coupled system.
    """

    kind: str = "quadratic"
    potential: TrigPoly = TrigPoly()
    anisotropy: TrigPoly = field(default_factory=lambda: TrigPoly(((0, 1.0, 0.0),)))
    f_coupling: TrigPoly = field(default_factory=lambda: TrigPoly(((1, 1.0, 0.0),)))
    theta: float = 1.0
    kernel: TrigPoly = field(default_factory=lambda: TrigPoly(((0, 1.0, 0.0), (1, 1.0, 0.0))))
    coupling_constant: float = 0.0
    nu: float = 1.0

    def __post_init__(self):
        if self.kind not in HAMILTONIAN_KINDS:
            raise ValueError(f"unknown hamiltonian kind {self.kind!r}")
        if self.theta < 0:
            raise ValueError(f"theta must be >= 0, got {self.theta}")
        if self.nu <= 0:
            raise ValueError(f"nu must be > 0, got {self.nu}")

    def a_of_x(self, x: np.ndarray) -> np.ndarray:
        """Kinetic coefficient a(x); identically 1 for the quadratic kind."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "quadratic":
            return np.ones_like(x)
        a = self.anisotropy(x)
        if np.any(a <= 0):
            raise ValueError("anisotropy coefficient must be strictly positive")
        return a


def hamiltonian(model: ModelSpec, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """H(x, p) = a(x) p^2 / 2 - V(x)."""
    return 0.5 * model.a_of_x(x) * np.asarray(p) ** 2 - model.potential(np.asarray(x))


def dp_hamiltonian(model: ModelSpec, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """D_p H(x, p) = a(x) p; the optimal drift at momentum p."""
    return model.a_of_x(x) * np.asarray(p)


def legendre_conjugate(model: ModelSpec, x: np.ndarray, q: np.ndarray) -> np.ndarray:
    """H*(x, q) = q^2 / (2 a(x)) + V(x), conjugate of the quadratic family."""
    return np.asarray(q) ** 2 / (2 * model.a_of_x(x)) + model.potential(np.asarray(x))


def _convolve_kernel_measure(kernel: TrigPoly, m: GridMeasure, power: int = 1) -> TrigPoly:
    """(rho * m) or (rho * rho * m) as a trig polynomial, exact in coefficients.

    Convolving cos/sin of frequency k with a measure mixes the pair through
    the measure's k-th Fourier coefficients; convolving twice squares the
    kernel's complex coefficient.
    """
    out = []
    for k, c, s in kernel.terms:
        if power == 2:
            # complex coefficient (c - i s)/ something squared; work it out
            # directly on the real pair: rho*rho has pair (c^2 - s^2, 2 c s)
            # scaled by 1/2 for k > 0 (product of two cosines halves), and
            # c^2 for k == 0.
            if k == 0:
                c, s = c * c, 0.0
            else:
                c, s = 0.5 * (c * c - s * s), c * s
        C, S = measure_fourier(m, k)
        # int rho(x - y) m(dy) for the (cos, sin) pair of frequency k:
        # cos(2 pi k (x-y)) = cos cos + sin sin, sin(2 pi k (x-y)) = sin cos - cos sin
        out.append((k, c * C - s * S, c * S + s * C))
    return TrigPoly(tuple(out))


def kernel_self_convolution(kernel: TrigPoly) -> TrigPoly:
    """rho * rho as a trig polynomial."""
    out = []
    for k, c, s in kernel.terms:
        if k == 0:
            out.append((0, c * c, 0.0))
        else:
            out.append((k, 0.5 * (c * c - s * s), c * s))
    return TrigPoly(tuple(out))


def trigpoly_l2_sq(p: TrigPoly) -> float:
    """int_0^1 p(x)^2 dx via Parseval."""
    c0, _ = p.coefficient(0)
    total = c0 * c0
    for k in sorted({k for k, _, _ in p.terms if k > 0}):
        c, s = p.coefficient(k)
        total += 0.5 * (c * c + s * s)
    return float(total)


def coupling_value(model: ModelSpec, m: GridMeasure) -> float:
    """F(m) = int f dm + (theta/2) int (rho * m)^2 dx + constant."""
    lin = float(model.f_coupling(m.grid.x) @ m.mass)
    quad = 0.0
    if model.theta > 0:
        conv = _convolve_kernel_measure(model.kernel, m)
        quad = 0.5 * model.theta * trigpoly_l2_sq(conv)
    return lin + quad + model.coupling_constant


def flat_derivative(model: ModelSpec, m: GridMeasure) -> np.ndarray:
    """Per-cell flat derivative F(x_j, m), normalized to int F dm = 0.

    F(x, m) = f(x) + theta (rho * rho * m)(x) - c(m); the additive
    normalization never changes the solved drifts, only shifts u.
    """
    x = m.grid.x
    vals = model.f_coupling(x).copy()
    if model.theta > 0:
        vals += model.theta * _convolve_kernel_measure(model.kernel, m, power=2)(x)
    return vals - float(vals @ m.mass)


def flat_derivative_path(model: ModelSpec, grid: TorusGrid, masses: np.ndarray) -> np.ndarray:
    """Flat derivative for a whole stack of mass vectors (k, n), vectorized."""
    x = grid.x
    masses = np.asarray(masses, dtype=np.float64)
    vals = np.broadcast_to(model.f_coupling(x), masses.shape).copy()
    if model.theta > 0:
        rr = kernel_self_convolution(model.kernel)
        for k, c, s in rr.terms:
            w = 2 * np.pi * k
            Ck = masses @ np.cos(w * x)
            Sk = masses @ np.sin(w * x)
            conv_c = c * Ck - s * Sk
            conv_s = c * Sk + s * Ck
            vals += model.theta * (
                conv_c[:, None] * np.cos(w * x)[None, :]
                + conv_s[:, None] * np.sin(w * x)[None, :]
            )
    vals -= np.einsum("kn,kn->k", vals, masses)[:, None]
    return vals


def coupling_value_path(model: ModelSpec, grid: TorusGrid, masses: np.ndarray) -> np.ndarray:
    """F(m) for a stack of mass vectors (k, n), vectorized over rows."""
    x = grid.x
    masses = np.asarray(masses, dtype=np.float64)
    out = masses @ model.f_coupling(x)
    if model.theta > 0:
        freqs = sorted({k for k, _, _ in model.kernel.terms})
        for k in freqs:
            c, s = model.kernel.coefficient(k)
            w = 2 * np.pi * k
            Ck = masses @ np.cos(w * x)
            Sk = masses @ np.sin(w * x)
            # (rho*m) pair at frequency k
            Ak = c * Ck - s * Sk
            Bk = c * Sk + s * Ck
            if k == 0:
                out += 0.5 * model.theta * Ak**2
            else:
                out += 0.25 * model.theta * (Ak**2 + Bk**2)
    return out + model.coupling_constant


# ---------------------------------------------------------------------------
# Cylindrical test functionals Phi(m) = phi(int psi_1 dm, ..., int psi_k dm)
# ---------------------------------------------------------------------------

OUTER_MAPS = ("linear", "square", "product")


@dataclass(frozen=True)
class TestFunctional:
    """Cylindrical functional with closed-form intrinsic derivatives.

    ``outer`` selects phi: identity of the single observable, its square,
    or the product of two observables.
    """

    observables: tuple
    outer: str = "linear"
    label: str = ""

    def __post_init__(self):
        if self.outer not in OUTER_MAPS:
            raise ValueError(f"unknown outer map {self.outer!r}")
        need = 2 if self.outer == "product" else 1
        if len(self.observables) != need:
            raise ValueError(
                f"outer map {self.outer!r} needs {need} observables, "
                f"got {len(self.observables)}"
            )

    def _inner(self, m: GridMeasure) -> np.ndarray:
        x = m.grid.x
        return np.array([float(psi(x) @ m.mass) for psi in self.observables])

    def _inner_many(self, x: np.ndarray, masses: np.ndarray) -> np.ndarray:
        return np.stack([masses @ psi(x) for psi in self.observables], axis=-1)

    def _outer_and_grad(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """phi(v) and grad phi(v), vectorized over leading axes of v."""
        if self.outer == "linear":
            return v[..., 0], np.ones_like(v)
        if self.outer == "square":
            return v[..., 0] ** 2, 2 * v
        return v[..., 0] * v[..., 1], v[..., ::-1].copy()

    def value(self, m: GridMeasure) -> float:
        val, _ = self._outer_and_grad(self._inner(m))
        return float(val)

    def dm(self, m: GridMeasure) -> np.ndarray:
        """Per-cell D_m Phi(m, x_j) = sum_j d_j phi * psi_j'(x)."""
        _, g = self._outer_and_grad(self._inner(m))
        x = m.grid.x
        out = np.zeros_like(x)
        for gj, psi in zip(g, self.observables):
            out += gj * psi.derivative()(x)
        return out

    def div_dm(self, m: GridMeasure) -> np.ndarray:
        """Per-cell div_y D_m Phi(m, x_j) = sum_j d_j phi * psi_j''(x)."""
        _, g = self._outer_and_grad(self._inner(m))
        x = m.grid.x
        out = np.zeros_like(x)
        for gj, psi in zip(g, self.observables):
            out += gj * psi.derivative().derivative()(x)
        return out

    def value_many(self, x: np.ndarray, masses: np.ndarray) -> np.ndarray:
        val, _ = self._outer_and_grad(self._inner_many(x, masses))
        return val

    def closedness_terms(self, x: np.ndarray, masses: np.ndarray,
                         drifts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-row (int D_m Phi . alpha dm, int div_y D_m Phi dm) for stacks.

        ``masses`` and ``drifts`` have shape (k, n).
        """
        v = self._inner_many(x, masses)
        _, g = self._outer_and_grad(v)
        transport = np.zeros(masses.shape[0])
        generator = np.zeros(masses.shape[0])
        for j, psi in enumerate(self.observables):
            d1 = psi.derivative()(x)
            d2 = psi.derivative().derivative()(x)
            transport += g[..., j] * ((masses * drifts) @ d1)
            generator += g[..., j] * (masses @ d2)
        return transport, generator


def eval_functional(phi: TestFunctional, m: GridMeasure) -> float:
    return phi.value(m)


def eval_dm(phi: TestFunctional, m: GridMeasure) -> np.ndarray:
    return phi.dm(m)


def eval_div_dm(phi: TestFunctional, m: GridMeasure) -> np.ndarray:
    return phi.div_dm(m)


def functional_battery(max_freq: int = 4) -> list[TestFunctional]:
    """The standard battery: psi in {sin, cos}(2 pi k x), k <= max_freq;
    outer maps identity, square, and all pairwise products."""
    waves = []
    for k in range(1, max_freq + 1):
        waves.append((f"cos{k}", TrigPoly(((k, 1.0, 0.0),))))
        waves.append((f"sin{k}", TrigPoly(((k, 0.0, 1.0),))))
    battery = []
    for name, psi in waves:
        battery.append(TestFunctional((psi,), "linear", label=f"id[{name}]"))
    for name, psi in waves:
        battery.append(TestFunctional((psi,), "square", label=f"sq[{name}]"))
    for i in range(len(waves)):
        for j in range(i + 1, len(waves)):
            battery.append(TestFunctional(
                (waves[i][1], waves[j][1]), "product",
                label=f"prod[{waves[i][0]},{waves[j][0]}]"))
    return battery
