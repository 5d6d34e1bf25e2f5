"""Exhaustive Fourier checks on tiny labeled-matching spaces.

Conventions
-----------
* The universe has k parts of size n; vertex l of part t is ``t * n + l``.
* ``Z_N^(kn)`` is enumerated by ``np.ndindex`` (vertex 0 most significant),
  which is also the axis order used by ``np.fft.fftn``.
* ``Omega`` lists matchings in the order of :func:`enumerate_matchings` and,
  within a matching, labels in ``itertools.product`` order.
* Inner products are expectations under the uniform measure.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .dihp import OneWiseDistribution
from .errors import CapExceededError, CspError

DEFAULT_DOMAIN_CAP = 10**6

Edge = tuple[int, ...]
Point = tuple[tuple[Edge, tuple[int, ...]], ...]


def psi_prob(n: int, m: int, d: int, k: int = 2) -> Fraction:
    if not n >= m >= d >= 0:
        raise CspError("need n >= m >= d >= 0")
    out = Fraction(1)
    for s in range(d):
        out *= Fraction(m - s, (n - s) ** k)
    return out


def enumerate_matchings(n: int, k: int, m: int) -> list[tuple[Edge, ...]]:
    """All m-matchings of the complete k-partite universe, each as sorted edges."""
    if not 0 <= m <= n:
        raise CspError("matching size out of range")
    out = []
    for first in itertools.combinations(range(n), m):
        for rest in itertools.product(*(list(itertools.permutations(range(n), m)) for _ in range(k - 1))):
            edges = [tuple([first[s]] + [t * n + rest[t - 1][s] for t in range(1, k)]) for s in range(m)]
            out.append(tuple(sorted(edges)))
    return out


def domain_size(n: int, k: int, m: int, N: int) -> int:
    return math.comb(n, m) * math.perm(n, m) ** (k - 1) * N ** (k * m)


def enumerate_omega(n: int, k: int, m: int, N: int, cap: int = DEFAULT_DOMAIN_CAP) -> list[Point]:
    size = domain_size(n, k, m, N)
    if size > cap:
        raise CapExceededError(f"|Omega| = {size} exceeds the cap {cap}")
    labels = list(itertools.product(range(N), repeat=k))
    out = []
    for M in enumerate_matchings(n, k, m):
        for lab in itertools.product(labels, repeat=m):
            out.append(tuple(zip(M, lab)))
    return out


def containment_frequency(n: int, k: int, m: int, d: int) -> Fraction:
    """Exact share of m-matchings containing the fixed matching {(s, n+s, ...) : s < d}."""
    fixed = {tuple(t * n + s for t in range(k)) for s in range(d)}
    Ms = enumerate_matchings(n, k, m)
    return Fraction(sum(fixed <= set(M) for M in Ms), len(Ms))


@dataclass(frozen=True)
class CharacterIndex:
    M: tuple[Edge, ...]
    a: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        used = [v for e in self.M for v in e]
        if len(used) != len(set(used)):
            raise CspError("character support is not a matching")
        if len(self.a) != len(self.M) or any(not any(x) for x in self.a):
            raise CspError("every edge of a character needs a nonzero label")


def _omega_root(N: int) -> complex:
    return complex(math.cos(2 * math.pi / N), math.sin(2 * math.pi / N))


def character_eval(idx: CharacterIndex, y: Point, n: int, m: int, N: int, k: int) -> complex:
    ydict = dict(y)
    w = _omega_root(N)
    val = complex(1)
    for e, a in zip(idx.M, idx.a):
        if e not in ydict:
            return 0j
        val *= w ** (sum(ai * bi for ai, bi in zip(a, ydict[e])) % N)
    return val / math.sqrt(psi_prob(n, m, len(idx.M), k))


def all_edges(n: int, k: int) -> list[Edge]:
    return [tuple(t * n + c for t, c in enumerate(cs)) for cs in itertools.product(range(n), repeat=k)]


def enumerate_character_indices(n: int, k: int, m: int, N: int, max_d: int) -> list[CharacterIndex]:
    nonzero = [a for a in itertools.product(range(N), repeat=k) if any(a)]
    out = []
    for d in range(min(max_d, m) + 1):
        for M in enumerate_matchings(n, k, d) if d else [()]:
            for labs in itertools.product(nonzero, repeat=d):
                out.append(CharacterIndex(M, labs))
    # enumerate_matchings lists each matching once
    return out


def character_matrix(indices: Sequence[CharacterIndex], omega: Sequence[Point], n: int, m: int, N: int, k: int) -> np.ndarray:
    return np.array([[character_eval(ix, y, n, m, N, k) for y in omega] for ix in indices])


@dataclass
class Report:
    check: str
    params: dict
    certified: bool
    passed: bool
    worst_ratio: float | None
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "check": self.check,
            "params": self.params,
            "certified": self.certified,
            "pass": self.passed,
            "worst_ratio": self.worst_ratio,
            **({"details": self.details} if self.details else {}),
        }


def check_orthonormal(n: int, k: int, m: int, N: int, max_d: int, tol: float = 1e-10, cap: int = DEFAULT_DOMAIN_CAP) -> Report:
    omega = enumerate_omega(n, k, m, N, cap)
    idx = enumerate_character_indices(n, k, m, N, max_d)
    C = character_matrix(idx, omega, n, m, N, k)
    gram = C @ C.conj().T / len(omega)
    err = float(np.max(np.abs(gram - np.eye(len(idx)))))
    return Report(
        "orthonormal",
        {"n": n, "k": k, "m": m, "N": N, "max_d": max_d, "indices": len(idx)},
        True,
        err <= tol,
        err,
    )


# ---------------------------------------------------------------------------
# the kernel


def cube(N: int, L: int) -> list[tuple[int, ...]]:
    return list(np.ndindex(*([N] * L)))


def kernel_matrix(n: int, k: int, m: int, mu: OneWiseDistribution, exact: bool = False, cap: int = DEFAULT_DOMAIN_CAP):
    """P[x, y] = prod over edges of y of mu(x|_e - y(e)), divided by the number of m-matchings."""
    N = mu.N
    omega = enumerate_omega(n, k, m, N, cap)
    X = cube(N, k * n)
    if len(X) * len(omega) > cap * 16:
        raise CapExceededError("kernel matrix too large")
    num_match = len(enumerate_matchings(n, k, m))
    pmf = {a: w for a, w in mu.pmf}
    zero = Fraction(0)
    if exact:
        P = np.empty((len(X), len(omega)), dtype=object)
    else:
        P = np.zeros((len(X), len(omega)))
    for xi, x in enumerate(X):
        for yi, y in enumerate(omega):
            w = Fraction(1, num_match)
            for e, lab in y:
                w *= pmf.get(tuple((x[v] - l) % N for v, l in zip(e, lab)), zero)
                if not w:
                    break
            P[xi, yi] = w if exact else float(w)
    return P, X, omega


def kernel_pullback(P: np.ndarray, f: np.ndarray) -> np.ndarray:
    return P @ f


def kernel_adjoint(P: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Adjoint for expectation inner products: (|Omega|/|X|) sum_x P[x, y] g(x)."""
    nx, ny = P.shape
    return (ny / nx) * (P.T @ g)


def row_sum_error(P: np.ndarray) -> float:
    if P.dtype == object:
        return float(max(abs(sum(row) - 1) for row in P))
    return float(np.max(np.abs(P.sum(axis=1) - 1)))


# ---------------------------------------------------------------------------
# Fourier analysis on Z_N^L


def fourier_coefficients(g: np.ndarray, N: int, L: int) -> np.ndarray:
    """hat g(b) = E_x g(x) conj(chi_b(x)), as an array of shape (N,)*L."""
    return np.fft.fftn(np.asarray(g, dtype=complex).reshape((N,) * L)) / N**L


def level_weights(g: np.ndarray, N: int, L: int) -> np.ndarray:
    coef = np.abs(fourier_coefficients(g, N, L)) ** 2
    supp = np.zeros((N,) * L, dtype=int)
    for axis in range(L):
        shape = [1] * L
        shape[axis] = N
        supp = supp + (np.arange(N).reshape(shape) != 0)
    return np.bincount(supp.ravel(), weights=coef.ravel(), minlength=L + 1)


def parseval_error(g: np.ndarray, N: int, L: int) -> float:
    lhs = float(np.sum(np.abs(fourier_coefficients(g, N, L)) ** 2))
    rhs = float(np.mean(np.abs(np.asarray(g)) ** 2))
    return abs(lhs - rhs)


def decay_bound(n: int, ell: int, w: float) -> float:
    if ell > n:
        return 0.0
    if ell <= w:
        return (w / n) ** (ell / 2)
    return (ell / (8 * n)) ** (ell / 2) * 2 ** (2 * w)


def character_on_cube(b: Sequence[int], X: Sequence[tuple[int, ...]], N: int) -> np.ndarray:
    w = _omega_root(N)
    return np.array([w ** (sum(bi * xi for bi, xi in zip(b, x)) % N) for x in X])


# ---------------------------------------------------------------------------
# global sets


def _restricted(omega: Sequence[Point], z: Point) -> list[int]:
    zs = set(z)
    return [i for i, y in enumerate(omega) if zs <= set(y)]


def partial_labeled_matchings(n: int, k: int, m: int, N: int) -> list[Point]:
    labels = list(itertools.product(range(N), repeat=k))
    out: list[Point] = [()]
    for d in range(1, m + 1):
        for M in enumerate_matchings(n, k, d):
            for lab in itertools.product(labels, repeat=d):
                out.append(tuple(zip(M, lab)))
    return out


def check_global_set(
    A: Iterable[int], z: Point, omega: Sequence[Point], n: int, k: int, m: int, N: int
) -> tuple[bool, float]:
    """Exhaustive globalness test for ``A`` (indices into ``omega``) relative to ``z``.

    Returns (is_global, largest density growth divided by its allowance).
    """
    A = set(A)
    base = _restricted(omega, z)
    if not A <= set(base):
        raise CspError("A is not contained in the restricted domain")
    dens_z = Fraction(len(A), len(base))
    zset = set(z)
    worst = Fraction(0)
    for z2 in partial_labeled_matchings(n, k, m, N):
        if not zset <= set(z2):
            continue
        dom = _restricted(omega, z2)
        if not dom:
            continue
        dens = Fraction(len(A.intersection(dom)), len(dom))
        allowance = 2 ** (len(z2) - len(z)) * dens_z
        if allowance:
            worst = max(worst, dens / allowance)
        elif dens:
            return False, math.inf
    return worst <= 1, float(worst)


def density_function(A: Iterable[int], size: int) -> np.ndarray:
    A = list(A)
    phi = np.zeros(size)
    phi[A] = size / len(A)
    return phi


def fourier_decay_check(n: int, k: int, m: int, mu: OneWiseDistribution, A: Iterable[int], tol: float = 1e-12) -> Report:
    """Level weights of P[phi_A] against F(|U|, l, w) with |A| = 2^-w |Omega|."""
    P, X, omega = kernel_matrix(n, k, m, mu)
    A = sorted(set(A))
    if not A:
        raise CspError("A must be nonempty")
    w = math.log2(len(omega) / len(A))
    g = kernel_pullback(P, density_function(A, len(omega)))
    L = k * n
    weights = level_weights(g, mu.N, L)
    certified = n >= 10**8 * k**3 * m and m >= 2 * (w + 1)
    levels, worst = [], 0.0
    ok = True
    for ell in range(L + 1):
        bound = decay_bound(n, ell, w) if w > 0 else (1.0 if ell == 0 else 0.0)
        wt = float(weights[ell])
        ratio = wt / bound if bound > 0 else (0.0 if wt <= tol else math.inf)
        levels.append({"level": ell, "weight": wt, "bound": bound, "ratio": ratio})
        if ell > 0:
            worst = max(worst, ratio)
            ok = ok and wt <= bound + tol
    return Report(
        "fourier_decay",
        {"n": n, "k": k, "m": m, "N": mu.N, "w": w, "size_A": len(A)},
        certified,
        ok,
        worst,
        {"levels": levels, "regime": "certified" if certified else "desk-scale observation"},
    )


# ---------------------------------------------------------------------------
# singular structure of the kernel


def svd_structure_check(
    n: int, k: int, m: int, mu: OneWiseDistribution, bs: Sequence[Sequence[int]], tol: float = 1e-10
) -> Report:
    """Adjoint images of characters: pairwise orthogonality, low-degree span, vanishing cases."""
    N = mu.N
    P, X, omega = kernel_matrix(n, k, m, mu)
    L = k * n
    images = [kernel_adjoint(P, character_on_cube(b, X, N)) for b in bs]
    details: dict = {"orthogonality": [], "span_residual": [], "norm_sq": [], "single_coordinate": []}
    worst = 0.0
    for a in range(len(bs)):
        for c in range(a + 1, len(bs)):
            if tuple(bs[a]) != tuple(bs[c]):
                ip = abs(np.vdot(images[c], images[a]) / len(omega))
                details["orthogonality"].append(float(ip))
                worst = max(worst, float(ip))
    for b, img in zip(bs, images):
        s = sum(1 for x in b if x)
        idx = enumerate_character_indices(n, k, m, N, s // 2)
        C = character_matrix(idx, omega, n, m, N, k).T
        coef, *_ = np.linalg.lstsq(C, img, rcond=None)
        res = float(np.max(np.abs(C @ coef - img)))
        details["span_residual"].append(res)
        worst = max(worst, res)
        details["norm_sq"].append(float(np.mean(np.abs(img) ** 2)))
        if s == 1:
            z = float(np.max(np.abs(img)))
            details["single_coordinate"].append(z)
            worst = max(worst, z)
    certified = False  # the norm bound needs |U| far beyond enumerable sizes
    return Report("svd_structure", {"n": n, "k": k, "m": m, "N": N, "L": L, "count": len(bs)}, certified, worst <= tol, worst, details)
