"""Positive linear maps as superoperators and their contraction geometry.

A map is stored as its matrix in the trace-orthonormal Hermitian basis of
the algebra, where the trace pairing becomes the standard bilinear form and
the adjoint with respect to it is a plain matrix transpose.  The projective
action of a faithful positive map on states is nonexpansive for the
projective metric; ``contraction_estimate`` brackets its Lipschitz constant
between a sampled image diameter (lower bound) and a certificate derived
from an operator sandwich around the fixed point (upper bound).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .algebra import (
    AlgebraElement,
    State,
    TracialAlgebra,
    is_positive,
    norm,
    random_state,
    support_projection,
    trace,
)
from .config import DEFAULT_TOLS, Tolerances
from .errors import (
    HypothesisViolationError,
    KernelStateError,
    RejectedInputError,
    ShapeMismatchError,
)
from .hennion import hennion_distance, m_quantity

__all__ = [
    "MapFlags",
    "SuperOperator",
    "ContractionEstimate",
    "IrreducibilityVerdict",
    "from_kraus",
    "from_matrix",
    "from_strongly_summable",
    "replacement_channel",
    "depolarizing_channel",
    "transpose_map",
    "identity_map",
    "dephasing_map",
    "mixed_unitary_channel",
    "predual",
    "projective_action",
    "compose",
    "contraction_estimate",
    "is_strict_contraction",
    "faithfulness_check",
    "irreducibility_probe",
    "unitalize",
]

YES, NO, UNVERIFIED = "yes", "no", "unverified"


@dataclass
class MapFlags:
    """Validated structural properties; each is yes/no/unverified.

    ``positive`` may be set by construction (Kraus, strongly summable) or
    validated empirically on ``positive_probes`` random positive inputs, in
    which case the count records the evidence.
    """

    hermiticity_preserving: str = UNVERIFIED
    positive: str = UNVERIFIED
    positive_probes: int = 0
    completely_positive: str = UNVERIFIED
    unital: str = UNVERIFIED
    tracial: str = UNVERIFIED
    faithful: str = UNVERIFIED


class SuperOperator:
    """A linear map on the algebra in its Hermitian coefficient basis."""

    __slots__ = ("algebra", "matrix", "flags", "provenance")

    def __init__(
        self,
        algebra: TracialAlgebra,
        matrix: np.ndarray,
        flags: MapFlags | None = None,
        provenance: dict | None = None,
    ):
        matrix = np.array(matrix, dtype=complex, copy=True)
        if matrix.shape != (algebra.dim, algebra.dim):
            raise ShapeMismatchError(
                f"superoperator matrix shape {matrix.shape} does not match"
                f" coefficient dimension {algebra.dim}"
            )
        matrix.setflags(write=False)
        self.algebra = algebra
        self.matrix = matrix
        self.flags = flags if flags is not None else MapFlags()
        self.provenance = provenance if provenance is not None else {"kind": "explicit_matrix"}

    def apply(self, x: AlgebraElement) -> AlgebraElement:
        self.algebra._check_member(x)
        return self.algebra.from_coefficients(self.matrix @ self.algebra.coefficients(x))

    def apply_dual(self, a: AlgebraElement) -> AlgebraElement:
        """Apply the trace-pairing adjoint without materializing it."""
        self.algebra._check_member(a)
        return self.algebra.from_coefficients(self.matrix.T @ self.algebra.coefficients(a))

    def rescaled(self, factor: float) -> "SuperOperator":
        return SuperOperator(
            self.algebra,
            self.matrix * factor,
            replace(self.flags),
            dict(self.provenance),
        )

    def __repr__(self) -> str:
        return (
            f"SuperOperator(dim={self.algebra.dim},"
            f" provenance={self.provenance.get('kind')})"
        )


# ---------------------------------------------------------------------------
# construction and validation
# ---------------------------------------------------------------------------


def _matrix_from_action(
    algebra: TracialAlgebra, action: Callable[[AlgebraElement], AlgebraElement]
) -> np.ndarray:
    cols = []
    for k in range(algebra.dim):
        cols.append(algebra.coefficients(action(algebra.basis_element(k))))
    return np.stack(cols, axis=1)


def _choi_is_psd(s: SuperOperator, tol: float = 1e-9) -> bool:
    """Complete positivity via the block-component Choi matrices."""
    alg = s.algebra
    for i, ni in enumerate(alg.block_dims):
        # build gamma(E_kl) for matrix units of input block i
        outs = []
        for k in range(ni):
            row = []
            for l in range(ni):
                blocks = [np.zeros((n, n), dtype=complex) for n in alg.block_dims]
                blocks[i][k, l] = 1.0
                row.append(s.apply(AlgebraElement(alg, blocks)))
            outs.append(row)
        for j, nj in enumerate(alg.block_dims):
            choi = np.zeros((ni * nj, ni * nj), dtype=complex)
            for k in range(ni):
                for l in range(ni):
                    choi[k * nj : (k + 1) * nj, l * nj : (l + 1) * nj] = outs[k][l].blocks[j]
            choi = (choi + choi.conj().T) / 2.0
            w = np.linalg.eigvalsh(choi)
            scale = max(1.0, float(abs(w[-1])))
            if w[0] < -tol * scale:
                return False
    return True


def validate_flags(
    s: SuperOperator,
    n_probe: int = 0,
    rng: np.random.Generator | None = None,
    tols: Tolerances = DEFAULT_TOLS,
) -> SuperOperator:
    """Fill in unverified flags by direct numerical checks.

    Positivity of a map that is not completely positive is not decidable
    from the matrix; when ``n_probe`` > 0 it is validated empirically on
    that many random positive inputs and the count is recorded.
    """
    alg = s.algebra
    f = s.flags
    if f.hermiticity_preserving == UNVERIFIED:
        imag = float(np.max(np.abs(s.matrix.imag), initial=0.0))
        scale = max(1.0, float(np.max(np.abs(s.matrix.real), initial=0.0)))
        f.hermiticity_preserving = YES if imag <= 1e-10 * scale else NO
    one = alg.identity()
    c_one = alg.coefficients(one)
    if f.unital == UNVERIFIED:
        f.unital = (
            YES
            if norm(alg, s.apply(one) - one, "inf") <= 1e-10
            else NO
        )
    if f.tracial == UNVERIFIED:
        resid = s.matrix.T @ c_one - c_one
        f.tracial = YES if float(np.max(np.abs(resid))) <= 1e-10 else NO
    if f.completely_positive == UNVERIFIED:
        f.completely_positive = YES if _choi_is_psd(s) else NO
    if f.positive == UNVERIFIED:
        if f.completely_positive == YES:
            f.positive = YES
        elif n_probe > 0:
            if rng is None:
                rng = np.random.default_rng(0)
            ok = True
            for _ in range(n_probe):
                p = random_state(alg, "full" if rng.integers(2) else "pure", rng)
                if not is_positive(alg, s.apply(p.element), tols=tols):
                    ok = False
                    break
            f.positive = YES if ok else NO
            f.positive_probes = n_probe
    return s


def from_matrix(
    algebra: TracialAlgebra,
    matrix: np.ndarray,
    n_probe: int = 1000,
    rng: np.random.Generator | None = None,
    provenance: dict | None = None,
) -> SuperOperator:
    """Wrap an explicit coefficient matrix, validating every flag."""
    s = SuperOperator(algebra, matrix, provenance=provenance or {"kind": "explicit_matrix"})
    return validate_flags(s, n_probe=n_probe, rng=rng)


def from_kraus(algebra: TracialAlgebra, kraus_ops: Sequence[AlgebraElement]) -> SuperOperator:
    """x -> sum_i K_i x K_i*; completely positive by construction.

    The Choi test still runs as a self-check and the remaining flags are
    validated numerically.
    """
    if len(kraus_ops) == 0:
        raise RejectedInputError("need at least one Kraus operator")
    for k in kraus_ops:
        algebra._check_member(k)

    def action(x: AlgebraElement) -> AlgebraElement:
        out = algebra.zero()
        for k in kraus_ops:
            out = out + k @ x @ k.adjoint()
        return out

    mat = _matrix_from_action(algebra, action)
    s = SuperOperator(
        algebra,
        mat,
        MapFlags(positive=YES, completely_positive=UNVERIFIED),
        {"kind": "kraus", "n_ops": len(kraus_ops)},
    )
    validate_flags(s)
    if s.flags.completely_positive != YES:
        raise RejectedInputError("Kraus map failed its own Choi self-test")
    # application consistency between provenance and matrix representation
    rng = np.random.default_rng(7)
    probe = random_state(algebra, "full", rng).element
    direct = action(probe)
    via_matrix = s.apply(probe)
    if norm(algebra, direct - via_matrix, "inf") > 1e-10 * max(
        1.0, norm(algebra, direct, "inf")
    ):
        raise RejectedInputError("Kraus evaluation disagrees with matrix application")
    return s


def from_strongly_summable(
    algebra: TracialAlgebra,
    pairs: Sequence[tuple[AlgebraElement, AlgebraElement]],
    tols: Tolerances = DEFAULT_TOLS,
) -> SuperOperator:
    """x -> sum_i tau(x a_i) m_i for positive pairs (a_i, m_i).

    Faithful exactly when sum_i a_i is invertible, i.e. when tau(x a) > 0
    for every non-zero positive x.
    """
    if len(pairs) == 0:
        raise RejectedInputError("need at least one (a, m) pair")
    mat = np.zeros((algebra.dim, algebra.dim), dtype=complex)
    a_sum = algebra.zero()
    for a, m in pairs:
        algebra._check_member(a)
        algebra._check_member(m)
        if not is_positive(algebra, a, tols=tols) or not is_positive(algebra, m, tols=tols):
            raise RejectedInputError("strongly summable pairs must be positive")
        mat += np.outer(algebra.coefficients(m), algebra.coefficients(a))
        a_sum = a_sum + a
    lam_min = min(float(np.linalg.eigvalsh(blk)[0]) for blk in a_sum.hermitize(tols).blocks)
    lam_max = max(float(np.linalg.eigvalsh(blk)[-1]) for blk in a_sum.hermitize(tols).blocks)
    faithful = YES if lam_min > tols.rank_tol * max(lam_max, 1.0) else NO
    s = SuperOperator(
        algebra,
        mat,
        MapFlags(positive=YES, faithful=faithful),
        {"kind": "strongly_summable", "n_pairs": len(pairs)},
    )
    return validate_flags(s)


def replacement_channel(algebra: TracialAlgebra, target: State) -> SuperOperator:
    """x -> tau(x) * x0; the projective action is constant at x0."""
    c1 = algebra.coefficients(algebra.identity())
    cx = algebra.coefficients(target.element)
    s = SuperOperator(
        algebra,
        np.outer(cx, c1),
        MapFlags(positive=YES, completely_positive=YES, faithful=YES),
        {"kind": "strongly_summable", "n_pairs": 1, "note": "replacement"},
    )
    return validate_flags(s)


def depolarizing_channel(algebra: TracialAlgebra, eps: float) -> SuperOperator:
    """x -> (1 - eps) x + eps tau(x) 1 for eps in [0, 1]."""
    if not 0.0 <= eps <= 1.0:
        raise RejectedInputError("mixing parameter must lie in [0, 1]")
    c1 = algebra.coefficients(algebra.identity())
    mat = (1.0 - eps) * np.eye(algebra.dim) + eps * np.outer(c1, c1)
    s = SuperOperator(
        algebra,
        mat,
        MapFlags(positive=YES, completely_positive=YES, faithful=YES),
        {"kind": "explicit_matrix", "note": f"depolarizing({eps})"},
    )
    return validate_flags(s)


def transpose_map(algebra: TracialAlgebra) -> SuperOperator:
    """Blockwise transpose; positive and a metric isometry, but not CP."""

    def action(x: AlgebraElement) -> AlgebraElement:
        return AlgebraElement(algebra, [blk.T for blk in x.blocks])

    s = SuperOperator(
        algebra,
        _matrix_from_action(algebra, action),
        MapFlags(positive=YES, faithful=YES),
        {"kind": "explicit_matrix", "note": "transpose"},
    )
    return validate_flags(s)


def identity_map(algebra: TracialAlgebra) -> SuperOperator:
    s = SuperOperator(
        algebra,
        np.eye(algebra.dim),
        MapFlags(positive=YES, completely_positive=YES, unital=YES, tracial=YES, faithful=YES),
        {"kind": "explicit_matrix", "note": "identity"},
    )
    return validate_flags(s)


def dephasing_map(algebra: TracialAlgebra) -> SuperOperator:
    """Pinch every block to its diagonal."""

    def action(x: AlgebraElement) -> AlgebraElement:
        return AlgebraElement(algebra, [np.diag(np.diag(blk)) for blk in x.blocks])

    s = SuperOperator(
        algebra,
        _matrix_from_action(algebra, action),
        MapFlags(positive=YES, completely_positive=YES, faithful=YES),
        {"kind": "explicit_matrix", "note": "dephasing"},
    )
    return validate_flags(s)


def mixed_unitary_channel(
    algebra: TracialAlgebra, rng: np.random.Generator, n_terms: int = 3
) -> SuperOperator:
    """Random convex mixture of blockwise unitary conjugations.

    Unital, tracial, completely positive and faithful by construction.
    """
    probs = rng.dirichlet(np.ones(n_terms))
    kraus = []
    for p in probs:
        blocks = []
        for n in algebra.block_dims:
            g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            q, r = np.linalg.qr(g)
            q = q * (np.diag(r) / np.abs(np.diag(r)))
            blocks.append(np.sqrt(p) * q)
        kraus.append(AlgebraElement(algebra, blocks))
    s = from_kraus(algebra, kraus)
    s.flags.faithful = YES
    return s


# ---------------------------------------------------------------------------
# duality, action, composition
# ---------------------------------------------------------------------------


def predual(s: SuperOperator, tols: Tolerances = DEFAULT_TOLS) -> SuperOperator:
    """Adjoint for the weighted trace pairing tau(predual(s)(x) a) = tau(x s(a)).

    In the Hermitian coefficient basis the pairing is the plain bilinear
    form, so the predual is the matrix transpose.  Requires validated
    hermiticity preservation (equivalently, a real coefficient matrix).
    Positivity-type flags transfer; unital and tracial swap; faithfulness
    is recomputed since it does not transfer.
    """
    validate_flags(s)
    if s.flags.hermiticity_preserving != YES:
        raise RejectedInputError("predual requires a hermiticity-preserving map")
    flags = MapFlags(
        hermiticity_preserving=YES,
        positive=s.flags.positive,
        positive_probes=s.flags.positive_probes,
        completely_positive=s.flags.completely_positive,
        unital=s.flags.tracial,
        tracial=s.flags.unital,
    )
    out = SuperOperator(
        s.algebra,
        s.matrix.T,
        flags,
        {"kind": "predual", "of": s.provenance},
    )
    faithfulness_check(out, tols)
    return out


def projective_action(
    s: SuperOperator, x: State, tols: Tolerances = DEFAULT_TOLS
) -> State:
    """Normalized image s(x)/tau(s(x)); kernel states are rejected."""
    y = s.apply(x.element)
    t = trace(s.algebra, y).real
    if t <= tols.kernel_tol:
        raise KernelStateError(
            f"image trace {t:.3e} at or below the kernel tolerance"
        )
    y = (y * (1.0 / t)).hermitize(tols)
    # clip roundoff negatives accumulated along long compositions
    blocks = []
    for blk in y.blocks:
        w, v = np.linalg.eigh(blk)
        if w[0] < 0.0:
            blk = (v * np.maximum(w, 0.0)) @ v.conj().T
        blocks.append(blk)
    y = AlgebraElement(s.algebra, blocks)
    y = y * (1.0 / trace(s.algebra, y).real)
    return State.from_element(y, tols)


def compose(s1: SuperOperator, s2: SuperOperator) -> SuperOperator:
    """The composition s1 after s2, with conservatively combined flags."""
    if not s1.algebra.compatible(s2.algebra):
        raise ShapeMismatchError("cannot compose maps on different algebras")

    def both(a: str, b: str) -> str:
        if a == YES and b == YES:
            return YES
        return UNVERIFIED

    f = MapFlags(
        hermiticity_preserving=both(
            s1.flags.hermiticity_preserving, s2.flags.hermiticity_preserving
        ),
        positive=both(s1.flags.positive, s2.flags.positive),
        completely_positive=both(
            s1.flags.completely_positive, s2.flags.completely_positive
        ),
        unital=both(s1.flags.unital, s2.flags.unital),
        tracial=both(s1.flags.tracial, s2.flags.tracial),
        faithful=both(s1.flags.faithful, s2.flags.faithful),
    )

    def factors(p: dict) -> list:
        return p["factors"] if p.get("kind") == "composition" else [p]

    return SuperOperator(
        s1.algebra,
        s1.matrix @ s2.matrix,
        f,
        {"kind": "composition", "factors": factors(s1.provenance) + factors(s2.provenance)},
    )


def faithfulness_check(s: SuperOperator, tols: Tolerances = DEFAULT_TOLS) -> str:
    """Decide faithfulness and cache the flag.

    A positive map on the trace-norm side is faithful exactly when its dual
    applied to the identity is invertible (the trace of every image of a
    non-zero positive element is then strictly positive).  When that
    operator is singular, a rank test of the span of products of dual
    images with the basis decides the residual cases.
    """
    if s.flags.faithful in (YES, NO):
        return s.flags.faithful
    alg = s.algebra
    d1 = s.apply_dual(alg.identity()).hermitize(tols)
    lam = [np.linalg.eigvalsh(blk) for blk in d1.blocks]
    lo = min(float(w[0]) for w in lam)
    hi = max(float(w[-1]) for w in lam)
    if lo > max(hi, 1.0) * 1e-12:
        s.flags.faithful = YES
        return YES
    # rank of the span {dual(b_i) b_j} over the Hermitian basis
    vecs = []
    basis = [alg.basis_element(k) for k in range(alg.dim)]
    duals = [s.apply_dual(b) for b in basis]
    for db in duals:
        for b in basis:
            prod = db @ b
            vecs.append(np.concatenate([blk.ravel() for blk in prod.blocks]))
    mat = np.stack(vecs)
    rank = np.linalg.matrix_rank(mat, tol=1e-10 * max(1.0, float(np.abs(mat).max())))
    full = sum(n * n for n in alg.block_dims)
    s.flags.faithful = YES if rank == full else NO
    return s.flags.faithful


# ---------------------------------------------------------------------------
# contraction constant estimation
# ---------------------------------------------------------------------------


@dataclass
class ContractionEstimate:
    """Two-sided bracket of the projective Lipschitz constant.

    ``lower_bound`` is a sampled (and refined) image diameter, hence always
    a true lower bound.  ``upper_bound`` is ``(1 - eta^4)/(1 + eta^4)`` from
    the sandwich constant eta at the fixed point when one was certified,
    clamped into [lower_bound, 1].
    """

    lower_bound: float
    upper_bound: float
    fixed_point: State | None
    eta: float
    n_samples: int
    refine_iters: int
    fixed_point_converged: bool = False
    fixed_point_iterations: int = 0
    convergence_error: bool = False
    best_pair: tuple | None = field(default=None, repr=False)


def _axis_pure_vectors(algebra: TracialAlgebra) -> list[tuple[int, np.ndarray]]:
    """Deterministic pure-state directions: axes plus two-axis mixtures."""
    out = []
    for b, n in enumerate(algebra.block_dims):
        eye = np.eye(n)
        for k in range(n):
            out.append((b, eye[:, k].astype(complex)))
        for k in range(n):
            for l in range(k + 1, n):
                out.append((b, (eye[:, k] + eye[:, l]) / np.sqrt(2) + 0j))
                out.append((b, (eye[:, k] + 1j * eye[:, l]) / np.sqrt(2)))
    return out


def _pure_state(algebra: TracialAlgebra, block: int, v: np.ndarray) -> State:
    blocks = [np.zeros((n, n), dtype=complex) for n in algebra.block_dims]
    w = v / np.linalg.norm(v)
    blocks[block] = np.outer(w, w.conj()) / algebra.trace_weights[block]
    return State(
        element=AlgebraElement(algebra, blocks),
        min_eigenvalue=0.0,
        component_tag="singular" if algebra.dim > 1 else "invertible",
    )


def _pack(v: np.ndarray) -> np.ndarray:
    return np.concatenate([v.real, v.imag])


def _unpack(z: np.ndarray) -> np.ndarray:
    n = len(z) // 2
    return z[:n] + 1j * z[n:]


def _ascend(
    objective: Callable[[np.ndarray], float],
    z0: np.ndarray,
    steps: int,
    step_size: float = 0.1,
) -> tuple[np.ndarray, float]:
    """Projected-gradient ascent with halving backtracking."""
    z = z0 / np.linalg.norm(z0)
    f = objective(z)
    h = 1e-6
    step = step_size
    for _ in range(steps):
        g = np.zeros_like(z)
        for i in range(len(z)):
            zp = z.copy()
            zp[i] += h
            zm = z.copy()
            zm[i] -= h
            g[i] = (objective(zp) - objective(zm)) / (2 * h)
        gn = np.linalg.norm(g)
        if gn < 1e-14:
            break
        improved = False
        trial_step = step
        for _ in range(20):
            zt = z + trial_step * g / gn
            zt = zt / np.linalg.norm(zt)
            ft = objective(zt)
            if ft > f:
                z, f = zt, ft
                improved = True
                break
            trial_step /= 2.0
        if not improved:
            break
    return z, f


def _polish(objective, z0: np.ndarray, maximize: bool) -> tuple[np.ndarray, float]:
    sign = -1.0 if maximize else 1.0
    res = minimize(
        lambda z: sign * objective(z),
        z0,
        method="Nelder-Mead",
        options={"fatol": 1e-13, "xatol": 1e-9, "maxiter": 1200, "maxfev": 2400},
    )
    return res.x, sign * res.fun


def contraction_estimate(
    s: SuperOperator,
    n_samples: int = 64,
    refine_iters: int = 50,
    rng: np.random.Generator | None = None,
    eta_samples: int | None = None,
    eta_starts: int = 3,
    polish: bool = True,
    include_axis_probes: bool = True,
    max_fp_iter: int = 5000,
    tols: Tolerances = DEFAULT_TOLS,
) -> ContractionEstimate:
    """Bracket the projective Lipschitz constant of a faithful positive map.

    Lower bound: the distance between projective images is evaluated on
    sampled pairs of boundary and pure states (plus a deterministic set of
    axis-aligned pure states) and ascended over pure-state vectors with
    projected gradients; because every evaluated value is the distance of
    two actual image points, the maximum is a true lower bound of the image
    diameter.

    Upper bound: the fixed point x0 of the projective action is located by
    iteration, and eta is the infimum over pure states e of
    ``min(m(s.e, x0), m(x0, s.e))``; the sandwich
    ``eta x0 <= s.x <= eta^-1 x0`` is linear in x so pure states suffice,
    and it implies the Lipschitz constant is at most
    ``(1 - eta^4)/(1 + eta^4)``.
    """
    if faithfulness_check(s, tols) != YES:
        raise HypothesisViolationError(
            "contraction constants are defined for faithful positive maps only"
        )
    alg = s.algebra
    if rng is None:
        rng = np.random.default_rng(0)

    def image(x: State) -> State:
        return projective_action(s, x, tols)

    def image_of_vec(block: int, v: np.ndarray) -> State:
        return image(_pure_state(alg, block, v))

    lower = 0.0
    best_pair = None

    axis = _axis_pure_vectors(alg) if include_axis_probes else []
    axis_states = [(b, v, image_of_vec(b, v)) for b, v in axis]
    for i in range(len(axis_states)):
        for j in range(i + 1, len(axis_states)):
            d = hennion_distance(axis_states[i][2], axis_states[j][2], tols)
            if d > lower:
                lower = d
                best_pair = (
                    (axis_states[i][0], axis_states[i][1]),
                    (axis_states[j][0], axis_states[j][1]),
                )

    kinds = ("boundary", "pure")
    for j in range(n_samples):
        xa = random_state(alg, kinds[j % 2], rng, tols=tols)
        xb = random_state(alg, kinds[(j + 1) % 2], rng, tols=tols)
        d = hennion_distance(image(xa), image(xb), tols)
        if d > lower:
            lower = d
            best_pair = (xa, xb)

    # refine over pure-state vector pairs
    pure_pair = None
    if best_pair is not None and isinstance(best_pair[0], tuple):
        pure_pair = best_pair
    else:
        cand_lower = 0.0
        for _ in range(max(4, n_samples // 8)):
            ba = int(rng.integers(alg.n_blocks))
            bb = int(rng.integers(alg.n_blocks))
            va = rng.standard_normal(alg.block_dims[ba]) + 1j * rng.standard_normal(
                alg.block_dims[ba]
            )
            vb = rng.standard_normal(alg.block_dims[bb]) + 1j * rng.standard_normal(
                alg.block_dims[bb]
            )
            d = hennion_distance(image_of_vec(ba, va), image_of_vec(bb, vb), tols)
            if d >= cand_lower:
                cand_lower = d
                pure_pair = ((ba, va), (bb, vb))

    if pure_pair is not None and refine_iters > 0 and lower < 1.0 - 1e-12:
        (ba, va), (bb, vb) = pure_pair
        na, nb = alg.block_dims[ba], alg.block_dims[bb]

        def objective(z: np.ndarray) -> float:
            u = _unpack(z[: 2 * na])
            w = _unpack(z[2 * na :])
            if np.linalg.norm(u) < 1e-12 or np.linalg.norm(w) < 1e-12:
                return 0.0
            return hennion_distance(image_of_vec(ba, u), image_of_vec(bb, w), tols)

        z0 = np.concatenate([_pack(va / np.linalg.norm(va)), _pack(vb / np.linalg.norm(vb))])
        z, f = _ascend(objective, z0, refine_iters)
        if polish:
            z, f = _polish(objective, z, maximize=True)
        if f > lower:
            lower = min(f, 1.0)
            best_pair = (
                (ba, _unpack(z[: 2 * na])),
                (bb, _unpack(z[2 * na :])),
            )

    # fixed point by iteration
    fixed_point = None
    converged = False
    fp_iters = 0
    if lower <= 1.0 - 1e-9:
        x = alg.maximally_mixed()
        try:
            for fp_iters in range(1, max_fp_iter + 1):
                nxt = image(x)
                if norm(alg, nxt.element - x.element, "one") <= tols.fixed_point_tol:
                    x = nxt
                    converged = True
                    break
                x = nxt
        except KernelStateError:
            converged = False
        if converged:
            fixed_point = x

    eta = 0.0
    if fixed_point is not None:
        # The sandwich constraint is linear in the input state, so its
        # constant is an infimum over pure states.  Each of the two sides is
        # minimized separately (they are smooth away from eigenvalue
        # crossings) with multi-start descent, and a fresh verification
        # sweep is folded in so a missed basin lowers the certificate
        # instead of invalidating it.
        def side_lo(block: int, v: np.ndarray) -> float:
            return m_quantity(image_of_vec(block, v), fixed_point, tols).value

        def side_hi(block: int, v: np.ndarray) -> float:
            return m_quantity(fixed_point, image_of_vec(block, v), tols).value

        n_eta = eta_samples if eta_samples is not None else max(8, n_samples // 2)
        cands = list(axis)
        for _ in range(n_eta):
            b = int(rng.integers(alg.n_blocks))
            v = rng.standard_normal(alg.block_dims[b]) + 1j * rng.standard_normal(
                alg.block_dims[b]
            )
            cands.append((b, v))
        scored = [(side_lo(b, v), side_hi(b, v), b, v) for b, v in cands]
        eta = min(min(s[0], s[1]) for s in scored)

        def _descend(side_fn, start_b, start_v, iters) -> float:
            def neg_obj(z: np.ndarray) -> float:
                u = _unpack(z)
                if np.linalg.norm(u) < 1e-12:
                    return -1.0
                return -side_fn(start_b, u)

            z0 = _pack(start_v / np.linalg.norm(start_v))
            z, fneg = _ascend(neg_obj, z0, iters)
            if polish:
                z, fneg = _polish(neg_obj, z, maximize=True)
            return -fneg

        if eta > 0.0 and refine_iters > 0:
            for side_idx, side_fn in ((0, side_lo), (1, side_hi)):
                starts = sorted(scored, key=lambda entry: entry[side_idx])[:eta_starts]
                for entry in starts:
                    eta = min(eta, _descend(side_fn, entry[2], entry[3], refine_iters))
        if eta > 0.0:
            sweep_n = max(32, n_eta)
            retry = None
            for _ in range(sweep_n):
                b = int(rng.integers(alg.n_blocks))
                v = rng.standard_normal(alg.block_dims[b]) + 1j * rng.standard_normal(
                    alg.block_dims[b]
                )
                for side_idx, side_fn in ((0, side_lo), (1, side_hi)):
                    val = side_fn(b, v)
                    if val < eta:
                        eta = val
                        retry = (side_fn, b, v)
            if retry is not None and refine_iters > 0:
                eta = min(eta, _descend(retry[0], retry[1], retry[2], refine_iters))
        eta = float(min(max(eta, 0.0), 1.0))
        # back off by the certificate margin to absorb roundoff
        eta = max(0.0, eta * (1.0 - tols.cert_margin))

    if eta > 0.0:
        e4 = eta**4
        upper = (1.0 - e4) / (1.0 + e4)
    else:
        upper = 1.0
    upper = min(1.0, max(upper, lower))

    return ContractionEstimate(
        lower_bound=float(lower),
        upper_bound=float(upper),
        fixed_point=fixed_point,
        eta=eta,
        n_samples=n_samples,
        refine_iters=refine_iters,
        fixed_point_converged=converged,
        fixed_point_iterations=fp_iters,
        convergence_error=(not converged) and lower < 1.0 - 1e-9,
        best_pair=best_pair,
    )


def is_strict_contraction(
    s: SuperOperator, estimate: ContractionEstimate
) -> str:
    """Certified verdict from a computed bracket."""
    if estimate.upper_bound < 1.0 - 1e-6:
        return "certified_yes"
    if estimate.lower_bound > 1.0 - 1e-9:
        return "certified_no"
    return "undecided"


# ---------------------------------------------------------------------------
# reducibility and unitalization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IrreducibilityVerdict:
    kind: str  # "no_invariant_projection_found" or "reducible"
    witness: AlgebraElement | None = None
    scale: float | None = None


def _proj_candidates(
    s: SuperOperator, rng: np.random.Generator, n_random: int, tols: Tolerances
) -> list[AlgebraElement]:
    alg = s.algebra
    cands: list[AlgebraElement] = []

    def add_from_spectrum(x: AlgebraElement) -> None:
        # cumulative spectral projections across the joint block spectrum
        pairs = []
        for b, blk in enumerate(x.hermitize(tols).blocks):
            w, v = np.linalg.eigh(blk)
            for k in range(len(w)):
                pairs.append((float(w[k]), b, v[:, k]))
        pairs.sort(key=lambda t: t[0])
        for cut in range(1, len(pairs)):
            blocks = [np.zeros((n, n), dtype=complex) for n in alg.block_dims]
            for _, b, vec in pairs[:cut]:
                blocks[b] += np.outer(vec, vec.conj())
            cands.append(AlgebraElement(alg, blocks))

    # block indicators
    if alg.n_blocks > 1:
        for b in range(alg.n_blocks):
            blocks = [np.zeros((n, n), dtype=complex) for n in alg.block_dims]
            blocks[b] = np.eye(alg.block_dims[b], dtype=complex)
            cands.append(AlgebraElement(alg, blocks))
    # axis projections and cumulative sums
    for b, n in enumerate(alg.block_dims):
        for k in range(n):
            blocks = [np.zeros((m, m), dtype=complex) for m in alg.block_dims]
            blocks[b][k, k] = 1.0
            cands.append(AlgebraElement(alg, blocks))
    # spectral structure of the fixed point (or of s(1))
    try:
        est = contraction_estimate(
            s, n_samples=8, refine_iters=0, rng=rng, polish=False, tols=tols
        )
        anchor = est.fixed_point.element if est.fixed_point else s.apply(alg.identity())
    except HypothesisViolationError:
        anchor = s.apply(alg.identity())
    add_from_spectrum(anchor)
    # iterated supports of images of random projections
    for _ in range(n_random):
        p = random_state(alg, "pure", rng, tols=tols).element
        q = support_projection(alg, p, tols=tols)
        for _ in range(3):
            img = s.apply(q).hermitize(tols)
            q = support_projection(alg, img, rank_tol=1e-9, tols=tols)
            cands.append(q)
    return cands


def irreducibility_probe(
    s: SuperOperator,
    rng: np.random.Generator | None = None,
    n_random: int = 8,
    tols: Tolerances = DEFAULT_TOLS,
) -> IrreducibilityVerdict:
    """Search for a non-trivial projection p with s(p) <= lambda p.

    The search covers block indicators, axis projections, spectral
    projections of the fixed point, and iterated supports of images of
    random projections.  Absence of a witness is heuristic evidence only,
    not a proof of irreducibility.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    alg = s.algebra
    total = sum(alg.block_dims)
    for p in _proj_candidates(s, rng, n_random, tols):
        tr_p = trace(alg, p).real
        rank = round(
            sum(float(np.trace(blk).real) for blk in p.blocks)
        )
        if rank <= 0 or rank >= total:
            continue
        img = s.apply(p).hermitize(tols)
        one_minus = alg.identity() - p
        resid = one_minus @ img @ one_minus
        lam = norm(alg, img, "inf")
        if norm(alg, resid, "inf") <= 1e-10 * max(lam, 1.0):
            return IrreducibilityVerdict("reducible", witness=p, scale=lam)
        del tr_p
    return IrreducibilityVerdict("no_invariant_projection_found")


def unitalize(s: SuperOperator, tols: Tolerances = DEFAULT_TOLS) -> SuperOperator:
    """Unital tracial repair of a subunital, subtracial positive map.

    Adds the rank-one correction
    ``x -> (tau(x) - tau(s(x))) / (1 - tau(s(1))) * (1 - s(1))``
    which restores both unitality and trace preservation, and never
    increases the contraction constant.
    """
    validate_flags(s)
    alg = s.algebra
    one = alg.identity()
    s1 = s.apply(one).hermitize(tols)
    defect = one - s1
    if not is_positive(alg, defect, tols=tols):
        raise RejectedInputError("map is not subunital; nothing to repair")
    dual1 = s.apply_dual(one).hermitize(tols)
    if not is_positive(alg, one - dual1, tols=tols):
        raise RejectedInputError("map is not subtracial; nothing to repair")
    denom = 1.0 - trace(alg, s1).real
    if denom <= 1e-12:
        raise RejectedInputError("map is already tracial; correction is degenerate")
    c1 = alg.coefficients(one)
    w = c1 - s.matrix.T @ c1  # beta -> tau(b_beta) - tau(s(b_beta))
    mat = s.matrix + np.outer(alg.coefficients(defect), w) / denom
    out = SuperOperator(
        alg,
        mat,
        MapFlags(positive=s.flags.positive, completely_positive=s.flags.completely_positive),
        {"kind": "composition", "factors": [s.provenance, {"kind": "unital_repair"}]},
    )
    return validate_flags(out)
