"""Chain states generated by a random transfer map on a bond algebra.

A generator consumes one on-site observable and one bond observable and
returns a bond observable; iterating it right to left across an interval
and closing with the limit state of the flanking bond process produces a
translation-covariant family of states on the two-sided chain.  Because
the generator is unital, sites outside the support of an observable
telescope away exactly, so every value reduces to a finite contraction
whose only error is the certified contraction bound of the flank.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .algebra import (
    AlgebraElement,
    State,
    TracialAlgebra,
    is_positive,
    norm,
    tensor_algebra,
    tensor_element,
    trace,
)
from .config import DEFAULT_TOLS, Tolerances
from .errors import (
    HypothesisViolationError,
    RejectedInputError,
    ShapeMismatchError,
)
from .process import (
    ChannelEnsemble,
    ErgodicDriver,
    EstimatorOptions,
    ProcessPlan,
    derive_seed,
    parameter_seed,
    run_experiment,
)
from .qmaps import MapFlags, SuperOperator, contraction_estimate, validate_flags

__all__ = [
    "GeneratorMap",
    "LocalObservable",
    "PsiEstimate",
    "DecayRow",
    "DecayReport",
    "BirkhoffReport",
    "product_generator",
    "random_unital_generator",
    "iterate_generator",
    "psi_value",
    "psi_of_parts",
    "translation_covariance_check",
    "clustering_experiment",
    "birkhoff_average",
    "bond_process_ensemble",
]


# ---------------------------------------------------------------------------
# product basis of tensor powers
# ---------------------------------------------------------------------------

_POWER_CACHE: dict = {}


def _check_budget(alg: TracialAlgebra, length: int) -> None:
    if alg.dim**length > 4096:
        raise RejectedInputError(
            f"observable support of {length} sites exceeds the dense-tensor budget"
        )


def _tensor_power(alg: TracialAlgebra, length: int) -> TracialAlgebra:
    key = (id(alg), "alg", length)
    if key not in _POWER_CACHE:
        out = alg
        for _ in range(length - 1):
            out = tensor_algebra(out, alg)
        _POWER_CACHE[key] = out
    return _POWER_CACHE[key]


def _product_basis(alg: TracialAlgebra, length: int) -> list:
    """Kron products of single-site basis elements, row-major site order."""
    key = (id(alg), "basis", length)
    if key in _POWER_CACHE:
        return _POWER_CACHE[key]
    if alg.dim**length > 4096:
        raise RejectedInputError(
            f"observable support of {length} sites exceeds the dense-tensor budget"
        )
    singles = [alg.basis_element(k) for k in range(alg.dim)]
    basis = singles
    power = alg
    for _ in range(length - 1):
        power = tensor_algebra(power, alg)
        basis = [tensor_element(power, b, s) for b in basis for s in singles]
    _POWER_CACHE[key] = basis
    return basis


@dataclass(frozen=True)
class LocalObservable:
    """An observable supported on a finite integer interval of sites.

    ``element`` lives in the ``length``-fold tensor power of the on-site
    algebra; its expansion over products of single-site basis elements is
    cached, and embedding into any larger window is implicit (identity
    sites never enter the evaluation, preserving the sup norm).
    """

    site_algebra: TracialAlgebra
    support: tuple[int, int]
    element: AlgebraElement
    norm_inf: float
    coeff_tensor: np.ndarray = field(repr=False)

    @property
    def support_interval(self) -> tuple[int, int]:
        return self.support

    @property
    def length(self) -> int:
        return self.support[1] - self.support[0] + 1

    @staticmethod
    def from_element(
        site_algebra: TracialAlgebra,
        support: tuple[int, int],
        element: AlgebraElement,
    ) -> "LocalObservable":
        lo, hi = int(support[0]), int(support[1])
        if hi < lo:
            raise RejectedInputError("empty support interval")
        length = hi - lo + 1
        _check_budget(site_algebra, length)
        power = _tensor_power(site_algebra, length)
        power._check_member(element)
        basis = _product_basis(site_algebra, length)
        coeffs = np.array([trace(power, b @ element) for b in basis], dtype=complex)
        return LocalObservable(
            site_algebra=site_algebra,
            support=(lo, hi),
            element=element,
            norm_inf=norm(power, element, "inf"),
            coeff_tensor=coeffs,
        )

    @staticmethod
    def from_sites(
        site_algebra: TracialAlgebra,
        start: int,
        factors: Sequence[AlgebraElement],
    ) -> "LocalObservable":
        if not factors:
            raise RejectedInputError("need at least one site factor")
        _check_budget(site_algebra, len(factors))
        power = site_algebra
        elem = factors[0]
        for f in factors[1:]:
            power = tensor_algebra(power, site_algebra)
            elem = tensor_element(power, elem, f)
        return LocalObservable.from_element(
            site_algebra, (start, start + len(factors) - 1), elem
        )

    def shifted(self, k: int) -> "LocalObservable":
        return LocalObservable(
            site_algebra=self.site_algebra,
            support=(self.support[0] + k, self.support[1] + k),
            element=self.element,
            norm_inf=self.norm_inf,
            coeff_tensor=self.coeff_tensor,
        )


# ---------------------------------------------------------------------------
# generator maps
# ---------------------------------------------------------------------------


class GeneratorMap:
    """A parameterized unital positive map from site (x) bond to bond.

    ``map_at`` returns the coefficient matrix of shape
    ``(dim_bond, dim_site * dim_bond)`` over the product basis (site index
    major), and ``induced_phi`` restricts it to identity on the site
    factor, giving the unital bond map whose predual drives the flank
    process.
    """

    def __init__(
        self,
        on_site: TracialAlgebra,
        bond: TracialAlgebra,
        recipe: str,
        builder: Callable[[object], np.ndarray],
        params: dict | None = None,
    ):
        self.on_site = on_site
        self.bond = bond
        self.recipe = recipe
        self.params = params or {}
        self._builder = builder
        self._e_cache: dict = {}
        self._phi_cache: dict = {}
        self._c1_site = on_site.coefficients(on_site.identity())

    def map_at(self, parameter) -> np.ndarray:
        if parameter in self._e_cache:
            return self._e_cache[parameter]
        mat = np.asarray(self._builder(parameter), dtype=complex)
        expected = (self.bond.dim, self.on_site.dim * self.bond.dim)
        if mat.shape != expected:
            raise ShapeMismatchError(
                f"generator matrix has shape {mat.shape}, expected {expected}"
            )
        mat.setflags(write=False)
        if len(self._e_cache) < 512:
            self._e_cache[parameter] = mat
        return mat

    def induced_phi(self, parameter) -> SuperOperator:
        if parameter in self._phi_cache:
            return self._phi_cache[parameter]
        e3 = self.map_at(parameter).reshape(
            self.bond.dim, self.on_site.dim, self.bond.dim
        )
        mat = np.einsum("bag,a->bg", e3, self._c1_site)
        phi = SuperOperator(
            self.bond,
            mat,
            MapFlags(positive="yes"),
            {"kind": "explicit_matrix", "note": f"induced_phi[{self.recipe}]"},
        )
        validate_flags(phi)
        phi.flags.positive = "yes"
        if len(self._phi_cache) < 512:
            self._phi_cache[parameter] = phi
        return phi

    def apply_e(
        self, parameter, site_obs: AlgebraElement, bond_obs: AlgebraElement
    ) -> AlgebraElement:
        """Evaluate the generator on an elementary tensor."""
        ca = self.on_site.coefficients(site_obs)
        cx = self.bond.coefficients(bond_obs)
        e3 = self.map_at(parameter).reshape(
            self.bond.dim, self.on_site.dim, self.bond.dim
        )
        return self.bond.from_coefficients(np.einsum("bag,a,g->b", e3, ca, cx))

    def validate(
        self,
        parameter,
        n_probe: int = 32,
        rng: np.random.Generator | None = None,
        tols: Tolerances = DEFAULT_TOLS,
    ) -> None:
        """Unitality, positivity on sampled positive inputs, consistency."""
        if rng is None:
            rng = np.random.default_rng(0)
        one_out = self.apply_e(parameter, self.on_site.identity(), self.bond.identity())
        if norm(self.bond, one_out - self.bond.identity(), "inf") > 1e-10:
            raise HypothesisViolationError("generator is not unital")
        pair = tensor_algebra(self.on_site, self.bond)
        basis2 = _pair_basis(self.on_site, self.bond)
        emat = self.map_at(parameter)
        for _ in range(n_probe):
            from .algebra import random_state

            z = random_state(pair, "full", rng, tols=tols).element
            cz = np.array([trace(pair, b @ z) for b in basis2])
            out = self.bond.from_coefficients(emat @ cz)
            if not is_positive(self.bond, out, tols=tols):
                raise HypothesisViolationError(
                    "generator failed a positivity probe"
                )
        phi = self.induced_phi(parameter)
        for g in range(self.bond.dim):
            x = self.bond.basis_element(g)
            lhs = self.apply_e(parameter, self.on_site.identity(), x)
            rhs = phi.apply(x)
            if norm(self.bond, lhs - rhs, "inf") > 1e-12 * max(
                1.0, norm(self.bond, rhs, "inf")
            ):
                raise HypothesisViolationError(
                    "induced bond map disagrees with the generator on 1 (x) probes"
                )


def _pair_basis(site: TracialAlgebra, bond: TracialAlgebra) -> list:
    key = (id(site), id(bond), "pair")
    if key in _POWER_CACHE:
        return _POWER_CACHE[key]
    pair = tensor_algebra(site, bond)
    basis = [
        tensor_element(pair, site.basis_element(a), bond.basis_element(g))
        for a in range(site.dim)
        for g in range(bond.dim)
    ]
    _POWER_CACHE[key] = basis
    return basis


def product_generator(
    on_site: TracialAlgebra, bond: TracialAlgebra
) -> GeneratorMap:
    """E(a (x) x) = tau(a) x; generates the infinite product trace state."""
    c1 = on_site.coefficients(on_site.identity())
    mat = np.kron(c1[None, :], np.eye(bond.dim))

    def build(_parameter) -> np.ndarray:
        return mat

    return GeneratorMap(on_site, bond, "product", build)


def random_unital_generator(
    on_site: TracialAlgebra,
    bond: TracialAlgebra,
    kraus_rank: int = 3,
    recipe: str = "random_unital_cp",
) -> GeneratorMap:
    """Random completely positive unital generator (single-block algebras).

    Draws Gaussian Kraus factors from the pair representation to the bond
    representation and conjugates by the inverse square root of the image
    of the identity so the result is exactly unital.
    """
    if on_site.n_blocks != 1 or bond.n_blocks != 1:
        raise RejectedInputError("random generators support single-block algebras")
    n_m, n_w = on_site.block_dims[0], bond.block_dims[0]
    pair_basis = _pair_basis(on_site, bond)
    pair_mats = [b.blocks[0] for b in pair_basis]  # concrete (n_m n_w) matrices

    def build(parameter) -> np.ndarray:
        rng = np.random.default_rng(parameter_seed(parameter))
        for _ in range(64):
            kraus = [
                rng.standard_normal((n_w, n_m * n_w))
                + 1j * rng.standard_normal((n_w, n_m * n_w))
                for _ in range(kraus_rank)
            ]
            r_one = sum(v @ v.conj().T for v in kraus)
            w, u = np.linalg.eigh(r_one)
            if w[0] > 1e-8 * w[-1]:
                break
        inv_half = (u / np.sqrt(w)) @ u.conj().T
        cols = []
        for z in pair_mats:
            out = inv_half @ sum(v @ z @ v.conj().T for v in kraus) @ inv_half
            cols.append(bond.coefficients(AlgebraElement(bond, [out])))
        return np.stack(cols, axis=1)

    return GeneratorMap(
        on_site, bond, recipe, build, {"kraus_rank": kraus_rank}
    )


def bond_process_ensemble(generator: GeneratorMap) -> ChannelEnsemble:
    """Preduals of the induced bond maps, as a channel ensemble."""

    def build(parameter) -> SuperOperator:
        phi = generator.induced_phi(parameter)
        out = SuperOperator(
            generator.bond,
            phi.matrix.T,
            MapFlags(
                hermiticity_preserving="yes",
                positive="yes",
                completely_positive=phi.flags.completely_positive,
                unital=phi.flags.tracial,
                tracial=phi.flags.unital,
                faithful="yes",  # predual of a unital positive map
            ),
            {"kind": "predual", "of": phi.provenance},
        )
        return out

    return ChannelEnsemble(
        generator.bond,
        f"bond_predual[{generator.recipe}]",
        build,
        cache_size=1024,
    )


# ---------------------------------------------------------------------------
# chain evaluation
# ---------------------------------------------------------------------------


def _core_eval(
    generator: GeneratorMap,
    driver: ErgodicDriver,
    obs: LocalObservable,
    tail: np.ndarray,
) -> np.ndarray:
    """Consume the observable's support right to left, starting from tail.

    The working array never exceeds (site dim)^(remaining sites) by
    (bond dim); for product observables this reproduces the nested
    one-site compositions exactly.
    """
    d_m, d_w = generator.on_site.dim, generator.bond.dim
    r = np.outer(obs.coeff_tensor, tail)
    for site in range(obs.support[1], obs.support[0] - 1, -1):
        e3 = generator.map_at(driver.point_at(site)).reshape(d_w, d_m, d_w)
        r = r.reshape(-1, d_m, d_w)
        r = np.einsum("kaw,baw->kb", r, e3)
    return r.reshape(d_w)


def iterate_generator(
    generator: GeneratorMap,
    driver: ErgodicDriver,
    interval: tuple[int, int],
    obs: LocalObservable,
    tols: Tolerances = DEFAULT_TOLS,
) -> AlgebraElement:
    """Nested generator value of an observable over a window.

    Sites right of the support telescope away by unitality; sites to the
    left apply the induced bond map.  The support must sit inside the
    window.
    """
    m, n = int(interval[0]), int(interval[1])
    lo, hi = obs.support
    if lo < m or hi > n:
        raise RejectedInputError(
            f"support [{lo},{hi}] exceeds the window [{m},{n}]"
        )
    w = _core_eval(generator, driver, obs, generator.bond.coefficients(generator.bond.identity()))
    for site in range(lo - 1, m - 1, -1):
        w = generator.induced_phi(driver.point_at(site)).matrix @ w
    return generator.bond.from_coefficients(w)


@dataclass
class PsiEstimate:
    """A finite-window chain-state value with its certified truncation."""

    value: complex
    window_N: int
    truncation_bound: float
    z_state: State
    flank_upper: float
    widen_advisory: bool


def _flank_evolution(
    generator: GeneratorMap,
    driver: ErgodicDriver,
    start: int,
    stop_before: int,
    est_opts: EstimatorOptions,
    est_seed: int,
    flank_stride: int,
    tols: Tolerances,
) -> tuple[np.ndarray, float]:
    """Evolve the bond probe from ``start`` up to ``stop_before - 1``.

    Returns the evolved state coefficients and the certified contraction
    upper bound of the composed flank (monotone minimum over estimates
    computed every ``flank_stride`` steps and at the end).
    """
    bond = generator.bond
    z = bond.coefficients(bond.identity())
    if stop_before <= start:
        return z, 1.0
    flank = None
    upper = 1.0
    steps = 0
    c1 = bond.coefficients(bond.identity())
    for site in range(start, stop_before):
        gamma_mat = generator.induced_phi(driver.point_at(site)).matrix.T
        z = gamma_mat @ z
        z = z / np.dot(c1, z).real  # tracial up to roundoff
        flank = gamma_mat if flank is None else gamma_mat @ flank
        steps += 1
        if steps % flank_stride == 0 or site == stop_before - 1:
            comp = SuperOperator(bond, flank, MapFlags(positive="yes", faithful="yes"))
            est = contraction_estimate(
                comp,
                rng=np.random.default_rng(derive_seed(est_seed, f"flank:{site}")),
                tols=tols,
                **est_opts.call_kwargs(),
            )
            upper = min(upper, est.upper_bound)
    return z, upper


def psi_of_parts(
    generator: GeneratorMap,
    driver: ErgodicDriver,
    parts: Sequence[LocalObservable],
    window: int,
    est_opts: EstimatorOptions | None = None,
    est_seed: int = 0,
    flank_stride: int = 5,
    tols: Tolerances = DEFAULT_TOLS,
) -> PsiEstimate:
    """Chain-state value of a product of observables with disjoint supports.

    Parts are consumed right to left; gaps between parts apply the induced
    bond map, and the left flank down to ``-window`` closes against the
    evolved limit-state estimate.  The truncation bound is eight times the
    product of the part norms times the certified flank contraction.
    """
    if not parts:
        raise RejectedInputError("need at least one observable")
    parts = sorted(parts, key=lambda p: p.support[0])
    for left, right in zip(parts, parts[1:]):
        if left.support[1] >= right.support[0]:
            raise RejectedInputError("observable supports must be disjoint")
    lo = parts[0].support[0]
    hi = parts[-1].support[1]
    if lo < -window or hi > window:
        raise RejectedInputError(
            f"supports [{lo},{hi}] exceed the window [-{window},{window}]"
        )
    opts = est_opts or EstimatorOptions(n_samples=8, refine_iters=0, eta_samples=8)
    bond = generator.bond
    w = bond.coefficients(bond.identity())
    cursor = hi  # rightmost unconsumed site
    for part in reversed(parts):
        for site in range(cursor, part.support[1], -1):
            w = generator.induced_phi(driver.point_at(site)).matrix @ w
        w = _core_eval(generator, driver, part, w)
        cursor = part.support[0] - 1
    z, flank_upper = _flank_evolution(
        generator, driver, -window, lo, opts, est_seed, flank_stride, tols
    )
    value = complex(np.dot(w, z))
    norm_prod = math.prod(p.norm_inf for p in parts)
    bound = 8.0 * norm_prod * flank_upper
    z_state = State.from_element(bond.from_coefficients(z).hermitize(tols), tols)
    return PsiEstimate(
        value=value,
        window_N=window,
        truncation_bound=bound,
        z_state=z_state,
        flank_upper=flank_upper,
        widen_advisory=flank_upper > 0.5 and lo > -window,
    )


def psi_value(
    generator: GeneratorMap,
    driver: ErgodicDriver,
    obs: LocalObservable,
    window: int,
    **kwargs,
) -> PsiEstimate:
    """Chain-state value of a single local observable at a finite window."""
    return psi_of_parts(generator, driver, [obs], window, **kwargs)


def translation_covariance_check(
    generator: GeneratorMap,
    driver: ErgodicDriver,
    obs: LocalObservable,
    k: int,
    window: int,
    **kwargs,
) -> tuple[float, float]:
    """|value of the shifted observable - value at the shifted point|.

    Returns the deviation and the combined truncation budget of the two
    finite-window evaluations.
    """
    lhs = psi_value(generator, driver, obs.shifted(k), window, **kwargs)
    rhs = psi_value(generator, driver.shift(k), obs, window, **kwargs)
    dev = abs(lhs.value - rhs.value)
    return dev, lhs.truncation_bound + rhs.truncation_bound


# ---------------------------------------------------------------------------
# clustering
# ---------------------------------------------------------------------------


@dataclass
class DecayRow:
    gap: int
    corr: float
    bound_rhs: float
    passed: bool
    anchor: int
    d_up: float
    d_down: float


@dataclass
class DecayReport:
    rows: list
    kappa: float
    kappa_fit: float
    e_fit: float
    c_hat: float
    window: int
    degenerate: bool

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.rows)


def _d_prefactors_around(
    ensemble: ChannelEnsemble,
    driver: ErgodicDriver,
    anchor: int,
    top: int,
    bottom: int,
    kappa: float,
    est_opts: EstimatorOptions,
    est_seed: int,
    tols: Tolerances,
) -> tuple[float, float]:
    """Empirical exponential-domination prefactors at an anchor site.

    ``d_up`` covers compositions from the anchor up to ``top``; ``d_down``
    covers compositions from below up to ``anchor - 1`` starting no lower
    than ``bottom``.
    """
    from .process import extend_process, start_process

    d_up = 1.0
    if top >= anchor:
        rec = start_process(driver, ensemble, "phi_left", anchor, est_opts, est_seed, tols)
        d_up = max(d_up, rec.latest_upper() / kappa)
        while rec.n_anchor < top:
            extend_process(rec, tols=tols)
            d_up = max(d_up, rec.latest_upper() / kappa**rec.length)
    d_down = 1.0
    if anchor - 1 >= bottom:
        rec = start_process(
            driver, ensemble, "gamma_right", anchor - 1, est_opts, est_seed + 1, tols
        )
        d_down = max(d_down, rec.latest_upper() / kappa)
        while rec.m_anchor > bottom:
            extend_process(rec, tols=tols)
            d_down = max(d_down, rec.latest_upper() / kappa**rec.length)
    return d_up, d_down


def clustering_experiment(
    generator: GeneratorMap,
    driver: ErgodicDriver,
    obs_a: LocalObservable,
    obs_b: LocalObservable,
    gaps: Sequence[int],
    window: int,
    kappa: float | None = None,
    pre_run_length: int = 40,
    est_opts: EstimatorOptions | None = None,
    est_seed: int = 0,
    tols: Tolerances = DEFAULT_TOLS,
) -> DecayReport:
    """Correlation decay of the generated state across a widening gap.

    For each gap the left observable ends at site 0 and the right one
    starts at the gap, the anchor is the gap midpoint, and the certified
    bound ``8 * D_up * D_down * kappa**(gap-1) * ||a|| * ||b||`` is checked
    against the computed correlation.  The decay exponent is also fitted
    and reported.
    """
    opts = est_opts or EstimatorOptions(n_samples=10, refine_iters=4, eta_samples=8)
    ensemble = bond_process_ensemble(generator)
    # collapse rate of the flanking bond process
    plan = ProcessPlan(m_start=1, n_end=pre_run_length, direction="gamma_right")
    pre = run_experiment(
        driver, ensemble, plan, est_opts=opts, probe_seed=derive_seed(est_seed, "pre"), tols=tols
    )
    c_hat = pre.record.rate_C if pre.record.rate_C is not None else 0.5
    if kappa is None:
        kappa = min(0.999, c_hat + 0.05)

    a_placed = obs_a.shifted(-obs_a.support[1])  # ends at site 0
    value_a = psi_of_parts(
        generator, driver, [a_placed], window, est_opts=opts, est_seed=est_seed, tols=tols
    ).value

    rows = []
    for gap in gaps:
        gap = int(gap)
        if gap < 1:
            raise RejectedInputError("gaps must be >= 1")
        b_placed = obs_b.shifted(gap - obs_b.support[0])  # starts at site gap
        joint = psi_of_parts(
            generator,
            driver,
            [a_placed, b_placed],
            window,
            est_opts=opts,
            est_seed=derive_seed(est_seed, f"joint{gap}"),
            tols=tols,
        ).value
        value_b = psi_of_parts(
            generator,
            driver,
            [b_placed],
            window,
            est_opts=opts,
            est_seed=derive_seed(est_seed, f"b{gap}"),
            tols=tols,
        ).value
        corr = abs(joint - value_a * value_b)
        anchor = max(1, gap // 2)
        d_up, d_down = _d_prefactors_around(
            ensemble,
            driver,
            anchor,
            top=gap - 1,
            bottom=1,
            kappa=kappa,
            est_opts=opts,
            est_seed=derive_seed(est_seed, f"D{gap}"),
            tols=tols,
        )
        rhs = 8.0 * d_up * d_down * kappa ** (gap - 1) * obs_a.norm_inf * obs_b.norm_inf
        rows.append(
            DecayRow(
                gap=gap,
                corr=float(corr),
                bound_rhs=float(rhs),
                passed=bool(corr <= rhs * (1.0 + 1e-9) + 1e-12),
                anchor=anchor,
                d_up=float(d_up),
                d_down=float(d_down),
            )
        )

    fit_rows = [r for r in rows if r.corr > 1e-14]
    degenerate = len(fit_rows) < 2
    if degenerate:
        kappa_fit, e_fit = 0.0, 0.0
    else:
        g = np.array([r.gap for r in fit_rows], dtype=float)
        y = np.log([r.corr for r in fit_rows])
        slope, intercept = np.polyfit(g, y, 1)
        kappa_fit = float(np.exp(slope))
        e_fit = float(np.exp(intercept + slope))  # prefactor at gap 1
    return DecayReport(
        rows=rows,
        kappa=float(kappa),
        kappa_fit=kappa_fit,
        e_fit=e_fit,
        c_hat=float(c_hat),
        window=window,
        degenerate=degenerate,
    )


# ---------------------------------------------------------------------------
# ergodic averaging
# ---------------------------------------------------------------------------


@dataclass
class BirkhoffReport:
    n_values: list
    partial_averages: list  # one array of partial averages per sampled point
    limit_estimates: list
    cross_sample_spread: float
    invariance_deviation: float
    budget: float


def _driver_variants(
    driver: ErgodicDriver, count: int, seed: int
) -> list[ErgodicDriver]:
    rng = np.random.default_rng(derive_seed(seed, "omega"))
    out = []
    for i in range(count):
        if driver.kind == "constant":
            out.append(driver)
        elif driver.kind == "rotation":
            out.append(
                ErgodicDriver(
                    "rotation", alpha=driver.alpha, omega0=float(rng.random())
                )
            )
        else:
            out.append(
                ErgodicDriver(
                    driver.kind,
                    master_seed=int(rng.integers(1 << 62)),
                    period=driver.period,
                )
            )
    return out


def birkhoff_average(
    generator: GeneratorMap,
    driver: ErgodicDriver,
    obs: LocalObservable,
    n_max: int,
    omega_samples: int = 1,
    window: int = 30,
    est_opts: EstimatorOptions | None = None,
    est_seed: int = 0,
    tols: Tolerances = DEFAULT_TOLS,
) -> BirkhoffReport:
    """Partial orbit averages of the chain-state value of an observable.

    For every sampled point the values along the orbit are evaluated at a
    fixed flank window and averaged over symmetric index ranges up to
    ``n_max``; the cross-sample spread of the deepest average and the
    deviation of the average under a one-site shift of the observable are
    reported against the combined truncation budget.
    """
    opts = est_opts or EstimatorOptions(n_samples=6, refine_iters=0, eta_samples=6)
    drivers = _driver_variants(driver, omega_samples, est_seed)
    n_values = list(range(1, n_max + 1))
    partials_all, limits = [], []
    budget = 0.0
    shift_dev = 0.0
    for i, drv in enumerate(drivers):
        vals = {}
        for n in range(-n_max, n_max + 1):
            est = psi_value(
                generator,
                drv.shift(n),
                obs,
                window,
                est_opts=opts,
                est_seed=derive_seed(est_seed, f"psi{i}:{n}"),
                tols=tols,
            )
            vals[n] = est.value
            budget = max(budget, est.truncation_bound)
        partials = np.array(
            [
                np.mean([vals[n] for n in range(-nn, nn + 1)])
                for nn in n_values
            ]
        )
        partials_all.append(partials)
        limits.append(complex(partials[-1]))
        if i == 0:
            shifted = psi_value(
                generator,
                drv.shift(1),
                obs,
                window,
                est_opts=opts,
                est_seed=derive_seed(est_seed, f"inv{i}"),
                tols=tols,
            )
            # one-site covariance: the shifted average equals the average of
            # the orbit values displaced by one index
            disp = np.mean([vals[n] for n in range(-n_max + 1, n_max + 1)] + [shifted.value])
            shift_dev = abs(disp - partials[-1])
    spread = 0.0
    for i in range(len(limits)):
        for j in range(i + 1, len(limits)):
            spread = max(spread, abs(limits[i] - limits[j]))
    return BirkhoffReport(
        n_values=n_values,
        partial_averages=partials_all,
        limit_estimates=limits,
        cross_sample_spread=spread,
        invariance_deviation=float(shift_dev),
        budget=float(budget),
    )
