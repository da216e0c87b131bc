"""Entanglement bounds, error-model fitting, and experiment planning.

Takes correlator estimates produced by the scanner and turns them into
statements about the source: certified lower bounds on the entanglement
localizable between photon pairs (via two-qubit entanglement of
formation), fitted per-photon error rates, and the extrapolated
entanglement length.  Also contains the budget calculators that compare
the passive template scheme against brute-force tomography.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .templates import (CorrelatorEstimate, Template, TemplateFamily,
                        make_template, zz_flip_pair_count)

_THIRD = 1.0 / 3.0

FamilyLike = Union[TemplateFamily, str]


def _family(family: FamilyLike) -> TemplateFamily:
    if isinstance(family, TemplateFamily):
        return family
    return TemplateFamily(family)


def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


# ---------------------------------------------------------------------------
# Two-qubit state reconstruction and entanglement measures.

@dataclass(frozen=True)
class TwoQubitMoments:
    """The three correlators fixing the reconstructed endpoint-pair state.

    mu_yz and mu_zy come from the two shifts of the same two-basis
    template; mu_xx from the three-basis one.  The state they define is
    diagonal in a maximally entangled basis, so its spectrum and
    entanglement have closed forms.
    """

    mu_yz: float
    mu_zy: float
    mu_xx: float

    def __post_init__(self) -> None:
        for name in ("mu_yz", "mu_zy", "mu_xx"):
            if abs(getattr(self, name)) > 1.0 + 1e-9:
                raise ValueError(f"{name} must lie in [-1, 1]")


def rho_tilde_eigenvalues(m: TwoQubitMoments) -> np.ndarray:
    """Spectrum (1 + s1*mu_yz + s2*mu_zy + s1*s2*mu_xx)/4, descending.

    The three correlator operators commute pairwise and the third is the
    product of the first two, so joint signs are (s1, s2, s1*s2).
    Statistical estimates may produce small negative values; callers
    clamp with a tolerance rather than reject.
    """
    eigs = [(1.0 + s1 * m.mu_yz + s2 * m.mu_zy + s1 * s2 * m.mu_xx) / 4.0
            for s1 in (1.0, -1.0) for s2 in (1.0, -1.0)]
    return np.sort(np.asarray(eigs))[::-1]


def _clamped_spectrum(m: TwoQubitMoments,
                      tol: float = 1e-9) -> Tuple[np.ndarray, bool]:
    eigs = rho_tilde_eigenvalues(m)
    clamped = bool(eigs[-1] < -tol)
    eigs = np.clip(eigs, 0.0, None)
    return eigs / eigs.sum(), clamped


def concurrence(m: TwoQubitMoments, tol: float = 1e-9) -> float:
    """max(0, 2*lambda_max - 1) on the clamped, renormalized spectrum."""
    eigs, _ = _clamped_spectrum(m, tol)
    return max(0.0, 2.0 * float(eigs[0]) - 1.0)


def eof_from_concurrence(c: float) -> float:
    """Entanglement of formation in bits from the concurrence."""
    if not 0.0 <= c <= 1.0:
        raise ValueError("concurrence must lie in [0, 1]")
    if c == 0.0:
        return 0.0
    if c == 1.0:
        return 1.0
    x = 0.5 * (1.0 + math.sqrt(1.0 - c * c))
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def eof(m: TwoQubitMoments, tol: float = 1e-9) -> float:
    return eof_from_concurrence(concurrence(m, tol))


# ---------------------------------------------------------------------------
# Direct bounds from measured correlators.

@dataclass(frozen=True)
class LEBoundRow:
    l: int
    mu_gamma1: float
    mu_gamma2: float
    eof_central: float
    eof_conservative: float
    clamped: bool
    method: str = "direct"


@dataclass(frozen=True)
class LEBoundTable:
    rows: Tuple[LEBoundRow, ...]
    xi_e: int
    z: float


def _clip_unit(v: float) -> float:
    return min(1.0, max(-1.0, v))


def direct_bounds(estimates: Sequence[CorrelatorEstimate],
                  ls: Optional[Sequence[int]] = None,
                  z: float = 1.96) -> LEBoundTable:
    """Per-separation lower bounds on localizable entanglement.

    For each l, sets mu_yz = mu_zy = mean of the two-basis template and
    mu_xx = mean of the three-basis one, then reports the central bound
    and a conservative one with every moment lowered by z standard
    errors (clamped to [-1, 1]).  Requires both families at every
    requested l; when ``ls`` is omitted, uses every l where both are
    present with at least one match.  The table's xi_e is the largest l
    whose conservative bound is still positive (0 if none).
    """
    by_l: Dict[int, Dict[str, CorrelatorEstimate]] = {}
    for est in estimates:
        by_l.setdefault(est.l, {})[est.family] = est

    def usable(d: Dict[str, CorrelatorEstimate]) -> bool:
        return all(f.value in d and d[f.value].match_count > 0
                   for f in TemplateFamily)

    if ls is None:
        ls = sorted(l for l, d in by_l.items() if usable(d))
    rows: List[LEBoundRow] = []
    for l in ls:
        d = by_l.get(l, {})
        if not usable(d):
            raise ValueError(f"no usable estimates for both families at l={l}")
        e1 = d[TemplateFamily.GAMMA1.value]
        e2 = d[TemplateFamily.GAMMA2.value]
        central = TwoQubitMoments(e1.mean, e1.mean, e2.mean)
        spec_c, clamped_c = _clamped_spectrum(central)
        m1 = _clip_unit(e1.mean - z * e1.stderr)
        m2 = _clip_unit(e2.mean - z * e2.stderr)
        conservative = TwoQubitMoments(m1, m1, m2)
        spec_k, clamped_k = _clamped_spectrum(conservative)
        rows.append(LEBoundRow(
            l=l,
            mu_gamma1=e1.mean,
            mu_gamma2=e2.mean,
            eof_central=eof_from_concurrence(
                max(0.0, 2.0 * float(spec_c[0]) - 1.0)),
            eof_conservative=eof_from_concurrence(
                max(0.0, 2.0 * float(spec_k[0]) - 1.0)),
            clamped=clamped_c or clamped_k,
        ))
    xi = max((r.l for r in rows if r.eof_conservative > 0.0), default=0)
    return LEBoundTable(rows=tuple(rows), xi_e=xi, z=z)


# ---------------------------------------------------------------------------
# Decay-law predictors.

def _n_measured(l: int) -> int:
    # same for both families: (2l + 8) / 3 on the l = 2 (mod 3) grid
    return (2 * l + 8) // 3


def predict_gamma(family: FamilyLike, l: int, p_sigma: float,
                  p_zz: float) -> float:
    """Asymptotic decay of a template mean with the two error rates.

    (1 - 4*p_sigma/3)^n_measured * (1 - 2*p_zz)^(2l/3).  The single-Pauli
    factor is exact (one factor per measured photon); the pair-error
    exponent 2l/3 is the large-l rate of flip-sensitive slot boundaries,
    not the per-template integer count, so this is an extrapolation
    formula rather than an exact finite-l law (see
    predicted_template_mean for the exact one).  Identical for both
    families, which share n_measured.
    """
    template = make_template(family, l)
    if not 0.0 <= p_sigma <= 0.75:
        raise ValueError("p_sigma must lie in [0, 3/4]")
    if not 0.0 <= p_zz <= 0.5:
        raise ValueError("p_zz must lie in [0, 1/2]")
    return ((1.0 - 4.0 * p_sigma / 3.0) ** template.n_measured
            * (1.0 - 2.0 * p_zz) ** (2.0 * l / 3.0))


def predicted_template_mean(template: Template, p_sigma: float,
                            p_zz: float) -> float:
    """Exact expected mean of one template under the stream's noise law.

    Every measured photon contributes (1 - 4*p_sigma/3); every adjacent
    emission pair whose Z*Z error flips the window product contributes
    (1 - 2*p_zz).  Both exponents are integers counted from the template
    itself.
    """
    _check_probability("p_sigma", p_sigma)
    _check_probability("p_zz", p_zz)
    return ((1.0 - 4.0 * p_sigma / 3.0) ** template.n_measured
            * (1.0 - 2.0 * p_zz) ** zz_flip_pair_count(template))


# ---------------------------------------------------------------------------
# Error-model fitting.

@dataclass(frozen=True)
class ErrorModelFit:
    """Weighted least-squares recovery of the two error rates.

    alpha = ln(1 - 4*p_sigma/3) and beta = ln(1 - 2*p_zz) are the
    regression parameters; ``covariance`` is the 2x2 covariance of
    (p_sigma, p_zz), ``cov_alpha_beta`` of (alpha, beta).  Rates are
    clamped into their physical domains; alpha and beta stay raw.
    """

    p_sigma: float
    p_zz: float
    covariance: np.ndarray
    chi2: float
    dof: int
    alpha: float
    beta: float
    cov_alpha_beta: np.ndarray
    n_points: int
    dropped: Tuple[str, ...] = ()

    @property
    def stderr_p_sigma(self) -> float:
        return math.sqrt(max(0.0, float(self.covariance[0, 0])))

    @property
    def stderr_p_zz(self) -> float:
        return math.sqrt(max(0.0, float(self.covariance[1, 1])))

    @property
    def chi2_per_dof(self) -> float:
        return self.chi2 / self.dof if self.dof > 0 else math.inf


def fit_error_model(estimates: Sequence[CorrelatorEstimate]) -> ErrorModelFit:
    """Fit ln(mean) = n_measured*alpha + flip_pairs*beta by weighted LS.

    The regressors are the exact integer exponents of the two decay
    channels, so the fit is linear and the estimator is consistent on
    simulated streams.  Points with non-positive means are dropped and
    recorded.  Weights are (stderr/mean) per point; a point whose
    matches all agreed (stderr 0) gets the sigma of its mean shrunk by
    one pseudo-count, so a starved cell cannot claim infinite weight.
    Needs >= 3 distinct separations and a rank-2 design; the
    three-basis family alone cannot separate the two channels (its two
    exponents coincide), so include the two-basis one.
    """
    xs: List[Tuple[float, float]] = []
    ys: List[float] = []
    sigmas: List[float] = []
    used_ls = set()
    dropped: List[str] = []
    for est in estimates:
        if est.match_count == 0 or not est.mean > 0.0:
            dropped.append(est.template_id)
            continue
        template = make_template(est.family, est.l)
        xs.append((float(template.n_measured),
                   float(zz_flip_pair_count(template))))
        ys.append(math.log(est.mean))
        sigma = est.stderr / est.mean
        if sigma <= 0.0:
            shrunk = est.mean * est.match_count / (est.match_count + 1.0)
            sigma = (math.sqrt((1.0 - shrunk ** 2) / est.match_count)
                     / est.mean)
        sigmas.append(sigma)
        used_ls.add(est.l)
    if len(used_ls) < 3:
        raise ValueError(
            "need estimates at >= 3 distinct separations with positive means")
    design = np.asarray(xs)
    y = np.asarray(ys)
    sig = np.asarray(sigmas)
    xw = design / sig[:, None]
    yw = y / sig
    if np.linalg.matrix_rank(xw) < 2:
        raise ValueError(
            "degenerate design: the supplied templates cannot separate the "
            "single-Pauli and pair-error channels")
    sol, _, _, _ = np.linalg.lstsq(xw, yw, rcond=None)
    alpha, beta = float(sol[0]), float(sol[1])
    resid = yw - xw @ sol
    chi2 = float(resid @ resid)
    dof = y.shape[0] - 2
    cov_ab = np.linalg.inv(xw.T @ xw)
    p_sigma = min(0.75, max(0.0, 0.75 * (1.0 - math.exp(alpha))))
    p_zz = min(0.5, max(0.0, 0.5 * (1.0 - math.exp(beta))))
    jac = np.diag([-0.75 * math.exp(alpha), -0.5 * math.exp(beta)])
    cov = jac @ cov_ab @ jac.T
    return ErrorModelFit(p_sigma=p_sigma, p_zz=p_zz, covariance=cov,
                         chi2=chi2, dof=dof, alpha=alpha, beta=beta,
                         cov_alpha_beta=cov_ab, n_points=y.shape[0],
                         dropped=tuple(dropped))


# ---------------------------------------------------------------------------
# Entanglement-length extrapolation.

@dataclass(frozen=True)
class XiEstimate:
    """Extrapolated entanglement length.

    ``continuous`` solves mean(l) = 1/3 over real l; ``grid`` is the
    largest supported separation whose predicted mean still exceeds 1/3
    (integer-valued, 0 when none qualifies).  Both are +inf when both
    error rates vanish.
    """

    continuous: float
    grid: float
    stderr_continuous: Optional[float] = None
    method: str = "indirect"


def _mu_asymptotic(l: float, alpha: float, beta: float) -> float:
    return math.exp((2.0 * l + 8.0) / 3.0 * alpha + 2.0 * l / 3.0 * beta)


def xi_from_rates(p_sigma: float, p_zz: float) -> XiEstimate:
    """Entanglement length from known rates via the asymptotic decay law.

    Solves (2l+8)/3 * alpha + 2l/3 * beta = ln(1/3).  The continuous
    root is clamped at 0 when even l = 0 is below threshold.
    """
    if not 0.0 <= p_sigma <= 0.75:
        raise ValueError("p_sigma must lie in [0, 3/4]")
    if not 0.0 <= p_zz <= 0.5:
        raise ValueError("p_zz must lie in [0, 1/2]")
    if p_sigma == 0.0 and p_zz == 0.0:
        return XiEstimate(continuous=math.inf, grid=math.inf)
    alpha = math.log1p(-4.0 * p_sigma / 3.0) if p_sigma < 0.75 else -math.inf
    beta = math.log1p(-2.0 * p_zz) if p_zz < 0.5 else -math.inf
    l_star = _continuous_crossing(alpha, beta)
    return XiEstimate(continuous=l_star, grid=_grid_crossing(alpha, beta))


def _continuous_crossing(alpha: float, beta: float) -> float:
    if math.isinf(alpha) or math.isinf(beta):
        return 0.0
    numer = math.log(_THIRD) - (8.0 / 3.0) * alpha
    denom = (2.0 / 3.0) * (alpha + beta)
    return max(0.0, numer / denom)


def _grid_crossing(alpha: float, beta: float) -> float:
    l_star = _continuous_crossing(alpha, beta)
    if l_star < 2.0:
        return 0.0
    base = int(math.floor(l_star))
    base -= (base - 2) % 3
    while base >= 2 and not _mu_asymptotic(base, alpha, beta) > _THIRD:
        base -= 3
    if base < 2:
        return 0.0
    while _mu_asymptotic(base + 3, alpha, beta) > _THIRD:
        base += 3
    return float(base)


def xi_e(fit: ErrorModelFit) -> XiEstimate:
    """Entanglement length from a fit, with propagated uncertainty.

    The standard error of the continuous crossing comes from the delta
    method on (alpha, beta) using the fit covariance.
    """
    base = xi_from_rates(fit.p_sigma, fit.p_zz)
    if not math.isfinite(base.continuous) or base.continuous == 0.0:
        return base
    alpha = math.log1p(-4.0 * fit.p_sigma / 3.0)
    beta = math.log1p(-2.0 * fit.p_zz)
    numer = math.log(_THIRD) - (8.0 / 3.0) * alpha
    denom = (2.0 / 3.0) * (alpha + beta)
    d_alpha = (-8.0 / 3.0) / denom - numer * (2.0 / 3.0) / denom ** 2
    d_beta = -numer * (2.0 / 3.0) / denom ** 2
    grad = np.array([d_alpha, d_beta])
    var = float(grad @ fit.cov_alpha_beta @ grad)
    return XiEstimate(continuous=base.continuous, grid=base.grid,
                      stderr_continuous=math.sqrt(max(0.0, var)))


# ---------------------------------------------------------------------------
# Planning: tomography baseline and template reach.

def naive_tomography_K(p_d: float, n_budget: float) -> int:
    """Largest window size K with full-tomography cost 2^(2K)/p_d^K <= budget."""
    if not 0.0 < p_d <= 1.0:
        raise ValueError("p_d must lie in (0, 1]")
    if n_budget < 1.0:
        raise ValueError("n_budget must be >= 1")
    ratio = 4.0 / p_d
    k = max(0, int(math.floor(math.log(n_budget) / math.log(ratio))))
    while ratio ** (k + 1) <= n_budget:
        k += 1
    while k > 0 and ratio ** k > n_budget:
        k -= 1
    return k


class DetectorLayout(Enum):
    TWO_DETECTOR = "two_detector"
    THREE_DETECTOR = "three_detector"


def _default_layout(family: TemplateFamily) -> DetectorLayout:
    if family is TemplateFamily.GAMMA1:
        return DetectorLayout.TWO_DETECTOR
    return DetectorLayout.THREE_DETECTOR


def _check_layout(family: TemplateFamily, layout: DetectorLayout) -> None:
    if (layout is DetectorLayout.TWO_DETECTOR
            and family is not TemplateFamily.GAMMA1):
        raise ValueError(
            "two-detector layout has no X output; only the two-basis "
            "family can use it")


def optimal_pp(family: FamilyLike, l: int) -> float:
    """Preferred-basis splitter probability maximizing the match rate."""
    template = make_template(family, l)
    return template.n_preferred / template.n_measured


def splitter_settings(family: FamilyLike, l: int,
                      layout: Optional[DetectorLayout] = None,
                      p_p: Optional[float] = None) -> Tuple[float, float, float]:
    """(q_x, q_y, q_z) realizing a layout at a preferred-basis weight."""
    fam = _family(family)
    layout = layout or _default_layout(fam)
    _check_layout(fam, layout)
    if p_p is None:
        p_p = optimal_pp(fam, l)
    _check_probability("p_p", p_p)
    if layout is DetectorLayout.TWO_DETECTOR:
        return (0.0, p_p, 1.0 - p_p)
    rest = (1.0 - p_p) / 2.0
    return (rest, p_p, rest)


def instance_probability(family: FamilyLike, l: int, p_d: float, q_x: float,
                         q_y: float, q_z: float) -> float:
    """Per-offset probability that a window matches the template.

    Product over required slots of p_d times that slot's basis
    probability; free slots cost nothing.
    """
    template = make_template(family, l)
    _check_probability("p_d", p_d)
    for name, q in (("q_x", q_x), ("q_y", q_y), ("q_z", q_z)):
        _check_probability(name, q)
    if abs(q_x + q_y + q_z - 1.0) > 1e-9:
        raise ValueError("q_x + q_y + q_z must equal 1")
    n_x, n_y, n_z = template.basis_counts()
    return (p_d ** template.n_measured
            * q_x ** n_x * q_y ** n_y * q_z ** n_z)


def optimal_instance_probability(family: FamilyLike, l: int, p_d: float,
                                 layout: Optional[DetectorLayout] = None
                                 ) -> float:
    """Match probability at the optimal splitter setting.

    Compact form p_d^n_m * p_p^n_p * ((1-p_p)/a)^(n_m-n_p) with
    p_p = n_p/n_m and a the number of non-preferred detector outputs
    (1 for the two-detector layout, 2 for three).
    """
    fam = _family(family)
    layout = layout or _default_layout(fam)
    _check_layout(fam, layout)
    _check_probability("p_d", p_d)
    template = make_template(fam, l)
    n_m = template.n_measured
    n_p = template.n_preferred
    p_p = n_p / n_m
    a = 1.0 if layout is DetectorLayout.TWO_DETECTOR else 2.0
    return p_d ** n_m * p_p ** n_p * ((1.0 - p_p) / a) ** (n_m - n_p)


def max_direct_length(family: FamilyLike, p_d: float, n_budget: float, *,
                      min_expected: float = 1.0,
                      layout: Optional[DetectorLayout] = None,
                      l_cap: int = 10 ** 6) -> int:
    """Largest separation with >= min_expected expected matches in budget.

    The budget is the number of emitted photons (window offsets); the
    expected match count at separation l is n_budget times the optimal
    per-offset probability.  Returns 0 when even l = 2 is out of reach.
    """
    if n_budget < 1.0:
        raise ValueError("n_budget must be >= 1")
    if min_expected <= 0.0:
        raise ValueError("min_expected must be > 0")
    best = 0
    l = 2
    while l <= l_cap:
        p = optimal_instance_probability(family, l, p_d, layout)
        if p * n_budget < min_expected:
            break
        best = l
        l += 3
    return best
