"""Certificates for the refined Hardy-Littlewood inequalities.

Every certificate evaluates both sides of one inequality from exact step
profiles and atom sums, keeps the individual terms in ``components`` and
classifies the slack against a relative tolerance.  ``layer_cake_terms``
re-derives the same quantities by direct per-level enumeration and is used
as an oracle.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional

import numpy as np

from config import CERT_REL_TOL, TIE_MASS_REL
from rearrangement.convexity import ConvexCurve, KConstant, b_sigma_curve, k_constant
from rearrangement.measure_core import (
    AtomicFunction,
    CarrierMismatchError,
    DomainKind,
    beta_of,
    integrate_profiles,
    lp_norm,
    mu_of,
    rearranged_product,
    unit_ball_volume,
)
from rearrangement.sigma_fields import SigmaField, SigmaSpec, build_sigma_field, sigma_rearrange

logger = logging.getLogger(__name__)


class CertificationError(RuntimeError):
    pass


class InequalityId(str, Enum):
    THM1_INEQ1 = "thm1_ineq1"
    THM1_INEQ2 = "thm1_ineq2"
    REMARK3_INEQ11 = "remark3_ineq11"
    COROLLARY1 = "corollary1"
    HL_CLASSIC = "hl_classic"
    HL_THETA = "hl_theta"
    HL_SIMPLE = "hl_simple"
    EULER_RADIAL = "euler_radial"
    EULER_STRIP = "euler_strip"
    EULER_DOMAIN = "euler_domain"
    VP_GLOBAL = "vp_global"
    VP_Z2 = "vp_z2"


class Status(str, Enum):
    HOLDS = "holds"
    VIOLATED = "violated"
    INCONCLUSIVE = "inconclusive"


class Sense(str, Enum):
    LE = "le"
    GE = "ge"


def _json_number(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _from_json_number(value: Any) -> Any:
    if value in ("nan", "inf", "-inf"):
        return float(value)
    return value


@dataclass
class Certificate:
    inequality_id: str
    lhs: float
    rhs: float
    slack: float
    status: str
    sense: str = Sense.LE.value
    components: Dict[str, Any] = field(default_factory=dict)
    caveats: List[str] = field(default_factory=list)

    @classmethod
    def evaluate(
        cls,
        inequality_id: InequalityId,
        lhs: float,
        rhs: float,
        *,
        sense: Sense = Sense.LE,
        components: Optional[Dict[str, Any]] = None,
        caveats: Iterable[str] = (),
        tol: float = CERT_REL_TOL,
    ) -> "Certificate":
        """Classify ``lhs <= rhs`` (or ``>=``) against ``tol * max(|lhs|, |rhs|, 1)``."""
        lhs = float(lhs)
        rhs = float(rhs)
        slack = rhs - lhs if sense is Sense.LE else lhs - rhs
        if math.isnan(slack):
            status = Status.INCONCLUSIVE
        else:
            scale = max(abs(lhs), abs(rhs), 1.0)
            status = Status.HOLDS if slack >= -tol * scale else Status.VIOLATED
        return cls(
            inequality_id=inequality_id.value,
            lhs=lhs,
            rhs=rhs,
            slack=slack,
            status=status.value,
            sense=sense.value,
            components=dict(components or {}),
            caveats=sorted(set(caveats)),
        )

    @property
    def holds(self) -> bool:
        return self.status == Status.HOLDS.value

    @property
    def violated(self) -> bool:
        return self.status == Status.VIOLATED.value

    @property
    def relative_slack(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs), 1.0)
        return self.slack / scale if math.isfinite(scale) else 0.0

    def mark_inconclusive(self, caveat: str) -> None:
        self.status = Status.INCONCLUSIVE.value
        if caveat not in self.caveats:
            self.caveats = sorted(self.caveats + [caveat])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "inequality_id": self.inequality_id,
            "lhs": _json_number(self.lhs),
            "rhs": _json_number(self.rhs),
            "slack": _json_number(self.slack),
            "status": self.status,
            "sense": self.sense,
            "components": {key: _json_number(value) for key, value in sorted(self.components.items())},
            "caveats": list(self.caveats),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False)

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "Certificate":
        return cls(
            inequality_id=payload["inequality_id"],
            lhs=float(_from_json_number(payload["lhs"])),
            rhs=float(_from_json_number(payload["rhs"])),
            slack=float(_from_json_number(payload["slack"])),
            status=payload["status"],
            sense=payload.get("sense", Sense.LE.value),
            components={key: _from_json_number(value) for key, value in payload.get("components", {}).items()},
            caveats=list(payload.get("caveats", [])),
        )


def _positive(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _common_caveats(sigma: SigmaField, reach: float) -> List[str]:
    caveats = []
    if sigma.tie_mass > TIE_MASS_REL * sigma.measure:
        caveats.append("tie_mass")
    if sigma.carrier.domain.truncated:
        caveats.append("truncated_domain")
    if reach > sigma.measure * (1.0 + 1e-12):
        caveats.append("b_range_extended")
    return caveats


def _require_on_sigma(sigma: SigmaField, *functions: AtomicFunction) -> None:
    for function in functions:
        if not function.carrier.matches(sigma.carrier):
            raise CertificationError("Certificates need f, q and sigma on one carrier")


def _split_to(f: AtomicFunction, rearranged: AtomicFunction) -> AtomicFunction:
    """``f`` on the carrier of a rearrangement, which may split the atoms of ``f``."""
    try:
        return f.split_onto(rearranged.carrier)
    except CarrierMismatchError as exc:
        raise CertificationError("The rearrangement does not live on a refinement of the atoms of f") from exc


def _sigma_energy(f: AtomicFunction, rearranged: AtomicFunction, sigma: SigmaField) -> float:
    """``int sigma (f - q^{*sigma})``; the rearrangement may live on a refined carrier."""
    split = _split_to(f, rearranged)
    if rearranged.carrier.matches(sigma.carrier):
        values = sigma.values
    else:
        values = rearranged.carrier.pull_back(sigma.values)
    return split.integrate_against(values) - rearranged.integrate_against(values)


def _l1_to_rearranged(f: AtomicFunction, rearranged: AtomicFunction) -> float:
    return _split_to(f, rearranged).l1_distance(rearranged)


def _tail_terms(mu_q, mu_f, sigma: SigmaField) -> Dict[str, float]:
    """The two beta integrals with ``b(2 mu_q)`` and ``b(mu_q)``."""
    plus = integrate_profiles(lambda mq, mf: _positive(mq - mf) * sigma.b(2.0 * mq), mu_q, mu_f)
    minus = integrate_profiles(lambda mq, mf: _positive(mf - mq) * sigma.b(mq), mu_q, mu_f)
    return {"beta_fq_b2mu": plus, "beta_qf_bmu": minus}


def certify_remark3(
    f: AtomicFunction,
    q: AtomicFunction,
    sigma: SigmaField,
    *,
    curve: Optional[ConvexCurve] = None,
) -> Certificate:
    """The convexity form that needs no constant ``K``."""
    _require_on_sigma(sigma, f, q)
    curve = curve if curve is not None else b_sigma_curve(sigma)
    q_sigma = sigma_rearrange(q, sigma)
    energy = _sigma_energy(f, q_sigma, sigma)
    mu_q = mu_of(q)
    mu_f = mu_of(f)
    beta = beta_of(_split_to(f, q_sigma), q_sigma)
    convex_gap = integrate_profiles(
        lambda m, b: curve(m + b) + curve(m - b) - 2.0 * curve(m), mu_q, beta
    )
    tails = _tail_terms(mu_q, mu_f, sigma)
    lhs = convex_gap + tails["beta_qf_bmu"] - tails["beta_fq_b2mu"]
    components = {"convex_gap": convex_gap, "sigma_energy": energy, **tails}
    reach = float(mu_q(0.0)) + float(np.max(beta.values))
    return Certificate.evaluate(
        InequalityId.REMARK3_INEQ11,
        lhs,
        energy,
        components=components,
        caveats=_common_caveats(sigma, reach),
    )


def certify_thm1(
    f: AtomicFunction,
    q: AtomicFunction,
    sigma: SigmaField,
    *,
    curve: Optional[ConvexCurve] = None,
    kconst: Optional[KConstant] = None,
    inequality_id: InequalityId = InequalityId.THM1_INEQ1,
) -> Certificate:
    """``(||f - q^{*sigma}|| + ||q|| - ||f||)^2 <= K [int sigma (f - q^{*sigma}) + beta terms]``."""
    _require_on_sigma(sigma, f, q)
    kconst = kconst if kconst is not None else k_constant(q, sigma, curve=curve)
    q_sigma = sigma_rearrange(q, sigma)
    l1_gap = _l1_to_rearranged(f, q_sigma)
    norm_q = lp_norm(q, 1)
    norm_f = lp_norm(f, 1)
    lhs = (l1_gap + norm_q - norm_f) ** 2
    energy = _sigma_energy(f, q_sigma, sigma)
    mu_q = mu_of(q)
    mu_f = mu_of(f)
    tails = _tail_terms(mu_q, mu_f, sigma)
    bracket = energy + tails["beta_fq_b2mu"] - tails["beta_qf_bmu"]
    components: Dict[str, Any] = {
        "K": kconst.value,
        "K_method": kconst.method.value,
        "h_floor": kconst.h_floor,
        "l1_f_minus_q_sigma": l1_gap,
        "l1_q": norm_q,
        "l1_f": norm_f,
        "sigma_energy": energy,
        "bracket": bracket,
        **tails,
    }
    caveats = _common_caveats(sigma, 2.0 * float(mu_q(0.0)))
    if not kconst.conclusive:
        fallback = certify_remark3(f, q, sigma, curve=curve)
        components["fallback_remark3_slack"] = fallback.slack
        components["fallback_remark3_status"] = fallback.status
        caveats.append("k_inconclusive_remark3_fallback")
        certificate = Certificate.evaluate(inequality_id, lhs, math.inf, components=components, caveats=caveats)
        certificate.mark_inconclusive("k_inconclusive_remark3_fallback")
        return certificate
    rhs = kconst.value * bracket
    return Certificate.evaluate(inequality_id, lhs, rhs, components=components, caveats=caveats)


def certify_refined(f: AtomicFunction, sigma: SigmaField, **kwargs: Any) -> Certificate:
    """``||f - f^{*sigma}||^2 <= K(f*, sigma) int sigma (f - f^{*sigma})``."""
    return certify_thm1(f, f, sigma, inequality_id=InequalityId.THM1_INEQ2, **kwargs)


def corollary_constant(u: AtomicFunction, m: float, d: int) -> float:
    """``(m/(4d)) K_d^(-m/d) ||u||_1^(-1+m/d) ||u||_inf^(-m/d)``."""
    ratio = m / d
    return (
        (m / (4.0 * d))
        * unit_ball_volume(d) ** (-ratio)
        * lp_norm(u, 1) ** (ratio - 1.0)
        * lp_norm(u, math.inf) ** (-ratio)
    )


def _radial_dimension(u: AtomicFunction) -> int:
    domain = u.domain
    if domain.kind is DomainKind.DISC:
        return 2
    if domain.kind is DomainKind.BALL:
        return domain.dim
    raise CertificationError(f"|x|^m certificates need a disc or truncated R^d, got {domain.kind.value}")


def certify_corollary1(u: AtomicFunction, m: float) -> Certificate:
    """``int |x|^m (u - u*) >= C ||u - u*||_1^2``."""
    d = _radial_dimension(u)
    if not (0 < m <= d):
        raise CertificationError(f"Corollary exponent must lie in (0, {d}], got m={m}")
    sigma = build_sigma_field(SigmaSpec.power_law(m, d), u.carrier)
    u_star = sigma_rearrange(u, sigma)
    moment_gap = _sigma_energy(u, u_star, sigma)
    distance = _l1_to_rearranged(u, u_star)
    if u.max_value() <= 0:
        constant = 0.0
    else:
        constant = corollary_constant(u, m, d)
    bound = constant * distance**2
    components = {"constant": constant, "l1_u_minus_ustar": distance, "m": float(m), "d": d}
    return Certificate.evaluate(
        InequalityId.COROLLARY1,
        moment_gap,
        bound,
        sense=Sense.GE,
        components=components,
        caveats=_common_caveats(sigma, 0.0),
    )


def certify_hl_classic(f: AtomicFunction, g: AtomicFunction) -> Certificate:
    """``int f g <= int f* g*``."""
    f.require_co_atomic(g)
    lhs = float(np.dot(f.weights, f.values * g.values))
    rhs = rearranged_product(f, g)
    return Certificate.evaluate(InequalityId.HL_CLASSIC, lhs, rhs)


def certify_hl_theta(f: AtomicFunction, sigma: SigmaField) -> Certificate:
    """``0 <= int sigma (f - f^{*sigma})``."""
    _require_on_sigma(sigma, f)
    energy = _sigma_energy(f, sigma_rearrange(f, sigma), sigma)
    return Certificate.evaluate(
        InequalityId.HL_THETA,
        0.0,
        energy,
        components={"sigma_energy": energy},
        caveats=_common_caveats(sigma, 0.0),
    )


def certify_hl_simple(f: AtomicFunction) -> Certificate:
    """The |x| case ``int |x| f >= int |x| f*``."""
    sigma = build_sigma_field(SigmaSpec.power_law(1.0, _radial_dimension(f)), f.carrier)
    certificate = certify_hl_theta(f, sigma)
    certificate.inequality_id = InequalityId.HL_SIMPLE.value
    return certificate


@dataclass
class LayerCakeTerms:
    value: float
    convex_gap: float
    alpha_excess: float
    alpha_excess_lower: float
    sigma_energy: float
    alpha_beta_l1: float
    l1_distance: float
    level_identity_residual: float

    def to_dict(self) -> Dict[str, float]:
        return {key: float(value) for key, value in asdict(self).items()}


def layer_cake_terms(
    f: AtomicFunction,
    q: AtomicFunction,
    sigma: SigmaField,
    *,
    curve: Optional[ConvexCurve] = None,
    chunk: int = 256,
) -> LayerCakeTerms:
    """Per-level enumeration of ``alpha(t) = meas{q^{*s} <= t < f}`` and
    ``beta(t) = meas{f <= t < q^{*s}}`` and the integrals built from them."""
    _require_on_sigma(sigma, f, q)
    curve = curve if curve is not None else b_sigma_curve(sigma)
    q_sigma = sigma_rearrange(q, sigma)
    split = _split_to(f, q_sigma)
    fv, gv, w = split.values, q_sigma.values, split.weights
    levels = np.unique(np.concatenate([[0.0], fv, gv]))
    value = convex_gap = alpha_excess = lower = alpha_beta = 0.0
    residual = 0.0
    for start in range(0, levels.size - 1, chunk):
        t = levels[start : min(start + chunk, levels.size - 1)]
        width = levels[start + 1 : start + 1 + t.size] - t
        f_above = fv[None, :] > t[:, None]
        g_above = gv[None, :] > t[:, None]
        alpha = (~g_above & f_above) @ w
        beta = (~f_above & g_above) @ w
        mu_q = g_above @ w
        mu_f = f_above @ w
        residual = max(residual, float(np.max(np.abs((beta - alpha) - (mu_q - mu_f)))))
        b_q = curve(mu_q)
        value += float(np.dot(width, curve(mu_q + alpha) + curve(mu_q - beta) - 2.0 * b_q))
        convex_gap += float(np.dot(width, curve(mu_q + beta) + curve(mu_q - beta) - 2.0 * b_q))
        alpha_excess += float(np.dot(width, curve(mu_q + alpha) - curve(mu_q + beta)))
        alpha_star = _positive(mu_f - mu_q)
        beta_star = _positive(mu_q - mu_f)
        lower += float(np.dot(width, alpha_star * sigma.b(mu_q) - beta_star * sigma.b(2.0 * mu_q)))
        alpha_beta += float(np.dot(width, alpha + beta))
    return LayerCakeTerms(
        value=value,
        convex_gap=convex_gap,
        alpha_excess=alpha_excess,
        alpha_excess_lower=lower,
        sigma_energy=_sigma_energy(f, q_sigma, sigma),
        alpha_beta_l1=alpha_beta,
        l1_distance=split.l1_distance(q_sigma),
        level_identity_residual=residual,
    )


def oracle_layer_cake(
    f: AtomicFunction,
    q: AtomicFunction,
    sigma: SigmaField,
    *,
    curve: Optional[ConvexCurve] = None,
    tol: float = CERT_REL_TOL,
) -> float:
    """Lower bound for ``int sigma (f - q^{*sigma})``; raises when an identity fails."""
    terms = layer_cake_terms(f, q, sigma, curve=curve)
    scale = max(terms.l1_distance, 1.0)
    if abs(terms.alpha_beta_l1 - terms.l1_distance) > tol * scale:
        raise CertificationError(
            f"int(alpha + beta) = {terms.alpha_beta_l1} differs from ||f - q*|| = {terms.l1_distance}"
        )
    if terms.level_identity_residual > tol * max(f.carrier.measure, 1.0):
        raise CertificationError(f"beta - alpha != mu_q - mu_f (residual {terms.level_identity_residual})")
    energy_scale = max(abs(terms.sigma_energy), abs(terms.value), 1.0)
    if terms.sigma_energy < terms.value - tol * energy_scale:
        raise CertificationError(f"sigma energy {terms.sigma_energy} is below the layer-cake bound {terms.value}")
    if terms.alpha_excess < terms.alpha_excess_lower - tol * max(abs(terms.alpha_excess), 1.0):
        raise CertificationError("The alpha/beta excess term fell below its rearranged lower bound")
    return terms.value


__all__ = [
    "Certificate",
    "CertificationError",
    "InequalityId",
    "LayerCakeTerms",
    "Sense",
    "Status",
    "certify_corollary1",
    "certify_hl_classic",
    "certify_hl_simple",
    "certify_hl_theta",
    "certify_refined",
    "certify_remark3",
    "certify_thm1",
    "corollary_constant",
    "layer_cake_terms",
    "oracle_layer_cake",
]
