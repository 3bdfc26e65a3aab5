"""Model parameters, hypothesis checks, and closed-form derived constants.

Everything in this module is a pure function of a :class:`Params` instance.
The parameter names follow the usual convention for the two-species
chemotaxis competition system

    u1_t = (u1_x - chi1*u1*v_x)_x + u1*(1 - u1 - a*u2)
    u2_t = (d*u2_x - chi2*u2*v_x)_x + r*u2*(1 - b*u1 - u2)
    0    = v_xx - lam*v + mu1*u1 + mu2*u2
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional


class HypothesisError(ValueError):
    """A required hypothesis on the coefficients does not hold."""


class DomainError(ValueError):
    """An argument lies outside the admissible range of a closed form."""


@dataclass(frozen=True)
class Params:
    """Model coefficients. All positive; chi1, chi2 may be zero."""

    a: float
    b: float
    d: float
    r: float
    lam: float
    mu1: float
    mu2: float
    chi1: float = 0.0
    chi2: float = 0.0

    def __post_init__(self):
        for name in ("a", "b", "d", "r", "lam", "mu1", "mu2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"parameter {name!r} must be > 0")
        for name in ("chi1", "chi2"):
            if getattr(self, name) < 0:
                raise ValueError(f"parameter {name!r} must be >= 0")

    @property
    def sqrt_lam(self) -> float:
        return math.sqrt(self.lam)


# config format is flat key=value with '#' comments; 'lambda' is the file key
# for the Python-reserved name
_CONFIG_KEYS = {
    "a": "a", "b": "b", "d": "d", "r": "r", "lambda": "lam",
    "mu1": "mu1", "mu2": "mu2", "chi1": "chi1", "chi2": "chi2",
}


class ConfigError(ValueError):
    """Malformed key=value config text."""


def parse_config(text: str) -> dict:
    """Parse flat key=value text into a string->string dict.

    Raises :class:`ConfigError` with a line number on malformed input.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value in {raw!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def params_from_config(text: str) -> tuple[Params, dict]:
    """Load :class:`Params` from config text.

    Returns the params plus the dict of extra (non-parameter) entries such
    as ``seed`` so callers can consume them.
    """
    entries = parse_config(text)
    kwargs = {}
    extras = {}
    for key, value in entries.items():
        if key in _CONFIG_KEYS:
            try:
                kwargs[_CONFIG_KEYS[key]] = float(value)
            except ValueError as exc:
                raise ConfigError(f"key {key!r}: not a number: {value!r}") from exc
        else:
            extras[key] = value
    missing = [k for k, attr in _CONFIG_KEYS.items() if attr not in kwargs]
    if missing:
        raise ConfigError(f"missing keys: {', '.join(sorted(missing))}")
    try:
        p = Params(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return p, extras


def params_to_config(p: Params, extras: Optional[dict] = None) -> str:
    """Serialize to config text; repr() round-trips floats bit-exactly."""
    lines = [f"{key}={getattr(p, attr)!r}" for key, attr in _CONFIG_KEYS.items()]
    for key, value in (extras or {}).items():
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Inequality:
    """One inequality record, oriented so that positive slack means it holds."""

    name: str
    lhs: float
    rhs: float
    strict: bool

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs

    @property
    def holds(self) -> bool:
        return self.slack > 0 if self.strict else self.slack >= 0

    def as_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs,
                "slack": self.slack, "holds": self.holds, "strict": self.strict}


@dataclass
class HypothesisReport:
    """Per-inequality evaluation of the standing hypotheses H1..H5."""

    inequalities: list = field(default_factory=list)
    chi_zero_reduction: bool = False

    def of(self, hyp: str) -> list:
        return [q for q in self.inequalities if q.name.startswith(hyp)]

    def holds(self, hyp: str) -> bool:
        group = self.of(hyp)
        return bool(group) and all(q.holds for q in group)

    @property
    def h1(self) -> bool:
        return self.holds("H1")

    @property
    def h2(self) -> bool:
        return self.holds("H2")

    @property
    def h3(self) -> bool:
        return self.holds("H3")

    @property
    def h4(self) -> bool:
        return self.holds("H4")

    @property
    def h5(self) -> bool:
        return self.holds("H5")

    def as_dict(self) -> dict:
        return {
            "inequalities": [q.as_dict() for q in self.inequalities],
            "chi_zero_reduction": self.chi_zero_reduction,
            "summary": {h: self.holds(h) for h in ("H1", "H2", "H3", "H4", "H5")},
        }


@dataclass
class DerivedConstants:
    """Closed-form constants and equilibria; None where undefined."""

    M1: Optional[float]
    M2: Optional[float]
    c0_star: float
    kappa_max: float
    kappa1_star: Optional[float]
    kappa_star: Optional[float]
    c_star: Optional[float]
    h1: bool
    h2: bool
    h3: bool
    h4: bool
    h5: bool
    e0: tuple = (0.0, 0.0)
    e1: tuple = (1.0, 0.0)
    e2: tuple = (0.0, 1.0)
    e_star: Optional[tuple] = None

    def as_dict(self) -> dict:
        return {
            "M1": self.M1, "M2": self.M2, "c0_star": self.c0_star,
            "kappa_max": self.kappa_max, "kappa1_star": self.kappa1_star,
            "kappa_star": self.kappa_star, "c_star": self.c_star,
            "hypotheses": {"H1": self.h1, "H2": self.h2, "H3": self.h3,
                           "H4": self.h4, "H5": self.h5},
            "e0": list(self.e0), "e1": list(self.e1), "e2": list(self.e2),
            "e_star": list(self.e_star) if self.e_star is not None else None,
        }


def amplitude_bounds(p: Params) -> tuple[float, float]:
    """M1 = 1/(1 - chi1*mu1), M2 = r/(r - chi2*mu2); requires both positive."""
    if not (1.0 > p.chi1 * p.mu1 and p.r > p.chi2 * p.mu2):
        raise HypothesisError("amplitude bounds need 1 > chi1*mu1 and r > chi2*mu2")
    return 1.0 / (1.0 - p.chi1 * p.mu1), p.r / (p.r - p.chi2 * p.mu2)


def _pos(x: float) -> float:
    return max(x, 0.0)


def check_hypotheses(p: Params) -> HypothesisReport:
    """Evaluate every inequality of H1..H5 exactly as written.

    Each record is oriented "lhs > rhs" (or >=), so positive slack always
    means the inequality holds. With chi1 = chi2 = 0, H5 is evaluated via
    its chi-free reduction r*(ab-1)_+ <= (1-a)*(1-(d-1)_+), since in that
    case the species equations do not involve lam at all.
    """
    rep = HypothesisReport()
    add = rep.inequalities.append

    add(Inequality("H1a", 1.0, p.chi1 * p.mu1, strict=True))
    add(Inequality("H1b", p.r, p.chi2 * p.mu2, strict=True))
    add(Inequality("H1c", p.a, p.chi1 * p.mu2, strict=False))
    add(Inequality("H1d", p.b * p.r, p.chi2 * p.mu1, strict=False))

    chi_zero = p.chi1 == 0.0 and p.chi2 == 0.0
    rep.chi_zero_reduction = chi_zero

    if not (rep.of("H1")[0].holds and rep.of("H1")[1].holds):
        # M1, M2 undefined: the dependent hypotheses cannot be evaluated
        return rep
    M1, M2 = amplitude_bounds(p)

    add(Inequality("H2a", 1.0, p.chi1 * p.mu1 * M1 + p.a * M2, strict=True))
    add(Inequality("H2b", p.b, 1.0, strict=False))

    add(Inequality("H3a", 1.0, p.chi1 * p.mu1 * M1 + p.a * M2, strict=True))
    add(Inequality("H3b", p.r, p.b * p.r * M1 + p.chi2 * p.mu2 * M2, strict=True))

    h4_rhs = (p.r * _pos(M1 * p.a * (p.b - p.chi2 * p.mu1 / p.r) - 1.0 / M2)
              + p.chi2 * (p.mu1 * M1 + p.mu2 * M2))
    add(Inequality("H4", 1.0 - p.a, h4_rhs, strict=True))

    if chi_zero:
        # lam-free reduction of H5
        add(Inequality("H5", (1.0 - p.a) * (1.0 - _pos(p.d - 1.0)),
                       p.r * _pos(p.a * p.b - 1.0), strict=False))
        return rep

    gap = p.lam - (1.0 - p.a) * (1.0 + p.chi1 * p.mu1 * M1)
    add(Inequality("H5a", p.lam, (1.0 - p.a) * (1.0 + p.chi1 * p.mu1 * M1),
                   strict=True))
    if gap <= 0 or p.lam <= 1.0 - p.a:
        add(Inequality("H5b", -1.0, 0.0, strict=False))  # unsatisfiable marker
        return rep
    bump = (1.0 - p.a) * (p.mu2 * M2 + p.a * p.mu1 * M1
                          + (1.0 - p.a) * p.mu2 / p.sqrt_lam) / gap
    h5_rhs = (p.r * _pos(M1 * (p.a + bump) * (p.b - p.chi2 * p.mu1 / p.r)
                         - 1.0 / M2)
              + p.chi2 * (p.lam / (p.lam - (1.0 - p.a))
                          + math.sqrt(1.0 - p.a) / p.sqrt_lam
                          ) * (p.mu1 * M1 + p.mu2 * M2)
              ) if p.a < 1 else math.inf
    add(Inequality("H5b", (1.0 - p.a) * (1.0 - _pos(p.d - 1.0)), h5_rhs,
                   strict=False))
    return rep


def b_lambda_kappa(lam: float, kappa: float) -> float:
    """Kernel moment 2*sqrt(lam)/(lam - kappa^2) for 0 <= kappa < sqrt(lam)."""
    if not 0 <= kappa < math.sqrt(lam):
        raise DomainError(f"need 0 <= kappa < sqrt(lam), got kappa={kappa}")
    return 2.0 * math.sqrt(lam) / (lam - kappa * kappa)


def c_of_kappa(p: Params, kappa: float) -> float:
    """Linear dispersion speed (kappa^2 + 1 - a)/kappa, minimized at sqrt(1-a)."""
    if kappa <= 0:
        raise DomainError("kappa must be > 0")
    if p.a >= 1:
        raise DomainError("c_of_kappa needs a < 1")
    return (kappa * kappa + 1.0 - p.a) / kappa


def kappa_max(p: Params) -> float:
    if p.a >= 1:
        raise DomainError("kappa_max needs a < 1")
    return min(math.sqrt(1.0 - p.a), p.sqrt_lam)


def kappa1_star(p: Params) -> float:
    """Largest admissible decay rate under kappa*B < 2/(chi1*mu1*M1).

    kappa*B_{lam,kappa} is increasing on (0, sqrt(lam)), so the constraint
    boundary is the positive root of chi1*mu1*M1*sqrt(lam)*kappa = lam -
    kappa^2, capped at kappa_max. Vacuous for chi1 = 0.
    """
    kmax = kappa_max(p)
    if p.chi1 == 0.0:
        return kmax
    M1, _ = amplitude_bounds(p)
    g = p.chi1 * p.mu1 * M1 * p.sqrt_lam
    root = 0.5 * (-g + math.sqrt(g * g + 4.0 * p.lam))
    return min(root, kmax)


def solve_f(p: Params, kappa: float) -> float:
    """Tail coupling constant f(kappa): the equation is linear in f.

    f*(1 - kappa*B*chi1*mu1*M1/2) = (kappa*B/2)*(mu2*M2 + a*mu1*M1)
                                    + mu2*kappa^2*B/(2*sqrt(lam))
    """
    k1 = kappa1_star(p)
    if not 0 < kappa < k1:
        raise DomainError(f"solve_f needs 0 < kappa < kappa1_star={k1}")
    M1, M2 = amplitude_bounds(p)
    B = b_lambda_kappa(p.lam, kappa)
    denom = 1.0 - 0.5 * kappa * B * p.chi1 * p.mu1 * M1
    if denom <= 0:
        raise DomainError("solve_f denominator not positive")
    rhs = (0.5 * kappa * B * (p.mu2 * M2 + p.a * p.mu1 * M1)
           + p.mu2 * kappa * kappa * B / (2.0 * p.sqrt_lam))
    return rhs / denom


def eval_F(p: Params, kappa: float) -> float:
    """Obstruction function F(kappa) bounding the admissible decay rates."""
    M1, M2 = amplitude_bounds(p)
    f = solve_f(p, kappa)
    B = b_lambda_kappa(p.lam, kappa)
    return (p.r * _pos(M1 * (p.a + p.chi1 * f) * (p.b - p.chi2 * p.mu1 / p.r)
                       - 1.0 / M2)
            + p.chi2 * (p.lam * B + 2.0 * kappa)
            * (p.mu1 * M1 + p.mu2 * M2) / (2.0 * p.sqrt_lam)
            - (1.0 - p.d) * kappa * kappa)


def eval_F0(p: Params) -> float:
    """Limit of F as kappa -> 0+."""
    M1, M2 = amplitude_bounds(p)
    return (p.r * _pos(M1 * p.a * (p.b - p.chi2 * p.mu1 / p.r) - 1.0 / M2)
            + p.chi2 * (p.mu1 * M1 + p.mu2 * M2))


def kappa_star(p: Params, n_scan: int = 2048, tol: float = 1e-10) -> float:
    """sup{k in (0, kappa1*): 1 - a >= F on (0, k)}.

    Scans F on a fine grid, then bisects the first violation boundary.
    Requires H4 (which makes the sup well defined and positive).
    """
    rep = check_hypotheses(p)
    if not rep.h4:
        raise HypothesisError("kappa_star requires H4")
    k1 = kappa1_star(p)
    target = 1.0 - p.a

    def violated(k: float) -> bool:
        return eval_F(p, k) > target

    lo = k1 / n_scan * 1e-6
    grid = [k1 * (i + 1) / (n_scan + 1) for i in range(n_scan)]
    prev = lo
    for k in grid:
        if violated(k):
            # refine the boundary between prev (ok) and k (violated)
            a_, b_ = prev, k
            while b_ - a_ > tol:
                mid = 0.5 * (a_ + b_)
                if violated(mid):
                    b_ = mid
                else:
                    a_ = mid
            return 0.5 * (a_ + b_)
        prev = k
    return k1


def c_star(p: Params) -> float:
    """Critical existence speed c(kappa_star)."""
    return c_of_kappa(p, kappa_star(p))


def derive_bounds(p: Params) -> DerivedConstants:
    """All closed-form constants, equilibria, and hypothesis flags.

    Never raises on hypothesis failure: fields whose defining hypothesis
    fails are left None.
    """
    rep = check_hypotheses(p)
    M1 = M2 = k1 = ks = cs = None
    if rep.of("H1")[0].holds and rep.of("H1")[1].holds:
        M1, M2 = amplitude_bounds(p)
    c0 = 2.0 * math.sqrt(1.0 - p.a) if p.a < 1 else 0.0
    kmax = kappa_max(p) if p.a < 1 else 0.0
    if M1 is not None and p.a < 1:
        k1 = kappa1_star(p)
        if rep.h4:
            ks = kappa_star(p)
            cs = c_of_kappa(p, ks)
    e_star = None
    if abs(1.0 - p.a * p.b) > 1e-14:
        e_star = ((1.0 - p.a) / (1.0 - p.a * p.b),
                  (1.0 - p.b) / (1.0 - p.a * p.b))
    return DerivedConstants(
        M1=M1, M2=M2, c0_star=c0, kappa_max=kmax, kappa1_star=k1,
        kappa_star=ks, c_star=cs,
        h1=rep.h1, h2=rep.h2, h3=rep.h3, h4=rep.h4, h5=rep.h5,
        e_star=e_star,
    )
