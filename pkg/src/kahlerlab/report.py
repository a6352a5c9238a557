"""Config handling and the analysis report written by ``kahlerlab analyze``.

Config files are JSON, or TOML when the name ends in ``.toml``.  Keys::

    profile   {"kind": "family1".."family4", "params": {"alpha": a}}
              or {"expr": "...", "params": {...}, "t_max": 0}
    n         complex dimension (default 1)
    eps       smoothing parameter for the Ricci samples (default 0)
    eps_grid  eps values for the uniform-bound scan (default [eps])
    window    [t_lo, t_hi] for curve samples (default [-1e6, anchor])
    weights   Orlicz weights, e.g. {"kind": "TheoremB", "p": 1}
    C_list    constants for Ric >= -C omega (default 0, 1, 10, 100, 1000)
    tol       quadrature tolerance (default 1e-8)
    h_exponent  h(s) = s^h_exponent in the Condition-(K) weight (default 1.01)
    oracle    run the finite-difference cross-check (default true)
    sweep     {"param": ..., "values" | "linspace" | "pow2": ..., "quantity": ...}
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List

import mpmath
import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from .curvature import DEFAULT_C_LIST, ricci_point, scan_uniform_bound
from .errors import ConfigError, DomainError, GrowthAssumptionViolated, KahlerLabError, UnboundedPotential
from .geometry import RadialMetric, RadialModulus, diameter, dini_transform, metric_matrix
from .integrability import (ConditionK, LogLogPower, LogPower, PowerEps, TheoremB, condition_k_radial,
                            orlicz_radial, power_h, theorem_c_sufficient)
from .oracle import fd_metric, fd_ricci
from .profile import FAMILIES, Profile, parse_profile, sample_grid
from .quadrature import DEFAULT_TOL

WEIGHT_KINDS = {"PowerEps": ("eps",), "LogPower": ("eps",), "LogLogPower": ("eps",), "TheoremB": ("p",)}
SWEEP_QUANTITIES = ("diameter", "dini", "condition_k", "orlicz", "mu_min")
MAX_SWEEP = 10 ** 5


# -- config ------------------------------------------------------------------------------
def _num(x, what):
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise ConfigError(f"{what} must be a finite number, got {x!r}")
    return float(x)


def _profile_cfg(raw):
    if not isinstance(raw, dict):
        raise ConfigError("'profile' must be an object")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("'profile.params' must be an object")
    params = {str(k): _num(v, f"profile.params.{k}") for k, v in params.items()}
    if "kind" in raw and "expr" in raw:
        raise ConfigError("give either 'profile.kind' or 'profile.expr', not both")
    if "kind" in raw:
        if raw["kind"] not in FAMILIES:
            raise ConfigError(f"unknown profile kind {raw['kind']!r}; expected one of {', '.join(FAMILIES)}")
        if set(params) != {"alpha"}:
            raise ConfigError(f"{raw['kind']} takes exactly one parameter 'alpha'")
        return {"kind": raw["kind"], "params": params}
    if "expr" in raw:
        if not isinstance(raw["expr"], str):
            raise ConfigError("'profile.expr' must be a string")
        return {"expr": raw["expr"], "params": params, "t_max": _num(raw.get("t_max", 0.0), "profile.t_max")}
    raise ConfigError("'profile' needs 'kind' or 'expr'")


def build_profile(pcfg) -> Profile:
    try:
        if "kind" in pcfg:
            return Profile.family(int(pcfg["kind"][-1]), pcfg["params"]["alpha"])
        return parse_profile(pcfg["expr"], pcfg["params"], pcfg["t_max"])
    except (KahlerLabError, ValueError) as e:
        raise ConfigError(f"invalid profile: {e}") from e


def _weight_cfg(raw):
    if not isinstance(raw, dict) or raw.get("kind") not in WEIGHT_KINDS:
        raise ConfigError(f"weight must be an object with kind in {sorted(WEIGHT_KINDS)}, got {raw!r}")
    keys = WEIGHT_KINDS[raw["kind"]]
    extra = set(raw) - {"kind", *keys}
    if extra or any(k not in raw for k in keys):
        raise ConfigError(f"{raw['kind']} weight takes keys {list(keys)}")
    return {"kind": raw["kind"], **{k: _num(raw[k], f"weight.{k}") for k in keys}}


def build_weight(wcfg, n):
    k = wcfg["kind"]
    if k == "PowerEps":
        return PowerEps(wcfg["eps"], n)
    if k == "LogPower":
        return LogPower(n, wcfg["eps"])
    if k == "LogLogPower":
        return LogLogPower(n, wcfg["eps"])
    return TheoremB(n, wcfg["p"])


def _sweep_values(raw):
    if "values" in raw:
        vals = raw["values"]
        if not isinstance(vals, list):
            raise ConfigError("'sweep.values' must be a list")
        vals = [_num(v, "sweep value") for v in vals]
    elif "linspace" in raw:
        try:
            a, b, k = raw["linspace"]
        except (TypeError, ValueError):
            raise ConfigError("'sweep.linspace' must be [start, stop, count]") from None
        vals = [float(v) for v in np.linspace(_num(a, "linspace start"), _num(b, "linspace stop"), int(k))]
    elif "pow2" in raw:
        try:
            k0, k1 = raw["pow2"]
        except (TypeError, ValueError):
            raise ConfigError("'sweep.pow2' must be [k_min, k_max] for values 2^-k") from None
        vals = [2.0 ** -k for k in range(int(k0), int(k1) + 1)]
    else:
        raise ConfigError("'sweep' needs 'values', 'linspace' or 'pow2'")
    if not vals:
        raise ConfigError("sweep grid is empty")
    if len(vals) > MAX_SWEEP:
        raise ConfigError(f"sweep grid has {len(vals)} points; the limit is {MAX_SWEEP}")
    return vals


def _sweep_cfg(raw, cfg):
    if not isinstance(raw, dict):
        raise ConfigError("'sweep' must be an object")
    q = raw.get("quantity", "diameter")
    if q not in SWEEP_QUANTITIES:
        raise ConfigError(f"unknown sweep quantity {q!r}; expected one of {', '.join(SWEEP_QUANTITIES)}")
    param = raw.get("param", "alpha")
    allowed = {"eps", "n"} | set(cfg["profile"]["params"])
    if q == "orlicz":
        if len(cfg["weights"]) != 1:
            raise ConfigError("an orlicz sweep needs exactly one entry in 'weights'")
        allowed |= {"weight." + k for k in WEIGHT_KINDS[cfg["weights"][0]["kind"]]}
    if param not in allowed:
        raise ConfigError(f"cannot sweep {param!r}; choose one of {sorted(allowed)}")
    return {"param": param, "quantity": q, "values": _sweep_values(raw)}


KNOWN_KEYS = {"profile", "n", "eps", "eps_grid", "window", "weights", "C_list", "tol", "h_exponent", "oracle", "sweep"}


def normalize_config(raw: Dict[str, Any]) -> Dict[str, Any]:
    """Validate a raw config and fill in every default explicitly."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "profile" not in raw:
        raise ConfigError("config needs a 'profile'")
    cfg: Dict[str, Any] = {"profile": _profile_cfg(raw["profile"])}
    profile = build_profile(cfg["profile"])
    n = raw.get("n", 1)
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ConfigError(f"'n' must be a positive integer, got {n!r}")
    cfg["n"] = n
    cfg["eps"] = _num(raw.get("eps", 0.0), "eps")
    if cfg["eps"] < 0:
        raise ConfigError("'eps' must be >= 0")
    grid = raw.get("eps_grid", [cfg["eps"]])
    if not isinstance(grid, list) or not grid:
        raise ConfigError("'eps_grid' must be a non-empty list")
    cfg["eps_grid"] = sorted({_num(e, "eps_grid entry") for e in grid}, reverse=True)
    if cfg["eps_grid"][-1] < 0:
        raise ConfigError("'eps_grid' entries must be >= 0")
    window = raw.get("window", [-1e6, profile.anchor])
    if not isinstance(window, list) or len(window) != 2:
        raise ConfigError("'window' must be [t_lo, t_hi]")
    cfg["window"] = [_num(window[0], "window[0]"), _num(window[1], "window[1]")]
    if not cfg["window"][0] < cfg["window"][1]:
        raise ConfigError("'window' must satisfy t_lo < t_hi")
    weights = raw.get("weights", [])
    if not isinstance(weights, list):
        raise ConfigError("'weights' must be a list")
    cfg["weights"] = [_weight_cfg(w) for w in weights]
    C_list = raw.get("C_list", list(DEFAULT_C_LIST))
    if not isinstance(C_list, list) or not C_list:
        raise ConfigError("'C_list' must be a non-empty list")
    cfg["C_list"] = sorted({_num(c, "C_list entry") for c in C_list})
    cfg["tol"] = _num(raw.get("tol", DEFAULT_TOL), "tol")
    if not 1e-12 <= cfg["tol"] <= 1e-2:
        raise ConfigError("'tol' must lie in [1e-12, 1e-2]")
    cfg["h_exponent"] = _num(raw.get("h_exponent", 1.01), "h_exponent")
    if not cfg["h_exponent"] > 1:
        raise ConfigError("'h_exponent' must be > 1 so that 1/h is integrable")
    if not isinstance(raw.get("oracle", True), bool):
        raise ConfigError("'oracle' must be true or false")
    cfg["oracle"] = raw.get("oracle", True)
    if "sweep" in raw:
        cfg["sweep"] = _sweep_cfg(raw["sweep"], cfg)
    return cfg


def load_config(path) -> Dict[str, Any]:
    """Read a JSON config, or TOML when the file name ends in .toml."""
    is_toml = str(path).lower().endswith(".toml")
    try:
        if is_toml:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        else:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config {path} is not valid TOML: {e}") from e
    return normalize_config(raw)


def config_hash(cfg: Dict[str, Any]) -> str:
    """sha256 of the normalized config; equal for configs that mean the same thing."""
    blob = json.dumps(normalize_config(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# -- report ------------------------------------------------------------------------------
@dataclass
class AnalysisReport:
    profile: Dict[str, Any]
    n: int
    eps: float
    diameter: Dict[str, Any]
    modulus: Dict[str, Any]
    dini: Dict[str, Any]
    condition_k: Dict[str, Any]
    orlicz: List[Dict[str, Any]]
    ricci: Dict[str, Any]
    oracle: Dict[str, Any]
    tool_version: str
    config_hash: str

    def to_dict(self):
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False)

    @classmethod
    def from_dict(cls, d):
        names = [f.name for f in fields(cls)]
        if set(d) != set(names):
            raise ConfigError(f"report keys differ from the schema: {sorted(set(d) ^ set(names))}")
        return cls(**{k: d[k] for k in names})

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _clean(x):
    """JSON-safe copy: mp numbers to float, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (mpmath.mpf, np.floating)):
        x = float(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def _inapplicable(reason):
    return {"class": "Inapplicable", "value": None, "error_estimate": None, "diagnostics": {}, "notes": [reason]}


def _verdict(fn):
    try:
        return fn().to_dict()
    except (GrowthAssumptionViolated, UnboundedPotential, DomainError) as e:
        return _inapplicable(f"{type(e).__name__}: {e}")


_MODULUS_KS = range(0, 13)


def _mp_linfit(x, y):
    """Slope and R^2 of a least-squares line, in mp (Holder abscissae exceed the double range)."""
    k = len(x)
    mx, my = sum(x) / k, sum(y) / k
    sxx = sum((u - mx) ** 2 for u in x)
    sxy = sum((u - mx) * (v - my) for u, v in zip(x, y))
    syy = sum((v - my) ** 2 for v in y)
    b = sxy / sxx
    r2 = 1.0 if syy == 0 else float(1 - (syy - b * sxy) / syy)
    return float(b), r2


def _modulus_section(profile: Profile):
    """Samples of m at r = exp(-exp(2^k)) and the decay class read off the
    last pair: Holder r^g, (-log r)^-g or (log(-log r))^-g."""
    if profile.unbounded_potential:
        return {"bounded": False, "samples": [], "decay_class": "Unbounded", "exponent": None, "r2": None,
                "theorem_c": None, "notes": ["potential is unbounded near 0; no modulus of continuity"]}
    mod = RadialModulus(profile)
    ks = list(_MODULUS_KS)
    L, logm = [], []
    try:
        for k in ks:
            x = mpmath.exp(mpmath.mpf(2) ** k)  # -log r
            v = mod.at_log(-x)
            if v > 0:  # samples below the exponent guard of the backend come back as 0
                L.append(x)
                logm.append(mpmath.log(v))
    except (DomainError, ValueError) as e:
        return {"bounded": True, "samples": [], "decay_class": "Unknown", "exponent": None, "r2": None,
                "theorem_c": None, "notes": [f"modulus not computable on the sample: {e}"]}
    if len(L) < 3:
        return {"bounded": True, "samples": [], "decay_class": "Unknown", "exponent": None, "r2": None,
                "theorem_c": None, "notes": ["fewer than three positive modulus samples"]}
    coords = {
        "Holder": [-x for x in L],
        "InverseLogPower": [mpmath.log(x) for x in L],
        "InverseLogLogPower": [mpmath.log(mpmath.log(x)) for x in L],
    }
    sign = {"Holder": 1, "InverseLogPower": -1, "InverseLogLogPower": -1}
    chosen = "InverseLogLogPower"
    for name in ("Holder", "InverseLogPower"):
        x = coords[name]
        g = sign[name] * (logm[-1] - logm[-2]) / (x[-1] - x[-2])
        if g > 1e-2:
            chosen = name
            break
    b, r2 = _mp_linfit(coords[chosen], logm)
    samples = [{"neg_log_r": float(mpmath.log(x_)), "log_m": float(v)} for x_, v in zip(L, logm)]
    for s in samples:
        s["neg_log_r"] = f"exp({s['neg_log_r']:.6g})"
    notes = [] if r2 >= 0.99 else ["regression R^2 below 0.99: decay class is a guess"]
    return {"bounded": True, "samples": samples, "decay_class": chosen, "exponent": sign[chosen] * b,
            "r2": r2, "theorem_c": theorem_c_sufficient(mod).to_dict(), "notes": notes}


def _ricci_section(profile, cfg):
    n, eps = cfg["n"], cfg["eps"]
    m = RadialMetric(profile, n, eps)
    samples = []
    for t in sample_grid(cfg["window"], 24):
        if eps > 0 and t < 2 * math.log(eps):
            continue
        try:
            p = ricci_point(m, float(t))
        except (DomainError, KahlerLabError) as e:
            samples.append({"t": float(t), "lambda": None, "mu": None, "note": str(e)})
            continue
        samples.append({"t": float(t), "lambda": p.lambda_, "mu": p.mu, "F": p.F})
    try:
        scan = scan_uniform_bound(profile, n, cfg["eps_grid"], C_list=cfg["C_list"])
    except KahlerLabError as e:
        return {"eps": eps, "samples": samples, "bound": {"verdict": "Inapplicable", "message": str(e)}}
    bound = scan.to_dict()
    bound["label"] = f"UniformlyBounded({scan.bound_C:g})" if scan.verdict == "UniformlyBounded" else scan.verdict
    return {"eps": eps, "samples": samples, "bound": bound}


def _oracle_section(profile, cfg):
    """Max relative deviation of the closed formulas from finite differences
    at a few points just inside the outer end of the window."""
    if not cfg["oracle"]:
        return {"skipped": True}
    n, eps = cfg["n"], cfg["eps"]
    m = RadialMetric(profile, n, eps)
    t_hi = min(cfg["window"][1], profile.anchor)
    e_metric, e_ricci, pts = 0.0, 0.0, 0
    for dt in (0.0, 0.5, 1.0):
        t = t_hi - dt
        rho = math.exp(t)
        if rho <= eps ** 2:
            continue
        r = math.sqrt(rho - eps ** 2)
        if r < 0.01:
            continue
        z = [r] + [0.0] * (n - 1)
        try:
            H, Hf = metric_matrix(m, z), fd_metric(m, z)
            e_metric = max(e_metric, float(np.abs(H - Hf).max() / np.abs(H).max()))
            p = ricci_point(m, t)
            lam, mu = fd_ricci(m, z)
            # relative to the metric scale, so that a vanishing mu is not divided by 0
            scale = max(abs(p.mu), abs(p.lambda_) if n >= 2 else 0.0, p.weight_radial)
            e_ricci = max(e_ricci, abs(mu - p.mu) / scale)
            if n >= 2:
                e_ricci = max(e_ricci, abs(lam - p.lambda_) / scale)
            pts += 1
        except KahlerLabError:
            continue
    return {"skipped": False, "points": pts, "metric_max_rel_err": e_metric, "ricci_max_rel_err": e_ricci}


def build_report(cfg: Dict[str, Any]) -> AnalysisReport:
    cfg = normalize_config(cfg)
    profile = build_profile(cfg["profile"])
    n, tol = cfg["n"], cfg["tol"]
    flat = RadialMetric(profile, n, 0.0)
    diam = _verdict(lambda: diameter(flat, tol=tol))
    if profile.unbounded_potential:
        dini = _inapplicable("potential is unbounded; no modulus to transform")
    else:
        r0 = math.exp(min(profile.anchor, -1.0))
        dini = _verdict(lambda: dini_transform(RadialModulus(profile), r0, tol))
        dini["r"] = r0
    h = power_h(cfg["h_exponent"])
    ck = _verdict(lambda: condition_k_radial(profile, n, h, tol=tol))
    ck["h"] = f"s^{cfg['h_exponent']:g}"
    orlicz = []
    for w in cfg["weights"]:
        row = _verdict(lambda: orlicz_radial(profile, n, build_weight(w, n), tol=tol))
        row["weight"] = w
        orlicz.append(row)
    report = AnalysisReport(
        profile=profile.describe(), n=n, eps=cfg["eps"],
        diameter=diam, modulus=_modulus_section(profile), dini=dini, condition_k=ck, orlicz=orlicz,
        ricci=_ricci_section(profile, cfg), oracle=_oracle_section(profile, cfg),
        tool_version=__version__, config_hash=config_hash(cfg),
    )
    return AnalysisReport.from_dict(_clean(report.to_dict()))


# -- CSV ---------------------------------------------------------------------------------
CSV_COLUMNS = ("param", "class", "value", "error_estimate", "diagnostics_ref")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def report_curves(report: AnalysisReport) -> Dict[str, str]:
    """curves/*.csv content for a report, in the fixed column layout."""
    ricci = []
    for i, s in enumerate(report.ricci["samples"]):
        for q in ("lambda", "mu"):
            ricci.append({"param": s["t"], "class": q, "value": s.get(q), "diagnostics_ref": f"ricci.samples[{i}]"})
    modulus = [{"param": s["neg_log_r"], "class": "log_m", "value": s["log_m"], "diagnostics_ref": f"modulus.samples[{i}]"}
               for i, s in enumerate(report.modulus.get("samples", []))]
    return {"ricci.csv": rows_to_csv(ricci), "modulus.csv": rows_to_csv(modulus)}
