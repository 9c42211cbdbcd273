from __future__ import annotations

import difflib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from pydantic import ValidationError

from .exceptions import CheckNotFoundError, ScenarioError
from .logging import get_logger
from .models import CheckRecord, Scenario

logger = get_logger(__name__)

_SCENARIO_PACKAGE = "wickstate.scenarios"


@dataclass(frozen=True)
class CheckInfo:
    name: str
    stage: str
    anchor: str
    tolerance: float
    rationale: str
    informational: bool = False
    lower: bool = False


def _c(
    name: str, stage: str, anchor: str, tolerance: float, rationale: str,
    informational: bool = False, lower: bool = False,
):
    """Catalogue entry; ``lower`` checks pass when measured >= -tolerance."""
    return name, CheckInfo(name, stage, anchor, tolerance, rationale, informational, lower)


_CHECKS: Dict[str, CheckInfo] = dict([
    _c("constraints-hamiltonian", "geometry", "Scal(h) - tr((k h^-1)^2) + tr(k h^-1)^2 = 2 Lambda", 1e-10,
       "Spectral derivatives of an analytic metric; round-off level."),
    _c("constraints-momentum", "geometry", "div_h(k - tr(k h^-1) h) = 0", 1e-10,
       "Spectral derivatives of an analytic metric; round-off level."),
    _c("einstein-condition", "geometry", "Ric(g) = 2 Lambda / (n - 2) g", 1e-8,
       "Per Taylor order; explains gauge-identity failures, and a failure skips the later stages.", True),
    _c("reduction-leading", "geometry", "W D_i V = d_t^2 + a_i(t) with no d_t term", 1e-8,
       "Transport frames remove the first-order term exactly up to Taylor truncation."),
    _c("transport-invariance", "geometry", "u(t) h_t u(t)^T = h_0", 1e-12,
       "Series recursion for the transport ODE; checked through order D - 1."),
    _c("reduction-selfadjoint", "geometry", "a_i(0)^* = a_i(0) for the fiber form", 1e-10,
       "Relative band-limited norm; round-off level."),
    _c("reduction-principal", "geometry", "(a_i(0)(2k) - 2 a_i(0)(k) + a_i(0)(0)) / 2 = (k.h0^-1 k) 1", 1e-8,
       "The second difference in k isolates the degree-two part of a polynomial symbol exactly."),
    _c("gauge-identity-i", "geometry", "d_t d0 = 0", 1e-8, "Exact identity per Taylor coefficient."),
    _c("gauge-identity-ii", "geometry", "2 d_t d1 + a2 d0 - d0 a1 = 0", 1e-8,
       "Exact identity per Taylor coefficient; valid orders only."),
    _c("gauge-identity-iii", "geometry", "d_t^2 d1 + a2 d1 - d1 a1 - d0 d_t a1 = 0", 1e-8,
       "Exact on Einstein metrics; the non-Einstein control violates it at order one."),
    _c("gauge-PK", "geometry", "P K = 0", 1e-8, "Linearized Einstein operator annihilates pure gauge."),
    _c("gauge-D2K", "geometry", "D2 K = K D1", 1e-8, "Intertwining of the two wave operators."),
    _c("riccati-residual", "factorization", "i d_t b - b^2 + a = 0 modulo smoothing", 10.0,
       "Decay profile constant; the fixed point is exact only modulo smoothing operators."),
    _c("hadamard-sum", "factorization", "c^+ + c^- = 1", 1e-12, "Complementary by construction."),
    _c("hadamard-idempotent", "factorization", "(c^+-)^2 = c^+-", 1e-10, "Exact projector algebra."),
    _c("hadamard-selfadjoint", "factorization", "c^+-dagger = c^+- for the charge q", 1e-10,
       "b^- = -b^* makes q c^+ Hermitian."),
    _c("frame-normalization", "factorization", "T^* q T = diag(tau, -tau)", 1e-10,
       "N = (b^+ - b^-)^(-1/2) normalizes the Cauchy frame."),
    _c("regularizer-independence", "factorization", "c^+-(R) - c^+-(2R) in W^-infinity", 100.0,
       "The two regularizers differ on modes below 2R, so the constant grows like (2R)^(m/2)."),
    _c("evolution-unitarity", "factorization", "U(t, 0)^* q U(t, 0) = q", 1e-8,
       "Gauss-Legendre steps preserve the charge exactly; drift is round-off."),
    _c("evolution-factorization", "factorization", "T(t)^-1 U(t, 0) T(0) block diagonal mod smoothing", 10.0,
       "Reported profile of the off-diagonal blocks.", True),
    _c("green-charge", "factorization", "(phi1 | G phi2) = -i (rho G phi1 | q rho G phi2)", 1e-6,
       "Quadrature and time stepping with 200 steps."),
    _c("green-homogeneous", "factorization", "(d_t^2 + a) G phi = 0", 1e-6,
       "Sixth-order central differences on the 51-node Green time grid."),
    _c("wick-reality", "euclidean", "a~^*(s) = tau a~(-s) tau^-1", 1e-10,
       "Coefficientwise consequence of a^*(t) = tau a(t) tau^-1."),
    _c("calderon-sum", "euclidean", "c~^+ + c~^- = 1", 1e-8, "Jump relations of the two-domain solve."),
    _c("calderon-idempotent", "euclidean", "(c~^+-)^2 = c~^+-", 1e-6, "Collocation accuracy in s."),
    _c("calderon-selfadjoint", "euclidean", "c~^+- = (c~^+-)^dagger for q_phys", 1e-6,
       "Collocation accuracy in s; needs the reflection symmetry of a~."),
    _c("calderon-trace-reversal", "euclidean", "(I x 1) c~^+- = c~^+- (I x 1)", 1e-8,
       "Trace reversal commutes with D~ and the Dirichlet condition."),
    _c("calderon-reflection", "euclidean", "c~^- = K c~^+ K, K = diag(tau, -tau)", 1e-8,
       "Holds for s-even a~ only; reported for every scenario.", True),
    _c("calderon-vs-hadamard", "euclidean", "c^+- - c~^+- in W^-infinity", 10.0,
       "Per-mode differences decay like exp(-2 omega T)."),
    _c("dtn-vs-riccati", "euclidean", "N_+- = b^+-(0) modulo smoothing", 10.0,
       "Decay profile constant of N_+- - b^+-(0)."),
    _c("dtn-oracle", "euclidean", "N_+(k) = omega coth(omega T)", 1e-6,
       "Closed form on static flat metrics, omega = (|k|^2 + m^2)^(1/2)."),
    _c("dtn-positivity", "euclidean", "c1 <k> <= Re N_+ <= c2 <k>, c1 > 0", 0.0,
       "Lower Rayleigh bound must be positive.", lower=True),
    _c("green-elliptic-1", "euclidean", "int (D~u|v) - (u|D~^*v) = -(rho~u | sigma~ rho~v)", 1e-8,
       "Clenshaw-Curtis quadrature of collocation solutions."),
    _c("green-elliptic-2", "euclidean", "2 eta(u, v) = (rho~u | q~ rho~v)", 1e-8,
       "Exact for Hermitian a~; informational otherwise."),
    _c("surface-transfer-wick", "gauge_states", "T_Sigma = T~_Sigma", 1e-12,
       "Identical by construction from the Wick-rotated d~."),
    _c("surface-kdagger-k", "gauge_states", "K^dagger_Sigma K_Sigma = 0", 1e-10,
       "Relative size; asserted in spacetime dimension four only."),
    _c("surface-kdagger-construction", "gauge_states", "q1 K^dagger = K^* q2", 1e-12, "Constructed."),
    _c("intertwine-euclidean", "gauge_states", "c~2 K_Sigma = K_Sigma c~1 + K_-infinity", 10.0,
       "Decay profile constant of the obstruction K_-infinity."),
    _c("intertwine-lorentzian", "gauge_states", "c2 K_Sigma = K_Sigma c1 modulo smoothing", 10.0,
       "Independent regularizers make the Lorentzian side exact only modulo smoothing."),
    _c("gauge-fix-closed-loop", "gauge_states", "v_sSigma = 0 and I2 v = v on Sigma", 1e-7,
       "Direct solve of the boundary gauge condition."),
    _c("gauge-fix-principal", "gauge_states", "sigma(H(k)) ~ <k>", 9.0,
       "Spread of singular values over <k> at high modes.", True),
    _c("synchronous-j2", "gauge_states", "J2 k = k", 1e-7, "Gauge-fixed data are J2 invariant."),
    _c("synchronous-reconstruction", "gauge_states", "c~2^+ f = k + K_Sigma c~1^+ h", 1e-7,
       "Closed loop through the gauge fix; h = c~1^+ h up to collocation error."),
    _c("j2-charge-conjugation", "gauge_states", "(k | q_phys k) = (k | q~ k) for J2 k = k", 1e-10,
       "Algebraic identity J2 q_phys J2 = q~, evaluated on the J2-symmetrized part of k."),
    _c("positivity-kernel", "gauge_states", "+-(f | q_phys c~2^+- f) >= -bound on Ker K^dagger", 0.0,
       "Worst branch; each bound is the measured norm of its smoothing correction.", lower=True),
    _c("positivity-energy", "gauge_states", "+-(k~ | q~ k~) = 2 Re Q(v, v) >= 0", 1e-10,
       "Coercive Euclidean energy.", lower=True),
    _c("positivity-negative-control", "gauge_states", "(f | q_phys c~2^+ f) outside Ker K^dagger", 0.0,
       "Shows that the kernel restriction is needed.", True, lower=True),
    _c("state-normalization", "state", "c^+ + c^- = 1", 1e-8, "Aggregated."),
    _c("state-selfadjoint", "state", "c^+-dagger = c^+-", 1e-6, "Aggregated."),
    _c("state-positivity", "state", "+-(f | q_phys c^+- f) >= 0 on Ker K^dagger mod smoothing", 0.0,
       "Aggregated.", lower=True),
    _c("state-gauge-invariance", "state", "c2^+- K_Sigma = K_Sigma c1^+- mod smoothing", 10.0, "Aggregated."),
    _c("state-frequency-sign", "state", "opposite-frequency block of T^-1 c~^+ decays in |k|, k != 0", 1e-3,
       "Leakage at the top frequency band falls like exp(-2 omega T); mode k = 0 is excluded."),
])


def list_checks(stage: Optional[str] = None) -> List[CheckInfo]:
    return [c for c in _CHECKS.values() if stage is None or c.stage == stage]


def describe_check(name: str) -> CheckInfo:
    """
    Look up a check by name.

    Raises:
        CheckNotFoundError: If the name is unknown; carries close matches
    """
    if name in _CHECKS:
        return _CHECKS[name]
    suggestions = difflib.get_close_matches(name, list(_CHECKS), n=5, cutoff=0.4)
    raise CheckNotFoundError(name, suggestions)


def check_anchor(name: str) -> str:
    return describe_check(name).anchor


def make_record(
    name: str,
    measured: float,
    tolerances: Optional[Mapping[str, float]] = None,
    informational: Optional[bool] = None,
    **detail: Any,
) -> CheckRecord:
    """CheckRecord for a catalogued check; scenario tolerances override the default."""
    info = describe_check(name)
    tol = (tolerances or {}).get(name, info.tolerance)
    make = CheckRecord.lower if info.lower else CheckRecord.upper
    flag = info.informational if informational is None else informational
    return make(name, info.anchor, measured, tol, flag, **detail)


def list_scenarios() -> List[str]:
    """Names of the bundled scenarios."""
    files = resources.files(_SCENARIO_PACKAGE).iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".json"))


def load_scenario(path: Path) -> Scenario:
    """
    Read and validate a scenario file (JSON, or YAML when PyYAML is installed).

    Raises:
        ScenarioError: If the file cannot be read or does not match the schema
    """
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"Cannot read scenario file {path}: {e}") from e
    if path.suffix.lower() in {".yaml", ".yml"}:
        try:
            import yaml
        except ImportError as e:
            raise ScenarioError("YAML scenarios require PyYAML. Install with: pip install 'wickstate[yaml]'") from e
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ScenarioError(f"Malformed YAML in {path}: {e}") from e
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ScenarioError(f"Malformed JSON in {path}: {e}") from e
    return parse_scenario(data, str(path))


def parse_scenario(data: object, origin: str = "<data>") -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError(f"Scenario {origin} must be a mapping")
    try:
        return Scenario.model_validate(data)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ScenarioError(f"Invalid scenario {origin}: {problems}") from e


def resolve_scenario(name_or_path: str) -> Scenario:
    """
    Bundled scenario by name, else a scenario file path.

    Raises:
        ScenarioError: If neither a bundled name nor a readable file
    """
    bundled = resources.files(_SCENARIO_PACKAGE).joinpath(f"{name_or_path}.json")
    if bundled.is_file():
        logger.debug(f"using bundled scenario {name_or_path}")
        return parse_scenario(json.loads(bundled.read_text(encoding="utf-8")), name_or_path)
    path = Path(name_or_path)
    if path.exists():
        return load_scenario(path)
    close = difflib.get_close_matches(name_or_path, list_scenarios(), n=3)
    hint = f" Did you mean: {', '.join(close)}?" if close else ""
    raise ScenarioError(f"Unknown scenario '{name_or_path}'.{hint}")
