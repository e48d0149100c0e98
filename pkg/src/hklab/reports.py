"""Scenario files, their runners and the versioned JSON report."""

import csv
import datetime
import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np
from threadpoolctl import threadpool_limits

from . import corrector, gluing, periods, semiflat
from .errors import ConfigError, EmptySeries
from .exterior import FLAT_TRIPLE, pullback_matrix
from .forms import FormTriple, metric_from_triple, random_pullback
from .io import dump_yaml, load_yaml, write_neck, write_torus_field
from .models import ALGModel, FiberType, Lattice3, alg_parameters, deck_pullback_residual, lambda1
from .recovery import FacePeriods, face_periods_of, recover_basis
from .torus import SpectralTorus

REPORT_SCHEMA = "report-v1"
KINDS = ("models", "semiflat", "recover_lattice", "glue", "solve_hk", "periods")

_MATRIX3 = {"type": "array", "minItems": 3, "maxItems": 3,
            "items": {"type": "array", "minItems": 3, "maxItems": 3, "items": {"type": "number"}}}
_VEC3 = {"type": "array", "minItems": 3, "maxItems": 3, "items": {"type": "number"}}
_SERIES = {"type": "array", "items": {"type": "array", "minItems": 3, "maxItems": 3, "items": {"type": "number"}}}
_POS_INT = {"type": "integer", "minimum": 1}
_POS = {"type": "number", "exclusiveMinimum": 0}

PARAM_SCHEMAS = {
    "models": {
        "n_points": _POS_INT,
        "pullbacks": _POS_INT,
        "log_spread": _POS,
        "lattice": _MATRIX3,
        "free_tau": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}},
    },
    "semiflat": {
        "period_data": {
            "type": "object",
            "required": ["tau1", "tau2"],
            "properties": {"tau1": _SERIES, "tau2": _SERIES, "g": _SERIES, "sigma": _SERIES, "a": _POS},
            "additionalProperties": False,
        },
        "z_center": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}},
        "z_radius": _POS,
        "n_points": _POS_INT,
        "steps": {"type": "array", "minItems": 2, "maxItems": 2, "items": _POS},
        "quadrature": _POS_INT,
    },
    "recover_lattice": {
        "face_periods": _MATRIX3,
        "basis": _MATRIX3,
        "trials": {"type": "integer", "minimum": 0},
    },
    "glue": {
        "lattice": _MATRIX3,
        "rhos": {"type": "array", "minItems": 2, "items": _POS},
        "n_r": {"type": "integer", "minimum": 5},
        "n_theta": {"type": "integer", "minimum": 2},
        "amplitude": _POS,
        "Theta": _VEC3,
        "tolerance": _POS,
    },
    "solve_hk": {
        "n": {"type": "integer", "minimum": 2},
        "amplitude": _POS,
        "max_mode": _POS_INT,
        "tol": _POS,
        "max_iter": _POS_INT,
    },
    "periods": {
        "basis": {"enum": ["K3", "ALH"]},
        "face_bound": {"type": "integer", "minimum": 0},
        "V": _POS,
        "lattice": _MATRIX3,
        "c": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "f_long": _MATRIX3,
        "zero_curves": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "trials": _POS_INT,
    },
}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["kind", "seed"],
    "properties": {
        "kind": {"enum": list(KINDS)},
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "params": {"type": "object"},
    },
    "additionalProperties": False,
}


@dataclass
class Scenario:
    kind: str
    seed: int
    params: dict = field(default_factory=dict)
    output_dir: str = "hk-lab-out"

    def to_dict(self):
        return {"kind": self.kind, "seed": self.seed, "params": self.params, "output_dir": self.output_dir}


def validate(data):
    """Validate a scenario mapping and return a :class:`Scenario`; raises ConfigError."""
    prefix = ()
    try:
        jsonschema.validate(data, SCENARIO_SCHEMA)
        params = data.get("params", {}) or {}
        schema = {"type": "object", "properties": PARAM_SCHEMAS[data["kind"]], "additionalProperties": False}
        prefix = ("params",)
        jsonschema.validate(params, schema)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in prefix + tuple(exc.absolute_path))
        raise ConfigError(f"{path or '<root>'}: {exc.message}") from exc
    return Scenario(data["kind"], data["seed"], params, data.get("output_dir", "hk-lab-out"))


def load_scenario(path):
    try:
        data = load_yaml(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("scenario file must hold a mapping")
    return validate(data)


def make_rng(seed):
    """Counter-based generator shared by every randomized scenario."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass
class Report:
    scenario: dict
    metrics: dict
    assertions: dict
    artifacts: list
    error: str = None

    @property
    def passed(self):
        return self.error is None and all(v == "PASS" for v in self.assertions.values())

    def to_dict(self):
        return {
            "schema": REPORT_SCHEMA,
            "scenario": self.scenario,
            "passed": self.passed,
            "assertions": self.assertions,
            "metrics": self.metrics,
            "artifacts": self.artifacts,
            "error": self.error,
        }

    def to_json(self, timestamp=None):
        d = self.to_dict()
        d["timestamp"] = timestamp
        return json.dumps(_jsonable(d), indent=2, sort_keys=True) + "\n"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, Fraction):
        return str(x)
    return x


def _check(value, ok):
    return "PASS" if ok else "FAIL"


# -- plots and series ----------------------------------------------------------


def fit_log_slope(x, y):
    """Least-squares slope of ``log y`` against ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = y > 0
    if keep.sum() < 2:
        raise EmptySeries("need at least two positive values to fit a slope")
    return float(np.polyfit(x[keep], np.log(y[keep]), 1)[0])


def write_series_csv(path, x, y, header=("x", "y")):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for a, b in zip(x, y):
            w.writerow([repr(float(a)), repr(float(b))])


def read_series_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise EmptySeries(f"{path} is empty")
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r[:2]] for r in body if r]) if body else np.zeros((0, 2))
    return header, data


def emit_plot(x, y, path, xlabel="x", ylabel="y", title=None):
    """Log-scale plot of a positive series with the fitted exponential rate annotated."""
    import matplotlib  # deferred: only plotting pays the import cost

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        raise EmptySeries("a slope needs at least two points")
    slope = fit_log_slope(x, y)
    matplotlib.rcParams["svg.hashsalt"] = "hk-lab"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    keep = y > 0
    ax.semilogy(x[keep], y[keep], "o-")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.annotate(f"slope {slope:.4g}", xy=(0.05, 0.08), xycoords="axes fraction")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return slope


# -- runners -------------------------------------------------------------------


def _run_models(p, rng, out):
    n = p.get("n_points", 100)
    tau_free = complex(*p.get("free_tau", [0.3, 1.1]))
    table, deck = {}, 0.0
    for ft in FiberType:
        beta, tau = alg_parameters(ft)
        m = ALGModel(ft, tau=tau_free if tau is None else None)
        u, v = m.sample(n, rng)
        deck = max(deck, deck_pullback_residual(m, u, v))
        table[ft.value] = {"beta": str(beta), "tau": "free" if tau is None else [tau.real, tau.imag]}
    err, quat = 0.0, 0.0
    for _ in range(p.get("pullbacks", 100)):
        L = random_pullback(rng, p.get("log_spread", 0.7))
        t = FormTriple(FLAT_TRIPLE @ pullback_matrix(L).T, np.linalg.det(L))
        q = metric_from_triple(t)
        err = max(err, float(np.abs(q.g - L.T @ L).max()))
        quat = max(quat, q.quaternion_defect())
    lat = Lattice3(p.get("lattice", np.eye(3).tolist()))
    metrics = {"alg_table": table, "deck_residual": deck, "metric_error": err,
               "quaternion_defect": quat, "lambda1": lambda1(lat)}
    asserts = {"deck_residual": _check(deck, deck <= 1e-12), "metric_error": _check(err, err <= 1e-9),
               "quaternion_defect": _check(quat, quat <= 1e-10)}
    return metrics, asserts, []


def _run_semiflat(p, rng, out):
    pd = semiflat.PeriodData.from_dict(p.get("period_data", {"tau1": [[0, 1, 0]], "tau2": [[0, 0, 1], [1, 0.1, 0]]}))
    zc = complex(*p.get("z_center", [1.0, 0.0]))
    rad = p.get("z_radius", 0.3)
    n = p.get("n_points", 100)
    z = zc + rad * (rng.uniform(-1, 1, n) + 1j * rng.uniform(-1, 1, n))
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    mm, nn = rng.integers(-3, 4, n), rng.integers(-3, 4, n)
    area = semiflat.fiber_area(pd, zc, p.get("quadrature", 128))
    t1, t2 = pd.tau1(z), pd.tau2(z)
    g_shift = semiflat.gamma(pd, z, v + mm * t1 + nn * t2) - semiflat.gamma(pd, z, v)
    g_expected = mm * pd.tau1.derivative()(z) + nn * pd.tau2.derivative()(z)
    g_res = float(np.abs(g_shift - g_expected).max())
    shift_res = semiflat.lattice_shift_residual(pd, z, v, mm, nn)
    pts = np.stack([z.real, z.imag, v.real, v.imag], axis=-1)
    h1, h2 = p.get("steps", [1e-2, 5e-3])
    c1, c2 = semiflat.check_closed(pd, pts, h1), semiflat.check_closed(pd, pts, h2)
    roundoff = c1 <= 1e-11
    ratio = c1 / c2 if c2 > 0 else float("inf")
    expected = (h1 / h2) ** 2
    ma = semiflat.ma_ratio(pd, z, v)
    spread = float(np.abs(ma - ma.mean()).max())
    metrics = {"fiber_area": area, "fiber_area_error": abs(area - pd.a), "gamma_shift_residual": g_res,
               "lattice_shift_residual": shift_res, "closed_residuals": [c1, c2], "closed_ratio": ratio,
               "ma_ratio": float(ma.mean()), "ma_spread": spread}
    asserts = {"fiber_area": _check(area, abs(area - pd.a) <= 1e-6),
               "gamma_shift": _check(g_res, g_res <= 1e-10),
               "lattice_shift": _check(shift_res, shift_res <= 1e-10),
               "closed_order": _check(ratio, roundoff or abs(ratio - expected) <= 0.2 * expected),
               "ma_constant": _check(spread, spread <= 1e-9 and abs(ma.mean() - semiflat.MA_RATIO) <= 1e-9)}
    return metrics, asserts, []


def _run_recover(p, rng, out):
    if "face_periods" in p:
        fp = FacePeriods(p["face_periods"])
    else:
        fp = face_periods_of(Lattice3(p.get("basis", np.eye(3).tolist())))
    lat = recover_basis(fp)
    err = float(np.abs(face_periods_of(lat).f - fp.f).max())
    worst = err
    for _ in range(p.get("trials", 0)):
        A = rng.standard_normal((3, 3))
        if np.linalg.det(A) < 0:
            A[0] *= -1
        worst = max(worst, float(np.abs(recover_basis(face_periods_of(Lattice3(A))).basis - A).max()))
    metrics = {"det_face_periods": fp.det, "recovered_basis": lat.basis, "roundtrip_error": err,
               "random_roundtrip_error": worst}
    return metrics, {"roundtrip": _check(worst, worst <= 1e-10)}, []


def _run_glue(p, rng, out):
    lat = Lattice3(p.get("lattice", np.eye(3).tolist()))
    lam = lambda1(lat)
    rhos = p.get("rhos", [6, 8, 10, 12])
    Theta = np.array(p.get("Theta", [0.0, 0.0, 0.0]))
    n_r, n_th = p.get("n_r", 21), p.get("n_theta", 8)
    amp = p.get("amplitude", 1e-3)
    devs, grams, spectral = [], [], 0.0
    seed = int(rng.integers(2 ** 31))
    last = None
    for rho in rhos:
        nf1 = gluing.flat_neck(lat, rho, n_r, n_th)
        nf2 = gluing.synthetic_neck(lat, rho, make_rng(seed), amp, n_r, n_th)
        g = gluing.glue_forms(nf1, nf2, gluing.GluingParams(rho, Theta))
        devs.append(g.deviation())
        grams.append(gluing.volume_normalize(g.perturbation).residual)
        spectral = max(spectral, g.closedness()[0] / max(g.deviation(), 1e-300))
        last = nf2
    exponent = gluing.fit_exponent(rhos, devs)
    gram_exponent = gluing.fit_exponent(rhos, grams)
    rel = abs(exponent - lam) / lam
    arts = []
    if out is not None:
        write_series_csv(out / "decay.csv", rhos, devs, ("rho", "deviation"))
        emit_plot(rhos, devs, out / "decay.svg", "rho", "sup |omega - omega_flat|")
        write_neck(out / "neck.bin", last)
        arts = ["decay.csv", "decay.svg", "neck.bin"]
    metrics = {"lambda1": lam, "rhos": rhos, "deviation": devs, "fitted_exponent": exponent,
               "relative_error": rel, "gram_residual": grams, "gram_exponent": gram_exponent,
               "closedness_spectral": spectral}
    tol = p.get("tolerance", 0.1)
    asserts = {"decay_exponent": _check(rel, rel <= tol), "closedness_spectral": _check(spectral, spectral <= 1e-10)}
    return metrics, asserts, arts


def _run_solve(p, rng, out):
    n = p.get("n", 8)
    T = SpectralTorus.cube(n, 4)
    omega = corrector.exact_perturbation(T, p.get("amplitude", 1e-2), rng, p.get("max_mode", 1))
    res = corrector.solve(T, omega, p.get("tol", 1e-8), p.get("max_iter", 200))
    zm = float(np.abs(T.zero_mode(res.omega) - T.zero_mode(omega)).max())
    closed = max(float(np.abs(T.d(res.omega[i], 2)).max()) for i in range(3))
    inc = res.increments
    ratios = [inc[k + 1] / inc[k] for k in range(len(inc) - 1) if inc[k] > 0]
    arts = []
    if out is not None and res.residuals:
        it = list(range(1, res.iterations + 1))
        write_series_csv(out / "residuals.csv", it, res.residuals, ("iteration", "gram_residual"))
        emit_plot(it, res.residuals, out / "residuals.svg", "iteration", "max |gram - Id|")
        write_torus_field(out / "field.bin", T.basis, [res.omega, res.V])
        arts = ["residuals.csv", "residuals.svg", "field.bin"]
    tol = p.get("tol", 1e-8)
    metrics = {"iterations": res.iterations, "residuals": res.residuals, "final_residual": res.residual,
               "zero_mode_error": zm, "closedness": closed, "contraction_ratios": ratios}
    asserts = {"converged": _check(res.residual, res.residual <= tol),
               "zero_modes": _check(zm, zm <= 1e-9)}
    return metrics, asserts, arts


def _run_periods(p, rng, out):
    basis = periods.HomologyBasisK3() if p.get("basis", "K3") == "K3" else periods.HomologyBasisALH()
    if "lattice" in p:
        A = np.array(p["lattice"], dtype=float)
    else:
        A = rng.standard_normal((3, 3))
        if np.linalg.det(A) < 0:
            A[0] *= -1
    lat = Lattice3(A)
    F = face_periods_of(lat).f
    c = np.array(p["c"], dtype=float) if "c" in p else rng.standard_normal((3, basis.n_curves))
    for a in p.get("zero_curves", []):
        c[:, a - 1] = 0.0
    V = p.get("V", 1.0)
    metrics, asserts = {}, {}
    f_long = None
    if basis.long_faces:
        sol = periods.solve_rank5(c, F, V)
        f_long = np.array(p["f_long"], dtype=float) if "f_long" in p else sol.particular
        pv = periods.PeriodVector(c, F, f_long, V)
        ranks, gaps = [], []
        for _ in range(p.get("trials", 100)):
            B = rng.standard_normal((3, 3))
            if np.linalg.det(B) < 0:
                B[0] *= -1
            s = periods.solve_rank5(rng.standard_normal((3, 16)), face_periods_of(Lattice3(B)).f, 1.0)
            ranks.append(s.rank)
            gaps.append(s.gap)
        image = periods.L_image_basis(lat).reshape(4, 9)
        image_dim = int(np.linalg.matrix_rank(image, tol=1e-9 * np.abs(image).max()))
        metrics.update({"rank": sol.rank, "trial_ranks": sorted(set(ranks)), "min_gap": min(gaps),
                        "integrability_residual": float(np.abs(periods.check_integrability(pv)).max()),
                        "L_image_dim": image_dim})
        asserts.update({"rank5": _check(sol.rank, sol.rank == 5 and set(ranks) == {5} and min(gaps) >= 1e6),
                        "L_image_dim": _check(image_dim, image_dim == 4)})
    else:
        pv = periods.PeriodVector(c, F, None, V)
    classes = periods.enumerate_minus2(basis, p.get("face_bound", 0))
    brute = periods.brute_force_minus2_curves(min(basis.n_curves, 8))
    metrics["curve_parts"] = len(classes.curve_parts)
    metrics["face_parts"] = len(classes.face_parts)
    metrics["classes"] = len(classes)
    report = periods.check_nondegeneracy(pv, classes)
    metrics["nondegeneracy"] = report.to_dict()
    if basis.n_curves == 8:
        asserts["enumeration"] = _check(len(brute), len(brute) == len(classes.curve_parts))
    asserts["condition1"] = _check(report.det_faces, report.condition1)
    asserts["condition2"] = _check(len(report.violations), report.condition2)
    return metrics, asserts, []


RUNNERS = {
    "models": _run_models,
    "semiflat": _run_semiflat,
    "recover_lattice": _run_recover,
    "glue": _run_glue,
    "solve_hk": _run_solve,
    "periods": _run_periods,
}


def _thread_limit():
    raw = os.environ.get("HK_LAB_THREADS")
    if raw is None or raw == "":
        return None
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"HK_LAB_THREADS must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError("HK_LAB_THREADS must be a positive integer")
    return n


def run(scenario, write=True):
    """Execute a scenario and return its :class:`Report`; ComputeErrors propagate."""
    if isinstance(scenario, dict):
        scenario = validate(scenario)
    out = None
    if write:
        out = Path(scenario.output_dir)
        out.mkdir(parents=True, exist_ok=True)
    with threadpool_limits(limits=_thread_limit()):
        metrics, asserts, arts = RUNNERS[scenario.kind](scenario.params, make_rng(scenario.seed), out)
    report = Report(scenario.to_dict(), metrics, asserts, arts)
    if write:
        write_report(report, out)
    return report


def write_report(report, out):
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    (Path(out) / "report.json").write_text(report.to_json(stamp))


def example_scenario(kind, seed=0):
    return {"kind": kind, "seed": seed, "params": {}}


def save_scenario(data, path):
    dump_yaml(data, path)

