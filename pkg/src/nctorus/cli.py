"""Batch driver: parse experiment configs, run pipelines, emit JSON + CSV.

Subcommands
-----------
run <config.toml> [--check]   execute one task, write a JSON result document
                              (and CSV sidecars for large series)
selftest [--corrupt-phase]    run the per-module invariant battery at small K
export-defaults [-o FILE]     dump the defaults table as JSON

Exit codes: 0 success, 2 config/validation error, 3 numeric failure,
4 tolerance breach under --check.

Set NCTORUS_THREADS to cap BLAS thread pools (read before numpy loads).
Identical config + seed produce byte-identical JSON output except for the
segregated "timestamp" field.
"""

import os

_threads = os.environ.get("NCTORUS_THREADS")
if _threads:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
        "VECLIB_MAXIMUM_THREADS",
    ):
        os.environ.setdefault(_var, _threads)

import argparse
import json
import sys
import time

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from .defaults import DEFAULTS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CHECK = 4


class ConfigError(Exception):
    pass


class CheckFailure(Exception):
    pass


def _load_config(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc


def _theta_from(cfg):
    from .core import ThetaMatrix

    n = int(cfg.get("n", 2))
    theta = cfg.get("theta", "zero")
    try:
        if theta == "zero":
            return ThetaMatrix.zero(n)
        mat = np.asarray(theta, dtype=float)
        if mat.shape != (n, n):
            raise ValueError(f"theta must be {n}x{n}")
        return ThetaMatrix(mat)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _trunc_from(cfg, K_key="K", margin_key="margin"):
    from .core import TruncationSpec

    try:
        return TruncationSpec(
            int(cfg.get(K_key, DEFAULTS["K"])),
            int(cfg.get(margin_key, DEFAULTS["margin"])),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _require(condition, message):
    if not condition:
        raise CheckFailure(message)


def _hopping(theta):
    from .core import NCElement

    k = (1,) + (0,) * (theta.n - 1)
    mk = (-1,) + (0,) * (theta.n - 1)
    return NCElement(theta, {k: 1.0, mk: 1.0})


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------


def task_algebra_check(cfg, check, outdir, stem):
    from .core import (
        NCElement,
        TruncationSpec,
        box_coords,
        delta,
        inner,
        involution,
        left_mult_matrix,
        mul,
        random_element,
        tau,
    )

    theta = _theta_from(cfg)
    params = cfg.get("params", {})
    tol = float(params.get("tol", DEFAULTS["algebra_tol"]))
    trials = int(params.get("trials", 5))
    rng = np.random.default_rng(int(cfg.get("seed", DEFAULTS["seed"])))
    defects = {
        "associativity": 0.0,
        "unit": 0.0,
        "involution_antihom": 0.0,
        "traciality": 0.0,
        "tau_delta": 0.0,
        "integration_by_parts": 0.0,
        "inner_two_routes": 0.0,
    }
    one = NCElement.one(theta)
    for _ in range(trials):
        u = random_element(theta, 5, 5, rng)
        v = random_element(theta, 5, 5, rng)
        w = random_element(theta, 5, 5, rng)
        scale = max(u.l2_norm() * v.l2_norm() * w.l2_norm(), 1.0)
        defects["associativity"] = max(
            defects["associativity"],
            (mul(mul(u, v), w) - mul(u, mul(v, w))).l2_norm() / scale,
        )
        defects["unit"] = max(
            defects["unit"],
            (mul(one, u) - u).l2_norm(),
            (mul(u, one) - u).l2_norm(),
        )
        defects["involution_antihom"] = max(
            defects["involution_antihom"],
            (involution(mul(u, v)) - mul(involution(v), involution(u))).l2_norm()
            / max(u.l2_norm() * v.l2_norm(), 1.0),
        )
        defects["traciality"] = max(
            defects["traciality"], abs(tau(mul(u, v)) - tau(mul(v, u)))
        )
        defects["inner_two_routes"] = max(
            defects["inner_two_routes"],
            abs(inner(u, v) - tau(mul(u, involution(v)))),
        )
        for j in range(theta.n):
            ej = tuple(1 if i == j else 0 for i in range(theta.n))
            defects["tau_delta"] = max(defects["tau_delta"], abs(tau(delta(ej, u))))
            defects["integration_by_parts"] = max(
                defects["integration_by_parts"],
                abs(tau(mul(u, delta(ej, v))) + tau(mul(delta(ej, u), v))),
            )
    # matrix multiplicativity on the inner window at small K
    K = int(cfg.get("K", 8))
    trunc = TruncationSpec(K, 2)
    a = random_element(theta, 2, 4, rng)
    b = random_element(theta, 2, 4, rng)
    La = left_mult_matrix(a, trunc)
    Lb = left_mult_matrix(b, trunc)
    Lab = left_mult_matrix(mul(a, b), TruncationSpec(K, 4))
    coords = box_coords(K, theta.n)
    keep = np.all(np.abs(coords) <= K - 4, axis=1)
    defects["matrix_multiplicative"] = float(
        np.max(np.abs((La @ Lb)[np.ix_(keep, keep)] - Lab[np.ix_(keep, keep)]))
    ) / max(a.l2_norm() * b.l2_norm(), 1.0)
    passed = {k: bool(d <= tol) for k, d in defects.items()}
    if check:
        for name, ok in passed.items():
            _require(ok, f"identity {name} breached: {defects[name]:.3e} > {tol:.1e}")
    return {"defects": defects, "passed": passed, "tol": tol}, []


def task_compose(cfg, check, outdir, stem):
    from .psido import remainder_shell_norms
    from .symbols import constant_symbol, lambda_symbol

    theta = _theta_from(cfg)
    params = cfg.get("params", {})
    m1 = float(params.get("order", -2.0))
    radii = [int(r) for r in params.get("radii", DEFAULTS["shell_radii"])]
    n_list = [int(N) for N in params.get("expansion_terms", [1, 2, 3])]
    rho1 = lambda_symbol(m1, theta)
    rho2 = constant_symbol(_hopping(theta))
    results = {"orders": [m1, 0.0], "radii": radii, "slopes": {}, "errors": {}}
    sidecars = []
    for N in n_list:
        pairs, fit = remainder_shell_norms(rho1, rho2, N, radii)
        results["slopes"][str(N)] = fit.exponent
        results["errors"][str(N)] = {str(R): e for R, e in pairs}
        csv = os.path.join(outdir, f"{stem}.compose_N{N}.csv")
        with open(csv, "w") as fh:
            fh.write("R,error\n")
            for R, e in pairs:
                fh.write(f"{R},{e!r}\n")
        sidecars.append(os.path.basename(csv))
        if check:
            bound = m1 + 0.0 - N + 0.5
            _require(
                fit.exponent <= bound,
                f"composition slope {fit.exponent:.2f} above bound {bound:.2f} at N={N}",
            )
    if check and {"1", "2", "3"} <= set(results["errors"]):
        mid = [results["errors"][str(N)].get("16") for N in (1, 2, 3)]
        if all(v is not None for v in mid):
            _require(mid[0] > mid[1] > mid[2], "E(16) not strictly decreasing in N")
    return results, sidecars


def _adjoint_defect(rho, N, trunc):
    from .psido import PsiDO, build_matrix, star_expansion
    from .symbols import CallableSymbol

    approx = CallableSymbol(
        rho.theta, np.conj(rho.order.q), rho.support_radius,
        lambda xi: star_expansion(rho, N, xi),
    )
    Ma = build_matrix(PsiDO(approx), trunc)
    M = build_matrix(PsiDO(rho), trunc)
    return float(np.linalg.norm(Ma.trusted() - M.dagger().trusted()))


def task_adjoint(cfg, check, outdir, stem):
    from .core import NCElement, TruncationSpec, monomial
    from .symbols import PolynomialSymbol

    theta = _theta_from(cfg)
    n = theta.n
    e1 = (1,) + (0,) * (n - 1)
    e2 = (0, 1) + (0,) * (n - 2)
    both = (1, 1) + (0,) * (n - 2)
    rho = PolynomialSymbol(theta, {
        (2,) + (0,) * (n - 1): monomial(e1, 1.0, theta),
        (0, 1) + (0,) * (n - 2): monomial(e2, 0.5 - 0.25j, theta),
        (0,) * n: monomial(both, 1.0j, theta),
    })
    trunc = TruncationSpec(int(cfg.get("K", 6)), 2)
    defects = {str(N): _adjoint_defect(rho, N, trunc) for N in (1, 2, 3)}
    results = {"defects": defects}
    if check:
        d1, d2, d3 = defects["1"], defects["2"], defects["3"]
        _require(d1 > d2 > d3, "adjoint defect not monotone in N")
        _require(d3 <= 1e-3 * d1, f"final defect {d3:.3e} above 1e-3 of {d1:.3e}")
    return results, []


def _metric_from_params(params, theta, outdir):
    from .core import NCElement, TruncationSpec
    from .elliptic import RiemannianMetric
    from .fileio import load_metric

    spec = params.get("metric", "flat")
    trunc = TruncationSpec(
        int(params.get("metric_K", 17)), int(params.get("metric_margin", 1))
    )
    if spec == "flat":
        one = NCElement.one(theta)
        zero = NCElement.zero(theta)
        rows = [
            [one if i == j else zero for j in range(theta.n)]
            for i in range(theta.n)
        ]
        return RiemannianMetric(rows, trunc)
    if isinstance(spec, dict) and "eps" in spec:
        eps = float(spec["eps"])
        one = NCElement.one(theta)
        zero = NCElement.zero(theta)
        e1 = (1,) + (0,) * (theta.n - 1)
        me1 = (-1,) + (0,) * (theta.n - 1)
        g11 = NCElement(theta, {(0,) * theta.n: 1.0, e1: eps, me1: eps})
        rows = [
            [
                g11 if i == j == 0 else (one if i == j else zero)
                for j in range(theta.n)
            ]
            for i in range(theta.n)
        ]
        return RiemannianMetric(rows, trunc)
    if isinstance(spec, dict) and "entries" in spec:
        return load_metric(spec, theta, outdir, trunc)
    raise ConfigError(f"unrecognized metric spec {spec!r}")


def task_parametrix(cfg, check, outdir, stem):
    from .core import TruncationSpec
    from .elliptic import (
        is_elliptic,
        laplace_beltrami,
        parametrix_jet,
        parametrix_residual_fit,
    )
    from .fileio import export_parametrix
    from .symbols import classical_from_polynomial

    theta = _theta_from(cfg)
    params = cfg.get("params", {})
    metric = _metric_from_params(params, theta, outdir)
    sym = laplace_beltrami(metric, prune_tol=float(params.get("prune_tol", 1e-8)))
    jet_terms = int(params.get("terms", 3))
    radii = [int(r) for r in params.get("radii", DEFAULTS["shell_radii"])]
    pps = params.get("points_per_shell", 16)
    jet = parametrix_jet(
        classical_from_polynomial(sym).components,
        jet_terms,
        TruncationSpec(int(params.get("inv_K", 20)), int(params.get("inv_margin", 10))),
        clip_tol=float(params.get("clip_tol", 1e-4)),
        post_tol=float(params.get("post_tol", 1e-5)),
    )
    report = is_elliptic(
        classical_from_polynomial(sym).components[0], DEFAULTS["sphere_samples"],
        TruncationSpec(10, 6), clip_tol=1e-3,
    )
    results = {"elliptic": report.as_dict(), "slopes": {}, "jet_terms": jet_terms}
    sidecars = []
    flat_probe = jet._sigma(1, np.array([3.0] + [0.0] * (theta.n - 1)))
    results["first_correction_modes"] = len(flat_probe)
    for N in range(1, jet_terms + 1):
        pairs, fit = parametrix_residual_fit(
            jet.symbol(N), sym, radii, side="left", points_per_shell=pps
        )
        results["slopes"][str(N)] = fit.exponent
        if check and len(flat_probe) > 0:
            _require(
                fit.exponent <= -N + 0.5,
                f"parametrix slope {fit.exponent:.2f} above bound {-N + 0.5}",
            )
    dump = os.path.join(outdir, f"{stem}.parametrix.csv")
    export_parametrix(jet, radii[:2], dump, points_per_shell=8)
    sidecars.append(os.path.basename(dump))
    if check:
        _require(results["elliptic"]["verdict"], "principal symbol not elliptic")
    return results, sidecars


def _operator_from_params(params, theta, outdir):
    from .psido import PsiDO
    from .symbols import lambda_symbol, laplacian_symbol
    from .elliptic import laplace_beltrami

    op = params.get("operator", "laplacian")
    if op == "laplacian":
        return PsiDO(laplacian_symbol(theta)), True
    if isinstance(op, dict) and "lambda" in op:
        return PsiDO(lambda_symbol(float(op["lambda"]), theta)), True
    if isinstance(op, dict) and "metric" in op:
        metric = _metric_from_params(op, theta, outdir)
        return PsiDO(laplace_beltrami(metric, prune_tol=1e-8)), False
    raise ConfigError(f"unrecognized operator spec {op!r}")


def task_spectrum(cfg, check, outdir, stem):
    from .core import TruncationSpec
    from .fileio import export_spectrum
    from .spectral import spectrum

    theta = _theta_from(cfg)
    params = cfg.get("params", {})
    P, hermitian = _operator_from_params(params, theta, outdir)
    margin = P.symbol.support_radius
    K = int(cfg.get("K", DEFAULTS["K"]))
    trunc = TruncationSpec(K + margin, margin) if margin else TruncationSpec(K, 0)
    spec = spectrum(P, trunc, hermitian=bool(params.get("hermitian", hermitian)))
    csv = os.path.join(outdir, f"{stem}.eigenvalues.csv")
    meta = os.path.join(outdir, f"{stem}.eigenvalues.json")
    export_spectrum(spec, csv, meta, seed=cfg.get("seed", DEFAULTS["seed"]))
    vals = np.real(spec.values)
    results = {
        "count": int(len(vals)),
        "min": float(np.min(vals)),
        "max": float(np.max(vals)),
        "window": spec.window,
        "trusted_cut": spec.trusted_cut,
        "max_imag": float(np.max(np.abs(np.imag(spec.values)))),
    }
    if check:
        _require(results["max_imag"] <= 1e-7, "spectrum has large imaginary parts")
    return results, [os.path.basename(csv), os.path.basename(meta)]


def task_weyl(cfg, check, outdir, stem):
    from .core import TruncationSpec
    from .psido import PsiDO
    from .spectral import lattice_ball_count, spectrum, weyl_ratio
    from .symbols import laplacian_symbol

    theta = _theta_from(cfg)
    params = cfg.get("params", {})
    lam = float(params.get("lambda_cut", 400.0))
    K = int(cfg.get("K", 25))
    spec = spectrum(PsiDO(laplacian_symbol(theta)), TruncationSpec(K, 0), hermitian=True)
    rep = weyl_ratio(spec, theta.n, lam)
    results = rep.as_dict()
    results["lattice_count_oracle"] = lattice_ball_count(theta.n, lam)
    if check:
        rtol = float(params.get("rtol", 0.05))
        _require(abs(rep.ratio - 1.0) <= rtol, f"Weyl ratio {rep.ratio:.4f} off by > {rtol}")
        _require(rep.count == results["lattice_count_oracle"], "count mismatch vs oracle")
    return results, []


def task_schatten(cfg, check, outdir, stem):
    from .core import TruncationSpec
    from .psido import PsiDO
    from .spectral import schatten_slope
    from .symbols import lambda_symbol

    theta = _theta_from(cfg)
    params = cfg.get("params", {})
    s = float(params.get("order", -2.0))
    K = int(cfg.get("K", 30))
    lo, hi = params.get("fit_range", [20, 200])
    res, fit = schatten_slope(
        PsiDO(lambda_symbol(s, theta)), TruncationSpec(K, 0), (int(lo), int(hi))
    )
    csv = os.path.join(outdir, f"{stem}.singular_values.csv")
    from .fileio import export_spectrum

    export_spectrum(res, csv, os.path.join(outdir, f"{stem}.singular_values.json"))
    want = s / theta.n
    results = {
        "slope": fit.exponent,
        "expected": want,
        "residual": fit.residual,
        "fit_range": [int(lo), int(hi)],
    }
    if check:
        _require(
            abs(fit.exponent - want) <= 0.1 * abs(want),
            f"Schatten slope {fit.exponent:.3f} not within 10% of {want:.3f}",
        )
    return results, [os.path.basename(csv), f"{stem}.singular_values.json"]


def task_trace(cfg, check, outdir, stem):
    from .core import TruncationSpec
    from .psido import PsiDO
    from .symbols import lambda_symbol
    from .traces import (
        QuadratureSpec,
        build_meyer_phi,
        integral_trace,
        integral_trace_unnormalized,
        normalize_symbol,
        trace_lattice,
        trace_matrix_diag,
    )

    theta = _theta_from(cfg)
    params = cfg.get("params", {})
    s = float(params.get("order", -6.0))
    K = int(cfg.get("K", 40))
    rho = lambda_symbol(s, theta)
    window = build_meyer_phi(theta.n)
    lat = trace_lattice(rho, K)
    small_K = int(params.get("matrix_K", 12))
    mat = trace_matrix_diag(PsiDO(rho), TruncationSpec(small_K + 1, 1))
    lat_small = trace_lattice(rho, small_K)
    quad = QuadratureSpec(
        float(params.get("h", DEFAULTS["quad_step"])),
        float(params.get("X", K + DEFAULTS["quad_box_pad"])),
    )
    norm = normalize_symbol(rho, window, K)
    integral = integral_trace(norm, quad)
    raw = integral_trace_unnormalized(rho, quad)
    lat_abs = abs(lat.value)
    results = {
        "lattice": lat.as_dict(),
        "matrix_diag": mat.as_dict(),
        "integral": integral.as_dict(),
        "unnormalized": raw.as_dict(),
        "meyer_checks": window.checks,
        "matrix_vs_lattice": abs(mat.value - lat_small.value),
        "integral_vs_lattice_rel": abs(integral.value - lat.value) / lat_abs,
        "unnormalized_vs_lattice_rel": abs(raw.value - lat.value) / lat_abs,
    }
    if check:
        _require(
            results["matrix_vs_lattice"] <= 1e-13 * max(abs(lat_small.value), 1.0),
            "matrix-diagonal trace disagrees with the lattice sum",
        )
        _require(window.checks["phi0_error"] <= 1e-10, "phi(0) check failed")
        _require(window.checks["lattice_error"] <= 1e-8, "phi lattice zeros failed")
        _require(window.checks["integral_error"] <= 1e-6, "phi unit integral failed")
        _require(
            results["integral_vs_lattice_rel"] <= 1e-4,
            "normalized integral trace missed the lattice trace",
        )
        _require(
            results["unnormalized_vs_lattice_rel"] > 1e-3,
            "unnormalized integral unexpectedly matches",
        )
    return results, []


def task_duality(cfg, check, outdir, stem):
    from .core import random_element
    from .spectral import duality_gap, lambda_apply, sobolev_norm

    theta = _theta_from(cfg)
    params = cfg.get("params", {})
    s = float(params.get("s", 1.5))
    trials = int(params.get("trials", 1000))
    seed = int(cfg.get("seed", DEFAULTS["seed"]))
    rng = np.random.default_rng(seed)
    u = random_element(theta, 4, 9, rng)
    rep = duality_gap(u, s, trials, seed=seed)
    iso = abs(lambda_apply(s, u).l2_norm() - sobolev_norm(u, s))
    results = {
        "exact_norm": rep.exact_norm,
        "achieved": rep.achieved,
        "sup_estimate": rep.sup_estimate,
        "holder_violations": rep.holder_violations,
        "isometry_defect": iso,
        "trials": trials,
        "s": s,
    }
    if check:
        _require(rep.holder_violations == 0, "Hoelder bound violated")
        _require(
            abs(rep.achieved - rep.exact_norm) <= 1e-10 * max(rep.exact_norm, 1e-300),
            "maximizer does not attain the dual norm",
        )
        _require(iso <= 1e-13 * max(sobolev_norm(u, s), 1.0), "Lambda^s isometry failed")
    return results, []


TASKS = {
    "algebra-check": task_algebra_check,
    "compose": task_compose,
    "adjoint": task_adjoint,
    "parametrix": task_parametrix,
    "spectrum": task_spectrum,
    "weyl": task_weyl,
    "schatten": task_schatten,
    "trace": task_trace,
    "duality": task_duality,
}


def run(config_path, check=False):
    """Execute one experiment config; returns the process exit code."""
    from .core import NCError

    try:
        cfg = _load_config(config_path)
        task = cfg.get("task")
        if task not in TASKS:
            raise ConfigError(f"unknown task {task!r}; choose from {sorted(TASKS)}")
        _theta_from(cfg)  # validate early
        output = cfg.get("output", os.path.splitext(config_path)[0] + ".result.json")
        outdir = os.path.dirname(os.path.abspath(output)) or "."
        os.makedirs(outdir, exist_ok=True)
        stem = os.path.splitext(os.path.basename(output))[0]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    t0 = time.time()
    try:
        results, sidecars = TASKS[task](cfg, check, outdir, stem)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (NCError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    doc = {
        "task": task,
        "config": cfg,
        "seed": int(cfg.get("seed", DEFAULTS["seed"])),
        "results": results,
        "sidecars": sidecars,
        "elapsed_seconds_field": "timestamp",
        "timestamp": {"unix": time.time(), "elapsed": time.time() - t0},
    }
    with open(output, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    print(f"wrote {output}")
    return EXIT_OK


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------


def _selftest_checks():
    from .core import (
        NCElement,
        ThetaMatrix,
        TruncationSpec,
        box_coords,
        delta,
        involution,
        left_mult_matrix,
        mul,
        random_element,
        tau,
    )
    from .psido import PsiDO, build_matrix, exact_sharp_at
    from .spectral import duality_gap, lambda_apply, sobolev_norm
    from .symbols import CallableSymbol, constant_symbol, lambda_symbol
    from .traces import build_meyer_phi, trace_lattice, trace_matrix_diag

    theta = ThetaMatrix([[0.0, 0.3], [-0.3, 0.0]])
    theta0 = ThetaMatrix.zero(2)
    rng = np.random.default_rng(2024)
    u = random_element(theta, 4, 5, rng)
    v = random_element(theta, 4, 5, rng)
    w = random_element(theta, 4, 5, rng)

    def assoc():
        d = (mul(mul(u, v), w) - mul(u, mul(v, w))).l2_norm()
        return d, d < 1e-12 * max(u.l2_norm() * v.l2_norm() * w.l2_norm(), 1.0)

    def unit():
        one = NCElement.one(theta)
        d = max((mul(one, u) - u).l2_norm(), (mul(u, one) - u).l2_norm())
        return d, d == 0.0

    def antihom():
        d = (involution(mul(u, v)) - mul(involution(v), involution(u))).l2_norm()
        return d, d < 1e-12 * max(u.l2_norm() * v.l2_norm(), 1.0)

    def traces():
        d = max(
            abs(tau(mul(u, v)) - tau(mul(v, u))),
            abs(tau(delta((1, 0), u))),
            abs(tau(mul(u, delta((0, 1), v))) + tau(mul(delta((0, 1), u), v))),
        )
        return d, d < 1e-12

    def theta_zero():
        # exact dyadic coefficients: products and sums stay exact in binary
        def dyadic(seed):
            r = np.random.default_rng(seed)
            return NCElement(theta0, {
                (int(k1), int(k2)): complex(int(r.integers(-8, 9)) / 16.0,
                                            int(r.integers(-8, 9)) / 16.0)
                for k1 in r.integers(-3, 4, 3) for k2 in r.integers(-3, 4, 3)
            })

        a, b = dyadic(7), dyadic(8)
        prod = mul(a, b)
        expect = {}
        for k, x in a.items():
            for l, y in b.items():
                m = (k[0] + l[0], k[1] + l[1])
                expect[m] = expect.get(m, 0j) + x * y
        d = max(abs(prod[k] - c) for k, c in expect.items())
        return d, d == 0.0

    def matrix_mult():
        trunc = TruncationSpec(6, 2)
        a = random_element(theta, 2, 4, rng)
        b = random_element(theta, 2, 4, rng)
        La, Lb = left_mult_matrix(a, trunc), left_mult_matrix(b, trunc)
        Lab = left_mult_matrix(mul(a, b), TruncationSpec(6, 4))
        coords = box_coords(6, 2)
        keep = np.all(np.abs(coords) <= 2, axis=1)
        d = float(np.max(np.abs((La @ Lb - Lab)[np.ix_(keep, keep)])))
        return d, d < 1e-11

    def sharp_oracle():
        rho1 = lambda_symbol(-2.0, theta)
        rho2 = constant_symbol(_hopping(theta))
        trunc = TruncationSpec(6, 1)
        M1 = build_matrix(PsiDO(rho1), TruncationSpec(6, 1))
        M2 = build_matrix(PsiDO(rho2), TruncationSpec(6, 1))
        comp = CallableSymbol(
            theta, -2.0, 1,
            lambda xi: exact_sharp_at(rho1, rho2, tuple(int(round(x)) for x in xi)),
        )
        Mc = build_matrix(PsiDO(comp), trunc)
        d = float(np.max(np.abs((M1.entries @ M2.entries)[np.ix_(*(2 * [
            np.all(np.abs(box_coords(6, 2)) <= 5, axis=1)]))] - Mc.trusted())))
        return d, d < 1e-11

    def lambda_group():
        trunc = TruncationSpec(5, 0)
        M1 = build_matrix(PsiDO(lambda_symbol(1.0, theta)), trunc).entries
        M2 = build_matrix(PsiDO(lambda_symbol(-2.5, theta)), trunc).entries
        M12 = build_matrix(PsiDO(lambda_symbol(-1.5, theta)), trunc).entries
        d = float(np.max(np.abs(M1 @ M2 - M12)))
        return d, d < 1e-13

    def sobolev():
        d = abs(lambda_apply(1.5, u).l2_norm() - sobolev_norm(u, 1.5))
        return d, d < 1e-13 * max(sobolev_norm(u, 1.5), 1.0)

    def duality():
        rep = duality_gap(u, 1.0, 100, seed=3)
        d = abs(rep.achieved - rep.exact_norm)
        return d, d < 1e-10 * max(rep.exact_norm, 1e-300) and rep.holder_violations == 0

    def meyer():
        win = build_meyer_phi(2)
        d = max(win.checks["phi0_error"], win.checks["lattice_error"],
                win.checks["integral_error"])
        return d, d < 1e-6

    def trace_two_routes():
        rho = lambda_symbol(-6.0, theta)
        a = trace_lattice(rho, 6).value
        b = trace_matrix_diag(PsiDO(rho), TruncationSpec(7, 1)).value
        d = abs(a - b)
        return d, d < 1e-13 * max(abs(a), 1.0)

    return [
        ("associativity", assoc),
        ("unit", unit),
        ("involution_antihom", antihom),
        ("trace_identities", traces),
        ("theta_zero_convolution", theta_zero),
        ("matrix_multiplicativity", matrix_mult),
        ("sharp_oracle_matrix", sharp_oracle),
        ("lambda_group_law", lambda_group),
        ("sobolev_isometry", sobolev),
        ("duality_maximizer", duality),
        ("meyer_window", meyer),
        ("trace_two_routes", trace_two_routes),
    ]


def selftest(corrupt_phase=False, stream=sys.stdout):
    """Run the invariant battery; returns (report, number of failures)."""
    from .core import set_phase_twist

    if corrupt_phase:
        set_phase_twist(0.01)
    report = []
    failures = 0
    try:
        for name, fn in _selftest_checks():
            t0 = time.time()
            try:
                defect, ok = fn()
            except Exception as exc:  # surfaced as a failure, not a crash
                defect, ok = float("nan"), False
                detail = f"raised {type(exc).__name__}: {exc}"
            else:
                detail = f"defect {defect:.3e}"
            dt = time.time() - t0
            report.append({
                "check": name,
                "passed": bool(ok),
                "seconds": dt,
                "detail": detail,
            })
            failures += 0 if ok else 1
            status = "pass" if ok else "FAIL"
            print(f"{status:4s}  {name:24s} {dt:8.3f}s  {detail}", file=stream)
    finally:
        if corrupt_phase:
            set_phase_twist(0.0)
    print(f"{len(report) - failures}/{len(report)} checks passed", file=stream)
    return report, failures


def export_defaults(path=None):
    text = json.dumps(DEFAULTS, indent=2, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="nctorus",
        description="Batch driver for noncommutative-torus operator experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute one experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--check", action="store_true",
                       help="exit 4 when a task tolerance is breached")
    p_self = sub.add_parser("selftest", help="run the invariant battery")
    p_self.add_argument("--corrupt-phase", action="store_true",
                        help="fault injection: break the product phase")
    p_def = sub.add_parser("export-defaults", help="dump the defaults table")
    p_def.add_argument("-o", "--output", default=None)
    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.config, check=args.check)
    if args.command == "selftest":
        _, failures = selftest(corrupt_phase=args.corrupt_phase)
        return EXIT_OK if failures == 0 else 1
    return export_defaults(args.output)


if __name__ == "__main__":
    sys.exit(main())
