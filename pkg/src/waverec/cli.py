"""Scenario runner.

``waverec <kind> <scenario.json> [flags]`` reads a JSON scenario, runs the
matching solver, writes a JSON report and prints a one-line summary.
``waverec batch <dir>`` runs every scenario in a directory and
``waverec schema`` prints the scenario schema.

Exit codes: 0 on success with a passing certificate, 2 when the solver did
not converge or the certificate failed (the report is still written), 1 on
input errors.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import jsonschema
import numpy as np
from scipy.linalg import solve_sylvester

from . import __version__, bloch, detect, estimate, identify, measure, oracle, states
from .certificate import Certificate
from .errors import CertificateFailure, InputError, NoConvergence, SchemaError, WaverecError

SCHEMA_VERSION = 1
KINDS = ("detect", "identify", "bloch", "estimate", "validate", "verify")
DEFAULT_OPTIONS = {"tol": 1e-8, "fock_dim": 64, "seed": 0, "max_iters": 20000, "draws": 2000}

_NUM = {"type": "number"}
_CNUM = {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}]}
_VEC = {"type": "array", "items": _CNUM, "minItems": 1}
_MAT = {"type": "array", "items": _VEC, "minItems": 1}
_MEASUREMENT = {
    "type": "object",
    "properties": {
        "elements": {"type": "array", "items": _MAT, "minItems": 1},
        "vectors": _MAT,
        "weights": {"type": "array", "items": _NUM},
        "support": _MAT,
        "labels": {"type": "array"},
    },
    "oneOf": [{"required": ["elements"]}, {"required": ["vectors"]}],
}
_FAMILY = {
    "type": "object",
    "required": ["builder"],
    "properties": {
        "builder": {"enum": ["rotation-qubit", "coherent-displacement", "coherent",
                             "thermal-coherent", "custom-matrix-list"]},
        "radius": _NUM,
        "nbar": {"type": "number", "minimum": 0},
        "matrices": {"type": "array", "items": _MAT},
        "params": {"type": "array", "items": _NUM},
    },
}
_INPUTS = {
    "detect": {"required": ["contrast"], "properties": {"contrast": _MAT, "support": _MAT}},
    "identify": {
        "properties": {
            "method": {"enum": ["general", "srm", "cyclic"]},
            "gram": _MAT,
            "amplitudes": {"type": "array", "items": _VEC, "minItems": 2},
            "grid": {"type": "object", "required": ["half_width", "n_points"],
                     "properties": {"half_width": _NUM, "n_points": {"type": "integer", "minimum": 2}}},
            "weights": {"type": "array", "items": {"type": "number", "minimum": 0}},
            "sigma_row": _VEC,
        },
        "oneOf": [{"required": ["gram"]}, {"required": ["amplitudes"]}, {"required": ["sigma_row"]}],
    },
    "bloch": {
        "required": ["points"],
        "properties": {"points": {"type": "array", "minItems": 2,
                                  "items": {"type": "array", "items": _NUM, "minItems": 4, "maxItems": 4}}},
    },
    "estimate": {
        "required": ["task"],
        "properties": {
            "task": {"enum": ["sld", "rld", "classical", "bayes-gaussian-amplitude", "heterodyne"]},
            "family": _FAMILY,
            "at": _VEC,
            "measurement": _MEASUREMENT,
            "nbar": {"type": "number", "minimum": 0},
            "sbar": {"type": "number", "minimum": 0},
            "alpha_max": {"type": "number", "exclusiveMinimum": 0},
            "n_side": {"type": "integer", "minimum": 4},
        },
    },
    "validate": {"required": ["measurement"], "properties": {"measurement": _MEASUREMENT}},
    "verify": {"required": ["report"], "properties": {"report": {"type": ["string", "object"]}}},
}


def scenario_schema():
    """JSON schema for scenario files."""
    branches = [{"if": {"properties": {"kind": {"const": k}}},
                 "then": {"properties": {"inputs": {"type": "object", **v}}}} for k, v in _INPUTS.items()]
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "waverec scenario",
        "type": "object",
        "required": ["schema_version", "kind", "inputs"],
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "kind": {"enum": list(KINDS)},
            "name": {"type": "string"},
            "inputs": {"type": "object"},
            "options": {
                "type": "object",
                "properties": {
                    "tol": {"type": "number", "exclusiveMinimum": 0},
                    "fock_dim": {"type": "integer", "minimum": 2},
                    "seed": {"type": "integer", "minimum": 0},
                    "max_iters": {"type": "integer", "minimum": 1},
                    "draws": {"type": "integer", "minimum": 1},
                    "verify": {"type": "boolean"},
                },
            },
        },
        "allOf": branches,
    }


# ------------------------------------------------------------ (de)coding

def _pointer(path):
    return "/" + "/".join(str(p) for p in path) if path else ""


def validate_scenario(doc):
    """Raise :class:`SchemaError` with a JSON pointer for the first violation."""
    validator = jsonschema.Draft202012Validator(scenario_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = min(errors, key=lambda e: -len(e.absolute_path))
        raise SchemaError(err.message, _pointer(err.absolute_path))


def decode_number(x):
    return complex(x[0], x[1]) if isinstance(x, list) else complex(x)


def _is_pair(x):
    return isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) for v in x)


def _first_scalar(obj):
    """Leading entry of an encoded single-parameter information matrix."""
    while isinstance(obj, list) and not _is_pair(obj):
        obj = obj[0]
    return decode_number(obj)


def decode_matrix(obj, where):
    if len({len(row) for row in obj}) != 1:
        raise SchemaError("rows have different lengths", where)
    return np.array([[decode_number(x) for x in row] for row in obj], dtype=complex)


def _decode_labels(obj):
    if obj is None:
        return None
    if all(isinstance(x, (int, float)) or _is_pair(x) for x in obj):
        vals = [decode_number(x) for x in obj]
        return [v.real for v in vals] if all(v.imag == 0 for v in vals) else vals
    return list(obj)


def decode_vector(obj):
    return np.array([decode_number(x) for x in obj], dtype=complex)


def encode(a):
    """Complex arrays to nested ``[re, im]`` pairs; real arrays to plain numbers."""
    a = np.asarray(a)
    if np.iscomplexobj(a):
        if a.ndim == 0:
            return [float(a.real), float(a.imag)]
        return [encode(x) for x in a]
    if a.ndim == 0:
        return float(a)
    return [encode(x) for x in a]


def encode_measurement(m: measure.Povm):
    out = {}
    if m.vectors is not None:
        out["vectors"] = encode(m.vectors)
        out["weights"] = encode(np.asarray(m.weights, dtype=float))
    else:
        out["elements"] = encode(m.elements)
    out["support"] = encode(np.asarray(m.support, dtype=complex))
    labels = np.asarray(m.labels)
    out["labels"] = encode(labels) if np.issubdtype(labels.dtype, np.number) else [str(x) for x in m.labels]
    return out


def decode_measurement(obj, where="/inputs/measurement"):
    support = decode_matrix(obj["support"], where + "/support") if "support" in obj else None
    if "elements" in obj:
        el = np.array([decode_matrix(e, f"{where}/elements/{i}") for i, e in enumerate(obj["elements"])])
        if len({e.shape for e in el}) > 1 or el.shape[1] != el.shape[2]:
            raise SchemaError("elements must be square matrices of one size", where + "/elements")
        return measure.Povm(el, support=support, labels=_decode_labels(obj.get("labels")))
    v = decode_matrix(obj["vectors"], where + "/vectors")
    w = np.asarray(obj.get("weights", np.ones(v.shape[1])), dtype=float)
    if w.size != v.shape[1]:
        raise SchemaError("one weight per vector column", where + "/weights")
    return measure.Povm(vectors=v, weights=w, support=support, labels=_decode_labels(obj.get("labels")))


def _square(m, where):
    if m.shape[0] != m.shape[1]:
        raise SchemaError(f"matrix must be square, got {m.shape}", where)
    return m


def _table(name, header, rows):
    return {"name": name, "header": header, "rows": [[float(x) for x in r] for r in rows]}


# ------------------------------------------------------------- families

def build_family(spec, fock_dim):
    b = spec["builder"]
    if b == "rotation-qubit":
        return estimate.rotation_qubit(spec.get("radius", 0.8))
    if b == "coherent-displacement":
        return estimate.coherent_displacement(fock_dim)
    if b == "coherent":
        return estimate.coherent_family(fock_dim)
    if b == "thermal-coherent":
        return estimate.thermal_coherent(spec.get("nbar", 1.0), fock_dim)
    if "matrices" not in spec or "params" not in spec:
        raise SchemaError("custom-matrix-list needs matrices and params", "/inputs/family")
    mats = [decode_matrix(m, f"/inputs/family/matrices/{i}") for i, m in enumerate(spec["matrices"])]
    return estimate.custom(mats, spec["params"])


# ------------------------------------------------------------- runners

def _run_detect(inp, opt):
    c = _square(decode_matrix(inp["contrast"], "/inputs/contrast"), "/inputs/contrast")
    e = _square(decode_matrix(inp["support"], "/inputs/support"), "/inputs/support") if "support" in inp else None
    res = detect.optimal_detect(c, e, tol=opt["tol"])
    el = np.stack([res.D_opt, (np.eye(len(c)) if e is None else e) - res.D_opt])
    povm = measure.Povm(el, support=None if e is None else e, labels=["signal", "background"])
    w = np.linalg.eigvalsh(0.5 * (c + c.conj().T))[::-1]
    tables = [_table("contrast_spectrum", ["index", "eigenvalue"], [(i, x) for i, x in enumerate(w)])]
    result = {"kappa": res.kappa, "B_opt": encode(res.B_opt)}
    return result, povm, res.certificate, "ok", tables


def _identify_patterns(inp):
    if "amplitudes" in inp:
        vecs = [decode_vector(a) for a in inp["amplitudes"]]
        if len({len(v) for v in vecs}) != 1:
            raise SchemaError("amplitudes have different lengths", "/inputs/amplitudes")
        if "grid" in inp:
            g = states.uniform_grid(inp["grid"]["half_width"], inp["grid"]["n_points"])
            return [states.Amplitude(v, g) for v in vecs]
        return [states.Amplitude(v) for v in vecs]
    return None


def _run_identify(inp, opt):
    method = inp.get("method", "cyclic" if "sigma_row" in inp else "general")
    weights = inp.get("weights")
    pats = _identify_patterns(inp)
    sigma = None
    if "gram" in inp:
        sigma = _square(decode_matrix(inp["gram"], "/inputs/gram"), "/inputs/gram")
        if weights is not None:
            w = np.sqrt(np.asarray(weights, dtype=float))
            sigma = w[:, None] * sigma * w[None, :]
    n = len(pats) if pats is not None else (len(sigma) if sigma is not None else len(inp["sigma_row"]))
    if weights is not None and len(weights) != n:
        raise SchemaError(f"{len(weights)} weights for {n} patterns", "/inputs/weights")
    status = "ok"
    if method == "cyclic":
        if "sigma_row" not in inp:
            raise SchemaError("cyclic method needs sigma_row", "/inputs/sigma_row")
        res = identify.cyclic_solve(decode_vector(inp["sigma_row"]), tol=opt["tol"])
    elif method == "srm":
        if pats is not None and weights is not None:
            pats = [p * np.sqrt(w) for p, w in zip(pats, weights)]
        res = identify.srm_equidiagonal(pats, sigma=sigma, tol=opt["tol"])
    else:
        try:
            res = identify.solve_identification(pats, sigma=sigma, weights=weights if pats is not None else None,
                                                max_iters=opt["max_iters"], tol=opt["tol"])
        except NoConvergence as exc:
            res, status = exc.best, "no_convergence"
    tables = [_table("weights", ["index", "mu"], [(i, np.real(np.trace(np.atleast_2d(m))))
                                                   for i, m in enumerate(res.mu)])]
    result = {"kappa": res.kappa, "iterations": int(res.iterations),
              "mu": [float(np.real(np.trace(np.atleast_2d(m)))) for m in res.mu],
              "method": method}
    return result, res.povm, res.certificate, status, tables


def _run_bloch(inp, opt):
    pts = [bloch.BlochPoint(p[0], p[1:]) for p in inp["points"]]
    sol = bloch.solve_polarizations(pts, tol=max(opt["tol"], 1e-9))
    result = {"kappa": sol.kappa, "l": encode(np.asarray(sol.l, dtype=float)),
              "active_set": [int(i) for i in sol.active_set], "pruned": [int(i) for i in sol.pruned]}
    rows = [(i, p.nu, *p.r) for i, p in enumerate(pts)]
    tables = [_table("points", ["index", "nu", "rx", "ry", "rz"], rows)]
    return result, sol.povm, sol.certificate, "ok", tables


def _at(inp, family):
    if "at" not in inp:
        raise SchemaError("estimation point 'at' is required", "/inputs/at")
    v = decode_vector(inp["at"])
    return v.real if family.param_kind == "real" else v


def _run_estimate(inp, opt):
    task = inp["task"]
    tol = opt["tol"]
    if task in ("sld", "rld", "classical"):
        if "family" not in inp:
            raise SchemaError("a family is required", "/inputs/family")
        fam = build_family(inp["family"], opt["fock_dim"])
        at = _at(inp, fam)
        s = fam(at)
        if task == "sld":
            rep = estimate.sld_bound(fam, at)
            ds = estimate.real_derivatives(fam, at)
            res = {f"anticommutator_{i}": float(np.linalg.norm(g @ s + s @ g - 2 * d, 2))
                   for i, (g, d) in enumerate(zip(rep.operators, ds))}
        elif task == "rld":
            rep = estimate.rld_bound(fam, at)
            ds = estimate.conj_derivatives(fam, at)
            res = {f"right_equation_{i}": float(np.linalg.norm(s @ h - d, 2))
                   for i, (h, d) in enumerate(zip(rep.operators, ds))}
        else:
            if "measurement" not in inp:
                raise SchemaError("classical bound needs a measurement", "/inputs/measurement")
            m = decode_measurement(inp["measurement"])
            rep = estimate.classical_bound(m, fam, at)
            res = {}
        cert = Certificate(res, primal=0.0, dual=0.0, tol=max(tol, 1e-6))
        result = {"task": task, "bound": encode(np.asarray(rep.bound)), "information": encode(np.asarray(rep.info))}
        return result, None, cert, "ok", []
    nbar, sbar = inp.get("nbar", 1.0), inp.get("sbar", 2.0)
    if task == "bayes-gaussian-amplitude":
        dim = opt["fock_dim"]
        r = estimate.gaussian_amplitude_bayes(nbar, sbar, dim, cert_tol=max(tol, 1e-7))
        cf = estimate.gaussian_amplitude_closed_form(nbar, sbar)
        result = {"task": task, "sigma2": r.sigma2, "closed_form": cf, "prior_variance": r.prior_variance}
        probs = np.real(np.einsum("ik,ij,jk->k", r.povm.vectors.conj(),
                                  estimate.moment_operators(*_bayes_inputs(nbar, sbar, dim))[0], r.povm.vectors))
        tables = [_table("estimates", ["index", "estimate", "probability"],
                         [(k, x, p) for k, (x, p) in enumerate(zip(r.estimates, probs))])]
        return result, r.povm, r.certificate, "ok", tables
    dim = opt["fock_dim"]
    cf = estimate.heterodyne_closed_form(nbar, sbar)
    moments = estimate.complex_moment_operators(nbar, sbar, dim)
    m = measure.coherent_povm(dim, inp.get("alpha_max", 12.0), inp.get("n_side", 160))
    numeric = estimate.heterodyne_numeric(nbar, sbar, m, moments)
    hc = estimate.heterodyne_certificate(nbar, sbar, moments)
    cert = Certificate({"complementarity": hc["complementarity"], "feasibility": hc["feasibility"]},
                                primal=cf["sigma2"], dual=hc["dual"], tol=max(tol, 1e-6))
    result = {"task": task, "sigma2": cf["sigma2"], "x_scale": cf["x_scale"], "numeric_sigma2": numeric,
              "numeric_error": abs(numeric - cf["sigma2"])}
    return result, None, cert, "ok", []


def _bayes_inputs(nbar, sbar, dim):
    t, w = estimate.gaussian_prior(sbar)
    return states.thermal_coherent_batch(t, nbar, dim), t, w


def _run_validate(inp, opt):
    m = decode_measurement(inp["measurement"])
    rep = measure.validate_povm(m, tol=max(opt["tol"], 1e-12))
    cert = Certificate({"completeness": rep["completeness_residual"],
                                 "positivity": max(0.0, -rep["min_eig"]),
                                 "support_idempotence": rep["support_idempotence"]},
                                primal=0.0, dual=0.0, tol=max(opt["tol"], 1e-9))
    return {"validation": rep}, m, cert, "ok", []


# ------------------------------------------------------------- oracle

def _oracle_states(scn):
    """Hypothesis operators of a scenario, built independently of the solvers."""
    kind, inp = scn["kind"], scn["inputs"]
    if kind == "bloch":
        px = np.array([[0, 1], [1, 0]], dtype=complex)
        py = np.array([[0, -1j], [1j, 0]], dtype=complex)
        pz = np.array([[1, 0], [0, -1]], dtype=complex)
        return [0.5 * (p[0] * np.eye(2) + p[1] * px + p[2] * py + p[3] * pz) for p in inp["points"]]
    if kind == "identify":
        weights = inp.get("weights")
        if "amplitudes" in inp:
            vecs = [decode_vector(a) for a in inp["amplitudes"]]
            step = 1.0
            if "grid" in inp:
                g = states.uniform_grid(inp["grid"]["half_width"], inp["grid"]["n_points"])
                step = g.step
            w = np.ones(len(vecs)) if weights is None else np.asarray(weights, dtype=float)
            return [wi * step * np.outer(v, v.conj()) for v, wi in zip(vecs, w)]
        if "gram" in inp:
            sigma = decode_matrix(inp["gram"], "/inputs/gram")
            if weights is not None:
                sw = np.sqrt(np.asarray(weights, dtype=float))
                sigma = sw[:, None] * sigma * sw[None, :]
        else:
            row = decode_vector(inp["sigma_row"])
            i = np.arange(len(row))
            sigma = row[(i[:, None] - i[None, :]) % len(row)]
        w, v = np.linalg.eigh(0.5 * (sigma + sigma.conj().T))
        h = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
        return [np.outer(h[:, i], h[:, i].conj()) for i in range(h.shape[1])]
    return None


def run_oracle(scn, report, measurement):
    """Independent checks on a finished report; returns a summary dict."""
    kind, inp, opt = scn["kind"], scn["inputs"], scn["options"]
    out = {"checks": {}}
    tol = 1e-8
    if kind == "detect":
        c = decode_matrix(inp["contrast"], "/inputs/contrast")
        kappa = report["result"]["kappa"]
        value = oracle.quasifilter_objective(c, measurement.elements[0])
        sampled = oracle.sampled_max_objective(oracle.detection_objective(c), len(c), 2, opt["draws"], opt["seed"])
        out["checks"] = {"value_matches": abs(value - kappa) < 1e-9,
                         "sampling_below_optimum": sampled["best_value"] <= kappa + tol}
        out["sampled_best"] = sampled["best_value"]
    elif kind in ("identify", "bloch"):
        ops = _oracle_states(scn)
        kappa = report["result"]["kappa"]
        obj = oracle.identification_objective(ops)
        value = obj(measurement) if kind == "bloch" else _signal_space_value(ops, measurement)
        sampled = oracle.sampled_max_objective(obj, ops[0].shape[0], len(ops), opt["draws"], opt["seed"])
        out["checks"] = {"value_matches": abs(value - kappa) < 1e-8,
                         "sampling_below_optimum": sampled["best_value"] <= kappa + tol}
        out["sampled_best"] = sampled["best_value"]
    elif kind == "estimate":
        out["checks"] = _oracle_estimate(inp, opt, report)
    elif kind == "validate":
        m = measurement
        total = sum(m.elements)
        out["checks"] = {"completeness_recomputed": bool(np.max(np.abs(total - m.support)) < 1e-8)}
    out["passed"] = bool(all(out["checks"].values()))
    return out


def _signal_space_value(ops, measurement):
    el = measurement.elements
    if el.shape[1] != ops[0].shape[0]:
        return float("nan")
    return float(sum(np.real(np.trace(s @ d)) for s, d in zip(ops, el)))


def _oracle_estimate(inp, opt, report):
    task = inp["task"]
    if task in ("sld", "rld"):
        fam = build_family(inp["family"], opt["fock_dim"])
        at = _at(inp, fam)
        s = fam(at)
        if fam.dim_params != 1:
            return {"single_parameter_only": True}
        if task == "sld":
            d, err = oracle.finite_difference_derivative(lambda x: fam([x]), float(at[0]))
            g = solve_sylvester(s, s, 2 * d)
            info = float(np.real(np.trace(s @ g @ g)))
            reported = _first_scalar(report["result"]["information"]).real
            return {"information_matches": abs(info - reported) < 1e-6}
        dx, _ = oracle.finite_difference_derivative(lambda x: fam([x + 1j * at[0].imag]), float(at[0].real))
        dy, _ = oracle.finite_difference_derivative(lambda y: fam([at[0].real + 1j * y]), float(at[0].imag))
        dbar = 0.5 * (dx + 1j * dy)
        h = np.linalg.lstsq(s, dbar, rcond=1e-10)[0]
        info = float(np.real(np.trace(s @ h @ h.conj().T)))
        reported = _first_scalar(report["result"]["information"]).real
        return {"information_matches": abs(info - reported) < 1e-6}
    if task == "bayes-gaussian-amplitude":
        ops, t, w = _bayes_inputs(inp.get("nbar", 1.0), inp.get("sbar", 2.0), opt["fock_dim"])
        m = decode_measurement(report["measurement"], "/measurement")
        x = np.real(np.asarray(m.labels, dtype=complex))
        lik = np.real(np.einsum("ik,tij,jk->tk", m.vectors.conj(), ops, m.vectors))
        risk = float(np.sum(w[:, None] * lik * (t[:, None] - x[None, :]) ** 2))
        return {"risk_matches": abs(risk - report["result"]["sigma2"]) < 1e-7}
    if task == "heterodyne":
        return {"numeric_within_grid_tolerance": report["result"]["numeric_error"] < 2e-3}
    return {}


# ------------------------------------------------------------- driver

def _normalise(doc, flags):
    scn = copy.deepcopy(doc)
    opt = dict(DEFAULT_OPTIONS)
    opt.update(scn.get("options", {}))
    for key in ("tol", "fock_dim", "seed", "max_iters"):
        if flags.get(key) is not None:
            opt[key] = flags[key]
    if flags.get("verify"):
        opt["verify"] = True
    opt.setdefault("verify", False)
    scn["options"] = opt
    return scn


def digest(scn):
    payload = json.dumps({"scenario": scn, "version": __version__}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


RUNNERS = {"detect": _run_detect, "identify": _run_identify, "bloch": _run_bloch,
           "estimate": _run_estimate, "validate": _run_validate}


def run_scenario(doc, flags=None, base_dir="."):
    """Run a parsed scenario; returns ``(report, exit_code, tables)``."""
    flags = flags or {}
    validate_scenario(doc)
    scn = _normalise(doc, flags)
    validate_scenario(scn)
    kind = scn["kind"]
    if kind == "verify":
        return _run_verify(scn, base_dir)
    np.random.seed(scn["options"]["seed"])
    result, povm, cert, status, tables = RUNNERS[kind](scn["inputs"], scn["options"])
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool": "waverec",
        "version": __version__,
        "kind": kind,
        "input_digest": digest(scn),
        "scenario": scn,
        "result": result,
        "certificate": cert.as_dict(),
    }
    measurement = None
    if povm is not None:
        report["measurement"] = encode_measurement(povm)
        measurement = decode_measurement(report["measurement"], "/measurement")
        check = measure.validate_povm(measurement, tol=max(scn["options"]["tol"], 1e-9))
        report["measurement_check"] = check
    if status == "ok" and not cert.passed:
        status = "certificate_failed"
    if scn["options"]["verify"]:
        report["oracle"] = run_oracle(scn, report, measurement)
        if not report["oracle"]["passed"] and status == "ok":
            status = "oracle_failed"
    report["status"] = status
    return report, (0 if status == "ok" else 2), tables


def _run_verify(scn, base_dir):
    ref = scn["inputs"]["report"]
    if isinstance(ref, str):
        path = Path(base_dir) / ref
        try:
            target = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"cannot read report: {exc}", "/inputs/report") from exc
    else:
        target = ref
    if "scenario" not in target or "result" not in target:
        raise SchemaError("not a waverec report", "/inputs/report")
    inner = copy.deepcopy(target["scenario"])
    inner["options"]["draws"] = scn["options"].get("draws", inner["options"].get("draws"))
    inner["options"]["seed"] = scn["options"]["seed"]
    m = decode_measurement(target["measurement"], "/measurement") if "measurement" in target else None
    orc = run_oracle(inner, target, m)
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool": "waverec",
        "version": __version__,
        "kind": "verify",
        "input_digest": digest(scn),
        "scenario": scn,
        "result": {"target_digest": target.get("input_digest"), "target_kind": inner["kind"]},
        "certificate": target.get("certificate", {}),
        "oracle": orc,
        "status": "ok" if orc["passed"] else "oracle_failed",
    }
    return report, (0 if orc["passed"] else 2), []


def dumps(report):
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _write_atomic(path: Path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_tables(tables, csv_dir: Path, stem):
    csv_dir.mkdir(parents=True, exist_ok=True)
    for t in tables:
        with open(csv_dir / f"{stem}.{t['name']}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(t["header"])
            w.writerows(t["rows"])


def _summary(report, code, elapsed, out):
    res = report.get("result", {})
    bits = [f"kind={report['kind']}", f"status={report['status']}", f"exit={code}"]
    for key in ("kappa", "sigma2"):
        if key in res:
            bits.append(f"{key}={res[key]:.10g}")
    cert = report.get("certificate", {})
    if "residuals" in cert:
        bits.append(f"max_residual={max(cert['residuals'].values(), default=0.0):.2e}")
    bits.append(f"time={elapsed:.2f}s")
    bits.append(f"report={out}")
    return " ".join(bits)


def _load(path: Path):
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc.msg} at line {exc.lineno}", "") from exc
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc.strerror}", "") from exc


def run_file(path, kind=None, flags=None, out=None, csv_dir=None, stream=None):
    """Run one scenario file, write its report and print the summary; returns the exit code."""
    path = Path(path)
    out = Path(out) if out else Path(path.stem + ".report.json")
    start = time.perf_counter()
    try:
        doc = _load(path)
        if kind is not None and isinstance(doc, dict) and doc.get("kind") != kind:
            raise SchemaError(f"scenario kind is {doc.get('kind')!r}, command asked for {kind!r}", "/kind")
        report, code, tables = run_scenario(doc, flags, base_dir=path.parent)
    except SchemaError as exc:
        print(f"error: SchemaError at {exc}", file=sys.stderr)
        return 1
    except (InputError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (CertificateFailure, WaverecError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    _write_atomic(out, dumps(report))
    if csv_dir:
        _write_tables(tables, Path(csv_dir), path.stem)
    print(_summary(report, code, time.perf_counter() - start, out), file=stream or sys.stdout)
    return code


def _parser():
    p = argparse.ArgumentParser(prog="waverec", description="Optimal wave-pattern measurement scenarios.")
    p.add_argument("--version", action="version", version=f"waverec {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def flags(sp):
        sp.add_argument("--tol", type=float)
        sp.add_argument("--fock-dim", type=int, dest="fock_dim")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--max-iters", type=int, dest="max_iters")
        sp.add_argument("--csv-dir")
        sp.add_argument("--verify", action="store_true", help="run the oracle cross-check inline")

    for k in KINDS:
        sp = sub.add_parser(k, help=f"run a {k} scenario")
        sp.add_argument("scenario")
        sp.add_argument("-o", "--out", help="report path (default: <scenario>.report.json)")
        flags(sp)
    sp = sub.add_parser("batch", help="run every scenario in a directory")
    sp.add_argument("directory")
    sp.add_argument("--out-dir", help="report directory (default: <directory>/reports)")
    flags(sp)
    sub.add_parser("schema", help="print the scenario JSON schema")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.command == "schema":
        print(json.dumps(scenario_schema(), indent=2, sort_keys=True))
        return 0
    flags = {k: getattr(args, k) for k in ("tol", "fock_dim", "seed", "max_iters", "verify")}
    if args.command == "batch":
        d = Path(args.directory)
        files = sorted(d.glob("*.json"))
        if not files:
            print(f"error: no scenarios in {d}", file=sys.stderr)
            return 1
        out_dir = Path(args.out_dir) if args.out_dir else d / "reports"
        codes = [run_file(f, None, flags, out_dir / f"{f.stem}.report.json", args.csv_dir) for f in files]
        return max(codes)
    return run_file(args.scenario, args.command, flags, args.out, args.csv_dir)


if __name__ == "__main__":
    sys.exit(main())
