"""On-disk formats: elements, polynomial symbols, matrices, spectra, traces.

Element files are plain text, one line per mode, whitespace separated:

    k_1 ... k_n re im

with modes in lexicographic order.  The deformation matrix travels in the
experiment config (row-major n x n table), never in element files.

Operator matrices are stored as .npy complex arrays next to a JSON manifest
recording the box radius, margin, trusted window and basis order.  Spectra
are CSV (index,value columns) plus a JSON metadata document.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .core import NCElement
from .psido import shell_points


def save_element(u, path):
    with open(path, "w") as fh:
        for k in sorted(u.coeffs):
            c = u.coeffs[k]
            ints = " ".join(str(x) for x in k)
            fh.write(f"{ints} {c.real!r} {c.imag!r}\n")


def load_element(path, theta):
    out = {}
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != theta.n + 2:
                raise ValueError(f"malformed element line: {line.rstrip()!r}")
            k = tuple(int(x) for x in parts[: theta.n])
            out[k] = float(parts[-2]) + 1j * float(parts[-1])
    return NCElement(theta, out)


def save_polynomial_symbol(sym, json_path):
    """Record list (alpha, element file) with element files stored alongside."""
    base = os.path.splitext(json_path)[0]
    records = []
    for i, (alpha, elem) in enumerate(sorted(sym.coeffs.items())):
        elem_path = f"{base}.coeff{i}.nce"
        save_element(elem, elem_path)
        records.append({
            "alpha": list(alpha),
            "element": os.path.basename(elem_path),
        })
    with open(json_path, "w") as fh:
        json.dump({"records": records}, fh, indent=2, sort_keys=True)


def load_polynomial_symbol(json_path, theta):
    from .symbols import PolynomialSymbol

    with open(json_path) as fh:
        doc = json.load(fh)
    folder = os.path.dirname(os.path.abspath(json_path))
    coeffs = {}
    for rec in doc["records"]:
        elem = load_element(os.path.join(folder, rec["element"]), theta)
        coeffs[tuple(int(a) for a in rec["alpha"])] = elem
    return PolynomialSymbol(theta, coeffs)


def export_matrix(opmat, path_prefix):
    """Dense matrix as .npy with an index-manifest sidecar."""
    npy = f"{path_prefix}.npy"
    np.save(npy, opmat.entries)
    manifest = {
        "format": "numpy-complex128",
        "n": opmat.theta.n,
        "K": opmat.trunc.K,
        "margin": opmat.trunc.margin,
        "trusted_radius": opmat.trusted_radius,
        "basis_order": "lexicographic on (k_1, ..., k_n) over [-K, K]^n",
        "shape": list(opmat.entries.shape),
    }
    with open(f"{path_prefix}.manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return npy


def export_spectrum(spec, csv_path, json_path, seed=None):
    with open(csv_path, "w") as fh:
        if np.iscomplexobj(spec.values) and np.max(np.abs(np.imag(spec.values))) > 0:
            fh.write("index,value_re,value_im\n")
            for i, v in enumerate(spec.values):
                fh.write(f"{i},{np.real(v)!r},{np.imag(v)!r}\n")
        else:
            fh.write("index,value\n")
            for i, v in enumerate(np.real(spec.values)):
                fh.write(f"{i},{v!r}\n")
    meta = {
        "kind": spec.kind,
        "K": spec.K,
        "window": spec.window,
        "solver": spec.solver,
        "hermitian": spec.hermitian,
        "trusted_cut": spec.trusted_cut,
        "count": int(len(spec.values)),
        "seed": seed,
    }
    with open(json_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


def export_parametrix(jet, shells, path, points_per_shell=None):
    """Per-component lattice dumps of a parametrix jet on the given shells."""
    with open(path, "w") as fh:
        n = jet.theta.n
        header = ",".join([f"k_{i+1}" for i in range(n)])
        fh.write(f"component,{header},mode,re,im\n")
        for j in range(jet.N):
            for R in shells:
                for k in shell_points(n, R, points_per_shell):
                    value = jet._sigma(j, np.asarray(k, dtype=float))
                    for mode in sorted(value.coeffs):
                        c = value.coeffs[mode]
                        kstr = ",".join(str(x) for x in k)
                        mstr = " ".join(str(x) for x in mode)
                        fh.write(f"{j},{kstr},{mstr},{c.real!r},{c.imag!r}\n")
    return path


def load_metric(doc, theta, base_dir, trunc, **kw):
    """Metric from a config table of element file references plus a gap."""
    from .elliptic import RiemannianMetric

    n = theta.n
    files = doc["entries"]
    if len(files) != n or any(len(row) != n for row in files):
        raise ValueError("metric entry table must be n x n")
    entries = [
        [load_element(os.path.join(base_dir, name), theta) for name in row]
        for row in files
    ]
    gap = float(doc.get("gap", 1e-8))
    return RiemannianMetric(entries, trunc, gap=gap, **kw)
