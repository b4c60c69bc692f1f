"""JSON config ingestion and the builtin example registry.

Schema (all angles in radians, '.' decimals):

    {
      "dims": {"n11": 0, "n12": 1, "n21": 2, "n22": 0, "n3": 2},
      "exponents": {"q1": 1, "q2": 1, "q3": 0, "q4": 1, "q5": 0, "q6": 1, "q7": 1},
      "epsilon": 1e-3, "gamma": 0.05, "iota": 1.5, "alpha": 1, "l": 16.0,
      "param_box": [[0.8, 1.8], [0.8, 1.8]],
      "integrable": {"omega": {...}, "Lambda": {...}, "B": {...}},
      "perturbation": {"kind": "trigpoly" | "builtin", ...},
      "seed": 42,
      "xi": [1.0, 1.618033988749895],
      "run": {"tol": 1e-9, "max_steps": 8, "grid_n": 64, "r_tilde": 1.0}
    }

Map forms: {"kind": "identity"}, {"kind": "constant", "value": [...]} or
{"kind": "affine", "value": [...], "matrix": [[...]]}; Lambda values may
be [re, im] pairs.  Trigpoly perturbations list real modes per block:
"g2": [{"k": [1, 1], "cos": [1.0], "sin": [0.0]}, ...] (I-independent).
Builtin perturbations name a shipped example; "corollary1" is the
single-mode system with identity frequency map and constant spectrum.
"""

from __future__ import annotations

import json

import numpy as np

from .model import SystemSpec

__all__ = ["load_config", "parse_config", "builtin_spec", "BUILTIN_NAMES"]


def _as_complex_vector(values) -> np.ndarray:
    out = []
    for v in values:
        if isinstance(v, (list, tuple)):
            out.append(complex(v[0], v[1]))
        else:
            out.append(complex(v))
    return np.asarray(out, complex)


def _vector_map(d: dict, length: int, complex_ok=False):
    kind = d.get("kind", "constant")
    if kind == "identity":
        def f(xi, eps):
            return np.asarray(xi, float)[:length]
        return f
    if kind == "constant":
        val = _as_complex_vector(d["value"]) if complex_ok else np.asarray(d["value"], float)
        val = val.reshape(length) if length else val[:0]
        def f(xi, eps, val=val):
            return val
        return f
    if kind == "affine":
        const = (_as_complex_vector(d["value"]) if complex_ok
                 else np.asarray(d["value"], float)).reshape(length)
        mat = np.asarray(d["matrix"], float)
        def f(xi, eps, const=const, mat=mat):
            return const + mat @ np.asarray(xi, float)
        return f
    raise ValueError(f"unknown map kind {kind!r}")


def _matrix_map(d: dict, n: int):
    kind = d.get("kind", "identity")
    if kind == "identity":
        eye = np.eye(n, dtype=complex)
        return lambda xi, eps: eye
    if kind == "constant":
        val = np.asarray(d["value"], complex).reshape(n, n)
        return lambda xi, eps: val
    raise ValueError(f"unknown matrix map kind {kind!r}")


def _trig_block(modes: list, length: int):
    """I-independent real trig sum a cos<k,phi> + b sin<k,phi> per component."""
    parsed = [(np.asarray(m["k"], float),
               np.asarray(m.get("cos", [0.0] * length), float).reshape(length),
               np.asarray(m.get("sin", [0.0] * length), float).reshape(length))
              for m in modes]

    def g(I, phi, xi, eps):
        phi = np.asarray(phi, float)
        out = np.zeros(phi.shape[:-1] + (length,))
        for k, a, b in parsed:
            arg = phi @ k
            out += a * np.cos(arg)[..., None] + b * np.sin(arg)[..., None]
        return out

    return g


def _zero_block(length: int):
    def g(I, phi, xi, eps):
        phi = np.asarray(phi, float)
        return np.zeros(phi.shape[:-1] + (length,))
    return g


# -- builtin registry ------------------------------------------------------

def _corollary1_blocks(dims):
    """Single-mode perturbation of the reduced system: g2 = cos(phi1 + phi2),
    g3 = (sin phi1, 0, ...)."""
    n12, n21 = dims["n12"], dims["n21"]

    def g2(I, phi, xi, eps):
        phi = np.asarray(phi, float)
        arg = phi[..., 0] + (phi[..., 1] if phi.shape[-1] > 1 else 0.0)
        out = np.zeros(phi.shape[:-1] + (n12,))
        out[..., 0] = np.cos(arg)
        return out

    def g3(I, phi, xi, eps):
        phi = np.asarray(phi, float)
        out = np.zeros(phi.shape[:-1] + (n21,))
        out[..., 0] = np.sin(phi[..., 0])
        return out

    return g2, g3


BUILTIN_NAMES = ("corollary1", "zero")


def _builtin_perturbation(name: str, dims: dict):
    g1 = _zero_block(dims["n11"])
    g4 = _zero_block(dims["n22"])
    if name == "zero":
        return g1, _zero_block(dims["n12"]), _zero_block(dims["n21"]), g4
    if name == "corollary1":
        g2, g3 = _corollary1_blocks(dims)
        return g1, g2, g3, g4
    raise ValueError(f"unknown builtin perturbation {name!r}; have {BUILTIN_NAMES}")


def parse_config(cfg: dict) -> tuple:
    """Build (SystemSpec, options dict) from a parsed JSON config."""
    dims = cfg["dims"]
    n11, n12 = int(dims["n11"]), int(dims["n12"])
    n21, n22 = int(dims["n21"]), int(dims["n22"])
    n3 = int(dims["n3"])
    q = tuple(float(cfg["exponents"][f"q{i}"]) for i in range(1, 8))
    integ = cfg["integrable"]

    omega_full = _vector_map(integ["omega"], n21 + n22)
    lambda_full = _vector_map(integ["Lambda"], n11 + n12, complex_ok=True)
    B_full = _matrix_map(integ.get("B", {"kind": "identity"}), n11 + n12)

    def omega1(xi, eps):
        return np.asarray(omega_full(xi, eps), float)[:n21]

    def omega2(xi, eps):
        return np.asarray(omega_full(xi, eps), float)[n21:n21 + n22]

    def Lambda1(xi, eps):
        return np.asarray(lambda_full(xi, eps), complex)[:n11]

    def Lambda2(xi, eps):
        return np.asarray(lambda_full(xi, eps), complex)[n11:n11 + n12]

    def B1(xi, eps):
        return np.asarray(B_full(xi, eps), complex)[:n11, :n11]

    def B2(xi, eps):
        return np.asarray(B_full(xi, eps), complex)[n11:, n11:]

    pert = cfg["perturbation"]
    analytic = bool(pert.get("analytic", True))
    if pert["kind"] == "builtin":
        g1, g2, g3, g4 = _builtin_perturbation(pert["name"], dims)
    elif pert["kind"] == "trigpoly":
        g1 = _trig_block(pert.get("g1", []), n11) if n11 else _zero_block(0)
        g2 = _trig_block(pert.get("g2", []), n12) if n12 else _zero_block(0)
        g3 = _trig_block(pert.get("g3", []), n21) if n21 else _zero_block(0)
        g4 = _trig_block(pert.get("g4", []), n22) if n22 else _zero_block(0)
    else:
        raise ValueError(f"unknown perturbation kind {pert['kind']!r}")

    spec = SystemSpec(
        n11=n11, n12=n12, n21=n21, n22=n22, n3=n3, q=q,
        epsilon=float(cfg["epsilon"]), l=float(cfg["l"]), alpha=int(cfg["alpha"]),
        iota=float(cfg["iota"]),
        omega1=omega1, omega2=omega2, Lambda1=Lambda1, Lambda2=Lambda2, B1=B1, B2=B2,
        g1=g1, g2=g2, g3=g3, g4=g4, analytic=analytic,
        param_box=np.asarray(cfg["param_box"], float),
        name=str(cfg.get("name", "")))
    options = {
        "gamma": float(cfg.get("gamma", 0.05)),
        "seed": int(cfg.get("seed", 0)),
        "xi": np.asarray(cfg["xi"], float) if "xi" in cfg else None,
        "run": dict(cfg.get("run", {})),
    }
    return spec, options


def load_config(path: str) -> tuple:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(json.load(fh))


def builtin_spec(name: str = "corollary1", epsilon: float = 1e-3) -> tuple:
    """The shipped reduced-system example as (SystemSpec, options)."""
    cfg = corollary1_config(epsilon=epsilon)
    if name == "zero":
        cfg["perturbation"] = {"kind": "builtin", "name": "zero"}
    elif name != "corollary1":
        raise ValueError(f"unknown builtin {name!r}")
    return parse_config(cfg)


def corollary1_config(epsilon: float = 1e-3, xi=(1.0, (1.0 + np.sqrt(5.0)) / 2.0)) -> dict:
    """Config dict for the shipped example: identity frequency map on a box,
    constant spectrum -1, single-mode perturbation, gamma = 0.05, iota = 1.5."""
    return {
        "name": "corollary1",
        "dims": {"n11": 0, "n12": 1, "n21": 2, "n22": 0, "n3": 2},
        "exponents": {"q1": 1.0, "q2": 1.0, "q3": 0.0, "q4": 1.0,
                      "q5": 0.0, "q6": 1.0, "q7": 1.0},
        "epsilon": epsilon,
        "gamma": 0.05,
        "iota": 1.5,
        "alpha": 1,
        "l": 16.0,
        "param_box": [[0.5, 2.5], [0.5, 2.5]],
        "integrable": {"omega": {"kind": "identity"},
                       "Lambda": {"kind": "constant", "value": [-1.0]},
                       "B": {"kind": "identity"}},
        "perturbation": {"kind": "builtin", "name": "corollary1"},
        "seed": 42,
        "xi": list(xi),
        "run": {"tol": 1e-9, "max_steps": 8, "grid_n": 64, "r_tilde": 1.0},
    }
