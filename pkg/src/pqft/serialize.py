"""Versioned JSON documents for lattices, kernels, functionals, and series.

Kernel payloads are base64-encoded little-endian float64 (complex kernels as a
real/imaginary pair).  Functional documents carry canonical tensor entries;
exact rational coefficients serialize as "p/q" strings so a rational-mode
round trip is lossless.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
from fractions import Fraction

import numpy as np

from .functionals import MultiVectorField, PolyFunctional
from .lattice import LatticeSpacetime, PropagatorSet, build_lattice, to_float

LATTICE_FORMAT = "pqft-lattice"
FUNCTIONAL_FORMAT = "pqft-functional"
SERIES_FORMAT = "pqft-hbar-series"
VERSION = 1


def encode_f64(arr: np.ndarray) -> str:
    data = np.ascontiguousarray(np.asarray(arr, dtype=float), dtype="<f8")
    return base64.b64encode(data.tobytes()).decode("ascii")


def decode_f64(text: str, shape: tuple[int, ...]) -> np.ndarray:
    raw = base64.b64decode(text.encode("ascii"))
    return np.frombuffer(raw, dtype="<f8").reshape(shape).copy()


# ---------------------------------------------------------------------------
# Lattice and kernels
# ---------------------------------------------------------------------------

def lattice_to_json(lat: LatticeSpacetime, props: PropagatorSet | None = None) -> dict:
    doc = {
        "format": LATTICE_FORMAT,
        "version": VERSION,
        "nt": lat.nt,
        "nx": lat.nx,
        "dt": str(lat.dt),
        "dx": str(lat.dx),
        "mass": str(lat.mass),
        "mode": lat.mode,
    }
    if props is not None:
        n = lat.n_sites
        doc["kernels"] = {
            "shape": [n, n],
            "retarded": encode_f64(to_float(props.retarded)),
            "advanced": encode_f64(to_float(props.advanced)),
            "commutator": encode_f64(to_float(props.commutator)),
            "twopoint_re": encode_f64(props.twopoint.real),
            "twopoint_im": encode_f64(props.twopoint.imag),
        }
    return doc


def lattice_from_json(doc: dict) -> tuple[LatticeSpacetime, dict | None]:
    """Rebuild the lattice; float kernel arrays come back as a dict when present."""
    if doc.get("format") != LATTICE_FORMAT or doc.get("version") != VERSION:
        raise ValueError("not a supported lattice document")
    lat = build_lattice(doc["nt"], doc["nx"], Fraction(doc["dt"]), Fraction(doc["dx"]),
                        Fraction(doc["mass"]), mode=doc.get("mode", "float"))
    kernels = None
    if "kernels" in doc:
        k = doc["kernels"]
        shape = tuple(k["shape"])
        kernels = {
            "retarded": decode_f64(k["retarded"], shape),
            "advanced": decode_f64(k["advanced"], shape),
            "commutator": decode_f64(k["commutator"], shape),
            "twopoint": decode_f64(k["twopoint_re"], shape)
            + 1j * decode_f64(k["twopoint_im"], shape),
        }
    return lat, kernels


def kernel_cache_key(lat: LatticeSpacetime) -> str:
    payload = json.dumps(lat.params_dict(), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()[:24]


def save_kernel_cache(cache_dir: str, lat: LatticeSpacetime, props: PropagatorSet) -> str:
    os.makedirs(cache_dir, exist_ok=True)
    path = os.path.join(cache_dir, f"{kernel_cache_key(lat)}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(lattice_to_json(lat, props), fh, sort_keys=True)
    return path


def load_kernel_cache(cache_dir: str, lat: LatticeSpacetime) -> dict | None:
    path = os.path.join(cache_dir, f"{kernel_cache_key(lat)}.json")
    if not os.path.exists(path):
        return None
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    cached, kernels = lattice_from_json(doc)
    if cached.params_dict() != lat.params_dict():
        return None
    return kernels


# ---------------------------------------------------------------------------
# Functionals and series
# ---------------------------------------------------------------------------

def _encode_value(v):
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    if isinstance(v, (int, float)):
        return v
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.complexfloating):
        return {"re": float(v.real), "im": float(v.imag)}
    raise TypeError(f"cannot serialize coefficient of type {type(v)!r}")


def _decode_value(v):
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, dict):
        return complex(v["re"], v["im"])
    return v


def functional_to_json(X: MultiVectorField) -> dict:
    terms: dict[int, list] = {}
    for w, a, value in X.coefficient_entries():
        terms.setdefault(len(w), []).append([list(w) + list(a), _encode_value(value)])
    return {
        "format": FUNCTIONAL_FORMAT,
        "version": VERSION,
        "k": X.k,
        "nsites": X.nsites,
        "terms": [{"degree": d, "entries": entries}
                  for d, entries in sorted(terms.items())],
    }


def functional_from_json(doc: dict) -> MultiVectorField:
    if doc.get("format") != FUNCTIONAL_FORMAT or doc.get("version") != VERSION:
        raise ValueError("not a supported functional document")
    k = doc["k"]
    out = MultiVectorField(k, doc["nsites"]) if k else PolyFunctional(doc["nsites"])
    for block in doc["terms"]:
        d = block["degree"]
        for indices, value in block["entries"]:
            w, a = tuple(indices[:d]), tuple(indices[d:])
            out.add_tensor_entry(w, a, _decode_value(value))
    return out


def series_to_json(series) -> dict:
    return {
        "format": SERIES_FORMAT,
        "version": VERSION,
        "order": series.order,
        "terms": [functional_to_json(c) for c in series.coefficients],
    }


def series_from_json(doc: dict):
    from .quantize import HbarSeries
    if doc.get("format") != SERIES_FORMAT or doc.get("version") != VERSION:
        raise ValueError("not a supported series document")
    return HbarSeries([functional_from_json(term) for term in doc["terms"]])
