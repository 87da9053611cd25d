"""Model and report files (JSON) and CSV output, all written atomically."""

from __future__ import annotations

import csv
import dataclasses
import io as _io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import ModelError
from .model import OuModel, PowerLaw, build_diagonal

INF = "+inf"


# --------------------------------------------------------------------------- models


@dataclass
class ModelConfig:
    model: OuModel
    tolerances: dict = field(default_factory=dict)
    times: list = field(default_factory=list)


def _rule(entry, N: int | None, key: str):
    if isinstance(entry, dict):
        if entry.get("rule") != "power":
            raise ModelError(f"{key}: only the 'power' rule is supported")
        if N is None:
            raise ModelError(f"{key}: a rule needs the truncation N")
        return PowerLaw(float(entry.get("c", 1.0)), float(entry.get("p", 1.0)))
    if isinstance(entry, list):
        return [float(v) for v in entry]
    raise ModelError(f"{key} must be a list of numbers or a rule object")


def model_from_dict(data: dict, base_tol: Tolerances = DEFAULT) -> ModelConfig:
    if not isinstance(data, dict):
        raise ModelError("model file must contain a JSON object")
    tol_over = data.get("tolerances") or {}
    try:
        tol = base_tol.updated(**tol_over)
    except (TypeError, ValueError) as exc:
        raise ModelError(str(exc)) from None
    name = str(data.get("name", "model"))
    kind = data.get("kind", "dense")
    times = [float(t) for t in data.get("times", [])]
    if kind == "diagonal":
        N = data.get("N")
        if "a" not in data or "q" not in data:
            raise ModelError("diagonal model needs 'a' and 'q'")
        a = _rule(data["a"], N, "a")
        q = _rule(data["q"], N, "q")
        if N is None:
            N = len(a)
        model = build_diagonal(q, a, int(N), name=name)
        model.tol = tol
    else:
        if "A" not in data or "i_factor" not in data:
            raise ModelError("model needs 'A' and 'i_factor'")
        model = OuModel(data["A"], data["i_factor"], name=name, kind=kind,
                        params=data.get("params"), tol=tol)
    return ModelConfig(model, dict(tol_over), times)


def model_to_dict(model: OuModel, tolerances: dict | None = None, times: Sequence[float] = ()) -> dict:
    out: dict = {"name": model.name, "kind": model.kind}
    if model.is_diagonal:
        out["N"] = model.n
        out["a"] = model.a_diag.tolist()
        out["q"] = model.q_diag.tolist()
    else:
        out["A"] = model.A.tolist()
        out["i_factor"] = model.i_factor.tolist()
        if model.params:
            out["params"] = jsonable(model.params)
    if tolerances:
        out["tolerances"] = dict(tolerances)
    if times:
        out["times"] = [float(t) for t in times]
    return out


def load_model(path, base_tol: Tolerances = DEFAULT) -> ModelConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ModelError(f"cannot read model file {p}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"{p}: invalid JSON ({exc})") from None
    return model_from_dict(data, base_tol)


def save_model(path, model: OuModel, **kw) -> None:
    write_text_atomic(path, json.dumps(model_to_dict(model, **kw), indent=2) + "\n")


# --------------------------------------------------------------------------- reports


def jsonable(obj):
    """Convert reports to JSON-ready values; infinities become the string ``"+inf"``."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if not isinstance(getattr(obj, f.name), OuModel)}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        c = complex(obj)
        if c.imag == 0:
            return jsonable(c.real)
        return {"re": jsonable(c.real), "im": jsonable(c.imag)}
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isinf(x):
            return INF if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    return obj


def report_to_dict(report) -> dict:
    """JSON layout of a diagnostics report, with a certificates section."""
    gap = report.spectral_gap
    ana = report.analyticity
    out = {
        "model": {"name": report.model_name, "n": report.n, "m": report.m},
        "q_symmetric": {"holds": report.q_symmetric, "defect": report.q_symmetry_defect},
        "h_invariant": report.h_invariant,
        "s_h_contractive": report.s_h_contractive,
        "hq_infinity": {"holds": report.hq_infinity, "provenance": report.q_infinity_provenance},
        "spectral_gap": None,
        "analyticity": None,
        "strong_feller_at": {repr(t): v for t, v in report.strong_feller_at.items()},
        "cross_checks": [dataclasses.asdict(c) for c in report.cross_checks],
        "notes": list(report.notes),
    }
    certs: dict = {"q_infinity": report.q_infinity}
    if gap is not None:
        out["spectral_gap"] = {
            "holds": gap.holds,
            "M_star": gap.M_star,
            "M_star_raw": gap.M_star_raw,
            "gap_omega": gap.gap_omega,
            "growth_bound_A_infinity": gap.growth_bound_A_infinity,
            "bound_checks": [{"t": t, "s_inf_norm": v[0], "exp_bound": v[1], "ok": v[2]}
                             for t, v in gap.bound_checks.items()],
        }
        certs["M_star_witness"] = gap.witness
    if ana is not None:
        out["analyticity"] = {
            "verdict": ana.verdict,
            "sector_constant_b": ana.sector_constant_b,
            "sector_constant_sampled": ana.sector_constant_sampled,
            "C_bound": ana.C_bound,
            "kernel_condition_ok": ana.kernel_condition_ok,
            "flags": list(ana.flags),
        }
        if ana.kernel_witness is not None:
            certs["kernel_witness"] = {"v": ana.kernel_witness[0], "QAt_v": ana.kernel_witness[1]}
        certs["sector_witness"] = ana.sector_witness
        certs["C_witness"] = ana.C_witness
    out["certificates"] = certs
    return jsonable(out)


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


# --------------------------------------------------------------------------- writing


def write_text_atomic(path, text: str) -> None:
    """Write to a temporary file in the target directory, then rename over the target."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{p.name}.", dir=p.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, p)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    write_text_atomic(path, csv_text(header, rows))
