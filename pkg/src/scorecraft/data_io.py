"""File formats and synthetic data: sample CSVs, model JSON, QP dumps.

The data CSV has header y,w,<characteristic names...>; empty cells are
missing values, y is 0/1 with 1 = Good, and w is a required nonnegative
weight.  Fitted models persist as versioned JSON with the spec text embedded
so evaluation can rebuild the design matrix.  All writes go through a
temporary file and an atomic rename.

Synthetic samples draw each characteristic's attribute from class
conditional multinomials using the counter-based Philox generator, so one
seed produces byte-identical files on every platform.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .constraints import ConstraintResiduals, ConstraintSet
from .model import (
    Attribute,
    CategoryBin,
    Characteristic,
    IntervalBin,
    NoInformationBin,
    Sample,
    ScorecardSpec,
    SpecError,
    SpecialBin,
    bin_value,
    parse_spec,
)
from .qp import KktResiduals, QpProblem
from .sqp import FitResult, IterationRecord, PenaltySpec

__all__ = [
    "DataError",
    "SyntheticConfig",
    "ModelFile",
    "load_sample",
    "gen_synthetic",
    "implied_true_beta",
    "save_model",
    "load_model",
    "save_qp_problem",
    "load_qp_problem",
    "load_score_csv",
    "save_score_csv",
    "atomic_write_text",
]

MODEL_FORMAT = "scorecraft-model"
MODEL_VERSION = 1
QP_FORMAT = "scorecraft-qp"
QP_VERSION = 1


class DataError(ValueError):
    """Raised for malformed data files or synthetic configurations."""


def atomic_write_text(path: str, text: str) -> None:
    """Write text to path via a same-directory temp file and atomic rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


# ---------------------------------------------------------------------------
# Sample CSV


def load_sample(path: str) -> Sample:
    """Read a data CSV into a Sample; empty characteristic cells are missing."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        rows = [row for row in reader if row and not row[0].lstrip().startswith("#")]
    if not rows:
        raise DataError(f"{path}: empty data file")
    header = [cell.strip() for cell in rows[0]]
    if len(header) < 2 or header[0] != "y" or header[1] != "w":
        raise DataError(f"{path}: header must start with y,w")
    char_names = header[2:]
    if len(set(char_names)) != len(char_names):
        raise DataError(f"{path}: duplicate characteristic column")
    if any(not name for name in char_names):
        raise DataError(f"{path}: empty characteristic column name")

    n = len(rows) - 1
    y = np.zeros(n)
    w = np.zeros(n)
    records = {name: np.empty(n, dtype=object) for name in char_names}
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise DataError(
                f"{path}: row {i} has {len(row)} fields, expected {len(header)}"
            )
        y_cell = row[0].strip()
        try:
            y_val = float(y_cell)
        except ValueError:
            raise DataError(f"{path}: row {i}, column y: bad value {y_cell!r}") from None
        if y_val not in (0.0, 1.0):
            raise DataError(
                f"{path}: row {i}, column y: value {y_cell!r} is not 0 or 1"
            )
        w_cell = row[1].strip()
        if not w_cell:
            raise DataError(f"{path}: row {i}, column w: weight is required")
        try:
            w_val = float(w_cell)
        except ValueError:
            raise DataError(f"{path}: row {i}, column w: bad value {w_cell!r}") from None
        if not math.isfinite(w_val) or w_val < 0:
            raise DataError(
                f"{path}: row {i}, column w: weight must be finite and nonnegative"
            )
        y[i - 1] = y_val
        w[i - 1] = w_val
        for j, name in enumerate(char_names):
            cell = row[2 + j].strip()
            records[name][i - 1] = cell if cell else None
    sample = Sample(y=y, w=w, records=records)
    try:
        return sample.validate()
    except SpecError as exc:
        raise DataError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# Synthetic generation


@dataclass(frozen=True, eq=False)
class SyntheticConfig:
    """Class-conditional multinomial generator configuration.

    good_probs/bad_probs map characteristic name to a probability vector over
    that characteristic's attributes (spec order, including NoInformation);
    each vector must sum to 1.  true_weights optionally carries a length-q
    coefficient vector for oracle checks.
    """

    seed: int
    n_good: int
    n_bad: int
    spec: ScorecardSpec
    good_probs: dict[str, np.ndarray] = field(default_factory=dict)
    bad_probs: dict[str, np.ndarray] = field(default_factory=dict)
    true_weights: Optional[np.ndarray] = None

    def validate(self) -> "SyntheticConfig":
        if self.n_good < 1 or self.n_bad < 1:
            raise DataError("n_good and n_bad must be at least 1")
        for which, probs in (("good_probs", self.good_probs), ("bad_probs", self.bad_probs)):
            for ch in self.spec.characteristics:
                if ch.name not in probs:
                    raise DataError(f"{which} lacks characteristic {ch.name!r}")
                p = np.asarray(probs[ch.name], dtype=float)
                if p.shape != (len(ch.attributes),):
                    raise DataError(
                        f"{which}[{ch.name!r}] must have {len(ch.attributes)} entries"
                    )
                if (p < 0).any() or not np.isfinite(p).all():
                    raise DataError(f"{which}[{ch.name!r}] has invalid probabilities")
                if abs(float(p.sum()) - 1.0) > 1e-9:
                    raise DataError(
                        f"{which}[{ch.name!r}] must sum to 1, got {float(p.sum()):.12g}"
                    )
        if self.true_weights is not None:
            tw = np.asarray(self.true_weights, dtype=float)
            if tw.shape != (self.spec.q,):
                raise DataError(f"true_weights must have length {self.spec.q}")
        return self


def _representative(ch: Characteristic, att: Attribute) -> object:
    """A raw value that bins into att; verified against the binning rules."""
    rule = att.bin
    if isinstance(rule, SpecialBin):
        raw: object = rule.value
    elif isinstance(rule, CategoryBin):
        raw = sorted(rule.labels)[0]
    elif isinstance(rule, NoInformationBin):
        return None
    else:
        lo, hi = rule.lo, rule.hi
        if math.isfinite(lo) and math.isfinite(hi):
            raw = (lo + hi) / 2.0
        elif math.isfinite(lo):
            raw = lo + 1.0
        elif math.isfinite(hi):
            raw = hi - 1.0
        else:
            raw = 0.0
    if bin_value(ch, raw) != att.att_index:
        raise DataError(
            f"no usable representative for {ch.name!r} attribute "
            f"{att.att_index} ({att.label!r}); value {raw!r} bins elsewhere"
        )
    return raw


def _format_cell(raw: object) -> str:
    if raw is None:
        return ""
    if isinstance(raw, str):
        return raw
    value = float(raw)
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def gen_synthetic(cfg: SyntheticConfig, path: Optional[str] = None) -> Sample:
    """Draw a synthetic sample; optionally write it as a data CSV.

    Attribute draws use inverse-CDF lookups on Philox-generated uniforms, so
    a given seed yields the same sample, and the same file bytes, on every
    platform.  Rows are all Goods first, then all Bads, unit weights.
    """
    cfg.validate()
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    n = cfg.n_good + cfg.n_bad
    y = np.concatenate([np.ones(cfg.n_good), np.zeros(cfg.n_bad)])
    w = np.ones(n)
    records: dict[str, np.ndarray] = {}
    for ch in cfg.spec.characteristics:
        reps = [_representative(ch, att) for att in ch.attributes]
        column = np.empty(n, dtype=object)
        for cls_probs, rows in (
            (cfg.good_probs, slice(0, cfg.n_good)),
            (cfg.bad_probs, slice(cfg.n_good, n)),
        ):
            p = np.asarray(cls_probs[ch.name], dtype=float)
            cum = np.cumsum(p)
            cum[-1] = 1.0
            u = rng.random(rows.stop - rows.start)
            idx = np.searchsorted(cum, u, side="right")
            column[rows] = [reps[k] for k in idx]
        records[ch.name] = column
    sample = Sample(y=y, w=w, records=records).validate()

    if path is not None:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        names = [ch.name for ch in cfg.spec.characteristics]
        writer.writerow(["y", "w"] + names)
        for i in range(n):
            writer.writerow(
                [str(int(y[i])), "1"] + [_format_cell(records[nm][i]) for nm in names]
            )
        atomic_write_text(path, buffer.getvalue())
    return sample


def implied_true_beta(cfg: SyntheticConfig) -> np.ndarray:
    """Coefficients the generator implies under class-conditional independence.

    Intercept log(n_good/n_bad); attribute weight log(PGood/PBad) where both
    class probabilities are positive, 0 where both are zero.  An attribute
    drawn by only one class has no finite weight and raises.
    """
    cfg.validate()
    beta = np.zeros(cfg.spec.q)
    beta[0] = math.log(cfg.n_good / cfg.n_bad)
    for ch in cfg.spec.characteristics:
        pg = np.asarray(cfg.good_probs[ch.name], dtype=float)
        pb = np.asarray(cfg.bad_probs[ch.name], dtype=float)
        for k, att in enumerate(ch.attributes):
            if pg[k] > 0 and pb[k] > 0:
                beta[att.att_index] = math.log(pg[k] / pb[k])
            elif pg[k] == 0 and pb[k] == 0:
                beta[att.att_index] = 0.0
            else:
                raise DataError(
                    f"attribute {att.att_index} ({ch.name!r}) is drawn by only "
                    "one class; its implied weight is not finite"
                )
    return beta


# ---------------------------------------------------------------------------
# Model persistence


@dataclass(frozen=True, eq=False)
class ModelFile:
    """A fitted model as persisted: coefficients plus fit provenance."""

    beta: np.ndarray
    lam: float
    status: str
    trajectory: tuple[IterationRecord, ...]
    kkt: KktResiduals
    residuals: ConstraintResiduals
    minus_ll: float
    spec_text: Optional[str] = None
    note: str = ""

    @classmethod
    def from_fit(
        cls, result: FitResult, pen: PenaltySpec, spec_text: Optional[str] = None
    ) -> "ModelFile":
        return cls(
            beta=np.asarray(result.beta, dtype=float),
            lam=pen.lam,
            status=result.status,
            trajectory=result.trajectory,
            kkt=result.kkt,
            residuals=result.residuals,
            minus_ll=result.minus_ll,
            spec_text=spec_text,
            note=result.note,
        )

    def spec(self) -> ScorecardSpec:
        if self.spec_text is None:
            raise DataError("model file carries no spec text")
        return parse_spec(self.spec_text)


def save_model(path: str, model: ModelFile) -> None:
    """Write a model as versioned, diffable JSON (atomic)."""
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "q": int(model.beta.shape[0]),
        "lam": model.lam,
        "status": model.status,
        "minus_ll": model.minus_ll,
        "note": model.note,
        "beta": [float(v) for v in model.beta],
        "trajectory": [
            {
                "iteration": rec.iteration,
                "max_delta": rec.max_delta,
                "minus_ll": rec.minus_ll,
            }
            for rec in model.trajectory
        ],
        "kkt": {
            "stationarity": model.kkt.stationarity,
            "primal_eq": model.kkt.primal_eq,
            "primal_ineq": model.kkt.primal_ineq,
            "dual": model.kkt.dual,
            "complementarity": model.kkt.complementarity,
        },
        "residuals": {
            "eq_residual": model.residuals.eq_residual,
            "ineq_violation": model.residuals.ineq_violation,
        },
        "spec_sha256": (
            hashlib.sha256(model.spec_text.encode("utf-8")).hexdigest()
            if model.spec_text is not None
            else None
        ),
        "spec_text": model.spec_text,
    }
    atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


def load_model(path: str) -> ModelFile:
    """Read a model JSON, checking format, version, and spec hash."""
    with open(path, "r", encoding="utf-8") as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not valid JSON ({exc})") from None
    if payload.get("format") != MODEL_FORMAT:
        raise DataError(f"{path}: not a {MODEL_FORMAT} file")
    if payload.get("version") != MODEL_VERSION:
        raise DataError(f"{path}: unsupported model version {payload.get('version')}")
    beta = np.asarray(payload["beta"], dtype=float)
    if beta.shape != (int(payload["q"]),):
        raise DataError(f"{path}: beta length disagrees with q")
    spec_text = payload.get("spec_text")
    stored_hash = payload.get("spec_sha256")
    if spec_text is not None and stored_hash is not None:
        actual = hashlib.sha256(spec_text.encode("utf-8")).hexdigest()
        if actual != stored_hash:
            raise DataError(f"{path}: spec text does not match its stored hash")
    kkt = payload["kkt"]
    residuals = payload["residuals"]
    return ModelFile(
        beta=beta,
        lam=float(payload["lam"]),
        status=str(payload["status"]),
        trajectory=tuple(
            IterationRecord(
                iteration=int(rec["iteration"]),
                max_delta=float(rec["max_delta"]),
                minus_ll=float(rec["minus_ll"]),
            )
            for rec in payload["trajectory"]
        ),
        kkt=KktResiduals(
            stationarity=float(kkt["stationarity"]),
            primal_eq=float(kkt["primal_eq"]),
            primal_ineq=float(kkt["primal_ineq"]),
            dual=float(kkt["dual"]),
            complementarity=float(kkt["complementarity"]),
        ),
        residuals=ConstraintResiduals(
            eq_residual=float(residuals["eq_residual"]),
            ineq_violation=float(residuals["ineq_violation"]),
        ),
        minus_ll=float(payload["minus_ll"]),
        spec_text=spec_text,
        note=str(payload.get("note", "")),
    )


# ---------------------------------------------------------------------------
# QP problem dumps


def _vector_json(v: np.ndarray) -> list:
    return [None if not math.isfinite(x) else float(x) for x in v]


def _vector_from_json(data: Sequence, default: float) -> np.ndarray:
    return np.asarray(
        [default if x is None else float(x) for x in data], dtype=float
    )


def save_qp_problem(path: str, problem: QpProblem) -> None:
    """Dump one QP instance as self-describing JSON for offline debugging."""
    payload = {
        "format": QP_FORMAT,
        "version": QP_VERSION,
        "q": problem.q,
        "h": [[float(v) for v in row] for row in problem.h],
        "f": [float(v) for v in problem.f],
        "aeq": [[float(v) for v in row] for row in problem.cs.aeq],
        "beq": [float(v) for v in problem.cs.beq],
        "a": [[float(v) for v in row] for row in problem.cs.a],
        "b": [float(v) for v in problem.cs.b],
        "l": _vector_json(problem.l),
        "u": _vector_json(problem.u),
        "warm_start": (
            None
            if problem.warm_start is None
            else [float(v) for v in problem.warm_start]
        ),
    }
    atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


def load_qp_problem(path: str) -> QpProblem:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not valid JSON ({exc})") from None
    if payload.get("format") != QP_FORMAT:
        raise DataError(f"{path}: not a {QP_FORMAT} file")
    if payload.get("version") != QP_VERSION:
        raise DataError(f"{path}: unsupported dump version {payload.get('version')}")
    q = int(payload["q"])
    h = np.asarray(payload["h"], dtype=float).reshape(q, q)
    aeq = np.asarray(payload["aeq"], dtype=float).reshape(-1, q)
    a = np.asarray(payload["a"], dtype=float).reshape(-1, q)
    cs = ConstraintSet(
        aeq=aeq,
        beq=np.asarray(payload["beq"], dtype=float),
        a=a,
        b=np.asarray(payload["b"], dtype=float),
    )
    warm = payload.get("warm_start")
    return QpProblem(
        h=h,
        f=np.asarray(payload["f"], dtype=float),
        cs=cs,
        l=_vector_from_json(payload["l"], -math.inf),
        u=_vector_from_json(payload["u"], math.inf),
        warm_start=None if warm is None else np.asarray(warm, dtype=float),
    )


# ---------------------------------------------------------------------------
# Score CSVs


def load_score_csv(path: str) -> np.ndarray:
    """Read a one-column score file with header `score`."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        rows = [row for row in csv.reader(handle) if row]
    if not rows or [c.strip() for c in rows[0]] != ["score"]:
        raise DataError(f"{path}: expected a single `score` column")
    values = np.zeros(len(rows) - 1)
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != 1:
            raise DataError(f"{path}: row {i} has {len(row)} fields, expected 1")
        try:
            values[i - 1] = float(row[0])
        except ValueError:
            raise DataError(f"{path}: row {i}: bad score {row[0]!r}") from None
    return values


def save_score_csv(path: str, score: np.ndarray) -> None:
    lines = ["score"] + [repr(float(v)) for v in np.asarray(score, dtype=float)]
    atomic_write_text(path, "\n".join(lines) + "\n")
