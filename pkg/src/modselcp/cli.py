"""Command-line interface.

``modselcp simulate --config CFG --out OUT``
    Run a Monte-Carlo experiment and write one summary row per method.
``modselcp predict --data DATA --models MODELS --config CFG --out OUT``
    Calibrate on files of responses and pretrained-model evaluations and write
    the prediction set of every requested method.
``modselcp report SUMMARY... --out OUT [--table TABLE]``
    Merge simulation summaries into a long-format table for plotting.

Config files are flat ``key = value`` documents (``#`` starts a comment) or a
single JSON object. Exit codes: 0 on success, 2 on configuration, schema or
input errors, 3 when a structural invariant check fails during a simulation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
from dataclasses import dataclass

import numpy as np

from .calib import CalibrationScores
from .lossfn import LossContext
from .regions import format_region
from .scores import ModelClass
from .select import METHODS, TieBreaker, competing_sets, run_method
from .simlab import dgp as dgps
from .simlab.runner import ExperimentConfig, InvariantViolation, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3

SUMMARY_FIELDS = (
    "setting",
    "method",
    "alpha",
    "trials",
    "coverage",
    "coverage_se",
    "width",
    "width_se",
    "width_ratio",
    "width_ratio_se",
)
METRICS = ("coverage", "width", "width_ratio")
REPORT_FIELDS = ("setting", "method", "metric", "value", "se")
PREDICT_FIELDS = ("method", "region", "selected_model", "threshold_T", "M_size")


class ConfigError(Exception):
    """Bad configuration or input file; ``line`` is 1-based when known."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
        self.line = line


# ---------------------------------------------------------------------------
# number formatting
# ---------------------------------------------------------------------------


def fmt_float(v: float) -> str:
    """Shortest round-trip decimal; ``INF``/``-INF``; NaN as an empty field."""
    v = float(v)
    if math.isnan(v):
        return ""
    if v == math.inf:
        return "INF"
    if v == -math.inf:
        return "-INF"
    return repr(v)


def parse_float(text: str) -> float:
    t = str(text).strip()
    if t == "":
        return math.nan
    if t.upper() in ("INF", "+INF"):
        return math.inf
    if t.upper() == "-INF":
        return -math.inf
    return float(t)


def _json_number(v: float):
    v = float(v)
    if math.isnan(v):
        return None
    if math.isinf(v):
        return fmt_float(v)
    return v


# ---------------------------------------------------------------------------
# config documents
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfigDoc:
    values: dict
    lines: dict
    path: str

    def error(self, key: str, message: str) -> ConfigError:
        return ConfigError(message, self.path, self.lines.get(key))


def _json_key_lines(text: str, keys) -> dict:
    lines = {}
    for key in keys:
        m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
        if m:
            lines[key] = text.count("\n", 0, m.start()) + 1
    return lines


def parse_config_text(text: str, path: str = "<config>") -> ConfigDoc:
    """Parse a ``key = value`` document or a JSON object."""
    if text.lstrip().startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
        if not isinstance(obj, dict):
            raise ConfigError("JSON config must be an object", path, 1)
        return ConfigDoc(dict(obj), _json_key_lines(text, obj), path)
    values, lines = {}, {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", path, no)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", path, no)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", path, no)
        values[key] = value
        lines[key] = no
    return ConfigDoc(values, lines, path)


def read_config(path: str) -> ConfigDoc:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path) from None
    return parse_config_text(text, path)


def _as_int(v) -> int:
    if isinstance(v, bool):
        raise ValueError("expected an integer")
    if isinstance(v, int):
        return v
    if isinstance(v, float) and v.is_integer():
        return int(v)
    return int(str(v).strip())


def _as_float(v) -> float:
    if isinstance(v, bool):
        raise ValueError("expected a number")
    return float(v) if isinstance(v, (int, float)) else parse_float(v)


def _as_bool(v) -> bool:
    if isinstance(v, bool):
        return v
    t = str(v).strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError("expected true or false")


def _as_str(v) -> str:
    if not isinstance(v, (str, int, float)) or isinstance(v, bool):
        raise ValueError("expected a string")
    return str(v).strip()


def _as_methods(v) -> tuple[str, ...]:
    items = v if isinstance(v, list) else str(v).split(",")
    names = tuple(str(m).strip() for m in items if str(m).strip())
    if not names:
        raise ValueError("method list is empty")
    bad = [m for m in names if m not in METHODS]
    if bad:
        raise ValueError(f"unknown method(s) {', '.join(bad)}; expected names from {', '.join(METHODS)}")
    return names


def _choice(*options):
    def conv(v):
        s = _as_str(v)
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s

    return conv


def _tie_break(v) -> str:
    s = _as_str(v)
    TieBreaker.parse(s)
    return s


def _alpha(v) -> float:
    a = _as_float(v)
    if not 0.0 < a < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return a


COMMON_KEYS = {
    "alpha": _alpha,
    "methods": _as_methods,
    "tie_break": _tie_break,
    "format": _choice("csv", "json"),
    "n1": _as_int,
}

SIMULATE_KEYS = {
    **COMMON_KEYS,
    "dgp": _choice("two_model", "regression", "classification"),
    "setting": _as_str,
    "C": _as_float,
    "mu": _as_float,
    "d": _as_int,
    "theta": _choice("sparse", "dense"),
    "x_dist": _choice("normal", "t"),
    "noise": _choice("normal", "t"),
    "nu": _as_float,
    "n_labels": _as_int,
    "score": _choice("residual", "rescaled"),
    "n": _as_int,
    "n_models": _as_int,
    "n_train": _as_int,
    "trials": _as_int,
    "master_seed": _as_int,
    "ridge_penalty": _as_float,
    "subset_frac": _as_float,
    "knn_k": _as_int,
    "check_invariants": _as_bool,
    "invariant_grid": _as_int,
    "invariant_samples": _as_int,
}

PREDICT_KEYS = {
    **COMMON_KEYS,
    "score": _choice("residual", "rescaled", "cqr", "density"),
}

DGP_KEYS = {
    "two_model": ("C", "mu"),
    "regression": ("d", "theta", "x_dist", "noise", "nu"),
    "classification": ("d", "n_labels"),
}


def typed_config(doc: ConfigDoc, schema: dict) -> dict:
    out = {}
    for key, raw in doc.values.items():
        if key not in schema:
            raise doc.error(key, f"unknown key {key!r}")
        try:
            out[key] = schema[key](raw)
        except (TypeError, ValueError) as exc:
            raise doc.error(key, f"bad value for {key!r}: {exc}") from None
    return out


def _setting_label(cfg: dict) -> str:
    name = cfg["dgp"]
    parts = [name] + [f"{k}={cfg[k]}" for k in DGP_KEYS[name] if k in cfg]
    if name == "regression" and "score" in cfg:
        parts.append(f"score={cfg['score']}")
    if name != "two_model":
        parts.append(f"n_models={cfg.get('n_models', 50)}")
    return " ".join(parts)


def experiment_from_config(doc: ConfigDoc) -> tuple[ExperimentConfig, str]:
    """Build an experiment configuration; returns it with the output format."""
    cfg = typed_config(doc, SIMULATE_KEYS)
    if "dgp" not in cfg:
        raise ConfigError("missing required key 'dgp'", doc.path)
    name = cfg["dgp"]
    allowed = set(DGP_KEYS[name])
    for other, keys in DGP_KEYS.items():
        for key in keys:
            if key in cfg and key not in allowed:
                raise doc.error(key, f"key {key!r} does not apply to dgp {name!r}")
    dgp_args = {k: cfg[k] for k in DGP_KEYS[name] if k in cfg}
    try:
        if name == "two_model":
            spec = dgps.TwoModel(**dgp_args)
        elif name == "regression":
            spec = dgps.RegressionLinear(**dgp_args)
        else:
            spec = dgps.Classification(**dgp_args)
    except ValueError as exc:
        raise ConfigError(str(exc), doc.path, doc.lines.get("dgp")) from None
    fields = {
        k: cfg[k]
        for k in (
            "n",
            "n_models",
            "alpha",
            "trials",
            "master_seed",
            "methods",
            "n_train",
            "score",
            "n1",
            "tie_break",
            "ridge_penalty",
            "subset_frac",
            "knn_k",
            "check_invariants",
            "invariant_grid",
            "invariant_samples",
        )
        if k in cfg
    }
    if name == "classification" and "score" in cfg:
        raise doc.error("score", "classification data always uses the density score")
    if name == "two_model" and "score" in cfg and cfg["score"] != "residual":
        raise doc.error("score", "the two-model design uses the residual score")
    fields["setting"] = cfg.get("setting", _setting_label(cfg))
    try:
        exp = ExperimentConfig(spec, **fields)
    except ValueError as exc:
        raise ConfigError(str(exc), doc.path) from None
    if exp.n1 is not None and not 1 <= exp.n1 < exp.n:
        raise doc.error("n1", "n1 must satisfy 1 <= n1 < n")
    return exp, cfg.get("format", "csv")


# ---------------------------------------------------------------------------
# output tables
# ---------------------------------------------------------------------------


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write output: {exc.strerror}", path) from None


def _csv_text(fields, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    w.writerows(rows)
    return buf.getvalue()


def summary_rows(summary) -> list[dict]:
    cfg = summary.config
    rows = []
    for r in summary.rows:
        rows.append(
            {
                "setting": cfg.setting,
                "method": r.method,
                "alpha": cfg.alpha,
                "trials": cfg.trials,
                "coverage": r.coverage,
                "coverage_se": r.coverage_se,
                "width": r.width,
                "width_se": r.width_se,
                "width_ratio": r.width_ratio,
                "width_ratio_se": r.width_ratio_se,
            }
        )
    return rows


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return fmt_float(v)


def render_rows(fields, rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        out = []
        for row in rows:
            obj = {}
            for f in fields:
                v = row[f]
                if isinstance(v, str) or (isinstance(v, (int, np.integer)) and not isinstance(v, bool)):
                    obj[f] = v if isinstance(v, str) else int(v)
                else:
                    obj[f] = _json_number(v)
            out.append(obj)
        return json.dumps(out, indent=2) + "\n"
    return _csv_text(fields, [[_cell(row[f]) for f in fields] for row in rows])


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    doc = read_config(args.config)
    exp, fmt = experiment_from_config(doc)
    summary = run_experiment(exp)
    _write_text(args.out, render_rows(SUMMARY_FIELDS, summary_rows(summary), fmt))
    return EXIT_OK


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------

_COL = re.compile(r"^m(\d+)_(pred|sigma|qlo|qhi|p(\d+))$")
_TEST_MARKERS = ("", "TEST")


def _read_csv(path: str) -> tuple[list[str], list[tuple[int, list[str]]]]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            rows = []
            header = None
            for row in reader:
                if header is None:
                    if not row or all(not c.strip() for c in row):
                        continue
                    header = [c.strip() for c in row]
                    continue
                if not row or all(not c.strip() for c in row):
                    continue
                rows.append((reader.line_num, [c.strip() for c in row]))
    except OSError as exc:
        raise ConfigError(f"cannot read file: {exc.strerror}", path) from None
    except csv.Error as exc:
        raise ConfigError(f"malformed CSV: {exc}", path) from None
    if header is None:
        raise ConfigError("file is empty; expected a header row", path, 1)
    if len(set(header)) != len(header):
        raise ConfigError("duplicate column names in header", path, 1)
    for line, row in rows:
        if len(row) != len(header):
            raise ConfigError(f"expected {len(header)} fields, found {len(row)}", path, line)
    return header, rows


def _response_column(header: list[str], path: str) -> str:
    cols = [c for c in ("y", "y_label") if c in header]
    if len(cols) != 1:
        raise ConfigError("need exactly one response column, 'y' or 'y_label'", path, 1)
    return cols[0]


def read_responses(path: str):
    """Calibration responses; a trailing TEST row (empty response) is allowed and skipped."""
    header, rows = _read_csv(path)
    col = _response_column(header, path)
    j = header.index(col)
    if rows and rows[-1][1][j] in _TEST_MARKERS:
        rows = rows[:-1]
    if not rows:
        raise ConfigError("no calibration rows", path)
    values = []
    for line, row in rows:
        text = row[j]
        try:
            if col == "y_label":
                values.append(int(text))
            else:
                v = float(text)
                if not math.isfinite(v):
                    raise ValueError
                values.append(v)
        except ValueError:
            kind = "an integer label" if col == "y_label" else "a finite number"
            raise ConfigError(f"response {text!r} is not {kind}", path, line) from None
    return col, np.array(values), rows[-1][0]


def _detect_family(kinds: set[str]) -> str:
    if any(k.startswith("p") and k != "pred" for k in kinds):
        return "density"
    if kinds & {"qlo", "qhi"}:
        return "cqr"
    if "sigma" in kinds:
        return "rescaled"
    return "residual"


def read_model_evaluations(path: str, n: int, family: str | None = None) -> ModelClass:
    """Per-model evaluations at n calibration points plus a final TEST row."""
    header, rows = _read_csv(path)
    columns = {}  # (model, kind) -> column index
    resp = None
    for j, name in enumerate(header):
        if name in ("y", "y_label"):
            resp = j
            continue
        m = _COL.match(name)
        if not m:
            raise ConfigError(f"unexpected column {name!r}", path, 1)
        columns[(int(m.group(1)), m.group(2))] = j
    if not columns:
        raise ConfigError("no model columns (expected m<k>_... names)", path, 1)
    kinds = {k for _, k in columns}
    detected = _detect_family(kinds)
    if family is not None and family != detected:
        raise ConfigError(f"columns describe a {detected} model class but score = {family}", path, 1)
    n_models = max(m for m, _ in columns) + 1
    if family is None:
        family = detected
    if family == "density":
        labels = sorted({int(k[1:]) for _, k in columns})
        K = labels[-1] + 1
        needed = [f"p{j}" for j in range(K)]
    else:
        needed = {"residual": ["pred"], "rescaled": ["pred", "sigma"], "cqr": ["qlo", "qhi"]}[family]
    expected = {(m, k) for m in range(n_models) for k in needed}
    missing = sorted(expected - set(columns))
    if missing:
        raise ConfigError(f"missing column m{missing[0][0]}_{missing[0][1]}", path, 1)
    extra = sorted(set(columns) - expected)
    if extra:
        raise ConfigError(f"column m{extra[0][0]}_{extra[0][1]} does not belong to a {family} model class", path, 1)
    if len(rows) != n + 1:
        line = rows[-1][0] if rows else 1
        raise ConfigError(f"expected {n} calibration rows plus one TEST row, found {len(rows)} rows", path, line)
    if resp is not None:
        for line, row in rows[:-1]:
            if row[resp] in _TEST_MARKERS:
                raise ConfigError("only the final row may be the TEST row", path, line)
        if rows[-1][1][resp] not in _TEST_MARKERS:
            raise ConfigError("final row must be the TEST row (empty response or 'TEST')", path, rows[-1][0])

    def block(kind: str) -> np.ndarray:
        arr = np.empty((n_models, n + 1))
        for m in range(n_models):
            j = columns[(m, kind)]
            for r, (line, row) in enumerate(rows):
                try:
                    v = float(row[j])
                except ValueError:
                    raise ConfigError(f"column {header[j]}: {row[j]!r} is not a number", path, line) from None
                if not math.isfinite(v):
                    raise ConfigError(f"column {header[j]}: value must be finite", path, line)
                arr[m, r] = v
        return arr

    try:
        if family == "residual":
            f = block("pred")
            return ModelClass.residual(f[:, :n], f[:, n])
        if family == "rescaled":
            f, s = block("pred"), block("sigma")
            return ModelClass.rescaled(f[:, :n], f[:, n], s[:, :n], s[:, n])
        if family == "cqr":
            lo, hi = block("qlo"), block("qhi")
            return ModelClass.cqr(lo[:, :n], hi[:, :n], lo[:, n], hi[:, n])
        p = np.stack([block(k) for k in needed], axis=2)  # (models, n + 1, K)
        return ModelClass.density(p[:, :n], p[:, n])
    except ValueError as exc:
        raise ConfigError(str(exc), path) from None


def predict_rows(mc: ModelClass, y: np.ndarray, alpha: float, methods, tb: TieBreaker, n1=None) -> list[dict]:
    ctx = LossContext(mc)
    cs = CalibrationScores(mc.calib_scores(y), alpha)
    m_size = int(competing_sets(ctx, cs, tb).M.sum())
    rows = []
    for name in methods:
        out = run_method(name, ctx, cs, tb, n1=n1)
        rows.append(
            {
                "method": name,
                "region": format_region(out.region),
                "selected_model": out.selected_model,
                "threshold_T": out.threshold_T,
                "M_size": m_size,
            }
        )
    return rows


def cmd_predict(args) -> int:
    doc = read_config(args.config)
    cfg = typed_config(doc, PREDICT_KEYS)
    if "alpha" not in cfg:
        raise ConfigError("missing required key 'alpha'", doc.path)
    col, y, _ = read_responses(args.data)
    mc = read_model_evaluations(args.models, y.size, cfg.get("score"))
    if mc.discrete != (col == "y_label"):
        raise ConfigError(
            "response column does not match the model class (use y_label with probability columns)", args.data, 1
        )
    if mc.discrete and (y.min() < 0 or y.max() >= mc.n_labels):
        bad = int(np.flatnonzero((y < 0) | (y >= mc.n_labels))[0])
        raise ConfigError(f"label {int(y[bad])} outside 0..{mc.n_labels - 1}", args.data, bad + 2)
    methods = cfg.get("methods", ("modsel_cp",))
    n1 = cfg.get("n1")
    if "yk_split" in methods and y.size < 2:
        raise doc.error("methods", "yk_split needs at least two calibration points")
    if n1 is not None and not 1 <= n1 < y.size:
        raise doc.error("n1", "n1 must satisfy 1 <= n1 < n")
    tb = TieBreaker.parse(cfg.get("tie_break", "min_index"))
    rows = predict_rows(mc, y, cfg["alpha"], methods, tb, n1)
    _write_text(args.out, render_rows(PREDICT_FIELDS, rows, cfg.get("format", "csv")))
    return EXIT_OK


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def _numeric(value, path: str, line: int | None, field: str) -> float:
    if value is None:
        return math.nan
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    try:
        return parse_float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"field {field!r}: {value!r} is not a number", path, line) from None


def read_summary(path: str) -> list[dict]:
    """Rows of a ``simulate`` output file (CSV or JSON)."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read summary: {exc.strerror}", path) from None
    records = []
    if text.lstrip().startswith("["):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
        for obj in data:
            if not isinstance(obj, dict) or set(obj) != set(SUMMARY_FIELDS):
                raise ConfigError("summary objects must have exactly the summary fields", path)
            records.append((None, obj))
    else:
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SUMMARY_FIELDS:
            raise ConfigError(f"header must be {','.join(SUMMARY_FIELDS)}", path, 1)
        for row in reader:
            if not row:
                continue
            if len(row) != len(SUMMARY_FIELDS):
                raise ConfigError(f"expected {len(SUMMARY_FIELDS)} fields, found {len(row)}", path, reader.line_num)
            records.append((reader.line_num, dict(zip(SUMMARY_FIELDS, row))))
    rows = []
    for line, rec in records:
        row = {"setting": str(rec["setting"]), "method": str(rec["method"])}
        if row["method"] not in METHODS:
            raise ConfigError(f"unknown method {row['method']!r}", path, line)
        for f in SUMMARY_FIELDS[2:]:
            row[f] = _numeric(rec[f], path, line, f)
        rows.append(row)
    if not rows:
        raise ConfigError("summary has no rows", path)
    return rows


def report_rows(summaries: list[list[dict]]) -> list[dict]:
    out = []
    alphas = []
    for rows in summaries:
        for r in rows:
            if r["alpha"] not in alphas:
                alphas.append(r["alpha"])
            for metric in METRICS:
                out.append(
                    {
                        "setting": r["setting"],
                        "method": r["method"],
                        "metric": metric,
                        "value": r[metric],
                        "se": r[f"{metric}_se"],
                    }
                )
    if len(alphas) > 1:
        out.append(
            {
                "setting": "WARNING",
                "method": "",
                "metric": "alpha_conflict",
                "value": ";".join(fmt_float(a) for a in alphas),
                "se": math.nan,
            }
        )
    return out


def comparison_table(summaries: list[list[dict]]) -> str:
    """Wide table: one row per (setting, method), ``value (se)`` cells."""
    fields = ("setting", "method", "alpha", "trials") + METRICS
    rows = []
    for rows_in in summaries:
        for r in rows_in:
            cells = [r["setting"], r["method"], fmt_float(r["alpha"]), str(int(r["trials"]))]
            for metric in METRICS:
                se = r[f"{metric}_se"]
                v = f"{r[metric]:.4g}" if math.isfinite(r[metric]) else fmt_float(r[metric])
                se_text = f"{se:.2g}" if math.isfinite(se) else fmt_float(se)
                cells.append(v if math.isnan(se) else f"{v} ({se_text})")
            rows.append(cells)
    return _csv_text(fields, rows)


def cmd_report(args) -> int:
    summaries = [read_summary(p) for p in args.paths]
    rows = report_rows(summaries)
    _write_text(args.out, _csv_text(REPORT_FIELDS, [[_cell(r[f]) for f in REPORT_FIELDS] for r in rows]))
    if args.table:
        _write_text(args.table, comparison_table(summaries))
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="modselcp", description="Conformal prediction after data-dependent model selection.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run a Monte-Carlo experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("predict", help="prediction sets from pretrained-model evaluations")
    p.add_argument("--data", required=True, help="CSV with the calibration responses (y or y_label)")
    p.add_argument("--models", required=True, help="CSV with m<k>_* evaluation columns; last row is TEST")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("report", help="merge simulation summaries into a long-format table")
    p.add_argument("paths", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--table", help="also write a wide comparison table here")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
