"""The BECAUSE query language: parsing, printing, execution, summaries.

Grammar (keywords case-insensitive):

    query  = "SELECT" select "FROM" ident "WHERE" pred "BECAUSE" expr [opts]
    select = "*" | ident { "," ident }
    pred   = ident cmp number
    cmp    = "=" | "!=" | "<" | "<=" | ">" | ">="
    expr   = conj { "OR" conj }
    conj   = atom { "AND" atom }
    atom   = ident [ "RISING" | "FALLING" ]
    opts   = "WITH" opt { "," opt }
    opt    = ("BANDWIDTH" | "DELTA" | "ALPHA") "=" number

Execution: discontinuities are scanned in the metric series (cuts kept only
where the WHERE predicate holds on at least one side), each KPI atom's series
is scanned, coincident cuts are associated, and matching disjuncts become
evidence windows anchored at the metric cut.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import QuerySyntaxError, SeriesTooShort, UnknownKpi, UnknownMetric
from .rdd import (
    AssociationEvidence,
    associate,
    local_linear_fit,
    null_threshold,
    scan_discontinuities,
)

KEYWORDS = {
    "SELECT", "FROM", "WHERE", "BECAUSE", "OR", "AND",
    "RISING", "FALLING", "WITH", "BANDWIDTH", "DELTA", "ALPHA",
}
COMPARATORS = ("=", "!=", "<", "<=", ">", ">=")
RISING = "rising"
FALLING = "falling"
ANY_SIGN = "any"

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(r"\d+(\.\d+)?([eE][+-]?\d+)?")


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class KpiAtom:
    name: str
    sign: str = ANY_SIGN  # rising | falling | any


@dataclass(frozen=True)
class QueryOptions:
    bandwidth: float | None = None
    delta: float | None = None
    alpha: float | None = None


@dataclass(frozen=True)
class QueryAst:
    select: tuple[str, ...] | None  # None means *
    source: str
    metric: str
    comparator: str
    value: float
    disjuncts: tuple[tuple[KpiAtom, ...], ...]
    options: QueryOptions = field(default_factory=QueryOptions)

    def kpi_names(self) -> list[str]:
        seen: list[str] = []
        for conj in self.disjuncts:
            for atom in conj:
                if atom.name not in seen:
                    seen.append(atom.name)
        return seen


# ---------------------------------------------------------------------------
# lexer


@dataclass(frozen=True)
class _Token:
    kind: str  # KEYWORD | IDENT | NUMBER | symbol text | EOF
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            word = m.group(0)
            kind = "KEYWORD" if word.upper() in KEYWORDS else "IDENT"
            tokens.append(_Token(kind, word, line, col))
            i = m.end()
            col += len(word)
            continue
        m = _NUMBER_RE.match(text, i)
        if m:
            tokens.append(_Token("NUMBER", m.group(0), line, col))
            col += m.end() - i
            i = m.end()
            continue
        for sym in ("!=", "<=", ">=", "<", ">", "=", "*", ",", "-"):
            if text.startswith(sym, i):
                tokens.append(_Token(sym, sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise QuerySyntaxError(line, col, ("a token",), repr(ch))
    tokens.append(_Token("EOF", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected: tuple[str, ...]):
        tok = self.peek()
        found = tok.text if tok.kind != "EOF" else "end of query"
        raise QuerySyntaxError(tok.line, tok.col, expected, found)

    def expect_keyword(self, word: str) -> _Token:
        tok = self.peek()
        if tok.kind == "KEYWORD" and tok.text.upper() == word:
            return self.advance()
        self.fail((word,))

    def expect_ident(self, what: str) -> str:
        tok = self.peek()
        if tok.kind == "IDENT":
            return self.advance().text
        self.fail((what,))

    def at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "KEYWORD" and tok.text.upper() == word

    def number(self) -> float:
        negative = False
        if self.peek().kind == "-":
            self.advance()
            negative = True
        tok = self.peek()
        if tok.kind != "NUMBER":
            self.fail(("a number",))
        self.advance()
        value = float(tok.text)
        return -value if negative else value

    def parse_query(self) -> QueryAst:
        self.expect_keyword("SELECT")
        select: tuple[str, ...] | None
        if self.peek().kind == "*":
            self.advance()
            select = None
        else:
            names = [self.expect_ident("* or an identifier")]
            while self.peek().kind == ",":
                self.advance()
                names.append(self.expect_ident("an identifier"))
            select = tuple(names)
        self.expect_keyword("FROM")
        source = self.expect_ident("a source name")
        self.expect_keyword("WHERE")
        metric = self.expect_ident("a metric name")
        cmp_tok = self.peek()
        if cmp_tok.kind not in COMPARATORS:
            self.fail(COMPARATORS)
        self.advance()
        value = self.number()
        self.expect_keyword("BECAUSE")
        disjuncts = [self.parse_conj()]
        while self.at_keyword("OR"):
            self.advance()
            disjuncts.append(self.parse_conj())
        options = QueryOptions()
        if self.at_keyword("WITH"):
            self.advance()
            options = self.parse_opts()
        tok = self.peek()
        if tok.kind != "EOF":
            self.fail(("end of query", "OR", "AND", "WITH"))
        return QueryAst(
            select=select,
            source=source,
            metric=metric,
            comparator=cmp_tok.kind,
            value=value,
            disjuncts=tuple(disjuncts),
            options=options,
        )

    def parse_conj(self) -> tuple[KpiAtom, ...]:
        atoms = [self.parse_atom()]
        while self.at_keyword("AND"):
            self.advance()
            atoms.append(self.parse_atom())
        return tuple(atoms)

    def parse_atom(self) -> KpiAtom:
        name = self.expect_ident("a KPI name")
        sign = ANY_SIGN
        if self.at_keyword("RISING"):
            self.advance()
            sign = RISING
        elif self.at_keyword("FALLING"):
            self.advance()
            sign = FALLING
        return KpiAtom(name=name, sign=sign)

    def parse_opts(self) -> QueryOptions:
        values: dict[str, float] = {}
        while True:
            tok = self.peek()
            if tok.kind == "KEYWORD" and tok.text.upper() in ("BANDWIDTH", "DELTA", "ALPHA"):
                key = tok.text.upper()
                self.advance()
            else:
                self.fail(("BANDWIDTH", "DELTA", "ALPHA"))
            if self.peek().kind != "=":
                self.fail(("=",))
            self.advance()
            if key.lower() in values:
                raise QuerySyntaxError(tok.line, tok.col, ("a distinct option",), key)
            values[key.lower()] = self.number()
            if self.peek().kind == ",":
                self.advance()
                continue
            break
        return QueryOptions(**values)


def parse(text: str) -> QueryAst:
    """Parse a BECAUSE query; raises QuerySyntaxError with (line, col)."""
    return _Parser(text).parse_query()


def _format_number(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def pretty_print(ast: QueryAst) -> str:
    """Canonical text form; parse(pretty_print(a)) == a."""
    select = "*" if ast.select is None else ", ".join(ast.select)
    parts = [
        f"SELECT {select}",
        f"FROM {ast.source}",
        f"WHERE {ast.metric} {ast.comparator} {_format_number(ast.value)}",
    ]
    disjuncts = []
    for conj in ast.disjuncts:
        atoms = []
        for atom in conj:
            if atom.sign == ANY_SIGN:
                atoms.append(atom.name)
            else:
                atoms.append(f"{atom.name} {atom.sign.upper()}")
        disjuncts.append(" AND ".join(atoms))
    parts.append("BECAUSE " + " OR ".join(disjuncts))
    opts = []
    for key in ("bandwidth", "delta", "alpha"):
        val = getattr(ast.options, key)
        if val is not None:
            opts.append(f"{key.upper()} = {_format_number(val)}")
    if opts:
        parts.append("WITH " + ", ".join(opts))
    return " ".join(parts)


# ---------------------------------------------------------------------------
# execution


@dataclass(frozen=True)
class EvidenceWindow:
    start_frame: int
    end_frame: int
    matched_atoms: tuple[tuple[str, AssociationEvidence], ...]
    score: float
    sample_frames: tuple[int, ...]
    plot_data: dict = field(default_factory=dict, compare=False)

    def to_json(self) -> dict:
        return {
            "start_frame": self.start_frame,
            "end_frame": self.end_frame,
            "score": self.score,
            "sample_frames": list(self.sample_frames),
            "matched_atoms": [
                {"kpi": name, "evidence": ev.to_json()} for name, ev in self.matched_atoms
            ],
            "plot_data": self.plot_data,
        }


@dataclass(frozen=True)
class QueryResult:
    query: str  # canonical text
    windows: tuple[EvidenceWindow, ...]
    summary: dict
    bandwidth: int
    delta: int
    alpha: float
    t_thresholds: dict

    def to_json(self) -> dict:
        return _sanitize(
            {
                "query": self.query,
                "bandwidth": self.bandwidth,
                "delta": self.delta,
                "alpha": self.alpha,
                "t_thresholds": self.t_thresholds,
                "windows": [w.to_json() for w in self.windows],
                "summary": self.summary,
            }
        )

    def content_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_json(), sort_keys=True).encode()
        ).hexdigest()[:12]


_DBL_MAX = 1.7976931348623157e308


def _sanitize(obj):
    """JSON-safe copy: non-finite floats become +/-DBL_MAX (browser JSON
    parsers reject Infinity literals)."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, float):
        if math.isinf(obj):
            return _DBL_MAX if obj > 0 else -_DBL_MAX
        if math.isnan(obj):
            return 0.0
        return obj
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return _sanitize(float(obj))
    return obj


_CMP_FN = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _predicate_holds_on_side(frames, values, cut, bandwidth, side, comparator, literal) -> bool:
    """True when at least half of the side's window points satisfy the
    predicate pointwise (the regime test for error-class style series)."""
    if side == "left":
        sel = (frames >= cut - bandwidth) & (frames <= cut - 1)
    else:
        sel = (frames >= cut) & (frames <= cut + bandwidth - 1)
    vals = values[sel]
    if len(vals) == 0:
        return False
    fn = _CMP_FN[comparator]
    hits = sum(1 for v in vals if fn(v, literal))
    return hits * 2 >= len(vals)


def _sign_ok(atom: KpiAtom, evidence: AssociationEvidence) -> bool:
    if atom.sign == RISING:
        return evidence.kpi_disc.tau > 0
    if atom.sign == FALLING:
        return evidence.kpi_disc.tau < 0
    return True


def _fit_segment(series_frames, series_values, cut, bandwidth, side) -> dict:
    fit = local_linear_fit(
        list(zip(series_frames.tolist(), series_values.tolist())), cut, side, bandwidth
    )
    if side == "left":
        xs = [float(cut - bandwidth), cut - 0.5]
    else:
        xs = [cut - 0.5, float(cut + bandwidth - 1)]
    return {
        "frames": xs,
        "values": [fit.value_at(x - cut) for x in xs],
        "slope": fit.slope,
        "intercept_at_cut": fit.intercept_at_cut,
    }


def _series_segment(series, start, end, cut, bandwidth, name) -> dict:
    frames = series.frames()
    values = series.values()
    sel = (frames >= start) & (frames <= end)
    seg = {
        "name": name,
        "frames": frames[sel].tolist(),
        "values": values[sel].tolist(),
        "cut": int(cut),
    }
    try:
        seg["left_fit"] = _fit_segment(frames, values, cut, bandwidth, "left")
        seg["right_fit"] = _fit_segment(frames, values, cut, bandwidth, "right")
    except Exception:
        pass  # plot fits are best-effort near series edges
    return seg


def _evenly_spaced(start: int, end: int, k: int) -> tuple[int, ...]:
    if k <= 1 or end <= start:
        return (start,)
    raw = np.linspace(start, end, k)
    out: list[int] = []
    for v in raw:
        i = int(round(v))
        if not out or i != out[-1]:
            out.append(i)
    return tuple(out)


def execute(ast: QueryAst, project, config=None) -> QueryResult:
    """Run the query against a project (anything satisfying the Project
    surface: metric_series/kpi_series accessors and a frame_count)."""
    from .project import EngineConfig  # local import to avoid a cycle

    config = config or EngineConfig()
    bandwidth = int(ast.options.bandwidth or config.bandwidth)
    delta = int(ast.options.delta or config.delta or 2 * bandwidth)
    alpha = float(ast.options.alpha or config.alpha)
    # scan the configured ladder up to the query bandwidth: fine scales catch
    # sharp flips that wash out at the window scale
    ladder = sorted({b for b in config.scan_bandwidths if b <= bandwidth} | {bandwidth})

    kpi_names = ast.kpi_names()
    for name in kpi_names:
        if not project.has_kpi(name):
            raise UnknownKpi(name)
    if not project.has_metric(ast.metric):
        raise UnknownMetric(ast.metric)

    metric = project.metric_series(ast.metric)
    m_frames, m_values = metric.frames(), metric.values()
    if len(m_values) < 2 * bandwidth:
        raise SeriesTooShort(len(m_values), 2 * bandwidth)

    thresholds = {}

    def multi_scan(series, series_name: str) -> list:
        values = series.values()
        if len(values) < 2 * bandwidth:
            raise SeriesTooShort(len(values), 2 * bandwidth)
        out = []
        for b in ladder:
            thr = null_threshold(len(values), b, alpha, config.n_sims, config.null_seed)
            thresholds[f"{series_name}@{b}"] = thr
            out.extend(
                scan_discontinuities(series, b, thr, min_separation=b, name=series_name)
            )
        return out

    metric_discs = [
        d
        for d in multi_scan(metric, ast.metric)
        if _predicate_holds_on_side(
            m_frames, m_values, d.cutpoint, d.bandwidth, "left", ast.comparator, ast.value
        )
        or _predicate_holds_on_side(
            m_frames, m_values, d.cutpoint, d.bandwidth, "right", ast.comparator, ast.value
        )
    ]

    kpi_series = {}
    evidence_by_kpi: dict[str, list[AssociationEvidence]] = {}
    for name in kpi_names:
        series = project.kpi_series(name)
        kpi_series[name] = series
        evidence_by_kpi[name] = associate(multi_scan(series, name), metric_discs, delta)

    all_evidence = sorted(
        (e for evs in evidence_by_kpi.values() for e in evs),
        key=lambda e: (-e.score, e.kpi_disc.series_name, e.kpi_disc.cutpoint, e.metric_disc.cutpoint),
    )

    # per distinct metric cut, try every disjunct
    raw_windows = []
    for cut in sorted({d.cutpoint for d in metric_discs}):
        best_score = 0.0
        matched: list[tuple[str, AssociationEvidence]] = []
        for conj in ast.disjuncts:
            combo = _match_conjunction(conj, cut, evidence_by_kpi, delta)
            if combo is None:
                continue
            score = min(e.score for _, e in combo)
            best_score = max(best_score, score)
            for item in combo:
                if item not in matched:
                    matched.append(item)
        if matched and best_score > 0:
            raw_windows.append(
                {
                    "start": max(cut - bandwidth, 0),
                    "end": min(cut + bandwidth, project.frame_count() - 1),
                    "cut": cut,
                    "score": best_score,
                    "best_lag": min(abs(e.lag) for _, e in matched),
                    "matched": matched,
                }
            )

    # coalesce overlapping windows
    raw_windows.sort(key=lambda w: w["start"])
    merged: list[dict] = []
    for w in raw_windows:
        if merged and w["start"] <= merged[-1]["end"]:
            last = merged[-1]
            last["end"] = max(last["end"], w["end"])
            last["score"] = max(last["score"], w["score"])
            last["best_lag"] = min(last["best_lag"], w["best_lag"])
            last["cuts"].append(w["cut"])
            for item in w["matched"]:
                if item not in last["matched"]:
                    last["matched"].append(item)
        else:
            w = dict(w, cuts=[w["cut"]])
            merged.append(w)

    # rank: strongest evidence first; ties to the tightest association, then
    # the earlier window
    merged.sort(key=lambda w: (-w["score"], w["best_lag"], w["start"]))

    plot_kpis = kpi_names if ast.select is None else [n for n in kpi_names if n in ast.select]
    windows = []
    for w in merged:
        anchor = w["cuts"][0]
        plot = {
            "metric": _series_segment(
                metric, w["start"] - bandwidth, w["end"] + bandwidth, anchor, bandwidth, ast.metric
            ),
            "kpis": [
                _series_segment(
                    kpi_series[name],
                    w["start"] - bandwidth,
                    w["end"] + bandwidth,
                    _kpi_cut_in_window(w["matched"], name, anchor),
                    bandwidth,
                    name,
                )
                for name in plot_kpis
                if any(n == name for n, _ in w["matched"])
            ],
        }
        windows.append(
            EvidenceWindow(
                start_frame=w["start"],
                end_frame=w["end"],
                matched_atoms=tuple(w["matched"]),
                score=w["score"],
                sample_frames=_evenly_spaced(w["start"], w["end"], config.samples_per_window),
                plot_data=_sanitize(plot),
            )
        )

    summary = _summarize_windows(windows, kpi_names)
    result = QueryResult(
        query=pretty_print(ast),
        windows=tuple(windows),
        summary=summary,
        bandwidth=bandwidth,
        delta=delta,
        alpha=alpha,
        t_thresholds=thresholds,
    )
    if hasattr(project, "write_evidence"):
        project.write_evidence([e.to_json() for e in all_evidence])
    return result


def _kpi_cut_in_window(matched, name, default):
    for n, ev in matched:
        if n == name:
            return ev.kpi_disc.cutpoint
    return default


def _match_conjunction(conj, metric_cut, evidence_by_kpi, delta):
    """Pick per-atom evidence on the given metric cut with pairwise-compatible
    KPI cuts; returns the best-scoring combination or None."""
    candidate_lists = []
    for atom in conj:
        cands = [
            e
            for e in evidence_by_kpi.get(atom.name, [])
            if e.metric_disc.cutpoint == metric_cut and _sign_ok(atom, e)
        ]
        if not cands:
            return None
        cands.sort(key=lambda e: (-e.score, e.kpi_disc.cutpoint))
        candidate_lists.append((atom, cands[:8]))  # cap the search breadth

    best = None
    def walk(i, chosen):
        nonlocal best
        if i == len(candidate_lists):
            score = min(e.score for _, e in chosen)
            key = (score, tuple(-e.kpi_disc.cutpoint for _, e in chosen))
            if best is None or key > best[0]:
                best = (key, list(chosen))
            return
        atom, cands = candidate_lists[i]
        for e in cands:
            if all(abs(e.kpi_disc.cutpoint - pe.kpi_disc.cutpoint) <= delta for _, pe in chosen):
                chosen.append((atom.name, e))
                walk(i + 1, chosen)
                chosen.pop()

    walk(0, [])
    return best[1] if best else None


def _summarize_windows(windows, kpi_names) -> dict:
    per_kpi = {}
    for name in kpi_names:
        taus, scores, hits = [], [], []
        for i, w in enumerate(windows):
            evs = [ev for n, ev in w.matched_atoms if n == name]
            if evs:
                hits.append(i)
                taus.extend(abs(e.kpi_disc.tau) for e in evs)
                scores.extend(e.score for e in evs)
        per_kpi[name] = {
            "windows": len(hits),
            "mean_abs_tau": float(np.mean(taus)) if taus else 0.0,
            "mean_score": float(np.mean(scores)) if scores else 0.0,
            "strongest_window": hits[0] if hits else None,
        }
    return _sanitize({"total_windows": len(windows), "per_kpi": per_kpi})


def summarize(result: QueryResult) -> str:
    """Human-readable report of the evidence windows and per-KPI statistics."""
    lines = [result.query, ""]
    if not result.windows:
        lines.append("No evidence windows found.")
        return "\n".join(lines)
    lines.append(f"{len(result.windows)} evidence window(s):")
    for i, w in enumerate(result.windows):
        kpis = ", ".join(sorted({n for n, _ in w.matched_atoms}))
        lines.append(
            f"  [{i}] frames {w.start_frame}..{w.end_frame}"
            f"  score={w.score:.3g}  kpis={kpis}  samples={list(w.sample_frames)}"
        )
    lines.append("")
    lines.append(f"{'KPI':<24}{'windows':>8}{'mean |tau|':>12}{'mean score':>12}  strongest")
    for name, s in result.summary["per_kpi"].items():
        strongest = s["strongest_window"]
        lines.append(
            f"{name:<24}{s['windows']:>8}{s['mean_abs_tau']:>12.4g}{s['mean_score']:>12.4g}"
            f"  {'-' if strongest is None else f'window {strongest}'}"
        )
    return "\n".join(lines)
