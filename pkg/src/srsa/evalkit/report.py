"""Score tables, win rates and pairwise t-tests rendered as text, CSV and JSON."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Sequence

from srsa.core import METRICS, AgentKind, Strategy
from srsa.evalkit.judge import QuestionJudgement
from srsa.evalkit.stats import (
    InsufficientSamples,
    TTestResult,
    WinRateTable,
    ZeroVarianceBoth,
    mean_ci95,
    welch_t,
    win_rates,
)

SIGNIFICANCE = 0.05
AGENT_GROUPS = tuple(k.value for k in AgentKind)
STRATEGY_GROUPS = tuple(f"SRSA-{s.value}" for s in Strategy)
NOTES = (
    "Scores are the mean of two judging runs per question, so half-points occur.",
    "95% intervals use the Student t quantile with n-1 degrees of freedom and are not clipped to [0, 5].",
    "t-tests are Welch's unequal-variance test on raw per-question scores (two-tailed); "
    "judge scores are bounded, roughly truncated-normal, and no correction is applied for that.",
    "* marks p < 0.05.",
)


def group_names(name: str) -> str:
    """Canonical spelling of an agent or SRSA-strategy group (case-insensitive input)."""
    for group in AGENT_GROUPS + STRATEGY_GROUPS:
        if group.lower() == name.strip().lower():
            return group
    for s in Strategy:
        if s.value.lower() == name.strip().lower():
            return f"SRSA-{s.value}"
    raise ValueError(f"unknown comparison group {name!r}; expected one of {AGENT_GROUPS + STRATEGY_GROUPS}")


def samples(questions: Sequence[QuestionJudgement], group: str, metric: str) -> list[float]:
    if group in STRATEGY_GROUPS:
        strategy = group.split("-", 1)[1]
        return [q.averaged["SRSA"][metric] for q in questions if q.judged and q.srsa_strategy == strategy]
    return [q.averaged[group][metric] for q in questions if q.judged and group in q.averaged]


@dataclass(frozen=True)
class TTestRow:
    group_a: str
    group_b: str
    metric: str
    result: TTestResult | None
    note: str = ""

    @property
    def significant(self) -> bool:
        return self.result is not None and self.result.p_value < SIGNIFICANCE


def pairwise_ttests(questions: Sequence[QuestionJudgement], pairs: Sequence[tuple[str, str]]) -> list[TTestRow]:
    rows = []
    for a, b in pairs:
        for metric in METRICS:
            try:
                result = welch_t(samples(questions, a, metric), samples(questions, b, metric))
                rows.append(TTestRow(a, b, metric, result))
            except (InsufficientSamples, ZeroVarianceBoth) as exc:
                rows.append(TTestRow(a, b, metric, None, str(exc)))
    return rows


def default_pairs(questions: Sequence[QuestionJudgement]) -> list[tuple[str, str]]:
    present = [g for g in AGENT_GROUPS + STRATEGY_GROUPS if samples(questions, g, METRICS[0])]
    agents = [g for g in present if g in AGENT_GROUPS]
    strategies = [g for g in present if g in STRATEGY_GROUPS]
    return list(combinations(agents, 2)) + list(combinations(strategies, 2))


def format_p(p: float) -> str:
    return f"{p:.4f}{'*' if p < SIGNIFICANCE else ''}"


@dataclass
class ReportDocument:
    text: str
    files: dict[str, str] = field(default_factory=dict)

    def write(self, out_dir: str | os.PathLike) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, content in self.files.items():
            (out / name).write_text(content, encoding="utf-8")
        (out / "report.txt").write_text(self.text, encoding="utf-8")
        return out


def _csv(rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def _num(x: float) -> float | None:
    return x if math.isfinite(x) else None


def emit_report(
    questions: Sequence[QuestionJudgement],
    rates: WinRateTable | None,
    tests: Sequence[TTestRow],
    unjudged: int = 0,
    skipped: int = 0,
) -> ReportDocument:
    judged = [q for q in questions if q.judged]
    groups = [g for g in AGENT_GROUPS + STRATEGY_GROUPS if samples(judged, g, METRICS[0])]

    metric_rows: list[list] = [["group", "metric", "n", "mean", "ci95_half_width"]]
    metric_summary: dict[str, dict[str, dict]] = {}
    for g in groups:
        metric_summary[g] = {}
        for m in METRICS:
            values = samples(judged, g, m)
            if len(values) >= 2:
                mean, half = mean_ci95(values)
            else:
                mean, half = values[0], float("nan")
            metric_rows.append([g, m, len(values), f"{mean:.4f}", f"{half:.4f}" if math.isfinite(half) else ""])
            metric_summary[g][m] = {"n": len(values), "mean": mean, "ci95_half_width": _num(half)}

    win_rows: list[list] = [["metric", "agent", "wins", "rate"]]
    if rates is not None:
        for m in METRICS:
            for agent, rate in rates.rates[m].items():
                win_rows.append([m, agent, rates.counts[m][agent], f"{rate:.6f}"])

    test_rows: list[list] = [["group_a", "group_b", "metric", "n_a", "n_b", "t_stat", "p_value", "df", "significant", "note"]]
    for row in tests:
        r = row.result
        if r is None:
            test_rows.append([row.group_a, row.group_b, row.metric, "", "", "", "", "", "", row.note])
        else:
            test_rows.append(
                [row.group_a, row.group_b, row.metric, r.n1, r.n2, f"{r.t_stat:.4f}", f"{r.p_value:.4f}",
                 f"{r.df:.2f}", "yes" if row.significant else "no", row.note]
            )

    summary = {
        "questions_total": len(questions) + skipped,
        "judged": len(judged),
        "unjudged": unjudged,
        "skipped_missing_answers": skipped,
        "metrics": metric_summary,
        "win_rates": rates.rates if rates is not None else None,
        "ttests": [
            {
                "group_a": row.group_a,
                "group_b": row.group_b,
                "metric": row.metric,
                "t_stat": row.result.t_stat if row.result else None,
                "p_value": row.result.p_value if row.result else None,
                "df": row.result.df if row.result else None,
                "significant": row.significant,
                "note": row.note,
            }
            for row in tests
        ],
        "notes": list(NOTES),
    }

    text = _render_text(judged, groups, metric_summary, rates, tests, unjudged, skipped)
    files = {
        "summary.json": json.dumps(summary, indent=2, sort_keys=True) + "\n",
        "metrics.csv": _csv(metric_rows),
        "ttests.csv": _csv(test_rows),
        "winrates.csv": _csv(win_rows),
    }
    return ReportDocument(text, files)


def _render_text(judged, groups, metric_summary, rates, tests, unjudged, skipped) -> str:
    out = [f"Judged questions: {len(judged)}   unjudged: {unjudged}   skipped (missing answers): {skipped}", ""]
    out.append("Mean scores (95% CI half-width)")
    out.append(f"{'group':<16}" + "".join(f"{m.capitalize():>20}" for m in METRICS))
    for g in groups:
        cells = []
        for m in METRICS:
            s = metric_summary[g][m]
            half = s["ci95_half_width"]
            cells.append(f"{s['mean']:.2f} ± {half:.2f}" if half is not None else f"{s['mean']:.2f}")
        out.append(f"{g:<16}" + "".join(f"{c:>20}" for c in cells))
    if rates is not None:
        out += ["", "Win rates (ties credit every top agent; each column sums to 1)"]
        agents = list(rates.rates[METRICS[0]])
        out.append(f"{'agent':<16}" + "".join(f"{m.capitalize():>18}" for m in METRICS))
        for a in agents:
            out.append(f"{a:<16}" + "".join(f"{rates.rates[m][a]:>18.4f}" for m in METRICS))
    pairs = list(dict.fromkeys((r.group_a, r.group_b) for r in tests))
    for a, b in pairs:
        out += ["", f"{a} vs {b}", f"{'Metric':<18}{'t-stat':>10}{'p-value':>12}"]
        for row in (r for r in tests if (r.group_a, r.group_b) == (a, b)):
            if row.result is None:
                out.append(f"{row.metric.capitalize():<18}{'n/a':>10}{'n/a':>12}  ({row.note})")
            else:
                out.append(f"{row.metric.capitalize():<18}{row.result.t_stat:>10.4f}{format_p(row.result.p_value):>12}")
    out += ["", "Notes:"] + [f"- {n}" for n in NOTES]
    return "\n".join(out) + "\n"


def build_report(
    questions: Sequence[QuestionJudgement],
    pairs: Sequence[tuple[str, str]] | None = None,
    unjudged: int | None = None,
    skipped: int = 0,
) -> ReportDocument:
    judged = [q for q in questions if q.judged]
    rates = win_rates([q.averaged for q in judged]) if judged else None
    pairs = [(group_names(a), group_names(b)) for a, b in pairs] if pairs else default_pairs(judged)
    tests = pairwise_ttests(judged, pairs)
    if unjudged is None:
        unjudged = len(questions) - len(judged)
    return emit_report(questions, rates, tests, unjudged, skipped)
