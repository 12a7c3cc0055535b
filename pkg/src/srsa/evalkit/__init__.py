from srsa.core import JudgeScores
from srsa.evalkit.judge import ExampleBank, QuestionJudgement, judge_question
from srsa.evalkit.report import ReportDocument, build_report, emit_report
from srsa.evalkit.stats import (
    InsufficientSamples,
    TTestResult,
    WinRateTable,
    ZeroVarianceBoth,
    mean_ci95,
    welch_t,
    win_rates,
)

__all__ = [
    "ExampleBank",
    "InsufficientSamples",
    "JudgeScores",
    "QuestionJudgement",
    "ReportDocument",
    "TTestResult",
    "WinRateTable",
    "ZeroVarianceBoth",
    "build_report",
    "emit_report",
    "judge_question",
    "mean_ci95",
    "welch_t",
    "win_rates",
]
