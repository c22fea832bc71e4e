"""Caption metrics and significance tests."""

from .ngram import bleu, cider, cider_per_n, clipped_counts, lcs_length, ngrams, rouge_l
from .report import METRIC_ORDER, MetricReport, evaluate
from .stats import TTestResult, betainc, student_t_cdf, student_t_sf2, t_test

__all__ = [
    "METRIC_ORDER", "MetricReport", "TTestResult", "betainc", "bleu", "cider", "cider_per_n",
    "clipped_counts", "evaluate", "lcs_length", "ngrams", "rouge_l", "student_t_cdf",
    "student_t_sf2", "t_test",
]
