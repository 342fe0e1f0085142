"""Metrics, fold protocols, benchmark runs and ranking reports."""
from .bench import (EvalResult, FoldResult, cross_cohort_eval, derive_seed, lodo_eval, read_results,
                    run_benchmark, task_classes, write_results)
from .metrics import accuracy, confusion_matrix, f1_score, per_class_f1
from .protocols import Fold, loso_folds, split_swap_folds, subsample_regime
from .report import (RankingTable, format_best_model_table, format_cohort_matrix, format_ranking_table,
                     format_results_table, plot_rankings, rank_results)

__all__ = [
    "EvalResult", "FoldResult", "cross_cohort_eval", "derive_seed", "lodo_eval", "read_results",
    "run_benchmark", "task_classes", "write_results", "accuracy", "confusion_matrix", "f1_score",
    "per_class_f1", "Fold", "loso_folds", "split_swap_folds", "subsample_regime", "RankingTable",
    "format_best_model_table", "format_cohort_matrix", "format_ranking_table", "format_results_table",
    "plot_rankings", "rank_results",
]
