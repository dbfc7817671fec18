"""Statistical procedures for the targeting analysis (numpy and the standard library only)."""
from .density import histogram, kde_density, kde_grid, silverman_bandwidth
from .inference import (AnovaTable, TestResult, describe, mann_whitney_u, paired_t_test,
                        shapiro_wilk, two_way_anova, wilcoxon_signed_rank)
from .special import f_sf, regularized_incomplete_beta, t_cdf, t_quantile, t_sf_two_sided

__all__ = [
    "histogram", "kde_density", "kde_grid", "silverman_bandwidth",
    "AnovaTable", "TestResult", "describe", "mann_whitney_u", "paired_t_test",
    "shapiro_wilk", "two_way_anova", "wilcoxon_signed_rank",
    "f_sf", "regularized_incomplete_beta", "t_cdf", "t_quantile", "t_sf_two_sided",
]
