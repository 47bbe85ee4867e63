"""OLS and VAR estimation with their statistical tests."""

from .diagnostics import (TestResult, acf, adf_test, cointegration_test,
                          durbin_watson, f_test, granger_test, jarque_bera,
                          ljung_box, mackinnon_critical_values)
from .ols import OLSReport, OLSSpec, Term, ensure_full_rank, fit_ols, ols_matrix
from .var import (RobustnessSummary, VARReport, companion_matrix, fevd,
                  fit_var, impulse_response, ma_coefficients, robustness_test,
                  simulate_var)

__all__ = [
    "TestResult", "acf", "adf_test", "cointegration_test", "durbin_watson", "f_test",
    "granger_test", "jarque_bera", "ljung_box", "mackinnon_critical_values",
    "OLSReport", "OLSSpec", "Term", "ensure_full_rank", "fit_ols", "ols_matrix",
    "RobustnessSummary", "VARReport", "companion_matrix", "fevd", "fit_var",
    "impulse_response", "ma_coefficients", "robustness_test", "simulate_var",
]
