"""Linear regression with optional ridge penalty, one head per forecast step."""

from __future__ import annotations

from typing import Dict

import numpy as np


def fit_linear(
    X: np.ndarray, Y: np.ndarray, regularization: str = "none", alpha: float = 0.0
) -> Dict[str, np.ndarray]:
    """Closed-form fit on standardized inputs. Y may have multiple columns; each
    gets an independent coefficient vector. The intercept is unpenalized (data
    is centered by the caller, so no intercept term appears here)."""
    n, d = X.shape
    if regularization == "ridge":
        if alpha <= 0:
            raise ValueError("ridge requires alpha > 0")
        gram = X.T @ X + alpha * np.eye(d)
        coef = np.linalg.solve(gram, X.T @ Y)
    elif regularization == "none":
        coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    else:
        raise ValueError(f"unknown regularization {regularization!r}")
    return {"coef": coef}


def predict_linear(params: Dict[str, np.ndarray], X: np.ndarray) -> np.ndarray:
    return X @ params["coef"]
