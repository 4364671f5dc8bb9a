"""Built-in utility families and the economy configuration file.

All three families are concave with strictly positive cross effects:

* ``affine``:    u_i(a) = sum_j W_ij a_j
* ``quadratic``: u_i(a) = sum_j W_ij a_j - c_i a_i**2
* ``logagg``:    u_i(a) = alpha_i log(1 + sum_j W_ij a_j) - beta_i a_i

An economy file is a UTF-8 JSON object::

    {
      "n": 2,
      "family": "quadratic",
      "params": {"W": [[0.5, 0.5], [0.5, 0.5]], "c": [0.5, 0.5]},
      "seed": 0
    }

``params`` may be omitted when ``seed`` is given, in which case a random
member of the family is drawn with that seed. Unknown keys are rejected.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

from .economy import UtilityOracle
from .errors import ConfigParseError

FAMILIES = ("affine", "quadratic", "logagg")

_PARAM_KEYS = {
    "affine": {"W"},
    "quadratic": {"W", "c"},
    "logagg": {"W", "alpha", "beta"},
}


def _weights(W, n=None) -> np.ndarray:
    W = np.array(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"W must be a square matrix, got shape {W.shape}")
    if n is not None and W.shape[0] != n:
        raise ValueError(f"W is {W.shape[0]}x{W.shape[0]} but n = {n}")
    if not np.all(np.isfinite(W)) or np.any(W < 0):
        raise ValueError("W entries must be finite and nonnegative")
    off = W[~np.eye(W.shape[0], dtype=bool)]
    if np.any(off <= 0):
        raise ValueError("off-diagonal weights must be strictly positive")
    return W


def _vector(x, n, name) -> np.ndarray:
    x = np.array(x, dtype=float)
    if x.shape != (n,) or not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be a finite vector of length {n}")
    return x


def affine(W) -> UtilityOracle:
    W = _weights(W)
    W.setflags(write=False)

    def func(a):
        return a @ W.T

    def deriv(a, v):
        return W @ v

    return UtilityOracle(
        n=W.shape[0], func=func, derivative=deriv, batched=True,
        family="affine", params={"W": W.tolist()},
    )


def quadratic(W, c) -> UtilityOracle:
    W = _weights(W)
    n = W.shape[0]
    c = _vector(c, n, "c")
    if np.any(c < 0):
        raise ValueError("c must be nonnegative for concavity")
    W.setflags(write=False)
    c.setflags(write=False)

    def func(a):
        return a @ W.T - c * a * a

    def deriv(a, v):
        return W @ v - 2.0 * c * a * v

    return UtilityOracle(
        n=n, func=func, derivative=deriv, batched=True,
        family="quadratic", params={"W": W.tolist(), "c": c.tolist()},
    )


def logagg(W, alpha, beta) -> UtilityOracle:
    W = _weights(W)
    n = W.shape[0]
    alpha = _vector(alpha, n, "alpha")
    beta = _vector(beta, n, "beta")
    if np.any(alpha <= 0):
        raise ValueError("alpha must be strictly positive")
    for arr in (W, alpha, beta):
        arr.setflags(write=False)

    def func(a):
        return alpha * np.log1p(a @ W.T) - beta * a

    def deriv(a, v):
        return alpha * (W @ v) / (1.0 + W @ a) - beta * v

    return UtilityOracle(
        n=n, func=func, derivative=deriv, batched=True,
        family="logagg",
        params={"W": W.tolist(), "alpha": alpha.tolist(), "beta": beta.tolist()},
    )


def symmetric_quadratic(n: int = 2) -> UtilityOracle:
    """u_i(a) = mean(a) - a_i**2 / 2; for n = 2 the core contains (1, 1)."""
    return quadratic(np.full((n, n), 1.0 / n), np.full(n, 0.5))


def lindahl_quadratic(point, rng: np.random.Generator) -> UtilityOracle:
    """Random quadratic economy for which ``point`` has d_a u(a) = 0.

    For u_i = (W a)_i - c_i a_i^2 the derivative along a is
    (W a)_i - 2 c_i a_i^2, so c_i = (W a)_i / (2 a_i^2) zeroes it.
    """
    a = np.asarray(point, dtype=float)
    if np.any(a <= 0) or np.any(a > 1):
        raise ValueError("point must lie in (0, 1]")
    n = a.shape[0]
    W = rng.uniform(0.1, 1.0, (n, n))
    W /= W.sum(axis=1, keepdims=True)
    c = (W @ a) / (2.0 * a * a)
    return quadratic(W, c)


def random_economy(family: str, n: int, seed=None) -> UtilityOracle:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if family == "affine":
        W = rng.uniform(0.1, 1.0, (n, n))
        W[np.diag_indices(n)] = rng.uniform(0.0, 1.0, n)
        W /= W.sum(axis=1, keepdims=True)
        return affine(W)
    if family == "quadratic":
        W = rng.uniform(0.1, 1.0, (n, n))
        W /= W.sum(axis=1, keepdims=True)
        c = rng.uniform(0.3, 1.0, n)
        return quadratic(W, c)
    if family == "logagg":
        W = rng.uniform(0.2, 1.5, (n, n))
        alpha = rng.uniform(0.5, 1.0, n)
        beta = alpha * np.diag(W) * rng.uniform(0.3, 1.2, n) + rng.uniform(0.0, 0.3, n)
        return logagg(W, alpha, beta)
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def build(family: str, params: dict) -> UtilityOracle:
    if family == "affine":
        return affine(params["W"])
    if family == "quadratic":
        return quadratic(params["W"], params["c"])
    if family == "logagg":
        return logagg(params["W"], params["alpha"], params["beta"])
    raise ValueError(f"unknown family {family!r}")


def parse_economy(doc) -> UtilityOracle:
    """Build an oracle from a decoded economy document."""
    if not isinstance(doc, dict):
        raise ConfigParseError("economy document must be a JSON object")
    unknown = set(doc) - {"n", "family", "params", "seed"}
    if unknown:
        raise ConfigParseError(f"unknown fields: {sorted(unknown)}")
    for key in ("n", "family"):
        if key not in doc:
            raise ConfigParseError(f"missing required field {key!r}")
    n, family = doc["n"], doc["family"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ConfigParseError("n must be a positive integer")
    if family not in FAMILIES:
        raise ConfigParseError(f"family must be one of {FAMILIES}, got {family!r}")
    seed = doc.get("seed")
    if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool)):
        raise ConfigParseError("seed must be an integer")

    params = doc.get("params")
    if params is None:
        if seed is None:
            raise ConfigParseError("either params or seed must be given")
        return random_economy(family, n, seed)
    if not isinstance(params, dict):
        raise ConfigParseError("params must be an object")
    expected = _PARAM_KEYS[family]
    if set(params) != expected:
        extra = sorted(set(params) - expected)
        missing = sorted(expected - set(params))
        raise ConfigParseError(f"{family} params: unknown {extra}, missing {missing}")
    try:
        oracle = build(family, params)
    except (ValueError, TypeError) as exc:
        raise ConfigParseError(f"invalid {family} params: {exc}") from exc
    if oracle.n != n:
        raise ConfigParseError(f"params describe {oracle.n} agents but n = {n}")
    return oracle


def load_economy(path) -> UtilityOracle:
    try:
        text = Path(path).read_text(encoding="utf-8")
        doc = json.loads(text)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigParseError(f"cannot read economy file {path}: {exc}") from exc
    return parse_economy(doc)


def economy_document(oracle: UtilityOracle, seed: Optional[int] = None) -> dict:
    if oracle.family not in FAMILIES:
        raise ValueError("only built-in families can be written to an economy file")
    doc = {"n": oracle.n, "family": oracle.family, "params": oracle.params}
    if seed is not None:
        doc["seed"] = seed
    return doc


def save_economy(oracle: UtilityOracle, path, seed: Optional[int] = None) -> None:
    Path(path).write_text(json.dumps(economy_document(oracle, seed), indent=2) + "\n", encoding="utf-8")
