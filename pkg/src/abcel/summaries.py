"""Summary statistics and their registry.

A summary maps one dataset to one real value; experiment configs name
summaries by registry spec strings such as "mean", "q3" or
"prop_in(0,15)".  Summaries of stacked (m, n) datasets have a vectorized
batch path used by the posterior evaluator.
"""

from __future__ import annotations

import math

import numpy as np

QUARTILE_PS = (0.25, 0.5, 0.75)


class PeriodogramTooShortError(ValueError):
    """Series too short for a smoothed periodogram (need n >= 8)."""


def type7_quantile(sorted_like: np.ndarray, p: float, axis: int = -1) -> np.ndarray:
    """Linear order-statistic interpolation (type 7) along an axis.

    Uses partial sorting; ~3x faster than np.quantile for the few fixed
    quantiles used as summaries.
    """
    x = np.asarray(sorted_like, dtype=float)
    n = x.shape[axis]
    h = (n - 1) * p
    lo = int(math.floor(h))
    hi = min(lo + 1, n - 1)
    part = np.partition(x, (lo, hi), axis=axis)
    xl = np.take(part, lo, axis=axis)
    xh = np.take(part, hi, axis=axis)
    return xl + (h - lo) * (xh - xl)


class SummaryFn:
    """One summary statistic; deterministic given the dataset."""

    name: str
    output_dim = 1

    def __call__(self, dataset) -> float:
        raise NotImplementedError

    def batch(self, stacked: np.ndarray) -> np.ndarray:
        # fallback: row-by-row
        return np.array([self(row) for row in stacked])


class Mean(SummaryFn):
    name = "mean"

    def __call__(self, x):
        return float(np.mean(x))

    def batch(self, x):
        return x.mean(axis=1)


class MeanSquare(SummaryFn):
    """Raw second moment sum(x^2)/n."""

    name = "mean_square"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return float(np.mean(x * x))

    def batch(self, x):
        return np.einsum("ij,ij->i", x, x) / x.shape[1]


class CentralMoment(SummaryFn):
    def __init__(self, order: int):
        self.order = int(order)
        self.name = f"central{self.order}"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return float(np.mean((x - x.mean()) ** self.order))

    def batch(self, x):
        xc = x - x.mean(axis=1, keepdims=True)
        return (xc**self.order).mean(axis=1)


class Quantile(SummaryFn):
    def __init__(self, p: float, name: str, absolute: bool = False):
        self.p = float(p)
        self.name = name
        self.absolute = absolute

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return math.nan
        if self.absolute:
            x = np.abs(x)
        return float(type7_quantile(x, self.p))

    def batch(self, x):
        if self.absolute:
            x = np.abs(x)
        return type7_quantile(x, self.p, axis=1)


class Maximum(SummaryFn):
    name = "max"

    def __call__(self, x):
        return float(np.max(x))

    def batch(self, x):
        return x.max(axis=1)


class PropInInterval(SummaryFn):
    """Fraction of observations strictly inside (a, b)."""

    def __init__(self, a: float, b: float):
        self.a, self.b = float(a), float(b)
        self.name = f"prop_in({self.a:g},{self.b:g})"

    def __call__(self, x):
        x = np.asarray(x)
        if x.size == 0:
            return math.nan
        return float(np.mean((x > self.a) & (x < self.b)))

    def batch(self, x):
        return ((x > self.a) & (x < self.b)).mean(axis=1)


class PropDiffGreater(SummaryFn):
    """Fraction of successive differences x_j - x_{j-1} strictly above c."""

    def __init__(self, c: float):
        self.c = float(c)
        self.name = f"prop_diff_gt({self.c:g})"

    def __call__(self, x):
        x = np.asarray(x)
        return float(np.mean(np.diff(x) > self.c))

    def batch(self, x):
        return (np.diff(x, axis=1) > self.c).mean(axis=1)


class Lag1Concordance(SummaryFn):
    """Concordant minus discordant fraction of successive centered squares.

    With y_j = x_j^2 - mean(x^2): (1/n) sum_j [1{y_j y_{j-1} >= 0} -
    1{y_j y_{j-1} < 0}].
    """

    name = "lag1_concordance"

    def __call__(self, x):
        return float(self.batch(np.asarray(x, dtype=float)[None, :])[0])

    def batch(self, x):
        y = x * x
        y = y - y.mean(axis=1, keepdims=True)
        prod = y[:, 1:] * y[:, :-1]
        n = x.shape[1]
        return ((prod >= 0).sum(axis=1) - (prod < 0).sum(axis=1)) / n


def smoothed_log_periodogram(x: np.ndarray) -> np.ndarray:
    """Log smoothed periodogram at the positive Fourier frequencies.

    The mean is removed, ordinates are |fft|^2/n for frequencies
    1..floor(n/2), and smoothing uses the 5-point modified Daniell kernel
    (1,2,2,2,1)/8 with reflected ends.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[1]
    if n < 8:
        raise PeriodogramTooShortError(f"need n >= 8, got {n}")
    xc = x - x.mean(axis=1, keepdims=True)
    spec = np.abs(np.fft.rfft(xc, axis=1)[:, 1:]) ** 2 / n
    padded = np.pad(spec, ((0, 0), (2, 2)), mode="reflect")
    smooth = (
        padded[:, :-4]
        + 2.0 * padded[:, 1:-3]
        + 2.0 * padded[:, 2:-2]
        + 2.0 * padded[:, 3:-1]
        + padded[:, 4:]
    ) / 8.0
    return np.log(smooth)


class PeriodogramProp(SummaryFn):
    """Fraction of smoothed-periodogram log-amplitudes inside (a, b)."""

    def __init__(self, a: float, b: float):
        self.a, self.b = float(a), float(b)
        self.name = f"periodogram_prop({self.a:g},{self.b:g})"

    def __call__(self, x):
        return float(self.batch(np.asarray(x, dtype=float)[None, :])[0])

    def batch(self, x):
        lp = smoothed_log_periodogram(x)
        return ((lp > self.a) & (lp < self.b)).mean(axis=1)


class EdgeCount(SummaryFn):
    name = "edge_count"

    def __call__(self, adj):
        return float(np.asarray(adj).sum() / 2.0)

    def batch(self, adj):
        return adj.sum(axis=(1, 2)) / 2.0


class TriangleCount(SummaryFn):
    name = "triangle_count"

    def __call__(self, adj):
        return float(self.batch(np.asarray(adj)[None])[0])

    def batch(self, adj):
        a = adj.astype(np.float32)
        paths2 = np.matmul(a, a)
        return (paths2 * a).sum(axis=(1, 2)).astype(float) / 6.0


class CountOffset(SummaryFn):
    """(len(dataset) - center) / scale; pins dataset size as a summary."""

    def __init__(self, center: float = 112.0, scale: float = 100.0):
        self.center, self.scale = float(center), float(scale)
        self.name = f"count_offset({self.center:g},{self.scale:g})"

    def __call__(self, x):
        return (len(x) - self.center) / self.scale


class PropLeq(SummaryFn):
    def __init__(self, c: float):
        self.c = float(c)
        self.name = f"prop_leq({self.c:g})"

    def __call__(self, x):
        x = np.asarray(x)
        if x.size == 0:
            return math.nan
        return float(np.mean(x <= self.c))

    def batch(self, x):
        return (x <= self.c).mean(axis=1)


class Median(Quantile):
    def __init__(self):
        super().__init__(0.5, "median")


_FIXED = {
    "mean": Mean,
    "mean_square": MeanSquare,
    "median": Median,
    "max": Maximum,
    "lag1_concordance": Lag1Concordance,
    "edge_count": EdgeCount,
    "triangle_count": TriangleCount,
    "central2": lambda: CentralMoment(2),
    "central3": lambda: CentralMoment(3),
    "q1": lambda: Quantile(0.25, "q1"),
    "q3": lambda: Quantile(0.75, "q3"),
    "q1_abs": lambda: Quantile(0.25, "q1_abs", absolute=True),
    "median_abs": lambda: Quantile(0.5, "median_abs", absolute=True),
    "q3_abs": lambda: Quantile(0.75, "q3_abs", absolute=True),
}

_PARAMETRIC = {
    "prop_in": PropInInterval,
    "prop_diff_gt": PropDiffGreater,
    "periodogram_prop": PeriodogramProp,
    "count_offset": CountOffset,
    "prop_leq": PropLeq,
}


def make_summary(spec: str) -> SummaryFn:
    """Resolve a spec string like 'median' or 'prop_in(0,15)'."""
    spec = spec.strip()
    if "(" in spec:
        if not spec.endswith(")"):
            raise ValueError(f"malformed summary spec {spec!r}")
        name, argtext = spec[:-1].split("(", 1)
        name = name.strip()
        if name not in _PARAMETRIC:
            raise KeyError(f"unknown summary {name!r}; available: {sorted(_PARAMETRIC)}")
        args = [float(a) for a in argtext.split(",") if a.strip()]
        return _PARAMETRIC[name](*args)
    if spec not in _FIXED:
        raise KeyError(
            f"unknown summary {spec!r}; available: {sorted(_FIXED) + sorted(_PARAMETRIC)}"
        )
    return _FIXED[spec]()


def make_summaries(specs) -> list[SummaryFn]:
    if isinstance(specs, str):
        specs = [s for s in (t.strip() for t in _split(specs)) if s]
    return [make_summary(s) for s in specs]


def _split(text: str) -> list[str]:
    from .models import split_toplevel

    return split_toplevel(text)


def summarize(summaries, dataset) -> np.ndarray:
    """Summary vector of one dataset."""
    return np.array([f(dataset) for f in summaries], dtype=float)


def summarize_many(summaries, datasets) -> np.ndarray:
    """(m, r) matrix of summaries; vectorized when datasets are stacked."""
    if isinstance(datasets, np.ndarray) and datasets.ndim >= 2:
        return np.column_stack([np.asarray(f.batch(datasets), dtype=float) for f in summaries])
    return np.array([summarize(summaries, d) for d in datasets], dtype=float)
