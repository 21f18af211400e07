"""C4.5-family classification tree for two classes.

Gain-ratio splitting, fractional routing of missing values, pessimistic
error pruning, Laplace-smoothed leaf probabilities and optional boosting by
weighted resampling. Features are numeric unless declared categorical
(integer codes); missing values are NaN.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import beta

FORMAT = "listingdedup-tree/1"


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class TreeParams:
    min_leaf: float = 5.0
    max_depth: int = 12
    prune: bool = True
    confidence: float = 0.25
    boosting_trials: int = 1
    seed: int = 0
    threshold_penalty: bool = True


@dataclass
class Node:
    counts: np.ndarray  # weighted (negatives, positives)
    feature: int = -1
    threshold: float = math.nan
    left_levels: frozenset = frozenset()
    fractions: tuple = (0.5, 0.5)
    children: list = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def probability(self) -> float:
        n0, n1 = self.counts
        return (n1 + 1.0) / (n0 + n1 + 2.0)

    def leaves(self):
        if self.is_leaf:
            yield self
        else:
            for child in self.children:
                yield from child.leaves()

    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + max(c.depth() for c in self.children)


def _entropy(c0, c1):
    """Entropy (bits) of weighted class counts; vectorised."""
    c0 = np.asarray(c0, dtype=float)
    c1 = np.asarray(c1, dtype=float)
    n = c0 + c1
    with np.errstate(divide="ignore", invalid="ignore"):
        p0 = np.where(n > 0, c0 / n, 0.0)
        p1 = np.where(n > 0, c1 / n, 0.0)
        h = -(np.where(p0 > 0, p0 * np.log2(p0), 0.0) + np.where(p1 > 0, p1 * np.log2(p1), 0.0))
    return h


def _split_info(parts):
    total = sum(parts)
    out = 0.0
    for w in parts:
        if w > 0:
            p = w / total
            out -= p * math.log2(p)
    return out


class _Grower:
    def __init__(self, X, y, w, categorical, params):
        self.X, self.y, self.w = X, y, w
        self.categorical = categorical
        self.params = params

    def best_numeric(self, x, y, w, total):
        known = ~np.isnan(x)
        xk, yk, wk = x[known], y[known], w[known]
        wknown = wk.sum()
        if wknown < 2 * self.params.min_leaf:
            return None
        order = np.argsort(xk, kind="mergesort")
        xs, ys, ws = xk[order], yk[order], wk[order]
        c1 = np.cumsum(ws * ys)
        c0 = np.cumsum(ws * (1 - ys))
        t1, t0 = c1[-1], c0[-1]
        # candidate cut after position i where the value changes
        cut = np.nonzero(xs[1:] > xs[:-1])[0]
        if len(cut) == 0:
            return None
        wl = c0[cut] + c1[cut]
        wr = wknown - wl
        ok = (wl >= self.params.min_leaf) & (wr >= self.params.min_leaf)
        if not ok.any():
            return None
        base = _entropy(t0, t1)
        cond = (wl * _entropy(c0[cut], c1[cut]) + wr * _entropy(t0 - c0[cut], t1 - c1[cut])) / wknown
        gain = np.where(ok, base - cond, -np.inf)
        i = int(np.argmax(gain))
        g = (wknown / total) * gain[i]
        if self.params.threshold_penalty:
            g -= math.log2(max(len(cut), 1)) / total
        if g <= 0:
            return None
        parts = [wl[i], wr[i], total - wknown]
        si = _split_info(parts)
        if si <= 0:
            return None
        thr = 0.5 * (xs[cut[i]] + xs[cut[i] + 1])
        return g, g / si, thr, frozenset(), wl[i] / wknown

    def best_categorical(self, x, y, w, total):
        known = ~np.isnan(x)
        xk, yk, wk = x[known], y[known], w[known]
        wknown = wk.sum()
        if wknown < 2 * self.params.min_leaf:
            return None
        levels = np.unique(xk)
        if len(levels) < 2:
            return None
        pos = np.array([np.sum(wk[(xk == v)] * yk[xk == v]) for v in levels])
        tot = np.array([np.sum(wk[xk == v]) for v in levels])
        # ordering levels by positive rate gives the optimal binary partition
        order = np.argsort(pos / tot, kind="mergesort")
        levels, pos, tot = levels[order], pos[order], tot[order]
        c1, cw = np.cumsum(pos)[:-1], np.cumsum(tot)[:-1]
        c0 = cw - c1
        t1, t0 = pos.sum(), tot.sum() - pos.sum()
        wl, wr = cw, wknown - cw
        ok = (wl >= self.params.min_leaf) & (wr >= self.params.min_leaf)
        if not ok.any():
            return None
        cond = (wl * _entropy(c0, c1) + wr * _entropy(t0 - c0, t1 - c1)) / wknown
        gain = np.where(ok, _entropy(t0, t1) - cond, -np.inf)
        i = int(np.argmax(gain))
        g = (wknown / total) * gain[i]
        if g <= 0:
            return None
        si = _split_info([wl[i], wr[i], total - wknown])
        if si <= 0:
            return None
        return g, g / si, math.nan, frozenset(float(v) for v in levels[: i + 1]), wl[i] / wknown

    def grow(self, idx, w, depth):
        y = self.y[idx]
        counts = np.array([np.sum(w * (1 - y)), np.sum(w * y)])
        node = Node(counts)
        total = counts.sum()
        if depth >= self.params.max_depth or total < 2 * self.params.min_leaf or counts.min() <= 0:
            return node
        found = []
        for f in range(self.X.shape[1]):
            x = self.X[idx, f]
            finder = self.best_categorical if f in self.categorical else self.best_numeric
            res = finder(x, y, w, total)
            if res is not None:
                found.append((f, res))
        if not found:
            return node
        mean_gain = np.mean([r[0] for _, r in found])
        admissible = [(f, r) for f, r in found if r[0] >= mean_gain - 1e-12]
        f, (g, ratio, thr, levels, frac_left) = max(admissible, key=lambda fr: (fr[1][1], -fr[0]))
        x = self.X[idx, f]
        missing = np.isnan(x)
        goes_left = np.isin(x, list(levels)) if f in self.categorical else x <= thr
        left_known = goes_left & ~missing
        right_known = ~goes_left & ~missing
        node.feature, node.threshold, node.left_levels = f, thr, levels
        node.fractions = (float(frac_left), float(1.0 - frac_left))
        li = np.concatenate([idx[left_known], idx[missing]])
        lw = np.concatenate([w[left_known], w[missing] * frac_left])
        ri = np.concatenate([idx[right_known], idx[missing]])
        rw = np.concatenate([w[right_known], w[missing] * (1.0 - frac_left)])
        node.children = [self.grow(li, lw, depth + 1), self.grow(ri, rw, depth + 1)]
        return node


def _upper_error(e, n, cf):
    """Upper confidence limit on the error rate (C4.5's pessimistic estimate)."""
    if n <= 0:
        return 0.0
    e = min(max(e, 0.0), n)
    if e >= n:
        return 1.0
    return float(beta.ppf(1.0 - cf, e + 1.0, n - e))


def _prune(node: Node, cf: float) -> float:
    """Bottom-up subtree replacement; returns the node's estimated errors."""
    n = node.counts.sum()
    leaf_err = n * _upper_error(node.counts.min(), n, cf)
    if node.is_leaf:
        return leaf_err
    sub_err = sum(_prune(c, cf) for c in node.children)
    if leaf_err <= sub_err + 0.1:
        node.children = []
        node.feature = -1
        return leaf_err
    return sub_err


def _route(node: Node, X, rows, weights, out, categorical):
    if node.is_leaf:
        np.add.at(out, rows, weights * node.probability)
        return
    x = X[rows, node.feature]
    missing = np.isnan(x)
    if node.feature in categorical:
        left = np.isin(x, list(node.left_levels))
    else:
        left = x <= node.threshold
    lk, rk = left & ~missing, ~left & ~missing
    fl, fr = node.fractions
    lrows = np.concatenate([rows[lk], rows[missing]])
    lw = np.concatenate([weights[lk], weights[missing] * fl])
    rrows = np.concatenate([rows[rk], rows[missing]])
    rw = np.concatenate([weights[rk], weights[missing] * fr])
    if len(lrows):
        _route(node.children[0], X, lrows, lw, out, categorical)
    if len(rrows):
        _route(node.children[1], X, rrows, rw, out, categorical)


def _node_to_dict(node: Node, names):
    d = {"counts": [float(c) for c in node.counts]}
    if not node.is_leaf:
        d["feature"] = names[node.feature]
        if node.left_levels:
            d["left_levels"] = sorted(node.left_levels)
        else:
            d["threshold"] = float(node.threshold)
        d["fractions"] = list(node.fractions)
        d["children"] = [_node_to_dict(c, names) for c in node.children]
    return d


def _node_from_dict(d, index):
    node = Node(np.array(d["counts"], dtype=float))
    if "children" in d:
        node.feature = index[d["feature"]]
        node.threshold = d.get("threshold", math.nan)
        node.left_levels = frozenset(d.get("left_levels", ()))
        node.fractions = tuple(d["fractions"])
        node.children = [_node_from_dict(c, index) for c in d["children"]]
    return node


class DecisionTree:
    """A trained tree, or a boosted ensemble of trees (``len(roots) > 1``)."""

    def __init__(self, feature_names, roots, alphas=None, categorical=(), params=TreeParams()):
        self.feature_names = list(feature_names)
        self.roots = list(roots)
        self.alphas = [1.0] * len(self.roots) if alphas is None else list(alphas)
        self.categorical = frozenset(categorical)
        self.params = params

    @property
    def root(self) -> Node:
        return self.roots[0]

    @classmethod
    def fit(cls, X, y, feature_names=None, params=TreeParams(), weights=None, categorical=()):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y).astype(np.int64)
        if X.ndim != 2 or len(X) == 0:
            raise TrainingError("empty training sample")
        if len(X) < 2:
            raise TrainingError("need at least 2 samples")
        if not np.isin(y, (0, 1)).all():
            raise TrainingError("labels must be 0/1")
        if y.min() == y.max():
            raise TrainingError("training sample has a single class")
        names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(X.shape[1])]
        cat = frozenset(names.index(c) if isinstance(c, str) else int(c) for c in categorical)
        w = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=float)

        def one_tree(idx, ww):
            root = _Grower(X, y, ww, cat, params).grow(idx, ww, 0)
            if params.prune:
                _prune(root, params.confidence)
            return root

        if params.boosting_trials <= 1:
            return cls(names, [one_tree(np.arange(len(y)), w)], None, cat, params)

        rng = np.random.default_rng(params.seed)
        n = len(y)
        dist = w / w.sum()
        roots, alphas = [], []
        for _ in range(params.boosting_trials):
            idx = np.sort(rng.choice(n, size=n, replace=True, p=dist))
            if y[idx].min() == y[idx].max():
                break
            root = one_tree(idx, np.ones(n))
            tmp = cls(names, [root], None, cat, params)
            miss = (tmp.predict_proba(X) > 0.5).astype(int) != y
            err = float(np.sum(dist * miss))
            if err >= 0.5:
                break
            alpha = math.log((1 - err) / err) if err > 0 else 10.0
            roots.append(root)
            alphas.append(alpha)
            if err == 0:
                break
            dist = dist * np.exp(alpha * miss)
            dist /= dist.sum()
        if not roots:
            return cls(names, [one_tree(np.arange(n), w)], None, cat, params)
        return cls(names, roots, alphas, cat, params)

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.feature_names):
            raise ValueError(f"expected {len(self.feature_names)} features, got {X.shape[1]}")
        total = np.zeros(len(X))
        rows = np.arange(len(X))
        for root, alpha in zip(self.roots, self.alphas):
            out = np.zeros(len(X))
            _route(root, X, rows, np.ones(len(X)), out, self.categorical)
            total += alpha * out
        return total / sum(self.alphas)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "features": self.feature_names,
            "categorical": sorted(self.feature_names[i] for i in self.categorical),
            "params": asdict(self.params),
            "trees": [
                {"alpha": a, "root": _node_to_dict(r, self.feature_names)}
                for r, a in zip(self.roots, self.alphas)
            ],
        }

    @classmethod
    def from_dict(cls, d) -> "DecisionTree":
        if d.get("format") != FORMAT:
            raise ValueError(f"not a {FORMAT} document")
        names = d["features"]
        index = {n: i for i, n in enumerate(names)}
        roots = [_node_from_dict(t["root"], index) for t in d["trees"]]
        alphas = [t["alpha"] for t in d["trees"]]
        cat = [index[c] for c in d.get("categorical", ())]
        return cls(names, roots, alphas, cat, TreeParams(**d.get("params", {})))

    def n_leaves(self) -> int:
        return sum(1 for r in self.roots for _ in r.leaves())
