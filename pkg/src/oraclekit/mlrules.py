"""Decision-tree and decision-rule baselines that emit grammar conditions.

Both learners work on numeric features (the schema variables plus optional
derived features combining them arithmetically) and export their decision
surfaces as conditions: a tree leaf becomes the conjunction of its path
splits, a covering rule is grown greedily one relational term at a time.
Derived-feature thresholds are re-expanded so every exported condition reads
over the base variables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import LabeledSet, Verdict
from .errors import OracleKitError, SchemaError
from .grammar import (
    And,
    Arith,
    Const,
    Expr,
    InputSchema,
    Node,
    Rel,
    Var,
    conjunction,
    evaluate_many,
    parse_expression,
    print_expression,
    validate_condition,
)

TRUE_CONDITION: Node = Rel(Const(0.0), "=")  # satisfied by every input


@dataclass(frozen=True)
class DerivedFeature:
    name: str
    expr: Expr


@dataclass(frozen=True)
class FeatureSpec:
    derived: tuple[DerivedFeature, ...] = ()

    @classmethod
    def from_exprs(cls, schema: InputSchema, items: dict[str, str]) -> "FeatureSpec":
        feats = []
        for name, text in items.items():
            feats.append(DerivedFeature(name, parse_expression(text, schema)))
        return cls(tuple(feats))

    def to_json_dict(self) -> dict:
        return {
            "derived": [
                {"name": f.name, "expr": print_expression(f.expr)} for f in self.derived
            ]
        }

    @classmethod
    def from_json_dict(cls, d: dict, schema: InputSchema) -> "FeatureSpec":
        return cls.from_exprs(schema, {f["name"]: f["expr"] for f in d.get("derived", [])})

    def validate(self, schema: InputSchema) -> None:
        names = [f.name for f in self.derived]
        if len(set(names)) != len(names):
            raise SchemaError("derived feature names must be unique")
        clash = set(names) & set(schema.all_names())
        if clash:
            raise SchemaError(f"derived names shadow schema variables: {sorted(clash)}")


@dataclass(frozen=True)
class LearnedRule:
    condition: Node  # over base schema variables
    verdict: Verdict
    confidence: float


@dataclass(frozen=True)
class RuleModel:
    rules: tuple[LearnedRule, ...]
    schema: InputSchema

    def predict_row(self, values: dict[str, float]) -> Verdict:
        from .grammar import evaluate

        for rule in self.rules:
            if evaluate(rule.condition, values):
                return rule.verdict
        return Verdict.INCONCLUSIVE

    def predict(self, ts: LabeledSet) -> list[Verdict]:
        out = [Verdict.INCONCLUSIVE] * len(ts)
        decided = np.zeros(len(ts), dtype=bool)
        for rule in self.rules:
            mask = evaluate_many(rule.condition, ts.matrix, ts.columns) & ~decided
            for i in np.flatnonzero(mask):
                out[int(i)] = rule.verdict
            decided |= mask
        return out


# ---------------------------------------------------------------------------
# Feature table


@dataclass
class _Features:
    names: list[str]
    exprs: list[Expr]  # expression over base variables, per feature
    table: np.ndarray  # (n_rows, n_features)


def _build_features(ts: LabeledSet, features: FeatureSpec) -> _Features:
    features.validate(ts.schema)
    names = list(ts.schema.all_names())
    exprs: list[Expr] = [Var(n) for n in names]
    cols = [ts.matrix[:, i] for i in range(len(names))]
    for f in features.derived:
        names.append(f.name)
        exprs.append(f.expr)
        cols.append(_eval_expr_column(f.expr, ts))
    return _Features(names, exprs, np.column_stack(cols))


def _eval_expr_column(expr: Expr, ts: LabeledSet) -> np.ndarray:
    columns = ts.columns

    def rec(e: Expr) -> np.ndarray:
        if isinstance(e, Const):
            return np.full(len(ts), e.value)
        if isinstance(e, Var):
            return ts.matrix[:, columns[e.name]]
        left, right = rec(e.left), rec(e.right)
        with np.errstate(all="ignore"):
            if e.op == "+":
                return left + right
            if e.op == "-":
                return left - right
            if e.op == "*":
                return left * right
            return np.divide(left, np.where(right == 0, np.nan, right))

    return rec(expr)


def _threshold_rel(expr: Expr, threshold: float, op: str) -> Rel:
    return Rel(Arith("-", expr, Const(float(threshold))), op)


# ---------------------------------------------------------------------------
# Decision tree (binary CART, Gini impurity)


def _gini(n_pass: int, n_fail: int) -> float:
    n = n_pass + n_fail
    if n == 0:
        return 0.0
    p = n_pass / n
    return 2 * p * (1 - p)


@dataclass
class _Leaf:
    verdict: Verdict
    confidence: float


@dataclass
class _Split:
    feature: int
    threshold: float
    left: object  # feature <= threshold
    right: object


def _best_split(table, is_pass, idx, min_leaf):
    best = None  # (impurity, feature, threshold)
    n = idx.size
    for f in range(table.shape[1]):
        values = table[idx, f]
        order = np.argsort(values, kind="stable")
        sv = values[order]
        sp = is_pass[idx][order]
        distinct = np.flatnonzero(sv[1:] > sv[:-1])
        pass_prefix = np.cumsum(sp)
        for cut in distinct:
            left_n = cut + 1
            right_n = n - left_n
            if left_n < min_leaf or right_n < min_leaf:
                continue
            threshold = (sv[cut] + sv[cut + 1]) / 2
            lp = int(pass_prefix[cut])
            rp = int(pass_prefix[-1]) - lp
            score = (
                left_n * _gini(lp, left_n - lp) + right_n * _gini(rp, right_n - rp)
            ) / n
            if best is None or score < best[0] - 1e-12:
                best = (score, f, threshold)
    return best


def _grow_tree(table, is_pass, idx, depth, params):
    n_pass = int(is_pass[idx].sum())
    n_fail = idx.size - n_pass
    majority = Verdict.PASS if n_pass >= n_fail else Verdict.FAIL
    purity = max(n_pass, n_fail) / idx.size
    if (
        depth >= params["max_depth"]
        or idx.size < params["min_split"]
        or n_pass == 0
        or n_fail == 0
    ):
        return _Leaf(majority, purity)
    best = _best_split(table, is_pass, idx, params["min_leaf"])
    if best is None:
        return _Leaf(majority, purity)
    _, f, threshold = best
    left_idx = idx[table[idx, f] <= threshold]
    right_idx = idx[table[idx, f] > threshold]
    return _Split(
        f,
        threshold,
        _grow_tree(table, is_pass, left_idx, depth + 1, params),
        _grow_tree(table, is_pass, right_idx, depth + 1, params),
    )


def fit_decision_tree(
    ts: LabeledSet,
    features: FeatureSpec = FeatureSpec(),
    params: dict | None = None,
) -> RuleModel:
    """Binary CART; every leaf exports its path conjunction as one rule."""
    if len(ts) == 0:
        raise OracleKitError("empty training set")
    params = {"max_depth": 4, "min_leaf": 1, "min_split": 2, **(params or {})}
    feats = _build_features(ts, features)
    is_pass = np.array([v is Verdict.PASS for v in ts.verdicts])
    root = _grow_tree(feats.table, is_pass, np.arange(len(ts)), 0, params)

    rules: list[LearnedRule] = []

    def export(node, path: list[Rel]):
        if isinstance(node, _Leaf):
            cond = conjunction(path) if path else TRUE_CONDITION
            validate_condition(cond, ts.schema)
            rules.append(LearnedRule(cond, node.verdict, node.confidence))
            return
        expr = feats.exprs[node.feature]
        export(node.left, path + [_threshold_rel(expr, node.threshold, "<=")])
        export(node.right, path + [_threshold_rel(expr, node.threshold, ">")])

    export(root, [])
    return RuleModel(tuple(rules), ts.schema)


# ---------------------------------------------------------------------------
# Decision rules (sequential covering)


def _candidate_rels(feats: _Features, idx: np.ndarray) -> list[tuple[int, float, str]]:
    cands = []
    for f in range(feats.table.shape[1]):
        values = np.unique(feats.table[idx, f])
        thresholds = (values[1:] + values[:-1]) / 2
        for t in thresholds:
            cands.append((f, float(t), "<="))
            cands.append((f, float(t), ">"))
    return cands


def fit_decision_rules(
    ts: LabeledSet,
    features: FeatureSpec = FeatureSpec(),
    params: dict | None = None,
) -> RuleModel:
    """Greedy sequential covering, one conjunction at a time, fail class first.

    A rule grows by the single relational term with the best precision on the
    not-yet-covered rows (ties: higher coverage, then feature order); it is
    kept when it covers at least `min_coverage` rows.
    """
    if len(ts) == 0:
        raise OracleKitError("empty training set")
    params = {"min_coverage": 3, "min_precision": 0.9, "max_terms": 4, **(params or {})}
    feats = _build_features(ts, features)
    is_pass = np.array([v is Verdict.PASS for v in ts.verdicts])

    rules: list[LearnedRule] = []
    for verdict in (Verdict.FAIL, Verdict.PASS):
        target = ~is_pass if verdict is Verdict.FAIL else is_pass
        remaining = np.ones(len(ts), dtype=bool)
        while True:
            idx = np.flatnonzero(remaining)
            if not target[idx].any():
                break
            rule = _grow_rule(feats, target, remaining, params)
            if rule is None:
                break
            terms, covered = rule
            cond = conjunction(
                [_threshold_rel(feats.exprs[f], t, op) for f, t, op in terms]
            )
            validate_condition(cond, ts.schema)
            # confidence is the rule's precision on the full training set
            full_mask = evaluate_many(cond, ts.matrix, ts.columns)
            agree = int((full_mask & target).sum())
            confidence = agree / int(full_mask.sum()) if full_mask.any() else 0.0
            if not (covered & target & remaining).any():
                break  # no progress on the target class
            rules.append(LearnedRule(cond, verdict, confidence))
            remaining &= ~(covered & target)  # drop covered target rows
    return RuleModel(tuple(rules), ts.schema)


def _grow_rule(feats, target, remaining, params):
    covered = remaining.copy()
    terms: list[tuple[int, float, str]] = []
    idx_all = np.flatnonzero(remaining)
    while len(terms) < params["max_terms"]:
        best = None  # (-precision, -coverage, feature, threshold, op, mask)
        for f, t, op in _candidate_rels(feats, idx_all):
            col = feats.table[:, f]
            mask = covered & ((col <= t) if op == "<=" else (col > t))
            n_cov = int(mask.sum())
            if n_cov == 0 or n_cov == int(covered.sum()):
                continue
            precision = int((mask & target).sum()) / n_cov
            key = (-precision, -n_cov, f, t, op)
            if best is None or key < best[0]:
                best = (key, mask)
        if best is None:
            break
        (negp, negcov, f, t, op), mask = best
        terms.append((f, t, op))
        covered = mask
        if -negp >= params["min_precision"]:
            break
    if not terms or int(covered.sum()) < params["min_coverage"]:
        return None
    return terms, covered


# ---------------------------------------------------------------------------
# Hyper-parameter grid search


def grid_tune(fit_fn, ts: LabeledSet, grid: list[dict], features: FeatureSpec = FeatureSpec(),
              n_folds: int = 5, seed: int = 0) -> dict:
    """Pick the grid entry with the best cross-validated accuracy.

    Folds are a seeded permutation dealt round-robin; ties keep the first
    grid entry.
    """
    if not grid:
        raise OracleKitError("empty parameter grid")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ts))
    folds = [order[k::n_folds] for k in range(n_folds)]
    best_params, best_acc = None, -1.0
    for params in grid:
        correct = 0
        for k in range(n_folds):
            test_idx = np.sort(folds[k])
            train_idx = np.sort(np.concatenate([folds[j] for j in range(n_folds) if j != k]))
            if train_idx.size == 0 or test_idx.size == 0:
                continue
            train = LabeledSet(
                ts.schema, ts.matrix[train_idx],
                tuple(ts.verdicts[i] for i in train_idx), ts.name,
            )
            test = LabeledSet(
                ts.schema, ts.matrix[test_idx],
                tuple(ts.verdicts[i] for i in test_idx), ts.name,
            )
            model = fit_fn(train, features, params)
            preds = model.predict(test)
            correct += sum(p is v for p, v in zip(preds, test.verdicts))
        acc = correct / len(ts)
        if acc > best_acc + 1e-12:
            best_params, best_acc = params, acc
    return best_params
