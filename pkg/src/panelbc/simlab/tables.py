"""Registered simulation tables: designs, estimator sets and text layouts.

Each table id maps to a list of designs (one block per design) and the
estimators run on every replication of that design. :func:`replicate_table`
runs them and :func:`format_table` renders the result with the usual row and
column labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from ..errors import UnknownTable
from .dgp import DgpConfig
from .montecarlo import McSummary, run_monte_carlo

BALANCED_T = (10, 15, 20, 25, 30)
SHORT_LONG = ((300, 100), (150, 150), (60, 180))
PARAM_TITLES = {"y_lag": "Lagged Dependent Variable", "x": "Exogenous Regressor"}
PROPERTY_ESTIMATORS = ("MLE", "ABC1(1)", "ABC1(2)", "SPJ1", "LPM(1)", "LPM(2)")


@dataclass(frozen=True)
class TableSpec:
    """Layout and designs of one table.

    ``layout`` is one of ``bandwidth``, ``jackknife``, ``properties``,
    ``wald`` or ``linear``. ``params`` lists the regressors shown, in order.
    """

    table_id: int
    title: str
    layout: str
    designs: tuple
    estimators: tuple
    params: tuple = ("y_lag", "x")
    groups: tuple = ()

    def design_label(self, cfg: DgpConfig) -> str:
        if cfg.pattern == "balanced":
            return f"N = {cfg.N}; T = {cfg.T}"
        return f"mean N = {cfg.mean_count:g}; mean T = {cfg.mean_span:g}"


def _balanced(ts, kind="dynamic_probit"):
    return tuple(DgpConfig(kind=kind, N=200, T=t) for t in ts)


def _unbalanced(pattern):
    return tuple(DgpConfig(pattern=pattern, N1=a, N2=b, T1=10, T2=30) for a, b in SHORT_LONG)


def _registry() -> dict:
    abc = tuple(f"ABC{k}({L})" for k in range(1, 5) for L in range(1, 5))
    wald_designs = _balanced(BALANCED_T) + _unbalanced("pattern1") + _unbalanced("pattern2")
    groups = (("Balanced", 5), ("Unbalanced 1", 3), ("Unbalanced 2", 3))
    return {
        2: TableSpec(2, "Analytical Bias Corrections and Bandwidth Parameters", "bandwidth",
                     _balanced((10, 20, 30)), abc),
        3: TableSpec(3, "Split-Panel Jackknife Bias Corrections", "jackknife",
                     _balanced(BALANCED_T), ("SPJ1", "SPJ2")),
        4: TableSpec(4, "Finite Sample Properties - Balanced - Lagged Dependent Variable",
                     "properties", _balanced(BALANCED_T), PROPERTY_ESTIMATORS, ("y_lag",)),
        5: TableSpec(5, "Finite Sample Properties - Balanced - Exogenous Regressor",
                     "properties", _balanced(BALANCED_T), PROPERTY_ESTIMATORS, ("x",)),
        6: TableSpec(6, "Properties - Unbalanced 1 - Lagged Dependent Variable",
                     "properties", _unbalanced("pattern1"), PROPERTY_ESTIMATORS, ("y_lag",)),
        7: TableSpec(7, "Properties - Unbalanced 1 - Exogenous Regressor",
                     "properties", _unbalanced("pattern1"), PROPERTY_ESTIMATORS, ("x",)),
        8: TableSpec(8, "Properties - Unbalanced 2", "properties", _unbalanced("pattern2"),
                     PROPERTY_ESTIMATORS, ("y_lag", "x")),
        9: TableSpec(9, "Sizes of different Wald Tests", "wald", wald_designs,
                     ("MLE", "ABC1(1)", "ABC1(2)", "SPJ1"), groups=groups),
        12: TableSpec(12, "Finite Sample Properties - Balanced - Dynamic Linear Model", "linear",
                      _balanced(BALANCED_T, "dynamic_linear"), ("LM", "BC(1)", "BC(2)")),
    }


TABLES = _registry()


def table_spec(table_id) -> TableSpec:
    try:
        return TABLES[int(table_id)]
    except (KeyError, ValueError, TypeError):
        known = ", ".join(str(k) for k in sorted(TABLES))
        raise UnknownTable(f"no table {table_id!r}; known ids: {known}") from None


@dataclass
class TableResult:
    spec: TableSpec
    reps: int
    base_seed: int
    summaries: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "table": self.spec.table_id,
            "title": self.spec.title,
            "reps": self.reps,
            "base_seed": self.base_seed,
            "blocks": [s.to_dict() for s in self.summaries],
        }


def replicate_table(table_id, reps: int, base_seed: int = 1, threads: int = 1,
                    fit_cfg=None, progress=None) -> TableResult:
    """Run every design of a table with ``reps`` replications each.

    Design ``k`` uses seed ``base_seed + k`` so blocks are independent but the
    whole table is reproducible from one number.
    """
    spec = table_spec(table_id)
    out = TableResult(spec, reps, base_seed)
    for k, cfg in enumerate(spec.designs):
        if progress is not None:
            progress(spec, k, cfg)
        out.summaries.append(run_monte_carlo(cfg, spec.estimators, reps, base_seed + k,
                                             threads, fit_cfg))
    return out


# ---------------------------------------------------------------------------
# formatting


def _num(v, digits=0, width=7) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return " " * width
    return f"{v:{width}.{digits}f}"


def _label(est: str) -> str:
    # "ABC1(1)" -> "ABC1 (1)", the label McSummary uses
    return est.replace("(", " (")


def _row(summ: McSummary, est, q, param):
    try:
        return summ.row(_label(est), q, param)
    except KeyError:
        return None


def _grid(header: list, rows: list, first_width: int) -> list:
    lines = [" " * first_width + "".join(header)]
    for name, cells in rows:
        lines.append(f"{name:<{first_width}}" + "".join(cells))
    return lines


def _format_bandwidth(res: TableResult) -> list:
    spec = res.spec
    bws = (1, 2, 3, 4)
    head = [f"{'Coef L=' + str(L):>9}" for L in bws] + [f"{'APE L=' + str(L):>9}" for L in bws]
    lines = []
    for cfg, summ in zip(spec.designs, res.summaries):
        lines += ["", spec.design_label(cfg)]
        for param in spec.params:
            lines.append(PARAM_TITLES[param])
            rows = []
            for k in range(1, 5):
                cells = []
                for q in ("coef", "ape"):
                    for L in bws:
                        r = _row(summ, f"ABC{k}({L})", q, param)
                        cells.append(_num(r.bias if r else None, 2, 9))
                rows.append((f"ABC{k}", cells))
            lines += _grid(head, rows, 8)
    return lines


def _format_jackknife(res: TableResult) -> list:
    spec = res.spec
    head = []
    for q in ("Coef", "APE"):
        for est in ("SPJ1", "SPJ2"):
            head += [f"{q + ' ' + est + ' Bias':>17}", f"{'SD':>7}"]
    lines = []
    for param in spec.params:
        lines += ["", PARAM_TITLES[param]]
        rows = []
        for cfg, summ in zip(spec.designs, res.summaries):
            cells = []
            for q in ("coef", "ape"):
                for est in ("SPJ1", "SPJ2"):
                    r = _row(summ, est, q, param)
                    cells += [_num(r.bias if r else None, 2, 17), _num(r.sd if r else None, 2, 7)]
            rows.append((spec.design_label(cfg), cells))
        lines += _grid(head, rows, 24)
    return lines


_PROP_HEAD = ["Bias", "SD", "RMSE", "SE/SD", "CP .95"]


def _prop_cells(r) -> list:
    if r is None:
        return [" " * 7] * 5
    return [_num(r.bias), _num(r.sd), _num(r.rmse), _num(r.se_sd, 2), _num(r.cp95, 2)]


def _format_properties(res: TableResult) -> list:
    spec = res.spec
    head = [f"{h:>7}" for h in _PROP_HEAD] * 2
    lines = [" " * 10 + f"{'Coefficients':^35}{'Average Partial Effects':^35}"]
    for param in spec.params:
        if len(spec.params) > 1:
            lines += ["", PARAM_TITLES[param]]
        for cfg, summ in zip(spec.designs, res.summaries):
            lines += ["", spec.design_label(cfg)]
            rows = [(_label(est), _prop_cells(_row(summ, est, "coef", param))
                     + _prop_cells(_row(summ, est, "ape", param))) for est in spec.estimators]
            lines += _grid(head, rows, 10)
    return lines


def _format_wald(res: TableResult) -> list:
    spec = res.spec
    head = [f"{_label(e):>10}" for e in spec.estimators]
    lines = []
    k = 0
    for title, count in spec.groups:
        lines += ["", title]
        rows = []
        for cfg, summ in zip(spec.designs[k:k + count], res.summaries[k:k + count]):
            cells = [_num(summ.wald_size.get(_label(e)), 2, 10) for e in spec.estimators]
            rows.append((spec.design_label(cfg), cells))
        lines += _grid(head, rows, 24)
        k += count
    return lines


def _format_linear(res: TableResult) -> list:
    spec = res.spec
    head = [f"{h:>7}" for h in _PROP_HEAD] * 2
    lines = [" " * 10 + f"{'Coefficients (rho)':^35}{'Coefficients (beta)':^35}"]
    for cfg, summ in zip(spec.designs, res.summaries):
        lines += ["", spec.design_label(cfg)]
        rows = [(_label(est), _prop_cells(_row(summ, est, "coef", "y_lag"))
                 + _prop_cells(_row(summ, est, "coef", "x"))) for est in spec.estimators]
        lines += _grid(head, rows, 10)
    return lines


_FORMATTERS = {
    "bandwidth": _format_bandwidth,
    "jackknife": _format_jackknife,
    "properties": _format_properties,
    "wald": _format_wald,
    "linear": _format_linear,
}


def format_table(res: TableResult, note: Optional[str] = None) -> str:
    """Plain-text rendering of a replicated table."""
    lines = [f"Table {res.spec.table_id}: {res.spec.title}"]
    lines += _FORMATTERS[res.spec.layout](res)
    failures = {}
    for s in res.summaries:
        for k, v in s.failures.items():
            failures[k] = failures.get(k, 0) + v
    lines.append("")
    lines.append(note or f"Results based on {res.reps} replications per design; "
                         "biases, SD and RMSE in percent of the truth.")
    if any(failures.values()):
        lines.append("Failed replications: " + ", ".join(f"{k} {v}" for k, v in failures.items() if v))
    return "\n".join(lines) + "\n"
