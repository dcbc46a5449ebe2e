"""Frozen corpus of published reference values with executable checks.

Each case pairs a computation with the value it should reproduce and a
tolerance.  ``run_all`` evaluates the corpus and renders a text table or
JUnit XML.
"""

from __future__ import annotations

import math
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

from . import nano, usv


class EmptyCorpusError(RuntimeError):
    pass


@dataclass(frozen=True)
class RegressionCase:
    id: str
    operation: str
    inputs: dict
    expected: float
    tolerance: float
    relative: bool
    provenance: str
    compute: Callable[[], float] = field(repr=False, compare=False)

    def check(self, value: float) -> tuple[bool, float]:
        err = abs(value - self.expected)
        if self.relative:
            err /= abs(self.expected)
        return bool(err <= self.tolerance), float(err)


@dataclass(frozen=True)
class CaseResult:
    case: RegressionCase
    value: float
    error: float
    passed: bool
    seconds: float
    message: str = ""


@dataclass(frozen=True)
class RegressionReport:
    results: list

    @property
    def failures(self) -> list:
        return [r for r in self.results if not r.passed]

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_text(self) -> str:
        w = max(len(r.case.id) for r in self.results)
        lines = [f"{'case':<{w}}  {'status':<6}  {'expected':>14}  {'value':>14}  {'error':>10}  tol"]
        for r in self.results:
            kind = "rel" if r.case.relative else "abs"
            lines.append(
                f"{r.case.id:<{w}}  {'PASS' if r.passed else 'FAIL':<6}  {r.case.expected:>14.7g}  "
                f"{r.value:>14.7g}  {r.error:>10.3g}  {r.case.tolerance:g} {kind}"
            )
        lines.append(f"{len(self.results) - len(self.failures)}/{len(self.results)} passed")
        return "\n".join(lines) + "\n"

    def to_junit_xml(self) -> str:
        suite = ET.Element(
            "testsuite",
            name="reference-values",
            tests=str(len(self.results)),
            failures=str(len(self.failures)),
            time=f"{sum(r.seconds for r in self.results):.6f}",
        )
        for r in self.results:
            tc = ET.SubElement(
                suite, "testcase", classname=r.case.operation, name=r.case.id, time=f"{r.seconds:.6f}"
            )
            if not r.passed:
                f = ET.SubElement(tc, "failure", message=r.message or "value outside tolerance")
                f.text = f"expected {r.case.expected!r}, got {r.value!r} (error {r.error:.3g}); {r.case.provenance}"
        return ET.tostring(suite, encoding="unicode")


@lru_cache(maxsize=1)
def _usv_optimum() -> usv.UsvCandidate:
    return usv.optimize()


def _usv_cases() -> list[RegressionCase]:
    opt = lambda: usv.evaluate(100.0, 60.0)
    cases = [
        RegressionCase("usv.cost", "usv.cost", {"u": (100, 60)}, 6.1875, 1e-3, False,
                       "USV case study: minimum cost", lambda: usv.cost(100.0, 60.0)),
        RegressionCase("usv.T_bar", "usv.optimal_horizon", {"u": (100, 60)}, 0.35355, 1e-3, False,
                       "USV case study: optimal horizon", lambda: usv.optimal_horizon(100.0, 60.0)),
        RegressionCase("usv.t_m", "usv.hitting_times", {"u": (100, 60)}, 0.2298, 1e-3, False,
                       "USV case study: contact time", lambda: usv.hitting_times(100.0, 60.0)[0]),
        RegressionCase("usv.eta_m", "usv.boundary_multiplier", {"u": (100, 60)}, 14.1421, 1e-3, False,
                       "USV case study: boundary multiplier", lambda: usv.boundary_multiplier(100.0, 60.0)),
        RegressionCase("usv.post_contact_slope", "usv.synthesize_trajectory", {"u": (100, 60)}, 56.5685, 1e-3,
                       False, "USV case study: common slope after contact",
                       lambda: float(usv.synthesize_trajectory(opt(), k=64).velocities[-1][0])),
    ]
    for i, v in enumerate((-1.75, -1.75, 1.75, 1.75)):
        cases.append(RegressionCase(f"usv.terminal[{i}]", "usv.terminal_state", {"u": (100, 60)}, v, 1e-3, False,
                                    "USV case study: terminal state",
                                    lambda i=i: float(usv.terminal_state(100.0, 60.0)[i])))
    for i, v in enumerate((70.7106, 70.7106, 42.4263, 42.4263)):
        cases.append(RegressionCase(f"usv.control[{i}]", "usv.optimize", {}, v, 1e-3, False,
                                    "USV case study: optimal control vector",
                                    lambda i=i: float(_usv_optimum().control_vector[i])))
    return cases


TABLE1 = {
    1: {"dw1": 145, "dw2": 845, "h6_w1": 0.3267374, "h6_w2": 0.3215246, "h1_w1": -0.0000971,
        "h1_w2": -0.0000030, "h5_w1": -0.3256629, "h5_w2": -0.3256629, "F_w": 1.325e-27, "F_pair": 4.139e-28,
        "D": 197.1320344, "v1": 1.036e13, "v2": 3.154e14, "speed": 3.156e14},
    2: {"dw1": 290, "dw2": 690, "h6_w1": 0.6534748, "h6_w2": 0.6461981, "h1_w1": -0.0001942,
        "h1_w2": -0.0000352, "h5_w1": -0.6787248, "h5_w2": -0.6787248, "F_w": 6.849e-28, "F_pair": 3.311e-27,
        "D": 197.1320344, "v1": 9.064e12, "v2": 3.027e14, "speed": 3.0284e14},
}


def _nano_cases() -> list[RegressionCase]:
    cases = []
    for i, row in TABLE1.items():
        for key, val in row.items():
            cases.append(RegressionCase(
                f"nano.table1.p{i}.{key}", "nano.compute_forces", {"particle": i}, float(val), 1e-3, True,
                f"nanoparticle force table, particle {i}, {key}",
                lambda i=i, key=key: float(getattr(nano.compute_forces()[i - 1], key)),
            ))
    sp = lambda: nano.nano_speeds()
    cases += [
        RegressionCase("nano.t_star_u2[0]", "nano.contact_products", {}, 6.1372e-13, 1e-3, True,
                       "nanoparticle case study: first contact product", lambda: nano.contact_products(*sp())[0]),
        RegressionCase("nano.t_star_u2[1]", "nano.contact_products", {}, 6.7832e-13, 1e-3, True,
                       "nanoparticle case study: second contact product", lambda: nano.contact_products(*sp())[1]),
        RegressionCase("nano.T_bar_u2", "nano.horizon_product", {}, 8.3275e-13, 1e-3, True,
                       "nanoparticle case study: horizon product", lambda: nano.horizon_product(*sp())),
        RegressionCase("nano.ratio.case1", "nano.evaluate_case", {"case": 1}, 1.3569, 1e-3, True,
                       "nanoparticle case study: horizon over contact time, first branch",
                       lambda: nano.evaluate_case(1, nano.REPORTED_U2).ratio),
        RegressionCase("nano.ratio.case2", "nano.evaluate_case", {"case": 2}, 1.2277, 1e-3, True,
                       "nanoparticle case study: horizon over contact time, second branch",
                       lambda: nano.evaluate_case(2, nano.REPORTED_U2).ratio),
        RegressionCase("nano.eta_per_u2", "nano.eta_closed_form", {"u2": 1.0}, 1.1609e14, 1e-3, True,
                       "nanoparticle case study: contact multiplier per unit u2",
                       lambda: nano.eta_closed_form(*sp(), 1.0)),
        RegressionCase("nano.case_order", "nano.evaluate_case", {"u2": nano.REPORTED_U2}, 1.0, 0.0, False,
                       "nanoparticle case study: first branch beats the second (1 = true)",
                       lambda: float(nano.evaluate_case(1, nano.REPORTED_U2).objective
                                     < nano.evaluate_case(2, nano.REPORTED_U2).objective)),
        RegressionCase("nano.cost.case1", "nano.evaluate_case", {"u2": nano.REPORTED_U2}, 28.125, 1e-3, False,
                       "recomputed cost of the first branch (terminal state +-3.75 per axis)",
                       lambda: nano.evaluate_case(1, nano.REPORTED_U2).cost),
    ]
    for i, v in enumerate((5.3126e14, 5.3126e14, 3.9308e14, 3.9308e14)):
        cases.append(RegressionCase(
            f"nano.slope[{i}]", "nano.evaluate_case", {"u2": nano.REPORTED_U2}, v, 1e-3, True,
            "nanoparticle case study: optimal velocity vector",
            lambda i=i: float((nano.evaluate_case(1, nano.REPORTED_U2).pre_slopes[:2]
                               + nano.evaluate_case(1, nano.REPORTED_U2).post_slopes[2:])[i]),
        ))
    return cases


def corpus() -> list[RegressionCase]:
    return _usv_cases() + _nano_cases()


def run_all(cases: list[RegressionCase] | None = None) -> RegressionReport:
    cases = corpus() if cases is None else list(cases)
    if not cases:
        raise EmptyCorpusError("regression corpus is empty")
    results = []
    for case in cases:
        t0 = time.perf_counter()
        try:
            value = float(case.compute())
            passed, err = case.check(value)
            msg = ""
        except Exception as exc:  # a crashing case is a failing case
            value, passed, err, msg = math.nan, False, math.inf, f"{type(exc).__name__}: {exc}"
        results.append(CaseResult(case, value, err, passed, time.perf_counter() - t0, msg))
    return RegressionReport(results)
