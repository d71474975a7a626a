"""Acceptance checklist: one test per shipped guarantee.

Each test records an `[acceptance] ...: PASS/FAIL` line; conftest echoes the
checklist after the run (pytest captures at the fd level, so plain prints
from passing tests never reach piped logs).
Golden digests pin whole run-log CSVs for the shipped scenarios at their
shipped seeds; runtime budgets are asserted with wide margins (each criterion
currently runs at least an order of magnitude inside its budget).

The sliding-mode settling check is expected to fail and is marked strict
xfail: with the shipped gains the yaw switching term balances the equivalent
control at |e_psi| = eta_psi / (Izz * lambda_psi) ~ 0.39 rad, an attracting
stall the controller cannot leave (see README, "Acceptance suite"). The test
asserts the unmodified requirement so any behavior change is flagged.
"""

from __future__ import annotations

import dataclasses
import functools
import hashlib
import math
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from helm_bench.cli import main
from helm_bench.config import load_scenario
from helm_bench.control import LqrWeights, SmcGains, build_system, care_residual, lqr_gain
from helm_bench.core import BodyState, BoundingBox, Pose2D, UsvParams
from helm_bench.dynamics import SeaState, ThrustPair, step
from helm_bench.metrics import (
    NORM_PRECISION_THRESHOLDS,
    REPORT_COLUMNS,
    SUCCESS_THRESHOLDS,
    evaluate_boxes,
    format_boxes,
    iou,
    norm_precision_at,
    op_at,
    precision_at,
    success_auc,
)
from helm_bench.sensors import TrackerNoiseConfig, emulate_tracker
from helm_bench.sim import (
    LOG_COLUMNS,
    ControllerKind,
    ControllerSpec,
    RunSummary,
    run_scenario,
    summarize,
)

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"
PARAMS = UsvParams()

# sha256 of RunLog.to_csv() for each shipped scenario at its shipped seed,
# with the controller swapped in ("SMC0" = sliding mode, phi = 0; identical
# to the default because this trajectory never enters the boundary layer).
GOLDEN_SHA256 = {
    ("calm_line", "PID"): "98c8306b4af25be836538bcb32b892afeb9fe9051a31b9d97b549a847a5872b4",
    ("calm_line", "SMC"): "acdb56e127b7ddcd33f2ddc8c0f6c2e149fb0332bdbd670292481052f1c4bca8",
    ("calm_line", "SMC0"): "acdb56e127b7ddcd33f2ddc8c0f6c2e149fb0332bdbd670292481052f1c4bca8",
    ("calm_line", "LQR"): "780e513d8c8768b7ba0bcfbeeee7e23d287da32cd68a93464d84a62a177bbe8d",
    ("sea_line", "PID"): "b445c605793e5eb30176f835a10608618f43e75e84ca5c73b86f86edda1c94ff",
    ("sea_line", "SMC"): "08dd33740cd989b0e21195e99127db2f9fd7a4a057dc35253c06be147dd52798",
    ("sea_line", "LQR"): "6e0e45baf864d9fdac02c0ce946d49bc1da354f96b8f57d3063964cc5a9cc58d",
    ("sea_triangle", "PID"): "7af3edfda0346ef4a75ea176ce9dc9ce99941c40e3edbdfac45d53ce4eb1a2b1",
    ("sea_triangle", "SMC"): "afde1b8d69838edcf11df99441090a7bc945f0fdbb207d97472f293e8c7919f3",
    ("sea_triangle", "LQR"): "c64f6b7124175be52ae324021cee7abf30190b228036d3a8c84158636eca8053",
}


CHECKLIST: list[str] = []  # echoed after the run by conftest.pytest_terminal_summary


def _report(name: str, passed: bool, note: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    if note:
        status += f" ({note})"
    line = f"[acceptance] {name}: {status}"
    CHECKLIST.append(line)
    print(line, file=sys.__stderr__)


@contextmanager
def _criterion(name: str):
    """Print the checklist line for `name` whichever way the body exits."""
    try:
        yield
    except BaseException:
        _report(name, False, "assertion failed")
        raise
    _report(name, True)


@functools.lru_cache(maxsize=None)
def _scenario_run(scenario: str, kind: str) -> tuple[str, RunSummary]:
    """Run a shipped scenario with the controller swapped; cache per kind."""
    base = load_scenario(str(SCENARIOS / f"{scenario}.ini"))
    if kind == "SMC0":
        spec = ControllerSpec(kind=ControllerKind.SMC, smc=SmcGains(phi=0.0))
    else:
        spec = ControllerSpec(kind=ControllerKind[kind])
    log = run_scenario(dataclasses.replace(base, controller=spec))
    digest = hashlib.sha256(log.to_csv().encode()).hexdigest()
    return digest, summarize(log, base.cost)


def test_criterion_1_riccati_solver_properties():
    """Residual, symmetry, definiteness, stability, and the exact scalar gain."""
    with _criterion("criterion 1 — Riccati solver properties (100 random weight pairs)"):
        t0 = time.perf_counter()
        A, B = build_system(PARAMS)
        rng = np.random.default_rng(20260816)
        for _ in range(100):
            q_u = rng.uniform(0.1, 50.0)
            m2 = rng.uniform(-3.0, 3.0, size=(2, 2))
            Q = np.zeros((3, 3))
            Q[0, 0] = q_u
            Q[1:, 1:] = m2.T @ m2 + 1e-3 * np.eye(2)
            R = np.diag(rng.uniform(0.01, 5.0, size=2))
            gain = lqr_gain(PARAMS, LqrWeights(Q=Q, R=R))
            assert care_residual(A, B, Q, R, gain.P) < 1e-9
            assert np.array_equal(gain.P, gain.P.T)
            assert np.linalg.eigvalsh(gain.P).min() >= -1e-9
            assert np.linalg.eigvals(A - B @ gain.K).real.max() < -1e-6
            # decoupled surge channel collapses to K_u = sqrt(Q_u / R_1)
            assert abs(gain.K[0, 0] - math.sqrt(q_u / R[0, 0])) < 1e-12
        unit = lqr_gain(PARAMS, LqrWeights(Q=np.eye(3), R=np.eye(2)))
        assert abs(unit.K[0, 0] - 1.0) < 1e-12
        elapsed = time.perf_counter() - t0
        assert elapsed < 1.0, f"criterion 1 took {elapsed:.2f}s"


def test_criterion_2_dynamics_oracles():
    """RK4 against closed forms: coasting circle and constant-thrust ramp."""
    with _criterion("criterion 2 — dynamics closed-form oracles (circle + thrust ramp)"):
        t0 = time.perf_counter()
        calm = SeaState()
        dt = 0.02

        # zero thrust, u = 1, r = 0.5: circle of radius u/|r| about (0, u/r)
        state = BodyState(Pose2D(0.0, 0.0, 0.0), u=1.0, r=0.5)
        radius = state.u / abs(state.r)
        center = (0.0, radius)
        t = 0.0
        for _ in range(math.ceil(2.0 * math.pi / abs(state.r) / dt)):
            state = step(state, ThrustPair(), calm, t, dt, PARAMS)
            t += dt
            dev = abs(math.hypot(state.pose.x - center[0], state.pose.y - center[1]) - radius)
            assert dev < 1e-6 * radius

        # both thrusters at 10 N from rest: u(t) = (T_L + T_R) / m * t
        state = BodyState()
        t = 0.0
        for _ in range(50):
            state = step(state, ThrustPair(10.0, 10.0), calm, t, dt, PARAMS)
            t += dt
        assert abs(state.u - 20.0 / PARAMS.m * 1.0) < 1e-6

        elapsed = time.perf_counter() - t0
        assert elapsed < 1.0, f"criterion 2 took {elapsed:.2f}s"


def test_criterion_3_metric_oracles(tmp_path):
    """Counting-loop recomputation of every metric, exactly, plus evaluate on pred == gt."""
    with _criterion("criterion 3 — metric brute-force equivalence (1000 sequences)"):
        t0 = time.perf_counter()
        rng = np.random.default_rng(31337)
        for _ in range(1000):
            n = int(rng.integers(1, 41))
            ious = rng.uniform(0.0, 1.0, size=n)
            curve, auc = success_auc(ious)
            want = [100.0 * (sum(1 for v in ious if v >= tau) / n) for tau in SUCCESS_THRESHOLDS]
            assert np.array_equal(curve, np.array(want))
            assert auc == float(np.mean(np.array(want)))
            for tau in (0.5, 0.75):
                assert op_at(ious, tau) == 100.0 * (sum(1 for v in ious if v >= tau) / n)

            errs = rng.uniform(0.0, 60.0, size=n)
            errs[rng.uniform(size=n) < 0.1] = math.inf
            assert precision_at(errs) == 100.0 * (sum(1 for e in errs if e <= 20.0) / n)

            nb = int(rng.integers(1, 21))
            gt: list[BoundingBox | None] = []
            pred: list[BoundingBox | None] = []
            for _ in range(nb):
                gx, gy = rng.uniform(0, 300, size=2)
                gw, gh = rng.uniform(5, 80, size=2)
                gt.append(BoundingBox(gx, gy, gw, gh))
                if rng.uniform() < 0.15:
                    pred.append(None)
                else:
                    pred.append(BoundingBox(gx + rng.normal(0, 10), gy + rng.normal(0, 10),
                                            gw * rng.uniform(0.8, 1.2), gh))
            value, npc = norm_precision_at(gt, pred)
            brute = []
            for g, p in zip(gt, pred):
                if p is None:
                    brute.append(math.inf)
                    continue
                gcx, gcy = g.center()
                pcx, pcy = p.center()
                brute.append(math.hypot((pcx - gcx) / g.w, (pcy - gcy) / g.h))
            assert value == 100.0 * (sum(1 for e in brute if e <= 0.2) / nb)
            assert np.array_equal(
                npc,
                np.array([100.0 * (sum(1 for e in brute if e <= tau) / nb)
                          for tau in NORM_PRECISION_THRESHOLDS]),
            )

        # overlap 1x1 on a 2x2-vs-2x2 offset pair: count unit grid cells
        a, b = BoundingBox(0, 0, 2, 2), BoundingBox(1, 1, 2, 2)

        def covered(box: BoundingBox, i: int, j: int) -> bool:
            return box.x <= i and i + 1 <= box.x + box.w and box.y <= j and j + 1 <= box.y + box.h

        cells = [(i, j) for i in range(-2, 5) for j in range(-2, 5)]
        inter = sum(1 for i, j in cells if covered(a, i, j) and covered(b, i, j))
        union = sum(1 for i, j in cells if covered(a, i, j) or covered(b, i, j))
        assert (inter, union) == (1, 7)
        assert abs(iou(a, b) - inter / union) < 1e-12

        # the full evaluate pipeline on predictions identical to ground truth
        boxes = [BoundingBox(3.0 * k, 2.0 * k, 24.0, 18.0) for k in range(30)]
        for name in ("alpha", "beta"):
            for d in ("gt", "pred"):
                path = tmp_path / d / f"{name}.txt"
                path.parent.mkdir(exist_ok=True)
                path.write_text(format_boxes(boxes))
        report = tmp_path / "report.csv"
        assert main(["evaluate", "--gt", str(tmp_path / "gt"), "--pred",
                     str(tmp_path / "pred"), "--out", str(report)]) == 0
        lines = report.read_text().splitlines()
        assert [ln.split(",")[0] for ln in lines[1:]] == ["alpha", "beta", "mean"]
        for ln in lines[1:]:
            assert ln.split(",")[1:6] == ["100.0000"] * 5

        elapsed = time.perf_counter() - t0
        assert elapsed < 10.0, f"criterion 3 took {elapsed:.2f}s"


def test_criterion_4_calm_controller_ordering():
    """Calm-water step response: overshoot and smoothness ordering, pinned CSVs."""
    with _criterion("criterion 4 — calm-water controller ordering + golden checksums"):
        t0 = time.perf_counter()
        runs = {kind: _scenario_run("calm_line", kind) for kind in ("PID", "SMC", "SMC0", "LQR")}
        for kind, (digest, _) in runs.items():
            assert digest == GOLDEN_SHA256[("calm_line", kind)], f"calm_line/{kind} drifted"

        pid, smc0, lqr = runs["PID"][1], runs["SMC0"][1], runs["LQR"][1]
        assert pid.overshoot_pct > lqr.overshoot_pct
        assert lqr.tv_total < pid.tv_total
        assert lqr.tv_total < smc0.tv_total
        assert pid.settling_time <= 15.0
        assert lqr.settling_time <= 15.0  # sliding mode: see test_criterion_4c

        elapsed = time.perf_counter() - t0
        assert elapsed < 30.0, f"criterion 4 took {elapsed:.2f}s"


@pytest.mark.xfail(
    strict=True,
    reason="sliding-mode yaw channel stalls where the switching term balances the "
    "equivalent control: |e_psi| -> eta_psi/(Izz*lambda_psi) ~ 0.39 rad with the "
    "shipped gains, so the 0.05 rad band is never reached",
)
def test_criterion_4c_smc_settling():
    """The unmodified settling requirement for the sliding-mode controller."""
    summary = _scenario_run("calm_line", "SMC")[1]
    settled = summary.settling_time <= 15.0
    _report(
        "criterion 4c — sliding-mode settles within 15 s",
        settled,
        "" if settled else "documented: yaw error stalls near 0.39 rad with shipped gains",
    )
    assert settled, f"sliding-mode settling_time = {summary.settling_time}"


def test_criterion_5_disturbance_robustness():
    """Waves + wind: the regulator holds heading best and at the lowest cost."""
    with _criterion("criterion 5 — rough-sea robustness ordering + golden checksums"):
        t0 = time.perf_counter()
        for scenario in ("sea_line", "sea_triangle"):
            runs = {kind: _scenario_run(scenario, kind) for kind in ("PID", "SMC", "LQR")}
            for kind, (digest, _) in runs.items():
                assert digest == GOLDEN_SHA256[(scenario, kind)], f"{scenario}/{kind} drifted"
            pid, smc, lqr = runs["PID"][1], runs["SMC"][1], runs["LQR"][1]
            assert lqr.rms_e_psi_ss <= pid.rms_e_psi_ss
            assert lqr.rms_e_psi_ss <= smc.rms_e_psi_ss
            assert lqr.cost < pid.cost
            assert lqr.cost < smc.cost

        elapsed = time.perf_counter() - t0
        assert elapsed < 60.0, f"criterion 5 took {elapsed:.2f}s"


def test_criterion_6_tracker_degradation():
    """Template tracker vs haze, plus the emulator's dropout closed form."""
    with _criterion("criterion 6 — tracker degradation (AUC, track loss, dropout rate)"):
        t0 = time.perf_counter()
        base = load_scenario(str(SCENARIOS / "ncc_standoff.ini"))
        assert base.sea.visibility == 1.0

        log = run_scenario(base)
        report = evaluate_boxes(log.gt_boxes(), log.pred_boxes())
        assert report.auc >= 95.0

        hazy = dataclasses.replace(base, sea=dataclasses.replace(base.sea, visibility=0.1))
        log_hazy = run_scenario(hazy)
        lost_fraction = 1.0 - float(np.mean(log_hazy.det_valid))
        assert lost_fraction >= 0.5

        # dropout probability 1 - (1 - p_drop_base) * visibility = 0.52 here
        noise = TrackerNoiseConfig(p_drop_base=0.2)
        box = BoundingBox(100.0, 100.0, 40.0, 40.0)
        rng = np.random.default_rng(2026)
        drops = sum(
            1 for _ in range(10_000) if not emulate_tracker(box, 0.6, noise, rng).valid
        )
        assert abs(drops / 10_000 - 0.52) <= 0.01

        elapsed = time.perf_counter() - t0
        assert elapsed < 60.0, f"criterion 6 took {elapsed:.2f}s"


def test_criterion_7_determinism(tmp_path, monkeypatch):
    """Bit-identical reruns, and sweeps invariant to the worker-thread count."""
    with _criterion("criterion 7 — end-to-end determinism (reruns + thread count)"):
        scenario = str(SCENARIOS / "sea_line.ini")
        for d in ("a", "b"):
            assert main(["simulate", "--scenario", scenario,
                         "--out", str(tmp_path / d)]) == 0
        for name in ("runlog.csv", "groundtruth.txt", "predictions.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

        outs = {}
        for threads in ("1", "4"):
            monkeypatch.setenv("HELM_BENCH_THREADS", threads)
            out = tmp_path / f"sweep_{threads}.csv"
            assert main(["sweep", "--scenario", scenario, "--axis", "sea.visibility",
                         "--values", "0.4,0.7,1.0", "--out", str(out)]) == 0
            outs[threads] = out.read_bytes()
        assert outs["1"] == outs["4"]


def test_criterion_8_report_pipeline_shape(tmp_path):
    """The evaluation report's columns and row layout, and the documented scope."""
    with _criterion("criterion 8 — evaluation report shape + documented scope"):
        assert REPORT_COLUMNS == (
            "sequence", "auc", "op50", "op75", "precision", "norm_precision", "n_frames",
        )

        # an imperfect tracker still fills every documented column and curve
        gt = [BoundingBox(10.0 * k, 5.0 * k, 30.0, 30.0) for k in range(20)]
        pred = [BoundingBox(b.x + 4.0, b.y - 3.0, b.w, b.h) for b in gt]
        (tmp_path / "gt").mkdir()
        (tmp_path / "pred").mkdir()
        (tmp_path / "gt" / "seq.txt").write_text(format_boxes(gt))
        (tmp_path / "pred" / "seq.txt").write_text(format_boxes(pred))
        report = tmp_path / "report.csv"
        assert main(["evaluate", "--gt", str(tmp_path / "gt"), "--pred", str(tmp_path / "pred"),
                     "--out", str(report), "--curves"]) == 0
        curves = report.with_name("report_curves.csv")
        lines = report.read_text().splitlines()
        assert lines[0] == ",".join(REPORT_COLUMNS)
        assert [ln.split(",")[0] for ln in lines[1:]] == ["seq", "mean"]
        assert all(len(ln.split(",")) == len(REPORT_COLUMNS) for ln in lines[1:])
        curve_lines = curves.read_text().splitlines()
        assert curve_lines[0] == "sequence,curve,threshold,value"
        per_row = 101 + 51 + 51  # success, precision, normalized-precision points
        assert len(curve_lines) == 1 + 2 * per_row

        # the benchmark's absolute tables are declared out of scope up front
        readme = (ROOT / "README.md").read_text()
        assert "Out of scope" in readme
        docs = (ROOT / "docs" / "logformat.md").read_text()
        for column in LOG_COLUMNS:
            assert f"`{column}`" in docs
