"""Event-driven integration: events, modes, statuses, engine parity."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

import importlib

integrate_mod = importlib.import_module("filippov_lab.integrate")

from filippov_lab.errors import MaxEventsExceeded, NonUniqueEvolutionError, TwoFoldError
from filippov_lab.integrate import IntegratorConfig, integrate
from filippov_lab.systems import AffineField, PiecewiseSystem

# oracle values for the 4d excursion from (0,1,0,0), computed with an
# independent adaptive RK integrator (DOP853, rtol=atol<=1e-13) on the
# sliding field and the left piece, with event localization on the weight
# and on x1
EXIT_T = 9.17969651032452
EXIT_STATE = np.array([0.0, 0.0, -1.4501268313705964, -0.19728405957108963])
RETURN_T = 10.845170376952895
RETURN_STATE = np.array(
    [0.0, 0.610331678767512, -0.600423480016652, -0.08737520210903407]
)

SPIRAL = np.array([[-0.2, 1.0], [-1.0, -0.2]])


def spiral_system():
    # rotation with decay on the left, constant inflow on the right
    return PiecewiseSystem(
        2,
        AffineField(SPIRAL, np.zeros(2)),
        AffineField(np.zeros((2, 2)), np.array([-1.0, 0.0])),
    )


def tight(**kw):
    base = dict(rel_tol=1e-10, abs_tol=1e-12, t_max=30.0, max_events=200)
    base.update(kw)
    return IntegratorConfig(**base)


class TestSmoothFlow:
    def test_contracting_left_flow_converges(self):
        ps = PiecewiseSystem(
            2,
            AffineField(-np.eye(2), np.zeros(2)),
            AffineField(np.zeros((2, 2)), np.array([-1.0, 0.0])),
        )
        tr = integrate(ps, [-1.0, 0.0], IntegratorConfig(t_max=100.0, r_converge=1e-9))
        assert tr.status == "Converged"
        assert len(tr.segments) == 1
        assert tr.segments[0].mode.value == "L"
        # norm decays as e^{-t} along the whole segment
        seg = tr.segments[0]
        norms = np.linalg.norm(seg.states, axis=1)
        np.testing.assert_allclose(norms, np.exp(-seg.times), rtol=1e-6)

    def test_matches_matrix_exponential(self):
        A = np.array([[-1.0, 0.5], [0.0, -1.5]])
        ps = PiecewiseSystem(
            2,
            AffineField(A, np.zeros(2)),
            AffineField(np.zeros((2, 2)), np.array([-1.0, 0.0])),
        )
        x0 = np.array([-2.0, 0.5])
        for t_end in (0.5, 1.0, 2.0):
            tr = integrate(ps, x0, IntegratorConfig(t_max=t_end))
            want = expm(A * t_end) @ x0
            rel = np.linalg.norm(tr.final_state - want) / np.linalg.norm(want)
            assert rel < 1e-6

    def test_spiral_surface_hit(self):
        # closed form: x(t) = e^{-0.2t}(-cos t, sin t) reaches x1=0 at t=pi/2
        tr = integrate(
            spiral_system(), [-1.0, 0.0], tight(), stop_events=("SurfaceHit",)
        )
        hit = tr.events[0]
        assert hit.kind == "SurfaceHit"
        assert hit.time == pytest.approx(math.pi / 2, abs=1e-8)
        assert abs(hit.state[0]) <= 1e-12
        assert hit.state[1] == pytest.approx(math.exp(-0.1 * math.pi), abs=1e-8)

    def test_right_piece_constant_flight(self, reduced_4d):
        tr = integrate(reduced_4d, [1.0, 0.0, 0.0, 0.0], tight())
        assert tr.segments[0].mode.value == "R"
        hit = tr.events[0]
        assert hit.kind == "SurfaceHit"
        assert hit.time == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_allclose(hit.state, [0.0, 0.4, -0.2, -0.04], atol=1e-9)
        # arrival point classifies attracting, so a sliding segment follows
        assert tr.segments[1].mode.value == "S"


@pytest.fixture(scope="module")
def excursion(reduced_4d):
    return integrate(reduced_4d, [0.0, 1.0, 0.0, 0.0], tight(t_max=12.0))


class TestExcursion:

    def test_mode_sequence(self, excursion):
        modes = [s.mode.value for s in excursion.segments[:2]]
        assert modes == ["S", "L"]

    def test_sliding_exit_oracle(self, excursion):
        exit_ev = excursion.events[0]
        assert exit_ev.kind == "SlidingExitLeft"
        assert exit_ev.time == pytest.approx(EXIT_T, abs=1e-6)
        np.testing.assert_allclose(exit_ev.state, EXIT_STATE, atol=1e-6)
        # the exit is where the left normal component x2 reaches zero
        assert abs(exit_ev.state[1]) <= 1e-9

    def test_return_to_surface_oracle(self, excursion):
        ret = excursion.events[1]
        assert ret.kind == "SurfaceHit"
        assert ret.time == pytest.approx(RETURN_T, abs=1e-6)
        np.testing.assert_allclose(ret.state, RETURN_STATE, atol=1e-6)

    def test_initial_sliding_velocity(self, excursion):
        seg = excursion.segments[0]
        d0 = seg.derivs[0]
        np.testing.assert_allclose(d0, [0.0, 0.2, -0.1, -0.02], atol=1e-12)

    def test_segments_chain_continuously(self, excursion):
        for a, b in zip(excursion.segments, excursion.segments[1:]):
            gap = np.linalg.norm(a.states[-1] - b.states[0])
            assert gap < 1e-9 * (1 + np.linalg.norm(a.states[-1]))

    def test_times_strictly_increasing(self, excursion):
        for seg in excursion.segments:
            assert np.all(np.diff(seg.times) > 0)


class TestEventAccuracy:
    def test_surface_hits_on_surface(self, reduced_4d):
        tr = integrate(reduced_4d, [0.0, 1.0, 0.0, 0.0], tight(t_max=20.0))
        hits = [e for e in tr.events if e.kind == "SurfaceHit"]
        assert hits
        for e in hits:
            assert abs(e.state[0]) <= tr.config.event_tol

    def test_mode_correctness(self, reduced_4d):
        tr = integrate(reduced_4d, [0.0, 1.0, 0.0, 0.0], tight(t_max=20.0))
        tol = tr.config.event_tol
        for seg in tr.segments:
            interior = seg.states[1:-1]
            if len(interior) == 0:
                continue
            if seg.mode.value == "L":
                assert np.all(interior[:, 0] < 0)
            elif seg.mode.value == "R":
                assert np.all(interior[:, 0] > 0)
            else:
                assert np.max(np.abs(seg.states[:, 0])) <= 10 * tol


class TestTerminalStatuses:
    def test_converged(self):
        ps = PiecewiseSystem(
            2,
            AffineField(-np.eye(2), np.zeros(2)),
            AffineField(np.zeros((2, 2)), np.array([-1.0, 0.0])),
        )
        tr = integrate(ps, [-0.3, 0.4], IntegratorConfig(t_max=100.0, r_converge=1e-9))
        assert tr.status == "Converged"
        # the radius crossing is localized to within a few percent
        assert np.linalg.norm(tr.final_state) <= 2e-9

    def test_escaped(self):
        ps = PiecewiseSystem(
            2,
            AffineField(np.eye(2), np.zeros(2)),
            AffineField(np.eye(2), np.zeros(2)),
        )
        tr = integrate(ps, [1.0, 1.0], IntegratorConfig(t_max=100.0, r_escape=50.0))
        assert tr.status == "Escaped"
        assert np.linalg.norm(tr.final_state) == pytest.approx(50.0, rel=1e-2)

    def test_horizon_reached_exactly(self):
        ps = spiral_system()
        tr = integrate(ps, [-1.0, 0.0], IntegratorConfig(t_max=0.5))
        assert tr.status == "HorizonReached"
        assert tr.final_time == 0.5

    def test_two_fold_reached(self, c10_reduced):
        # tangent weight is 1 everywhere on x2>0, so the slide is f^R=(0,-1)
        # and x2 hits zero, where both normal components vanish, at t=0.5
        tr = integrate(c10_reduced, [0.0, 0.5], IntegratorConfig(t_max=5.0))
        assert tr.status == "TwoFoldReached"
        assert tr.events[-1].time == pytest.approx(0.5, abs=1e-6)
        assert abs(tr.final_state[1]) <= 1e-9

    def test_repelling_encountered(self):
        z = np.zeros((2, 2))
        rep = PiecewiseSystem(
            2,
            AffineField(z, np.array([-1.0, 1.0])),
            AffineField(z, np.array([1.0, 1.0])),
        )
        tr = integrate(rep, [0.0, 0.5], IntegratorConfig(t_max=5.0))
        assert tr.status == "RepellingEncountered"

    def test_strict_mode_raises_on_repelling(self):
        z = np.zeros((2, 2))
        rep = PiecewiseSystem(
            2,
            AffineField(z, np.array([-1.0, 1.0])),
            AffineField(z, np.array([1.0, 1.0])),
        )
        with pytest.raises(NonUniqueEvolutionError):
            integrate(rep, [0.0, 0.5], IntegratorConfig(t_max=5.0, strict=True))

    def test_strict_mode_raises_on_two_fold(self, c10_reduced):
        with pytest.raises(TwoFoldError):
            integrate(c10_reduced, [0.0, 0.5], IntegratorConfig(t_max=5.0, strict=True))

    def test_max_events_exceeded(self):
        rot = np.array([[0.0, 1.0], [-1.0, 0.0]])
        ps = PiecewiseSystem(
            2, AffineField(rot, np.zeros(2)), AffineField(rot, np.zeros(2))
        )
        with pytest.raises(MaxEventsExceeded):
            integrate(ps, [-1.0, 0.0], IntegratorConfig(t_max=100.0, max_events=3))

    def test_pure_rotation_crossings(self):
        # same smooth field on both sides: the surface is crossed, not slid on
        rot = np.array([[0.0, 1.0], [-1.0, 0.0]])
        ps = PiecewiseSystem(
            2, AffineField(rot, np.zeros(2)), AffineField(rot, np.zeros(2))
        )
        tr = integrate(ps, [-1.0, 0.0], IntegratorConfig(t_max=10.0))
        hits = [e for e in tr.events if e.kind == "SurfaceHit"]
        assert [pytest.approx(h.time, abs=1e-8) for h in hits] == [
            math.pi / 2,
            3 * math.pi / 2,
            5 * math.pi / 2,
        ]


class TestStorageAndDeterminism:
    def test_store_false_keeps_endpoints(self, reduced_4d):
        full = integrate(reduced_4d, [0.0, 1.0, 0.0, 0.0], tight(t_max=12.0))
        lean = integrate(reduced_4d, [0.0, 1.0, 0.0, 0.0], tight(t_max=12.0), store=False)
        assert lean.status == full.status
        assert len(lean.segments) == len(full.segments)
        for a, b in zip(lean.segments, full.segments):
            assert len(a.times) <= 2
            assert np.linalg.norm(a.states[-1] - b.states[-1]) < 1e-9

    def test_bitwise_determinism(self, reduced_4d):
        t1 = integrate(reduced_4d, [0.0, 1.0, 0.0, 0.0], tight(t_max=12.0))
        t2 = integrate(reduced_4d, [0.0, 1.0, 0.0, 0.0], tight(t_max=12.0))
        assert t1.status == t2.status
        assert [e.kind for e in t1.events] == [e.kind for e in t2.events]
        for e1, e2 in zip(t1.events, t2.events):
            assert e1.time == e2.time
            assert np.array_equal(e1.state, e2.state)
        for s1, s2 in zip(t1.segments, t2.segments):
            assert np.array_equal(s1.times, s2.times)
            assert np.array_equal(s1.states, s2.states)

    def test_state_at_endpoint(self, reduced_4d):
        tr = integrate(reduced_4d, [0.0, 1.0, 0.0, 0.0], tight(t_max=12.0))
        np.testing.assert_allclose(
            tr.state_at(tr.final_time), tr.final_state, atol=1e-12
        )

    def test_stop_events_halts_early(self, reduced_4d):
        tr = integrate(
            reduced_4d,
            [0.0, 1.0, 0.0, 0.0],
            tight(t_max=30.0),
            stop_events=("SlidingExitLeft",),
        )
        assert tr.events[-1].kind == "SlidingExitLeft"
        assert len(tr.segments) == 1


class TestEngineParity:
    def test_fast_and_reference_agree(self, reduced_4d, monkeypatch):
        cfg = tight(t_max=12.0)
        x0 = [0.0, 1.0, 0.0, 0.0]
        fast = integrate(reduced_4d, x0, cfg)
        assert integrate_mod._engine_fast is not None
        monkeypatch.setattr(integrate_mod, "_engine_fast", None)
        ref = integrate(reduced_4d, x0, cfg)
        assert fast.status == ref.status
        assert len(fast.segments) == len(ref.segments)
        assert [e.kind for e in fast.events] == [e.kind for e in ref.events]
        worst_dt = max(
            abs(a.time - b.time) for a, b in zip(fast.events, ref.events)
        )
        worst_dx = max(
            np.max(np.abs(a.state - b.state))
            for a, b in zip(fast.events, ref.events)
        )
        assert worst_dt < 1e-7
        assert worst_dx < 1e-7

    def test_reference_engine_statuses(self, monkeypatch):
        monkeypatch.setattr(integrate_mod, "_engine_fast", None)
        ps = PiecewiseSystem(
            2,
            AffineField(-np.eye(2), np.zeros(2)),
            AffineField(np.zeros((2, 2)), np.array([-1.0, 0.0])),
        )
        tr = integrate(ps, [-0.3, 0.4], IntegratorConfig(t_max=100.0, r_converge=1e-9))
        assert tr.status == "Converged"
        grow = PiecewiseSystem(
            2, AffineField(np.eye(2), np.zeros(2)), AffineField(np.eye(2), np.zeros(2))
        )
        tr = integrate(grow, [1.0, 1.0], IntegratorConfig(t_max=100.0, r_escape=50.0))
        assert tr.status == "Escaped"

    def test_reference_two_fold_time(self, c10_reduced, monkeypatch):
        monkeypatch.setattr(integrate_mod, "_engine_fast", None)
        tr = integrate(c10_reduced, [0.0, 0.5], IntegratorConfig(t_max=5.0))
        assert tr.status == "TwoFoldReached"
        assert tr.events[-1].time == pytest.approx(0.5, abs=1e-6)
