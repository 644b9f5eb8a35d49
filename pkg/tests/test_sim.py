import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slicedvfs.model import PState, Processor, SliceTiming, default_processor, power
from slicedvfs.policy import Schedule, default_table, governor, oracle_policy, static_policy
from slicedvfs.sim import (
    Comparison,
    RunReport,
    SimError,
    compare,
    load_report,
    run,
    summary_csv,
    summary_row,
    trace_fingerprint,
)
from slicedvfs.trace import SliceSample, Trace, generate_synthetic, preset


def random_trace(rng, k):
    return Trace(tuple(
        SliceSample(10**6, int(rng.integers(0, 60_000)), SliceTiming(rng.uniform(0, 0.1), rng.uniform(1e-3, 0.1)))
        for _ in range(k)
    ))


class TestRun:
    def test_static_fmax_total_time(self, proc):
        t = generate_synthetic(preset("sp"), 0)
        r = run(t, static_policy(t, proc.f_max), proc)
        assert r.total_time == math.fsum(s.timing.t_on + s.timing.t_off for s in t)
        assert r.transitions == 0

    def test_identical_slices_identical_records(self, proc):
        s = SliceSample(10**6, 100, SliceTiming(0.03, 0.02))
        r = run(Trace((s, s)), [proc.pstate(1_600_000_000)] * 2, proc)
        assert r.per_slice[0] == r.per_slice[1]

    def test_length_mismatch(self, proc):
        t = generate_synthetic(preset("sp"), 0)
        with pytest.raises(SimError):
            run(t, [proc.f_max] * (len(t) - 1), proc)

    def test_foreign_pstate(self, proc):
        t = Trace((SliceSample(10, 0, SliceTiming(1, 0)),))
        with pytest.raises(SimError):
            run(t, [PState(2_000_000_000, 1.0)], proc)

    def test_governor_saves_energy_on_cg(self, proc, table):
        t = generate_synthetic(preset("cg"), 0)
        ref = run(t, static_policy(t, proc.f_max), proc)
        gov = run(t, governor(t, table, 3, proc), proc)
        assert compare(gov, ref).energy_savings > 0

    def test_transition_latency_accounting(self):
        base = default_processor()
        proc = default_processor(transition_latency=1e-3)
        s = SliceSample(10**6, 0, SliceTiming(0.05, 0.05))
        t = Trace((s, s, s))
        sched = [proc.f_max, proc.f_min, proc.f_min]
        with_lat = run(t, sched, proc)
        without = run(t, sched, base)
        assert with_lat.transitions == 1
        assert with_lat.total_time == pytest.approx(without.total_time + 1e-3, rel=1e-14)
        assert with_lat.total_energy == pytest.approx(without.total_energy + 1e-3 * power(proc, proc.f_min), rel=1e-14)

    def test_transitions_counted_without_latency(self, proc):
        s = SliceSample(10**6, 0, SliceTiming(0.05, 0.05))
        r = run(Trace((s,) * 4), [proc.f_max, proc.f_min, proc.f_max, proc.f_max], proc)
        assert r.transitions == 2 and r.transition_time == 0.0

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**6), st.integers(1, 200))
    def test_conservation(self, seed, k):
        proc = default_processor()
        rng = np.random.default_rng(seed)
        t = random_trace(rng, k)
        sched = [proc.pstates[i] for i in rng.integers(0, 4, k)]
        r = run(t, sched, proc)
        parts_t = math.fsum(x.duration for x in r.per_slice)
        parts_e = math.fsum(x.energy for x in r.per_slice)
        assert abs(r.total_time - parts_t) <= 1e-12 * parts_t
        assert abs(r.total_energy - parts_e) <= 1e-12 * parts_e
        assert r.total_time > 0 and r.total_energy > 0

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**6))
    def test_lower_frequency_substitution(self, seed):
        proc = Processor(default_processor().pstates, 0.0, 1e-8)
        rng = np.random.default_rng(seed)
        t = random_trace(rng, 6)
        sched = [proc.pstates[i] for i in rng.integers(0, 3, 6)]
        i = int(rng.integers(0, 6))
        lower = list(sched)
        lower[i] = proc.pstates[proc.pstates.index(sched[i]) + 1]
        a, b = run(t, sched, proc).per_slice[i], run(t, lower, proc).per_slice[i]
        assert b.duration >= a.duration
        assert b.energy <= a.energy


class TestCompare:
    def test_identity(self, proc):
        t = generate_synthetic(preset("ft"), 0)
        r = run(t, governor(t, default_table(proc), 3, proc), proc)
        c = compare(r, r)
        assert (c.perf_loss, c.energy_savings) == (0.0, 0.0)
        assert str(c) == "0.00% / 0.00%"

    def test_doubled_time_same_energy(self, proc):
        t = generate_synthetic(preset("ft"), 0)
        ref = run(t, static_policy(t, proc.f_max), proc)
        fake = RunReport(2 * ref.total_time, ref.total_energy, ref.per_slice, 0,
                         ref.trace_fingerprint, ref.processor_fingerprint)
        c = compare(fake, ref)
        assert c.perf_loss == 1.0 and c.energy_savings == 0.0

    def test_fingerprint_mismatch(self, proc):
        a, b = generate_synthetic(preset("ft"), 0), generate_synthetic(preset("ft"), 1)
        with pytest.raises(SimError):
            compare(run(a, static_policy(a, proc.f_max), proc), run(b, static_policy(b, proc.f_max), proc))

    def test_processor_mismatch(self, proc):
        t = generate_synthetic(preset("ft"), 0)
        other = default_processor(transition_latency=1e-4)
        with pytest.raises(SimError):
            compare(run(t, static_policy(t, proc.f_max), proc), run(t, static_policy(t, other.f_max), other))

    @pytest.mark.parametrize("seed", range(20))
    def test_unconstrained_oracle_never_loses_energy(self, proc, seed):
        t = random_trace(np.random.default_rng(seed), 30)
        c = compare(run(t, oracle_policy(t, proc), proc), run(t, static_policy(t, proc.f_max), proc))
        assert c.energy_savings >= 0


class TestSerialization:
    def test_report_json_round_trip(self, tmp_path, proc):
        t = generate_synthetic(preset("mg"), 0)
        r = run(t, governor(t, default_table(proc), 3, proc), proc)
        path = tmp_path / "r.json"
        path.write_text(r.to_json())
        assert load_report(path) == r
        assert json.loads(path.read_text())["policy"] == "governor"

    def test_malformed_report(self, tmp_path):
        path = tmp_path / "r.json"
        path.write_text('{"total_time": 1}')
        with pytest.raises(SimError):
            load_report(path)

    def test_summary_csv(self, proc):
        t = generate_synthetic(preset("mg"), 0)
        ref = run(t, static_policy(t, proc.f_max), proc)
        text = summary_csv([summary_row("mg", ref, compare(ref, ref))])
        header, row = text.strip().split("\n")
        assert header == "trace_id,policy,total_time,total_energy,perf_loss,energy_savings,transitions"
        assert row.startswith("mg,static:2400000000,")
        assert row.endswith(",0.0,0.0,0")

    def test_comparison_json(self):
        assert json.loads(Comparison(0.025, 0.05).to_json()) == {"perf_loss": 0.025, "energy_savings": 0.05}

    def test_fingerprint_stable(self):
        a = generate_synthetic(preset("sp"), 4)
        assert trace_fingerprint(a) == trace_fingerprint(generate_synthetic(preset("sp"), 4))
