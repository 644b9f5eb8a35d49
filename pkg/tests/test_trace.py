import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slicedvfs.model import SliceTiming
from slicedvfs.policy import classify
from slicedvfs.trace import (
    DEFAULT_OFFCHIP,
    PRESETS,
    OffChipMap,
    PhaseSpec,
    SliceSample,
    Trace,
    TraceError,
    TraceFormatError,
    TraceValidationError,
    emit_trace,
    generate_synthetic,
    load_trace,
    mapi,
    preset,
    profiling_suite,
)


def sample(instr, acc, t_on=0.05, t_off=0.05):
    return SliceSample(instr, acc, SliceTiming(t_on, t_off))


samples = st.builds(
    lambda instr, frac, t_on, t_off: sample(instr, int(instr * frac), t_on, t_off),
    st.integers(1, 10**12),
    st.floats(0, 0.2),
    st.floats(0, 1e3, allow_subnormal=True),
    st.floats(1e-9, 1e3),
)
traces = st.builds(
    lambda s, ts: Trace(tuple(s), ts),
    st.lists(samples, min_size=1, max_size=30),
    st.floats(1e-6, 10.0),
)


class TestMapi:
    def test_ratio(self):
        assert mapi(sample(1_000_000, 2_000)) == 0.002

    def test_zero_accesses(self):
        assert mapi(sample(10**6, 0)) == 0.0

    def test_high_intensity_hits_lowest_band(self, table):
        m = mapi(sample(10**6, 50_000))
        assert m == 0.05
        assert classify(table, m).frequency == 1_200_000_000

    def test_zero_instructions_rejected(self):
        with pytest.raises(TraceError):
            mapi(SliceSample(0, 0, SliceTiming(0.1, 0.0)))

    def test_accesses_without_instructions_rejected(self):
        with pytest.raises(TraceError):
            SliceSample(0, 5, SliceTiming(0.1, 0.0))

    @given(st.integers(1, 10**9), st.integers(0, 10**9), st.integers(1, 1000))
    def test_scale_invariant(self, instr, acc, k):
        assert mapi(sample(instr * k, acc * k)) == mapi(sample(instr, acc))


GOOD_CSV = (
    "slice_index,instructions,memory_accesses,t_on_seconds,t_off_seconds\n"
    "0,100000000,200000,0.09,0.01\n"
    "1,100000000,1500000,0.06,0.04\n"
)


class TestLoad:
    def test_minimal_csv(self):
        t = load_trace(GOOD_CSV.encode())
        assert len(t) == 2
        assert t.timeslice_nominal == 0.1
        assert t[1].memory_accesses == 1_500_000

    def test_negative_accesses_names_slice(self):
        text = GOOD_CSV.replace("1,100000000,1500000", "1,100000000,-3")
        with pytest.raises(TraceValidationError) as err:
            load_trace(text)
        assert err.value.slice_index == 1

    def test_negative_t_on_names_slice(self):
        text = GOOD_CSV.replace("0.09,0.01", "-0.09,0.01")
        with pytest.raises(TraceValidationError) as err:
            load_trace(text)
        assert err.value.slice_index == 0

    def test_malformed_field_names_line_and_column(self):
        text = GOOD_CSV.replace("0.06,0.04", "abc,0.04")
        with pytest.raises(TraceFormatError) as err:
            load_trace(text)
        assert err.value.line == 3
        assert err.value.column == "t_on_seconds"
        assert "line 3" in str(err.value)

    def test_wrong_field_count(self):
        with pytest.raises(TraceFormatError) as err:
            load_trace(GOOD_CSV + "2,100,1\n")
        assert err.value.line == 4

    def test_header_is_mandatory(self):
        with pytest.raises(TraceFormatError) as err:
            load_trace(GOOD_CSV.split("\n", 1)[1])
        assert err.value.line == 1

    def test_empty_trace_rejected(self):
        with pytest.raises(TraceFormatError):
            load_trace(GOOD_CSV.split("\n", 1)[0] + "\n")

    def test_out_of_sequence_index(self):
        with pytest.raises(TraceFormatError):
            load_trace(GOOD_CSV.replace("\n1,", "\n5,"))

    def test_json_syntax_error_position(self):
        with pytest.raises(TraceFormatError) as err:
            load_trace('{"slices": [\n  {]}', "json")
        assert err.value.line == 2

    def test_json_validation_names_slice(self):
        doc = json.loads(emit_trace(load_trace(GOOD_CSV), "json"))
        doc["slices"][1]["t_off_seconds"] = -1.0
        with pytest.raises(TraceValidationError) as err:
            load_trace(json.dumps(doc), "json")
        assert err.value.slice_index == 1

    def test_unknown_format(self):
        with pytest.raises(TraceError):
            load_trace(GOOD_CSV, "parquet")


class TestRoundTrip:
    @settings(max_examples=200)
    @given(traces, st.sampled_from(["csv", "json"]))
    def test_load_emit_identity(self, t, fmt):
        assert load_trace(emit_trace(t, fmt), fmt) == t

    @given(traces)
    def test_formats_agree(self, t):
        assert load_trace(emit_trace(t, "json"), "json") == load_trace(emit_trace(t, "csv"), "csv")

    def test_noncanonical_input_reserializes_canonically(self):
        messy = (
            "# timeslice_nominal=0.100\n"
            "slice_index , instructions,memory_accesses,t_on_seconds,t_off_seconds\n"
            "0,100000000,200000,9.0e-2,0.0100\n"
            "\n"
            "1,100000000,1500000,.06,4E-2\n"
        )
        once = emit_trace(load_trace(messy))
        assert emit_trace(load_trace(once)) == once
        assert once.decode().splitlines()[2] == "0,100000000,200000,0.09,0.01"

    def test_emit_is_deterministic(self):
        t = generate_synthetic(preset("mg"), 3)
        assert emit_trace(t) == emit_trace(generate_synthetic(preset("mg"), 3))


class TestOffChipMap:
    def test_default_knots(self):
        assert DEFAULT_OFFCHIP(0.0) == 0.0
        assert DEFAULT_OFFCHIP(0.004) == 0.67
        assert DEFAULT_OFFCHIP(0.01) == 0.94
        assert DEFAULT_OFFCHIP(0.04) == 0.97
        assert DEFAULT_OFFCHIP(0.5) == 1.0

    def test_affine(self):
        m = OffChipMap.affine(12.5)
        assert m(0.04) == pytest.approx(0.5)
        assert m(0.08) == 1.0 and m(0.3) == 1.0

    @given(st.floats(0, 0.2), st.floats(0, 0.2))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert DEFAULT_OFFCHIP(lo) <= DEFAULT_OFFCHIP(hi)

    def test_rejects_decreasing_knots(self):
        with pytest.raises(TraceError):
            OffChipMap(((0.0, 0.0), (0.01, 0.5), (0.02, 0.4)))


class TestGenerate:
    def test_zero_jitter_is_exact(self):
        t = generate_synthetic([PhaseSpec(10, 0.02, 0.0)], seed=0)
        assert len(t) == 10
        assert all(mapi(s) == 0.02 for s in t)

    @given(st.floats(0, 0.08), st.floats(0, 0.02), st.integers(0, 2**32 - 1))
    @settings(max_examples=50)
    def test_within_jitter(self, mean, jitter, seed):
        n = 10**7
        lo, hi = max(mean - jitter, 0.0), mean + jitter
        # brute force: does any integer count land inside the window?
        representable = any(lo <= c / n <= hi for c in range(int(lo * n) - 2, int(hi * n) + 3) if c >= 0)
        if not representable:
            with pytest.raises(TraceError, match="no integer access count"):
                generate_synthetic([PhaseSpec(20, mean, jitter, instructions=n)], seed)
            return
        t = generate_synthetic([PhaseSpec(20, mean, jitter, instructions=n)], seed)
        assert all(lo <= mapi(s) <= hi for s in t)

    def test_same_seed_same_trace(self):
        spec = [PhaseSpec(30, 0.01, 0.005), PhaseSpec(10, 0.002, 0.001)]
        assert generate_synthetic(spec, 42) == generate_synthetic(spec, 42)
        assert generate_synthetic(spec, 42) != generate_synthetic(spec, 43)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30)
    def test_off_fraction_monotone_in_mapi(self, seed):
        t = generate_synthetic([PhaseSpec(40, 0.02, 0.02), PhaseSpec(40, 0.06, 0.05)], seed)
        pairs = sorted((mapi(s), s.timing.off_fraction) for s in t)
        fractions = [f for _, f in pairs]
        assert all(a <= b for a, b in zip(fractions, fractions[1:]))

    def test_slices_last_one_timeslice_at_fmax(self):
        t = generate_synthetic(preset("ft"), 0, timeslice=0.25)
        assert t.timeslice_nominal == 0.25
        assert all(s.timing.t_on + s.timing.t_off == pytest.approx(0.25, rel=1e-15) for s in t)

    @pytest.mark.parametrize("bad", [
        [],
        [PhaseSpec(5, 0.01, 0.0)][:0],
    ])
    def test_rejects_empty_spec(self, bad):
        with pytest.raises(TraceError):
            generate_synthetic(bad, 0)

    def test_rejects_negative_jitter_and_mean(self):
        with pytest.raises(TraceError):
            PhaseSpec(5, 0.01, -0.001)
        with pytest.raises(TraceError):
            PhaseSpec(5, -0.01, 0.0)


class TestPresets:
    def test_unknown(self):
        with pytest.raises(TraceError):
            preset("bt")

    @pytest.mark.parametrize("seed", range(5))
    def test_cg_is_memory_bound(self, seed):
        t = generate_synthetic(preset("cg"), seed)
        m = t.mapis()
        assert t.aggregate_mapi() > 0.01
        assert np.mean(m > 0.01) > 0.8
        # never compute bound and never in the top band
        assert m.min() > 0.004 and m.max() <= 0.04

    @pytest.mark.parametrize("name", ["ft", "mg", "sp"])
    @pytest.mark.parametrize("seed", range(3))
    def test_mixed_presets_cross_band_boundaries(self, table, name, seed):
        t = generate_synthetic(preset(name), seed)
        classes = {classify(table, m) for m in t.mapis()}
        assert len(classes) >= 2

    @pytest.mark.parametrize("name", ["ft", "mg", "sp"])
    def test_less_memory_intensive_than_cg(self, name):
        assert generate_synthetic(preset(name), 0).aggregate_mapi() < generate_synthetic(preset("cg"), 0).aggregate_mapi()

    def test_sp_deterministic(self):
        assert emit_trace(generate_synthetic(preset("sp"), 9)) == emit_trace(generate_synthetic(preset("sp"), 9))

    def test_preset_list_is_a_copy(self):
        preset("cg").clear()
        assert preset("cg") == PRESETS["cg"]

    def test_profiling_suite_covers_range(self):
        suite = profiling_suite(0)
        ladder = suite[0].mapis()
        assert ladder.min() < 0.0005 and ladder.max() >= 0.1
        assert len(suite) == 1 + len(PRESETS)
