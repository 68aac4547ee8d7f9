import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftcarbon.errors import BadHeader, FileUnreadable, MalformedRow, NonMonotoneTimestamps, TraceTooShort, ValueOutOfRange
from ftcarbon.estimator import RunSpec, estimate
from ftcarbon.telemetry import (
    TelemetrySample,
    TelemetryTrace,
    effective_estimate,
    full_usage_estimate,
    parse_trace,
    summarize,
)

HEADER = "t_seconds,cpu_util,gpu_util,gpu_mem_gb,sys_mem_gb\n"


def write(tmp_path, body, header=HEADER, name="trace.csv"):
    p = tmp_path / name
    p.write_text(header + body, encoding="utf-8")
    return p


def trace(*rows, label="t"):
    return TelemetryTrace(tuple(TelemetrySample(*r) for r in rows), label)


def hold_oracle(ts, us):
    """Brute-force left-hold mean: sample the step function on a fine integer grid."""
    total = 0.0
    steps = 0
    for k in range(int(ts[0]), int(ts[-1])):
        i = max(i for i, t in enumerate(ts) if t <= k)
        total += us[i]
        steps += 1
    return total / steps


# -- parsing ----------------------------------------------------------------

def test_minimal_trace(tmp_path):
    tr = parse_trace(write(tmp_path, "0,1,1,10,40\n60,1,1,10,40\n"))
    assert len(tr.samples) == 2
    assert tr.duration_seconds == 60
    assert tr.source_label == "trace.csv"


def test_non_monotone_reports_row(tmp_path):
    with pytest.raises(NonMonotoneTimestamps) as info:
        parse_trace(write(tmp_path, "10,1,1,1,1\n5,1,1,1,1\n"))
    assert info.value.row == 3
    assert "row 3" in str(info.value)


def test_repeated_timestamp_is_non_monotone(tmp_path):
    with pytest.raises(NonMonotoneTimestamps):
        parse_trace(write(tmp_path, "0,1,1,1,1\n0,1,1,1,1\n"))


def test_util_out_of_range(tmp_path):
    with pytest.raises(ValueOutOfRange, match="gpu_util"):
        parse_trace(write(tmp_path, "0,1,1.2,1,1\n10,1,1,1,1\n"))


def test_percent_columns(tmp_path):
    header = "t_seconds,cpu_util%,gpu_util%,gpu_mem_gb,sys_mem_gb\n"
    tr = parse_trace(write(tmp_path, "0,50,100,1,1\n10,25,0,1,1\n", header=header))
    assert tr.samples[0].cpu_util == 0.5 and tr.samples[0].gpu_util == 1.0
    with pytest.raises(ValueOutOfRange):
        parse_trace(write(tmp_path, "0,150,100,1,1\n10,25,0,1,1\n", header=header))


def test_column_order_is_free(tmp_path):
    header = "gpu_util,t_seconds,sys_mem_gb,cpu_util,gpu_mem_gb\n"
    tr = parse_trace(write(tmp_path, "0.5,0,3,0.25,4\n0.5,10,3,0.25,4\n", header=header))
    assert tr.samples[0] == TelemetrySample(0, 0.25, 0.5, 4, 3)


@pytest.mark.parametrize("header", [
    "t_seconds,cpu_util,gpu_util,gpu_mem_gb\n",
    "t_seconds,cpu_util,gpu_util,gpu_mem_gb,sys_mem_gb,extra\n",
    "t_seconds,cpu_util,cpu_util,gpu_mem_gb,sys_mem_gb\n",
    "t_seconds,cpu_util,gpu_util,gpu_mem_gb%,sys_mem_gb\n",
    "",
])
def test_bad_header(tmp_path, header):
    with pytest.raises(BadHeader):
        parse_trace(write(tmp_path, "", header=header))


def test_malformed_rows(tmp_path):
    with pytest.raises(MalformedRow, match="row 2"):
        parse_trace(write(tmp_path, "0,1,1,1\n"))
    with pytest.raises(MalformedRow, match="row 3"):
        parse_trace(write(tmp_path, "0,1,1,1,1\n5,x,1,1,1\n"))


def test_unreadable(tmp_path):
    with pytest.raises(FileUnreadable):
        parse_trace(tmp_path / "nope.csv")


# -- summarize --------------------------------------------------------------

def test_constant_trace():
    s = summarize(trace((0, 1, 1, 0, 0), (60, 1, 1, 0, 0)))
    assert s.u_gpu_eff == 1.0 and s.u_cpu_eff == 1.0
    assert s.duration_hours == pytest.approx(60 / 3600)


def test_square_wave():
    s = summarize(trace((0, 1, 1.0, 5, 10), (30, 1, 0.0, 7, 12), (60, 1, 0.0, 6, 11)))
    assert s.u_gpu_eff == 0.5
    assert (s.peak_gpu_mem_gb, s.peak_sys_mem_gb) == (7, 12)


def test_last_sample_has_no_weight():
    s = summarize(trace((0, 0.2, 0.2, 0, 0), (10, 0.2, 0.2, 0, 0), (20, 1.0, 1.0, 0, 0)))
    assert s.u_cpu_eff == pytest.approx(0.2)


def test_too_short():
    with pytest.raises(TraceTooShort):
        summarize(trace((0, 1, 1, 0, 0)))


def test_hold_oracle_agreement():
    ts = [0, 7, 19, 20, 45, 90]
    us = [0.3, 0.9, 0.1, 0.6, 1.0, 0.0]
    s = summarize(trace(*[(t, u, u, 0, 0) for t, u in zip(ts, us)]))
    assert s.u_cpu_eff == pytest.approx(hold_oracle(ts, us), rel=1e-12)


# -- effective estimate -----------------------------------------------------

def test_constant_trace_equals_t5_golden(rig, iowa):
    eff = effective_estimate(trace((0, 1, 1, 0, 0), (105, 1, 1, 0, 0)), rig, iowa)
    golden = estimate(RunSpec.from_minutes("T5", 1.75), rig, iowa)
    assert eff.energy.total_wh == pytest.approx(golden.energy.total_wh, rel=1e-12)
    assert eff.energy.total_wh == pytest.approx(11.91, rel=0.005)
    assert eff.source_label == "t"


def test_square_wave_halves_gpu(rig, iowa):
    full = effective_estimate(trace((0, 1, 1, 0, 0), (30, 1, 1, 0, 0), (60, 1, 1, 0, 0)), rig, iowa)
    half = effective_estimate(trace((0, 1, 1, 0, 0), (30, 1, 0, 0, 0), (60, 1, 0, 0, 0)), rig, iowa)
    assert half.energy.gpu_wh == pytest.approx(full.energy.gpu_wh / 2, rel=1e-9)
    assert half.energy.cpu_wh == pytest.approx(full.energy.cpu_wh, rel=1e-12)
    assert half.energy.memory_wh == pytest.approx(full.energy.memory_wh, rel=1e-12)


def test_idle_trace_is_memory_only(rig, iowa):
    r = effective_estimate(trace((0, 0, 0, 0, 0), (600, 0, 0, 0, 0)), rig, iowa)
    assert r.energy.cpu_wh == 0 and r.energy.gpu_wh == 0
    assert r.energy.total_wh == pytest.approx(600 / 3600 * 83.5 * 0.3725 * 1.1, rel=1e-12)


# -- properties -------------------------------------------------------------

@st.composite
def traces(draw, min_size=2, max_size=12):
    n = draw(st.integers(min_size, max_size))
    gaps = draw(st.lists(st.integers(1, 600), min_size=n - 1, max_size=n - 1))
    t0 = draw(st.integers(0, 10_000))
    ts = [t0]
    for g in gaps:
        ts.append(ts[-1] + g)
    util = st.floats(0, 1)
    return trace(*[(float(t), draw(util), draw(util), 1.0, 2.0) for t in ts])


@settings(max_examples=100, deadline=None)
@given(traces())
def test_effective_within_sample_range(tr):
    s = summarize(tr)
    cpus = [x.cpu_util for x in tr.samples]
    gpus = [x.gpu_util for x in tr.samples]
    assert min(cpus) <= s.u_cpu_eff <= max(cpus)
    assert min(gpus) <= s.u_gpu_eff <= max(gpus)


@settings(max_examples=100, deadline=None)
@given(traces(), st.integers(1, 10**6))
def test_time_shift_invariance(tr, shift):
    shifted = TelemetryTrace(tuple(TelemetrySample(x.t_seconds + shift, x.cpu_util, x.gpu_util,
                                                   x.gpu_mem_gb, x.sys_mem_gb) for x in tr.samples), "t")
    a, b = summarize(tr), summarize(shifted)
    assert a == b


@settings(max_examples=100, deadline=None)
@given(traces(), st.data())
def test_refinement_invariance(tr, data):
    s = list(tr.samples)
    i = data.draw(st.integers(0, len(s) - 2))
    if s[i + 1].t_seconds - s[i].t_seconds < 2:
        return
    mid = (s[i].t_seconds + s[i + 1].t_seconds) / 2
    s.insert(i + 1, TelemetrySample(mid, s[i].cpu_util, s[i].gpu_util, s[i].gpu_mem_gb, s[i].sys_mem_gb))
    a, b = summarize(tr), summarize(TelemetryTrace(tuple(s), "t"))
    assert b.u_cpu_eff == pytest.approx(a.u_cpu_eff, rel=1e-12, abs=1e-15)
    assert b.u_gpu_eff == pytest.approx(a.u_gpu_eff, rel=1e-12, abs=1e-15)
    assert b.duration_hours == a.duration_hours


@settings(max_examples=100, deadline=None)
@given(traces())
def test_never_exceeds_full_usage(rig, iowa, tr):
    assert (effective_estimate(tr, rig, iowa).grams_co2e_per_epoch
            <= full_usage_estimate(tr, rig, iowa).grams_co2e_per_epoch)
