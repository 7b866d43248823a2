import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from halfwave.grid import GridSpec
from halfwave.lifespan import (
    CSV_HEADER,
    FitError,
    LifespanRecord,
    SweepConfig,
    export,
    fit_critical,
    fit_power,
    fit_subcritical,
    linear_fit,
    odi_diagnostic,
    read_records_csv,
    records_to_csv,
    run_sweep,
    subcritical_exponent,
)
from halfwave.solver import SimConfig, run

EPS = [0.4, 0.2, 0.1, 0.05, 0.025]


def records(T_of_eps, eps=EPS, n=1, p=2.0, status="blew_up"):
    return [
        LifespanRecord(epsilon=e, T_num=float(T_of_eps(e)), status=status, dt=0.05, N=64, L=8.0,
                       threshold=1e6, drift=0.0, p=p, n=n)
        for e in eps
    ]


def small_sim(**kw):
    base = dict(grid=GridSpec(1, 32.0, 256), p=2.0, epsilon=0.5, dt=0.05, T_max=60.0, confirm=False)
    base.update(kw)
    return SimConfig(**base)


class TestFits:
    def test_critical_round_trip(self):
        fit = fit_critical(records(lambda e: math.exp(3.0 / e)), n=1)
        assert fit.params["C"] == pytest.approx(3.0, abs=1e-6)
        assert fit.params["offset"] == pytest.approx(0.0, abs=1e-6)
        assert fit.r2 == pytest.approx(1.0, abs=1e-12)
        assert fit.details["envelope_holds"]

    def test_critical_round_trip_two_dimensions(self):
        fit = fit_critical(records(lambda e: math.exp(0.5 + 2.0 / math.sqrt(e)), n=2, p=1.5), n=2)
        assert fit.params["C"] == pytest.approx(2.0, abs=1e-6)
        assert fit.params["offset"] == pytest.approx(0.5, abs=1e-6)

    def test_power_round_trip(self):
        fit = fit_power(records(lambda e: 7.0 * e**-2.0))
        assert fit.params["slope"] == pytest.approx(-2.0, abs=1e-6)
        assert math.exp(fit.params["offset"]) == pytest.approx(7.0, rel=1e-6)
        assert fit.r2 == pytest.approx(1.0, abs=1e-12)

    def test_subcritical_round_trip(self):
        fit = fit_subcritical(records(lambda e: e**-1.0, p=1.5), n=1, p=1.5)
        assert fit.details["expected_exponent"] == pytest.approx(-1.0)
        assert fit.details["exponent_error"] < 1e-6

    def test_subcritical_exponents(self):
        assert subcritical_exponent(1, 1.5) == pytest.approx(-1.0)
        assert subcritical_exponent(2, 1.25) == pytest.approx(-0.5)
        with pytest.raises(ValueError):
            fit_subcritical(records(lambda e: 1 / e), n=1, p=2.0)

    @given(st.lists(st.floats(min_value=-0.3, max_value=0.3), min_size=5, max_size=5))
    def test_envelope_always_holds(self, noise):
        recs = records(lambda e: math.exp(1.0 / e + noise[EPS.index(e)]))
        fit = fit_critical(recs, n=1)
        assert fit.details["envelope_holds"]
        assert fit.details["envelope_margin"] >= -1e-12
        assert 0.0 <= fit.details["power_r2"] <= 1.0

    def test_too_few_or_narrow(self):
        with pytest.raises(FitError):
            fit_critical(records(lambda e: 1 / e, eps=[0.4, 0.2, 0.1]), n=1)
        with pytest.raises(FitError):
            fit_critical(records(lambda e: 1 / e, eps=[0.4, 0.3, 0.2, 0.1, 0.05]), n=1)

    def test_unresolved_records_are_ignored(self):
        recs = records(lambda e: math.exp(1 / e)) + records(lambda e: 1.0, eps=[0.3], status="unresolved")
        assert fit_critical(recs, n=1).params["C"] == pytest.approx(1.0, abs=1e-6)

    def test_linear_fit_degenerate(self):
        with pytest.raises(FitError):
            linear_fit([1.0, 1.0], [0.0, 1.0])

    def test_report_is_json(self):
        fit = fit_critical(records(lambda e: math.exp(3.0 / e)), n=1)
        text = json.dumps(fit.to_dict(), sort_keys=True)
        assert json.loads(text)["params"]["C"] == pytest.approx(3.0)


class TestSweep:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            SweepConfig((0.1, 0.2), small_sim())
        with pytest.raises(ValueError):
            SweepConfig((0.2, -0.1), small_sim())
        with pytest.raises(ValueError):
            SweepConfig((0.2,), small_sim(p=1.5), law="critical_exp")
        with pytest.raises(ValueError):
            SweepConfig((0.2,), small_sim(p=2.0), law="subcritical_power")
        with pytest.raises(ValueError):
            SweepConfig((0.2,), small_sim(), law="made_up")
        SweepConfig((0.2,), small_sim(p=1.5), law="subcritical_power")

    def test_empty(self):
        assert run_sweep(SweepConfig((), small_sim())) == []

    def test_duplicates_and_parallel_are_deterministic(self):
        sc = SweepConfig((0.5, 0.5, 0.3), small_sim())
        serial = run_sweep(sc)
        assert serial[0].T_num == serial[1].T_num
        assert serial[2].T_num > serial[0].T_num
        par = run_sweep(SweepConfig((0.5, 0.5, 0.3), small_sim(), parallel_width=2))
        assert [r.T_num for r in par] == [r.T_num for r in serial]


class TestExport:
    def test_empty_is_header_only(self, tmp_path):
        export([], {}, tmp_path)
        assert (tmp_path / "lifespan.csv").read_text() == ",".join(CSV_HEADER) + "\n"

    def test_line_count_and_stability(self, tmp_path):
        recs = records(lambda e: math.exp(1 / e))
        fits = {"critical_exp": fit_critical(recs, n=1)}
        export(recs, fits, tmp_path / "a")
        export(recs, fits, tmp_path / "b")
        text = (tmp_path / "a" / "lifespan.csv").read_text()
        assert len(text.splitlines()) == 6
        for name in ("lifespan.csv", "lifespan_critical_exp.json", "lifespan_epsinv_logT.dat"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_csv_round_trip(self, tmp_path):
        recs = records(lambda e: 1 / e)
        (tmp_path / "r.csv").write_text(records_to_csv(recs))
        assert read_records_csv(tmp_path / "r.csv") == recs

    def test_read_rejects_bad_header(self, tmp_path):
        (tmp_path / "r.csv").write_text("a,b\n")
        with pytest.raises(ValueError):
            read_records_csv(tmp_path / "r.csv")

    def test_write_error_names_path(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(OSError, match="file"):
            export([], {}, blocker)


class TestOdi:
    def test_zero_solution(self):
        tr, _ = run(small_sim(epsilon=0.0, T_max=6.0, snapshot_stride=2))
        odi = odi_diagnostic(tr, R_grid=np.linspace(0.0, 4.0, 9), check_scale_average=False)
        assert np.all(odi.y == 0.0) and np.all(odi.Y == 0.0)
        assert odi.excluded == odi.r.size
        assert odi.fubini_ok

    def test_blowup_run(self):
        tr, res = run(small_sim(epsilon=0.5, snapshot_stride=2))
        assert res.status == "blew_up"
        odi = odi_diagnostic(tr, R_grid=np.expm1(np.linspace(0, math.log(0.9 * (res.T_num - 1) + 1), 24)))
        assert odi.Y[0] == 0.0
        assert np.all(odi.y >= 0.0)
        assert np.all(np.diff(odi.Y) >= 0.0)
        assert math.isfinite(odi.C) and odi.C > 0
        assert odi.fubini_ok
        assert odi.closing_holds
        assert odi.scale_average_within_ceiling

    def test_grid_beyond_horizon_rejected(self):
        tr, _ = run(small_sim(epsilon=0.0, T_max=3.0, snapshot_stride=2))
        with pytest.raises(ValueError):
            odi_diagnostic(tr, R_grid=[0.0, 2.5])
