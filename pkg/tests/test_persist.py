import json
import math

import numpy as np
import pytest

from aniso_cns.functionals import D_ITEMS, E_ITEMS, EnergyReport, TimeSeries
from aniso_cns.persist import (
    SERIES_COLUMNS,
    SeriesWriter,
    TruncatedSeriesWarning,
    load_series,
    load_summary,
    read_series_columns,
    write_series,
    write_summary,
)


def _series(n, seed=0):
    rng = np.random.default_rng(seed)
    ser = TimeSeries(zeta=1 / 34, m=5, eps=0.1)
    for i in range(n):
        E = {k: float(v) for k, v in zip(E_ITEMS, rng.random(len(E_ITEMS)))}
        D = {k: float(v) for k, v in zip(D_ITEMS, rng.random(len(D_ITEMS)))}
        rep = EnergyReport(0.5 * i, 5, 1 / 34, 0.1, E, D, *rng.random(4), wh_inf=rng.random(),
                           d3rho_inf=rng.random())
        ser.append(rep, mass_drift=rng.normal() * 1e-17, res_p3divu=rng.random(),
                   res_p3rho=rng.random(), res_vort=rng.random())
    return ser


class TestSeriesCSV:
    def test_row_count_and_header(self, tmp_path):
        p = write_series(_series(7), tmp_path / "s.csv")
        lines = p.read_text().splitlines()
        assert len(lines) == 8
        assert lines[0].split(",")[:13] == ["t", "E", "D", "E_tan", "D_tan", "E_bar_tan", "D_bar_tan",
                                            "wh_inf", "d3rho_inf", "mass_drift", "res_p3divu",
                                            "res_p3rho", "res_vort"]
        assert tuple(lines[0].split(",")) == SERIES_COLUMNS

    def test_exact_round_trip(self, tmp_path):
        ser = _series(5, seed=3)
        p = write_series(ser, tmp_path / "s.csv")
        back = load_series(p, zeta=1 / 34, m=5, eps=0.1)
        for a, b in zip(ser.rows(), back.rows()):
            for k in SERIES_COLUMNS:
                assert a[k] == b[k], k

    def test_seventeen_digits(self, tmp_path):
        ser = TimeSeries()
        rep = _series(1).reports[0]
        rep.E_items["E_co"] = 1 / 3
        ser.append(rep)
        p = write_series(ser, tmp_path / "s.csv")
        assert "0.33333333333333331" in p.read_text()

    def test_truncated_last_line(self, tmp_path):
        p = write_series(_series(4), tmp_path / "s.csv")
        text = p.read_text()
        p.write_text(text[: text.rstrip("\n").rfind(",") - 3])
        with pytest.warns(TruncatedSeriesWarning, match="truncated"):
            cols = read_series_columns(p)
        assert len(cols["t"]) == 3

    def test_partial_final_line_without_newline(self, tmp_path):
        p = write_series(_series(3), tmp_path / "s.csv")
        text = p.read_text().rstrip("\n")
        p.write_text(text)
        with pytest.warns(TruncatedSeriesWarning):
            assert len(load_series(p)) == 2

    def test_writer_flushes_each_row(self, tmp_path):
        path = tmp_path / "live.csv"
        w = SeriesWriter(path, columns=("t", "E"))
        w.append({"t": 0.0, "E": 1.0})
        assert path.read_text().count("\n") == 2
        w.append({"t": 1.0})
        w.close()
        assert path.read_text().splitlines()[-1] == "1,nan"

    def test_empty_file(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text("")
        with pytest.raises(ValueError):
            read_series_columns(p)


class TestSummary:
    def test_json_safe(self, tmp_path):
        p = write_summary({"a": np.float64(1.5), "b": np.array([1, 2]), "c": math.nan, "d": np.bool_(True),
                           "e": (1, 2)}, str(tmp_path / "s.json"))
        d = load_summary(p)
        assert d == {"a": 1.5, "b": [1, 2], "c": None, "d": True, "e": [1, 2]}
        json.loads((tmp_path / "s.json").read_text())

    def test_atomic_replace(self, tmp_path):
        p = str(tmp_path / "s.json")
        write_summary({"v": 1}, p)
        write_summary({"v": 2}, p)
        assert load_summary(p) == {"v": 2}
        assert not (tmp_path / "s.json.tmp").exists()
