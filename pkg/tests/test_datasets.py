#!/usr/bin/env python3
"""
Test script to verify CSV ingestion, synthetic data and report rendering
"""

import json

import numpy as np
import pandas as pd
import pytest

from config import HyperfineLine, Quantity
from datasets import load_echo_csv, load_relaxation_csv, write_echo_csv, write_relaxation_csv
from echodecay import MonoDecay
from exceptions import DataFileError, InputError
from reporting import ReportDocument, plain, render_json, render_text, render_tsv, write_report
from synthetic import simulate_echo, simulate_relaxation


def test_load_relaxation_csv(write_text):
    path = write_text("t2.csv", "# h-toluene T2\n"
                                "temperature_K,time_us,sigma_us,line\n"
                                "250,12.5,0.5,MI_0\n"
                                "\n"
                                "200,20.0,1.0,MI_0\n")
    dataset = load_relaxation_csv(path)
    assert dataset.quantity == Quantity.T2
    assert dataset.label == "t2"
    assert dataset.hyperfine_line == HyperfineLine.MI_0
    assert list(dataset.temperatures) == [200.0, 250.0]
    assert dataset.times[0] == pytest.approx(20e-6)
    assert dataset.sigmas[1] == pytest.approx(0.5e-6)


def test_missing_sigma_defaults_to_five_percent(write_text):
    path = write_text("t1.csv", "temperature_K,time_us\n200,100\n250,40\n300,10\n")
    dataset = load_relaxation_csv(path, Quantity.T1, label="orbach")
    assert dataset.label == "orbach"
    np.testing.assert_allclose(dataset.sigmas, 0.05 * dataset.times)


@pytest.mark.parametrize("content, row, fragment", [
    ("temperature_K,time_us,sigma_us\n200,20,1\n250,abc,1\n", 3, "not a number"),
    ("temperature_K,time_us,sigma_us\n200,-20,1\n", 2, "must be positive"),
    ("# comment\ntemperature_K,time_us\n200,20\n0,10\n", 4, "temperature_K"),
    ("temperature_K,time_us,sigma_us,line\n200,20,1,MI_2\n", 2, "unknown hyperfine line"),
    ("# sample A\n# 9.4 GHz\ntemperature_K,time_us,sigma_us\n200,20,1\n250,13,0.4,9\n", 5, "expected 3 fields, found 4"),
])
def test_malformed_relaxation_rows_are_addressed(write_text, content, row, fragment):
    path = write_text("bad.csv", content)
    with pytest.raises(DataFileError) as excinfo:
        load_relaxation_csv(path)
    assert excinfo.value.row == row
    assert f"row {row}" in str(excinfo.value)
    assert fragment in str(excinfo.value)


def test_relaxation_file_level_problems(write_text, tmp_path):
    with pytest.raises(DataFileError, match="missing column"):
        load_relaxation_csv(write_text("a.csv", "temperature,time_us\n200,20\n"))
    with pytest.raises(DataFileError, match="no data rows"):
        load_relaxation_csv(write_text("b.csv", "temperature_K,time_us\n"))
    with pytest.raises(DataFileError, match="empty"):
        load_relaxation_csv(write_text("c.csv", "# nothing\n\n"))
    with pytest.raises(DataFileError, match="not found"):
        load_relaxation_csv(str(tmp_path / "absent.csv"))
    with pytest.raises(DataFileError, match="single hyperfine line"):
        load_relaxation_csv(write_text("d.csv", "temperature_K,time_us,line\n200,20,MI_0\n250,10,MI_minus1_inner\n"))


def test_load_echo_csv(write_text):
    path = write_text("echo.csv", "tau_us,amplitude\n0,1.0\n100,-0.2\n50,0.5\n")
    trace = load_echo_csv(path)
    np.testing.assert_allclose(trace.taus, [0.0, 50e-6, 100e-6])
    np.testing.assert_allclose(trace.amplitudes, [1.0, 0.5, -0.2])
    np.testing.assert_allclose(trace.sigmas, 0.05)


def test_echo_duplicate_and_negative_delays(write_text):
    with pytest.raises(DataFileError) as excinfo:
        load_echo_csv(write_text("dup.csv", "tau_us,amplitude,sigma\n0,1,0.1\n10,0.5,0.1\n10,0.4,0.1\n"))
    assert excinfo.value.row == 4
    with pytest.raises(DataFileError, match="non-negative"):
        load_echo_csv(write_text("neg.csv", "tau_us,amplitude\n-1,1\n"))


def test_relaxation_csv_round_trip(tmp_path, orbach_channel):
    dataset = simulate_relaxation([orbach_channel], [170.0, 230.0, 300.0], Quantity.T1, noise=0.02, seed=1)
    path = str(tmp_path / "sim.csv")
    write_relaxation_csv(path, dataset, "synthetic")
    loaded = load_relaxation_csv(path, Quantity.T1)
    np.testing.assert_allclose(loaded.times, dataset.times, rtol=1e-14)
    np.testing.assert_allclose(loaded.sigmas, dataset.sigmas, rtol=1e-14)


def test_echo_csv_round_trip(tmp_path):
    trace = simulate_echo(MonoDecay(1.0, 230e-6), np.linspace(0.0, 500e-6, 11), noise=0.01, seed=2)
    path = str(tmp_path / "echo.csv")
    write_echo_csv(path, trace)
    loaded = load_echo_csv(path)
    np.testing.assert_allclose(loaded.amplitudes, trace.amplitudes, rtol=1e-14)
    np.testing.assert_allclose(loaded.taus, trace.taus, rtol=1e-14)


def test_simulation_is_seeded(orbach_channel):
    first = simulate_relaxation([orbach_channel], [200.0, 300.0], Quantity.T2, noise=0.05, seed=9)
    second = simulate_relaxation([orbach_channel], [200.0, 300.0], Quantity.T2, noise=0.05, seed=9)
    assert list(first.times) == list(second.times)
    with pytest.raises(InputError, match="seed"):
        simulate_relaxation([orbach_channel], [200.0], Quantity.T2, noise=0.05)
    with pytest.raises(InputError):
        simulate_echo(MonoDecay(1.0, 1e-4), [0.0, 1e-5], noise=-0.1, seed=1)


def test_noiseless_simulation_matches_forward_model(orbach_channel):
    dataset = simulate_relaxation([orbach_channel], [250.0], Quantity.T2)
    assert dataset.times[0] == pytest.approx(1.0 / orbach_channel.rates(250.0).R2)
    assert dataset.sigmas[0] == pytest.approx(1e-3 * dataset.times[0])


def test_plain_values_are_json_safe():
    data = plain({'a': np.float64(1.5), 'b': np.int64(3), 'c': float('inf'), 'd': np.array([1.0, np.nan]),
                  'e': Quantity.T1, 'f': np.bool_(True), 'g': (1, 2)})
    assert data == {'a': 1.5, 'b': 3, 'c': None, 'd': [1.0, None], 'e': 'T1', 'f': True, 'g': [1, 2]}
    json.dumps(data, allow_nan=False)


def test_report_rendering_is_stable(tmp_path):
    report = ReportDocument(
        command='demo',
        inputs={'config': 'x.json'},
        results={'value': 0.1 + 0.2, 'rows': [{'T': 170.0}], 'empty': []},
        warnings=['something odd'],
        table=pd.DataFrame({'temperature_K': [170.0, 180.0], 'T2_us': [1.5, float('inf')]}),
        table_comment='demo table',
    )
    text = render_text(report)
    assert repr(0.1 + 0.2) in text
    assert "[warnings]" in text and "something odd" in text
    assert json.loads(render_json(report))['results']['value'] == 0.1 + 0.2

    tsv = render_tsv(report.table, report.table_comment)
    assert tsv.splitlines()[0] == "# demo table"
    assert tsv.splitlines()[1] == "temperature_K\tT2_us"
    assert tsv.splitlines()[3] == "180.0\tnull"

    first = write_report(report, str(tmp_path / "one"))
    second = write_report(report, str(tmp_path / "two"))
    for key in ('json', 'text', 'table'):
        with open(first[key], 'rb') as a, open(second[key], 'rb') as b:
            assert a.read() == b.read()
