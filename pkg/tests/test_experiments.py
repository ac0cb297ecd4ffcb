import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridless_doa.errors import ConfigurationError, ScoringError
from gridless_doa.experiments import (CSV_COLUMNS, ResultTable, Scenario, cosine_uniform_doas,
                                      emit, load_scenario, load_table, rmse, run_scenario,
                                      sweep)


def scenario(**kw):
    base = dict(scenario_id='t', sensors=16, freq_indices=2, thetas_deg=[88.0, 93.0, 155.0],
                theta_jitter_deg=1.0, n_snapshots=5, snr_db=20.0, mc=2, seed=3)
    base.update(kw)
    return Scenario.from_dict(base)


def test_rmse_examples():
    assert rmse([[10.0, 20.0]], [[10.0, 20.0]]) == 0.0
    assert rmse([[30.0]], [[10.0]]) == 10.0
    assert rmse([[13.0], [54.0]], [[10.0], [50.0]]) == pytest.approx(np.sqrt(12.5))
    assert rmse([[13.0], [54.0]], [[10.0], [50.0]]) == pytest.approx(3.5355, abs=1e-4)
    # estimates are matched after sorting
    assert rmse([[20.0, 10.0]], [[10.0, 20.0]]) == 0.0
    # a failed trial counts at the cap
    assert rmse([None, [10.0]], [[10.0], [10.0]]) == pytest.approx(np.sqrt(50.0))


def test_rmse_errors():
    with pytest.raises(ScoringError):
        rmse([[1.0, 2.0]], [[1.0]])
    with pytest.raises(ScoringError):
        rmse([[1.0]], [[1.0], [2.0]])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-60, 60), st.floats(1, 179)), min_size=1, max_size=20),
       st.randoms(use_true_random=False))
def test_rmse_is_capped_and_order_free(pairs, rnd):
    est = [[t + e] for e, t in pairs]
    tru = [[t] for _, t in pairs]
    r = rmse(est, tru)
    assert 0 <= r <= 10
    idx = list(range(len(pairs)))
    rnd.shuffle(idx)
    assert rmse([est[i] for i in idx], [tru[i] for i in idx]) == pytest.approx(r, rel=1e-12)


def test_cosine_uniform_doas():
    np.testing.assert_array_equal(cosine_uniform_doas(2), [60.0, 120.0])
    assert len(cosine_uniform_doas(15)) == 15


def test_scenario_validation():
    with pytest.raises(ConfigurationError):
        scenario(mc=0)
    with pytest.raises(ConfigurationError):
        scenario(estimator='dual')
    with pytest.raises(ConfigurationError):
        scenario(bogus=1)
    with pytest.raises(ConfigurationError):
        scenario(K=2)
    with pytest.raises(ConfigurationError):
        scenario(random={'K': 2})
    with pytest.raises(ConfigurationError):
        scenario(thetas_deg=[179.5])
    with pytest.raises(ConfigurationError):
        scenario(sensors=[0, 1, 3], estimator='full_primal')
    with pytest.raises(ConfigurationError):
        scenario(k_est=2)


def test_scenario_dict_roundtrip(tmp_path):
    s = scenario(sweep={'axis': 'snr', 'values': [0, 10]})
    path = tmp_path / 's.json'
    path.write_text(json.dumps(s.to_dict()))
    assert load_scenario(path) == s


def test_load_scenario_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        load_scenario(tmp_path / 'missing.yaml')
    bad = tmp_path / 'bad.yaml'
    bad.write_text('- 1\n- 2\n')
    with pytest.raises(ConfigurationError):
        load_scenario(bad)


def test_single_source_noise_free_is_exact():
    s = Scenario.from_dict(dict(sensors=16, freq_indices=2, random={'K': 1}, n_snapshots=1,
                                mc=1, seed=0, estimator='fast_primal'))
    table = run_scenario(s)
    assert table.rows[0]['rmse_deg'] <= 0.01
    assert table.rows[0]['n_failed'] == 0


def test_run_is_deterministic():
    s = scenario()
    a, b = run_scenario(s), run_scenario(s)
    assert emit(a) == emit(b)
    assert a.rows[0]['rmse_deg'] == b.rows[0]['rmse_deg']


def test_parallel_matches_serial():
    s = scenario(mc=3)
    assert emit(run_scenario(s, jobs=2)) == emit(run_scenario(s))


def test_length_one_sweep_equals_run():
    s = scenario()
    t = sweep(s, 'snr', [20.0])
    assert t.rows[0]['rmse_deg'] == run_scenario(s).rows[0]['rmse_deg']
    assert len(t) == 1


def test_failures_score_at_cap():
    s = scenario(mc=2, solver={'max_iter': 3})
    row = run_scenario(s).rows[0]
    assert row['n_failed'] == 2
    assert row['rmse_deg'] == 10.0


def test_overestimated_k_is_truncated():
    s = scenario(mc=2, k_est=5, snr_db=30.0)
    row = run_scenario(s).rows[0]
    assert row['n_failed'] == 0
    assert row['rmse_deg'] < 1.0


def test_n_freqs_sweep_flags_near_collision():
    s = scenario(mc=1, theta_jitter_deg=0.0, n_snapshots=2)
    t = sweep(s, 'n_freqs', [6, 7])
    assert len(t) == 2
    assert len(t.notes) == 1 and 'f=7, k=3' in t.notes[0]


def test_sweep_rejects_bad_axis_before_running():
    with pytest.raises(ConfigurationError):
        sweep(scenario(), 'angle', [1])
    with pytest.raises(ConfigurationError):
        sweep(scenario(), 'snr', [])


def test_emit_empty_table_is_header_only():
    assert emit(ResultTable()) == ','.join(CSV_COLUMNS) + '\n'


def test_emit_csv_shape_and_precision(tmp_path):
    table = ResultTable([dict(scenario_id='x', sweep_axis='snr', sweep_value=10.0,
                              rmse_deg=0.123456789, mean_iters=100.0, mean_solve_ms=12.3456789,
                              n_failed=0)])
    path = tmp_path / 'out' / 't.csv'
    emit(table, 'csv', path)
    rows = list(csv.reader(io.StringIO(path.read_text())))
    assert rows[0] == list(CSV_COLUMNS)
    assert all(len(r) == 7 for r in rows)
    assert rows[1][3] == '0.123457'
    assert rows[1][5] == ''
    assert emit(table, timing=True).splitlines()[1].split(',')[5] == '12.3457'
    assert path.read_text().endswith('\n')


def test_emit_json_roundtrip(tmp_path):
    table = sweep(scenario(mc=1), 'snr', [10.0, 20.0])
    path = tmp_path / 't.json'
    emit(table, 'json', path)
    back = load_table(path)
    assert [r['sweep_value'] for r in back.rows] == [10.0, 20.0]
    for a, b in zip(back.rows, table.rows):
        assert a['rmse_deg'] == pytest.approx(b['rmse_deg'], rel=1e-5)
    doc = json.loads(path.read_text())
    assert doc['baselines'] == {'sbl_rmse_deg': None, 'crb_deg': None}


def test_emit_rejects_unknown_format():
    with pytest.raises(ConfigurationError):
        emit(ResultTable(), 'xml')
