"""Seeded Monte Carlo harness: scenarios, RMSE scoring and table output.

A scenario is a flat mapping (YAML or JSON on disk)::

    scenario_id: mmv_snr
    sensors: 16              # int -> 0..n-1, or an explicit list
    freq_indices: 2          # int -> 1..n, or an explicit list
    f1_hz: 100
    speed: 1500
    thetas_deg: [88, 93, 155]
    theta_jitter_deg: 1.0    # uniform [0, jitter) offset per source and trial
    # random: {K: 3, range_deg: [15, 165], min_sep_cos: 0.25}
    powers: [1, 1, 1]
    amplitude: gaussian      # or deterministic
    n_snapshots: 20
    snr_db: 20               # null for noise-free
    mc: 20
    estimator: fast_primal   # or full_primal
    k_est: null              # over-estimated source count, optional
    seed: 0
    solver: {tol: 1.0e-7, max_iter: 50000}
    extraction: {grid_points: 65536, refine_iters: 30}
    sweep: {axis: snr, values: [-10, 0, 10, 20, 30]}

Trial ``t`` draws its sources and noise from ``SeedSequence([seed, t])``,
so results do not depend on execution order or worker count.
"""
import csv
import dataclasses
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import yaml

from .errors import (ConfigurationError, DegenerateSpectrumError, DoaError,
                     ScoringError)
from .extraction import extract_doas
from .formulations import irregular_block, solve_primal
from .lifting import LiftingPlan
from .model import GeometryConfig, SourceSet, collision_scan, random_doas, synthesize

log = logging.getLogger(__name__)

RMSE_CAP_DEG = 10.0
ESTIMATORS = ('fast_primal', 'full_primal')
SWEEP_AXES = ('snr', 'n_snapshots', 'n_freqs')
CSV_COLUMNS = ('scenario_id', 'sweep_axis', 'sweep_value', 'rmse_deg', 'mean_iters',
               'mean_solve_ms', 'n_failed')
# SBL and CRB comparison curves are not produced; JSON output reserves them.
BASELINE_SENTINEL = None


def cosine_uniform_doas(count):
    """``floor(arccos(-1 + 2 (k - 0.5) / K))`` in degrees, ascending.

    The floor tolerates 1e-9 of rounding so that exact angles such as
    ``arccos(1/2) = 60`` are not pushed down a degree.
    """
    k = np.arange(1, count + 1)
    deg = np.rad2deg(np.arccos(-1 + 2 * (k - 0.5) / count))
    return np.sort(np.floor(deg + 1e-9))


@dataclasses.dataclass
class Scenario:
    """One experiment configuration; see the module docstring for the fields."""

    geometry: GeometryConfig
    scenario_id: str = 'scenario'
    thetas_deg: tuple = None
    random: dict = None
    theta_jitter_deg: float = 0.0
    powers: tuple = None
    amplitude: str = 'gaussian'
    n_snapshots: int = 1
    snr_db: float = None
    mc: int = 20
    estimator: str = 'fast_primal'
    k_est: int = None
    seed: int = 0
    solver: dict = dataclasses.field(default_factory=dict)
    extraction: dict = dataclasses.field(default_factory=dict)
    sweep_axis: str = None
    sweep_values: tuple = ()

    def __post_init__(self):
        self.validate()

    @property
    def n_sources(self):
        if self.thetas_deg is not None:
            return len(self.thetas_deg)
        return int(self.random['K'])

    def validate(self):
        if (self.thetas_deg is None) == (self.random is None):
            raise ConfigurationError('give exactly one of thetas_deg and random')
        if self.thetas_deg is not None:
            self.thetas_deg = tuple(float(t) for t in self.thetas_deg)
            hi = max(self.thetas_deg) + self.theta_jitter_deg
            if not (0 < min(self.thetas_deg) and hi < 180):
                raise ConfigurationError('DOAs (plus jitter) must lie in (0, 180) degrees')
        else:
            if 'K' not in self.random:
                raise ConfigurationError('random source spec needs K')
            unknown = set(self.random) - {'K', 'range_deg', 'min_sep_cos'}
            if unknown:
                raise ConfigurationError('unknown random keys %s' % sorted(unknown))
        if self.theta_jitter_deg < 0:
            raise ConfigurationError('theta_jitter_deg must be non-negative')
        if self.powers is not None:
            self.powers = tuple(float(p) for p in self.powers)
            if len(self.powers) != self.n_sources or min(self.powers) <= 0:
                raise ConfigurationError('need one positive power per source')
        if self.amplitude not in ('gaussian', 'deterministic'):
            raise ConfigurationError('amplitude must be gaussian or deterministic')
        if int(self.n_snapshots) < 1:
            raise ConfigurationError('n_snapshots must be >= 1')
        if int(self.mc) < 1:
            raise ConfigurationError('mc must be >= 1')
        if self.estimator not in ESTIMATORS:
            raise ConfigurationError('estimator must be one of %s' % (ESTIMATORS,))
        if self.estimator == 'full_primal' and not self.geometry.is_uniform:
            raise ConfigurationError('full_primal needs a ULA with frequencies 1..N_F')
        if self.k_est is not None and int(self.k_est) < self.n_sources:
            raise ConfigurationError('k_est must be at least the true source count')
        if self.sweep_axis is not None and self.sweep_axis not in SWEEP_AXES:
            raise ConfigurationError('sweep axis must be one of %s' % (SWEEP_AXES,))
        unknown = set(self.solver) - {'tol', 'max_iter', 'rho', 'over_relaxation'}
        if unknown:
            raise ConfigurationError('unknown solver options %s' % sorted(unknown))
        unknown = set(self.extraction) - {'grid_points', 'refine_iters'}
        if unknown:
            raise ConfigurationError('unknown extraction options %s' % sorted(unknown))

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        geo_keys = ('sensors', 'freq_indices', 'f1_hz', 'speed')
        geometry = GeometryConfig.from_dict({k: d.pop(k) for k in geo_keys if k in d})
        sweep = d.pop('sweep', None) or {}
        K = d.pop('K', None)
        kw = {}
        for name in ('scenario_id', 'thetas_deg', 'random', 'theta_jitter_deg', 'powers',
                     'amplitude', 'n_snapshots', 'snr_db', 'mc', 'estimator', 'k_est',
                     'seed', 'solver', 'extraction'):
            if name in d:
                kw[name] = d.pop(name)
        if d:
            raise ConfigurationError('unknown scenario keys %s' % sorted(d))
        if K is not None:
            n = len(kw['thetas_deg']) if kw.get('thetas_deg') is not None \
                else (kw.get('random') or {}).get('K', K)
            if int(n) != int(K):
                raise ConfigurationError('K=%s disagrees with the source spec' % K)
        if sweep:
            kw['sweep_axis'] = sweep.get('axis')
            kw['sweep_values'] = tuple(sweep.get('values', ()))
        try:
            return cls(geometry, **kw)
        except TypeError as e:
            raise ConfigurationError(str(e)) from None

    def to_dict(self):
        d = {'scenario_id': self.scenario_id}
        d.update(self.geometry.to_dict())
        for name in ('thetas_deg', 'random', 'theta_jitter_deg', 'powers', 'amplitude',
                     'n_snapshots', 'snr_db', 'mc', 'estimator', 'k_est', 'seed',
                     'solver', 'extraction'):
            v = getattr(self, name)
            d[name] = list(v) if isinstance(v, tuple) else v
        if self.sweep_axis:
            d['sweep'] = {'axis': self.sweep_axis, 'values': list(self.sweep_values)}
        return d

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def load_scenario(path):
    """Read a scenario from a YAML or JSON file."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigurationError('cannot read config %s: %s' % (path, e)) from None
    except yaml.YAMLError as e:
        raise ConfigurationError('malformed config %s: %s' % (path, e)) from None
    if not isinstance(data, dict):
        raise ConfigurationError('config %s must hold a mapping' % path)
    return Scenario.from_dict(data)


@dataclasses.dataclass
class TrialResult:
    truth: np.ndarray
    estimate: np.ndarray
    iterations: int
    solve_ms: float
    failed: str = ''


@dataclasses.dataclass
class ResultTable:
    """One row per sweep value; ``trials`` keeps the per-trial results."""

    rows: list = dataclasses.field(default_factory=list)
    trials: dict = dataclasses.field(default_factory=dict)
    notes: list = dataclasses.field(default_factory=list)
    timing: bool = False

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return [r[name] for r in self.rows]

    def extend(self, other):
        self.rows.extend(other.rows)
        self.trials.update(other.trials)
        self.notes.extend(other.notes)


# -- scoring -------------------------------------------------------------------

def trial_mse(estimate, truth):
    """Capped mean squared error of one trial; both lists are sorted first."""
    est = np.sort(np.asarray(estimate, dtype=float))
    tru = np.sort(np.asarray(truth, dtype=float))
    if est.shape != tru.shape or tru.ndim != 1:
        raise ScoringError('estimate has %d DOAs, truth has %d' % (est.size, tru.size))
    if not np.all(np.isfinite(est)):
        return RMSE_CAP_DEG ** 2
    return min(float(np.mean((est - tru) ** 2)), RMSE_CAP_DEG ** 2)


def rmse(estimates, truths):
    """``sqrt(mean_t min(mean_k (est - true)^2, 10^2))`` in degrees.

    ``None`` in ``estimates`` marks a failed trial, scored at the cap.
    """
    if len(estimates) != len(truths):
        raise ScoringError('%d estimates for %d trials' % (len(estimates), len(truths)))
    if not truths:
        raise ScoringError('no trials to score')
    mse = [RMSE_CAP_DEG ** 2 if e is None else trial_mse(e, t)
           for e, t in zip(estimates, truths)]
    return float(np.sqrt(np.mean(mse)))


# -- running -------------------------------------------------------------------

def _trial_sources(s, trial):
    ss = np.random.SeedSequence([int(s.seed), int(trial)])
    src_seed, noise_seed = ss.generate_state(2)
    if s.thetas_deg is not None:
        thetas = np.array(s.thetas_deg)
        if s.theta_jitter_deg:
            thetas = thetas + np.random.default_rng(src_seed).uniform(
                0.0, s.theta_jitter_deg, size=thetas.size)
    else:
        r = s.random
        thetas = random_doas(int(r['K']), r.get('range_deg', (15.0, 165.0)),
                             float(r.get('min_sep_cos', 0.25)), rng_seed=src_seed).thetas_deg
    return SourceSet(thetas, s.powers), int(noise_seed)


def run_trial(s, trial):
    """Synthesize, solve and extract for one trial of ``s``."""
    sources, noise_seed = _trial_sources(s, trial)
    truth = np.sort(sources.thetas_deg)
    meas = synthesize(s.geometry, sources, s.n_snapshots, s.snr_db, noise_seed, s.amplitude)
    plan = LiftingPlan(s.geometry)
    full = s.estimator == 'full_primal'
    res = solve_primal(meas, plan, full=full, **s.solver)
    sol = res.solution
    ms = sol.solve_time * 1e3
    if not sol.optimal:
        return TrialResult(truth, None, sol.iterations, ms, 'solver:' + sol.status)
    K = sources.count
    gamma = np.arange(plan.N) if full else plan.U
    try:
        est = extract_doas(irregular_block(res, plan), gamma, int(s.k_est or K),
                           **s.extraction)
    except (DegenerateSpectrumError, DoaError) as e:
        return TrialResult(truth, None, sol.iterations, ms, 'extract:%s' % type(e).__name__)
    if est.K > K:
        est = est.strongest(K)
    return TrialResult(truth, np.sort(est.thetas_deg), sol.iterations, ms)


def _run_trial_star(args):
    return run_trial(*args)


def run_scenario(s, jobs=1, sweep_axis='none', sweep_value=None):
    """Run ``s.mc`` trials and return a one-row :class:`ResultTable`."""
    s.validate()
    tasks = [(s, t) for t in range(int(s.mc))]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            trials = list(pool.map(_run_trial_star, tasks))
    else:
        trials = [run_trial(*t) for t in tasks]
    failed = [t for t in trials if t.failed]
    for t in failed:
        log.info('trial failed (%s); scored at the cap', t.failed)
    row = {
        'scenario_id': s.scenario_id,
        'sweep_axis': sweep_axis,
        'sweep_value': sweep_value,
        'rmse_deg': rmse([t.estimate for t in trials], [t.truth for t in trials]),
        'mean_iters': float(np.mean([t.iterations for t in trials])),
        'mean_solve_ms': float(np.mean([t.solve_ms for t in trials])),
        'n_failed': len(failed),
    }
    return ResultTable([row], {(sweep_axis, sweep_value): trials})


def _with_axis(s, axis, value):
    if axis == 'snr':
        return s.replace(snr_db=None if value is None else float(value))
    if axis == 'n_snapshots':
        return s.replace(n_snapshots=int(value))
    if axis == 'n_freqs':
        g = s.geometry
        geo = GeometryConfig(g.sensor_indices, tuple(range(1, int(value) + 1)),
                             g.base_freq_hz, g.speed)
        return s.replace(geometry=geo)
    raise ConfigurationError('sweep axis must be one of %s' % (SWEEP_AXES,))


def sweep(s, axis=None, values=None, jobs=1, near_tol=0.002):
    """Run ``s`` once per value along ``axis`` with the shared base seed.

    For an ``n_freqs`` sweep with fixed DOAs, near collisions of the nominal
    DOAs are recorded in ``notes``.
    """
    axis = axis or s.sweep_axis
    values = list(s.sweep_values if values is None else values)
    if axis not in SWEEP_AXES:
        raise ConfigurationError('sweep axis must be one of %s' % (SWEEP_AXES,))
    if not values:
        raise ConfigurationError('sweep needs at least one value')
    # validate every point before running any trial
    points = [_with_axis(s, axis, v) for v in values]
    table = ResultTable()
    for v, sv in zip(values, points):
        if axis == 'n_freqs' and s.thetas_deg is not None:
            for c in collision_scan(SourceSet(s.thetas_deg), sv.geometry, near_tol):
                table.notes.append(
                    'N_F=%s: DOAs %.4g and %.4g nearly collide at f=%d, k=%d (residual %.2e)'
                    % (v, s.thetas_deg[c.i], s.thetas_deg[c.j], c.f, c.k, c.residual))
        table.extend(run_scenario(sv, jobs=jobs, sweep_axis=axis, sweep_value=v))
    return table


# -- output --------------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ''
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return '%.6g' % v
    return str(v)


def _json_value(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float('%.6g' % v)
    return v


def emit(table, fmt='csv', path=None, timing=None):
    """Write ``table`` as CSV or JSON to ``path`` (``None`` returns the text).

    ``mean_solve_ms`` is left empty unless ``timing`` is set, so repeated runs
    give byte-identical files.
    """
    timing = table.timing if timing is None else timing
    rows = []
    for r in table.rows:
        r = dict(r)
        if not timing:
            r['mean_solve_ms'] = None
        rows.append(r)
    if fmt == 'csv':
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator='\n')
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
        text = buf.getvalue()
    elif fmt == 'json':
        doc = {
            'columns': list(CSV_COLUMNS),
            'rows': [{c: _json_value(r[c]) for c in CSV_COLUMNS} for r in rows],
            'notes': list(table.notes),
            'baselines': {'sbl_rmse_deg': BASELINE_SENTINEL, 'crb_deg': BASELINE_SENTINEL},
        }
        text = json.dumps(doc, indent=2) + '\n'
    else:
        raise ConfigurationError('format must be csv or json')
    if path is None:
        return text
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    with open(path, 'w', newline='') as fh:
        fh.write(text)
    return text


def load_table(path):
    """Parse a JSON table written by :func:`emit`."""
    with open(path) as fh:
        doc = json.load(fh)
    table = ResultTable(rows=[dict(r) for r in doc['rows']], notes=doc.get('notes', []))
    return table


__all__ = ['Scenario', 'ResultTable', 'TrialResult', 'load_scenario', 'rmse', 'trial_mse',
           'run_trial', 'run_scenario', 'sweep', 'emit', 'load_table', 'cosine_uniform_doas',
           'RMSE_CAP_DEG', 'CSV_COLUMNS']
