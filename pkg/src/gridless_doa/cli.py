"""Command-line entry point: simulate, solve, extract, sweep, nullspec.

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence
(``solve`` only).
"""
import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from .errors import ConfigurationError, DoaError
from .experiments import _trial_sources, emit, load_scenario, sweep
from .extraction import eigen_split, extract_doas, null_spectrum
from .formulations import build_fast_primal, build_full_primal, irregular_block, solve_primal
from .lifting import LiftingPlan
from .model import GeometryConfig, MeasurementTensor, synthesize

log = logging.getLogger('gridless_doa')

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED = 0, 2, 3


def _geometry_fields(g):
    return dict(sensors=np.array(g.sensor_indices), freq_indices=np.array(g.freq_indices),
                f1_hz=g.base_freq_hz, speed=g.speed)


def _geometry_from(npz):
    try:
        return GeometryConfig(tuple(npz['sensors'].tolist()), tuple(npz['freq_indices'].tolist()),
                              float(npz['f1_hz']), float(npz['speed']))
    except KeyError as e:
        raise ConfigurationError('input file lacks %s' % e) from None


def _load_npz(path):
    try:
        return np.load(path, allow_pickle=False)
    except (OSError, ValueError) as e:
        raise ConfigurationError('cannot read %s: %s' % (path, e)) from None


def _scenario(args):
    s = load_scenario(args.config)
    changes = {}
    if getattr(args, 'seed', None) is not None:
        changes['seed'] = args.seed
    if getattr(args, 'mc', None) is not None:
        changes['mc'] = args.mc
    if getattr(args, 'estimator', None) is not None:
        changes['estimator'] = args.estimator
    if getattr(args, 'snr', None) is not None:
        changes['snr_db'] = args.snr
    return s.replace(**changes) if changes else s


def _simulate(s):
    sources, noise_seed = _trial_sources(s, 0)
    return synthesize(s.geometry, sources, s.n_snapshots, s.snr_db, noise_seed, s.amplitude)


def _save(path, **arrays):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    with open(path, 'wb') as fh:
        np.savez(fh, **arrays)


def cmd_simulate(args):
    s = _scenario(args)
    meas = _simulate(s)
    _save(args.out, data=meas.data, thetas_deg=np.sort(meas.truth.thetas_deg),
          snr_db=np.nan if s.snr_db is None else s.snr_db, **_geometry_fields(s.geometry))
    print('wrote %s: %d sensors x %d snapshots x %d frequencies'
          % (args.out, *meas.data.shape))
    return EXIT_OK


def _measurement(args):
    if args.input:
        f = _load_npz(args.input)
        g = _geometry_from(f)
        truth = f['thetas_deg'] if 'thetas_deg' in f else np.zeros(0)
        return MeasurementTensor(f['data'], g), truth, args.estimator or 'fast_primal'
    if not args.config:
        raise ConfigurationError('solve needs --input or --config')
    s = _scenario(args)
    meas = _simulate(s)
    return meas, np.sort(meas.truth.thetas_deg), s.estimator


def cmd_solve(args):
    meas, truth, estimator = _measurement(args)
    plan = LiftingPlan(meas.geometry)
    full = estimator == 'full_primal'
    if args.dump_problem:
        data = meas.data / max(np.linalg.norm(meas.data), 1e-300)
        prob = build_full_primal(data, plan) if full else build_fast_primal(data, plan)
        prob.dump(args.dump_problem)
    opts = {'tol': args.tol}
    if args.max_iter is not None:
        opts['max_iter'] = args.max_iter
    res = solve_primal(meas, plan, full=full, **opts)
    sol = res.solution
    _save(args.out, u=res.u.u, mask=res.u.mask, T=irregular_block(res, plan),
          full=full, objective=res.objective, status=sol.status, iterations=sol.iterations,
          thetas_deg=truth, **_geometry_fields(meas.geometry))
    print('%s: status=%s iterations=%d objective=%.6g residuals=(%.2e, %.2e, %.2e) -> %s'
          % (estimator, sol.status, sol.iterations, res.objective, sol.primal_residual,
             sol.dual_residual, sol.gap, args.out))
    return EXIT_OK if sol.optimal else EXIT_NOT_CONVERGED


def _solved(path):
    f = _load_npz(path)
    g = _geometry_from(f)
    plan = LiftingPlan(g)
    full = bool(f['full'])
    gamma = np.arange(plan.N) if full else plan.U
    return f, plan, gamma, f['T']


def _source_count(args, f):
    if args.K is not None:
        return args.K
    if 'thetas_deg' in f and f['thetas_deg'].size:
        return int(f['thetas_deg'].size)
    raise ConfigurationError('give -K: the input carries no source count')


def cmd_extract(args):
    f, plan, gamma, T = _solved(args.input)
    K = _source_count(args, f)
    est = extract_doas(T, gamma, K, grid_points=args.grid)
    rows = [dict(theta_deg=t, w=w, power=p, null_value=v) for t, w, p, v in
            zip(est.thetas_deg, est.w_hat, est.powers, est.null_spectrum_minima)]
    if args.format == 'json':
        text = json.dumps({'K': K, 'sources': rows}, indent=2) + '\n'
    else:
        lines = ['theta_deg,w,power,null_value']
        lines += ['%.6g,%.6g,%.6g,%.6g' % (r['theta_deg'], r['w'], r['power'], r['null_value'])
                  for r in rows]
        text = '\n'.join(lines) + '\n'
    if args.out:
        with open(args.out, 'w') as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_sweep(args):
    s = _scenario(args)
    if args.full_mc:
        s = s.replace(mc=100)
    values = None
    if args.values:
        values = [float(v) if args.axis == 'snr' else int(float(v)) for v in args.values]
    table = sweep(s, args.axis, values, jobs=args.jobs)
    for note in table.notes:
        print('note: %s' % note, file=sys.stderr)
    text = emit(table, args.format, args.out, timing=args.timing)
    if args.out is None:
        sys.stdout.write(text)
    if args.plot:
        from .plotting import plot_sweep
        png = _sibling(args.out, '.png', 'sweep.png')
        plot_sweep(table, png, title=s.scenario_id)
        print('wrote %s' % png, file=sys.stderr)
    return EXIT_OK


def _sibling(path, ext, default):
    if not path:
        return default
    return os.path.splitext(path)[0] + ext


def cmd_nullspec(args):
    f, plan, gamma, T = _solved(args.input)
    K = _source_count(args, f)
    split = eigen_split(T, K)
    # open grid over (0, 180) so both end-fire directions are excluded
    thetas = (np.arange(args.points) + 0.5) * 180.0 / args.points
    z = np.exp(-1j * np.pi * np.cos(np.deg2rad(thetas)))
    D = np.maximum(null_spectrum(split, gamma, z), 0.0)
    out = args.out or 'nullspec.csv'
    d = os.path.dirname(os.path.abspath(out))
    os.makedirs(d, exist_ok=True)
    with open(out, 'w', newline='') as fh:
        w = csv.writer(fh, lineterminator='\n')
        w.writerow(['theta_deg', 'null_spectrum'])
        for t, v in zip(thetas, D):
            w.writerow(['%.6g' % t, '%.6g' % v])
    print('wrote %s (%d points)' % (out, len(thetas)), file=sys.stderr)
    if args.plot:
        from .plotting import plot_null_spectrum
        est = extract_doas(T, gamma, K)
        truth = f['thetas_deg'] if 'thetas_deg' in f and f['thetas_deg'].size else None
        png = _sibling(out, '.png', 'nullspec.png')
        plot_null_spectrum(thetas, D, png, truth, est.thetas_deg)
        print('wrote %s' % png, file=sys.stderr)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog='gridless-doa', description=__doc__.splitlines()[0])
    p.add_argument('-v', '--verbose', action='store_true')
    sub = p.add_subparsers(dest='command', required=True)

    def scenario_flags(sp, config_required=True):
        sp.add_argument('--config', required=config_required, help='scenario YAML/JSON file')
        sp.add_argument('--seed', type=int)
        sp.add_argument('--estimator', choices=('fast_primal', 'full_primal'))

    sp = sub.add_parser('simulate', help='synthesize one measurement tensor')
    scenario_flags(sp)
    sp.add_argument('--snr', type=float, help='override snr_db')
    sp.add_argument('--out', default='measurement.npz')
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser('solve', help='solve the primal SDP for one measurement')
    scenario_flags(sp, config_required=False)
    sp.add_argument('--input', help='measurement .npz from simulate')
    sp.add_argument('--snr', type=float)
    sp.add_argument('--tol', type=float, default=1e-7)
    sp.add_argument('--max-iter', type=int)
    sp.add_argument('--dump-problem', help='write the conic problem as text')
    sp.add_argument('--out', default='solution.npz')
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser('extract', help='read DOAs from a solved Toeplitz block')
    sp.add_argument('--input', required=True)
    sp.add_argument('-K', type=int)
    sp.add_argument('--grid', type=int, default=2 ** 16)
    sp.add_argument('--format', choices=('csv', 'json'), default='csv')
    sp.add_argument('--out')
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser('sweep', help='Monte Carlo RMSE sweep')
    scenario_flags(sp)
    sp.add_argument('--mc', type=int)
    sp.add_argument('--full-mc', action='store_true', help='use 100 trials per point')
    sp.add_argument('--axis', choices=('snr', 'n_snapshots', 'n_freqs'))
    sp.add_argument('--values', nargs='+')
    sp.add_argument('--jobs', type=int, default=1)
    sp.add_argument('--timing', action='store_true', help='fill mean_solve_ms')
    sp.add_argument('--plot', action='store_true', help='also write a PNG next to --out')
    sp.add_argument('--format', choices=('csv', 'json'), default='csv')
    sp.add_argument('--out')
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser('nullspec', help='null spectrum of a solved Toeplitz block as CSV')
    sp.add_argument('--input', required=True)
    sp.add_argument('-K', type=int)
    sp.add_argument('--points', type=int, default=3600)
    sp.add_argument('--plot', action='store_true')
    sp.add_argument('--out')
    sp.set_defaults(func=cmd_nullspec)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        return args.func(args)
    except ConfigurationError as e:
        print('configuration error: %s' % e, file=sys.stderr)
        return EXIT_CONFIG
    except DoaError as e:
        print('error: %s' % e, file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
