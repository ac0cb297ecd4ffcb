"""Array geometry, source scenarios and multi-frequency signal synthesis.

Sensors sit on the grid ``{0, ..., N_M - 1} * d`` and the active temporal
frequencies on ``{1, ..., N_F} * F1``. With ``d = c / (2 F1)`` a source at
angle ``theta`` has directional cosine ``w = cos(theta) / 2`` and the
manifold entry of sensor ``m`` at frequency index ``f`` is
``exp(-2j pi w f m)``.
"""
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import ConfigurationError, DomainError, InvalidFrequencyError

_UNIT_TOL = 1e-9
_EXACT_TOL = 1e-12


@dataclass(frozen=True)
class GeometryConfig:
    """Sensor and frequency index sets of a (possibly sparse) linear array.

    Args:
        sensor_indices: Sensor positions in units of ``d``. Any iterable of
            non-negative integers; stored sorted.
        freq_indices: Active frequencies in units of ``F1``. Any iterable of
            positive integers; stored sorted.
        base_freq_hz: The frequency unit ``F1``.
        speed: Propagation speed in m/s.
    """

    sensor_indices: tuple
    freq_indices: tuple
    base_freq_hz: float = 100.0
    speed: float = 1500.0

    def __post_init__(self):
        sensors = _index_tuple(self.sensor_indices, 'sensor_indices')
        freqs = _index_tuple(self.freq_indices, 'freq_indices')
        if sensors[0] < 0:
            raise ConfigurationError('sensor indices must be non-negative')
        if freqs[0] < 1:
            raise ConfigurationError('frequency indices must be >= 1')
        if not (self.base_freq_hz > 0 and self.speed > 0):
            raise ConfigurationError('base_freq_hz and speed must be positive')
        object.__setattr__(self, 'sensor_indices', sensors)
        object.__setattr__(self, 'freq_indices', freqs)

    @classmethod
    def uniform(cls, n_sensors, n_freqs, **kwargs):
        """ULA with ``n_sensors`` elements and frequencies ``1..n_freqs``."""
        return cls(tuple(range(n_sensors)), tuple(range(1, n_freqs + 1)), **kwargs)

    @property
    def spacing(self):
        return self.speed / (2.0 * self.base_freq_hz)

    @property
    def n_m(self):
        return len(self.sensor_indices)

    @property
    def n_M(self):
        return self.sensor_indices[-1] + 1

    @property
    def n_f(self):
        return len(self.freq_indices)

    @property
    def n_F(self):
        return self.freq_indices[-1]

    @property
    def N(self):
        """Length of the full lifted index axis, ``N_F (N_M - 1) + 1``."""
        return self.n_F * (self.n_M - 1) + 1

    @property
    def U(self):
        """Sorted space-frequency products ``{m f}``."""
        prods = {m * f for m in self.sensor_indices for f in self.freq_indices}
        return np.array(sorted(prods), dtype=int)

    @property
    def n_u(self):
        return len(self.U)

    @property
    def is_uniform(self):
        return (self.sensor_indices == tuple(range(self.n_M))
                and self.freq_indices == tuple(range(1, self.n_F + 1)))

    def freq_position(self, f):
        """Slice index of frequency index ``f`` in a measurement tensor."""
        try:
            return self.freq_indices.index(int(f))
        except ValueError:
            raise InvalidFrequencyError(
                'frequency index %r is not in %r' % (f, self.freq_indices)) from None

    def to_dict(self):
        return {
            'sensors': list(self.sensor_indices),
            'freq_indices': list(self.freq_indices),
            'f1_hz': self.base_freq_hz,
            'speed': self.speed,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            sensors = d['sensors']
            freqs = d['freq_indices']
        except KeyError as e:
            raise ConfigurationError('geometry is missing key %s' % e) from None
        if isinstance(sensors, int):
            sensors = range(sensors)
        if isinstance(freqs, int):
            freqs = range(1, freqs + 1)
        return cls(tuple(sensors), tuple(freqs),
                   base_freq_hz=float(d.get('f1_hz', 100.0)),
                   speed=float(d.get('speed', 1500.0)))


def _index_tuple(values, name):
    try:
        vals = sorted(int(v) for v in values)
    except (TypeError, ValueError):
        raise ConfigurationError('%s must be integers' % name) from None
    if not vals:
        raise ConfigurationError('%s must be non-empty' % name)
    if len(set(vals)) != len(vals):
        raise ConfigurationError('%s contains duplicates' % name)
    return tuple(vals)


# -- angle parameterizations -------------------------------------------------

def theta_to_w(theta_deg):
    theta = np.asarray(theta_deg, dtype=float)
    if np.any(~np.isfinite(theta)) or np.any((theta <= 0) | (theta >= 180)):
        raise DomainError('DOA must lie in the open interval (0, 180) degrees')
    return np.cos(np.deg2rad(theta)) / 2.0


def w_to_theta(w):
    w = np.asarray(w, dtype=float)
    if np.any(~np.isfinite(w)) or np.any(np.abs(w) > 0.5):
        raise DomainError('directional cosine must lie in [-1/2, 1/2]')
    return np.rad2deg(np.arccos(2.0 * w))


def w_to_z(w):
    w = np.asarray(w, dtype=float)
    if np.any(~np.isfinite(w)) or np.any(np.abs(w) > 0.5):
        raise DomainError('directional cosine must lie in [-1/2, 1/2]')
    return np.exp(-2j * np.pi * w)


def z_to_w(z):
    z = np.asarray(z, dtype=complex)
    if np.any(~np.isfinite(z)) or np.any(np.abs(np.abs(z) - 1.0) > _UNIT_TOL):
        raise DomainError('node must lie on the unit circle')
    return -np.angle(z) / (2.0 * np.pi)


def z_to_theta(z):
    return w_to_theta(np.clip(z_to_w(z), -0.5, 0.5))


_CONVERSIONS = {
    'theta->w': theta_to_w,
    'w->theta': w_to_theta,
    'z->theta': z_to_theta,
    'theta->z': lambda t: w_to_z(theta_to_w(t)),
    'w->z': w_to_z,
    'z->w': z_to_w,
}


def w_theta_convert(value, direction):
    """Convert between DOA in degrees, directional cosine and unit node.

    ``direction`` is one of ``'theta->w'``, ``'w->theta'``, ``'z->theta'``,
    ``'theta->z'``, ``'w->z'`` or ``'z->w'``. Scalars in, scalars out.
    """
    try:
        fn = _CONVERSIONS[direction]
    except KeyError:
        raise ValueError('unknown conversion %r' % direction) from None
    out = fn(value)
    return out.item() if np.ndim(out) == 0 else out


# -- manifold and synthesis --------------------------------------------------

def manifold_vector(geometry, f, w):
    """Array manifold ``[exp(-2j pi w f m)]`` over the sensors of ``geometry``."""
    geometry.freq_position(f)
    if not -0.5 <= w <= 0.5:
        raise DomainError('directional cosine must lie in [-1/2, 1/2]')
    m = np.asarray(geometry.sensor_indices, dtype=float)
    return np.exp(-2j * np.pi * w * f * m)


@dataclass
class SourceSet:
    """Far-field sources with powers and optional amplitude blocks.

    ``amplitudes`` has shape ``(K, N_f, N_l)``, each block with unit
    Frobenius norm. When it is ``None``, :func:`synthesize` draws it.
    """

    thetas_deg: np.ndarray
    powers: np.ndarray = None
    amplitudes: np.ndarray = None

    def __post_init__(self):
        self.thetas_deg = np.atleast_1d(np.asarray(self.thetas_deg, dtype=float))
        if self.thetas_deg.ndim != 1 or self.thetas_deg.size < 1:
            raise ConfigurationError('at least one source is required')
        theta_to_w(self.thetas_deg)
        if self.powers is None:
            self.powers = np.ones(self.count)
        self.powers = np.atleast_1d(np.asarray(self.powers, dtype=float))
        if self.powers.shape != (self.count,) or np.any(self.powers <= 0):
            raise ConfigurationError('need one positive power per source')
        if self.amplitudes is not None:
            amps = np.asarray(self.amplitudes, dtype=complex)
            if amps.ndim != 3 or amps.shape[0] != self.count:
                raise ConfigurationError('amplitudes must have shape (K, N_f, N_l)')
            norms = np.linalg.norm(amps.reshape(self.count, -1), axis=1)
            if np.any(norms == 0):
                raise ConfigurationError('amplitude blocks must be non-zero')
            self.amplitudes = amps / norms[:, None, None]

    @property
    def count(self):
        return self.thetas_deg.size

    @property
    def w(self):
        return theta_to_w(self.thetas_deg)

    def subset(self, idx):
        idx = np.asarray(idx)
        amps = None if self.amplitudes is None else self.amplitudes[idx]
        return SourceSet(self.thetas_deg[idx], self.powers[idx], amps)


def draw_amplitudes(count, n_freqs, n_snapshots, kind='gaussian', rng=None):
    """Amplitude blocks of shape ``(count, n_freqs, n_snapshots)``, unit norm each.

    ``'gaussian'`` draws i.i.d. CN(0, 1) entries, ``'deterministic'`` uses
    equal entries.
    """
    shape = (count, n_freqs, n_snapshots)
    if kind == 'deterministic':
        amps = np.ones(shape, dtype=complex)
    elif kind == 'gaussian':
        if rng is None:
            raise ConfigurationError('gaussian amplitudes need a seeded generator')
        amps = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    else:
        raise ConfigurationError('unknown amplitude model %r' % kind)
    norms = np.linalg.norm(amps.reshape(count, -1), axis=1)
    return amps / norms[:, None, None]


@dataclass
class MeasurementTensor:
    """Received data of shape ``(N_m, N_l, N_f)``; slice ``f`` is frequency ``freq_indices[f]``."""

    data: np.ndarray
    geometry: GeometryConfig
    truth: SourceSet = None
    noise_snr_db: float = None
    clean: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        g = self.geometry
        if self.data.ndim != 3 or self.data.shape[0] != g.n_m or self.data.shape[2] != g.n_f:
            raise ConfigurationError(
                'data shape %s does not match geometry (%d, N_l, %d)'
                % (self.data.shape, g.n_m, g.n_f))

    @property
    def n_snapshots(self):
        return self.data.shape[1]

    def slice(self, f):
        return self.data[:, :, self.geometry.freq_position(f)]


def clean_signal(geometry, sources, n_snapshots):
    """Noise-free tensor ``sum_w c_w [a(f, w) x_w(f)^T]_f``."""
    if sources.amplitudes is None:
        raise ConfigurationError('sources carry no amplitudes')
    if sources.amplitudes.shape[1:] != (geometry.n_f, n_snapshots):
        raise ConfigurationError('amplitude blocks do not match (N_f, N_l)')
    m = np.asarray(geometry.sensor_indices, dtype=float)
    f = np.asarray(geometry.freq_indices, dtype=float)
    # phase[k, m, f]
    phase = np.exp(-2j * np.pi * sources.w[:, None, None] * m[None, :, None] * f[None, None, :])
    # amplitudes[k, f, l] -> X[m, l, f]
    return np.einsum('k,kmf,kfl->mlf', sources.powers, phase, sources.amplitudes)


def synthesize(geometry, sources, n_snapshots, snr_db=None, rng_seed=None,
               amplitude='gaussian'):
    """Simulate a multi-frequency, multi-snapshot measurement.

    Missing amplitudes are drawn from the generator seeded by ``rng_seed``
    before the noise, so the clean part does not depend on ``snr_db``.
    Noise is i.i.d. CN(0, 1), rescaled globally so that
    ``20 log10(||X|| / ||N||)`` equals ``snr_db``.
    """
    if int(n_snapshots) < 1:
        raise ConfigurationError('n_snapshots must be >= 1')
    n_snapshots = int(n_snapshots)
    rng = None if rng_seed is None else np.random.default_rng(rng_seed)
    if sources.amplitudes is None:
        if amplitude == 'gaussian' and rng is None:
            raise ConfigurationError('random amplitudes require rng_seed')
        amps = draw_amplitudes(sources.count, geometry.n_f, n_snapshots, amplitude, rng)
        sources = SourceSet(sources.thetas_deg, sources.powers, amps)
    clean = clean_signal(geometry, sources, n_snapshots)
    data = clean
    if snr_db is not None:
        if rng is None:
            raise ConfigurationError('noisy synthesis requires rng_seed')
        noise = (rng.standard_normal(clean.shape)
                 + 1j * rng.standard_normal(clean.shape)) / np.sqrt(2)
        scale = np.linalg.norm(clean) / (np.linalg.norm(noise) * 10 ** (snr_db / 20.0))
        data = clean + scale * noise
    return MeasurementTensor(data, geometry, sources, snr_db, clean)


def realized_snr_db(measurement):
    noise = measurement.data - measurement.clean
    return 20 * np.log10(np.linalg.norm(measurement.clean) / np.linalg.norm(noise))


# -- collisions ---------------------------------------------------------------

@dataclass(frozen=True)
class Collision:
    i: int
    j: int
    f: int
    k: int
    residual: float

    @property
    def exact(self):
        return abs(self.residual) <= _EXACT_TOL


@dataclass
class CollisionReport:
    pairs: list

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def exact(self):
        return [p for p in self.pairs if p.exact]


def collision_scan(sources, geometry, near_tol=0.01):
    """List every pair/frequency with ``| |w_i - w_j| - k/f | <= near_tol``.

    Only ``f > 1`` can alias and ``k`` ranges over ``1..f-1``. Residuals
    within ``1e-12`` always count, so ``near_tol=0`` finds exact collisions.
    """
    if near_tol < 0:
        raise ConfigurationError('near_tol must be non-negative')
    w = sources.w
    pairs = []
    for i, j in combinations(range(len(w)), 2):
        gap = abs(w[i] - w[j])
        for f in geometry.freq_indices:
            for k in range(1, f):
                res = gap - k / f
                if abs(res) <= max(near_tol, _EXACT_TOL):
                    pairs.append(Collision(i, j, f, k, float(res)))
    return CollisionReport(pairs)


def random_doas(count, range_deg=(15.0, 165.0), min_sep_cos=0.25, rng_seed=None,
                max_tries=100_000):
    """Rejection-sample ``count`` DOAs with pairwise cosine gap ``>= min_sep_cos``."""
    lo, hi = map(float, range_deg)
    if not 0 < lo < hi < 180:
        raise ConfigurationError('range_deg must satisfy 0 < lo < hi < 180')
    span = np.cos(np.deg2rad(lo)) - np.cos(np.deg2rad(hi))
    if count < 1 or (count - 1) * min_sep_cos > span:
        raise ConfigurationError(
            'cannot place %d sources %.3g apart within a cosine span of %.3g'
            % (count, min_sep_cos, span))
    rng = np.random.default_rng(rng_seed)
    for _ in range(max_tries):
        thetas = rng.uniform(lo, hi, size=count)
        c = np.sort(np.cos(np.deg2rad(thetas)))
        if count == 1 or np.min(np.diff(c)) >= min_sep_cos:
            return SourceSet(thetas)
    raise ConfigurationError('no admissible DOA draw after %d tries' % max_tries)
