"""PNG figures for sweep tables and null spectra (Agg backend, files only)."""
import matplotlib

matplotlib.use('Agg')
from matplotlib import pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    'font.size': 10,
    'axes.grid': True,
    'grid.alpha': 0.3,
    'lines.linewidth': 1.5,
    'lines.markersize': 5,
    'savefig.dpi': 150,
    'savefig.bbox': 'tight',
}

_AXIS_LABEL = {'snr': 'SNR (dB)', 'n_snapshots': 'snapshots $N_l$',
               'n_freqs': 'number of frequencies $N_F$'}


def plot_sweep(table, path, title=None):
    """RMSE versus sweep value, one line per scenario id."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        groups = {}
        for r in table.rows:
            groups.setdefault(r['scenario_id'], []).append(r)
        axis = None
        for sid, rows in groups.items():
            axis = rows[0]['sweep_axis']
            x = [r['sweep_value'] for r in rows]
            y = [r['rmse_deg'] for r in rows]
            ax.semilogy(x, np.maximum(y, 1e-6), 'o-', label=sid)
        ax.set_xlabel(_AXIS_LABEL.get(axis, str(axis)))
        ax.set_ylabel('RMSE (deg)')
        if title:
            ax.set_title(title)
        ax.legend()
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_null_spectrum(thetas_deg, values, path, truth_deg=None, estimates_deg=None):
    """Null spectrum versus angle with optional true/estimated DOA markers."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.semilogy(thetas_deg, np.maximum(values, 1e-16), color='k', lw=1)
        if truth_deg is not None:
            for t in truth_deg:
                ax.axvline(t, color='tab:red', ls='--', lw=1)
        if estimates_deg is not None:
            for t in estimates_deg:
                ax.axvline(t, color='tab:blue', ls=':', lw=1)
        ax.set_xlim(0, 180)
        ax.set_xlabel(r'$\theta$ (deg)')
        ax.set_ylabel('null spectrum')
        fig.savefig(path)
        plt.close(fig)
    return path
