"""Batch command-line interface to the virtual lab.

Every measurement subcommand accepts ``--config`` (YAML lab
configuration), ``--seed`` (overrides the configured RNG seed so reruns
are bit-identical), and ``--out`` (dataset file); each prints a short
human-readable report of the fitted quantities. Exit status is 0 on
success, 1 on runtime failure, 2 on usage errors.
"""

import functools
import json
import sys
from pathlib import Path
from typing import Optional

import click

from . import calibration
from .experiments import suite
from .io import ConfigError, LabConfig, default_config, load_config
from .io import load_dataset as _load_dataset
from .io import save_dataset
from .sequencer import CW_DWELL, CW_LASER_POWER, CW_MW_RABI
from .vlab import VirtualLab


def _build_lab(config: Optional[str], seed: Optional[int],
               bz: Optional[float] = None):
    cfg = load_config(config) if config else default_config()
    lab = cfg.build_lab()
    if seed is not None:
        lab.seed = seed
    if bz is not None:
        lab.set_state(magnet_field=[0.0, 0.0, bz])
    return cfg, lab


def _finish(ds, out: Optional[str]) -> None:
    if out:
        save_dataset(ds, out)
        click.echo(f"dataset written to {out}")


def common_options(fn):
    @click.option("--config", type=click.Path(), default=None,
                  help="YAML lab configuration file.")
    @click.option("--seed", type=int, default=None,
                  help="Override the RNG seed (reruns are bit-identical).")
    @click.option("--out", type=click.Path(), default=None,
                  help="Write the dataset to this file.")
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except ConfigError as ex:
            raise click.ClickException(f"configuration: {ex}")
        except Exception as ex:   # runtime failure -> exit 1 with diagnostic
            raise click.ClickException(str(ex))

    return wrapper


@click.group()
def main():
    """Software twin of a confocal single-NV microscope."""


@main.command()
@click.option("--x0", type=float, default=49.0, show_default=True)
@click.option("--x1", type=float, default=51.0, show_default=True)
@click.option("--y0", type=float, default=49.0, show_default=True)
@click.option("--y1", type=float, default=51.0, show_default=True)
@click.option("--resolution", type=float, default=0.05, show_default=True,
              help="Pixel pitch (um).")
@click.option("--dwell", type=float, default=1e-3, show_default=True)
@common_options
def scan(x0, x1, y0, y1, resolution, dwell, config, seed, out):
    """Confocal raster scan of an (x, y) region."""
    _, lab = _build_lab(config, seed)
    ds = suite.confocal_scan(lab, ((x0, x1), (y0, y1)), resolution,
                             dwell=dwell)
    iy, ix = divmod(int(ds.values.argmax()), ds.values.shape[1])
    click.echo(f"scan {ds.values.shape[1]}x{ds.values.shape[0]} pixels, "
               f"max {ds.values.max():.0f} counts at "
               f"({ds.axes[1].values[ix]:.3f}, {ds.axes[0].values[iy]:.3f}) um")
    _finish(ds, out)


@main.command()
@click.option("--bz", type=float, default=None,
              help="Axial magnetic field to apply (T).")
@click.option("--f-start", type=float, default=None,
              help="Sweep start (Hz); default covers the expected dips.")
@click.option("--f-stop", type=float, default=None)
@click.option("--points", type=int, default=301, show_default=True)
@click.option("--repeats", type=int, default=512, show_default=True)
@click.option("--dwell", type=float, default=CW_DWELL, show_default=True)
@click.option("--laser-power", type=float, default=CW_LASER_POWER)
@click.option("--omega", type=float, default=CW_MW_RABI,
              help="CW MW Rabi frequency (Hz).")
@common_options
def odmr(bz, f_start, f_stop, points, repeats, dwell, laser_power, omega,
         config, seed, out):
    """CW ODMR spectrum with Lorentzian dip fits and field inference."""
    cfg, lab = _build_lab(config, seed, bz=bz)
    if f_start is None or f_stop is None:
        b_axis = abs(float(lab.state.magnet_field[2]))
        span = cfg.physics.gamma_e * b_axis + 25e6
        center = cfg.physics.d_zfs
        f_start = f_start if f_start is not None else center - span
        f_stop = f_stop if f_stop is not None else center + span
    ds = suite.cw_odmr(lab, f_start, f_stop, points, dwell=dwell,
                       repeats=repeats, laser_power=laser_power, omega=omega)
    md = ds.metadata
    centers = md.get("dip_centers_hz", [])
    fr = ds.fit
    if fr is not None and fr.converged:
        click.echo(f"contrast {100 * fr.value('a0'):.2f} %, "
                   f"FWHM {fr.value('fwhm0') / 1e6:.2f} MHz")
    for c in centers:
        click.echo(f"dip center {c / 1e9:.6f} GHz")
    if len(centers) == 2:
        click.echo(f"splitting {(centers[1] - centers[0]) / 1e6:.3f} MHz")
    if "inferred_bz_t" in md:
        click.echo(f"inferred Bz = {md['inferred_bz_t'] / 1e-6:.1f} uT "
                   f"+- {md['inferred_bz_sigma_t'] / 1e-6:.1f} uT")
    _finish(ds, out)


@main.command()
@click.option("--tau-start", type=float, default=0.0, show_default=True)
@click.option("--tau-stop", type=float, default=400e-9, show_default=True)
@click.option("--points", type=int, default=81, show_default=True)
@click.option("--frequency", type=float, default=2.87e9, show_default=True)
@click.option("--omega", type=float, default=20.4e6, show_default=True)
@click.option("--shots", type=int, default=100_000, show_default=True)
@common_options
def rabi(tau_start, tau_stop, points, frequency, omega, shots, config, seed,
         out):
    """MW pulse-length sweep; fits the Rabi oscillation."""
    _, lab = _build_lab(config, seed)
    ds = suite.rabi(lab, tau_start, tau_stop, points, frequency, omega,
                    shots=shots)
    fr = ds.fit
    if fr is not None and fr.converged:
        click.echo(f"Omega = {fr.value('omega') / 1e6:.3f} MHz, "
                   f"T2* = {fr.value('t2_star') / 1e-9:.1f} ns")
        click.echo(f"tau_pi = {ds.metadata['tau_pi'] / 1e-9:.2f} ns, "
                   f"tau_pi/2 = {ds.metadata['tau_pi_2'] / 1e-9:.2f} ns")
    else:
        click.echo("fit did not converge")
    _finish(ds, out)


@main.command()
@click.option("--tau-start", type=float, default=20e-9, show_default=True)
@click.option("--tau-stop", type=float, default=1e-6, show_default=True)
@click.option("--points", type=int, default=41, show_default=True)
@click.option("--frequency", type=float, default=2.87e9, show_default=True)
@click.option("--omega", type=float, default=20.4e6, show_default=True)
@click.option("--shots", type=int, default=100_000, show_default=True)
@common_options
def ramsey(tau_start, tau_stop, points, frequency, omega, shots, config,
           seed, out):
    """Free-precession sweep; fits the dephasing time T2*."""
    _, lab = _build_lab(config, seed)
    ds = suite.ramsey(lab, tau_start, tau_stop, points, frequency, omega,
                      shots=shots)
    if "t2_star" in ds.metadata:
        click.echo(f"T2* = {ds.metadata['t2_star'] / 1e-9:.0f} ns")
    else:
        click.echo("fit did not converge")
    _finish(ds, out)


@main.command()
@click.option("--tau-start", type=float, default=50e-9, show_default=True)
@click.option("--tau-stop", type=float, default=1.5e-6, show_default=True)
@click.option("--points", type=int, default=24, show_default=True)
@click.option("--frequency", type=float, default=2.87e9, show_default=True)
@click.option("--omega", type=float, default=20.4e6, show_default=True)
@click.option("--shots", type=int, default=1_000_000, show_default=True)
@click.option("--stretched", is_flag=True,
              help="Fit a stretched exponential (free exponent).")
@common_options
def hahn(tau_start, tau_stop, points, frequency, omega, shots, stretched,
         config, seed, out):
    """Hahn-echo sweep; fits the coherence time T2 against 2*tau."""
    _, lab = _build_lab(config, seed)
    ds = suite.hahn_echo(lab, tau_start, tau_stop, points, omega=omega,
                         mw_frequency=frequency, shots=shots,
                         stretched=stretched)
    fr = ds.fit
    if fr is not None and fr.converged:
        click.echo(f"T2 = {fr.value('tau') / 1e-9:.0f} ns")
    else:
        click.echo("fit did not converge")
    _finish(ds, out)


@main.command()
@click.option("--pi-duration", type=float, default=24.5e-9, show_default=True)
@click.option("--bin-width", type=float, default=20e-9, show_default=True)
@click.option("--trace-length", type=float, default=2e-6, show_default=True)
@click.option("--frequency", type=float, default=2.87e9, show_default=True)
@click.option("--omega", type=float, default=20.4e6, show_default=True)
@click.option("--shots", type=int, default=300_000, show_default=True)
@common_options
def readout(pi_duration, bin_width, trace_length, frequency, omega, shots,
            config, seed, out):
    """Time-binned readout traces for initial |0> and |+-1>."""
    _, lab = _build_lab(config, seed)
    ds = suite.readout_contrast(lab, pi_duration, bin_width=bin_width,
                                trace_length=trace_length,
                                mw_frequency=frequency, omega=omega,
                                shots=shots)
    i0, i1 = ds.values
    n_early = max(1, int(round(300e-9 / bin_width)))
    early = float(i0[:n_early].sum() - i1[:n_early].sum())
    click.echo(f"early-window contrast (I0 - I1, first 300 ns): "
               f"{early:.0f} counts")
    _finish(ds, out)


@main.command()
@click.option("--excitation", type=float, default=1e-6, show_default=True)
@click.option("--bin-width", type=float, default=250e-12, show_default=True)
@click.option("--shots", type=int, default=10_000_000, show_default=True)
@common_options
def lifetime(excitation, bin_width, shots, config, seed, out):
    """TCSPC fluorescence decay after the laser-off edge."""
    _, lab = _build_lab(config, seed)
    ds = suite.lifetime(lab, excitation=excitation, bin_width=bin_width,
                        shots=shots)
    fr = ds.fit
    click.echo(f"{ds.metadata['n_tags']} time tags")
    if fr is not None and fr.converged:
        click.echo(f"lifetime = {fr.value('tau') / 1e-9:.2f} ns")
    else:
        click.echo("fit did not converge")
    _finish(ds, out)


@main.command("calibrate-rates")
@click.option("--section",
              type=click.Choice(["optical_rates", "cw_odmr", "noise", "all"]),
              default="optical_rates", show_default=True)
def calibrate_rates(section):
    """Re-derive the calibrated constants from their target observables."""
    try:
        if section == "all":
            report = calibration.calibration_report()
        elif section == "optical_rates":
            report = {"optical_rates": calibration.check_optical_rates()}
        elif section == "cw_odmr":
            report = {"cw_odmr": calibration.calibrate_cw_odmr()}
        else:
            report = {"noise": {
                "sigma_static": calibration.ramsey_sigma_static(),
                "sigma_ou": calibration.calibrate_echo_noise(),
            }}
    except Exception as ex:
        raise click.ClickException(str(ex))
    click.echo(json.dumps(report, indent=2, default=float))


@main.command()
@click.option("--config", type=click.Path(), default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--data-dir", type=click.Path(), default=None,
              help="Directory for persisted datasets.")
def serve(config, host, port, data_dir):
    """Run the HTTP/WebSocket service."""
    from .service import serve as _serve
    try:
        cfg = load_config(config) if config else default_config()
        _serve(cfg, port=port, host=host,
               data_dir=Path(data_dir) if data_dir else None)
    except ConfigError as ex:
        raise click.ClickException(f"configuration: {ex}")


@main.command()
@click.argument("dataset", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None,
              help="Output image path (default: dataset name + .png).")
@click.option("--dpi", type=int, default=150, show_default=True)
def render(dataset, out, dpi):
    """Render a dataset file to a plot image with fit overlays."""
    from .render import render_dataset
    try:
        ds = _load_dataset(dataset)
        out_path = out or str(Path(dataset).with_suffix(".png"))
        render_dataset(ds, out_path, dpi=dpi)
    except Exception as ex:
        raise click.ClickException(str(ex))
    click.echo(f"image written to {out_path}")


if __name__ == "__main__":
    sys.exit(main())
