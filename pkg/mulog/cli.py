import json
import logging
import math
from pathlib import Path
from typing import List, Optional

import numpy as np
import typer
from dotenv import load_dotenv

from .admm import DEFAULT_OUTER_ITERS, MulogOptions, homomorphic, midal, run_mulog
from .container import CovContainer, read_container, write_container
from .denoise import DEFAULT_TIMEOUT, TvConfig, denoiser_from_spec
from .display import amplitude, coherence, pauli_rgb, phase, save_png, span
from .exceptions import InvalidInputError, MulogError
from .experiments import residual_table
from .metrics import evaluate, format_table
from .scenes import SCENES, make_scene, simulate
from .utils import atomic_write_bytes, setup_logging

load_dotenv()

log = logging.getLogger(__name__)

app = typer.Typer(add_completion=False, no_args_is_help=True)

METHODS = ("mulog", "midal", "homomorphic")
MAPS = ("amplitude", "span", "phase", "coherence", "pauli")


def _int_list(text: str, option: str) -> List[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise typer.BadParameter(f"{option} expects comma-separated integers, got {text!r}")
    if not values:
        raise typer.BadParameter(f"{option} is empty")
    return values


def _fail(e: Exception) -> None:
    log.error(f"{type(e).__name__}: {e}")
    raise typer.Exit(1)


@app.callback()
def main(
    loglevel: str = typer.Option(
        "INFO",
        "--loglevel",
        help="Logging level: DEBUG, INFO, WARNING, ERROR",
        envvar="MULOG_LOGLEVEL",
    ),
):
    """Speckle reduction of SAR intensity and covariance images."""
    setup_logging(loglevel)


@app.command("simulate")
def cmd_simulate(
    gt: str = typer.Option(
        "mosaic",
        "--gt",
        help=f"Builtin scene ({', '.join(SCENES)}) or path to a ground truth container",
    ),
    looks: float = typer.Option(1.0, "--looks", help="Number of looks L"),
    dim: int = typer.Option(1, "--dim", help="Matrix dimension D (builtin scenes only)"),
    size: int = typer.Option(256, "--size", help="Side of builtin scenes in pixels"),
    seed: int = typer.Option(0, "--seed", help="Seed of the Philox random stream"),
    out: Path = typer.Option(..., "--out", help="Noisy container to write"),
    gt_out: Optional[Path] = typer.Option(
        None, "--gt-out", help="Ground truth container to write; defaults to <out>.gt.mulg"
    ),
):
    """Draw a speckled image around a ground truth."""
    if not looks > 0:
        raise typer.BadParameter("--looks must be positive")
    if dim < 1:
        raise typer.BadParameter("--dim must be >= 1")
    gt_path = Path(gt)
    try:
        if gt in SCENES:
            if gt == "coherence" and dim < 2:
                raise typer.BadParameter("the coherence scene needs --dim >= 2")
            truth = make_scene(gt, dim, size)
        elif gt_path.is_file():
            truth = read_container(gt_path).data
        else:
            raise typer.BadParameter(f"--gt must be one of {', '.join(SCENES)} or an existing file")
        if truth.shape[-1] > 1 and looks != int(looks):
            raise typer.BadParameter("Wishart simulation needs an integer number of looks")
        noisy = simulate(truth, looks, seed)
        if gt_out is None:
            gt_out = out.with_name(out.stem + ".gt" + (out.suffix or ".mulg"))
        write_container(out, CovContainer(noisy, looks))
        write_container(gt_out, CovContainer(truth, looks))
    except (MulogError, OSError) as e:
        _fail(e)
    log.info(f"Wrote noisy image to {out} and ground truth to {gt_out}")


@app.command("despeckle")
def cmd_despeckle(
    input_path: Path = typer.Option(
        ..., "--in", exists=True, dir_okay=False, readable=True, help="Input container"
    ),
    method: str = typer.Option("mulog", "--method", help="mulog, midal or homomorphic"),
    denoiser: str = typer.Option("tv", "--denoiser", help="tv, gauss or ext:<command with {input} {sigma} {output}>"),
    looks: Optional[float] = typer.Option(None, "--looks", help="Override the number of looks stored in the file"),
    iters: int = typer.Option(DEFAULT_OUTER_ITERS, "--iters", help="Outer ADMM iterations"),
    beta: Optional[float] = typer.Option(None, "--beta", help="ADMM weight; defaults to 1 + 2/L"),
    q: int = typer.Option(1, "--Q", "--q", help="Rectangles of the fidelity integral (0: commuting surrogate)"),
    inner_iters: int = typer.Option(10, "--inner-iters", help="Quasi-Newton iterations per ADMM step"),
    beta_schedule: str = typer.Option("fixed", "--beta-schedule", help="fixed or increasing"),
    gamma: float = typer.Option(1.05, "--gamma", help="Growth factor of beta for the increasing schedule"),
    warm_start: bool = typer.Option(False, "--warm-start", help="Start each x-update from the previous x"),
    tv_lambda: float = typer.Option(0.7, "--tv-lambda", help="TV regularization scale"),
    tv_iters: int = typer.Option(200, "--tv-iters", help="Maximum TV dual iterations"),
    denoiser_timeout: float = typer.Option(
        DEFAULT_TIMEOUT,
        "--denoiser-timeout",
        help="Seconds allowed per external denoiser call",
        envvar="MULOG_DENOISER_TIMEOUT",
    ),
    threads: Optional[int] = typer.Option(
        None, "--threads", help="Worker threads (default: half of the CPUs)", envvar="MULOG_THREADS"
    ),
    out: Path = typer.Option(..., "--out", help="Output container"),
    diag: Optional[Path] = typer.Option(None, "--diag", help="Per-iteration diagnostics (JSON lines)"),
):
    """Despeckle a container with MuLoG, MIDAL or the homomorphic baseline."""
    method = method.strip().lower()
    if method not in METHODS:
        raise typer.BadParameter(f"--method must be one of {', '.join(METHODS)}")
    try:
        handle = denoiser_from_spec(denoiser, TvConfig(lambda_scale=tv_lambda, max_iters=tv_iters), denoiser_timeout)
        opts = MulogOptions(
            outer_iters=iters,
            beta=beta,
            inner_iters=inner_iters,
            q=q,
            beta_schedule=beta_schedule,
            gamma=gamma,
            denoiser=handle,
            warm_start=warm_start,
            workers=threads,
            diagnostics=diag,
        )
    except InvalidInputError as e:
        raise typer.BadParameter(str(e))

    try:
        container = read_container(input_path)
    except (MulogError, OSError) as e:
        _fail(e)
    if method != "mulog" and container.dim != 1:
        raise typer.BadParameter(f"--method {method} needs single-channel (D=1) input, got D={container.dim}")
    looks = looks if looks is not None else container.looks
    if not looks > 0:
        raise typer.BadParameter("--looks must be positive")
    log.info(f"Despeckling {input_path} ({container.height}x{container.width}, D={container.dim}, L={looks}) with {method}/{handle.name}")

    try:
        if method == "mulog":
            result = run_mulog(container.data, looks, opts)
            estimate = CovContainer(result.sigma, looks, result.basis)
        else:
            intensity = container.data[..., 0, 0].real
            if method == "midal":
                r = midal(intensity, looks, opts)
            else:
                r = homomorphic(intensity, looks, handle)
            estimate = CovContainer(r[..., None, None], looks)
        write_container(out, estimate)
    except (MulogError, OSError) as e:
        _fail(e)
    log.info(f"Wrote estimate to {out}")


@app.command("evaluate")
def cmd_evaluate(
    est: Path = typer.Option(..., "--est", exists=True, dir_okay=False, help="Estimated container"),
    ref: Path = typer.Option(..., "--ref", exists=True, dir_okay=False, help="Reference (ground truth) container"),
    report: Optional[Path] = typer.Option(None, "--report", help="Write the report as a JSON line"),
):
    """PSNR (99th-quantile peak), SSIM and residual MAD of an estimate."""
    try:
        quality = evaluate(read_container(est).data, read_container(ref).data)
        if report is not None:
            record = {"est": str(est), "ref": str(ref), **quality.to_record()}
            atomic_write_bytes(report, (json.dumps(record, sort_keys=True) + "\n").encode("utf-8"))
    except (MulogError, OSError) as e:
        _fail(e)
    typer.echo(format_table({est.name: quality}))


@app.command("fig4")
def cmd_fig4(
    dims: str = typer.Option("2,4,8,16", "--dims", help="Comma-separated matrix dimensions"),
    qs: str = typer.Option("0,1,2,4,8,16", "--qs", help="Comma-separated rectangle counts"),
    trials: int = typer.Option(100, "--trials", help="Random matrices per dimension"),
    seed: int = typer.Option(0, "--seed", help="Seed of the Philox random stream"),
    out: Optional[Path] = typer.Option(None, "--out", help="CSV table to write"),
):
    """Relative quasi-Newton residual as a function of D and Q."""
    dim_list = _int_list(dims, "--dims")
    q_list = _int_list(qs, "--qs")
    if min(dim_list) < 1 or min(q_list) < 0 or trials < 1:
        raise typer.BadParameter("dimensions and trials must be >= 1, Q >= 0")
    try:
        table = residual_table(dim_list, q_list, trials, seed)
        text = table.to_csv()
        if out is not None:
            atomic_write_bytes(out, text.encode("utf-8"))
    except (MulogError, OSError) as e:
        _fail(e)
    typer.echo(text, nl=False)


@app.command("export")
def cmd_export(
    input_path: Path = typer.Option(..., "--in", exists=True, dir_okay=False, help="Container to display"),
    out: Path = typer.Option(..., "--out", help="PNG file to write"),
    kind: str = typer.Option("amplitude", "--map", help=f"One of {', '.join(MAPS)}"),
    gamma: float = typer.Option(0.7, "--gamma", help="Display gamma"),
):
    """8-bit PNG rendering of a container, saturated at mean + 3 std."""
    kind = kind.strip().lower()
    if kind not in MAPS:
        raise typer.BadParameter(f"--map must be one of {', '.join(MAPS)}")
    if not gamma > 0:
        raise typer.BadParameter("--gamma must be positive")
    try:
        c = read_container(input_path).data
        if kind in ("phase", "coherence", "pauli") and c.shape[-1] < (3 if kind == "pauli" else 2):
            raise typer.BadParameter(f"--map {kind} is not available for D={c.shape[-1]}")
        if kind == "amplitude":
            save_png(out, amplitude(c), gamma=gamma)
        elif kind == "span":
            save_png(out, span(c), gamma=gamma)
        elif kind == "phase":
            save_png(out, phase(c) + math.pi, threshold=2 * math.pi)
        elif kind == "coherence":
            save_png(out, coherence(c), threshold=1.0)
        else:
            save_png(out, np.sqrt(np.maximum(pauli_rgb(c), 0.0)), gamma=gamma)
    except (MulogError, OSError) as e:
        _fail(e)


if __name__ == "__main__":
    app()
