"""Command-line front end: capacity tables, single runs, and the mode x jam matrix.

Exit codes: 0 success, 2 usage error, 3 scenario error.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from .phy import (ALL_PHYS, DEFAULT_OVERHEAD_BYTES, DEFAULT_RAMP_UP_US, PhyMode,
                  capacity_csv, capacity_sweep)
from .scenario import ScenarioConfig, ScenarioError, load_scenario
from .simengine import matrix_csv, run, run_matrix, summarize_matrix

EXIT_SCENARIO = 3


def parse_int_range(text: str) -> list[int]:
    """``"3"``, ``"1-8"`` or ``"1,2,5-7"`` -> sorted unique ints."""
    values: set[int] = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            a, b = part.split("-", 1) if not part.startswith("-") else (part, "")
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError(f"empty range {part!r}")
            values.update(range(lo, hi + 1))
        else:
            values.add(int(part))
    if not values:
        raise ValueError("empty list")
    return sorted(values)


class IntRange(click.ParamType):
    name = "range"

    def convert(self, value, param, ctx):
        if isinstance(value, list):
            return value
        try:
            return parse_int_range(value)
        except ValueError as exc:
            self.fail(f"{value!r} is not an integer list or range ({exc})", param, ctx)


class PhyChoice(click.ParamType):
    name = "phy"

    def convert(self, value, param, ctx):
        if isinstance(value, PhyMode):
            return value
        try:
            return PhyMode.parse(value)
        except ValueError as exc:
            self.fail(str(exc), param, ctx)


def _fail_scenario(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(EXIT_SCENARIO)


def _load(path: str, ctx: click.Context, overrides: tuple[str, ...]) -> ScenarioConfig:
    try:
        cfg = load_scenario(path)
        for item in overrides:
            if "=" not in item:
                raise ScenarioError(f"override {item!r} must be section.key=value")
            key, _, value = item.partition("=")
            cfg = cfg.set(key.strip(), value)
        if ctx.obj["seed"] is not None:
            cfg = cfg.with_overrides(run={"seed": ctx.obj["seed"]})
        cfg.validate()
    except (ScenarioError, ValueError, OSError) as exc:
        _fail_scenario(exc)
    return cfg


def _out_dir(ctx: click.Context, cfg: ScenarioConfig) -> Path:
    if ctx.obj["out"]:
        return Path(ctx.obj["out"])
    if cfg.output.dir:
        base = Path(cfg.base_dir) if cfg.base_dir else Path.cwd()
        return base / cfg.output.dir
    return Path.cwd()


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--out", "out", type=click.Path(file_okay=False), default=None,
              help="Output directory for CSVs.")
@click.option("--quiet", is_flag=True, help="Suppress the one-line summaries.")
@click.pass_context
def main(ctx: click.Context, seed: int | None, out: str | None, quiet: bool) -> None:
    """Simulate CT floods inside a TSCH slotframe against a 6TiSCH-minimal baseline."""
    ctx.ensure_object(dict)
    ctx.obj.update(seed=seed, out=out, quiet=quiet)
    logging.basicConfig(level=logging.WARNING if quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--phy", "phys", type=PhyChoice(), multiple=True,
              help=f"PHY name ({', '.join(p.name for p in PhyMode)}); repeatable.")
@click.option("--all-phys", is_flag=True, help="Sweep all five PHYs.")
@click.option("--ntx", type=IntRange(), default="2", show_default=True, help="N_Tx value or range.")
@click.option("--nh", type=IntRange(), default="3", show_default=True, help="N_H value or range.")
@click.option("--tsf-ms", type=click.FloatRange(min=0, min_open=True), default=10.0,
              show_default=True, help="Slotframe length available to CT, ms.")
@click.option("--payload", type=click.IntRange(min=1), default=64, show_default=True)
@click.option("--ramp-up-us", type=click.IntRange(min=0), default=DEFAULT_RAMP_UP_US, show_default=True)
@click.option("--overhead", type=click.IntRange(min=0), default=DEFAULT_OVERHEAD_BYTES, show_default=True)
@click.pass_context
def capacity(ctx, phys, all_phys, ntx, nh, tsf_ms, payload, ramp_up_us, overhead):
    """Print (and optionally write) the messages-per-slotframe table."""
    if all_phys:
        phys = ALL_PHYS
    elif not phys:
        phys = (PhyMode.LE_2M,)
    if min(ntx) < 1 or min(nh) < 0:
        raise click.BadParameter("n_tx must be >= 1 and n_h >= 0")
    t_sf = round(tsf_ms * 1000)
    rows = capacity_sweep(t_sf, payload, ntx, nh, phys, ramp_up_us, overhead)
    text = capacity_csv(rows, f"t_sf_us={t_sf} payload={payload} ramp_up_us={ramp_up_us} "
                              f"overhead={overhead}")
    if ctx.obj["out"]:
        out = Path(ctx.obj["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "capacity.csv").write_text(text)
    click.echo(text, nl=False)


@main.command()
@click.argument("scenario")
@click.option("--set", "overrides", multiple=True, metavar="SECTION.KEY=VALUE",
              help="Override one scenario key; repeatable.")
@click.option("--mode", type=click.Choice(["sixpp", "baseline"]), default=None)
@click.pass_context
def run_cmd(ctx, scenario, overrides, mode):
    """Run one scenario and write events.csv and summary.csv."""
    if mode:
        overrides = overrides + (f"run.mode={mode}",)
    cfg = _load(scenario, ctx, overrides)
    try:
        result = run(cfg)
    except ScenarioError as exc:
        _fail_scenario(exc)
    out = _out_dir(ctx, cfg)
    result.write(out)
    if not ctx.obj["quiet"]:
        m = result.metrics
        rel = result.reliability()
        lat = result.latencies_ms()
        click.echo(
            f"{cfg.mode.short} seed={cfg.run.seed} nodes={len(result.nodes)} "
            f"associated={len(m.association_latency)} dao_acked={len(m.dao_delta)} "
            f"reliability={'-' if rel is None else f'{100 * rel:.2f}%'} "
            f"mean_latency_ms={'-' if not lat else f'{sum(lat) / len(lat):.2f}'} "
            f"out={out}")


run_cmd.name = "run"


@main.command()
@click.argument("scenario")
@click.option("--seeds", type=IntRange(), default="1-20", show_default=True)
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--set", "overrides", multiple=True, metavar="SECTION.KEY=VALUE")
@click.pass_context
def matrix(ctx, scenario, seeds, workers, overrides):
    """Run the {sixpp, baseline} x {no jam, jam} comparison over many seeds."""
    cfg = _load(scenario, ctx, overrides)
    try:
        rows = run_matrix(cfg, seeds, workers=workers)
    except ScenarioError as exc:
        _fail_scenario(exc)
    text = matrix_csv(rows, cfg, seeds)
    out = _out_dir(ctx, cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "matrix.csv").write_text(text)
    if not ctx.obj["quiet"]:
        for cell in summarize_matrix(rows):
            click.echo(f"{cell.mode:8s} jam={int(cell.jam)} runs={cell.runs} "
                       f"reliability={_num(cell.reliability_pct)}% "
                       f"mean_latency_ms={_num(cell.mean_latency_ms)} "
                       f"sd={_num(cell.latency_sd_ms)}")


def _num(v: float | None) -> str:
    return "-" if v is None else f"{v:.2f}"


@main.command()
@click.argument("scenario")
@click.option("--set", "overrides", multiple=True, metavar="SECTION.KEY=VALUE")
@click.pass_context
def validate(ctx, scenario, overrides):
    """Parse and validate a scenario without running it."""
    cfg = _load(scenario, ctx, overrides)
    if not ctx.obj["quiet"]:
        click.echo(f"ok {cfg.mode.short} config_hash={cfg.config_hash()}")


@main.command("scenarios")
def list_scenarios() -> None:
    """List the bundled scenario names."""
    from .scenario import bundled_scenarios
    for name in bundled_scenarios():
        click.echo(name)


if __name__ == "__main__":
    main()
