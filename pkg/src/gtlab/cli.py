"""Command line entry point ``gtl``.

Usage::

    gtl --list-checks
    gtl verify-structure --seed 7 --out results/
    gtl kernels --config configs/kernels_sphere.yaml --format jsonl
    gtl cone --config configs/cone.yaml

Each subcommand runs one verification suite, prints one PASS/FAIL line per
check and writes ``summary.<fmt>`` plus one table file per plot series into
``<out>/<suite>/``. Output is byte-identical for identical inputs.

Exit codes: 0 when every check passes, 1 when any check fails, 2 on a
configuration error. ``GTL_OUT_DIR`` overrides the configured output directory
(``--out`` still wins).
"""

from __future__ import annotations

import csv
import io
import json
import os
import sys
from pathlib import Path

import click
import yaml

from .errors import ConfigError
from .suites import SUITE_CHECKS, SUITES, RunConfig, SuiteResult, run_suite

__all__ = ["main", "load_config", "write_result"]

DEFAULT_OUT = "gtl_out"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def load_config(path: str | None) -> dict:
    """Read a YAML mapping; an empty file is an empty config."""
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fp:
            data = yaml.safe_load(fp)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def _table_text(rows: list[dict], fmt: str) -> str:
    if fmt == "jsonl":
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def write_result(result: SuiteResult, out_dir: Path, fmt: str) -> list[Path]:
    """Write the summary and every table; returns the written paths."""
    target = out_dir / result.suite
    target.mkdir(parents=True, exist_ok=True)
    written = []
    files = {"summary": [c.row(result.suite) for c in result.checks], **result.tables}
    for name, rows in sorted(files.items()):
        path = target / f"{name}.{fmt}"
        path.write_text(_table_text(rows, fmt), encoding="utf-8")
        written.append(path)
    return written


def _resolve_out(flag: str | None, cfg: RunConfig) -> Path:
    return Path(flag or os.environ.get("GTL_OUT_DIR") or cfg.out_dir or DEFAULT_OUT)


def _list_checks(suites) -> None:
    for name in suites:
        click.echo(f"{name}: {SUITE_CHECKS[name]}")


def _run(suite: str, config: str | None, out: str | None, fmt: str | None, seed: int | None) -> int:
    try:
        data = load_config(config)
        declared = data.pop("suite", suite)
        if declared != suite:
            raise ConfigError(f"config is for suite {declared!r}, not {suite!r}")
        cfg = RunConfig.from_mapping(suite, data, seed=seed, fmt=fmt)
        result = run_suite(cfg)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    for c in result.checks:
        line = f"{'PASS' if c.passed else 'FAIL'} {suite}: {c.name} value={c.row(suite)['value']}"
        click.echo(line + (f" ({c.detail})" if c.detail else ""))
    paths = write_result(result, _resolve_out(out, cfg), cfg.fmt)
    npass = sum(c.passed for c in result.checks)
    click.echo(f"{suite}: {npass}/{len(result.checks)} checks passed; wrote {len(paths)} files to {paths[0].parent}")
    return EXIT_OK if result.passed else EXIT_FAIL


def _make_command(suite: str) -> click.Command:
    @click.command(name=suite, help=f"Run the {suite} suite: {SUITE_CHECKS[suite]}.")
    @click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), help="YAML config file.")
    @click.option("--out", "out", type=click.Path(file_okay=False), help="Output directory.")
    @click.option("--format", "fmt", type=click.Choice(["csv", "jsonl"]), default=None, help="Table format.")
    @click.option("--seed", type=int, default=None, help="RNG seed (overrides the config).")
    @click.option("--list-checks", is_flag=True, help="List this suite's checks and exit.")
    def command(config, out, fmt, seed, list_checks):
        if list_checks:
            _list_checks([suite])
            sys.exit(EXIT_OK)
        sys.exit(_run(suite, config, out, fmt, seed))

    return command


@click.group(invoke_without_command=True)
@click.option("--list-checks", is_flag=True, help="List every suite and its checks.")
@click.pass_context
def main(ctx: click.Context, list_checks: bool) -> None:
    """Numerical verification suites for geodesic-flow transport structures."""
    if list_checks:
        _list_checks(SUITES)
        ctx.exit(EXIT_OK)
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


for _name in SUITES:
    main.add_command(_make_command(_name))


if __name__ == "__main__":
    main()
