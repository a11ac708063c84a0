"""`crn-figures render` command."""

from __future__ import annotations

import sys

import click

from .plots import KINDS, FigureError, render


@click.group()
def cli():
    """Render figures from crn-ude experiment outputs."""


@cli.command("render")
@click.option("--kind", "kind", required=True,
              type=click.Choice(list(KINDS)),
              help="Figure type to render.")
@click.option("--in", "inputs", required=True, multiple=True,
              type=click.Path(),
              help="Input file(s): the kind's CSV first, then optional "
                   "companions (profile JSON sidecar, noisy-data CSV).")
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Output directory for the SVG and PNG.")
@click.option("--truth", type=float, default=None,
              help="Ground-truth parameter value to mark on profile plots.")
@click.option("--stem", default=None, help="Output file stem override.")
def render_cmd(kind, inputs, out_dir, truth, stem):
    """Render one figure from crn-ude output files."""
    try:
        paths = render(kind, list(inputs), out_dir, truth=truth, stem=stem)
    except FigureError as exc:
        raise click.ClickException(str(exc))
    for path in paths:
        click.echo(str(path))


def run(argv) -> int:
    try:
        cli.main(args=list(argv), standalone_mode=False)
        return 0
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.exceptions.Abort:
        return 1


def main():
    sys.exit(run(sys.argv[1:]))
