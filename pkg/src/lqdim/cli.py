"""``lqdim <experiment> --config path.json [--out dir] [--levels a..b] [--q list] [--seed n] [--max-work N]``.

Exit codes: 0 success, 2 precondition unmet (report still written),
3 invalid configuration, 4 resource cap exceeded.
"""

from __future__ import annotations

import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import click

from .errors import DegenerateInputError, InvalidArgumentError, ResourceLimitError, SpecInvalidError
from .experiments import CSV_COLUMNS, EXPERIMENTS, config_from_dict, parse_levels, run

EXIT_OK = 0
EXIT_PRECONDITION = 2
EXIT_CONFIG = 3
EXIT_RESOURCE = 4


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as f:
        f.write(text)
    os.replace(tmp, path)


def write_outputs(report, out: Path):
    _atomic_write(out / "report.json", json.dumps(report.to_dict(), indent=2) + "\n")
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(CSV_COLUMNS)
    for row in report.csv_rows():
        w.writerow(row)
    _atomic_write(out / "table.csv", buf.getvalue())


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.argument("experiment", type=click.Choice([e.lower().replace("_", "-") for e in EXPERIMENTS], case_sensitive=False))
@click.option("--config", "config_path", type=click.Path(dir_okay=False), required=True, help="ExperimentConfig JSON file.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Output directory (default: config 'out' or '.').")
@click.option("--levels", default=None, help="Level range 'a..b' or list 'a,b,c'.")
@click.option("--q", "q_list", default=None, help="Comma-separated q values (each > 1).")
@click.option("--seed", type=int, default=None)
@click.option("--max-work", type=int, default=None, help="Convolution work cap (also LQDIM_MAX_WORK).")
def main(experiment, config_path, out_dir, levels, q_list, seed, max_work):
    """Run one experiment and write report.json and table.csv."""
    try:
        with open(config_path) as f:
            d = json.load(f)
        if not isinstance(d, dict):
            raise SpecInvalidError("config must be a JSON object", "schema", "$")
        if levels is not None:
            d["levels"] = list(parse_levels(levels))
        if q_list is not None:
            d["q"] = [float(x) for x in q_list.split(",") if x.strip()]
        if seed is not None:
            d["seed"] = seed
        if max_work is not None:
            d["max_work"] = max_work
        out = Path(out_dir or d.pop("out", ".") or ".")
        d.pop("out", None)
        cfg = config_from_dict(d, experiment.upper().replace("-", "_"))
    except (OSError, json.JSONDecodeError, SpecInvalidError, InvalidArgumentError, ValueError) as e:
        click.echo(f"invalid config: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        report = run(cfg)
    except ResourceLimitError as e:
        click.echo(f"resource cap: {e}", err=True)
        sys.exit(EXIT_RESOURCE)
    except DegenerateInputError as e:
        click.echo(f"precondition unmet: {e}", err=True)
        sys.exit(EXIT_PRECONDITION)
    except (SpecInvalidError, InvalidArgumentError) as e:
        click.echo(f"invalid config: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    write_outputs(report, out)
    click.echo(f"{report.experiment}: {report.status}" + (f" ({report.message})" if report.message else ""))
    for k, v in report.summary.items():
        if k in ("stall", "improvement", "regularity", "thickness"):
            continue
        click.echo(f"  {k}: {json.dumps(v, default=str)}")
    click.echo(f"wrote {out / 'report.json'} and {out / 'table.csv'}")
    sys.exit(EXIT_OK if report.ok else EXIT_PRECONDITION)


if __name__ == "__main__":
    main()
