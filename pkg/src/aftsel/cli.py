"""Command-line entry point: ``simulate``, ``select``, and ``bench``.

Datasets travel as CSV with a ``time,status,x1,...,xp`` header; results
travel as canonical JSON (sorted keys, two-space indent, no timestamps),
so identical runs produce byte-identical files.  Options may also come
from a plain ``key = value`` config file (``#`` starts a comment); a flag
given on the command line always wins over the file.

Heavy imports happen inside the commands so that ``--threads`` can pin the
BLAS thread-pool environment variables before numpy first loads.
"""

from __future__ import annotations

import csv
import json
import math
import os
import sys

import click

from .errors import ConvergenceError, DatasetFormatError, NumericalError

_GENERATOR_NAMES = {"aft": "aft_lognormal", "cox": "cox_ph"}

# (cast, default) per config key; None default means "must be provided".
_SIM_KEYS = {
    "n": (int, None),
    "p": (int, None),
    "beta": (str, ""),
    "mu": (float, 0.0),
    "sigma": (float, 1.0),
    "censoring": (float, 0.0),
    "generator": (str, "aft"),
    "time_cap": (float, 20.0),
    "seed": (int, 0),
}
_PRIOR_KEYS = {
    "prior": (str, "pemom"),
    "tau": (float, 0.01),
    "phi": (float, 1.0),
    "order_r": (int, 1),
    "shape_v": (float, 1.0),
}
_TUNING_KEYS = {
    "k0": (int, 1),
    "corr_threshold": (float, 0.2),
    "m": (int, 50),
    "maxno": (int, 3),
    "search_cap": (int, 10),
}
_BENCH_KEYS = {"priors": (str, "pmom,pimom,pemom"), "replications": (int, 20)}


def load_dataset_csv(path, standardize=True):
    """Parse a ``time,status,x1,...,xp`` CSV into a SurvivalDataset.

    Columns are standardized to mean 0 / standard deviation 1 unless
    ``standardize`` is false (the raw scale is only useful for round-trip
    checks).  Errors name the offending row (1-based, header excluded) and
    column.
    """
    import numpy as np

    from .aft_core import SurvivalDataset

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetFormatError(f"{path}: empty file, expected a header row")
        if len(header) < 3 or header[0] != "time" or header[1] != "status":
            raise DatasetFormatError(
                f"{path}: header must be 'time,status,x1,...,xp', "
                f"got {','.join(header)!r}"
            )
        ncol = len(header)
        times = []
        status = []
        design_rows = []
        for rownum, row in enumerate(reader, start=1):
            if len(row) != ncol:
                raise DatasetFormatError(
                    f"{path}: row {rownum}: expected {ncol} fields, got {len(row)}"
                )
            t = _parse_cell(path, rownum, "time", row[0])
            if not (t > 0.0):
                raise DatasetFormatError(
                    f"{path}: row {rownum}, column 'time': must be a positive "
                    f"real, got {row[0].strip()!r}"
                )
            s = _parse_cell(path, rownum, "status", row[1])
            if s not in (0.0, 1.0):
                raise DatasetFormatError(
                    f"{path}: row {rownum}, column 'status': must be 0 or 1, "
                    f"got {row[1].strip()!r}"
                )
            xs = [
                _parse_cell(path, rownum, header[2 + j], cell)
                for j, cell in enumerate(row[2:])
            ]
            times.append(t)
            status.append(int(s))
            design_rows.append(xs)
    if not times:
        raise DatasetFormatError(f"{path}: no data rows")
    try:
        data = SurvivalDataset(
            design=np.array(design_rows),
            times=np.array(times),
            status=np.array(status),
        )
        return data.standardized() if standardize else data
    except ValueError as err:
        raise DatasetFormatError(f"{path}: {err}") from err


def _parse_cell(path, rownum, colname, cell):
    try:
        value = float(cell)
    except ValueError:
        raise DatasetFormatError(
            f"{path}: row {rownum}, column {colname!r}: not a number, "
            f"got {cell.strip()!r}"
        ) from None
    if not math.isfinite(value):
        raise DatasetFormatError(
            f"{path}: row {rownum}, column {colname!r}: must be finite, "
            f"got {cell.strip()!r}"
        )
    return value


def write_dataset_csv(data, path):
    """Write a dataset in the interchange format, full float precision."""
    out = sys.stdout if path in (None, "-") else open(path, "w", newline="",
                                                      encoding="utf-8")
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["time", "status"] + [f"x{j + 1}" for j in range(data.p)])
        for i in range(data.n):
            writer.writerow(
                [repr(float(data.times[i])), int(data.status[i])]
                + [repr(float(v)) for v in data.design[i]]
            )
    finally:
        if out is not sys.stdout:
            out.close()


def emit_report_json(report, path):
    """Write a report (anything with ``to_dict``, or a dict) as canonical
    JSON: sorted keys, two-space indent, trailing newline."""
    payload = report.to_dict() if hasattr(report, "to_dict") else report
    text = json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _parse_config_file(path, known):
    """Read ``key = value`` lines; keys must belong to this command."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(
                    f"{path}: line {lineno}: expected 'key = value', got {line!r}"
                )
            key, _, val = line.partition("=")
            key = key.strip().replace("-", "_")
            val = val.strip()
            if key not in known:
                raise ValueError(
                    f"{path}: line {lineno}: unknown option {key!r} "
                    f"(expected one of: {', '.join(sorted(known))})"
                )
            values[key] = val
    return values


def _resolve(flags, config_path, keys):
    """Merge flags > config file > defaults; cast file values; fail on a
    missing required option."""
    file_values = _parse_config_file(config_path, keys) if config_path else {}
    resolved = {}
    for key, (cast, default) in keys.items():
        if flags.get(key) is not None:
            resolved[key] = flags[key]
        elif key in file_values:
            try:
                resolved[key] = cast(file_values[key])
            except ValueError:
                raise ValueError(
                    f"config option {key!r}: cannot read {file_values[key]!r} "
                    f"as {cast.__name__}"
                ) from None
        elif default is not None:
            resolved[key] = default
        else:
            raise ValueError(f"missing required option --{key.replace('_', '-')}")
    return resolved


def _parse_beta(text):
    """Sparse coefficients: 'INDEX=VALUE,INDEX=VALUE,...' (0-based)."""
    beta = {}
    if not text.strip():
        return beta
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        key, sep, val = part.partition("=")
        if not sep:
            raise ValueError(f"--beta entry {part!r} must look like INDEX=VALUE")
        try:
            j = int(key)
            v = float(val)
        except ValueError:
            raise ValueError(
                f"--beta entry {part!r} must be an integer index and a real value"
            ) from None
        if j in beta:
            raise ValueError(f"--beta names index {j} twice")
        beta[j] = v
    return beta


def _sim_config(resolved):
    from .simgen import SimConfig

    gen = resolved["generator"]
    if gen not in _GENERATOR_NAMES:
        raise ValueError(
            f"generator must be one of {sorted(_GENERATOR_NAMES)}, got {gen!r}"
        )
    return SimConfig(
        n=resolved["n"],
        p=resolved["p"],
        beta_true=_parse_beta(resolved["beta"]),
        mu_true=resolved["mu"],
        sigma_true=resolved["sigma"],
        target_censoring=resolved["censoring"],
        generator=_GENERATOR_NAMES[gen],
        time_cap=resolved["time_cap"],
        seed=resolved["seed"],
    )


def _prior_config(resolved, family=None, tau=None):
    from .nlp_priors import PriorConfig

    return PriorConfig(
        family=family if family is not None else resolved["prior"],
        tau=tau if tau is not None else resolved["tau"],
        phi=resolved["phi"],
        order_r=resolved["order_r"],
        shape_v=resolved["shape_v"],
    )


def _tuning_params(resolved):
    from .driver import TuningParams

    return TuningParams(
        k0=resolved["k0"],
        corr_threshold=resolved["corr_threshold"],
        m=resolved["m"],
        maxno=resolved["maxno"],
        search_cap=resolved["search_cap"],
    )


def _parse_priors(text, resolved):
    """'family[:tau],family[:tau],...'; entries without :tau use --tau."""
    priors = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        family, sep, tau_text = part.partition(":")
        tau = None
        if sep:
            try:
                tau = float(tau_text)
            except ValueError:
                raise ValueError(
                    f"--priors entry {part!r}: cannot read {tau_text!r} as a tau"
                ) from None
        priors.append(_prior_config(resolved, family=family.strip(), tau=tau))
    if not priors:
        raise ValueError("--priors must name at least one prior family")
    return priors


def _cap_threads(threads):
    """Pin BLAS pool sizes; must run before numpy is first imported."""
    if threads is None:
        return
    if threads < 1:
        raise ValueError("--threads must be >= 1")
    for var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
        "VECLIB_MAXIMUM_THREADS",
    ):
        os.environ[var] = str(threads)


def _log_config(resolved):
    click.echo(
        "config: " + json.dumps(resolved, sort_keys=True, default=str), err=True
    )


def _run(body):
    try:
        body()
    except (
        DatasetFormatError,
        ConvergenceError,
        NumericalError,
        ValueError,
        OSError,
        RuntimeError,
    ) as err:
        click.echo("error: " + " ".join(str(err).split()), err=True)
        sys.exit(1)


@click.group()
def main():
    """Variable selection for censored survival data under non-local priors."""


def _sim_options(fn):
    for deco in reversed(
        [
            click.option("--n", type=int, default=None, help="Subjects."),
            click.option("--p", type=int, default=None, help="Covariates."),
            click.option("--beta", type=str, default=None,
                         help="True coefficients, 'INDEX=VALUE,...' (0-based)."),
            click.option("--mu", type=float, default=None,
                         help="True intercept (default 0)."),
            click.option("--sigma", type=float, default=None,
                         help="True scale (default 1)."),
            click.option("--censoring", type=float, default=None,
                         help="Target censored fraction in [0,1) (default 0)."),
            click.option("--generator", type=click.Choice(["aft", "cox"]),
                         default=None,
                         help="Event-time generator (default aft)."),
            click.option("--time-cap", type=float, default=None,
                         help="Time scale cap (default 20)."),
            click.option("--seed", type=int, default=None,
                         help="Generator seed (default 0)."),
        ]
    ):
        fn = deco(fn)
    return fn


def _prior_options(fn):
    for deco in reversed(
        [
            click.option("--prior", type=click.Choice(["pmom", "pimom", "pemom"]),
                         default=None, help="Prior family (default pemom)."),
            click.option("--tau", type=float, default=None,
                         help="Prior scale (default 0.01)."),
            click.option("--phi", type=float, default=None,
                         help="Dispersion multiplier (default 1)."),
            click.option("--order-r", type=int, default=None,
                         help="pmom order (default 1)."),
            click.option("--shape-v", type=float, default=None,
                         help="pimom shape (default 1)."),
        ]
    ):
        fn = deco(fn)
    return fn


def _tuning_options(fn):
    for deco in reversed(
        [
            click.option("--k0", type=int, default=None,
                         help="Leaders per iteration (default 1)."),
            click.option("--corr-threshold", type=float, default=None,
                         help="Leading-set |correlation| cutoff (default 0.2)."),
            click.option("--m", type=int, default=None,
                         help="Target selection size (default 50)."),
            click.option("--maxno", type=int, default=None,
                         help="Max consecutive empty iterations (default 3)."),
            click.option("--search-cap", type=int, default=None,
                         help="Exhaustive-enumeration cap (default 10)."),
        ]
    ):
        fn = deco(fn)
    return fn


@main.command()
@_sim_options
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="key = value config file; flags override.")
@click.option("--out", type=str, default=None,
              help="Output CSV path ('-' or absent: stdout).")
def simulate(config_path, out, **flags):
    """Generate one synthetic dataset and write it as CSV."""

    def body():
        resolved = _resolve(flags, config_path, _SIM_KEYS)
        _log_config(resolved)
        from .simgen import simulate as run_sim

        data = run_sim(_sim_config(resolved))
        write_dataset_csv(data, out)

    _run(body)


@main.command()
@_prior_options
@_tuning_options
@click.option("--data", "data_path", type=click.Path(exists=True),
              required=True, help="Input dataset CSV.")
@click.option("--seed", type=int, default=None,
              help="Recorded in the output; the run itself is deterministic.")
@click.option("--threads", type=int, default=None,
              help="Cap BLAS worker threads.")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="key = value config file; flags override.")
@click.option("--out", type=str, default=None,
              help="Output JSON path ('-' or absent: stdout).")
def select(config_path, data_path, out, threads, **flags):
    """Run the iterative selection loop on a CSV dataset."""

    def body():
        _cap_threads(threads)
        keys = {**_PRIOR_KEYS, **_TUNING_KEYS, "seed": (int, 0)}
        resolved = _resolve(flags, config_path, keys)
        resolved["data"] = data_path
        _log_config(resolved)
        from .driver import run_selection

        data = load_dataset_csv(data_path)
        result = run_selection(
            data, _tuning_params(resolved), _prior_config(resolved)
        )
        payload = result.to_dict()
        payload["config"] = resolved
        emit_report_json(payload, out)

    _run(body)


@main.command()
@_sim_options
@_prior_options
@_tuning_options
@click.option("--priors", type=str, default=None,
              help="Comma list 'family[:tau],...' (default pmom,pimom,pemom).")
@click.option("--replications", type=int, default=None,
              help="Replications per prior (default 20).")
@click.option("--threads", type=int, default=None,
              help="Cap BLAS worker threads.")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="key = value config file; flags override.")
@click.option("--out", type=str, default=None,
              help="Output JSON path ('-' or absent: stdout).")
def bench(config_path, out, threads, **flags):
    """Simulate, select under each prior, and report TPR/FDR."""

    def body():
        _cap_threads(threads)
        keys = {**_SIM_KEYS, **_PRIOR_KEYS, **_TUNING_KEYS, **_BENCH_KEYS}
        resolved = _resolve(flags, config_path, keys)
        _log_config(resolved)
        from .bench import run_benchmark

        report = run_benchmark(
            _sim_config(resolved),
            _tuning_params(resolved),
            _parse_priors(resolved["priors"], resolved),
            resolved["replications"],
        )
        emit_report_json(report, out)

    _run(body)


if __name__ == "__main__":
    main()
