"""Command-line front end: code search, fidelity curves, spin-chain transfer, FT checks.

Exit codes: 0 success, 1 usage error, 2 verification failure.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .channel_core import (
    DampingDirection,
    make_amplitude_damping,
    make_named,
    make_random_channel,
    make_rotated_amplitude_damping,
    identity_channel,
    tensor_power,
)
from .qec_petz import Codespace, petz_fidelity_loss, worst_case_fidelity

EXIT_USAGE = 1
EXIT_VERIFY = 2
HEADER = f"# aqec {__version__}"
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


class VerificationFailed(click.ClickException):
    exit_code = EXIT_VERIFY


def _read_config(path: str) -> dict:
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.UsageError(f"config line without '=': {raw!r}")
        key, val = (x.strip() for x in line.split("=", 1))
        out[key.replace("-", "_")] = val
    return out


def _default_map(cmd: click.Command, flat: dict) -> dict:
    if isinstance(cmd, click.Group):
        return {name: _default_map(sub, flat) for name, sub in cmd.commands.items()}
    names = {p.name for p in cmd.params}
    return {k: v for k, v in flat.items() if k in names}


def _emit_csv(header: list, rows, out: str | None):
    lines = [HEADER, ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _emit_json(obj, out: str | None):
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def _single_channel(channel, gamma, theta, phi, alpha, seed, name):
    if channel == "ad":
        if gamma is None:
            raise click.UsageError("--gamma is required for --channel ad")
        return make_amplitude_damping(gamma), {"channel": "ad", "gamma": gamma}
    if channel == "rad":
        if gamma is None or theta is None or phi is None:
            raise click.UsageError("--gamma, --theta and --phi are required for --channel rad")
        ch = make_rotated_amplitude_damping(gamma, DampingDirection(theta, phi))
        return ch, {"channel": "rad", "gamma": gamma, "theta": theta, "phi": phi}
    if channel == "random":
        if alpha is None:
            raise click.UsageError("--alpha is required for --channel random")
        return make_random_channel(alpha, seed), {"channel": "random", "alpha": alpha, "seed": seed}
    if channel == "named":
        if name is None or gamma is None:
            raise click.UsageError("--name and --gamma (noise strength) are required for --channel named")
        return make_named(name, gamma), {"channel": "named", "name": name, "p": gamma}
    raise click.UsageError(f"unknown channel {channel}")


def channel_options(f):
    opts = [
        click.option("--channel", type=click.Choice(["ad", "rad", "random", "named"]), default="ad", show_default=True),
        click.option("--gamma", "--p", "gamma", type=float, default=None, help="damping or noise strength"),
        click.option("--theta", type=float, default=None),
        click.option("--phi", type=float, default=None),
        click.option("--alpha", type=float, default=None),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--name", type=click.Choice(["bitflip", "phaseflip", "depolarizing"]), default=None),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="flat key=value file supplying option defaults")
@click.version_option(__version__, prog_name="aqec")
@click.pass_context
def main_group(ctx, config_path):
    """Channel-adapted quantum codes, spin-chain transfer and FT gadgets."""
    if config_path:
        ctx.default_map = _default_map(ctx.command, _read_config(config_path))


@main_group.command("search")
@channel_options
@click.option("--n", "n_qubits", type=click.IntRange(2, 4), default=4, show_default=True)
@click.option("--mode", type=click.Choice(["structured", "structured-local", "unstructured"]),
              default="structured", show_default=True)
@click.option("--restarts", type=click.IntRange(1), default=20, show_default=True)
@click.option("--max-iters", type=click.IntRange(1), default=50000, show_default=True)
@click.option("--out", type=str, default=None, help="output prefix for <out>.json and <out>.csv")
def cmd_search(channel, gamma, theta, phi, alpha, seed, name, n_qubits, mode, restarts, max_iters, out):
    """Nelder-Mead search over Cartan encodings with Petz recovery."""
    from .code_library import leung_4qubit
    from .optimizer import NMConfig, SearchConfig, run_search

    ch1, params = _single_channel(channel, gamma, theta, phi, alpha, seed, name)
    smode = {"structured": "structured_trivial", "structured-local": "structured_nontrivial",
             "unstructured": "unstructured"}[mode]
    cfg = SearchConfig(mode=smode, n_qubits=n_qubits, nm=NMConfig(max_iters=max_iters), restarts=restarts,
                       seed=seed, final_local=HADAMARD if smode == "structured_nontrivial" else None)
    ch = tensor_power(ch1, n_qubits)
    res = run_search(ch, cfg)
    payload = json.loads(res.to_json(params))
    if n_qubits == 4:
        payload["baseline_leung_loss"] = petz_fidelity_loss(ch, leung_4qubit())
    if out:
        _emit_json(payload, f"{out}.json")
        Path(f"{out}.csv").write_text(res.trace_csv())
        click.echo(f"wrote {out}.json and {out}.csv (loss {res.fidelity_loss:.6e})")
    else:
        _emit_json(payload, None)


@main_group.command("fidelity-curve")
@click.option("--code", "code_name", type=str, default="leung", show_default=True,
              help="leung, 3q, bitflip, 5q, table:<name> or file:<path>")
@channel_options
@click.option("--pmin", type=float, default=0.0, show_default=True)
@click.option("--pmax", type=float, default=0.2, show_default=True)
@click.option("--steps", type=click.IntRange(2), default=21, show_default=True)
@click.option("--out", type=str, default=None)
def cmd_fidelity_curve(code_name, channel, gamma, theta, phi, alpha, seed, name, pmin, pmax, steps, out):
    """CSV of worst-case fidelity versus noise strength under Petz recovery."""
    from .code_library import get_code

    try:
        code = get_code(code_name)
    except (KeyError, ValueError, FileNotFoundError) as exc:
        raise click.UsageError(str(exc)) from exc
    if not 0 <= pmin <= pmax <= 1:
        raise click.UsageError("need 0 <= pmin <= pmax <= 1")
    bare = Codespace(np.eye(2, dtype=complex))
    rows = []
    for p in np.linspace(pmin, pmax, steps):
        p = float(p)
        ch1, _ = _single_channel(channel, p, theta, phi, p if channel == "random" else alpha, seed, name)
        loss = petz_fidelity_loss(tensor_power(ch1, code.n_qubits), code)
        unenc = worst_case_fidelity(ch1, identity_channel(2), bare)
        rows.append((p, 1.0 - loss, unenc))
    _emit_csv(["p", "F2_min", "F2_unencoded"], rows, out)


@main_group.group("spin")
def spin():
    """Spin-chain state transfer."""


def chain_options(f):
    opts = [
        click.option("--N", "N", type=click.IntRange(2), default=8, show_default=True),
        click.option("--s", "s", type=int, default=1, show_default=True),
        click.option("--r", "r", type=int, default=None, help="receiver site (default N)"),
        click.option("--tmax", type=float, default=4000.0, show_default=True),
        click.option("--dt", type=float, default=0.01, show_default=True),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _chain(N, s, r):
    from .spin_chain import xxx_chain

    try:
        return xxx_chain(N, s, r)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc


@spin.command("ideal")
@chain_options
@click.option("--out", type=str, default=None)
def spin_ideal(N, s, r, tmax, dt, out):
    """Optimal transfer time and worst-case fidelities with and without QEC."""
    from .code_library import leung_4qubit, perfect_5qubit
    from .spin_chain import aqec_transfer_fidelity, noqec_fidelity, optimal_time

    rec = optimal_time(_chain(N, s, r), tmax, dt)
    row = (N, rec.t, rec.magnitude, noqec_fidelity(rec), aqec_transfer_fidelity(rec, leung_4qubit()),
           aqec_transfer_fidelity(rec, perfect_5qubit(), recovery="stabilizer"))
    _emit_csv(["N", "t_star", "abs_f", "F2_noqec", "F2_4q", "F2_5q"], [row], out)


@spin.command("repeated")
@chain_options
@click.option("--every", type=click.IntRange(2), default=8, show_default=True, help="segment length in sites")
@click.option("--lengths", type=str, default="8,15,22,29,36,43,50,57,64", show_default=True)
@click.option("--out", type=str, default=None)
def spin_repeated(N, s, r, tmax, dt, every, lengths, out):
    """Relay transfer with a QEC round after every segment."""
    from .spin_chain import repeated_transfer, xxx_chain

    seg = xxx_chain(every)
    rows = []
    for total in (int(x) for x in lengths.split(",")):
        res = repeated_transfer(seg, total, tmax, dt)
        rows.append((total, every, res["hops"], res["t_hop"], res["p"], res["F2_noqec"],
                     res["F2_repeated_formula"], res["F2_repeated_exact"]))
    _emit_csv(["length", "every", "hops", "t_hop", "p", "F2_noqec", "F2_repeated_formula",
               "F2_repeated_exact"], rows, out)


def disorder_options(f):
    opts = [
        click.option("--delta", type=float, default=0.001, show_default=True),
        click.option("--samples", type=click.IntRange(1), default=10000, show_default=True),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--t", "t_fixed", type=float, default=None,
                     help="transfer time (default: optimum over the disorder horizon)"),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _disorder_time(spec, t_fixed, dt):
    from .spin_chain import DISORDER_HORIZON, optimal_time, transition_amplitude

    if t_fixed is not None:
        return transition_amplitude(spec, t_fixed)
    return optimal_time(spec, DISORDER_HORIZON, dt)


@spin.command("disorder")
@chain_options
@disorder_options
@click.option("--fidelity/--no-fidelity", default=False, help="also average the AQEC worst-case fidelity")
@click.option("--profile/--no-profile", default=False, help="emit disorder-averaged |f_n1|^2 per site instead")
@click.option("--out", type=str, default=None)
def spin_disorder(N, s, r, tmax, dt, delta, samples, seed, t_fixed, fidelity, profile, out):
    """Monte Carlo statistics of the transfer amplitude under coupling disorder."""
    from .code_library import leung_4qubit
    from .spin_chain import DisorderSpec, disorder_avg_recovery_fidelity, disorder_sample, site_probabilities

    spec = _chain(N, s, r)
    rec = _disorder_time(spec, t_fixed, dt)
    dis = DisorderSpec(delta, samples, seed)
    if profile:
        probs = site_probabilities(spec, rec.t, dis)
        _emit_csv(["n", "mean_abs_f2"], [(n + 1, float(v)) for n, v in enumerate(probs)], out)
        return
    fs = disorder_sample(spec, rec.t, dis)
    se = fs.std(ddof=1) / math.sqrt(samples) if samples > 1 else float("nan")
    row = [delta, samples, seed, rec.t, rec.f.real, rec.f.imag, fs.real.mean(), fs.imag.mean(),
           fs.real.std(ddof=1) / math.sqrt(samples) if samples > 1 else float("nan"),
           fs.imag.std(ddof=1) / math.sqrt(samples) if samples > 1 else float("nan"),
           float(np.var(fs)), se]
    header = ["delta", "samples", "seed", "t", "ideal_re", "ideal_im", "mean_re", "mean_im", "se_re", "se_im",
              "variance", "se_abs"]
    if fidelity:
        header.append("F2_avg")
        row.append(disorder_avg_recovery_fidelity(spec, rec.t, dis, leung_4qubit()))
    _emit_csv(header, [row], out)


@spin.command("density")
@chain_options
@disorder_options
@click.option("--component", type=click.Choice(["re", "im"]), default="re", show_default=True)
@click.option("--bins", type=click.IntRange(1), default=40, show_default=True)
@click.option("--out", type=str, default=None)
def spin_density(N, s, r, tmax, dt, delta, samples, seed, t_fixed, component, bins, out):
    """Histogram of Re f or Im f next to the first-order analytic density."""
    from .spin_chain import DisorderSpec, PointMass, disorder_sample, first_order_density

    spec = _chain(N, s, r)
    rec = _disorder_time(spec, t_fixed, dt)
    fs = disorder_sample(spec, rec.t, DisorderSpec(delta, samples, seed))
    vals = fs.real if component == "re" else fs.imag
    dens = first_order_density(spec, rec.t, delta, component)
    lo, hi = float(vals.min()), float(vals.max())
    if hi <= lo:
        hi = lo + 1e-12
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(vals, edges)
    if isinstance(dens, PointMass):
        analytic = np.array([float(a <= dens.location <= b) for a, b in zip(edges[:-1], edges[1:])])
    else:
        analytic = dens.bin_probabilities(edges)
    rows = [(edges[k], edges[k + 1], counts[k] / samples, float(analytic[k])) for k in range(bins)]
    _emit_csv(["bin_lo", "bin_hi", "mc_prob", "first_order_prob"], rows, out)


@main_group.group("ft")
def ft():
    """Fault-tolerance ledgers and gadget verification."""


@ft.command("ledger")
@click.argument("unit", type=click.Choice(["memory", "exrec"]))
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
def ft_ledger(unit, fmt):
    """Malignant-pair ledger and pseudothreshold for a unit."""
    from .fault_tolerance import ledger

    led = ledger("cz_exrec" if unit == "exrec" else unit)
    if fmt == "json":
        _emit_json(led.to_dict(), None)
    else:
        click.echo(HEADER)
        click.echo(led.table())
    if not led.entries_consistent():
        raise VerificationFailed("a ledger entry disagrees with its derivation")


@ft.command("verify")
@click.argument("gadget")
@click.argument("prop")
@click.option("--records/--no-records", default=False, help="include every case record in the JSON")
def ft_verify(gadget, prop, records):
    """Exhaustive single-fault check of property PROP on GADGET."""
    from .fault_tolerance import PROPERTIES, verify_property

    if gadget not in PROPERTIES:
        raise click.UsageError(f"unknown gadget {gadget!r}; choose from {', '.join(PROPERTIES)}")
    if prop not in PROPERTIES[gadget]:
        raise click.UsageError(f"{prop} is not defined for {gadget}; choose from {', '.join(PROPERTIES[gadget])}")
    rep = verify_property(gadget, prop, keep_records=records)
    payload = {"gadget": rep.gadget, "property": rep.property_id, "passed": rep.passed, "cases": rep.n_cases,
               "branches": rep.n_branches, "halted": rep.n_halted,
               "counterexample": rep.counterexample.to_dict() if rep.counterexample else None}
    if records:
        payload["records"] = [r.to_dict() for r in rep.records]
    _emit_json(payload, None)
    if not rep.passed:
        raise VerificationFailed(f"{gadget} {prop} failed")


def main(argv=None) -> int:
    try:
        main_group.main(args=argv, prog_name="aqec", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
