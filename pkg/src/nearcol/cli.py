"""Command line front end: one subcommand per experiment, CSV/JSON output.

Exit status 0 on success, 2 when a parameter is rejected, 3 on a numeric
failure. Errors are reported on stderr as a JSON object naming the module
and error type. Parameters can come from a JSON or TOML config file whose
top-level tables are named after the subcommands; command-line flags win.
"""
from __future__ import annotations

import json
import math
import os
import sys
from pathlib import Path

import click
import numpy as np

from .core import NearcolError, NumericFailure, ParameterError, default_threads, make_context
from .io import csv_text, dumps

EXIT_PARAM = 2
EXIT_NUMERIC = 3


def _load_config(path):
    text = Path(path).read_text(encoding="utf-8")
    if str(path).endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(text)
    return json.loads(text)


def _emit(text, out):
    if out in (None, "-"):
        click.echo(text, nl=not text.endswith("\n"))
    else:
        with open(out, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def _emit_json(obj, out):
    _emit(dumps(obj), out)


def _threads(ctx):
    return ctx.find_root().obj["threads"]


def _energy(mu, h, h0):
    if h is None and h0 is None:
        raise ParameterError("give the energy as --h or as --h0 (h = mu h0)")
    if h is not None and h0 is not None:
        raise ParameterError("--h and --h0 are exclusive")
    return make_context(mu, h if h is not None else mu * h0)


def _print_config(ctx):
    """Dump the resolved parameters of the running subcommand and stop."""
    root = ctx.find_root()
    params = {k: v for k, v in ctx.params.items() if k != "print_config"}
    click.echo(dumps({"command": ctx.info_name, "threads": root.obj["threads"],
                      "seed": root.obj["seed"], "params": params}))
    ctx.exit(0)


def _common(f):
    f = click.option("--print-config", is_flag=True,
                     help="Print the resolved configuration and exit.")(f)
    return f


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except ParameterError as exc:
            _fail(exc, EXIT_PARAM)
        except NumericFailure as exc:
            _fail(exc, EXIT_NUMERIC)
        except NearcolError as exc:
            _fail(exc, EXIT_NUMERIC)


def _fail(exc, code, extra=None):
    payload = exc.to_dict()
    if extra:
        payload.update(extra)
    click.echo(dumps(payload), err=True)
    sys.exit(code)


@click.group(cls=_Group)
@click.option("--threads", type=int, default=None,
              help="Worker threads (default: NEARCOL_THREADS or the number of cores).")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for randomised sampling.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON or TOML file with per-subcommand parameters.")
@click.pass_context
def main(ctx, threads, seed, config_path):
    """Regularised flows and ejection-collision searches near Jupiter, the Sun and infinity."""
    cfg = _load_config(config_path) if config_path else {}
    glob = cfg.pop("global", {}) if isinstance(cfg, dict) else {}
    if threads is None:
        threads = glob.get("threads")
    if ctx.get_parameter_source("seed") == click.core.ParameterSource.DEFAULT and "seed" in glob:
        seed = glob["seed"]
    threads = int(threads) if threads is not None else default_threads()
    if threads < 1:
        raise click.BadParameter("threads must be >= 1", param_hint="--threads")
    ctx.obj = {"threads": threads, "seed": int(seed)}
    ctx.default_map = {k.replace("_", "-"): v for k, v in cfg.items()}


# ---------------------------------------------------------------------- kepler


@main.command("kepler-oracle")
@click.option("--theta0", "Theta0", type=float, required=True,
              help="Angular momentum of the zero-energy orbit.")
@click.option("--angle", type=float, default=0.0, show_default=True,
              help="Pericentre angle.")
@click.option("--t", "times", type=float, multiple=True, required=True,
              help="Time(s) after pericentre; repeatable.")
@click.option("--out", default=None, help="Output file (default stdout).")
@_common
@click.pass_context
def kepler_oracle(ctx, Theta0, angle, times, out, print_config):
    """Closed-form zero-energy Kepler state (r, theta, R, Theta)."""
    if print_config:
        _print_config(ctx)
    from .kepler import parabolic_state
    rows = []
    for t in times:
        s = parabolic_state(t, angle, Theta0)
        rows.append({"t": t, "r": s.r, "theta": s.theta, "R": s.R, "Theta": s.Theta})
    _emit_json(rows[0] if len(rows) == 1 else {"states": rows}, out)


# ---------------------------------------------------------------------- curves


@main.command("curve-jup")
@click.option("--mu", type=float, required=True)
@click.option("--h", type=float, required=True)
@click.option("--gamma", type=float, default=0.3, show_default=True)
@click.option("--branch", type=click.Choice(["ejection", "collision"]), default="ejection",
              show_default=True)
@click.option("-n", "n", type=int, default=256, show_default=True)
@click.option("--out", default=None)
@_common
@click.pass_context
def curve_jup(ctx, mu, h, gamma, branch, n, out, print_config):
    """Jupiter ejection/collision curve on |q - Jupiter| = mu^gamma as CSV (theta,R,Theta)."""
    if print_config:
        _print_config(ctx)
    from .localjup import jupiter_manifold_curve
    c = jupiter_manifold_curve(make_context(mu, h), gamma, branch, n=n, threads=_threads(ctx))
    _emit(csv_text(["theta", "R", "Theta"], np.column_stack([c.theta, c.R, c.Theta])), out)


@main.command("curve-sun")
@click.option("--mu", type=float, required=True)
@click.option("--h", type=float, default=None)
@click.option("--h0", type=float, default=None, help="Energy in units of mu.")
@click.option("--delta", type=float, default=0.1, show_default=True)
@click.option("--branch", type=click.Choice(["u", "s"]), default="u", show_default=True)
@click.option("--method", type=click.Choice(["numeric", "first-order"]), default="numeric",
              show_default=True)
@click.option("-n", "n", type=int, default=128, show_default=True)
@click.option("--out", default=None)
@_common
@click.pass_context
def curve_sun(ctx, mu, h, h0, delta, branch, method, n, out, print_config):
    """Sun ejection (u) or collision (s) curve on rbar = delta^2 as CSV."""
    if print_config:
        _print_config(ctx)
    from .localsun import sun_manifold_curve
    sc = sun_manifold_curve(_energy(mu, h, h0), delta, branch, n=n, threads=_threads(ctx))
    c = sc.numeric if method == "numeric" else sc.first_order
    _emit(csv_text(["theta", "R", "Theta"], np.column_stack([c.theta, c.R, c.Theta])), out)


@main.command("curve-inf")
@click.option("--mu", type=float, required=True)
@click.option("--Theta0", "Theta0", type=float, required=True,
              help="Angular momentum at infinity; the energy is h = -Theta0.")
@click.option("--branch", type=click.Choice(["u", "s"]), default="u", show_default=True)
@click.option("--section", type=click.Choice(["jupiter", "outer"]), default="jupiter",
              show_default=True)
@click.option("--nu", type=float, default=0.3, show_default=True)
@click.option("--r0", type=float, default=5.0, show_default=True,
              help="Radius of the outer section.")
@click.option("-n", "n", type=int, default=64, show_default=True)
@click.option("--out", default=None)
@_common
@click.pass_context
def curve_inf(ctx, mu, Theta0, branch, section, nu, r0, n, out, print_config):
    """Unstable (u) or stable (s) manifold of infinity on a section as CSV."""
    if print_config:
        _print_config(ctx)
    from .dynamics import outer_section
    from .infinity import infinity_manifold_curve
    sec = None
    if section == "outer":
        sec = outer_section(r0, "R<0" if branch == "u" else "R>0")
    c = infinity_manifold_curve(make_context(mu, -Theta0), Theta0, branch, sec, n=n, nu=nu,
                                threads=_threads(ctx))
    _emit(csv_text(["theta", "R", "Theta"], np.column_stack([c.theta, c.R, c.Theta])), out)


# ---------------------------------------------------------------------- infinity


@main.command("hj-solve")
@click.option("--mu", type=float, required=True)
@click.option("--Theta0", "Theta0", type=float, default=1.0, show_default=True)
@click.option("--nu", type=float, default=0.3, show_default=True)
@click.option("--K", "K", type=int, default=32, show_default=True, help="Fourier cutoff.")
@click.option("--nodes", type=int, default=400, show_default=True)
@click.option("--full", is_flag=True, help="Include the Fourier modes of the solution.")
@click.option("--out", default=None)
@_common
@click.pass_context
def hj_solve_cmd(ctx, mu, Theta0, nu, K, nodes, full, out, print_config):
    """Correction of the unstable manifold of infinity (fixed-point solve) as JSON."""
    if print_config:
        _print_config(ctx)
    from .infinity import hj_solve
    sol = hj_solve(make_context(mu, -Theta0), Theta0, nu, K=K, n_nodes=nodes)
    if full:
        _emit_json(sol.to_json(), out)
    else:
        _emit_json({"mu": mu, "Theta0": Theta0, "nu": nu, "norm": sol.norm(),
                    "residual": sol.residual, "iterations": sol.iterations,
                    "history": sol.history}, out)


# ---------------------------------------------------------------------- connections


@main.command("distance")
@click.option("--mu", type=float, required=True)
@click.option("--Theta0", "Theta0", type=float, required=True)
@click.option("--nu", type=float, default=0.3, show_default=True)
@click.option("--which", type=click.Choice(["minus", "plus"]), default="minus",
              show_default=True,
              help="minus: W^s(infinity) vs Jupiter ejection; plus: W^u vs Jupiter collision.")
@click.option("--n-inf", type=int, default=64, show_default=True)
@click.option("--n-jup", type=int, default=256, show_default=True)
@click.option("--out", default=None)
@_common
@click.pass_context
def distance_cmd(ctx, mu, Theta0, nu, which, n_inf, n_jup, out, print_config):
    """Transverse zero of the distance between infinity and Jupiter curves as JSON."""
    if print_config:
        _print_config(ctx)
    from .connections import predicted_root, stable_ejection_root, unstable_collision_root
    fn = stable_ejection_root if which == "minus" else unstable_collision_root
    z = fn(mu, Theta0, nu, n_inf=n_inf, n_jup=n_jup, threads=_threads(ctx))
    pred = predicted_root(Theta0) * (1.0 if which == "minus" else -1.0)
    _emit_json(dict(z.to_json(), which=which, mu=mu, Theta0=Theta0, nu=nu,
                    leading_order=pred), out)


@main.command("triple")
@click.option("--mu", type=float, required=True)
@click.option("--nu", type=float, default=0.3, show_default=True)
@click.option("--Theta0-init", "Theta0_init", type=float, default=1.0, show_default=True)
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--max-iter", type=int, default=20, show_default=True)
@click.option("--out", default=None)
@_common
@click.pass_context
def triple_cmd(ctx, mu, nu, Theta0_init, tol, max_iter, out, print_config):
    """Angular momentum where the three curves meet, with the crossing angles, as JSON."""
    if print_config:
        _print_config(ctx)
    from .connections import OrderingViolated, solve_triple_intersection
    try:
        res = solve_triple_intersection(mu, nu, Theta0_init, tol=tol, max_iter=max_iter,
                                        threads=_threads(ctx))
    except OrderingViolated as exc:
        # the solve itself succeeded; report it and flag the failed check
        _emit_json(exc.result.to_json(), out)
        _fail(exc, EXIT_NUMERIC)
    _emit_json(res.to_json(), out)


@main.command("ec-search")
@click.option("--mu", type=float, required=True)
@click.option("--h", type=float, default=None)
@click.option("--h0", type=float, default=None)
@click.option("--kind", type=click.Choice(["J-J+", "S-J+", "J-S+"]), default="J-J+",
              show_default=True)
@click.option("--n-wanted", type=int, default=2, show_default=True)
@click.option("--r0", type=float, default=5.0, show_default=True)
@click.option("--min-return-time", type=float, default=500.0, show_default=True)
@click.option("--trajectory-dir", type=click.Path(file_okay=False), default=None,
              help="Write one CSV (t,x,y) per orbit here.")
@click.option("--out", default=None)
@_common
@click.pass_context
def ec_search(ctx, mu, h, h0, kind, n_wanted, r0, min_return_time, trajectory_dir, out,
              print_config):
    """Ejection-collision orbits with one large excursion, as JSON."""
    if print_config:
        _print_config(ctx)
    from .connections import find_ec_orbits
    orbits = find_ec_orbits(_energy(mu, h, h0), kind, n_wanted, r0=r0,
                            min_return_time=min_return_time, threads=_threads(ctx))
    _write_orbits(orbits, trajectory_dir)
    _emit_json({"orbits": [o.to_json() for o in orbits]}, out)


def _write_orbits(orbits, directory):
    if not directory:
        return
    os.makedirs(directory, exist_ok=True)
    for i, o in enumerate(orbits):
        name = f"{o.kind}-{i}.csv".replace("+", "p")
        with open(os.path.join(directory, name), "w", newline="\n", encoding="utf-8") as fh:
            fh.write(csv_text(["t", "x", "y"], o.csv_rows()))


@main.command("ballistic")
@click.option("--mu", type=float, required=True)
@click.option("--h", type=float, default=None)
@click.option("--h0", type=float, default=None)
@click.option("--delta", type=float, default=0.1, show_default=True)
@click.option("--gamma", type=float, default=0.3, show_default=True)
@click.option("--trajectory-dir", type=click.Path(file_okay=False), default=None)
@click.option("--out", default=None)
@_common
@click.pass_context
def ballistic(ctx, mu, h, h0, delta, gamma, trajectory_dir, out, print_config):
    """Jupiter-to-Sun ejection-collision orbit inside Jupiter's circle, as JSON."""
    if print_config:
        _print_config(ctx)
    from .connections import find_ballistic_ec
    orbit, zero = find_ballistic_ec(_energy(mu, h, h0), delta, gamma, threads=_threads(ctx))
    _write_orbits([orbit], trajectory_dir)
    _emit_json({"orbit": dict(orbit.to_json(), max_radius=orbit.max_radius()),
                "zero": zero.to_json()}, out)


@main.command("spiral")
@click.option("--mu", type=float, required=True)
@click.option("--h", type=float, required=True)
@click.option("--offset", "offsets", type=float, multiple=True,
              default=(1e-3, 1e-4, 1e-5), show_default=True)
@click.option("--s-max", type=float, default=1e-2, show_default=True)
@click.option("--r0", type=float, default=5.0, show_default=True)
@click.option("--out", default=None)
@_common
@click.pass_context
def spiral(ctx, mu, h, offsets, s_max, r0, out, print_config):
    """Images of a segment below the stable curve of infinity, as JSON."""
    if print_config:
        _print_config(ctx)
    from .connections import spiral_evidence
    ev = spiral_evidence(make_context(mu, h), tuple(offsets), r0=r0, s_max=s_max,
                         threads=_threads(ctx))
    _emit_json(ev.to_json(), out)


# ---------------------------------------------------------------------- classify


@main.command("classify")
@click.option("--mu", type=float, required=True)
@click.option("--h", type=float, default=None, help="Energy (single point mode).")
@click.option("--r", type=float, default=None)
@click.option("--theta", type=float, default=0.0, show_default=True)
@click.option("--Theta", "Theta", type=float, default=None)
@click.option("--radial-sign", type=click.Choice(["+", "-"]), default="+", show_default=True)
@click.option("--direction", type=click.Choice(["forward", "backward"]), default="forward",
              show_default=True)
@click.option("--horizon", type=float, default=1e4, show_default=True)
@click.option("--ensemble", type=int, default=0,
              help="Classify this many random Kepler data on r = 1 instead (CSV).")
@click.option("--out", default=None)
@_common
@click.pass_context
def classify(ctx, mu, h, r, theta, Theta, radial_sign, direction, horizon, ensemble, out,
             print_config):
    """Final motion of one state (JSON) or of a random ensemble (CSV)."""
    if print_config:
        _print_config(ctx)
    from .charts import Chart, PhasePoint, solve_radial_momentum
    from .classify import classify_final_motion
    from .core import parallel_map
    threads = _threads(ctx)
    if ensemble > 0:
        data = kepler_ensemble(ensemble, ctx.find_root().obj["seed"])

        def run(row):
            hh, th, Th = row
            c = make_context(mu, hh)
            R = solve_radial_momentum(Chart.RotPolarCM, 1.0, th, Th, c, 1.0)
            p = PhasePoint(Chart.RotPolarCM, (1.0, th, R, Th), 0.0)
            return classify_final_motion(p, c, direction, horizon)

        res = parallel_map(run, data, threads)
        rows = [[hh, th, Th, f.tag.value, f.r_max, f.r_min, f.terminal_speed, f.excursions,
                 f.t_end] for (hh, th, Th), f in zip(data, res)]
        _emit(csv_text(["h", "theta", "Theta", "tag", "r_max", "r_min", "terminal_speed",
                        "excursions", "t_end"], rows), out)
        return
    if h is None or r is None or Theta is None:
        raise ParameterError("single point mode needs --h, --r and --Theta")
    c = make_context(mu, h)
    sgn = 1.0 if radial_sign == "+" else -1.0
    R = solve_radial_momentum(Chart.RotPolarCM, r, theta, Theta, c, sgn)
    p = PhasePoint(Chart.RotPolarCM, (r, theta, R, Theta), 0.0)
    _emit_json(classify_final_motion(p, c, direction, horizon).to_json(), out)


def kepler_ensemble(n: int, seed: int) -> list:
    """Random (h, theta, Theta) on r = 1 away from the conic boundaries."""
    from .kepler import ConicClass, classify_conic
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        h = rng.uniform(-1.45, 1.4)
        span = math.sqrt(2.0 * h + 3.0)
        Th = rng.uniform(1.0 - span, 1.0 + span)
        th = rng.uniform(-math.pi, math.pi)
        if abs(Th) < 0.05:
            continue
        if classify_conic(h, Th) == ConicClass.OUT_OF_TABLE:
            continue
        out.append((h, th, Th))
    return out


# ---------------------------------------------------------------------- acceptance


@main.command("acceptance")
@click.option("--only", "only", type=int, multiple=True, help="Run only these criteria.")
@click.option("--out", default=None, help="Also write the results as JSON.")
@_common
@click.pass_context
def acceptance(ctx, only, out, print_config):
    """Run the acceptance criteria and print a pass/fail table."""
    if print_config:
        _print_config(ctx)
    from .acceptance import CRITERIA, run_criterion
    ids = sorted(only) if only else sorted(CRITERIA)
    results = []
    for i in ids:
        if i not in CRITERIA:
            raise ParameterError(f"no acceptance criterion {i}")
        r = run_criterion(i, threads=_threads(ctx))
        click.echo(r.line())
        results.append(r)
    if out:
        with open(out, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(dumps({"results": [r.to_json() for r in results]}) + "\n")
    if not all(r.passed for r in results):
        sys.exit(EXIT_NUMERIC)


if __name__ == "__main__":  # pragma: no cover
    main()
