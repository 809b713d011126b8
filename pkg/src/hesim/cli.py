"""Command-line client of the simulation service.

Every subcommand builds a request, sends it to the service (in-process by
default, or to --server URL), and writes the returned artifacts to disk
together with a run manifest.  Exit codes: 0 success, 1 failed checks,
2 usage or parameter errors.

A flat `key = value` config file can supply defaults for any long flag;
explicit flags win.
"""

from __future__ import annotations

import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import click
import httpx

from . import __version__


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server.rstrip("/"), timeout=None)
    from starlette.testclient import TestClient

    from .service import app
    return TestClient(app, raise_server_exceptions=False)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.UsageError(f"bad config line: {line!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _merged(ctx, **kwargs) -> dict:
    """Apply config-file defaults wherever a flag was not given explicitly."""
    cfgfile = _load_config(ctx.obj.get("config"))
    out = {}
    for key, val in kwargs.items():
        src = ctx.get_parameter_source(key)
        if key in cfgfile and src is not None and src.name == "DEFAULT":
            raw = cfgfile[key]
            out[key] = type(val)(raw) if val is not None else raw
        else:
            out[key] = val
    return out


def _post(ctx, endpoint: str, payload: dict) -> dict:
    with _client(ctx.obj.get("server")) as client:
        resp = client.post(endpoint, json=payload)
    if resp.status_code == 422:
        detail = resp.json().get("detail", resp.text)
        click.echo(f"error: {detail}", err=True)
        sys.exit(2)
    if resp.status_code != 200:
        click.echo(f"service error {resp.status_code}: {resp.text}", err=True)
        sys.exit(1)
    return resp.json()


def _write(outdir: Path, name: str, text: str) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / name).write_text(text)


class Manifest:
    def __init__(self, ctx, subcommand: str, params: dict, seed=None):
        self.doc = {
            "tool": "hesim",
            "version": __version__,
            "subcommand": subcommand,
            "flags": {k: v for k, v in params.items() if v is not None},
            "config_file": ctx.obj.get("config"),
            "server": ctx.obj.get("server"),
            "master_seed": seed,
            "started": datetime.now(timezone.utc).isoformat(),
        }

    def write(self, outdir: Path) -> None:
        self.doc["finished"] = datetime.now(timezone.utc).isoformat()
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "manifest.json").write_text(
            json.dumps(self.doc, indent=2, sort_keys=True) + "\n")


@click.group()
@click.option("--server", default=None, help="Remote service URL (default: in-process).")
@click.option("--config", default=None, type=click.Path(exists=True),
              help="Flat key = value config file; flags override it.")
@click.version_option(__version__)
@click.pass_context
def main(ctx, server, config):
    """Harmonic-explorer / SLE(4) simulator and verification client."""
    ctx.obj = {"server": server, "config": config}


@main.command()
@click.option("--box", default=None, help="WIDTHxHEIGHT, e.g. 40x20.")
@click.option("--hexagon", default=None, type=int, help="Hexagon radius.")
@click.option("--split-offset", default=0, type=int)
@click.option("--svg", "svg_path", default=None, type=click.Path())
@click.option("--out", default="domain.hedom", type=click.Path())
@click.pass_context
def domain(ctx, box, hexagon, split_offset, svg_path, out):
    """Build a lattice domain file (and optionally an SVG rendering)."""
    p = _merged(ctx, box=box, hexagon=hexagon, split_offset=split_offset)
    if (p["box"] is None) == (p["hexagon"] is None):
        raise click.UsageError("give exactly one of --box or --hexagon")
    if p["box"] is not None:
        try:
            w, h = (int(s) for s in str(p["box"]).lower().split("x"))
        except ValueError:
            raise click.UsageError(f"--box expects WIDTHxHEIGHT, got {p['box']!r}")
        payload = {"kind": "box", "width": w, "height": h,
                   "split_offset": p["split_offset"], "svg": bool(svg_path)}
    else:
        payload = {"kind": "hexagon", "radius": int(p["hexagon"]),
                   "svg": bool(svg_path)}
    man = Manifest(ctx, "domain",
                   {"box": p["box"], "hexagon": p["hexagon"],
                    "split-offset": p["split_offset"], "svg": svg_path,
                    "out": out})
    doc = _post(ctx, "/domain/build", payload)
    outp = Path(out)
    outp.parent.mkdir(parents=True, exist_ok=True)
    outp.write_text(doc["hedom"])
    if svg_path:
        Path(svg_path).write_text(doc["svg"])
    man.write(outp.parent)
    click.echo(f"wrote {out} ({doc['info']['n_interior']} interior vertices)")


@main.command()
@click.option("--domain", "domain_file", required=True, type=click.Path(exists=True))
@click.option("--seed", required=True, type=int)
@click.option("--percolation", is_flag=True, default=False)
@click.option("--method", default="monte-carlo",
              type=click.Choice(["monte-carlo", "direct-sparse",
                                 "conjugate-gradient", "gauss-seidel"]))
@click.option("--samples", default=1, type=int)
@click.option("--jobs", default=1, type=int)
@click.option("--stop-height", default=None, type=float)
@click.option("--svg", "want_svg", is_flag=True, default=False)
@click.option("--out", default="runs", type=click.Path())
@click.pass_context
def run(ctx, domain_file, seed, percolation, method, samples, jobs,
        stop_height, want_svg, out):
    """Sample interface runs; one path/step-log CSV pair per sample."""
    p = _merged(ctx, seed=seed, samples=samples, jobs=jobs,
                stop_height=stop_height, method=method)
    hedom = Path(domain_file).read_text()
    outdir = Path(out)
    man = Manifest(ctx, "run",
                   {"seed": p["seed"], "samples": p["samples"],
                    "jobs": p["jobs"], "stop-height": p["stop_height"],
                    "method": p["method"], "domain": domain_file,
                    "percolation": percolation or None,
                    "svg": want_svg or None, "out": out}, seed=p["seed"])

    def one(i):
        payload = {"hedom": hedom, "seed": p["seed"], "sample_index": i,
                   "process": "percolation" if percolation else "harmonic-explorer",
                   "method": p["method"], "stop_height": p["stop_height"],
                   "svg": want_svg and i == 0}
        return i, _post(ctx, "/run", payload)

    results = {}
    if p["jobs"] > 1 and p["samples"] > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=p["jobs"]) as ex:
            for i, doc in ex.map(one, range(p["samples"])):
                results[i] = doc
    else:
        for i in range(p["samples"]):
            results[i] = one(i)[1]
    for i in sorted(results):
        doc = results[i]
        tag = f"_{i:04d}" if p["samples"] > 1 else ""
        _write(outdir, f"path{tag}.csv", doc["path_csv"])
        _write(outdir, f"steps{tag}.csv", doc["steps_csv"])
        if doc.get("svg"):
            _write(outdir, f"run{tag}.svg", doc["svg"])
    man.write(outdir)
    click.echo(f"wrote {p['samples']} run(s) to {out}")


@main.command()
@click.option("--kappa", default=4.0, type=float)
@click.option("--dt", default=1e-4, type=float)
@click.option("--T", "horizon", default=1.0, type=float)
@click.option("--seed", required=True, type=int)
@click.option("--out", default="sle", type=click.Path())
@click.pass_context
def sle(ctx, kappa, dt, horizon, seed, out):
    """Generate an SLE driving function and trace."""
    p = _merged(ctx, kappa=kappa, dt=dt, horizon=horizon, seed=seed)
    man = Manifest(ctx, "sle",
                   {"kappa": p["kappa"], "dt": p["dt"], "T": p["horizon"],
                    "seed": p["seed"], "out": out}, seed=p["seed"])
    doc = _post(ctx, "/sle", {"kappa": p["kappa"], "dt": p["dt"],
                              "T": p["horizon"], "seed": p["seed"]})
    outdir = Path(out)
    _write(outdir, "driving.csv", doc["driving_csv"])
    _write(outdir, "trace.csv", doc["trace_csv"])
    man.write(outdir)
    click.echo(f"wrote {out}/driving.csv and trace.csv "
               f"(capacity {doc['capacity']:g})")


@main.command()
@click.option("--path", "path_file", required=True, type=click.Path(exists=True))
@click.option("--dt-max", default=1e-3, type=float)
@click.option("--out", default="driving", type=click.Path())
@click.pass_context
def driving(ctx, path_file, dt_max, out):
    """Extract the Loewner driving function of a stored curve."""
    p = _merged(ctx, dt_max=dt_max)
    man = Manifest(ctx, "driving", {"dt-max": p["dt_max"],
                                    "path": path_file, "out": out})
    doc = _post(ctx, "/driving/extract",
                {"path_csv": Path(path_file).read_text(), "dt_max": p["dt_max"]})
    outdir = Path(out)
    _write(outdir, "driving.csv", doc["driving_csv"])
    man.write(outdir)
    click.echo(f"wrote {out}/driving.csv (capacity {doc['capacity']:g}, "
               f"{doc['n_steps']} steps)")


@main.command()
@click.option("--corpus", default="default", type=click.Choice(["default", "tiny"]))
@click.option("--oracle", is_flag=True, default=False)
@click.option("--seed", default=20240, type=int)
@click.option("--perturb", is_flag=True, default=False, hidden=True)
@click.option("--out", default="verify", type=click.Path())
@click.pass_context
def verify(ctx, corpus, oracle, seed, perturb, out):
    """Run the exact-identity suite; nonzero exit on any failure."""
    p = _merged(ctx, corpus=corpus, oracle=oracle, seed=seed)
    man = Manifest(ctx, "verify",
                   {"corpus": p["corpus"], "oracle": p["oracle"] or None,
                    "seed": p["seed"], "perturb": perturb or None,
                    "out": out}, seed=p["seed"])
    doc = _post(ctx, "/verify", {"corpus": p["corpus"], "oracle": p["oracle"],
                                 "seed": p["seed"], "perturb": perturb})
    outdir = Path(out)
    _write(outdir, "report.json",
           json.dumps(doc["report"], indent=2, sort_keys=True) + "\n")
    for name, text in doc["files"].items():
        _write(outdir, name, text)
    man.write(outdir)
    for t in doc["report"]["tests"]:
        click.echo(f"{'PASS' if t['passed'] else 'FAIL'} {t['name']}: "
                   f"{t['statistic']:.3e} (tol {t['tolerance']:.1e})")
    if not doc["passed"]:
        click.echo("verification FAILED", err=True)
        sys.exit(1)
    click.echo("all identities verified")


@main.command()
@click.option("--preset", required=True)
@click.option("--seed", default=None, type=int)
@click.option("--samples", default=None, type=int)
@click.option("--scale", default=None, type=int)
@click.option("--jobs", default=1, type=int)
@click.option("--out", default="stats", type=click.Path())
@click.pass_context
def stats(ctx, preset, seed, samples, scale, jobs, out):
    """Run a named statistical suite; nonzero exit when a gated test fails."""
    p = _merged(ctx, preset=preset, seed=seed, samples=samples, scale=scale,
                jobs=jobs)
    man = Manifest(ctx, "stats",
                   {"preset": p["preset"], "seed": p["seed"],
                    "samples": p["samples"], "scale": p["scale"],
                    "jobs": p["jobs"], "out": out}, seed=p["seed"])
    doc = _post(ctx, "/stats", {"preset": p["preset"], "seed": p["seed"],
                                "samples": p["samples"], "scale": p["scale"],
                                "jobs": p["jobs"]})
    outdir = Path(out)
    _write(outdir, "report.json",
           json.dumps(doc["report"], indent=2, sort_keys=True) + "\n")
    for name, text in doc["files"].items():
        _write(outdir, name, text)
    man.write(outdir)
    for t in doc["report"]["tests"]:
        gate = "" if t.get("gated", True) else " (ungated)"
        click.echo(f"{'PASS' if t['passed'] else 'FAIL'}{gate} {t['name']}: "
                   f"{t['statistic']:.4g}")
    if not doc["passed"]:
        click.echo("statistical suite FAILED", err=True)
        sys.exit(1)
    click.echo("statistical suite passed")


@main.command()
@click.argument("manifest", type=click.Path(exists=True))
@click.option("--out", default=None, type=click.Path(),
              help="Redirect outputs (default: the manifest's directory).")
@click.pass_context
def replay(ctx, manifest, out):
    """Re-run the command recorded in a manifest, reproducing its outputs."""
    doc = json.loads(Path(manifest).read_text())
    sub = doc.get("subcommand")
    cmd = main.commands.get(sub)
    if cmd is None or sub in ("serve", "replay"):
        raise click.UsageError(f"manifest records no replayable subcommand: {sub!r}")
    args = []
    for key, val in doc.get("flags", {}).items():
        if key == "out":
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            if val:
                args.append(flag)
        else:
            args.extend([flag, str(val)])
    target = out or doc.get("flags", {}).get("out") or str(Path(manifest).parent)
    args.extend(["--out", target])
    ctx.obj = {"server": doc.get("server"), "config": None}
    sub_ctx = cmd.make_context(sub, args, parent=ctx)
    with sub_ctx:
        cmd.invoke(sub_ctx)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8321, type=int)
def serve(host, port):
    """Run the simulation service."""
    import uvicorn
    uvicorn.run("hesim.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
