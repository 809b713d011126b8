import json

import pytest
from click.testing import CliRunner

from hesim.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def invoke(runner, args, **kw):
    return runner.invoke(main, args, catch_exceptions=False, **kw)


def test_domain_command(runner, tmp_path):
    out = tmp_path / "d.hedom"
    svg = tmp_path / "d.svg"
    r = invoke(runner, ["domain", "--box", "12x6", "--svg", str(svg),
                        "--out", str(out)])
    assert r.exit_code == 0, r.output
    assert out.read_text().startswith("HEDOM 1\n")
    assert svg.read_text().startswith("<svg")
    assert json.loads((tmp_path / "manifest.json").read_text())["subcommand"] == "domain"


def test_domain_hexagon(runner, tmp_path):
    out = tmp_path / "h.hedom"
    r = invoke(runner, ["domain", "--hexagon", "4", "--out", str(out)])
    assert r.exit_code == 0
    assert "HEDOM 1" in out.read_text()


def test_domain_usage_errors(runner, tmp_path):
    r = invoke(runner, ["domain", "--box", "3x1",
                        "--out", str(tmp_path / "x.hedom")])
    assert r.exit_code == 2
    r = invoke(runner, ["domain", "--out", str(tmp_path / "x.hedom")])
    assert r.exit_code == 2
    r = invoke(runner, ["domain", "--box", "10x4", "--hexagon", "3",
                        "--out", str(tmp_path / "x.hedom")])
    assert r.exit_code == 2


def test_run_command_reproducible(runner, tmp_path):
    dom = tmp_path / "d.hedom"
    invoke(runner, ["domain", "--box", "10x6", "--out", str(dom)])
    o1, o2 = tmp_path / "r1", tmp_path / "r2"
    r = invoke(runner, ["run", "--domain", str(dom), "--seed", "7",
                        "--out", str(o1)])
    assert r.exit_code == 0, r.output
    invoke(runner, ["run", "--domain", str(dom), "--seed", "7", "--out", str(o2)])
    assert (o1 / "path.csv").read_text() == (o2 / "path.csv").read_text()
    assert (o1 / "steps.csv").read_text() == (o2 / "steps.csv").read_text()


def test_run_percolation_and_samples_jobs(runner, tmp_path):
    dom = tmp_path / "d.hedom"
    invoke(runner, ["domain", "--box", "10x6", "--out", str(dom)])
    o1, o2 = tmp_path / "a", tmp_path / "b"
    r = invoke(runner, ["run", "--domain", str(dom), "--seed", "3",
                        "--percolation", "--samples", "6", "--jobs", "1",
                        "--out", str(o1)])
    assert r.exit_code == 0, r.output
    r = invoke(runner, ["run", "--domain", str(dom), "--seed", "3",
                        "--percolation", "--samples", "6", "--jobs", "3",
                        "--out", str(o2)])
    assert r.exit_code == 0
    for i in range(6):
        a = (o1 / f"path_{i:04d}.csv").read_text()
        b = (o2 / f"path_{i:04d}.csv").read_text()
        assert a == b


def test_sle_and_driving_commands(runner, tmp_path):
    r = invoke(runner, ["sle", "--kappa", "4", "--dt", "1e-3", "--T", "0.2",
                        "--seed", "3", "--out", str(tmp_path / "sle")])
    assert r.exit_code == 0, r.output
    trace = tmp_path / "sle" / "trace.csv"
    assert trace.exists()
    # reuse the trace as a path file for driving extraction: columns match
    text = trace.read_text().replace("t,x,y", "step,x,y")
    p = tmp_path / "p.csv"
    p.write_text(text)
    r = invoke(runner, ["driving", "--path", str(p), "--dt-max", "1e-3",
                        "--out", str(tmp_path / "drv")])
    assert r.exit_code == 0, r.output
    assert (tmp_path / "drv" / "driving.csv").read_text().startswith("t,w")


def test_driving_vertical_fixture(runner, tmp_path):
    lines = ["step,x,y"] + ["%d,0.0,%r" % (i, i / 100) for i in range(101)]
    p = tmp_path / "vertical.csv"
    p.write_text("\n".join(lines) + "\n")
    r = invoke(runner, ["driving", "--path", str(p),
                        "--out", str(tmp_path / "v")])
    assert r.exit_code == 0
    rows = (tmp_path / "v" / "driving.csv").read_text().splitlines()[1:]
    ws = [abs(float(x.split(",")[1])) for x in rows]
    assert max(ws) <= 1e-6


def test_verify_command(runner, tmp_path):
    r = invoke(runner, ["verify", "--corpus", "tiny", "--oracle",
                        "--out", str(tmp_path / "v")])
    assert r.exit_code == 0, r.output
    doc = json.loads((tmp_path / "v" / "report.json").read_text())
    assert doc["passed"] is True
    r = invoke(runner, ["verify", "--corpus", "tiny", "--perturb",
                        "--out", str(tmp_path / "vp")])
    assert r.exit_code == 1


def test_stats_command_and_exit_codes(runner, tmp_path):
    r = invoke(runner, ["stats", "--preset", "driving-fixtures",
                        "--out", str(tmp_path / "s")])
    assert r.exit_code == 0, r.output
    assert (tmp_path / "s" / "report.json").exists()
    r = invoke(runner, ["stats", "--preset", "bogus",
                        "--out", str(tmp_path / "s2")])
    assert r.exit_code == 2


def test_config_file_defaults(runner, tmp_path):
    cfgfile = tmp_path / "hesim.cfg"
    cfgfile.write_text("seed = 99\nbox = 10x4\n")
    out = tmp_path / "c.hedom"
    r = invoke(runner, ["--config", str(cfgfile), "domain", "--out", str(out)])
    assert r.exit_code == 0, r.output
    dom = out.read_text()
    # flag overrides the config file
    out2 = tmp_path / "c2.hedom"
    r = invoke(runner, ["--config", str(cfgfile), "domain", "--box", "12x4",
                        "--out", str(out2)])
    assert r.exit_code == 0
    assert out2.read_text() != dom


def test_replay_reproduces_outputs(runner, tmp_path):
    dom = tmp_path / "d.hedom"
    invoke(runner, ["domain", "--box", "12x6", "--out", str(dom)])
    out1 = tmp_path / "r1"
    invoke(runner, ["run", "--domain", str(dom), "--seed", "9", "--samples",
                    "3", "--out", str(out1)])
    out2 = tmp_path / "r2"
    r = invoke(runner, ["replay", str(out1 / "manifest.json"),
                        "--out", str(out2)])
    assert r.exit_code == 0, r.output
    for name in ("path_0000.csv", "steps_0002.csv"):
        assert (out1 / name).read_text() == (out2 / name).read_text()


def test_manifest_contents(runner, tmp_path):
    dom = tmp_path / "d.hedom"
    invoke(runner, ["domain", "--box", "10x6", "--out", str(dom)])
    out = tmp_path / "r"
    invoke(runner, ["run", "--domain", str(dom), "--seed", "5", "--out", str(out)])
    man = json.loads((out / "manifest.json").read_text())
    assert man["subcommand"] == "run"
    assert man["master_seed"] == 5
    assert man["version"]
    assert "started" in man and "finished" in man
