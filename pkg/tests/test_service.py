import pytest
from starlette.testclient import TestClient

from hesim import lattice
from hesim.service import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app, raise_server_exceptions=False)


@pytest.fixture(scope="module")
def hedom(client):
    r = client.post("/domain/build", json={"kind": "box", "width": 10,
                                           "height": 6})
    assert r.status_code == 200
    return r.json()["hedom"]


def test_health(client):
    doc = client.get("/health").json()
    assert doc["name"] == "hesim" and doc["version"]


def test_domain_build_box_and_svg(client):
    r = client.post("/domain/build",
                    json={"kind": "box", "width": 8, "height": 4, "svg": True})
    doc = r.json()
    assert doc["info"]["n_interior"] == 20
    assert doc["svg"].startswith("<svg")
    d = lattice.domain_from_text(doc["hedom"])
    assert len(d.interior) == 20


def test_domain_build_hexagon(client):
    r = client.post("/domain/build", json={"kind": "hexagon", "radius": 3})
    assert r.status_code == 200
    assert r.json()["info"]["n_interior"] == 3 * 9 - 9 + 1


def test_domain_build_errors(client):
    assert client.post("/domain/build",
                       json={"kind": "box", "width": 3, "height": 1}).status_code == 422
    assert client.post("/domain/build",
                       json={"kind": "hexagon", "radius": 1}).status_code == 422
    assert client.post("/domain/build", json={"kind": "box"}).status_code == 422


def test_domain_validate_round_trip(client, hedom):
    r = client.post("/domain/validate", json={"hedom": hedom})
    assert r.status_code == 200
    assert r.json()["hedom"] == hedom
    bad = hedom.replace("HEDOM 1", "HEDOM 9")
    assert client.post("/domain/validate", json={"hedom": bad}).status_code == 422


def test_run_and_extract(client, hedom):
    r = client.post("/run", json={"hedom": hedom, "seed": 7})
    doc = r.json()
    assert doc["terminated"] and doc["n_steps"] >= 1
    assert doc["path_csv"].splitlines()[0] == "step,x,y"
    assert doc["steps_csv"].splitlines()[0] == "n,va,vb,p,x,fixed,turn"
    # identical rerun
    doc2 = client.post("/run", json={"hedom": hedom, "seed": 7}).json()
    assert doc2["path_csv"] == doc["path_csv"]
    assert doc2["steps_csv"] == doc["steps_csv"]
    r = client.post("/driving/extract", json={"path_csv": doc["path_csv"]})
    assert r.status_code == 200
    assert r.json()["capacity"] > 0
    assert r.json()["driving_csv"].splitlines()[0] == "t,w"


def test_run_percolation_and_methods(client, hedom):
    a = client.post("/run", json={"hedom": hedom, "seed": 3,
                                  "process": "percolation"}).json()
    assert a["terminated"]
    b = client.post("/run", json={"hedom": hedom, "seed": 3,
                                  "method": "direct-sparse"}).json()
    assert b["terminated"]


def test_sle_endpoint(client):
    r = client.post("/sle", json={"kappa": 4.0, "dt": 1e-3, "T": 0.2, "seed": 5})
    doc = r.json()
    assert doc["capacity"] == pytest.approx(0.2, abs=1e-12)
    assert doc["trace_csv"].splitlines()[0] == "t,x,y"
    assert client.post("/sle", json={"kappa": 4.0, "dt": 0.0, "T": 1.0,
                                     "seed": 5}).status_code == 422


def test_extract_rejects_garbage(client):
    r = client.post("/driving/extract", json={"path_csv": "not,a,csv\n"})
    assert r.status_code == 422


def test_verify_endpoint(client):
    r = client.post("/verify", json={"corpus": "tiny", "oracle": True, "seed": 4})
    doc = r.json()
    assert doc["passed"] is True
    names = {t["name"] for t in doc["report"]["tests"]}
    assert "h_one_step_martingale" in names
    assert "oracle_total_mass" in names
    r = client.post("/verify", json={"corpus": "tiny", "seed": 4,
                                     "perturb": True})
    assert r.json()["passed"] is False


def test_stats_endpoint_smoke(client):
    r = client.post("/stats", json={"preset": "h-martingale", "samples": 300,
                                    "seed": 404, "jobs": 2})
    doc = r.json()
    assert r.status_code == 200
    assert "terminal_colors.csv" in doc["files"]
    assert client.post("/stats", json={"preset": "no-such"}).status_code == 422


def test_stats_rejects_bad_overrides(client):
    r = client.post("/stats", json={"preset": "driving-fixtures", "samples": 5})
    assert r.status_code == 422
