import csv
import io
import json

import pytest

from hlgt.cellcomplex import Box, boundary_chain
from hlgt.gibbs import Estimate
from hlgt.harness import (REPORT_COLUMNS, SCHEMA, ExperimentConfig, GeometryError, check_margin,
                          delta_estimate, load_config, path_margin, ratio_geometry, rectangle_loop,
                          report_json, run_experiment, run_main_theorem, run_property_suite, run_ratio,
                          run_short_line, short_line_bound, straight_path, top_segment, u_path,
                          write_report_csv)

CONFIG = """
[DEFAULT]
n = 2
sweeps = 256
chains = 1

[main_theorem]
N = 5
beta = 1.0
kappa = 1.7
margin = 1

[short_line]
N = 4
beta = 0.3
kappa = 1.8
path = line
l1 = 4
margin = 1
"""


def small(**kw):
    base = dict(N=5, sweeps=256, chains=1, batches=16, margin=1)
    base.update(kw)
    return ExperimentConfig(**base)


def test_load_config_layers():
    cfg = load_config(experiment="short_line", text=CONFIG, overrides={"seed": 7, "chains": None})
    assert (cfg.N, cfg.beta, cfg.kappa, cfg.path, cfg.l1) == (4, 0.3, 1.8, "line", 4)
    assert cfg.sweeps == 256 and cfg.chains == 1 and cfg.seed == 7
    main = load_config(experiment="main_theorem", text=CONFIG)
    assert main.N == 5 and main.path == "u"


def test_load_config_errors():
    with pytest.raises(KeyError):
        load_config(experiment="main_theorem", text="[main_theorem]\nbogus = 1\n")
    with pytest.raises(KeyError):
        load_config(experiment="nonsense", text="")


def test_config_hash_tracks_values():
    a, b = small(), small(seed=1)
    assert a.config_hash() == small().config_hash()
    assert a.config_hash() != b.config_hash()


def test_geometry_shapes():
    loop = rectangle_loop((0, 0, 0, 0), 3, 2)
    assert len(loop) == 10 and len(boundary_chain(loop)) == 0
    u = u_path((0, 0, 0, 0), 3, 2)
    assert len(u) == 7
    assert len(boundary_chain(loop - u)) == 2
    top = top_segment((0, 0, 0, 0), 4, 2, 2)
    assert len(top) == 2 and all(v == -1 for _, v in top)
    assert len(straight_path((0, 0, 0, 0), 2, 5)) == 5


def test_ratio_geometry_validation():
    for which in ("marcu_fredenhagen", "gliozzi", "almost_closed"):
        loop, prime = ratio_geometry(which, 4, 3)
        assert len(boundary_chain(loop)) == 0 and len(boundary_chain(prime)) == 2
    with pytest.raises(GeometryError):
        ratio_geometry("almost_closed", 4, 4, r=4)
    with pytest.raises(GeometryError):
        ratio_geometry("unknown", 4, 4)


def test_ratio_geometry_sizes():
    loop, prime = ratio_geometry("marcu_fredenhagen", 4, 3)
    assert (len(loop), len(prime)) == (20, 10)
    loop, prime = ratio_geometry("gliozzi", 4, 3)
    assert (len(loop), len(prime)) == (14, 10)
    loop, prime = ratio_geometry("almost_closed", 4, 3, r=2)
    assert (len(loop), len(prime)) == (14, 12)


def test_margin_checks():
    box = Box.cube(5)
    gamma = u_path((-4, -4, 0, 0), 8, 8)
    assert path_margin(gamma, box) == 1
    check_margin(gamma, box, 1)
    with pytest.raises(GeometryError):
        check_margin(gamma, box, 2)
    with pytest.raises(GeometryError):
        check_margin(straight_path((4, 0, 0, 0), 0, 3), box, 0)


def test_delta_estimate():
    a = Estimate.from_batches([1.0, 1.2, 0.8, 1.0], 4, 1, 0)
    b = Estimate.from_batches([2.0, 2.0, 2.0, 2.0], 4, 1, 0)
    value, se = delta_estimate(lambda x, y: x * y, [a, b])
    assert value == pytest.approx(2.0)
    assert se == pytest.approx(2 * a.stderr, rel=1e-6)
    assert delta_estimate(lambda x: x, [Estimate.exact(3.0)]) == (3.0, 0.0)


def test_tiny_loop_rejected():
    cfg = small(path="rectangle", l1=1, l2=1)
    rows = run_main_theorem(cfg)
    assert len(rows) == 1 and rows[0].verdict == "rejected"
    assert "24" in rows[0].note


def test_failing_assumption_rejected():
    rows = run_main_theorem(small(kappa=1.0))
    assert rows[0].verdict == "rejected" and "[A]" in rows[0].note
    assert run_main_theorem(small(n=3))[0].verdict == "rejected"
    assert run_main_theorem(small(margin=8))[0].verdict == "rejected"


def test_main_theorem_rows_and_determinism():
    cfg = small(beta=1.0, kappa=1.7)
    rows = run_main_theorem(cfg)
    again = run_main_theorem(cfg)
    assert rows == again
    names = [r.quantity for r in rows]
    for q in ("L_gamma", "H_kappa", "edge_correlation", "theta_prime", "prediction", "envelope", "difference"):
        assert q in names
    env = rows[names.index("envelope")]
    assert env.verdict == "vacuous" and env.passed is None
    diff = rows[names.index("difference")]
    assert "empirical tolerance" in diff.verdict
    assert all(r.seed == cfg.seed and r.config_hash == cfg.config_hash() for r in rows)


def test_closed_rectangle_has_unit_h():
    rows = run_main_theorem(small(path="rectangle"))
    h = next(r for r in rows if r.quantity == "H_kappa")
    assert h.estimate == 1.0 and h.stderr == 0.0


def test_ratio_report():
    cfg = small(l1=4, l2=4, beta=1.0, kappa=1.7)
    rows = run_ratio(cfg, "gliozzi")
    assert rows[-1].quantity == "ratio_vs_H2" and rows[-1].passed
    assert run_ratio(cfg, "gliozzi") == rows
    assert run_ratio(small(l1=4, l2=4, margin=8), "gliozzi")[0].verdict == "rejected"


def test_short_line_report():
    cfg = load_config(experiment="short_line", text=CONFIG, overrides={"batches": 16})
    rows = run_short_line(cfg)
    diff = rows[-1]
    value, parts = short_line_bound(0.3, 1.8, 4)
    assert diff.bound == pytest.approx(value)
    assert "Kprime" in diff.note and set(parts) == {"K", "Kprime", "alpha0", "alpha1"}
    assert diff.passed
    assert run_short_line(small(kappa=1.0, path="line", l1=4))[0].verdict == "rejected"


def test_run_experiment_dispatch():
    with pytest.raises(KeyError):
        run_experiment(small(experiment="nope"))


def test_report_serialization():
    cfg = small()
    rows = run_main_theorem(small(path="rectangle", l1=1, l2=1))
    buf = io.StringIO()
    write_report_csv(rows, buf)
    table = list(csv.reader(io.StringIO(buf.getvalue())))
    assert tuple(table[0]) == REPORT_COLUMNS and len(table) == 2
    doc = json.loads(report_json(rows, {"config_hash": cfg.config_hash()}))
    assert doc["schema"] == SCHEMA and doc["rows"][0]["verdict"] == "rejected"


def test_property_suite_dec_scope():
    buf = io.StringIO()
    assert run_property_suite(["dec"], seed=0, out=buf) == 0
    doc = json.loads(buf.getvalue())
    assert doc["schema"] == "hlgt.proptest/1"
    assert all(r["passed"] for r in doc["results"])
