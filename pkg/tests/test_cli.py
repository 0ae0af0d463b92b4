import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pd2.cli import dispatch, parse_grid
from pd2.tables import Table, from_columnar, from_structured, to_columnar, to_structured

SEED = "20261018"


def run(capsys, *argv):
    code = dispatch(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# --- tables ---------------------------------------------------------------


cells = st.one_of(
    st.none(),
    st.booleans(),
    st.integers(-10**12, 10**12),
    st.floats(allow_nan=False),
    st.text(alphabet="abcxyz_:;-", min_size=1, max_size=8).filter(
        lambda s: s not in ("true", "false", "inf", "nan") and not s.lstrip("-").isdigit()),
)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(cells, cells, cells), max_size=8))
def test_columnar_round_trip(rows):
    t = Table(["a", "b", "c"], rows, {"seed": 7, "note": "x"})
    text = to_columnar(t)
    back = from_columnar(text)
    assert to_columnar(back) == text
    assert back.metadata == t.metadata


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(cells, cells), max_size=8))
def test_formats_carry_same_payload(rows):
    t = Table(["a", "b"], rows, {"k": 1})
    a = from_columnar(to_columnar(t))
    b = from_structured(to_structured(t))
    assert a.columns == b.columns and a.metadata == b.metadata
    for ra, rb in zip(a.rows, b.rows):
        for x, y in zip(ra, rb):
            if isinstance(x, float) and math.isnan(x):
                assert math.isnan(y)
            else:
                assert x == y


def test_float_precision():
    t = Table(["x"], [(0.1,), (1 / 3,), (math.inf,), (-math.inf,)])
    back = from_columnar(to_columnar(t))
    assert back.column("x") == [0.1, 1 / 3, math.inf, -math.inf]
    assert "0.10000000000000001" in to_columnar(t)


def test_rejects_commas_in_text():
    with pytest.raises(ValueError):
        to_columnar(Table(["x"], [("a,b",)]))


# --- grids ----------------------------------------------------------------


def test_parse_grid():
    assert parse_grid("1e3,1e4") == [1e3, 1e4]
    g = parse_grid("1e3:1e6:4")
    assert len(g) == 4 and g[0] == pytest.approx(1e3) and g[-1] == pytest.approx(1e6)
    assert g[1] == pytest.approx(1e4)


# --- commands -------------------------------------------------------------


def test_rates_s1(capsys):
    code, out, _ = run(capsys, "rates", "--which", "s1", "--p", "0.6")
    assert code == 0 and out.splitlines()[-1] == "1"


def test_rates_other(capsys):
    assert run(capsys, "rates", "--which", "j1", "--x", "-1")[1].splitlines()[-1] == "inf"
    out = run(capsys, "rates", "--which", "sigma2", "--alpha", "0.5", "--m", "2")[1]
    assert float(out.splitlines()[-1]) == pytest.approx(4.0, rel=1e-14)
    code, out, _ = run(capsys, "rates", "--which", "lambda-star", "--x", "1", "--y", "0", "--alpha", "0.5", "--m", "2")
    assert code == 0 and float(out.splitlines()[-1]) == pytest.approx(1.0)
    code, _, err = run(capsys, "rates", "--which", "sigma2")
    assert code == 1 and err.startswith("error:")


def test_cdf_v1(capsys):
    code, out, _ = run(capsys, "cdf-v1", "--alpha", "0.5", "--theta", "1", "--s-grid", "200")
    assert code == 0
    assert float(from_columnar(out).column("cdf")[-1]) >= 1 - 1e-12


def test_mdp_v1_byte_identical(capsys):
    argv = ["mdp-v1", "--alpha", "0.3", "--rho", "0.5", "--x", "1", "--theta-grid", "1e3,1e4,1e5,1e6"]
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b
    assert from_columnar(a).metadata["command"] == "mdp-v1"


def test_usage_errors(capsys):
    code, _, err = run(capsys, "rates", "--which", "s1", "--p", "0.6", "--bogus")
    assert code == 1 and err.startswith("error:") and len(err.strip().splitlines()) == 1
    code, _, err = run(capsys, "sample", "--alpha", "0.5", "--theta", "1")
    assert code == 1 and "--seed" in err
    code, _, err = run(capsys, "sample", "--alpha", "1.5", "--theta", "1", "--seed", "1")
    assert code == 1 and err.startswith("error:")
    code, _, err = run(capsys, "sample", "--alpha", "0.5", "--theta", "1", "--seed", str(2**64))
    assert code == 1
    code, _, _ = run(capsys, "mdp-v1", "--alpha", "0.3", "--rho", "1.5", "--x", "1", "--theta-grid", "1e3")
    assert code == 1


def test_ess_failure_exit_code(capsys):
    code, out, err = run(capsys, "sample", "--alpha", "0.5", "--theta", "300", "--method", "importance",
                         "--n", "200", "--stop-eps", "1e-3", "--top", "1", "--seed", SEED)
    assert code == 2 and "numerical failure" in err
    assert out


def test_seed_header_and_worker_independence(capsys):
    argv = ["small-ldp", "--a-grid", "0.2,0.1", "--k", "2", "--reps", "20000", "--seed", SEED]
    _, a, _ = run(capsys, *argv, "--workers", "1")
    _, b, _ = run(capsys, *argv, "--workers", "2")
    assert a == b
    meta = from_columnar(a).metadata
    assert meta["seed"] == int(SEED) and "config_hash" in meta and "version" in meta


def test_global_flags_before_command(capsys):
    _, a, _ = run(capsys, "--seed", SEED, "sample", "--alpha", "0.5", "--theta", "1", "--n", "2")
    _, b, _ = run(capsys, "sample", "--alpha", "0.5", "--theta", "1", "--n", "2", "--seed", SEED)
    assert a == b and a


def test_structured_equals_columnar(capsys):
    argv = ["sample", "--alpha", "0.4", "--theta", "2", "--method", "subordinator", "--jump-floor", "1e-6",
            "--n", "3", "--seed", SEED]
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv, "--format", "structured-text")
    ta, tb = from_columnar(a), from_structured(b)
    assert ta.columns == tb.columns and ta.rows == tb.rows and ta.metadata == tb.metadata


def test_density_cache(capsys, tmp_path):
    argv = ["density", "--alpha", "0.3", "--theta", "2", "--points", "0.4", "--points", "0.2",
            "--g-samples", "2000", "--seed", SEED, "--g-cache-dir", str(tmp_path)]
    code, a, _ = run(capsys, *argv)
    assert code == 0 and len(list(tmp_path.glob("g-*.json"))) == 1
    _, b, _ = run(capsys, *argv)
    assert a == b
    doc = json.loads(next(tmp_path.glob("g-*.json")).read_text())
    assert doc["n"] == 2000


def test_density_env_default(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("PD2_CACHE_DIR", str(tmp_path))
    code, _, _ = run(capsys, "density", "--alpha", "0.3", "--theta", "2", "--n-dim", "2", "--points", "0.4,0.2",
                     "--g-samples", "1000", "--seed", SEED)
    assert code == 0 and len(list(tmp_path.glob("g-*.json"))) == 1


def test_out_file(capsys, tmp_path):
    path = tmp_path / "t.csv"
    code, out, _ = run(capsys, "rates", "--which", "i", "--x", "3,2,1", "--out", str(path))
    assert code == 0 and out == "" and path.read_text().splitlines()[-1] == "6"


def test_check_suites(capsys):
    code, out, _ = run(capsys, "check", "--suite", "contraction")
    assert code == 0 and all(from_columnar(out).column("passed"))
    code, out, _ = run(capsys, "check", "--suite", "invariants")
    assert code == 0 and all(from_columnar(out).column("passed"))
    code, _, err = run(capsys, "check", "--suite", "consistency")
    assert code == 1 and "--seed" in err


def test_clt_and_mdp_p1_commands(capsys):
    code, out, _ = run(capsys, "clt-hm", "--alpha", "0.5", "--theta", "60", "--reps", "200", "--hm-tol", "1e-5",
                       "--seed", SEED)
    assert code == 0 and from_columnar(out).column("target_variance")[0] == pytest.approx(4.0)
    code, out, _ = run(capsys, "mdp-p1", "--alpha", "0.5", "--rho", "0.5", "--x", "-0.5", "--theta-grid", "20",
                       "--reps", "500", "--seed", SEED)
    assert code == 0 and from_columnar(out).column("hits")[0] >= 250
