import json
import math
from pathlib import Path

import pytest

from rectmatch.cli import main

DATA = Path(__file__).parent / "data"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def report(path):
    return json.loads(Path(path).read_text())


def test_gen_is_byte_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, "gen", "--n", 10, "--seed", 1, "--output", a)[0] == 0
    assert run(capsys, "gen", "--n", 10, "--seed", 1, "--output", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_rejects_zero(capsys):
    with pytest.raises(SystemExit) as info:
        main(["gen", "--n", "0", "--seed", "1"])
    assert info.value.code == 1


def test_gen_requires_seed(capsys):
    with pytest.raises(SystemExit) as info:
        main(["gen", "--n", "3"])
    assert info.value.code == 1


def test_gen_grid_x(capsys):
    code, out, _ = run(capsys, "gen", "--n", 4, "--seed", 3, "--model", "grid-x")
    assert code == 0
    assert [line.split(",")[0] for line in out.splitlines()[1:]] == ["0.25", "0.5", "0.75", "1.0"]


def test_solve_two_points(tmp_path, capsys):
    f = tmp_path / "two.csv"
    f.write_text("x,y,color\n0.2,0.3,R\n0.6,0.7,R\n")
    code, out, _ = run(capsys, "solve", "--input", f)
    rep = json.loads(out)
    assert code == 0
    assert (rep["n"], rep["size"], rep["pairs"], rep["optimal"]) == (2, 2, [[0, 1]], True)
    assert "nodes_explored" in rep and rep["version"]


def test_solve_greedy_not_above_exact(tmp_path, capsys):
    f = tmp_path / "i.csv"
    for seed in range(10):
        run(capsys, "gen", "--n", 14, "--seed", seed, "--output", f)
        _, out_e, _ = run(capsys, "solve", "--input", f)
        _, out_g, _ = run(capsys, "solve", "--input", f, "--solver", "greedy")
        assert json.loads(out_g)["size"] <= json.loads(out_e)["size"]
        assert len(json.loads(out_g)["trace"]["labels"]) == 14


def test_solve_malformed_csv(tmp_path, capsys):
    f = tmp_path / "bad.csv"
    f.write_text("x,y,color\n0.1,0.2,R\n0.3,zzz,B\n")
    code, _, err = run(capsys, "solve", "--input", f)
    assert code == 1 and "line 3" in err


def test_solve_budget_exceeded(tmp_path, capsys):
    f = tmp_path / "big.csv"
    run(capsys, "gen", "--n", 20, "--seed", 3, "--output", f)
    code, out, _ = run(capsys, "solve", "--input", f, "--limits-nodes", 2)
    assert code == 2
    assert json.loads(out)["optimal"] is False


def test_chain_two_state(capsys):
    code, out, _ = run(capsys, "chain", "--input", DATA / "chain2.json", "--n", 50, "--epsilon", 0.1)
    rep = json.loads(out)
    assert code == 0
    assert rep["alpha"] == pytest.approx(2 / 3, abs=1e-12)
    assert rep["lemma1"]["sandwich_holds"]


def test_chain_symmetric(capsys):
    code, out, _ = run(capsys, "chain", "--input", DATA / "symmetric.json", "--n", 30, "--epsilon", 0.2)
    rep = json.loads(out)["lemma1"]
    assert code == 0 and rep["n0"] == 1 and rep["sandwich_holds"]
    assert rep["exact"] == pytest.approx(29.0)


def test_chain_six_state_fixture(capsys):
    code, out, _ = run(capsys, "chain", "--input", DATA / "chain6.json", "--n", 500, "--epsilon", 0.05)
    rep = json.loads(out)["lemma1"]
    assert code == 0 and rep["lower"] <= rep["exact"] <= rep["upper"]


def test_chain_validation_failure(capsys):
    code, out, _ = run(capsys, "chain", "--input", DATA / "periodic.json", "--n", 10, "--epsilon", 0.1)
    assert code == 3
    assert json.loads(out)["validation"]["period"] == 2


def test_chain_bad_json(tmp_path, capsys):
    f = tmp_path / "c.json"
    f.write_text("{not json")
    assert run(capsys, "chain", "--input", f, "--n", 10, "--epsilon", 0.1)[0] == 1
    f.write_text(json.dumps({"P": [[1.0, 0.5], [0.0, 0.5]], "f": [0, 1]}))
    assert run(capsys, "chain", "--input", f, "--n", 10, "--epsilon", 0.1)[0] == 3


def test_counterexample_exact(capsys):
    _, out, _ = run(capsys, "counterexample", "--t", 4)
    rep = json.loads(out)
    assert rep["gap"]["num"] == 0
    _, out, _ = run(capsys, "counterexample", "--t", 5)
    rep = json.loads(out)
    assert rep["exact_conditional"] == {"num": 1, "den": 10}
    assert rep["conditional_below_one_step"] is True


def test_counterexample_monte_carlo(capsys):
    code, out, _ = run(capsys, "counterexample", "--t", 5, "--trials", "1e5", "--seed", 11)
    rep = json.loads(out)
    cond = rep["empirical"]["conditional"]
    assert code == 0 and cond["trials"] == 100000
    assert abs(cond["value"] - 0.1) <= 4 * math.sqrt(0.1 * 0.9 / 1e5)


def test_counterexample_needs_seed_for_trials(capsys):
    assert run(capsys, "counterexample", "--t", 5, "--trials", 10)[0] == 1
    assert run(capsys, "counterexample", "--t", 2)[0] == 1


def test_concentration_bounded_diff(capsys):
    code, out, _ = run(capsys, "concentration", "--check", "bounded-diff", "--n", 12,
                       "--trials", 40, "--seed", 2)
    rep = json.loads(out)
    assert code == 0
    assert rep["max_position_delta"] <= 4 and rep["max_color_delta"] <= 2


def test_concentration_borel(capsys):
    _, out, _ = run(capsys, "concentration", "--check", "borel", "--epsilon", 2, "--n0", 1)
    r = math.exp(-0.1)
    assert json.loads(out)["bc_partial_sum"] == pytest.approx(2 * r / (1 - r), abs=1e-9)


def test_concentration_fekete_csv(tmp_path, capsys):
    csv_path = tmp_path / "f.csv"
    code, out, _ = run(capsys, "concentration", "--check", "fekete", "--ns", "2,4,6",
                       "--trials", 400, "--seed", 5, "--csv", csv_path)
    rep = json.loads(out)
    row2 = rep["rows"][0]
    assert code == 0 and abs(row2["mean"] - 0.5) <= 4 * row2["stderr"]
    assert csv_path.read_text().startswith("n,mean,stderr,sup_so_far\n")


def test_concentration_tail_and_report(capsys):
    code, out, _ = run(capsys, "concentration", "--check", "tail", "--n", 16, "--epsilon", 0.5,
                       "--trials", 100, "--seed", 1)
    assert code == 0 and json.loads(out)["vacuous"] is True
    code, out, _ = run(capsys, "concentration", "--check", "report", "--n", 10, "--epsilon", 0.3,
                       "--chain", DATA / "chain2.json")
    rep = json.loads(out)
    assert code == 0 and rep["beta"] == pytest.approx((2 / 3 - 0.83) / 3)


def test_concentration_missing_flags(capsys):
    assert run(capsys, "concentration", "--check", "tail", "--n", 10)[0] == 1
