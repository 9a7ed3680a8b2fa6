import json

from conftest import triangle_instance
from nearstable import fileformat as ff
from nearstable.cli import main


def write_triangle(path):
    doc = ff.shm_to_doc(triangle_instance())
    path.write_text(ff.canonical_dumps(doc), encoding="utf-8")


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_solve_shm_produces_passing_certificate(tmp_path, capsys):
    inst = tmp_path / "tri.json"
    sol = tmp_path / "sol.json"
    write_triangle(inst)
    code, out, _ = run(capsys, "solve", "shm", str(inst), "-o", str(sol))
    assert code == 0
    payload = json.loads(out)
    assert payload["verdict"] == "pass"
    # the triangle admits no stable matching at q, so the revision is exactly one
    assert payload["certificate"]["bounds"]["max_deviation"] == 1
    assert payload["certificate"]["bounds"]["sum_deviation"] == 1
    solution = json.loads(sol.read_text())
    assert solution["kind"] == "shm-solution"


def test_solve_cacq_roundtrip(tmp_path, capsys):
    from conftest import two_by_two_cacq

    inst = tmp_path / "cacq.json"
    sol = tmp_path / "sol.json"
    inst.write_text(ff.canonical_dumps(ff.cacq_to_doc(two_by_two_cacq())), encoding="utf-8")
    code, out, _ = run(capsys, "solve", "cacq", str(inst), "-o", str(sol))
    assert code == 0
    payload = json.loads(out)
    assert payload["verdict"] == "pass"
    assert payload["certificate"]["bounds"]["max_deviation"] == 0
    assert json.loads(sol.read_text())["matching"] == ["e11"]
    assert run(capsys, "verify", str(inst), str(sol))[0] == 0


def test_verify_accepts_solver_output(tmp_path, capsys):
    inst = tmp_path / "tri.json"
    sol = tmp_path / "sol.json"
    write_triangle(inst)
    assert run(capsys, "solve", "shm", str(inst), "-o", str(sol))[0] == 0
    code, out, _ = run(capsys, "verify", str(inst), str(sol))
    assert code == 0
    assert json.loads(out)["verdict"] == "pass"


def test_verify_rejects_blocking_solution(tmp_path, capsys):
    inst = tmp_path / "tri.json"
    bad = tmp_path / "bad.json"
    write_triangle(inst)
    bad.write_text(
        ff.canonical_dumps(ff.shm_solution_to_doc({"a": 1, "b": 1, "c": 1}, ["ab"])),
        encoding="utf-8",
    )
    code, out, _ = run(capsys, "verify", str(inst), str(bad))
    assert code == 2
    payload = json.loads(out)
    assert payload["verdict"] == "fail"
    assert payload["certificate"]["verifier"]["blocking_edges"] == ["bc"]


def test_gen_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(capsys, "gen", "fixtures", "--seed", "7", "-o", str(a))[0] == 0
    assert run(capsys, "gen", "fixtures", "--seed", "7", "-o", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_smf_round_verify_chain(tmp_path, capsys):
    inst = tmp_path / "smf.json"
    sol = tmp_path / "sol.json"
    assert run(capsys, "gen", "smf", "--seed", "3", "--commodities", "2", "-o", str(inst))[0] == 0
    code, out, _ = run(capsys, "round", "smf", str(inst), "--mode", "balanced", "-o", str(sol))
    assert code == 0
    assert json.loads(out)["verdict"] == "pass"
    assert run(capsys, "verify", str(inst), str(sol))[0] == 0


def test_round_requires_embedded_flow(tmp_path, capsys):
    inst = tmp_path / "smf.json"
    assert run(capsys, "gen", "smf", "--seed", "3", "--commodities", "1", "-o", str(inst))[0] == 0
    doc = json.loads(inst.read_text())
    del doc["flow"]
    inst.write_text(ff.canonical_dumps(doc), encoding="utf-8")
    code, _, err = run(capsys, "round", "smf", str(inst))
    assert code == 3
    assert "flow" in err


def test_missing_file_is_input_error(capsys):
    code, _, err = run(capsys, "solve", "shm", "/definitely/not/here.json")
    assert code == 3
    assert "input error" in err


def test_malformed_json_is_input_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{", encoding="utf-8")
    code, _, err = run(capsys, "solve", "shm", str(bad))
    assert code == 3


def test_unknown_field_is_input_error(tmp_path, capsys):
    doc = ff.shm_to_doc(triangle_instance())
    doc["extra"] = True
    bad = tmp_path / "bad.json"
    bad.write_text(ff.canonical_dumps(doc), encoding="utf-8")
    assert run(capsys, "solve", "shm", str(bad))[0] == 3


def test_pivot_budget_env(tmp_path, capsys, monkeypatch):
    inst = tmp_path / "tri.json"
    write_triangle(inst)
    monkeypatch.setenv("NEARSTABLE_PIVOT_BUDGET", "1")
    code, _, err = run(capsys, "solve", "shm", str(inst))
    assert code == 4
    assert "resource limit" in err
    monkeypatch.setenv("NEARSTABLE_PIVOT_BUDGET", "bogus")
    assert run(capsys, "solve", "shm", str(inst))[0] == 3


def test_oracle_subcommand(tmp_path, capsys):
    inst = tmp_path / "tri.json"
    write_triangle(inst)
    code, out, _ = run(capsys, "oracle", str(inst), "--bound", "1", "--sum-bound", "1")
    assert code == 0
    payload = json.loads(out)
    assert payload["count"] == len(payload["results"]) > 0


def test_summary_format(tmp_path, capsys):
    inst = tmp_path / "tri.json"
    write_triangle(inst)
    code, out, _ = run(capsys, "--format", "summary", "solve", "shm", str(inst))
    assert code == 0
    assert "verdict: pass" in out
    assert "wall_clock_ms" in out


def test_certificates_byte_identical_across_runs(tmp_path, capsys):
    inst = tmp_path / "tri.json"
    write_triangle(inst)
    _, out1, _ = run(capsys, "solve", "shm", str(inst))
    _, out2, _ = run(capsys, "solve", "shm", str(inst))
    assert out1 == out2


def test_trace_file_written(tmp_path, capsys):
    inst = tmp_path / "tri.json"
    trace = tmp_path / "trace.log"
    write_triangle(inst)
    assert run(capsys, "solve", "shm", str(inst), "--trace", str(trace))[0] == 0
    lines = trace.read_text().splitlines()
    assert any(line.startswith("pivot ") for line in lines)
    assert any(line.startswith("round step") for line in lines)
